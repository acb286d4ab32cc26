"""Element lookups: symbols, atomic masses, common oxidation states."""

from __future__ import annotations

import json
from functools import lru_cache
from pathlib import Path

_DATA_PATH = Path(__file__).resolve().parent / "data" / "elements.json"


@lru_cache(maxsize=1)
def _elements() -> dict:
    with open(_DATA_PATH) as fh:
        data = json.load(fh)
    return {int(z): entry for z, entry in data["elements"].items()}


@lru_cache(maxsize=1)
def _by_symbol() -> dict:
    return {entry["symbol"]: z for z, entry in _elements().items()}

MAX_Z = 96


def symbol(z: int) -> str:
    try:
        return _elements()[int(z)]["symbol"]
    except KeyError:
        raise ValueError(f"no element data for atomic number {z}") from None


def atomic_number(sym: str) -> int:
    try:
        return _by_symbol()[sym]
    except KeyError:
        raise ValueError(f"unknown element symbol {sym!r}") from None


def atomic_mass(z: int) -> float:
    try:
        return _elements()[int(z)]["mass"]
    except KeyError:
        raise ValueError(f"no element data for atomic number {z}") from None


def oxidation_states(z: int) -> tuple[int, ...]:
    """Common oxidation states; empty tuple when none are tabulated."""
    try:
        return tuple(_elements()[int(z)]["oxidation_states"])
    except KeyError:
        raise ValueError(f"no element data for atomic number {z}") from None
