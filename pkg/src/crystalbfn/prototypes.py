"""Bundled prototype-structure corpus used for tests and desk-scale training."""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

from .cifio import parse_cif
from .structures import Crystal

_DATA_DIR = Path(__file__).resolve().parent / "data"
_MANIFEST = _DATA_DIR / "prototypes.json"


@dataclass(frozen=True)
class PrototypeRecord:
    name: str
    sg: int
    cif_text: str
    asymmetric_unit_size: int
    cell_atom_count: int

    def crystal(self) -> Crystal:
        crystal, sg = parse_cif(self.cif_text)
        if sg != self.sg:
            raise ValueError(f"prototype {self.name}: CIF tag sg={sg} != manifest sg={self.sg}")
        return crystal


@lru_cache(maxsize=1)
def load_prototypes() -> tuple[PrototypeRecord, ...]:
    try:
        with open(_MANIFEST) as fh:
            manifest = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise RuntimeError(f"cannot load prototype manifest {_MANIFEST}: {exc}") from None
    records = []
    for entry in manifest["prototypes"]:
        path = _DATA_DIR / "prototypes" / entry["file"]
        try:
            text = path.read_text()
        except OSError as exc:
            raise RuntimeError(f"cannot load prototype data file {path}: {exc}") from None
        records.append(PrototypeRecord(
            name=entry["name"],
            sg=int(entry["sg"]),
            cif_text=text,
            asymmetric_unit_size=int(entry["asymmetric_unit_size"]),
            cell_atom_count=int(entry["cell_atom_count"]),
        ))
    return tuple(records)
