"""Space-group operator algebra: the embedded operator table, orbits, stabilizers.

Operators act on fractional coordinates as x -> rot @ x + trans (mod 1).
The table ships as a generated text file (see tools/gen_spacegroup_table.py
for provenance and verification); one conventional setting per group.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from pathlib import Path

import numpy as np

DATA_PATH = Path(__file__).resolve().parent / "data" / "spacegroups.txt"

# Default geometric tolerance (fractional coordinates) for deciding whether
# an operator fixes / maps onto a site.
DEFAULT_TOL = 1e-3


@dataclass(frozen=True)
class SymOp:
    """One affine symmetry operation in fractional coordinates."""

    rot: np.ndarray
    trans: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rot", np.asarray(self.rot, dtype=int))
        object.__setattr__(self, "trans", np.asarray(self.trans, dtype=float) % 1.0)

    def apply(self, x: np.ndarray) -> np.ndarray:
        return self.rot @ np.asarray(x, dtype=float) + self.trans

    def compose(self, other: "SymOp") -> "SymOp":
        return SymOp(self.rot @ other.rot, self.rot @ other.trans + self.trans)

    def inverse(self) -> "SymOp":
        rinv = np.linalg.inv(self.rot).round().astype(int)
        return SymOp(rinv, -(rinv @ self.trans))

    @property
    def is_identity(self) -> bool:
        return bool(np.array_equal(self.rot, np.eye(3, dtype=int)) and
                    np.allclose(self.trans % 1.0, 0.0, atol=1e-9))

    @property
    def key(self):
        t24 = tuple(int(round(v * 24)) % 24 for v in self.trans)
        return tuple(int(v) for v in self.rot.flatten()) + t24

    def __eq__(self, other):
        return isinstance(other, SymOp) and self.key == other.key

    def __hash__(self):
        return hash(self.key)


IDENTITY = SymOp(np.eye(3, dtype=int), np.zeros(3))


def _parse_table(path: Path):
    groups: dict[int, tuple] = {}
    labels: dict[int, str] = {}
    sg = None
    ops: list[SymOp] = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#") or line.startswith("format-version"):
                continue
            if line.startswith("sg "):
                if sg is not None:
                    groups[sg] = tuple(ops)
                parts = line.split()
                sg = int(parts[1])
                labels[sg] = parts[3]
                ops = []
            else:
                toks = line.split()
                if len(toks) != 12:
                    raise ValueError(f"{path}:{lineno}: expected 12 fields, got {len(toks)}")
                rot = np.array([int(v) for v in toks[:9]]).reshape(3, 3)
                trans = np.array([float(Fraction(v)) for v in toks[9:]])
                ops.append(SymOp(rot, trans))
    if sg is not None:
        groups[sg] = tuple(ops)
    if sorted(groups) != list(range(1, 231)):
        raise ValueError(f"operator table at {path} does not cover groups 1..230")
    return groups, labels


@lru_cache(maxsize=1)
def _table(path_override: str | None = None):
    path = Path(path_override or os.environ.get("CRYSTALBFN_SPACEGROUP_FILE", DATA_PATH))
    return _parse_table(path)


def spacegroup_ops(sg: int) -> tuple[SymOp, ...]:
    """All general-position operators of the conventional setting."""
    sg = int(sg)
    if not 1 <= sg <= 230:
        raise ValueError(f"space group number must lie in 1..230, got {sg}")
    return _table()[0][sg]


def spacegroup_symbol(sg: int) -> str:
    sg = int(sg)
    if not 1 <= sg <= 230:
        raise ValueError(f"space group number must lie in 1..230, got {sg}")
    return _table()[1][sg]


def min_image_delta(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Shortest fractional difference a - b on the torus, componentwise in [-0.5, 0.5)."""
    return (np.asarray(a) - np.asarray(b) + 0.5) % 1.0 - 0.5


def min_image_distance(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(min_image_delta(a, b)))


def stabilizer(x: np.ndarray, sg: int, tol: float = DEFAULT_TOL) -> tuple[SymOp, ...]:
    """Operators fixing x (minimum-image metric); verified to be a subgroup."""
    x = np.asarray(x, dtype=float) % 1.0
    stab = tuple(op for op in spacegroup_ops(sg)
                 if min_image_distance(op.apply(x), x) < tol)
    keys = {op.key for op in stab}
    for a in stab:
        for b in stab:
            if a.compose(b).key not in keys:
                raise ValueError("stabilizer is not closed; tolerance too loose for this point")
    return stab


def orbit(x: np.ndarray, sg: int, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Deduplicated images of x under the group, shape (M, 3)."""
    x = np.asarray(x, dtype=float) % 1.0
    images: list[np.ndarray] = []
    for op in spacegroup_ops(sg):
        y = op.apply(x) % 1.0
        if not any(min_image_distance(y, z) < tol for z in images):
            images.append(y)
    return np.array(images)
