"""Value types shared across the pipeline."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class Crystal:
    """A full unit cell.

    lattice: 3x3 matrix whose COLUMNS are the cell vectors (angstroms), so
    cartesian = lattice @ frac.  numbers: atomic numbers, shape (D,).
    frac_coords: fractional coordinates in [0, 1), shape (D, 3).
    """

    lattice: np.ndarray
    numbers: np.ndarray
    frac_coords: np.ndarray

    def __post_init__(self):
        self.lattice = np.asarray(self.lattice, dtype=float)
        self.numbers = np.asarray(self.numbers, dtype=int)
        self.frac_coords = np.asarray(self.frac_coords, dtype=float) % 1.0
        if self.lattice.shape != (3, 3):
            raise ValueError("lattice must be 3x3")
        if np.linalg.det(self.lattice) <= 0:
            raise ValueError("lattice must be right-handed")
        if self.frac_coords.shape != (len(self.numbers), 3):
            raise ValueError("coordinate/number shape mismatch")
        if np.any(self.numbers < 1):
            raise ValueError("atomic numbers must be >= 1")

    @property
    def num_atoms(self) -> int:
        return len(self.numbers)

    @property
    def volume(self) -> float:
        return float(np.linalg.det(self.lattice))

    @property
    def cart_coords(self) -> np.ndarray:
        return (self.lattice @ self.frac_coords.T).T


@dataclass
class AsymmetricUnit:
    """Symmetry-reduced description: one representative per orbit.

    site_codes holds one label index (0..12, see sitesym.OP_LABELS) per
    canonical axis per atom, shape (D, 15).
    """

    sg: int
    k: np.ndarray
    numbers: np.ndarray
    coords: np.ndarray
    site_codes: np.ndarray
    property_value: float | None = field(default=None)

    def __post_init__(self):
        self.k = np.asarray(self.k, dtype=float)
        self.numbers = np.atleast_1d(np.asarray(self.numbers, dtype=int))
        self.coords = np.atleast_2d(np.asarray(self.coords, dtype=float)) % 1.0
        self.site_codes = np.atleast_2d(np.asarray(self.site_codes, dtype=int))
        if not 1 <= int(self.sg) <= 230:
            raise ValueError(f"space group number out of range: {self.sg}")
        if self.k.shape != (6,):
            raise ValueError("k must have shape (6,)")
        n = len(self.numbers)
        if n < 1:
            raise ValueError("asymmetric unit needs at least one atom")
        if self.coords.shape != (n, 3) or self.site_codes.shape != (n, 15):
            raise ValueError("inconsistent per-atom array shapes")

    @property
    def num_atoms(self) -> int:
        return len(self.numbers)
