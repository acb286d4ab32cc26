"""Bidirectional map between lattice matrices and the constrained 6-vector k.

A lattice matrix L (columns are the cell vectors, in angstroms) is
decomposed as L = Q * exp(S) with Q orthogonal and S symmetric; S is
expanded in a fixed orthogonal basis of symmetric matrices, S = sum_i
k_i * B_i.  Rotating the crystal changes only Q, so k is a
rotation-invariant shape descriptor.  Decoding uses the canonical gauge
Q = I, giving symmetric positive-definite lattices.

Space groups constrain k componentwise: per crystal family some
components are pinned to constants (`mask_k`).  The constant for the
hexagonal family is -ln(3)/4, which makes the decoded a/b axes meet at
120 degrees.
"""

from __future__ import annotations

import math

import numpy as np

HEX_K1 = -math.log(3.0) / 4.0

_B = np.array([
    [[0, 1, 0], [1, 0, 0], [0, 0, 0]],
    [[0, 0, 1], [0, 0, 0], [1, 0, 0]],
    [[0, 0, 0], [0, 0, 1], [0, 1, 0]],
    [[1, 0, 0], [0, -1, 0], [0, 0, 0]],
    [[1, 0, 0], [0, 1, 0], [0, 0, -2]],
    [[1, 0, 0], [0, 1, 0], [0, 0, 1]],
], dtype=float)

# Component masks per space-group range: (first sg, last sg, free component
# indices, {pinned index: constant}).
_MASK_TABLE = (
    (1, 2, (0, 1, 2, 3, 4, 5), {}),
    (3, 15, (1, 3, 4, 5), {0: 0.0, 2: 0.0}),
    (16, 74, (3, 4, 5), {0: 0.0, 1: 0.0, 2: 0.0}),
    (75, 142, (4, 5), {0: 0.0, 1: 0.0, 2: 0.0, 3: 0.0}),
    (143, 194, (4, 5), {0: HEX_K1, 1: 0.0, 2: 0.0, 3: 0.0}),
    (195, 230, (5,), {0: 0.0, 1: 0.0, 2: 0.0, 3: 0.0, 4: 0.0}),
)


def basis_matrices() -> np.ndarray:
    """The six symmetric basis matrices, shape (6, 3, 3). B6 is the identity."""
    return _B.copy()


def _check_sg(sg: int) -> int:
    sg = int(sg)
    if not 1 <= sg <= 230:
        raise ValueError(f"space group number must lie in 1..230, got {sg}")
    return sg


def free_components(sg: int):
    """Indices of the k components left free by the space group."""
    sg = _check_sg(sg)
    for lo, hi, free, _ in _MASK_TABLE:
        if lo <= sg <= hi:
            return free
    raise AssertionError("unreachable")


def mask_k(k, sg: int) -> np.ndarray:
    """Overwrite constrained components of k with their family constants."""
    sg = _check_sg(sg)
    k = np.array(k, dtype=float)
    if k.shape != (6,):
        raise ValueError(f"k must have shape (6,), got {k.shape}")
    for lo, hi, _, pinned in _MASK_TABLE:
        if lo <= sg <= hi:
            for idx, value in pinned.items():
                k[idx] = value
            return k
    raise AssertionError("unreachable")


def mask_arrays(sg: int):
    """Mask as arrays: (free, const) with masked(k) = k * free + const.

    This form stays differentiable when k is an autograd tensor.
    """
    sg = _check_sg(sg)
    free = np.ones(6)
    const = np.zeros(6)
    for lo, hi, _, pinned in _MASK_TABLE:
        if lo <= sg <= hi:
            for idx, value in pinned.items():
                free[idx] = 0.0
                const[idx] = value
            return free, const
    raise AssertionError("unreachable")


def _symmetric_log(p: np.ndarray) -> np.ndarray:
    """Matrix logarithm of a symmetric positive-definite matrix."""
    w, v = np.linalg.eigh(p)
    if np.any(w <= 0.0):
        raise ValueError("matrix is not positive definite")
    return (v * np.log(w)) @ v.T


def _symmetric_exp(s: np.ndarray) -> np.ndarray:
    """Matrix exponential of a symmetric matrix."""
    w, v = np.linalg.eigh(s)
    return (v * np.exp(w)) @ v.T


def encode_lattice(lattice: np.ndarray):
    """Decompose L = Q * exp(sum k_i B_i); returns (k, Q).

    The polar factor is Q = L (L^T L)^(-1/2); k_i are the Frobenius
    projections of S = log((L^T L)^(1/2)) onto the basis.  Left-handed or
    singular lattices are rejected.
    """
    lattice = np.asarray(lattice, dtype=float)
    if lattice.shape != (3, 3):
        raise ValueError(f"lattice must be 3x3, got {lattice.shape}")
    det = np.linalg.det(lattice)
    if det <= 0.0:
        raise ValueError(f"lattice must be right-handed and non-degenerate (det={det:g})")
    gram = lattice.T @ lattice
    s = 0.5 * _symmetric_log(gram)
    p_inv = _symmetric_exp(-s)
    q = lattice @ p_inv
    k = np.array([np.tensordot(s, b, axes=2) / np.tensordot(b, b, axes=2) for b in _B])
    return k, q


def decode_lattice(k) -> np.ndarray:
    """Build the canonical (symmetric positive-definite) lattice exp(sum k_i B_i)."""
    k = np.asarray(k, dtype=float)
    if k.shape != (6,):
        raise ValueError(f"k must have shape (6,), got {k.shape}")
    if not np.all(np.isfinite(k)):
        raise ValueError("k must be finite")
    s = np.tensordot(k, _B, axes=1)
    return _symmetric_exp(s)


def cell_parameters(lattice: np.ndarray):
    """Cell lengths (a, b, c) and angles (alpha, beta, gamma) in degrees."""
    lattice = np.asarray(lattice, dtype=float)
    a, b, c = (np.linalg.norm(lattice[:, i]) for i in range(3))

    def angle(i, j):
        cosv = lattice[:, i] @ lattice[:, j] / (np.linalg.norm(lattice[:, i]) * np.linalg.norm(lattice[:, j]))
        return math.degrees(math.acos(np.clip(cosv, -1.0, 1.0)))

    return (a, b, c), (angle(1, 2), angle(0, 2), angle(0, 1))


def lattice_from_parameters(a, b, c, alpha, beta, gamma) -> np.ndarray:
    """Standard Cartesian cell: first vector along x, second in the xy-plane."""
    for name, v in (("a", a), ("b", b), ("c", c)):
        if v <= 0.0:
            raise ValueError(f"cell length {name} must be positive, got {v}")
    for name, v in (("alpha", alpha), ("beta", beta), ("gamma", gamma)):
        if not 0.0 < v < 180.0:
            raise ValueError(f"cell angle {name} must lie in (0, 180), got {v}")
    al, be, ga = (math.radians(x) for x in (alpha, beta, gamma))
    v1 = [a, 0.0, 0.0]
    v2 = [b * math.cos(ga), b * math.sin(ga), 0.0]
    cx = c * math.cos(be)
    cy = c * (math.cos(al) - math.cos(be) * math.cos(ga)) / math.sin(ga)
    cz_sq = c * c - cx * cx - cy * cy
    if cz_sq <= 0.0:
        raise ValueError("cell angles do not define a valid 3D cell")
    v3 = [cx, cy, math.sqrt(cz_sq)]
    return np.array([v1, v2, v3]).T
