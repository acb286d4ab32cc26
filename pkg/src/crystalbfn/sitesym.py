"""Site-symmetry encoding, class matching, Wyckoff projection, cell assembly.

A stabilizer subgroup is summarised as one operation label per canonical
axis (15 axes x 13 labels, shipped in data/axes.json).  Per space group the
realizable stabilizer subgroups are enumerated once by probing a rational
grid, grouped into conjugacy classes and cached; predicted codes are matched
to the nearest class by Frobenius distance between one-hot encodings.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from pathlib import Path

import numpy as np

from .lattice import decode_lattice, encode_lattice, mask_k
from .spacegroups import DEFAULT_TOL, min_image_distance, spacegroup_ops
from .structures import AsymmetricUnit, Crystal

_AXES_PATH = Path(__file__).resolve().parent / "data" / "axes.json"

with open(_AXES_PATH) as _fh:
    _AXES_DATA = json.load(_fh)

AXES = tuple(tuple(v) for v in _AXES_DATA["axes"])
OP_LABELS = tuple(_AXES_DATA["labels"])
NUM_AXES = len(AXES)
NUM_LABELS = len(OP_LABELS)
_LABEL_INDEX = {lab: i for i, lab in enumerate(OP_LABELS)}

# Grid used to discover special positions: all rationals with denominator
# <= 12 plus one generic point for the trivial stabilizer.
_GRID_MAX_DENOMINATOR = 12
_PROBE_TOL = 1e-9


class ReconstructionError(RuntimeError):
    """Raised when an asymmetric unit cannot be expanded into a valid cell."""


def _primitive(vec: np.ndarray) -> tuple:
    v = np.asarray(vec, dtype=int)
    nz = v[v != 0]
    if nz.size == 0:
        raise ValueError("zero vector has no direction")
    v = v // np.gcd.reduce(np.abs(nz))
    for comp in v:
        if comp != 0:
            if comp < 0:
                v = -v
            break
    return tuple(int(x) for x in v)


def _rotation_axis(rot: np.ndarray) -> tuple | None:
    """Primitive integer eigenvector of a proper rotation for eigenvalue +1."""
    m = rot - np.eye(3, dtype=int)
    for i in range(3):
        for j in range(i + 1, 3):
            cr = np.cross(m[i], m[j])
            if np.any(cr):
                return _primitive(cr)
    return None


def _op_order(rot: np.ndarray) -> int:
    r = np.eye(3, dtype=int)
    for n in range(1, 7):
        r = r @ rot
        if np.array_equal(r, np.eye(3, dtype=int)):
            return n
    raise ValueError("rotation part of order > 6 is not crystallographic")


def classify_rotation(rot: np.ndarray):
    """Classify a rotation part: ('1'|'-1', None) or (kind, axis).

    kind is 'rot_n' for proper rotations (n in 2,3,4,6), 'mirror' for
    improper twofolds, 'rotoinv_n' for -3, -4, -6.  The axis is the
    primitive integer direction (plane normal for mirrors).
    """
    rot = np.asarray(rot, dtype=int)
    det = int(round(np.linalg.det(rot)))
    if det == 1:
        n = _op_order(rot)
        if n == 1:
            return "1", None
        return f"rot_{n}", _rotation_axis(rot)
    neg = -rot
    if np.array_equal(neg, np.eye(3, dtype=int)):
        return "-1", None
    n = _op_order(neg)
    axis = _rotation_axis(neg)
    if n == 2:
        return "mirror", axis
    return f"rotoinv_{n}", axis


def encode_site_symmetry(stab) -> np.ndarray:
    """Per-axis operation labels (indices into OP_LABELS) of a point group.

    For each canonical axis the strongest element about it is recorded; the
    inversion, which has no axis, sets the designated '-1' label on every
    axis that carries nothing else.  Operations about a non-canonical axis
    are rejected (non-crystallographic input).
    """
    per_axis = {axis: {"rot": set(), "mirror": False, "rotoinv": set()} for axis in AXES}
    has_inversion = False
    for op in stab:
        kind, axis = classify_rotation(op.rot)
        if kind == "1":
            continue
        if kind == "-1":
            has_inversion = True
            continue
        if axis not in per_axis:
            raise ValueError(f"operation axis {axis} is not one of the 15 canonical axes")
        if kind == "mirror":
            per_axis[axis]["mirror"] = True
        elif kind.startswith("rot_"):
            per_axis[axis]["rot"].add(int(kind[4:]))
        else:
            per_axis[axis]["rotoinv"].add(int(kind[8:]))

    code = np.zeros(NUM_AXES, dtype=int)
    for i, axis in enumerate(AXES):
        rot = per_axis[axis]["rot"]
        mirror = per_axis[axis]["mirror"]
        rotoinv = per_axis[axis]["rotoinv"]
        if 6 in rot and mirror:
            label = "6/m"
        elif 4 in rot and mirror:
            label = "4/m"
        elif 6 in rotoinv or (3 in rot and mirror):
            label = "-6"
        elif 3 in rotoinv:
            label = "-3"
        elif 4 in rotoinv:
            label = "-4"
        elif 6 in rot:
            label = "6"
        elif 4 in rot:
            label = "4"
        elif 3 in rot:
            label = "3"
        elif 2 in rot and mirror:
            label = "2/m"
        elif 2 in rot:
            label = "2"
        elif mirror:
            label = "m"
        elif has_inversion:
            label = "-1"
        else:
            label = "1"
        code[i] = _LABEL_INDEX[label]
    return code


def code_one_hot(code: np.ndarray) -> np.ndarray:
    code = np.asarray(code, dtype=int)
    out = np.zeros((NUM_AXES, NUM_LABELS))
    out[np.arange(NUM_AXES), code] = 1.0
    return out


def code_distance(code_a: np.ndarray, code_b: np.ndarray) -> float:
    """Frobenius distance between one-hot encodings of two codes."""
    return float(np.linalg.norm(code_one_hot(code_a) - code_one_hot(code_b)))


# ---------------------------------------------------------------------------
# Realizable stabilizer classes per space group
# ---------------------------------------------------------------------------

@dataclass
class StabilizerClass:
    """One conjugacy class of site stabilizers.

    members: every distinct subgroup in the class (same ops up to
    conjugation but anchored at different points/orientations), each with
    its own encoded site-symmetry code.
    """

    order: int
    members: list
    codes: list


def _probe_grid() -> np.ndarray:
    vals = sorted({Fraction(p, q) for q in range(1, _GRID_MAX_DENOMINATOR + 1)
                   for p in range(q)})
    arr = np.array([float(v) for v in vals])
    grid = np.array(list(itertools.product(arr, repeat=3)))
    generic = np.array([[0.123456789, 0.287654321, 0.3901234567]])
    return np.vstack([grid, generic])


@lru_cache(maxsize=32)
def site_symmetry_classes(sg: int) -> tuple:
    """All realizable stabilizer classes of a space group, largest first."""
    ops = spacegroup_ops(sg)
    pts = _probe_grid()
    fixed = np.zeros((len(pts), len(ops)), dtype=bool)
    for j, op in enumerate(ops):
        img = pts @ op.rot.T + op.trans
        delta = (img - pts + 0.5) % 1.0 - 0.5
        fixed[:, j] = (np.abs(delta) < _PROBE_TOL).all(axis=1)
    subsets = np.unique(fixed, axis=0)

    seen_subgroups = {}
    for row in subsets:
        member = tuple(op for j, op in enumerate(ops) if row[j])
        key = frozenset(op.key for op in member)
        seen_subgroups[key] = member

    classes: dict[frozenset, dict] = {}
    assigned: set[frozenset] = set()
    for key, member in sorted(seen_subgroups.items(), key=lambda kv: -len(kv[1])):
        if key in assigned:
            continue
        # conjugating the stabilizer of x by g gives the stabilizer of g(x):
        # enumerate the full class
        members = {}
        for g in ops:
            ginv = g.inverse()
            conj = tuple(g.compose(s).compose(ginv) for s in member)
            ckey = frozenset(op.key for op in conj)
            if ckey not in members:
                members[ckey] = conj
        for ckey in members:
            assigned.add(ckey)
        canonical = min(tuple(sorted(k)) for k in members)
        classes[canonical] = {
            "order": len(member),
            "members": [members[k] for k in sorted(members, key=lambda kk: tuple(sorted(kk)))],
        }

    out = []
    for canonical in sorted(classes, key=lambda c: (-classes[c]["order"], c)):
        entry = classes[canonical]
        codes = [encode_site_symmetry(m) for m in entry["members"]]
        out.append(StabilizerClass(order=entry["order"], members=entry["members"], codes=codes))
    return tuple(out)


def match_site_symmetry(code: np.ndarray, sg: int, x: np.ndarray | None = None):
    """Nearest realizable stabilizer for a predicted site-symmetry code.

    Returns (class_index, member_ops, frobenius_distance).  Ties in the
    code distance are broken by stabilizer order (largest first) and then,
    when a coordinate is supplied, by how little the projection onto the
    candidate's fixed set displaces it; this geometric tie-break is what
    separates e.g. two identically-encoded special positions at different
    anchors.
    """
    code = np.asarray(code, dtype=int)
    classes = site_symmetry_classes(sg)
    best = None
    for ci, cls in enumerate(classes):
        for mi, mcode in enumerate(cls.codes):
            dist = code_distance(code, mcode)
            cand = (dist, -cls.order, ci, mi)
            if best is None or cand[:2] < best[:2]:
                candidates = [cand]
                best = cand
            elif cand[:2] == best[:2]:
                candidates.append(cand)
    if x is not None and len(candidates) > 1:
        scored = []
        for dist, negorder, ci, mi in candidates:
            member = classes[ci].members[mi]
            try:
                proj = project_to_wyckoff(x, member)
                disp = min_image_distance(proj, x)
            except ReconstructionError:
                disp = np.inf
            scored.append((dist, negorder, disp, ci, mi))
        scored.sort()
        _, _, _, ci, mi = scored[0]
    else:
        candidates.sort()
        _, _, ci, mi = candidates[0]
    cls = classes[ci]
    return ci, cls.members[mi], code_distance(code, cls.codes[mi])


def project_to_wyckoff(x: np.ndarray, stab_ops, tol: float = 1e-8) -> np.ndarray:
    """Project a point onto the fixed set of a stabilizer by group averaging.

    Each image g(x) is unwrapped to the periodic copy nearest x before
    averaging.  The result must be invariant under every operator; if the
    unwrapping was inconsistent (point too far from the fixed set) a
    ReconstructionError is raised.
    """
    x = np.asarray(x, dtype=float) % 1.0
    acc = np.zeros(3)
    for op in stab_ops:
        img = op.apply(x)
        img = img - np.round(img - x)  # nearest periodic image of img to x
        acc += img
    proj = acc / len(stab_ops)
    for op in stab_ops:
        if min_image_distance(op.apply(proj), proj) > tol:
            raise ReconstructionError(
                "projected point is not fixed by its stabilizer (inconsistent unwrap)")
    return proj % 1.0


def expand_orbit(x: np.ndarray, sg: int, dedup_tol: float = 1e-6) -> np.ndarray:
    """Images of x under the full group, deduplicated at machine-level tolerance."""
    x = np.asarray(x, dtype=float) % 1.0
    images: list[np.ndarray] = []
    for op in spacegroup_ops(sg):
        y = op.apply(x) % 1.0
        if not any(min_image_distance(y, z) < dedup_tol for z in images):
            images.append(y)
    return np.array(images)


def reconstruct_unit_cell(au: AsymmetricUnit, collision_tol: float = DEFAULT_TOL) -> Crystal:
    """Expand an asymmetric unit into a full conventional cell.

    Per representative: match the predicted site-symmetry code to a
    realizable stabilizer, snap the coordinate onto its fixed set, then
    replicate over the whole group.  Distinct expanded sites closer than
    collision_tol (minimum image, fractional) abort the reconstruction.
    """
    lattice = decode_lattice(mask_k(au.k, au.sg))
    all_coords: list[np.ndarray] = []
    all_numbers: list[int] = []
    origin: list[int] = []
    for i in range(au.num_atoms):
        _, member, _ = match_site_symmetry(au.site_codes[i], au.sg, x=au.coords[i])
        snapped = project_to_wyckoff(au.coords[i], member)
        images = expand_orbit(snapped, au.sg)
        for img in images:
            all_coords.append(img)
            all_numbers.append(int(au.numbers[i]))
            origin.append(i)
    coords = np.array(all_coords)
    for a in range(len(coords)):
        for b in range(a + 1, len(coords)):
            if min_image_distance(coords[a], coords[b]) < collision_tol:
                raise ReconstructionError(
                    f"expanded orbits collide: representatives {origin[a]} and {origin[b]} "
                    f"produce sites {coords[a]} / {coords[b]}")
    return Crystal(lattice=lattice, numbers=np.array(all_numbers), frac_coords=coords)


def extract_asymmetric_unit(crystal: Crystal, sg: int, tol: float = DEFAULT_TOL,
                            property_value: float | None = None) -> AsymmetricUnit:
    """Reduce a full cell to one representative per crystallographic orbit.

    The sites must be closed under the group within tol; violations are
    reported with the offending operator and site.  Representatives are the
    lexicographically smallest coordinates of their orbits.
    """
    ops = spacegroup_ops(sg)
    coords = crystal.frac_coords
    numbers = crystal.numbers
    n = len(coords)

    def find_site(y, number):
        for j in range(n):
            if numbers[j] == number and min_image_distance(coords[j], y) < tol:
                return j
        return None

    # union-find over sites linked by symmetry operations
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for op in ops:
            y = op.apply(coords[i]) % 1.0
            j = find_site(y, numbers[i])
            if j is None:
                raise ValueError(
                    f"sites are not closed under space group {sg}: operator "
                    f"rot={op.rot.tolist()}, trans={np.round(op.trans, 6).tolist()} maps "
                    f"site {i} at {np.round(coords[i], 6).tolist()} onto nothing")
            ri, rj = find(i), find(j)
            if ri != rj:
                parent[max(ri, rj)] = min(ri, rj)

    orbits: dict[int, list[int]] = {}
    for i in range(n):
        orbits.setdefault(find(i), []).append(i)

    rep_numbers, rep_coords, rep_codes = [], [], []
    for members in orbits.values():
        ordered = sorted(members, key=lambda i: tuple(np.round(coords[i], 9)))
        rep = ordered[0]
        stab = tuple(op for op in ops
                     if min_image_distance(op.apply(coords[rep]) % 1.0, coords[rep]) < tol)
        rep_numbers.append(int(numbers[rep]))
        rep_coords.append(coords[rep])
        rep_codes.append(encode_site_symmetry(stab))

    order = sorted(range(len(rep_coords)), key=lambda i: tuple(np.round(rep_coords[i], 9)))
    k, _ = encode_lattice(crystal.lattice)
    return AsymmetricUnit(
        sg=sg,
        k=mask_k(k, sg),
        numbers=np.array([rep_numbers[i] for i in order]),
        coords=np.array([rep_coords[i] for i in order]),
        site_codes=np.array([rep_codes[i] for i in order]),
        property_value=property_value,
    )
