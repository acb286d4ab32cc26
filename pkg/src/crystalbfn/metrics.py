"""Proxy metrics over generated structure sets.

The compositional-validity check and the structure matcher are simplified
stand-ins for heavier external tooling (oxidation-state assignment search
and distance-multiset comparison respectively); every report carries
flags naming these simplifications so numbers are not compared across
tools silently.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import elements
from .structures import Crystal

MIN_INTERATOMIC_DISTANCE = 0.5   # angstrom
MATCH_CUTOFF = 6.0               # angstrom
MATCH_RTOL = 0.1
AMU_PER_A3_TO_G_PER_CM3 = 1.66053906660

SIMPLIFICATIONS = (
    "charge_neutrality: exhaustive search over embedded common oxidation states",
    "structure_match: reduced composition + sorted minimum-image distance multisets",
    "space-group labels of generated structures are the conditioning labels, not re-detected",
)


def _pair_distances(crystal: Crystal, cutoff: float | None = None) -> np.ndarray:
    """Minimum-image Cartesian distances between distinct sites, sorted."""
    coords = crystal.frac_coords
    lat = crystal.lattice
    n = len(coords)
    shifts = np.array(list(itertools.product((-1, 0, 1), repeat=3)), dtype=float)
    out = []
    for i in range(n):
        for j in range(i + 1, n):
            delta = (coords[j] - coords[i] + 0.5) % 1.0 - 0.5
            cand = (lat @ (delta + shifts).T).T
            dist = float(np.min(np.linalg.norm(cand, axis=1)))
            if cutoff is None or dist <= cutoff:
                out.append(dist)
    return np.sort(np.array(out))


def structural_validity(crystal: Crystal, min_distance: float = MIN_INTERATOMIC_DISTANCE) -> bool:
    """True iff every pair of distinct sites is at least min_distance apart."""
    if crystal.num_atoms < 2:
        return True
    return bool(_pair_distances(crystal)[0] >= min_distance)


def composition(crystal: Crystal) -> dict[int, int]:
    comp: dict[int, int] = {}
    for z in crystal.numbers:
        comp[int(z)] = comp.get(int(z), 0) + 1
    return comp


def reduced_composition(comp: dict[int, int]) -> dict[int, int]:
    g = math.gcd(*comp.values()) if len(comp) > 1 else next(iter(comp.values()))
    return {z: n // g for z, n in comp.items()}


def charge_neutrality(comp: dict[int, int]):
    """True/False when decidable, None when an element lacks oxidation data.

    All atoms of one element share an oxidation state; the assignment
    search is exhaustive over the embedded common-state lists.  Elemental
    compositions are neutral by definition.
    """
    if not comp:
        raise ValueError("empty composition")
    if len(comp) == 1:
        return True
    comp = reduced_composition(comp)
    state_lists = []
    for z in sorted(comp):
        states = elements.oxidation_states(z)
        if not states:
            return None
        state_lists.append([(s, comp[z]) for s in states])
    for combo in itertools.product(*state_lists):
        if sum(s * n for s, n in combo) == 0:
            return True
    return False


def wasserstein_1d(sample_a, sample_b) -> float:
    """Exact 1-D W1 distance: area between the two empirical CDFs."""
    xs = np.sort(np.asarray(sample_a, dtype=float))
    ys = np.sort(np.asarray(sample_b, dtype=float))
    if xs.size == 0 or ys.size == 0:
        raise ValueError("both samples must be non-empty")
    grid = np.concatenate([xs, ys])
    grid.sort()
    cdf_x = np.searchsorted(xs, grid[:-1], side="right") / xs.size
    cdf_y = np.searchsorted(ys, grid[:-1], side="right") / ys.size
    return float(np.sum(np.abs(cdf_x - cdf_y) * np.diff(grid)))


def jsd_spacegroups(hist_a: dict, hist_b: dict) -> float:
    """Jensen-Shannon distance (base-2, so in [0, 1]) between sg histograms."""
    support = sorted(set(hist_a) | set(hist_b))
    if not support:
        raise ValueError("both histograms are empty")
    p = np.array([hist_a.get(sg, 0) for sg in support], dtype=float)
    q = np.array([hist_b.get(sg, 0) for sg in support], dtype=float)
    if p.sum() <= 0 or q.sum() <= 0:
        raise ValueError("histograms must have positive mass")
    p /= p.sum()
    q /= q.sum()
    m = 0.5 * (p + q)

    def kl(a, b):
        mask = a > 0
        return float(np.sum(a[mask] * np.log2(a[mask] / b[mask])))

    divergence = 0.5 * kl(p, m) + 0.5 * kl(q, m)
    return math.sqrt(max(divergence, 0.0))


def structure_match(c1: Crystal, c2: Crystal, cutoff: float = MATCH_CUTOFF,
                    rtol: float = MATCH_RTOL) -> bool:
    """Same reduced composition and matching pair-distance multisets."""
    if reduced_composition(composition(c1)) != reduced_composition(composition(c2)):
        return False
    d1 = _pair_distances(c1, cutoff)
    d2 = _pair_distances(c2, cutoff)
    if d1.size != d2.size:
        return False
    if d1.size == 0:
        return True
    return bool(np.all(np.abs(d1 - d2) <= rtol * np.maximum(d1, d2)))


def uniqueness_rate(crystals) -> float:
    """1 - duplicate fraction under greedy first-match grouping."""
    crystals = list(crystals)
    if not crystals:
        raise ValueError("empty structure set")
    representatives: list[Crystal] = []
    for c in crystals:
        if not any(structure_match(c, rep) for rep in representatives):
            representatives.append(c)
    return len(representatives) / len(crystals)


def novelty_rate(crystals, reference) -> float:
    """Fraction of structures with no match in the reference set."""
    crystals = list(crystals)
    reference = list(reference)
    if not crystals:
        raise ValueError("empty structure set")
    novel = sum(1 for c in crystals if not any(structure_match(c, r) for r in reference))
    return novel / len(crystals)


def density(crystal: Crystal) -> float:
    """Mass density in g/cm^3 from the embedded atomic-mass table."""
    mass = sum(elements.atomic_mass(int(z)) for z in crystal.numbers)
    return mass * AMU_PER_A3_TO_G_PER_CM3 / crystal.volume


def num_unique_elements(crystal: Crystal) -> int:
    return len(set(int(z) for z in crystal.numbers))


@dataclass
class MetricsReport:
    n_generated: int
    structural_validity_rate: float
    compositional_validity_rate: float
    compositional_indeterminate: int
    wdist_density: float
    wdist_num_elements: float
    jsd_spacegroups_bits: float
    uniqueness: float
    novelty: float
    simplifications: tuple = field(default_factory=lambda: SIMPLIFICATIONS)

    def to_dict(self) -> dict:
        return {
            "n_generated": self.n_generated,
            "structural_validity_rate": self.structural_validity_rate,
            "compositional_validity_rate": self.compositional_validity_rate,
            "compositional_indeterminate": self.compositional_indeterminate,
            "wdist_density": self.wdist_density,
            "wdist_num_elements": self.wdist_num_elements,
            "jsd_spacegroups_bits": self.jsd_spacegroups_bits,
            "uniqueness": self.uniqueness,
            "novelty": self.novelty,
            "simplifications": list(self.simplifications),
        }


def evaluate_set(generated, generated_sgs, reference, reference_sgs) -> MetricsReport:
    """Full proxy-metric report for a generated set against a reference set.

    Distribution metrics follow the protocol of computing on the valid
    subset of the generated structures; space-group histograms use the
    supplied labels.
    """
    generated = list(generated)
    reference = list(reference)
    if not generated or not reference:
        raise ValueError("need non-empty generated and reference sets")
    struct_ok = [structural_validity(c) for c in generated]
    comp_results = [charge_neutrality(composition(c)) for c in generated]
    comp_ok = [r is True for r in comp_results]
    indeterminate = sum(1 for r in comp_results if r is None)
    valid = [c for c, s, q in zip(generated, struct_ok, comp_ok) if s and q]
    valid_sgs = [sg for sg, s, q in zip(generated_sgs, struct_ok, comp_ok) if s and q]
    pool = valid if valid else generated
    pool_sgs = valid_sgs if valid else list(generated_sgs)

    hist_gen: dict[int, int] = {}
    for sg in pool_sgs:
        hist_gen[int(sg)] = hist_gen.get(int(sg), 0) + 1
    hist_ref: dict[int, int] = {}
    for sg in reference_sgs:
        hist_ref[int(sg)] = hist_ref.get(int(sg), 0) + 1

    return MetricsReport(
        n_generated=len(generated),
        structural_validity_rate=sum(struct_ok) / len(generated),
        compositional_validity_rate=sum(comp_ok) / len(generated),
        compositional_indeterminate=indeterminate,
        wdist_density=wasserstein_1d([density(c) for c in pool],
                                     [density(c) for c in reference]),
        wdist_num_elements=wasserstein_1d([num_unique_elements(c) for c in pool],
                                          [num_unique_elements(c) for c in reference]),
        jsd_spacegroups_bits=jsd_spacegroups(hist_gen, hist_ref),
        uniqueness=uniqueness_rate(generated),
        novelty=novelty_rate(generated, reference),
    )
