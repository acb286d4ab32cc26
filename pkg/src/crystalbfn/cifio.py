"""CIF subset parsing/writing plus line-delimited record persistence.

Only the minimal tag set is supported: the six cell parameters, an
atom-site loop with element symbol and fractional coordinates, and the
space-group number tag.  Symmetry-operation loops in input files are
ignored; the space-group label is authoritative and all sites are written
expanded (P1 listing).
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import elements
from .lattice import cell_parameters, lattice_from_parameters
from .structures import Crystal

SG_TAG = "_symmetry_Int_Tables_number"

_CELL_TAGS = ("_cell_length_a", "_cell_length_b", "_cell_length_c",
              "_cell_angle_alpha", "_cell_angle_beta", "_cell_angle_gamma")


class CifError(ValueError):
    """Malformed or unsupported CIF content; message carries the line number."""


def _parse_number(token: str, lineno: int) -> float:
    # strip a trailing standard-uncertainty suffix like 5.640(3)
    if "(" in token:
        token = token[:token.index("(")]
    try:
        return float(token)
    except ValueError:
        raise CifError(f"line {lineno}: malformed number {token!r}") from None


def parse_cif(text: str):
    """Parse a CIF string into (Crystal, space-group number or None)."""
    tags: dict[str, float] = {}
    sg = None
    numbers: list[int] = []
    coords: list[list[float]] = []

    lines = text.splitlines()
    i = 0
    while i < len(lines):
        raw = lines[i]
        line = raw.strip()
        lineno = i + 1
        if not line or line.startswith("#"):
            i += 1
            continue
        if line.startswith(SG_TAG):
            parts = line.split()
            if len(parts) < 2:
                raise CifError(f"line {lineno}: {SG_TAG} without a value")
            sg = int(_parse_number(parts[1], lineno))
            i += 1
            continue
        if line.startswith("_cell_"):
            parts = line.split()
            if parts[0] in _CELL_TAGS:
                if len(parts) < 2:
                    raise CifError(f"line {lineno}: {parts[0]} without a value")
                tags[parts[0]] = _parse_number(parts[1], lineno)
            i += 1
            continue
        if line == "loop_":
            headers = []
            i += 1
            while i < len(lines) and lines[i].strip().startswith("_"):
                headers.append(lines[i].strip())
                i += 1
            if not any(h.startswith("_atom_site") for h in headers):
                # skip an unrelated loop body
                while i < len(lines):
                    body = lines[i].strip()
                    if not body or body.startswith(("_", "loop_", "#", "data_")):
                        break
                    i += 1
                continue
            try:
                col_sym = next(j for j, h in enumerate(headers)
                               if h in ("_atom_site_type_symbol", "_atom_site_label"))
                col_x = headers.index("_atom_site_fract_x")
                col_y = headers.index("_atom_site_fract_y")
                col_z = headers.index("_atom_site_fract_z")
            except (StopIteration, ValueError):
                raise CifError(f"line {i}: atom-site loop lacks symbol or fract_x/y/z columns") from None
            while i < len(lines):
                body = lines[i].strip()
                lineno = i + 1
                if not body or body.startswith(("_", "loop_", "#", "data_")):
                    break
                fields = body.split()
                if len(fields) < len(headers):
                    raise CifError(f"line {lineno}: expected {len(headers)} fields, got {len(fields)}")
                sym = fields[col_sym].rstrip("0123456789+-")
                try:
                    numbers.append(elements.atomic_number(sym))
                except ValueError:
                    raise CifError(f"line {lineno}: unknown element symbol {fields[col_sym]!r}") from None
                coords.append([_parse_number(fields[c], lineno) for c in (col_x, col_y, col_z)])
                i += 1
            continue
        i += 1

    missing = [t for t in _CELL_TAGS if t not in tags]
    if missing:
        raise CifError(f"missing cell tags: {', '.join(missing)}")
    if not numbers:
        raise CifError("no atom sites found")
    lattice = lattice_from_parameters(*(tags[t] for t in _CELL_TAGS))
    crystal = Crystal(lattice=lattice, numbers=np.array(numbers),
                      frac_coords=np.array(coords) % 1.0)
    return crystal, sg


def write_cif(crystal: Crystal, sg: int | None = None, name: str = "generated") -> str:
    """Serialise a crystal as a P1 atom listing with the sg recorded as a tag."""
    (a, b, c), (alpha, beta, gamma) = cell_parameters(crystal.lattice)
    out = [f"data_{name}"]
    if sg is not None:
        out.append(f"{SG_TAG}  {int(sg)}")
    out += [
        f"_cell_length_a  {a:.6f}",
        f"_cell_length_b  {b:.6f}",
        f"_cell_length_c  {c:.6f}",
        f"_cell_angle_alpha  {alpha:.6f}",
        f"_cell_angle_beta  {beta:.6f}",
        f"_cell_angle_gamma  {gamma:.6f}",
        "loop_",
        "_atom_site_type_symbol",
        "_atom_site_label",
        "_atom_site_fract_x",
        "_atom_site_fract_y",
        "_atom_site_fract_z",
    ]
    for idx, (z, xyz) in enumerate(zip(crystal.numbers, crystal.frac_coords), start=1):
        sym = elements.symbol(int(z))
        out.append(f"{sym} {sym}{idx} {xyz[0]:.6f} {xyz[1]:.6f} {xyz[2]:.6f}")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# Line-delimited record files (manifests, diagnostics)
# ---------------------------------------------------------------------------

def write_records(path, header: dict, records) -> None:
    """JSON-lines file: one header record then one record per line."""
    path = Path(path)
    with open(path, "w") as fh:
        fh.write(json.dumps({"kind": "header", **header}, sort_keys=True) + "\n")
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def read_records(path):
    """Returns (header dict, list of record dicts)."""
    path = Path(path)
    header = None
    records = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: bad record ({exc})") from None
            if rec.get("kind") == "header":
                header = rec
            else:
                records.append(rec)
    if header is None:
        raise ValueError(f"{path}: missing header record")
    return header, records
