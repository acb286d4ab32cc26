import math

import numpy as np
import pytest

from crystalbfn.lattice import encode_lattice
from crystalbfn.metrics import charge_neutrality, composition, structural_validity, structure_match
from crystalbfn.prototypes import load_prototypes
from crystalbfn.sitesym import extract_asymmetric_unit, reconstruct_unit_cell


def by_name(name):
    return next(p for p in load_prototypes() if p.name == name)


def test_corpus_contents():
    protos = load_prototypes()
    names = {p.name for p in protos}
    assert {"rocksalt", "cesium_chloride", "perovskite", "fluorite", "rutile", "wurtzite"} <= names
    sgs = {p.name: p.sg for p in protos}
    assert sgs["rocksalt"] == 225 and sgs["fluorite"] == 225
    assert sgs["cesium_chloride"] == 221 and sgs["perovskite"] == 221
    assert sgs["rutile"] == 136
    assert 143 <= sgs["wurtzite"] <= 194


def test_expected_sizes():
    rock = by_name("rocksalt")
    assert rock.asymmetric_unit_size == 2 and rock.cell_atom_count == 8
    perov = by_name("perovskite")
    assert perov.asymmetric_unit_size == 3 and perov.cell_atom_count == 5


@pytest.mark.parametrize("name", ["rocksalt", "cesium_chloride", "perovskite",
                                  "fluorite", "rutile", "wurtzite"])
def test_extraction_and_reconstruction(name):
    proto = by_name(name)
    crystal = proto.crystal()
    assert crystal.num_atoms == proto.cell_atom_count
    au = extract_asymmetric_unit(crystal, proto.sg)
    assert au.num_atoms == proto.asymmetric_unit_size
    rebuilt = reconstruct_unit_cell(au)
    assert rebuilt.num_atoms == proto.cell_atom_count
    assert structure_match(crystal, rebuilt)


@pytest.mark.parametrize("name", ["rocksalt", "cesium_chloride", "perovskite",
                                  "fluorite", "rutile", "wurtzite"])
def test_validity(name):
    crystal = by_name(name).crystal()
    assert structural_validity(crystal)
    assert charge_neutrality(composition(crystal)) is True


def test_hexagonal_prototype_hits_mask_constant():
    wurtzite = by_name("wurtzite")
    k, _ = encode_lattice(wurtzite.crystal().lattice)
    assert abs(k[0] + math.log(3.0) / 4.0) < 1e-6


def test_orbit_sizes_divide_group_order():
    from crystalbfn.spacegroups import spacegroup_ops
    for proto in load_prototypes():
        crystal = proto.crystal()
        au = extract_asymmetric_unit(crystal, proto.sg)
        n_ops = len(spacegroup_ops(proto.sg))
        rebuilt = reconstruct_unit_cell(au)
        for z in set(rebuilt.numbers.tolist()):
            assert n_ops % int((rebuilt.numbers == z).sum()) == 0


def test_corrupted_manifest_reports_file(tmp_path, monkeypatch):
    import json
    from crystalbfn import prototypes as proto_mod

    bad = tmp_path / "prototypes.json"
    bad.write_text("{not json")
    monkeypatch.setattr(proto_mod, "_MANIFEST", bad)
    proto_mod.load_prototypes.cache_clear()
    try:
        with pytest.raises(RuntimeError, match="prototypes.json"):
            proto_mod.load_prototypes()
        missing = json.dumps({"prototypes": [
            {"name": "x", "sg": 1, "file": "nope.cif",
             "asymmetric_unit_size": 1, "cell_atom_count": 1}]})
        bad.write_text(missing)
        proto_mod.load_prototypes.cache_clear()
        with pytest.raises(RuntimeError, match="nope.cif"):
            proto_mod.load_prototypes()
    finally:
        proto_mod.load_prototypes.cache_clear()
