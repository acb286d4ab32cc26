import math

import numpy as np
import pytest
import torch

from crystalbfn import continuous as cts, discrete as disc
from crystalbfn.lattice import mask_k
from crystalbfn.network import NetConfig, Network
from crystalbfn.sampling import SampleConfig, generate, sample_sg_and_count

HIST = [[225, 2, 2], [221, 3, 1], [1, 4, 1]]


@pytest.fixture(scope="module")
def untrained_model():
    torch.manual_seed(11)
    net = Network(NetConfig(hidden_dim=12, embed_dim=6, num_layers=2,
                            fourier_order=2, num_classes=8))
    extra = {
        "k_classes": 8,
        "histogram": HIST,
        "schedules": {"sigma_x": 0.02, "sigma_k": 0.02,
                      "beta1_atoms": 0.75, "beta1_sites": 2.0},
        "property_mean": None,
        "property_std": None,
    }
    return net, extra


def test_sg_count_single_entry():
    rng = np.random.default_rng(0)
    for _ in range(5):
        assert sample_sg_and_count([[136, 2, 4]], rng) == (136, 2)


def test_sg_count_matches_histogram_frequencies():
    rng = np.random.default_rng(1)
    n = 100_000
    draws = [sample_sg_and_count(HIST, rng) for _ in range(n)]
    total = sum(row[2] for row in HIST)
    for sg, d, count in HIST:
        p = count / total
        freq = sum(1 for s in draws if s == (sg, d)) / n
        se = math.sqrt(p * (1 - p) / n)
        assert abs(freq - p) < 3 * se


def test_sg_override_keeps_conditional_count():
    rng = np.random.default_rng(2)
    draws = {sample_sg_and_count(HIST, rng, fixed_sg=221) for _ in range(50)}
    assert draws == {(221, 3)}


def test_sg_override_outside_support_uses_marginal_sizes():
    rng = np.random.default_rng(3)
    sgs, sizes = zip(*(sample_sg_and_count(HIST, rng, fixed_sg=194) for _ in range(50)))
    assert set(sgs) == {194}
    assert set(sizes) <= {2, 3, 4}


def test_empty_histogram_rejected():
    with pytest.raises(ValueError):
        sample_sg_and_count([], np.random.default_rng(0))


def test_generate_contracts(untrained_model):
    net, extra = untrained_model
    records = generate(net, extra, SampleConfig(n_steps=7, count=6, seed=4))
    assert len(records) == 6
    for rec in records:
        au = rec.asymmetric_unit
        assert np.all((au.coords >= 0.0) & (au.coords < 1.0))
        assert np.all((au.numbers >= 1) & (au.numbers <= extra["k_classes"]))
        assert np.array_equal(au.k, mask_k(au.k, au.sg))
        assert rec.status in ("ok", "reconstruction_failed")
        if rec.status == "ok":
            assert rec.crystal is not None
            assert np.all(rec.crystal.frac_coords >= 0.0)
            assert np.all(rec.crystal.frac_coords < 1.0)
        # accuracy telescoping is exact per modality
        sched = extra["schedules"]
        assert rec.accumulated_accuracy["x"] == cts.beta(1.0, sched["sigma_x"])
        assert rec.accumulated_accuracy["k"] == cts.beta(1.0, sched["sigma_k"])
        assert rec.accumulated_accuracy["a"] == disc.beta(1.0, sched["beta1_atoms"])
        assert rec.accumulated_accuracy["s"] == disc.beta(1.0, sched["beta1_sites"])


def test_generate_deterministic(untrained_model):
    net, extra = untrained_model
    cfg = SampleConfig(n_steps=5, count=3, seed=9)
    rec1 = generate(net, extra, cfg)
    rec2 = generate(net, extra, cfg)
    for a, b in zip(rec1, rec2):
        assert a.sg == b.sg and a.num_atoms == b.num_atoms
        assert np.array_equal(a.asymmetric_unit.coords, b.asymmetric_unit.coords)
        assert np.array_equal(a.asymmetric_unit.k, b.asymmetric_unit.k)
        assert np.array_equal(a.asymmetric_unit.numbers, b.asymmetric_unit.numbers)
        assert np.array_equal(a.asymmetric_unit.site_codes, b.asymmetric_unit.site_codes)


def test_generate_threads_match_serial(untrained_model):
    net, extra = untrained_model
    serial = generate(net, extra, SampleConfig(n_steps=4, count=4, seed=21, threads=1))
    parallel = generate(net, extra, SampleConfig(n_steps=4, count=4, seed=21, threads=3))
    for a, b in zip(serial, parallel):
        assert a.index == b.index
        assert np.array_equal(a.asymmetric_unit.coords, b.asymmetric_unit.coords)


def test_single_step_loop_calls_network_twice(untrained_model):
    net, extra = untrained_model
    calls = {"n": 0}
    original = Network.forward

    def counting(self, *args, **kwargs):
        calls["n"] += 1
        return original(self, *args, **kwargs)

    Network.forward = counting
    try:
        generate(net, extra, SampleConfig(n_steps=1, count=1, seed=0))
    finally:
        Network.forward = original
    assert calls["n"] == 2  # one loop step plus the final estimate


def test_fixed_sg_propagates(untrained_model):
    net, extra = untrained_model
    records = generate(net, extra, SampleConfig(n_steps=3, count=4, sg=225, seed=1))
    assert all(rec.sg == 225 for rec in records)


def test_target_requires_conditioned_checkpoint(untrained_model):
    net, extra = untrained_model
    with pytest.raises(ValueError, match="unconditioned"):
        generate(net, extra, SampleConfig(n_steps=2, count=1, target=1.0))


def test_conditioned_checkpoint_requires_target():
    torch.manual_seed(12)
    net = Network(NetConfig(hidden_dim=8, embed_dim=4, num_layers=1,
                            fourier_order=1, num_classes=4, conditioned=True))
    extra = {"k_classes": 4, "histogram": [[1, 2, 1]],
             "schedules": {"sigma_x": 0.02, "sigma_k": 0.02,
                           "beta1_atoms": 0.75, "beta1_sites": 2.0},
             "property_mean": 1.0, "property_std": 0.5}
    with pytest.raises(ValueError, match="requires a target"):
        generate(net, extra, SampleConfig(n_steps=2, count=1))
    records = generate(net, extra, SampleConfig(n_steps=2, count=1, target=1.0))
    assert len(records) == 1


def test_config_validation():
    with pytest.raises(ValueError):
        SampleConfig(n_steps=0)
    with pytest.raises(ValueError):
        SampleConfig(count=0)
    with pytest.raises(ValueError):
        SampleConfig(threads=0)


def test_property_standardization_at_mean_is_zero():
    from crystalbfn.training import standardize_property
    assert standardize_property(3.7, (3.7, 1.9)) == 0.0
    assert standardize_property(5.6, (3.7, 1.9)) == pytest.approx(1.0)
