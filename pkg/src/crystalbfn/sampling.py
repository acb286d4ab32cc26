"""n-step generative loop producing crystals, with optional property targets."""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import torch

from . import continuous as cts, discrete as disc
from .lattice import mask_k
from .network import Network, load_checkpoint
from .sitesym import NUM_AXES, NUM_LABELS, ReconstructionError, reconstruct_unit_cell
from .structures import AsymmetricUnit, Crystal
from .training import standardize_property


@dataclass
class SampleConfig:
    n_steps: int = 100
    count: int = 1
    sg: int | None = None
    target: float | None = None
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        if self.count < 1:
            raise ValueError("count must be >= 1")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")


@dataclass
class SampleRecord:
    index: int
    sg: int
    num_atoms: int
    n_steps: int
    status: str                  # "ok" | "reconstruction_failed"
    asymmetric_unit: AsymmetricUnit
    crystal: Crystal | None
    error: str | None
    seconds_sampling: float
    seconds_reconstruction: float
    accumulated_accuracy: dict = field(default_factory=dict)

    def diagnostics(self) -> dict:
        return {
            "kind": "sample",
            "index": self.index,
            "sg": self.sg,
            "num_atoms": self.num_atoms,
            "n_steps": self.n_steps,
            "status": self.status,
            "error": self.error,
            "seconds_sampling": self.seconds_sampling,
            "seconds_reconstruction": self.seconds_reconstruction,
        }


def sample_sg_and_count(histogram, rng: np.random.Generator, fixed_sg: int | None = None):
    """Draw (space group, asymmetric-unit size) from the empirical joint.

    histogram: iterable of (sg, size, count) rows.  A fixed sg bypasses the
    marginal draw but keeps the count draw conditional on that sg.
    """
    rows = [(int(sg), int(d), int(n)) for sg, d, n in histogram]
    if not rows:
        raise ValueError("empty histogram")
    if fixed_sg is None:
        sg_totals: dict[int, int] = {}
        for sg, _, n in rows:
            sg_totals[sg] = sg_totals.get(sg, 0) + n
        sgs = sorted(sg_totals)
        weights = np.array([sg_totals[sg] for sg in sgs], dtype=float)
        sg = int(rng.choice(sgs, p=weights / weights.sum()))
    else:
        sg = int(fixed_sg)
    cond = [(d, n) for row_sg, d, n in rows if row_sg == sg]
    if not cond:
        # sg forced outside the training support: borrow the marginal size law
        cond_totals: dict[int, int] = {}
        for _, d, n in rows:
            cond_totals[d] = cond_totals.get(d, 0) + n
        cond = sorted(cond_totals.items())
    sizes = [d for d, _ in cond]
    weights = np.array([n for _, n in cond], dtype=float)
    d = int(rng.choice(sizes, p=weights / weights.sum()))
    return sg, d


def _draw_rows(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One categorical draw per row of a row-stochastic array."""
    flat = probs.reshape(-1, probs.shape[-1])
    cdf = np.cumsum(flat, axis=-1)
    u = rng.uniform(size=(flat.shape[0], 1)) * cdf[:, -1:]
    idx = (u > cdf).sum(axis=-1)
    return idx.reshape(probs.shape[:-1])


def _sample_one(net: Network, extra: dict, config: SampleConfig, index: int,
                target_std: float | None) -> SampleRecord:
    rng = np.random.default_rng([config.seed, index])
    sched = extra["schedules"]
    k_classes = int(extra["k_classes"])
    sg, d = sample_sg_and_count(extra["histogram"], rng, fixed_sg=config.sg)
    n = config.n_steps

    betas_x = [cts.beta(i / n, sched["sigma_x"]) for i in range(n + 1)]
    betas_k = [cts.beta(i / n, sched["sigma_k"]) for i in range(n + 1)]
    betas_a = [disc.beta(i / n, sched["beta1_atoms"]) for i in range(n + 1)]
    betas_s = [disc.beta(i / n, sched["beta1_sites"]) for i in range(n + 1)]
    k_low = np.array(extra["k_low"]) if "k_low" in extra else None
    k_high = np.array(extra["k_high"]) if "k_high" in extra else None

    state_x = cts.ContinuousState(np.zeros((d, 3)), 1.0)
    state_k = cts.ContinuousState(np.zeros(6), 1.0)
    theta_a = disc.prior_state(d, k_classes)
    theta_s = disc.prior_state(d * NUM_AXES, NUM_LABELS)
    acc = {"x": 0.0, "k": 0.0, "a": 0.0, "s": 0.0}

    t_start = time.perf_counter()
    with torch.no_grad():
        def estimates(t: float):
            out = net(state_k.mean, state_x.mean,
                      theta_a.probs, theta_s.probs.reshape(d, NUM_AXES, NUM_LABELS),
                      t, sg, target=target_std)
            eps_x = out.eps_x.numpy()
            eps_k = out.eps_k.numpy()
            if t <= cts.T_MIN:
                x_hat = np.zeros((d, 3))
                k_hat = np.zeros(6)
            else:
                x_hat = cts.output_estimate(state_x.mean, t, sched["sigma_x"], eps_x, wrap=True)
                k_hat = cts.output_estimate(state_k.mean, t, sched["sigma_k"], eps_k, wrap=False)
            if k_low is not None:
                # like the wrap for coordinates, keep lattice estimates inside
                # the training hull so the loop cannot run off the manifold
                k_hat = np.clip(k_hat, k_low, k_high)
            k_hat = mask_k(k_hat, sg)
            probs_a = disc.output_probs(out.logits_a.numpy())
            probs_s = disc.output_probs(out.logits_s.numpy()).reshape(d * NUM_AXES, NUM_LABELS)
            return x_hat, k_hat, probs_a, probs_s

        for i in range(n):
            x_hat, k_hat, probs_a, probs_s = estimates(i / n)
            a_draw = _draw_rows(probs_a, rng)
            s_draw = _draw_rows(probs_s, rng)

            alpha_x = betas_x[i + 1] - betas_x[i]
            state_x = cts.bayes_update(state_x, cts.sender_sample(x_hat, alpha_x, rng), alpha_x)
            acc["x"] += alpha_x

            alpha_k = betas_k[i + 1] - betas_k[i]
            state_k = cts.bayes_update(state_k, cts.sender_sample(k_hat, alpha_k, rng), alpha_k)
            acc["k"] += alpha_k

            alpha_a = betas_a[i + 1] - betas_a[i]
            y_a = disc.sender_sample(disc.one_hot(a_draw, k_classes), alpha_a, rng)
            theta_a = disc.bayes_update(theta_a, y_a)
            acc["a"] += alpha_a

            alpha_s = betas_s[i + 1] - betas_s[i]
            y_s = disc.sender_sample(disc.one_hot(s_draw, NUM_LABELS), alpha_s, rng)
            theta_s = disc.bayes_update(theta_s, y_s)
            acc["s"] += alpha_s

        x_hat, k_hat, probs_a, probs_s = estimates(1.0)
    numbers = _draw_rows(probs_a, rng) + 1
    codes = _draw_rows(probs_s, rng).reshape(d, NUM_AXES)
    seconds_sampling = time.perf_counter() - t_start

    au = AsymmetricUnit(sg=sg, k=k_hat, numbers=numbers, coords=x_hat, site_codes=codes)
    t_rec = time.perf_counter()
    crystal, status, error = None, "ok", None
    try:
        crystal = reconstruct_unit_cell(au)
    except ReconstructionError as exc:
        status, error = "reconstruction_failed", str(exc)
    seconds_reconstruction = time.perf_counter() - t_rec

    return SampleRecord(
        index=index, sg=sg, num_atoms=d, n_steps=n, status=status,
        asymmetric_unit=au, crystal=crystal, error=error,
        seconds_sampling=seconds_sampling, seconds_reconstruction=seconds_reconstruction,
        accumulated_accuracy=dict(acc),
    )


def generate(net: Network, extra: dict, config: SampleConfig) -> list[SampleRecord]:
    """Generate config.count samples; independent random streams per sample."""
    if config.target is not None and not net.config.conditioned:
        raise ValueError("target supplied but the checkpoint was trained unconditioned")
    if config.target is None and net.config.conditioned:
        raise ValueError("conditioned checkpoint requires a target value")
    target_std = None
    if config.target is not None:
        stats = (extra["property_mean"], extra["property_std"])
        if stats[0] is None:
            raise ValueError("checkpoint lacks property standardisation constants")
        target_std = standardize_property(config.target, stats)

    torch.set_num_threads(1)
    net.eval()
    if config.threads == 1:
        return [_sample_one(net, extra, config, i, target_std) for i in range(config.count)]
    with ThreadPoolExecutor(max_workers=config.threads) as pool:
        futures = [pool.submit(_sample_one, net, extra, config, i, target_std)
                   for i in range(config.count)]
        return [f.result() for f in futures]


def generate_from_checkpoint(path, config: SampleConfig) -> list[SampleRecord]:
    net, extra = load_checkpoint(path)
    return generate(net, extra, config)
