"""Dataset handling, loss aggregation and the optimisation loop."""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch

from . import cifio, continuous as cts, discrete as disc
from .lattice import mask_arrays
from .network import NetConfig, Network, NetOutput, save_checkpoint
from .prototypes import load_prototypes
from .sitesym import NUM_AXES, NUM_LABELS, extract_asymmetric_unit
from .structures import AsymmetricUnit

MANIFEST_VERSION = 1
DIVERGENCE_THRESHOLD = 1e6


@dataclass
class TrainConfig:
    batch_size: int = 8
    epochs: int = 500
    learning_rate: float = 1e-3
    plateau_factor: float = 0.6
    plateau_patience: int = 100
    min_learning_rate: float = 1e-4
    lambda_x: float = 1.0
    lambda_s: float = 10.0
    lambda_a: float = 3.0
    lambda_k: float = 0.1
    sigma_x: float = 0.02
    sigma_k: float = 0.02
    beta1_atoms: float = 0.75
    beta1_sites: float = 2.0
    hidden_dim: int = 64
    embed_dim: int = 32
    num_layers: int = 3
    fourier_order: int = 8
    condition_on_property: bool = False
    grad_clip_norm: float = 1.0
    seed: int = 0

    def __post_init__(self):
        for name in ("lambda_x", "lambda_s", "lambda_a", "lambda_k"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("batch_size and epochs must be positive")


@dataclass
class DatasetManifest:
    entries: list
    k_classes: int

    def __post_init__(self):
        if not self.entries:
            raise ValueError("manifest has no entries")
        max_z = max(int(e.numbers.max()) for e in self.entries)
        if self.k_classes < max_z:
            raise ValueError(f"k_classes={self.k_classes} below max atomic number {max_z}")

    @property
    def histogram(self) -> dict:
        """Empirical joint counts of (space group, asymmetric-unit size)."""
        hist: dict[tuple[int, int], int] = {}
        for e in self.entries:
            key = (int(e.sg), e.num_atoms)
            hist[key] = hist.get(key, 0) + 1
        return hist

    def save(self, path) -> None:
        records = []
        for e in self.entries:
            records.append({
                "kind": "entry",
                "sg": int(e.sg),
                "k": [float(v) for v in e.k],
                "numbers": [int(z) for z in e.numbers],
                "coords": [[float(v) for v in row] for row in e.coords],
                "site_codes": [[int(c) + 1 for c in row] for row in e.site_codes],
                "property": None if e.property_value is None else float(e.property_value),
            })
        header = {
            "format_version": MANIFEST_VERSION,
            "k_classes": self.k_classes,
            "histogram": [[sg, d, n] for (sg, d), n in sorted(self.histogram.items())],
        }
        cifio.write_records(path, header, records)

    @classmethod
    def load(cls, path) -> "DatasetManifest":
        header, records = cifio.read_records(path)
        if header.get("format_version") != MANIFEST_VERSION:
            raise ValueError(f"unsupported manifest version in {path}")
        entries = []
        for rec in records:
            entries.append(AsymmetricUnit(
                sg=rec["sg"],
                k=np.array(rec["k"]),
                numbers=np.array(rec["numbers"]),
                coords=np.array(rec["coords"]),
                site_codes=np.array(rec["site_codes"]) - 1,
                property_value=rec.get("property"),
            ))
        manifest = cls(entries=entries, k_classes=int(header["k_classes"]))
        stored = {(sg, d): n for sg, d, n in header.get("histogram", [])}
        if stored != manifest.histogram:
            raise ValueError(f"manifest histogram in {path} does not match its entries")
        return manifest


def ingest(cif_paths=None, use_prototypes: bool = False, sg_labels=None,
           properties=None, tol: float = 1e-3, report=None) -> DatasetManifest:
    """Build a manifest from CIF files (or the bundled prototype corpus).

    Every structure must carry its space-group label (CIF tag or explicit
    list); no symmetry detection is attempted.  Structures inconsistent
    with their label are skipped and reported.
    """
    report = report if report is not None else (lambda msg: warnings.warn(msg, stacklevel=2))
    sources = []
    if use_prototypes:
        for proto in load_prototypes():
            sources.append((proto.name, proto.crystal(), proto.sg))
    if cif_paths:
        for idx, path in enumerate(cif_paths):
            text = Path(path).read_text()
            crystal, sg = cifio.parse_cif(text)
            if sg_labels is not None and sg_labels[idx] is not None:
                sg = int(sg_labels[idx])
            if sg is None:
                report(f"{path}: no space-group label; skipped")
                continue
            sources.append((str(path), crystal, sg))
    if not sources:
        raise ValueError("no input structures")

    entries = []
    for idx, (name, crystal, sg) in enumerate(sources):
        prop = None if properties is None else properties[idx]
        try:
            entries.append(extract_asymmetric_unit(crystal, sg, tol=tol, property_value=prop))
        except ValueError as exc:
            report(f"{name}: inconsistent with space group {sg}; skipped ({exc})")
    if not entries:
        raise ValueError("every input structure failed symmetry reduction")
    k_classes = max(int(e.numbers.max()) for e in entries)
    return DatasetManifest(entries=entries, k_classes=k_classes)


# ---------------------------------------------------------------------------
# Flow corruption and the four-term loss
# ---------------------------------------------------------------------------

@dataclass
class CorruptedSample:
    """Flow-sampled network inputs for one entry, with the exact noises."""

    t: float
    mu_x: np.ndarray
    eps_x: np.ndarray
    mu_k: np.ndarray
    eps_k: np.ndarray
    theta_a: np.ndarray
    theta_s: np.ndarray
    e_a: np.ndarray
    e_s: np.ndarray


def corrupt_entry(entry: AsymmetricUnit, t: float, cfg: TrainConfig, k_classes: int,
                  rng: np.random.Generator) -> CorruptedSample:
    state_x, eps_x = cts.flow_sample(entry.coords, t, cfg.sigma_x, rng)
    state_k, eps_k = cts.flow_sample(entry.k, t, cfg.sigma_k, rng)
    theta_a = disc.flow_sample(entry.numbers - 1, t, cfg.beta1_atoms, k_classes, rng).probs
    theta_s = disc.flow_sample(entry.site_codes.ravel(), t, cfg.beta1_sites, NUM_LABELS,
                               rng).probs.reshape(entry.num_atoms, NUM_AXES, NUM_LABELS)
    return CorruptedSample(
        t=t, mu_x=state_x.mean, eps_x=eps_x, mu_k=state_k.mean, eps_k=eps_k,
        theta_a=theta_a, theta_s=theta_s,
        e_a=disc.one_hot(entry.numbers - 1, k_classes),
        e_s=disc.one_hot(entry.site_codes.ravel(), NUM_LABELS).reshape(
            entry.num_atoms, NUM_AXES, NUM_LABELS),
    )


def sample_losses(entry: AsymmetricUnit, corr: CorruptedSample, out: NetOutput,
                  cfg: TrainConfig, k_classes: int) -> dict:
    """The four per-sample loss terms, differentiable through the net output."""
    t = corr.t
    x_hat = cts.output_estimate(torch.as_tensor(corr.mu_x), t, cfg.sigma_x, out.eps_x, wrap=True)
    loss_x = cts.loss(torch.as_tensor(entry.coords), x_hat, t, cfg.sigma_x, periodic=True)

    k_hat = cts.output_estimate(torch.as_tensor(corr.mu_k), t, cfg.sigma_k, out.eps_k, wrap=False)
    free, const = mask_arrays(entry.sg)
    k_hat = k_hat * torch.as_tensor(free) + torch.as_tensor(const)
    loss_k = cts.loss(torch.as_tensor(entry.k), k_hat, t, cfg.sigma_k)

    loss_a = disc.loss(torch.as_tensor(corr.e_a), disc.output_probs(out.logits_a),
                       t, cfg.beta1_atoms, k_classes)
    loss_s = disc.loss(torch.as_tensor(corr.e_s), disc.output_probs(out.logits_s),
                       t, cfg.beta1_sites, NUM_LABELS)
    return {"x": loss_x, "k": loss_k, "a": loss_a, "s": loss_s}


def standardize_property(value: float, stats: tuple[float, float]) -> float:
    mean, std = stats
    return (float(value) - mean) / std


def total_loss(entries, net: Network, cfg: TrainConfig, k_classes: int,
               rng: np.random.Generator, property_stats=None):
    """Weighted batch loss; one shared corruption time per sample.

    Returns (scalar tensor, per-term breakdown dict of floats).
    """
    total = None
    breakdown = {"x": 0.0, "k": 0.0, "a": 0.0, "s": 0.0}
    for entry in entries:
        t = rng.uniform(cts.T_MIN, 1.0)
        corr = corrupt_entry(entry, t, cfg, k_classes, rng)
        target = None
        if net.config.conditioned:
            if entry.property_value is None:
                raise ValueError("conditioned training requires a property value per entry")
            target = standardize_property(entry.property_value, property_stats)
        out = net(corr.mu_k, corr.mu_x, corr.theta_a, corr.theta_s, t, entry.sg, target=target)
        terms = sample_losses(entry, corr, out, cfg, k_classes)
        weighted = (cfg.lambda_x * terms["x"] + cfg.lambda_k * terms["k"]
                    + cfg.lambda_a * terms["a"] + cfg.lambda_s * terms["s"])
        total = weighted if total is None else total + weighted
        for key in breakdown:
            breakdown[key] += float(terms[key].detach())
    n = len(entries)
    total = total / n
    breakdown = {key: val / n for key, val in breakdown.items()}
    if not torch.isfinite(total):
        bad = ", ".join(f"{k}={v:g}" for k, v in breakdown.items())
        raise RuntimeError(f"non-finite loss ({bad})")
    return total, breakdown


def make_optimizer(cfg: TrainConfig, net: Network):
    optimizer = torch.optim.Adam(net.parameters(), lr=cfg.learning_rate,
                                 betas=(0.9, 0.999), eps=1e-8)
    scheduler = torch.optim.lr_scheduler.ReduceLROnPlateau(
        optimizer, factor=cfg.plateau_factor, patience=cfg.plateau_patience,
        min_lr=cfg.min_learning_rate)
    return optimizer, scheduler


@dataclass
class TrainResult:
    net: Network
    loss_curve: list = field(default_factory=list)  # rows: epoch, total, x, k, a, s, lr
    checkpoint_extra: dict = field(default_factory=dict)


def train(cfg: TrainConfig, manifest: DatasetManifest, out_dir=None,
          log=None) -> TrainResult:
    """Train on a manifest; deterministic for a fixed seed (single-threaded)."""
    torch.set_num_threads(1)
    torch.manual_seed(cfg.seed)
    rng = np.random.default_rng(cfg.seed)

    net_cfg = NetConfig(hidden_dim=cfg.hidden_dim, embed_dim=cfg.embed_dim,
                        num_layers=cfg.num_layers, fourier_order=cfg.fourier_order,
                        num_classes=manifest.k_classes, conditioned=cfg.condition_on_property)
    net = Network(net_cfg)

    property_stats = None
    if cfg.condition_on_property:
        values = [e.property_value for e in manifest.entries]
        if any(v is None for v in values):
            raise ValueError("conditioned training requires a property value on every entry")
        mean = float(np.mean(values))
        std = float(np.std(values))
        property_stats = (mean, std if std > 0 else 1.0)

    optimizer, scheduler = make_optimizer(cfg, net)
    entries = list(manifest.entries)
    curve = []
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(len(entries))
        epoch_totals = []
        epoch_terms = {"x": 0.0, "k": 0.0, "a": 0.0, "s": 0.0}
        n_batches = 0
        for start in range(0, len(entries), cfg.batch_size):
            batch = [entries[i] for i in order[start:start + cfg.batch_size]]
            optimizer.zero_grad()
            loss, breakdown = total_loss(batch, net, cfg, manifest.k_classes, rng,
                                         property_stats=property_stats)
            loss.backward()
            if cfg.grad_clip_norm > 0:
                torch.nn.utils.clip_grad_norm_(net.parameters(), cfg.grad_clip_norm)
            optimizer.step()
            epoch_totals.append(float(loss.detach()))
            for key in epoch_terms:
                epoch_terms[key] += breakdown[key]
            n_batches += 1
        mean_loss = float(np.mean(epoch_totals))
        if not math.isfinite(mean_loss) or mean_loss > DIVERGENCE_THRESHOLD:
            raise RuntimeError(f"training diverged at epoch {epoch}: mean loss {mean_loss:g}")
        scheduler.step(mean_loss)
        lr = optimizer.param_groups[0]["lr"]
        curve.append((epoch, mean_loss, *(epoch_terms[k] / n_batches for k in ("x", "k", "a", "s")), lr))
        if log is not None and (epoch == 1 or epoch % 50 == 0 or epoch == cfg.epochs):
            log(f"epoch {epoch}: loss {mean_loss:.4f} lr {lr:g}")

    k_stack = np.stack([e.k for e in manifest.entries])
    margin = 0.1
    extra = {
        "k_classes": manifest.k_classes,
        "histogram": [[sg, d, n] for (sg, d), n in sorted(manifest.histogram.items())],
        # hull of the training lattice vectors; samplers clamp estimates into
        # it to keep the closed loop on the data manifold
        "k_low": [float(v) for v in k_stack.min(axis=0) - margin],
        "k_high": [float(v) for v in k_stack.max(axis=0) + margin],
        "schedules": {"sigma_x": cfg.sigma_x, "sigma_k": cfg.sigma_k,
                      "beta1_atoms": cfg.beta1_atoms, "beta1_sites": cfg.beta1_sites},
        "property_mean": None if property_stats is None else property_stats[0],
        "property_std": None if property_stats is None else property_stats[1],
        "train_config": asdict(cfg),
    }
    result = TrainResult(net=net, loss_curve=curve, checkpoint_extra=extra)
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        save_checkpoint(out_dir / "checkpoint.npz", net, extra)
        write_loss_curve(out_dir / "loss_curve.csv", curve)
    return result


def write_loss_curve(path, curve) -> None:
    with open(path, "w") as fh:
        fh.write("epoch,total,x,k,a,s,lr\n")
        for row in curve:
            fh.write(",".join(f"{v:.10g}" for v in row) + "\n")
