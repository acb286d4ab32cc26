"""Message-passing network over asymmetric-unit nodes with four output heads.

One node per representative atom; messages run on the fully-connected
graph (self-edges excluded).  Coordinates enter only through periodic
Fourier features, absolute and pairwise, so every output is invariant
under integer shifts of the fractional coordinates.  The lattice head
pools node features by mean, making it permutation-invariant; the
per-node heads are permutation-equivariant.

Everything runs in float64 on CPU for exact reproducibility and clean
finite-difference checks.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .sitesym import NUM_AXES, NUM_LABELS

CHECKPOINT_VERSION = 1


@dataclass
class NetConfig:
    hidden_dim: int = 64
    embed_dim: int = 32
    num_layers: int = 3
    fourier_order: int = 8
    num_classes: int = 20
    conditioned: bool = False

    def __post_init__(self):
        for name in ("hidden_dim", "embed_dim", "num_layers", "fourier_order", "num_classes"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be a positive integer")
            setattr(self, name, int(getattr(self, name)))
        self.conditioned = bool(self.conditioned)


# paper-scale profile; the small default above is for desk-scale runs
PAPER_PROFILE = dict(hidden_dim=512, embed_dim=128, num_layers=6)


@dataclass
class NetOutput:
    eps_k: torch.Tensor        # (6,)
    eps_x: torch.Tensor        # (D, 3)
    logits_a: torch.Tensor     # (D, K)
    logits_s: torch.Tensor     # (D, 15, 13)


def fourier_features(delta, order: int):
    """Periodic featurisation: (sin, cos)(2*pi*n*delta_c) for n=1..order.

    Works on numpy arrays and torch tensors; output has 6*order features
    for a 3-vector (last axis), exactly periodic under integer shifts.
    """
    if isinstance(delta, torch.Tensor):
        delta = delta % 1.0  # makes periodicity bit-exact
        n = torch.arange(1, order + 1, dtype=delta.dtype)
        ang = 2.0 * np.pi * delta[..., :, None] * n  # (..., 3, order)
        feats = torch.cat([torch.sin(ang), torch.cos(ang)], dim=-1)
    else:
        delta = np.asarray(delta, dtype=float) % 1.0
        n = np.arange(1, order + 1, dtype=float)
        ang = 2.0 * np.pi * delta[..., :, None] * n
        feats = np.concatenate([np.sin(ang), np.cos(ang)], axis=-1)
    return feats.reshape(*feats.shape[:-2], 6 * order)


def sinusoidal_encoding(value: float, dim: int, scale: float = 1000.0) -> torch.Tensor:
    """Standard sinusoidal positional encoding of a scalar, dim channels.

    scale sets the fastest frequency: process time in [0, 1] uses the
    conventional 1000, standardized property targets use a small scale so
    nearby targets stay close in encoding space.
    """
    half = (dim + 1) // 2
    freqs = torch.exp(-np.log(10000.0) * torch.arange(half, dtype=torch.float64) / max(half - 1, 1))
    ang = scale * float(value) * freqs
    enc = torch.zeros(dim, dtype=torch.float64)
    enc[0::2] = torch.sin(ang)[: (dim + 1) // 2]
    enc[1::2] = torch.cos(ang)[: dim // 2]
    return enc


class MLP(nn.Module):
    """Two hidden SiLU layers."""

    def __init__(self, in_dim: int, hidden_dim: int, out_dim: int):
        super().__init__()
        self.net = nn.Sequential(
            nn.Linear(in_dim, hidden_dim), nn.SiLU(),
            nn.Linear(hidden_dim, hidden_dim), nn.SiLU(),
            nn.Linear(hidden_dim, out_dim),
        )

    def forward(self, x):
        return self.net(x)


class Network(nn.Module):
    def __init__(self, config: NetConfig):
        super().__init__()
        self.config = config
        h, e, k = config.hidden_dim, config.embed_dim, config.num_classes
        ff = 6 * config.fourier_order
        self.f_atom = nn.Linear(k, e)
        self.f_coord = nn.Linear(ff, e)
        self.f_sym = nn.Linear(NUM_AXES * NUM_LABELS, e)
        self.f_sg = nn.Embedding(230, e)
        self.f_k = nn.Linear(6, e)
        init_dim = 5 * e + (e if config.conditioned else 0)
        self.psi_0 = MLP(init_dim, h, h)
        self.psi_m = nn.ModuleList(MLP(2 * h + e + ff, h, h) for _ in range(config.num_layers))
        self.psi_h = nn.ModuleList(MLP(2 * h, h, h) for _ in range(config.num_layers))
        self.psi_k = MLP(h, h, 6)
        self.psi_x = MLP(h, h, 3)
        self.psi_a = MLP(h, h, k)
        self.psi_s = MLP(h, h, NUM_AXES * NUM_LABELS)
        self.double()

    def forward(self, mu_k, mu_x, theta_a, theta_s, t: float, sg: int,
                target: float | None = None) -> NetOutput:
        cfg = self.config
        if cfg.conditioned and target is None:
            raise ValueError("conditioned network requires a target value")
        if not cfg.conditioned and target is not None:
            raise ValueError("network was built without property conditioning")
        mu_k = torch.as_tensor(mu_k, dtype=torch.float64)
        mu_x = torch.as_tensor(mu_x, dtype=torch.float64)
        theta_a = torch.as_tensor(theta_a, dtype=torch.float64)
        theta_s = torch.as_tensor(theta_s, dtype=torch.float64)
        d = mu_x.shape[0]
        if d < 1:
            raise ValueError("need at least one node")
        if theta_a.shape != (d, cfg.num_classes) or theta_s.shape != (d, NUM_AXES, NUM_LABELS):
            raise ValueError("input shape mismatch")

        parts = [
            self.f_atom(theta_a),
            self.f_coord(fourier_features(mu_x, cfg.fourier_order)),
            self.f_sym(theta_s.reshape(d, -1)),
            sinusoidal_encoding(t, cfg.embed_dim).expand(d, -1),
            self.f_sg(torch.tensor(int(sg) - 1)).expand(d, -1),
        ]
        if cfg.conditioned:
            parts.append(sinusoidal_encoding(float(target), cfg.embed_dim, scale=10.0).expand(d, -1))
        hfeat = self.psi_0(torch.cat(parts, dim=-1))

        k_emb = self.f_k(mu_k)
        delta = mu_x[None, :, :] - mu_x[:, None, :]           # (D, D, 3), x_j - x_i
        ffeat = fourier_features(delta, cfg.fourier_order)     # (D, D, 6F)
        offdiag = 1.0 - torch.eye(d, dtype=torch.float64)
        for layer, (psi_m, psi_h) in enumerate(zip(self.psi_m, self.psi_h)):
            pair = torch.cat([
                hfeat[:, None, :].expand(d, d, -1),
                hfeat[None, :, :].expand(d, d, -1),
                k_emb.expand(d, d, -1),
                ffeat,
            ], dim=-1)
            msg = psi_m(pair) * offdiag[:, :, None]            # self-edge excluded
            agg = msg.sum(dim=1)
            hfeat = hfeat + psi_h(torch.cat([hfeat, agg], dim=-1))
            if not torch.isfinite(hfeat).all():
                raise RuntimeError(f"non-finite node features after message-passing layer {layer}")

        return NetOutput(
            eps_k=self.psi_k(hfeat.mean(dim=0)),
            eps_x=mu_x + self.psi_x(hfeat),
            logits_a=self.psi_a(hfeat),
            logits_s=self.psi_s(hfeat).reshape(d, NUM_AXES, NUM_LABELS),
        )


def loss_gradients(net: Network, loss: torch.Tensor) -> dict[str, torch.Tensor]:
    """Exact reverse-mode gradients of a scalar loss for every parameter."""
    grads = torch.autograd.grad(loss, list(net.parameters()), allow_unused=True)
    out = {}
    for (name, param), grad in zip(net.named_parameters(), grads):
        out[name] = torch.zeros_like(param) if grad is None else grad
    return out


# ---------------------------------------------------------------------------
# Checkpoint container: one .npz with a JSON metadata entry plus flat arrays
# ---------------------------------------------------------------------------

def save_checkpoint(path, net: Network, extra: dict | None = None) -> None:
    """Persist config + named parameter arrays (+ JSON-serialisable extras)."""
    meta = {
        "checkpoint_version": CHECKPOINT_VERSION,
        "config": {
            "hidden_dim": net.config.hidden_dim,
            "embed_dim": net.config.embed_dim,
            "num_layers": net.config.num_layers,
            "fourier_order": net.config.fourier_order,
            "num_classes": net.config.num_classes,
            "conditioned": net.config.conditioned,
        },
        "extra": extra or {},
    }
    arrays = {f"param::{name}": tensor.detach().numpy()
              for name, tensor in net.state_dict().items()}
    np.savez(path, __meta__=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8), **arrays)


def load_checkpoint(path):
    """Returns (net, extra) from a checkpoint written by save_checkpoint."""
    path = Path(path)
    with np.load(path) as data:
        meta = json.loads(bytes(data["__meta__"]).decode())
        if meta.get("checkpoint_version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version in {path}")
        net = Network(NetConfig(**meta["config"]))
        state = {key[len("param::"):]: torch.from_numpy(data[key])
                 for key in data.files if key.startswith("param::")}
    net.load_state_dict(state)
    return net, meta["extra"]
