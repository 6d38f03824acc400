"""Shared-trunk actor-critic MLP with hand-written forward and backward passes.

Trunk 21 -> 512 -> 512 -> 256 -> 128 with ReLU; a tanh-bounded Gaussian-mean
head (4), a scalar value head, and a state-independent log-std vector. No
autodiff framework: gradients are assembled analytically from cached
activations, which keeps the update loop dependency-free and lets tests check
every term against finite differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

OBS_DIM = 21
ACT_DIM = 4
HIDDEN = (512, 512, 256, 128)

LOG_STD_MIN = -5.0
LOG_STD_MAX = 2.0
LOG_2PI = math.log(2.0 * math.pi)

CHECKPOINT_VERSION = 1


@dataclass
class MlpParams:
    weights: list  # trunk weights, each (out, in)
    biases: list
    w_mean: np.ndarray
    b_mean: np.ndarray
    w_value: np.ndarray
    b_value: np.ndarray
    log_std: np.ndarray

    def arrays(self):
        """All parameter arrays in a fixed order (shared by grads/Adam/IO)."""
        out = []
        out.extend(self.weights)
        out.extend(self.biases)
        out.extend([self.w_mean, self.b_mean, self.w_value, self.b_value, self.log_std])
        return out

    def copy(self) -> "MlpParams":
        return MlpParams(
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.w_mean.copy(),
            self.b_mean.copy(),
            self.w_value.copy(),
            self.b_value.copy(),
            self.log_std.copy(),
        )


@dataclass
class ForwardCache:
    activations: list  # a0 = input, a1..aL = post-ReLU layer outputs
    mean_pre: np.ndarray  # pre-tanh actor head output
    mean: np.ndarray
    value: np.ndarray
    log_std_mask: np.ndarray  # 1 where log_std is inside its clamp range


@dataclass
class PolicyOutput:
    mean: np.ndarray
    log_std: np.ndarray
    value: np.ndarray


def orthogonal_init(rng: np.random.Generator, shape, gain: float) -> np.ndarray:
    """Semi-orthogonal matrix scaled by gain (QR of a Gaussian draw)."""
    rows, cols = shape
    a = rng.standard_normal((rows, cols) if rows >= cols else (cols, rows))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    if rows < cols:
        q = q.T
    return gain * q[:rows, :cols]


def init_params(
    rng: np.random.Generator,
    obs_dim: int = OBS_DIM,
    hidden=HIDDEN,
    act_dim: int = ACT_DIM,
    log_std_init: float = -0.5,
) -> MlpParams:
    """Orthogonal init: gain sqrt(2) on the ReLU trunk, 0.01 on both heads."""
    weights, biases = [], []
    prev = obs_dim
    for h in hidden:
        weights.append(orthogonal_init(rng, (h, prev), math.sqrt(2.0)))
        biases.append(np.zeros(h))
        prev = h
    return MlpParams(
        weights=weights,
        biases=biases,
        w_mean=orthogonal_init(rng, (act_dim, prev), 0.01),
        b_mean=np.zeros(act_dim),
        w_value=orthogonal_init(rng, (1, prev), 0.01),
        b_value=np.zeros(1),
        log_std=np.full(act_dim, log_std_init),
    )


def param_count(p: MlpParams) -> int:
    return sum(a.size for a in p.arrays())


def expected_param_count(obs_dim: int = OBS_DIM, hidden=HIDDEN, act_dim: int = ACT_DIM) -> int:
    dims = (obs_dim, *hidden)
    n = sum(dims[i + 1] * dims[i] + dims[i + 1] for i in range(len(hidden)))
    n += act_dim * hidden[-1] + act_dim  # mean head
    n += hidden[-1] + 1  # value head
    n += act_dim  # log_std
    return n


def forward(p: MlpParams, obs: np.ndarray, cache: bool = False):
    """Run the network on a batch of observations.

    Args:
        obs: (B, obs_dim) or (obs_dim,) array.
        cache: keep activations for backward().

    Returns:
        (PolicyOutput, ForwardCache | None); mean is tanh-bounded, value has
        shape (B,), log_std is the clamped shared vector.
    """
    x = np.asarray(obs, dtype=float)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[None, :]
    if x.shape[1] != p.weights[0].shape[1]:
        raise ValueError(f"observation dim {x.shape[1]} != expected {p.weights[0].shape[1]}")

    acts = [x]
    a = x
    for w, b in zip(p.weights, p.biases):
        a = a @ w.T + b
        np.maximum(a, 0.0, out=a)
        acts.append(a)
    mean_pre = a @ p.w_mean.T + p.b_mean
    mean = np.tanh(mean_pre)
    value = (a @ p.w_value.T + p.b_value)[:, 0]
    log_std = np.clip(p.log_std, LOG_STD_MIN, LOG_STD_MAX)
    mask = ((p.log_std > LOG_STD_MIN) & (p.log_std < LOG_STD_MAX)).astype(float)

    out = PolicyOutput(mean[0] if squeeze else mean, log_std, value[0] if squeeze else value)
    if not cache:
        return out, None
    return out, ForwardCache(acts, mean_pre, mean, value, mask)


def backward(p: MlpParams, cache: ForwardCache, d_mean: np.ndarray, d_value: np.ndarray) -> MlpParams:
    """Backpropagate loss gradients at the heads into all weights and biases.

    Args:
        d_mean: dL/d(mean), shape (B, act_dim) — gradient w.r.t. the
            post-tanh mean.
        d_value: dL/d(value), shape (B,).

    Returns:
        MlpParams-shaped gradient container (log_std slot zeroed; the caller
        owns log-std gradients since they bypass the trunk).
    """
    a_last = cache.activations[-1]
    d_mean_pre = d_mean * (1.0 - cache.mean * cache.mean)
    dv = d_value[:, None]

    g_w_mean = d_mean_pre.T @ a_last
    g_b_mean = d_mean_pre.sum(axis=0)
    g_w_value = dv.T @ a_last
    g_b_value = dv.sum(axis=0)

    # Shared trunk receives both heads' gradients.
    delta = d_mean_pre @ p.w_mean + dv @ p.w_value
    g_ws, g_bs = [], []
    for i in range(len(p.weights) - 1, -1, -1):
        delta = delta * (cache.activations[i + 1] > 0.0)
        g_ws.append(delta.T @ cache.activations[i])
        g_bs.append(delta.sum(axis=0))
        if i > 0:
            delta = delta @ p.weights[i]
    g_ws.reverse()
    g_bs.reverse()

    return MlpParams(
        weights=g_ws,
        biases=g_bs,
        w_mean=g_w_mean,
        b_mean=g_b_mean,
        w_value=g_w_value,
        b_value=g_b_value,
        log_std=np.zeros_like(p.log_std),
    )


def log_prob(mean: np.ndarray, log_std: np.ndarray, actions: np.ndarray) -> np.ndarray:
    """Diagonal-Gaussian log density of actions, shape (B,)."""
    std = np.exp(log_std)
    z = (actions - mean) / std
    d = actions.shape[-1]
    return -0.5 * (z * z).sum(axis=-1) - log_std.sum() - 0.5 * d * LOG_2PI


def entropy(log_std: np.ndarray) -> float:
    """Entropy of the diagonal Gaussian (state-independent)."""
    d = log_std.shape[0]
    return float(log_std.sum() + 0.5 * d * (LOG_2PI + 1.0))


def sample_action_raw(out: PolicyOutput, rng: np.random.Generator):
    """Sample from the Gaussian head.

    Returns (raw, clipped, log_prob): raw is the unclipped Gaussian draw (what
    log_prob is evaluated at), clipped is the env-safe action in [-1, 1]^4.
    """
    eps = rng.standard_normal(out.mean.shape)
    std = np.exp(out.log_std)
    raw = out.mean + std * eps
    clipped = np.clip(raw, -1.0, 1.0)
    return raw, clipped, log_prob(out.mean, out.log_std, raw)


def sample_action(out: PolicyOutput, rng: Optional[np.random.Generator], deterministic: bool = False):
    """Draw an action in [-1, 1]^4 plus its pre-clip Gaussian log-probability.

    With deterministic=True (or rng=None) returns the mean action.
    """
    if deterministic or rng is None:
        return out.mean.copy(), log_prob(out.mean, out.log_std, out.mean)
    raw, clipped, lp = sample_action_raw(out, rng)
    return clipped, lp


# -- parameter vector view (finite-difference checks, diagnostics) --


def to_vector(p: MlpParams) -> np.ndarray:
    return np.concatenate([a.ravel() for a in p.arrays()])


def from_vector(template: MlpParams, vec: np.ndarray) -> MlpParams:
    out = template.copy()
    i = 0
    for a in out.arrays():
        a[...] = vec[i : i + a.size].reshape(a.shape)
        i += a.size
    if i != vec.size:
        raise ValueError(f"vector length {vec.size} != parameter count {i}")
    return out


# -- checkpoint IO --


def save_checkpoint(path, p: MlpParams, extra: Optional[dict] = None) -> None:
    """Write parameters to an .npz checkpoint (bit-exact reload)."""
    payload = {
        "version": np.array(CHECKPOINT_VERSION),
        "n_hidden": np.array(len(p.weights)),
        "w_mean": p.w_mean,
        "b_mean": p.b_mean,
        "w_value": p.w_value,
        "b_value": p.b_value,
        "log_std": p.log_std,
    }
    for i, (w, b) in enumerate(zip(p.weights, p.biases)):
        payload[f"w{i}"] = w
        payload[f"b{i}"] = b
    for key, val in (extra or {}).items():
        payload[f"extra_{key}"] = np.asarray(val)
    np.savez(path, **payload)


def load_checkpoint(path) -> MlpParams:
    """Load an .npz checkpoint; raises on version or shape mismatch."""
    with np.load(path) as data:
        version = int(data["version"])
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        n = int(data["n_hidden"])
        weights = [data[f"w{i}"].astype(float) for i in range(n)]
        biases = [data[f"b{i}"].astype(float) for i in range(n)]
        p = MlpParams(
            weights,
            biases,
            data["w_mean"].astype(float),
            data["b_mean"].astype(float),
            data["w_value"].astype(float),
            data["b_value"].astype(float),
            data["log_std"].astype(float),
        )
    _check_shapes(p)
    return p


def _check_shapes(p: MlpParams) -> None:
    prev = p.weights[0].shape[1]
    for i, (w, b) in enumerate(zip(p.weights, p.biases)):
        if w.shape[1] != prev or b.shape != (w.shape[0],):
            raise ValueError(
                f"layer {i}: got weight {w.shape}, bias {b.shape}; expected input dim {prev}"
            )
        prev = w.shape[0]
    for name, arr, shape in (
        ("w_mean", p.w_mean, (p.w_mean.shape[0], prev)),
        ("w_value", p.w_value, (1, prev)),
    ):
        if arr.shape != shape:
            raise ValueError(f"{name}: got {arr.shape}, expected {shape}")
    if p.log_std.shape != (p.w_mean.shape[0],):
        raise ValueError(f"log_std: got {p.log_std.shape}, expected ({p.w_mean.shape[0]},)")
