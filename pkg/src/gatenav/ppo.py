"""PPO with clipped surrogate objective, GAE, vectorized rollouts, and Adam.

The update path is fully hand-differentiated: loss_and_grad computes the
clipped-surrogate, value-MSE and entropy terms together with exact gradients
through the policy network (policy.backward). Finite-difference tests pin the
analytic gradients; the GAE recursion is pinned against brute-force
discounted returns at lambda=1.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import policy as pol
from . import world
from .reward import RewardConfig
from .vecenv import VecEnv
from .world import Episode, WorldConfig

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


class TrainingDiverged(RuntimeError):
    """Raised when a non-finite loss or observation aborts training."""


@dataclass
class PpoConfig:
    n_envs: int = 8
    n_steps: int = 2048
    batch_size: int = 256
    clip: float = 0.2
    gamma: float = 0.99
    entropy_coef: float = 0.01
    lr: float = 1e-4
    total_steps: int = 2_000_000
    gae_lambda: float = 0.95
    value_coef: float = 0.5
    epochs_per_update: int = 10
    max_grad_norm: float = 0.5
    eval_every_updates: int = 5
    eval_episodes: int = 10

    def validate(self) -> None:
        if (self.n_envs * self.n_steps) % self.batch_size != 0:
            raise ValueError("batch_size must divide n_envs * n_steps")
        if not 0.0 < self.clip < 1.0:
            raise ValueError("clip must be in (0, 1)")
        if not 0.0 <= self.gamma <= 1.0 or not 0.0 <= self.gae_lambda <= 1.0:
            raise ValueError("gamma and gae_lambda must be in [0, 1]")
        if self.n_envs < 1 or self.n_steps < 1 or self.total_steps < 1:
            raise ValueError("sizes must be positive")


@dataclass
class RolloutBuffer:
    """Time-major transition storage for one update: (n_steps, n_envs, ...)."""

    obs: np.ndarray
    actions: np.ndarray  # raw Gaussian draws (log-probs are evaluated here)
    log_probs: np.ndarray
    rewards: np.ndarray
    values: np.ndarray
    dones: np.ndarray
    advantages: Optional[np.ndarray] = None
    returns: Optional[np.ndarray] = None

    @property
    def size(self) -> int:
        return self.obs.shape[0] * self.obs.shape[1]


def collect_rollouts(params: pol.MlpParams, venv: VecEnv, cfg: PpoConfig, rng: np.random.Generator):
    """Gather n_steps transitions from every env (auto-resetting on done).

    Returns (buffer, last_values, episode_stats): last_values bootstraps GAE
    at the rollout horizon; episode_stats lists (return, length, outcome) for
    every episode that finished during collection.
    """
    T, N = cfg.n_steps, venv.n
    buf = RolloutBuffer(
        obs=np.empty((T, N, world.OBS_DIM)),
        actions=np.empty((T, N, pol.ACT_DIM)),
        log_probs=np.empty((T, N)),
        rewards=np.empty((T, N)),
        values=np.empty((T, N)),
        dones=np.empty((T, N)),
    )
    stats = []
    obs = venv.reset_all() if venv.current_obs is None else venv.current_obs.copy()
    for t in range(T):
        if not np.all(np.isfinite(obs)):
            bad = np.argwhere(~np.isfinite(obs))
            raise TrainingDiverged(f"non-finite observation at rollout step {t}, entries {bad[:4]}")
        out, _ = pol.forward(params, obs)
        eps = rng.standard_normal((N, pol.ACT_DIM))
        std = np.exp(out.log_std)
        raw = out.mean + std * eps
        log_probs = pol.log_prob(out.mean, out.log_std, raw)
        clipped = np.clip(raw, -1.0, 1.0)

        buf.obs[t] = obs
        buf.actions[t] = raw
        buf.log_probs[t] = log_probs
        buf.values[t] = out.value

        obs, rewards, dones, outcomes, ep_stats = venv.step(clipped)
        buf.rewards[t] = rewards
        buf.dones[t] = dones.astype(float)
        stats.extend(ep_stats)

    last_out, _ = pol.forward(params, obs)
    return buf, last_out.value, stats


def clipped_surrogate(ratio: np.ndarray, adv: np.ndarray, clip: float):
    """Per-sample min(ratio*A, clip(ratio, 1-eps, 1+eps)*A).

    Returns (objective, unclipped) where unclipped is 1.0 for samples whose
    gradient flows through the raw ratio (the min picked the unclipped branch).
    """
    surr1 = ratio * adv
    surr2 = np.clip(ratio, 1.0 - clip, 1.0 + clip) * adv
    return np.minimum(surr1, surr2), (surr1 <= surr2).astype(float)


def normalize_advantages(adv: np.ndarray) -> np.ndarray:
    """Zero-mean, unit-variance advantages (per update)."""
    return (adv - adv.mean()) / (adv.std() + 1e-8)


def compute_gae(buf: RolloutBuffer, last_values: np.ndarray, cfg: PpoConfig) -> None:
    """Fill buf.advantages / buf.returns in place.

    delta_t = r_t + gamma*V(s_{t+1})*(1-done_t) - V(s_t)
    A_t = delta_t + gamma*lambda*(1-done_t)*A_{t+1};  returns = A + V.
    """
    T, N = buf.rewards.shape
    adv = np.zeros((T, N))
    next_adv = np.zeros(N)
    next_value = last_values
    for t in range(T - 1, -1, -1):
        nonterminal = 1.0 - buf.dones[t]
        delta = buf.rewards[t] + cfg.gamma * next_value * nonterminal - buf.values[t]
        next_adv = delta + cfg.gamma * cfg.gae_lambda * nonterminal * next_adv
        adv[t] = next_adv
        next_value = buf.values[t]
    buf.advantages = adv
    buf.returns = adv + buf.values


def loss_and_grad(params: pol.MlpParams, batch: dict, cfg: PpoConfig):
    """PPO loss and its exact gradient on one minibatch.

    batch keys: obs (B,21), actions (B,4) raw draws, log_probs (B,),
    advantages (B,), returns (B,).

    Returns (loss, grads, stats) with stats holding the individual loss terms
    and the clipped-sample fraction.
    """
    obs = batch["obs"]
    actions = batch["actions"]
    logp_old = batch["log_probs"]
    adv = batch["advantages"]
    returns = batch["returns"]
    B = obs.shape[0]

    out, cache = pol.forward(params, obs, cache=True)
    mean, log_std, values = out.mean, out.log_std, out.value
    std = np.exp(log_std)
    z = (actions - mean) / std
    logp = -0.5 * (z * z).sum(axis=1) - log_std.sum() - 0.5 * actions.shape[1] * pol.LOG_2PI

    ratio = np.exp(logp - logp_old)
    objective, unclipped = clipped_surrogate(ratio, adv, cfg.clip)
    policy_loss = -objective.mean()

    v_err = values - returns
    value_loss = float((v_err * v_err).mean())

    ent = pol.entropy(log_std)
    loss = float(policy_loss) + cfg.value_coef * value_loss - cfg.entropy_coef * ent

    # -- gradients --
    # d(policy_loss)/d(logp): only where the unclipped branch is active.
    d_logp = -(adv * ratio * unclipped) / B
    d_mean = d_logp[:, None] * (z / std)
    d_log_std_vec = (d_logp[:, None] * (z * z - 1.0)).sum(axis=0)
    d_value = cfg.value_coef * 2.0 * v_err / B
    # Entropy term: dH/d(log_std_j) = 1.
    d_log_std_vec = d_log_std_vec - cfg.entropy_coef
    d_log_std_vec = d_log_std_vec * cache.log_std_mask

    grads = pol.backward(params, cache, d_mean, d_value)
    grads.log_std = d_log_std_vec

    stats = {
        "policy_loss": float(policy_loss),
        "value_loss": value_loss,
        "entropy": ent,
        "clip_frac": float((unclipped == 0.0).mean()),
    }
    return loss, grads, stats


def global_grad_norm(grads: pol.MlpParams) -> float:
    total = 0.0
    for g in grads.arrays():
        total += float((g * g).sum())
    return math.sqrt(total)


def clip_grad_norm(grads: pol.MlpParams, max_norm: float) -> float:
    norm = global_grad_norm(grads)
    if norm > max_norm and norm > 0.0:
        scale = max_norm / norm
        for g in grads.arrays():
            g *= scale
    return norm


@dataclass
class AdamState:
    m: list
    v: list
    step: int = 0

    @classmethod
    def init(cls, params: pol.MlpParams) -> "AdamState":
        return cls(
            m=[np.zeros_like(a) for a in params.arrays()],
            v=[np.zeros_like(a) for a in params.arrays()],
        )


def adam_step(params: pol.MlpParams, grads: pol.MlpParams, state: AdamState, lr: float) -> None:
    """One Adam update in place (beta1=0.9, beta2=0.999, eps=1e-8)."""
    state.step += 1
    t = state.step
    bc1 = 1.0 - ADAM_BETA1**t
    bc2 = 1.0 - ADAM_BETA2**t
    for a, g, m, v in zip(params.arrays(), grads.arrays(), state.m, state.v):
        m *= ADAM_BETA1
        m += (1.0 - ADAM_BETA1) * g
        v *= ADAM_BETA2
        v += (1.0 - ADAM_BETA2) * (g * g)
        a -= lr * (m / bc1) / (np.sqrt(v / bc2) + ADAM_EPS)


def ppo_update(
    params: pol.MlpParams,
    adam: AdamState,
    buf: RolloutBuffer,
    cfg: PpoConfig,
    rng: np.random.Generator,
) -> dict:
    """Run epochs_per_update passes of shuffled minibatch Adam steps in place."""
    if buf.advantages is None or buf.returns is None:
        raise ValueError("compute_gae must run before ppo_update")
    T, N = buf.rewards.shape
    total = T * N
    obs = buf.obs.reshape(total, -1)
    actions = buf.actions.reshape(total, -1)
    log_probs = buf.log_probs.reshape(total)
    returns = buf.returns.reshape(total)

    adv = normalize_advantages(buf.advantages.reshape(total))

    agg: dict = {"policy_loss": 0.0, "value_loss": 0.0, "entropy": 0.0, "clip_frac": 0.0}
    n_batches = 0
    for _ in range(cfg.epochs_per_update):
        perm = rng.permutation(total)
        for start in range(0, total, cfg.batch_size):
            idx = perm[start : start + cfg.batch_size]
            batch = {
                "obs": obs[idx],
                "actions": actions[idx],
                "log_probs": log_probs[idx],
                "advantages": adv[idx],
                "returns": returns[idx],
            }
            loss, grads, stats = loss_and_grad(params, batch, cfg)
            if not math.isfinite(loss):
                raise TrainingDiverged(f"non-finite loss: {stats}")
            clip_grad_norm(grads, cfg.max_grad_norm)
            adam_step(params, grads, adam, cfg.lr)
            for k in agg:
                agg[k] += stats[k]
            n_batches += 1
    return {k: v / n_batches for k, v in agg.items()}


def evaluate_policy(
    params: pol.MlpParams,
    make_episode: Callable[[], Episode],
    n_episodes: int,
) -> tuple:
    """Deterministic-action rollouts; returns (mean, std, success_rate)."""
    if n_episodes < 1:
        raise ValueError("n_episodes must be >= 1")
    returns = []
    successes = 0
    for _ in range(n_episodes):
        ep = make_episode()
        obs = ep.reset()
        total = 0.0
        while True:
            out, _ = pol.forward(params, obs)
            action, _ = pol.sample_action(out, None, deterministic=True)
            obs, r, done, info = ep.step(action)
            total += r
            if done:
                if info["outcome"] == world.SUCCESS:
                    successes += 1
                break
        returns.append(total)
    returns = np.asarray(returns)
    return float(returns.mean()), float(returns.std()), successes / n_episodes


@dataclass
class TrainResult:
    final_checkpoint: Path
    best_checkpoint: Path
    curve_csv: Path
    updates: int
    total_steps: int
    best_eval_reward: float


def train(
    cfg: PpoConfig,
    wcfg: WorldConfig,
    rcfg: RewardConfig,
    out_dir,
    seed: int,
    log: Optional[Callable[[str], None]] = None,
) -> TrainResult:
    """Full training loop: collect -> GAE -> update, with periodic deterministic
    evaluation for best-checkpoint selection and a per-update CSV curve log.
    """
    cfg.validate()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    say = log or (lambda s: None)

    root = np.random.SeedSequence(seed)
    env_seed, init_seed, act_seed, perm_seed, eval_seed = [
        int(s.generate_state(1)[0]) for s in root.spawn(5)
    ]
    venv = VecEnv(cfg.n_envs, wcfg, rcfg, env_seed)
    params = pol.init_params(np.random.default_rng(init_seed))
    adam = AdamState.init(params)
    act_rng = np.random.default_rng(act_seed)
    perm_rng = np.random.default_rng(perm_seed)

    final_path = out / "checkpoint_final.npz"
    best_path = out / "checkpoint_best.npz"
    curve_path = out / "training_curve.csv"

    rows = []
    steps_done = 0
    updates = 0
    best_eval = -math.inf
    last_mean_r = math.nan
    last_mean_len = math.nan
    try:
        while steps_done < cfg.total_steps:
            buf, last_values, ep_stats = collect_rollouts(params, venv, cfg, act_rng)
            compute_gae(buf, last_values, cfg)
            stats = ppo_update(params, adam, buf, cfg, perm_rng)
            steps_done += buf.size
            updates += 1

            if ep_stats:
                last_mean_r = float(np.mean([s[0] for s in ep_stats]))
                last_mean_len = float(np.mean([s[1] for s in ep_stats]))
            rows.append(
                (
                    steps_done,
                    last_mean_r,
                    last_mean_len,
                    stats["policy_loss"],
                    stats["value_loss"],
                    stats["entropy"],
                    stats["clip_frac"],
                )
            )
            say(
                f"update {updates}: steps={steps_done} mean_ep_reward={last_mean_r:.2f} "
                f"mean_ep_len={last_mean_len:.1f} clip_frac={stats['clip_frac']:.3f}"
            )

            if cfg.eval_every_updates > 0 and updates % cfg.eval_every_updates == 0:
                eval_rng = np.random.default_rng(eval_seed + updates)
                mean_r, _, succ = evaluate_policy(
                    params,
                    lambda: Episode(wcfg, rcfg, eval_rng),
                    cfg.eval_episodes,
                )
                say(f"  eval: mean_reward={mean_r:.2f} success_rate={succ:.2f}")
                if mean_r > best_eval:
                    best_eval = mean_r
                    pol.save_checkpoint(best_path, params, {"steps": steps_done})
    except TrainingDiverged:
        pol.save_checkpoint(out / "checkpoint_aborted.npz", params, {"steps": steps_done})
        _write_curve(curve_path, rows)
        raise

    pol.save_checkpoint(final_path, params, {"steps": steps_done})
    if not best_path.exists():
        pol.save_checkpoint(best_path, params, {"steps": steps_done})
    _write_curve(curve_path, rows)
    return TrainResult(final_path, best_path, curve_path, updates, steps_done, best_eval)


def _write_curve(path: Path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(
            ["step", "mean_ep_reward", "mean_ep_length", "policy_loss", "value_loss", "entropy", "clip_frac"]
        )
        for row in rows:
            w.writerow([_fmt(x) for x in row])


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".10g")
