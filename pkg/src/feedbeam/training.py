"""Three-step iterative distributed beamforming and the M-block scheduler.

One group of N sources learns sign weights for its own channel from a
single feedback bit per frame:

* Step 1 (frame 0): all weights +1, the destination measures and stores the
  received level L_max.
* Step 2 (frames 1 .. k_o*N - 1): each source independently flips its
  auxiliary weight with probability 1/N, the destination measures the
  resulting level and broadcasts whether it beat L_max; on improvement all
  sources keep the perturbed weights and L_max is raised.
* Step 3: the auxiliary weights at the last frame become the final weights.

Groups train sequentially, one block of k_o*N frames each, while all other
groups stay silent, so a network training run is M independent group runs.

``train_group`` / ``train_network`` are the readable per-trial reference
path; ``train_ensemble`` runs many trials of the same shape in lockstep and
is bit-identical to the reference path at batch size 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelRealization
from .config import NetworkConfig
from .errors import ConfigError, DimensionError
from .rng import RandomStream
from .util import TRAJ_CHUNK, TRIAL_CHUNK, chunk_sizes, map_chunks

__all__ = [
    "GroupState",
    "TrainingTrace",
    "EnsembleResult",
    "init_group",
    "perturb",
    "received_level",
    "feedback_update",
    "train_group",
    "train_network",
    "train_ensemble",
    "run_convergence",
    "run_group_final_gains",
    "ensemble_gain_stats",
]


@dataclass
class GroupState:
    """Per-group training state: proposal weights, kept weights, best level."""

    alpha: np.ndarray
    alpha_hat: np.ndarray
    L_max: float

    def __post_init__(self) -> None:
        self.alpha = np.asarray(self.alpha, dtype=float)
        self.alpha_hat = np.asarray(self.alpha_hat, dtype=float)
        for name, w in (("alpha", self.alpha), ("alpha_hat", self.alpha_hat)):
            if not np.all(np.abs(w) == 1.0):
                raise ConfigError(f"{name} entries must be exactly -1 or +1")


@dataclass
class TrainingTrace:
    """Per-frame history of one training block.

    gain[t] is the true combined amplitude sum_j h_j * alpha_hat_j after the
    frame-t update (frame 0 is initialization), aligned_count[t] the number
    of sources with h_j * alpha_hat_j > 0, accepted[t] whether frame t's
    perturbation was accepted (False at t = 0, where nothing is proposed).
    With decimation d only every d-th frame is stored; ``frames`` holds the
    stored frame indices.
    """

    frames: np.ndarray
    gain: np.ndarray
    aligned_count: np.ndarray
    accepted: np.ndarray


def _pilot_scale(config: NetworkConfig) -> float:
    return (config.P / config.N) ** 0.5


def _require_length(h_group: np.ndarray, n: int) -> np.ndarray:
    h = np.asarray(h_group, dtype=float)
    if h.ndim != 1 or h.shape[0] != n:
        raise DimensionError(f"expected a length-{n} channel vector, got shape {h.shape}")
    return h


def init_group(
    h_group: np.ndarray, config: NetworkConfig, rng: np.random.Generator | None = None
) -> tuple[GroupState, float]:
    """Step 1: all-ones weights and the initial received level.

    Returns the state (alpha = alpha_hat = +1, L_max = L_rx) and L_rx =
    sqrt(P/N) * sum_j h_j, plus an N(0, N_o/T_f) estimation error in noisy
    mode (``rng`` required there).
    """
    h = _require_length(h_group, config.N)
    ones = np.ones(config.N)
    level = _pilot_scale(config) * float(h.sum())
    if config.estimation_mode == "noisy":
        if rng is None:
            raise ConfigError("noisy estimation mode needs an rng for the level estimate")
        level += config.estimate_std * rng.standard_normal()
    return GroupState(alpha=ones.copy(), alpha_hat=ones, L_max=level), level


def perturb(state: GroupState, n: int, rng: np.random.Generator) -> np.ndarray:
    """Step 2 proposal: flip each kept weight independently with probability 1/N.

    Source j draws u_j uniform on [0, 1) and flips iff u_j < 1/N. The
    proposal is stored in ``state.alpha`` and returned.
    """
    u = rng.random(n)
    state.alpha = np.where(u < 1.0 / n, -state.alpha_hat, state.alpha_hat)
    return state.alpha


def received_level(
    h_group: np.ndarray,
    alpha: np.ndarray,
    config: NetworkConfig,
    rng: np.random.Generator | None = None,
) -> float:
    """Frame-averaged level sqrt(P/N) * sum_j h_j*alpha_j seen by the destination.

    Exact in perfect mode; noisy mode adds the N(0, N_o/T_f) estimation
    error of the per-frame average.
    """
    h = _require_length(h_group, config.N)
    a = _require_length(alpha, config.N)
    # Elementwise product + pairwise sum, matching the ensemble path bitwise.
    level = _pilot_scale(config) * float((h * a).sum())
    if config.estimation_mode == "noisy":
        if rng is None:
            raise ConfigError("noisy estimation mode needs an rng for the level estimate")
        level += config.estimate_std * rng.standard_normal()
    return level


def feedback_update(state: GroupState, alpha: np.ndarray, L_rx: float) -> GroupState:
    """Apply the 1-bit feedback: keep the proposal only on strict improvement."""
    if L_rx > state.L_max:
        state.alpha_hat = np.asarray(alpha, dtype=float).copy()
        state.L_max = L_rx
    return state


def train_group(
    h_group: np.ndarray, config: NetworkConfig, stream: RandomStream
) -> tuple[np.ndarray, TrainingTrace]:
    """Run one full training block and return the final weights plus trace.

    Frame 0 initializes, frames 1 .. k_o*N - 1 iterate perturb ->
    received_level -> feedback_update; k_o*N frames are consumed in total.
    This is the per-trial reference path; the random draws match
    ``train_ensemble`` at batch size 1 exactly.
    """
    h = _require_length(h_group, config.N)
    total = config.block_frames
    gen_u = stream.child("perturb").generator()
    noisy = config.estimation_mode == "noisy"
    gen_w = stream.child("noise").generator() if noisy else None

    state, _ = init_group(h, config, rng=gen_w)
    gain = np.empty(total)
    aligned = np.empty(total, dtype=np.int32)
    accepted = np.zeros(total, dtype=bool)
    gain[0] = float((h * state.alpha_hat).sum())
    aligned[0] = int((h * state.alpha_hat > 0).sum())

    for t in range(1, total):
        alpha = perturb(state, config.N, gen_u)
        level = received_level(h, alpha, config, rng=gen_w)
        old = state.L_max
        feedback_update(state, alpha, level)
        accepted[t] = level > old
        gain[t] = float((h * state.alpha_hat).sum())
        aligned[t] = int((h * state.alpha_hat > 0).sum())

    trace = TrainingTrace(
        frames=np.arange(total), gain=gain, aligned_count=aligned, accepted=accepted
    )
    return state.alpha_hat.copy(), trace


def train_network(
    channels: ChannelRealization, config: NetworkConfig, stream: RandomStream
) -> tuple[np.ndarray, list[TrainingTrace]]:
    """Train all M groups sequentially (group i on block i, others silent).

    Group i trains on its own coefficients h[i, i, :] only; with per-group
    streams derived as ``stream.child("group/i")``. Returns the (M, N)
    final-weight matrix and the M block traces (M * k_o * N frames total).
    """
    if not channels.matches(config):
        raise DimensionError(
            f"channel tensor {channels.h.shape} does not match config "
            f"(M={config.M}, N={config.N})"
        )
    weights = np.empty((config.M, config.N))
    traces: list[TrainingTrace] = []
    for i in range(config.M):
        weights[i], trace = train_group(
            channels.group_channel(i), config, stream.child(f"group/{i}")
        )
        traces.append(trace)
    return weights, traces


@dataclass
class EnsembleResult:
    """Lockstep training of B independent trials (one group each).

    ``weights`` is (B, N), ``final_gain`` the true combined amplitude per
    trial at the last frame. Trace arrays are (B, n_recorded) and present
    only when recording was requested.
    """

    weights: np.ndarray
    final_gain: np.ndarray
    frames: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))
    gain: np.ndarray | None = None
    aligned_count: np.ndarray | None = None
    accepted: np.ndarray | None = None


def train_ensemble(
    H: np.ndarray,
    config: NetworkConfig,
    stream: RandomStream,
    n_frames: int | None = None,
    record_trace: bool = False,
    decimation: int = 1,
) -> EnsembleResult:
    """Train B trials with per-trial channels H (B, N) in frame lockstep.

    Uniform flips come from ``stream.child("perturb")`` and noisy-mode
    estimation errors from ``stream.child("noise")``, one frame at a time,
    so a batch of size 1 reproduces ``train_group`` bit for bit.
    """
    H = np.asarray(H, dtype=float)
    if H.ndim != 2 or H.shape[1] != config.N:
        raise DimensionError(f"H must have shape (B, {config.N}), got {H.shape}")
    if decimation < 1:
        raise ConfigError(f"decimation must be >= 1, got {decimation}")
    B, N = H.shape
    total = config.block_frames if n_frames is None else int(n_frames)
    if total < 1:
        raise ConfigError(f"need at least one frame, got {total}")

    gen_u = stream.child("perturb").generator()
    noisy = config.estimation_mode == "noisy"
    gen_w = stream.child("noise").generator() if noisy else None
    scale = _pilot_scale(config)
    sigma = config.estimate_std

    A = np.ones((B, N))
    gain = H.sum(axis=1)
    best = scale * gain
    if noisy:
        best = best + sigma * gen_w.standard_normal(B)

    rec_frames = np.arange(0, total, decimation)
    if record_trace:
        rec_gain = np.empty((B, rec_frames.size))
        rec_aligned = np.empty((B, rec_frames.size), dtype=np.int32)
        rec_accepted = np.zeros((B, rec_frames.size), dtype=bool)
        rec_gain[:, 0] = gain
        rec_aligned[:, 0] = (H * A > 0).sum(axis=1)
    next_rec = 1

    flip_p = 1.0 / N
    for t in range(1, total):
        u = gen_u.random((B, N))
        flips = u < flip_p
        A_prop = np.where(flips, -A, A)
        gain_prop = (H * A_prop).sum(axis=1)
        level = scale * gain_prop
        if noisy:
            level = level + sigma * gen_w.standard_normal(B)
        acc = level > best
        A = np.where(acc[:, np.newaxis], A_prop, A)
        gain = np.where(acc, gain_prop, gain)
        best = np.where(acc, level, best)
        if record_trace and next_rec < rec_frames.size and t == rec_frames[next_rec]:
            rec_gain[:, next_rec] = gain
            rec_aligned[:, next_rec] = (H * A > 0).sum(axis=1)
            rec_accepted[:, next_rec] = acc
            next_rec += 1

    if record_trace:
        return EnsembleResult(
            weights=A,
            final_gain=gain,
            frames=rec_frames,
            gain=rec_gain,
            aligned_count=rec_aligned,
            accepted=rec_accepted,
        )
    return EnsembleResult(weights=A, final_gain=gain)


@dataclass
class ConvergenceResult:
    """Traces of ``trials`` network training runs over random channels.

    Arrays are indexed (trial, group, recorded frame); ``abs_sum`` holds
    sum_j |h_j| per (trial, group), the gain ceiling.
    """

    frames: np.ndarray
    gain: np.ndarray
    aligned_count: np.ndarray
    accepted: np.ndarray
    abs_sum: np.ndarray


def _convergence_chunk(
    config: NetworkConfig,
    stream: RandomStream,
    chunk_index: int,
    size: int,
    n_frames: int | None,
    decimation: int,
) -> tuple[np.ndarray, ...]:
    sub = stream.child(f"chunk/{chunk_index}")
    gen = sub.child("channels").generator()
    h = gen.standard_normal((size, config.M, config.M, config.N))
    gains, aligned, accepted = [], [], []
    frames = None
    for i in range(config.M):
        res = train_ensemble(
            h[:, i, i, :],
            config,
            sub.child(f"group/{i}"),
            n_frames=n_frames,
            record_trace=True,
            decimation=decimation,
        )
        frames = res.frames
        gains.append(res.gain)
        aligned.append(res.aligned_count)
        accepted.append(res.accepted)
    abs_sum = np.abs(h[:, np.arange(config.M), np.arange(config.M), :]).sum(axis=2)
    return (
        frames,
        np.stack(gains, axis=1),
        np.stack(aligned, axis=1),
        np.stack(accepted, axis=1),
        abs_sum,
    )


def run_convergence(
    config: NetworkConfig,
    stream: RandomStream,
    n_frames: int | None = None,
    decimation: int = 1,
    workers: int = 1,
) -> ConvergenceResult:
    """Train ``config.trials`` random networks and collect per-frame traces."""
    tasks = [
        (config, stream, c, size, n_frames, decimation)
        for c, size in enumerate(chunk_sizes(config.trials, TRIAL_CHUNK))
    ]
    parts = map_chunks(_convergence_chunk, tasks, workers)
    frames = parts[0][0]
    return ConvergenceResult(
        frames=frames,
        gain=np.concatenate([p[1] for p in parts], axis=0),
        aligned_count=np.concatenate([p[2] for p in parts], axis=0),
        accepted=np.concatenate([p[3] for p in parts], axis=0),
        abs_sum=np.concatenate([p[4] for p in parts], axis=0),
    )


def _final_gain_chunk(
    config: NetworkConfig, stream: RandomStream, chunk_index: int, size: int
) -> tuple[np.ndarray, np.ndarray]:
    sub = stream.child(f"chunk/{chunk_index}")
    h = sub.child("channels").generator().standard_normal((size, config.N))
    res = train_ensemble(h, config, sub.child("train"))
    return res.final_gain, np.abs(h).sum(axis=1)


def run_group_final_gains(
    config: NetworkConfig, stream: RandomStream, workers: int = 1
) -> tuple[np.ndarray, np.ndarray]:
    """Final gains of ``config.trials`` single-group training runs.

    Each trial draws a fresh channel vector and trains one full block;
    returns (final_gain, sum_j |h_j|) per trial, the pair needed to check
    the epsilon-level convergence guarantee.
    """
    tasks = [
        (config, stream, c, size) for c, size in enumerate(chunk_sizes(config.trials, TRIAL_CHUNK))
    ]
    parts = map_chunks(_final_gain_chunk, tasks, workers)
    return (
        np.concatenate([p[0] for p in parts]),
        np.concatenate([p[1] for p in parts]),
    )


def _gain_stats_chunk(
    h: np.ndarray,
    config: NetworkConfig,
    stream: RandomStream,
    chunk_index: int,
    size: int,
    t_list: tuple[int, ...],
) -> tuple[np.ndarray, np.ndarray]:
    n_frames = max(t_list) + 1
    H = np.broadcast_to(h, (size, h.size))
    res = train_ensemble(
        H, config, stream.child(f"chunk/{chunk_index}"), n_frames=n_frames, record_trace=True
    )
    g = res.gain[:, list(t_list)]
    return g.sum(axis=0), np.einsum("ij,ij->j", g, g)


def ensemble_gain_stats(
    h: np.ndarray,
    t_list: list[int],
    n_traj: int,
    config: NetworkConfig,
    stream: RandomStream,
    workers: int = 1,
) -> tuple[np.ndarray, np.ndarray]:
    """Monte Carlo mean and standard error of the gain at given frames.

    Runs ``n_traj`` training trajectories for one fixed channel vector and
    returns (mean, stderr) arrays aligned with ``t_list``. Used to check the
    simulator against the exact chain.
    """
    h = np.asarray(h, dtype=float)
    tl = tuple(int(t) for t in t_list)
    tasks = [
        (h, config, stream, c, size, tl)
        for c, size in enumerate(chunk_sizes(n_traj, TRAJ_CHUNK))
    ]
    parts = map_chunks(_gain_stats_chunk, tasks, workers)
    s1 = np.sum([p[0] for p in parts], axis=0)
    s2 = np.sum([p[1] for p in parts], axis=0)
    mean = s1 / n_traj
    var = np.maximum(s2 / n_traj - mean**2, 0.0)
    stderr = np.sqrt(var / n_traj)
    return mean, stderr
