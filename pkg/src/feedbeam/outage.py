"""Monte Carlo SINR / outage estimation for the data-transmission phase.

After training, all M groups transmit concurrently; destination i sees its
own combined amplitude plus M-1 interference terms. This module estimates
P((1/2) log2(1 + SINR) < R) over random channel draws and compares it with
the closed-form bound, and probes how the interference power scales with N.

Two weight modes are supported: ``trained`` runs the actual training
algorithm per trial, ``idealized`` starts from the perfect configuration
sign(h) and flips a uniformly random subset of exactly round(epsilon_o * N)
sources per group, which is the premise under which the bound is derived.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bounds import epsilon_max, outage_bound
from .channel import ChannelRealization, sign_pm
from .config import NetworkConfig
from .errors import ConfigError, DimensionError, DomainError, InfeasibleEpsilonError
from .rng import RandomStream
from .training import train_ensemble
from .util import TRAJ_CHUNK, TRIAL_CHUNK, chunk_sizes, map_chunks

__all__ = [
    "WEIGHTS_MODES",
    "OutageResult",
    "sinr",
    "estimate_outage",
    "ProbeRow",
    "ProbeResult",
    "interference_scaling_probe",
]

WEIGHTS_MODES = ("trained", "idealized")


@dataclass(frozen=True)
class OutageResult:
    """Empirical outage for one link at one rate, with the analytic bound."""

    N: int
    M: int
    epsilon_o: float
    delta: float
    rate: float
    trials: int
    outage_empirical: float
    stderr: float
    bound_finite: float
    bound_asymptotic: float
    weights_mode: str
    link: int = 0

    def to_dict(self) -> dict:
        def jsonable(x):
            return None if isinstance(x, float) and not math.isfinite(x) else x

        return {
            "N": self.N,
            "M": self.M,
            "epsilon_o": self.epsilon_o,
            "delta": self.delta,
            "rate": self.rate,
            "trials": self.trials,
            "outage_empirical": self.outage_empirical,
            "stderr": self.stderr,
            "bound_finite": jsonable(self.bound_finite),
            "bound_asymptotic": jsonable(self.bound_asymptotic),
            "mode": self.weights_mode,
            "link": self.link,
        }


def sinr(
    channels: ChannelRealization, weights: np.ndarray, i: int, config: NetworkConfig
) -> float:
    """Exact SINR of link i (0-based) for given +-1 weights of all groups.

    SINR_i = (P/N) (h[i,i,:] . w[i])^2 /
             (sum_{r != i} (P/N) (h[i,r,:] . w[r])^2 + N_o).
    """
    w = np.asarray(weights, dtype=float)
    if not channels.matches(config):
        raise DimensionError("channel tensor does not match config")
    if w.shape != (config.M, config.N):
        raise DimensionError(f"weights must have shape ({config.M}, {config.N}), got {w.shape}")
    if not np.all(np.abs(w) == 1.0):
        raise DimensionError("weights entries must be exactly -1 or +1")
    if not 0 <= i < config.M:
        raise DimensionError(f"link index {i} out of range for M={config.M}")
    scale = config.P / config.N
    coeffs = np.einsum("rj,rj->r", channels.h[i], w)
    signal = scale * coeffs[i] ** 2
    interference = scale * (np.sum(coeffs**2) - coeffs[i] ** 2)
    return float(signal / (interference + config.N_o))


def _idealized_weights(diag: np.ndarray, n_flip: int, gen: np.random.Generator) -> np.ndarray:
    """sign(h) with exactly n_flip uniformly chosen sources flipped per row."""
    w = sign_pm(diag)
    if n_flip > 0:
        u = gen.random(diag.shape)
        order = np.argpartition(u, n_flip - 1, axis=-1)[..., :n_flip]
        mult = np.ones_like(w)
        np.put_along_axis(mult, order, -1.0, axis=-1)
        w = w * mult
    return w


def _link_outage_counts(
    h: np.ndarray, w: np.ndarray, config: NetworkConfig, rate: float, links: list[int]
) -> np.ndarray:
    scale = config.P / config.N
    threshold = 2.0 ** (2.0 * rate) - 1.0
    counts = np.empty(len(links), dtype=np.int64)
    for pos, i in enumerate(links):
        coeffs = np.einsum("brj,brj->br", h[:, i], w)
        signal = scale * coeffs[:, i] ** 2
        interference = scale * (np.sum(coeffs**2, axis=1) - coeffs[:, i] ** 2)
        snr = signal / (interference + config.N_o)
        counts[pos] = int(np.count_nonzero(snr < threshold))
    return counts


def _outage_chunk(
    config: NetworkConfig,
    rate: float,
    mode: str,
    stream: RandomStream,
    chunk_index: int,
    size: int,
    links: tuple[int, ...],
) -> np.ndarray:
    sub = stream.child(f"chunk/{chunk_index}")
    gen = sub.child("channels").generator()
    h = gen.standard_normal((size, config.M, config.M, config.N))
    diag = h[:, np.arange(config.M), np.arange(config.M), :]
    if mode == "idealized":
        w = _idealized_weights(diag, config.reverse_count, sub.child("flips").generator())
    else:
        w = np.empty((size, config.M, config.N))
        for i in range(config.M):
            w[:, i] = train_ensemble(diag[:, i, :], config, sub.child(f"train/group/{i}")).weights
    return _link_outage_counts(h, w, config, rate, list(links))


def estimate_outage(
    config: NetworkConfig,
    rate: float,
    mode: str,
    stream: RandomStream,
    workers: int = 1,
    all_links: bool = False,
) -> OutageResult | list[OutageResult]:
    """Estimate P((1/2) log2(1 + SINR) < rate) over ``config.trials`` draws.

    By link symmetry only link 0 is evaluated unless ``all_links`` is set
    (diagnostics). The matching finite-N and asymptotic bounds are attached
    when the configuration admits them (N >= 25 and feasible epsilon_o),
    NaN otherwise.
    """
    if not rate > 0:
        raise DomainError(f"rate must be > 0, got {rate!r}")
    if mode not in WEIGHTS_MODES:
        raise ConfigError(f"weights mode must be one of {WEIGHTS_MODES}, got {mode!r}")
    links = tuple(range(config.M)) if all_links else (0,)
    # Idealized trials are one SINR evaluation; trained trials run a full
    # training block per group, so they get much smaller work units.
    chunk = TRAJ_CHUNK if mode == "idealized" else TRIAL_CHUNK
    tasks = [
        (config, rate, mode, stream, c, size, links)
        for c, size in enumerate(chunk_sizes(config.trials, chunk))
    ]
    counts = np.sum(map_chunks(_outage_chunk, tasks, workers), axis=0)

    # The analytic bound needs N >= 25, a feasible epsilon_o, and k1 > k2 at
    # this finite N; the empirical estimate stands on its own otherwise.
    bound_finite = bound_asym = float("nan")
    if config.N >= 25 and config.epsilon_o < epsilon_max():
        try:
            report = outage_bound(config.N, config)
            bound_finite, bound_asym = report.bound_finite, report.bound_asymptotic
        except InfeasibleEpsilonError:
            pass

    results = []
    for pos, link in enumerate(links):
        p_hat = counts[pos] / config.trials
        results.append(
            OutageResult(
                N=config.N,
                M=config.M,
                epsilon_o=config.epsilon_o,
                delta=config.delta,
                rate=rate,
                trials=config.trials,
                outage_empirical=float(p_hat),
                stderr=float(math.sqrt(p_hat * (1.0 - p_hat) / config.trials)),
                bound_finite=bound_finite,
                bound_asymptotic=bound_asym,
                weights_mode=mode,
                link=link,
            )
        )
    return results if all_links else results[0]


@dataclass(frozen=True)
class ProbeRow:
    """Interference statistics at one block size N."""

    N: int
    trials: int
    mean_sq: float          # E |sum_j h_j * w_j|^2, cross channel vs trained weights
    control_sq: float       # E |sum_j h_j|^2 = N, control with all-ones weights
    sample_mean: float      # E [h_j * w_j], should vanish by sign symmetry


@dataclass(frozen=True)
class ProbeResult:
    rows: list[ProbeRow]
    slope: float


def _probe_chunk(
    config: NetworkConfig, stream: RandomStream, chunk_index: int, size: int
) -> tuple[float, float, float]:
    sub = stream.child(f"chunk/{chunk_index}")
    gen = sub.child("channels").generator()
    own = gen.standard_normal((size, config.N))
    cross = gen.standard_normal((size, config.N))
    weights = train_ensemble(own, config, sub.child("train")).weights
    v = np.einsum("ij,ij->i", cross, weights)
    ctrl = cross.sum(axis=1)
    return float(np.sum(v**2)), float(np.sum(ctrl**2)), float(np.sum(cross * weights))


def interference_scaling_probe(
    config: NetworkConfig,
    N_list: list[int],
    stream: RandomStream,
    workers: int = 1,
) -> ProbeResult:
    """Measure E |sum_j h_j w_j|^2 for trained weights against independent
    cross channels over a range of N and fit the log-log slope.

    The trained weights are independent of the cross channel and sign
    flips preserve the N(0, 1) law, so the expectation equals N and the
    fitted slope should be 1.
    """
    if not N_list:
        raise ConfigError("N_list must be nonempty")
    rows = []
    for n in N_list:
        cfg = config.replace(N=int(n))
        tasks = [
            (cfg, stream.child(f"N/{n}"), c, size)
            for c, size in enumerate(chunk_sizes(cfg.trials, TRIAL_CHUNK))
        ]
        parts = map_chunks(_probe_chunk, tasks, workers)
        sq = sum(p[0] for p in parts) / cfg.trials
        ctrl = sum(p[1] for p in parts) / cfg.trials
        samp = sum(p[2] for p in parts) / (cfg.trials * cfg.N)
        rows.append(
            ProbeRow(N=cfg.N, trials=cfg.trials, mean_sq=sq, control_sq=ctrl, sample_mean=samp)
        )
    slope = float(
        np.polyfit(np.log([r.N for r in rows]), np.log([r.mean_sq for r in rows]), 1)[0]
    ) if len(rows) >= 2 else float("nan")
    return ProbeResult(rows=rows, slope=slope)
