"""Exact absorbing-chain analysis of one group's training dynamics.

Under perfect level estimation the kept weights alpha_hat fully determine
the stored best level, so training is a Markov chain on the 2^N sign
vectors: a proposal flips each weight independently with probability 1/N
and is kept iff it strictly increases the combined amplitude h . alpha.
The state sign(h) is absorbing and reachable from everywhere in one step,
which makes the chain an absorbing chain; this module computes its exact
transition structure, distribution evolution, expected gains and absorption
times for small N, serving as ground truth for the simulator.

States are encoded as N-bit codes with bit j set iff alpha_hat_j = +1.
Dense transition matrices are kept up to N = 10; for N = 11..14 rows are
generated on the fly (matrix-free), which trades speed for memory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve
from scipy.sparse.linalg import LinearOperator, gmres

from .errors import CapacityError, DegenerateChannelError, FeedbeamError
from .channel import sign_pm

__all__ = [
    "DENSE_STATE_LIMIT",
    "STATE_LIMIT",
    "MarkovModel",
    "build_markov",
    "gain_distribution",
    "expected_gain_exact",
    "gain_moments_exact",
    "absorption_time_stats",
    "one_step_absorb_probability",
]

DENSE_STATE_LIMIT = 10
STATE_LIMIT = 14


@dataclass(frozen=True)
class MarkovModel:
    """Exact training chain for one channel vector.

    ``gains[s]`` is h . alpha(s) for state code s, ``absorbing_index`` the
    code of sign(h). ``transition`` is the dense row-stochastic matrix for
    N <= 10 and None above (rows generated on demand).
    """

    N: int
    h: np.ndarray
    gains: np.ndarray
    absorbing_index: int
    mask_prob: np.ndarray
    transition: np.ndarray | None

    @property
    def n_states(self) -> int:
        return 1 << self.N

    @property
    def start_index(self) -> int:
        """Code of the all-(+1) initialization state."""
        return (1 << self.N) - 1


def _state_signs(n: int) -> np.ndarray:
    codes = np.arange(1 << n)
    bits = (codes[:, np.newaxis] >> np.arange(n)) & 1
    return 2.0 * bits - 1.0


def build_markov(h: np.ndarray) -> MarkovModel:
    """Build the exact 2^N-state chain for channel vector h.

    Transition from state s under proposal mask m (bit j set = flip j,
    each bit independent with probability 1/N) goes to s XOR m iff the
    proposal strictly increases the gain, else stays at s.
    """
    h = np.asarray(h, dtype=float).ravel()
    n = h.size
    if n < 1 or n > STATE_LIMIT:
        raise CapacityError(f"exact chain supports 1 <= N <= {STATE_LIMIT}, got N={n}")
    if np.any(h == 0.0):
        raise DegenerateChannelError("channel entries must be nonzero (sign would be degenerate)")

    signs = _state_signs(n)
    gains = signs @ h
    bits_pos = (h > 0).astype(np.int64)
    absorbing = int((bits_pos << np.arange(n)).sum())

    p = 1.0 / n
    counts = np.array([bin(m).count("1") for m in range(1 << n)])
    mask_prob = p**counts * (1.0 - p) ** (n - counts)

    transition = None
    if n <= DENSE_STATE_LIMIT:
        size = 1 << n
        transition = np.zeros((size, size))
        codes = np.arange(size)
        diag = np.full(size, mask_prob[0])
        for m in range(1, size):
            targets = codes ^ m
            acc = gains[targets] > gains
            transition[codes[acc], targets[acc]] = (
                transition[codes[acc], targets[acc]] + mask_prob[m]
            )
            diag[~acc] += mask_prob[m]
        transition[codes, codes] += diag
        # No proposal ever beats the maximal gain: pin the absorbing row to
        # the exact unit vector instead of a rounded rejected-mass sum.
        transition[absorbing, :] = 0.0
        transition[absorbing, absorbing] = 1.0

    return MarkovModel(
        N=n,
        h=h,
        gains=gains,
        absorbing_index=absorbing,
        mask_prob=mask_prob,
        transition=transition,
    )


def _step_distribution(model: MarkovModel, dist: np.ndarray) -> np.ndarray:
    """One left-multiplication dist @ T without materializing T."""
    codes = np.arange(model.n_states)
    out = np.zeros_like(dist)
    for m in range(model.n_states):
        pm = model.mask_prob[m]
        targets = codes ^ m
        acc = model.gains[targets] > model.gains
        moved = np.where(acc, dist, 0.0)
        out[targets] += moved * pm
        out += np.where(acc, 0.0, dist) * pm
    return out


def _apply_right(model: MarkovModel, v: np.ndarray) -> np.ndarray:
    """Matrix-free T @ v (right action), used for hitting-time solves."""
    codes = np.arange(model.n_states)
    out = np.zeros(v.shape, dtype=float)
    for m in range(model.n_states):
        pm = model.mask_prob[m]
        targets = codes ^ m
        acc = model.gains[targets] > model.gains
        out += pm * np.where(acc, v[targets], v)
    return out


def gain_distribution(model: MarkovModel, t: int) -> np.ndarray:
    """State distribution after t update steps from the all-(+1) start state."""
    if t < 0:
        raise FeedbeamError(f"t must be >= 0, got {t}")
    dist = np.zeros(model.n_states)
    dist[model.start_index] = 1.0
    if model.transition is not None:
        for _ in range(t):
            dist = dist @ model.transition
    else:
        for _ in range(t):
            dist = _step_distribution(model, dist)
    return dist


def expected_gain_exact(model: MarkovModel, t: int) -> float:
    """E[h . alpha_hat[t]] under the exact chain, conditioned on h."""
    return float(gain_distribution(model, t) @ model.gains)


def gain_moments_exact(model: MarkovModel, t: int) -> tuple[float, float]:
    """Exact mean and standard deviation of the gain at step t.

    The standard deviation divided by sqrt(#trajectories) is the true
    Monte Carlo standard error, which stays meaningful even when a finite
    sample happens to be fully absorbed and its sample variance collapses.
    """
    dist = gain_distribution(model, t)
    mean = float(dist @ model.gains)
    var = float(dist @ (model.gains - mean) ** 2)
    return mean, math.sqrt(max(var, 0.0))


def absorption_time_stats(model: MarkovModel) -> tuple[float, np.ndarray]:
    """Expected steps to absorption from every state (0 at the absorbing one).

    Solves the standard absorbing-chain system (I - Q) tau = 1 over the
    transient states; the headline mean is taken from the all-(+1) start
    state. Dense solve for N <= 10, matrix-free GMRES above.
    """
    size = model.n_states
    absorbing = model.absorbing_index
    if model.transition is not None:
        transient = np.setdiff1d(np.arange(size), [absorbing])
        Q = model.transition[np.ix_(transient, transient)]
        tau_t = solve(np.eye(size - 1) - Q, np.ones(size - 1))
        tau = np.zeros(size)
        tau[transient] = tau_t
    else:
        def matvec(v: np.ndarray) -> np.ndarray:
            w = v.copy()
            w[absorbing] = 0.0
            u = _apply_right(model, w)
            u[absorbing] = 0.0
            return v - u

        rhs = np.ones(size)
        rhs[absorbing] = 0.0
        op = LinearOperator((size, size), matvec=matvec, dtype=float)
        tau, info = gmres(op, rhs, rtol=1e-12, atol=0.0, maxiter=2000)
        if info != 0:
            raise FeedbeamError(f"hitting-time solve did not converge (gmres info={info})")
    return float(tau[model.start_index]), tau


def one_step_absorb_probability(model: MarkovModel) -> np.ndarray:
    """P(next state = absorbing | current state), per state code.

    For a state with r reverse-aligned sources this is (1/N)^r (1-1/N)^(N-r);
    at the absorbing state itself it is 1 (the chain never leaves).
    """
    codes = np.arange(model.n_states)
    probs = model.mask_prob[codes ^ model.absorbing_index]
    probs[model.absorbing_index] = 1.0
    return probs


def state_signs(model: MarkovModel) -> np.ndarray:
    """(2^N, N) matrix of alpha_hat vectors, row s = state code s."""
    return _state_signs(model.N)


def absorbing_matches_sign(model: MarkovModel) -> bool:
    """Consistency check: the absorbing state's weights equal sign(h)."""
    return bool(np.all(state_signs(model)[model.absorbing_index] == sign_pm(model.h)))
