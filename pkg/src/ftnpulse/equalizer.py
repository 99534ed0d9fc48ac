"""Truncated modified Viterbi detection on matched-filter samples.

The detector maximizes the cumulative metric

    sum_k [ a_k*y_k - 0.5*h(0)*a_k^2 - a_k * sum_{l=1..L} h(lT)*a_{k-l} ]

over all symbol sequences, by dynamic programming over M^L states (the L most
recent symbols).  It operates directly on the sampler output -- no whitening
filter exists in this receiver chain -- and models only the 2L nearest
interferers; everything beyond is treated as noise.  Pre-block history is
all-zero (virtual zero-amplitude symbols), decisions come from a full-block
traceback from the best terminal state, and metric ties resolve toward the
lexicographically smallest predecessor, so detection is fully deterministic.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidConfig

_NEG = -1e300


@dataclass(frozen=True)
class Constellation:
    """Real PAM alphabet, zero mean and unit average energy, Gray-labeled."""

    points: np.ndarray
    bits_per_symbol: int
    labels: np.ndarray  # (M, bits_per_symbol) int

    @property
    def size(self) -> int:
        return self.points.size


def pam(m: int) -> Constellation:
    """M-PAM with levels (2i - M + 1)/sqrt((M^2-1)/3) and Gray bit labels."""
    if m < 2 or (m & (m - 1)) != 0:
        raise InvalidConfig(f"constellation size must be a power of two >= 2, got {m}")
    levels = 2.0 * np.arange(m) - (m - 1)
    levels = levels / math.sqrt((m * m - 1) / 3.0)
    bps = int(math.log2(m))
    labels = np.zeros((m, bps), dtype=np.int8)
    for i in range(m):
        gray = i ^ (i >> 1)
        for b in range(bps):
            labels[i, b] = (gray >> (bps - 1 - b)) & 1
    pts = levels.astype(float)
    pts.setflags(write=False)
    labels.setflags(write=False)
    return Constellation(points=pts, bits_per_symbol=bps, labels=labels)


def binary() -> Constellation:
    """Antipodal alphabet {-1, +1}."""
    return pam(2)


@dataclass(frozen=True)
class TrellisConfig:
    """Detector configuration; only taps 0..L are consumed."""

    L: int
    constellation: Constellation
    taps: np.ndarray
    block_len: int
    termination: str = "traceback_full_block"
    _tables: dict = field(repr=False, default=None, compare=False)

    def __post_init__(self):
        raw = getattr(self.taps, "taps", self.taps)  # accepts analysis.IsiTaps
        taps = np.asarray(raw, dtype=float)
        if self.L < 0:
            raise InvalidConfig(f"L must be >= 0, got {self.L}")
        if taps.size < self.L + 1:
            raise InvalidConfig(
                f"need taps for lags 0..{self.L}, got only {taps.size}"
            )
        if abs(taps[0] - 1.0) > 1e-6:
            raise InvalidConfig(f"taps[0] must be 1 (unit-energy pulse), got {taps[0]}")
        if self.block_len < 1:
            raise InvalidConfig("block_len must be >= 1")
        if self.termination != "traceback_full_block":
            raise InvalidConfig(f"unsupported termination {self.termination!r}")
        object.__setattr__(self, "taps", taps)
        object.__setattr__(self, "_tables", _build_tables(self.L, self.constellation, taps))

    @property
    def n_states(self) -> int:
        return self.constellation.size ** self.L


def _state_digits(states: np.ndarray, m: int, n_digits: int) -> np.ndarray:
    """digit l of each state = constellation index of the symbol l+1 steps back."""
    out = np.empty((states.size, n_digits), dtype=np.int64)
    s = states.copy()
    for l in range(n_digits):
        out[:, l] = s % m
        s //= m
    return out


def _build_tables(L: int, constellation: Constellation, taps: np.ndarray) -> dict:
    """Static per-transition metric pieces for the steady-state recursion.

    For destination state s' (new symbol m' = s' mod M) and dropped-digit
    choice q, the predecessor is pre[s', q] and the observation-independent
    metric part is const[s', q] = -0.5*h0*a^2 - a * sum_l h_l * hist_l.
    """
    m = constellation.size
    pts = constellation.points
    n_states = m ** L
    states = np.arange(n_states)

    # Warm-up tables: at step k < L the state space is M^(k+1) and every
    # state has the unique predecessor s' // M.
    warm_const = []
    for k in range(L):
        sz = m ** (k + 1)
        st = np.arange(sz)
        digits = _state_digits(st, m, k + 1)
        a_new = pts[digits[:, 0]]
        interf = np.zeros(sz)
        for l in range(1, k + 1):
            interf += taps[l] * pts[digits[:, l]]
        warm_const.append(-0.5 * taps[0] * a_new**2 - a_new * interf)

    if L == 0:
        pre = np.zeros((1, 1), dtype=np.int64)
        const = (-0.5 * taps[0] * pts**2)[None, :]  # destination == symbol choice
        return {
            "pre": pre, "const": const, "warm_const": warm_const,
            "new_pts": pts.copy(), "n_states": 1,
        }

    digits = _state_digits(states, m, L)
    # Steady state: predecessors of s' are (s' // M) + q * M^(L-1).
    base = states // m
    pre = base[:, None] + np.arange(m)[None, :] * (m ** (L - 1))
    a_new = pts[states % m]
    # Interference history of the *predecessor* state, per (s', q).
    pre_digits = _state_digits(pre.ravel(), m, L).reshape(n_states, m, L)
    interf = np.zeros((n_states, m))
    for l in range(1, L + 1):
        interf += taps[l] * pts[pre_digits[:, :, l - 1]]
    const = -0.5 * taps[0] * a_new[:, None] ** 2 - a_new[:, None] * interf
    return {
        "pre": pre, "const": const, "warm_const": warm_const,
        "new_pts": a_new, "n_states": n_states,
    }


def detect(config: TrellisConfig, observations, with_stats: bool = False):
    """Symbol-index decisions for one block of matched-filter samples."""
    y = np.asarray(observations, dtype=float)
    if y.ndim != 1 or y.size != config.block_len:
        raise InvalidConfig(
            f"observations must be a length-{config.block_len} vector, got shape {y.shape}"
        )
    dec, stats = _detect_batch_impl(config, y[None, :])
    if with_stats:
        return dec[0], stats
    return dec[0]


def detect_batch(config: TrellisConfig, observations) -> np.ndarray:
    """Vectorized detect over independent blocks stacked in rows."""
    y = np.asarray(observations, dtype=float)
    if y.ndim != 2 or y.shape[1] != config.block_len:
        raise InvalidConfig(
            f"expected (n_blocks, {config.block_len}) observations, got {y.shape}"
        )
    dec, _ = _detect_batch_impl(config, y)
    return dec


def _detect_batch_impl(config: TrellisConfig, y: np.ndarray):
    tab = config._tables
    m = config.constellation.size
    pts = config.constellation.points
    L = config.L
    n_blocks, n_steps = y.shape
    branch_evals = 0

    if L == 0:
        # Memoryless metric: per-sample argmax of a*y - 0.5*h0*a^2, which is
        # exactly nearest-point slicing for a unit-gain channel.
        cand = y[:, :, None] * pts[None, None, :] + tab["const"][0][None, None, :]
        dec = np.argmax(cand, axis=2).astype(np.int64)
        stats = {"n_states": 1, "branch_evals": n_blocks * n_steps * m}
        return dec, stats

    warm_steps = min(L, n_steps)
    bp = []

    # Warm-up: state space grows M, M^2, ..., M^L; unique predecessors.
    pm = None
    for k in range(warm_steps):
        const_k = tab["warm_const"][k]
        sz = const_k.size
        st = np.arange(sz)
        a_new = pts[st % m]
        step = const_k[None, :] + y[:, k, None] * a_new[None, :]
        if pm is None:
            pm = step.copy()
        else:
            pm = pm[:, st // m] + step
        branch_evals += n_blocks * sz
        bp.append(None)  # predecessor is implicit in warm-up

    # Steady state.
    pre = tab["pre"]
    const = tab["const"]
    new_pts = tab["new_pts"]
    for k in range(warm_steps, n_steps):
        cand = pm[:, pre] + const[None, :, :]
        q = np.argmax(cand, axis=2).astype(np.int8)
        pm = np.take_along_axis(cand, q[:, :, None], axis=2)[:, :, 0]
        pm += y[:, k, None] * new_pts[None, :]
        branch_evals += n_blocks * pre.shape[0] * m
        bp.append(q)

    # Full-block traceback from the best terminal state.
    dec = np.empty((n_blocks, n_steps), dtype=np.int64)
    state = np.argmax(pm, axis=1)
    rows = np.arange(n_blocks)
    for k in range(n_steps - 1, -1, -1):
        dec[:, k] = state % m
        if k >= warm_steps:
            q = bp[k][rows, state]
            state = state // m + q.astype(np.int64) * (m ** (L - 1))
        else:
            state = state // m
    stats = {"n_states": tab["n_states"], "branch_evals": branch_evals}
    return dec, stats


def sequence_metric(config: TrellisConfig, observations, symbol_indices) -> float:
    """Cumulative metric of one full candidate sequence (oracle helper)."""
    y = np.asarray(observations, dtype=float)
    idx = np.asarray(symbol_indices, dtype=int)
    if y.size != idx.size:
        raise InvalidConfig("sequence length must match observations")
    pts = config.constellation.points
    a = pts[idx]
    h = config.taps
    total = 0.0
    for k in range(y.size):
        interf = 0.0
        for l in range(1, config.L + 1):
            if k - l >= 0:
                interf += h[l] * a[k - l]
        total += a[k] * y[k] - 0.5 * h[0] * a[k] ** 2 - a[k] * interf
    return float(total)
