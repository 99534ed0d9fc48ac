"""Matched-filter autocorrelation taps, Gram matrices, RISI variance, noise PSD."""

import math
from dataclasses import dataclass

import numpy as np

from ._quad import gl_nodes
from .errors import InvalidConfig
from .pulse import KIND_PSWF, Pulse, evaluate, fourier_transform

# Node count for correlation quadrature over an overlap interval; doubling it
# is the standard convergence check (taps are needed to ~1e-8 absolute).
CORR_NODES = 256


@dataclass(frozen=True)
class IsiTaps:
    """Sampled autocorrelation h(lT) for l = 0..l_max; h(-lT) = h(lT)."""

    t_mod: float
    taps: np.ndarray
    l_max: int


@dataclass(frozen=True)
class GramStack:
    """Symmetric matrices S(l), l = 1..l_max, with h(lT) = a' S(l) a."""

    t_mod: float
    ts: float
    matrices: list
    l_max: int


def _l_max(ts: float, t_mod: float) -> int:
    return int(math.ceil(ts / t_mod - 1e-12))


def autocorr_taps(pulse: Pulse, t_mod: float, n_nodes: int = CORR_NODES) -> IsiTaps:
    """h(lT) = integral of p(tau) p(tau - lT) over the support overlap."""
    if not 0 < t_mod <= pulse.ts:
        raise InvalidConfig(f"need 0 < T <= ts, got T={t_mod}, ts={pulse.ts}")
    lm = _l_max(pulse.ts, t_mod)
    taps = np.zeros(lm + 1)
    half = pulse.ts / 2.0
    for l in range(lm + 1):
        lo, hi = l * t_mod - half, half
        if hi - lo <= 0:
            continue
        t, wt = gl_nodes(lo, hi, n_nodes)
        taps[l] = float(np.sum(wt * evaluate(pulse, t) * evaluate(pulse, t - l * t_mod)))
    taps.setflags(write=False)
    return IsiTaps(t_mod=float(t_mod), taps=taps, l_max=lm)


def gram_stack(basis, n_basis: int, t_mod: float, ts: float,
               n_nodes: int = CORR_NODES) -> GramStack:
    """Quadratic-form factorization of the taps under the PSWF expansion.

    S(l)_ij = 1/2 * integral of u_i(tau) u_j(tau - lT) + u_j(tau) u_i(tau - lT),
    so that a' S(l) a equals h(lT) for the pulse with coefficients a.
    """
    if not 0 < t_mod <= ts:
        raise InvalidConfig(f"need 0 < T <= ts, got T={t_mod}, ts={ts}")
    if n_basis > basis.n_funcs:
        raise InvalidConfig(f"n_basis={n_basis} exceeds stored {basis.n_funcs} functions")
    lm = _l_max(ts, t_mod)
    idx = np.arange(n_basis)
    half = ts / 2.0
    scale = 2.0 / ts
    mats = []
    for l in range(1, lm + 1):
        lo, hi = l * t_mod - half, half
        if hi - lo <= 0:
            mats.append(np.zeros((n_basis, n_basis)))
            continue
        t, wt = gl_nodes(lo, hi, n_nodes)
        u0 = basis.eval_normalized(2.0 * t / ts, indices=idx) * math.sqrt(scale)
        u1 = basis.eval_normalized(2.0 * (t - l * t_mod) / ts, indices=idx) * math.sqrt(scale)
        m = (u0 * wt) @ u1.T
        mats.append(0.5 * (m + m.T))
    for m in mats:
        m.setflags(write=False)
    return GramStack(t_mod=float(t_mod), ts=float(ts), matrices=mats, l_max=lm)


def risi_variance(taps: IsiTaps, depth: int) -> float:
    """sigma^2 of the ISI left beyond an equalizer of one-sided memory depth.

    Equals 2 * sum_{l > depth} h(lT)^2; the pulse is time-limited so the sum
    is finite.
    """
    if depth < 0:
        raise InvalidConfig(f"equalizer depth must be >= 0, got {depth}")
    tail = taps.taps[depth + 1:]
    return 2.0 * float(np.sum(tail * tail))


def to_db(sigma2: float) -> float:
    """10*log10 of a variance; -inf for zero."""
    if sigma2 <= 0.0:
        return -math.inf
    return 10.0 * math.log10(sigma2)


def sampled_noise_psd(pulse: Pulse, t_mod: float, f) -> np.ndarray:
    """Folded PSD (per unit N0/2) of the matched-filter noise samples.

    f is normalized frequency (cycles per sample); the aliasing sum runs over
    the integers m with |(f - m)/T| within 3W, beyond which |P| is negligible
    for any small-OOBE pulse.  Satisfies integral over one period = h(0) = 1.
    """
    if t_mod <= 0:
        raise InvalidConfig(f"need T > 0, got {t_mod}")
    f_arr = np.atleast_1d(np.asarray(f, dtype=float))
    m_reach = int(math.ceil(3.0 * pulse.w * t_mod + np.max(np.abs(f_arr)) + 1))
    ms = np.arange(-m_reach, m_reach + 1)
    nus = (f_arr[:, None] - ms[None, :]) / t_mod
    pv = np.abs(fourier_transform(pulse, nus.ravel())) ** 2
    psd = pv.reshape(nus.shape).sum(axis=1) / t_mod
    return float(psd[0]) if np.isscalar(f) else psd
