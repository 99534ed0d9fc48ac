"""Unit-energy, time-limited transmit pulses.

Two kinds are supported: a truncated root-raised-cosine baseline and a
linear combination of unit-norm truncated PSWFs.  Default unit convention
throughout the package is 2W = 1 (W = 0.5), so durations and modulation
intervals are given directly in multiples of 1/(2W).
"""

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import legval

from ._quad import gl_panels
from .errors import BasisMismatch, DimensionMismatch, InvalidConfig
from .pswf import PswfBasis

KIND_RRC = "truncated_rrc"
KIND_PSWF = "pswf_combination"

# Tolerance on the energy of user-supplied PSWF coefficients before the exact
# renormalization applied at construction.  Loose enough to accept published
# coefficient tables rounded to ~4 decimals.
ALPHA_NORM_TOL = 1e-4


@dataclass(frozen=True)
class Pulse:
    """A unit-energy pulse supported on [-ts/2, ts/2]."""

    kind: str
    ts: float
    w: float
    beta: float = None
    t_nyq: float = None
    norm_factor: float = None
    basis: PswfBasis = None
    alphas: np.ndarray = None
    _combo_std: np.ndarray = field(repr=False, default=None)  # Legendre series incl. sqrt(2/ts)

    @property
    def c(self) -> float:
        return 2.0 * self.ts * self.w


@dataclass(frozen=True)
class SpectrumReport:
    """In-band energy over [-W, W] and the complementary out-of-band energy."""

    in_band_energy: float
    oobe: float
    samples: list = None


def _rrc_impulse(t: np.ndarray, beta: float, t0: float) -> np.ndarray:
    """Analytic RRC impulse response with symbol interval t0, unit energy on R.

    Removable singularities at t = 0 and |t| = t0/(4 beta) are evaluated by
    their closed-form limits.
    """
    t = np.asarray(t, dtype=float)
    x = t / t0
    out = np.empty_like(x)

    if beta == 0.0:
        out = np.sinc(x) / math.sqrt(t0)
        return out

    center = np.abs(x) < 1e-10
    singular = np.abs(np.abs(4.0 * beta * x) - 1.0) < 1e-8
    regular = ~(center | singular)

    xr = x[regular]
    num = np.sin(math.pi * xr * (1 - beta)) + 4 * beta * xr * np.cos(math.pi * xr * (1 + beta))
    den = math.pi * xr * (1.0 - (4 * beta * xr) ** 2)
    out[regular] = num / den

    out[center] = 1.0 - beta + 4 * beta / math.pi

    if np.any(singular):
        out[singular] = (beta / math.sqrt(2.0)) * (
            (1 + 2 / math.pi) * math.sin(math.pi / (4 * beta))
            + (1 - 2 / math.pi) * math.cos(math.pi / (4 * beta))
        )

    return out / math.sqrt(t0)


def _support_quadrature(pulse_ts: float, t_nyq: float):
    """Composite rule over [-ts/2, ts/2] resolving the RRC oscillation scale."""
    n_panels = max(16, int(math.ceil(4.0 * pulse_ts / t_nyq)))
    return gl_panels(-pulse_ts / 2.0, pulse_ts / 2.0, n_panels, 32)


def make_truncated_rrc(beta: float, w: float, ts: float) -> Pulse:
    """RRC with roll-off beta, truncated to [-ts/2, ts/2], rescaled to unit energy.

    The design interval is (1+beta)/(2w); norm_factor stores the
    post-truncation rescale.
    """
    if not 0.0 <= beta <= 1.0:
        raise InvalidConfig(f"roll-off must be in [0, 1], got {beta}")
    if ts <= 0 or w <= 0:
        raise InvalidConfig(f"need ts > 0 and w > 0, got ts={ts}, w={w}")
    t_nyq = (1.0 + beta) / (2.0 * w)
    t, wt = _support_quadrature(ts, t_nyq)
    energy = float(np.sum(wt * _rrc_impulse(t, beta, t_nyq) ** 2))
    return Pulse(
        kind=KIND_RRC,
        ts=float(ts),
        w=float(w),
        beta=float(beta),
        t_nyq=t_nyq,
        norm_factor=1.0 / math.sqrt(energy),
    )


def make_pswf_pulse(basis: PswfBasis, alphas, ts: float, w: float) -> Pulse:
    """Pulse p(t) = sum_i alpha_i u_i(t) over the unit-norm truncated PSWFs.

    alphas must already be near unit energy (within ALPHA_NORM_TOL); they are
    renormalized exactly on construction.
    """
    if ts <= 0 or w <= 0:
        raise InvalidConfig(f"need ts > 0 and w > 0, got ts={ts}, w={w}")
    if abs(basis.c - 2.0 * ts * w) > 1e-12 * max(1.0, basis.c):
        raise BasisMismatch(
            f"basis has c={basis.c} but 2*ts*w={2.0 * ts * w}"
        )
    a = np.asarray(alphas, dtype=float).copy()
    if a.ndim != 1 or a.size == 0:
        raise DimensionMismatch("alphas must be a non-empty 1-D vector")
    if a.size > basis.n_funcs:
        raise DimensionMismatch(
            f"{a.size} coefficients but basis stores only {basis.n_funcs} functions"
        )
    nrm2 = float(np.dot(a, a))
    if abs(nrm2 - 1.0) > ALPHA_NORM_TOL:
        raise InvalidConfig(f"coefficient energy {nrm2} too far from 1")
    a /= math.sqrt(nrm2)
    a.setflags(write=False)
    combo = math.sqrt(2.0 / ts) * (a @ basis._std_coeffs[: a.size])
    return Pulse(
        kind=KIND_PSWF,
        ts=float(ts),
        w=float(w),
        basis=basis,
        alphas=a,
        _combo_std=combo,
    )


def evaluate(pulse: Pulse, t):
    """p(t); exactly 0 outside [-ts/2, ts/2], continuous inside."""
    t_arr = np.asarray(t, dtype=float)
    scalar = t_arr.ndim == 0
    t_arr = np.atleast_1d(t_arr)
    inside = np.abs(t_arr) <= pulse.ts / 2.0
    out = np.zeros_like(t_arr)
    if np.any(inside):
        if pulse.kind == KIND_RRC:
            out[inside] = pulse.norm_factor * _rrc_impulse(t_arr[inside], pulse.beta, pulse.t_nyq)
        else:
            x = 2.0 * t_arr[inside] / pulse.ts
            out[inside] = legval(x, pulse._combo_std)
    return float(out[0]) if scalar else out


def _pulse_quadrature(pulse: Pulse):
    if pulse.kind == KIND_RRC:
        return _support_quadrature(pulse.ts, pulse.t_nyq)
    # Legendre series of order ~legendre_order: one rule with ample nodes.
    n_panels = max(8, pulse.basis.config.legendre_order // 16)
    return gl_panels(-pulse.ts / 2.0, pulse.ts / 2.0, n_panels, 32)


def energy(pulse: Pulse) -> float:
    """Quadrature of p^2 over the support (should be 1 for any valid pulse)."""
    t, wt = _pulse_quadrature(pulse)
    return float(np.sum(wt * evaluate(pulse, t) ** 2))


def fourier_transform(pulse: Pulse, freqs, chunk: int = 512) -> np.ndarray:
    """P(f) = integral of p(t) exp(-j 2 pi f t) over the support, by quadrature."""
    t, wt = _pulse_quadrature(pulse)
    pv = evaluate(pulse, t) * wt
    freqs = np.atleast_1d(np.asarray(freqs, dtype=float))
    out = np.empty(freqs.shape, dtype=complex)
    for lo in range(0, freqs.size, chunk):
        f = freqs[lo:lo + chunk]
        out[lo:lo + chunk] = np.exp(-2j * math.pi * np.outer(f, t)) @ pv
    return out


def _in_band_numeric(pulse: Pulse, n_freq: int) -> float:
    f, wf = gl_panels(-pulse.w, pulse.w, max(8, n_freq // 256), 256)
    psd = np.abs(fourier_transform(pulse, f)) ** 2
    return float(np.sum(wf * psd))


def oobe(pulse: Pulse, samples_at=None) -> SpectrumReport:
    """Spectrum report: energy in [-W, W] and the out-of-band remainder.

    PSWF combinations use the exact identity in_band = sum alpha_i^2 lambda_i;
    other pulses integrate |P(f)|^2 numerically, with a node-doubling check
    requiring stability to 3 significant digits.
    """
    if pulse.kind == KIND_PSWF:
        lam = pulse.basis.eigenvalues[: pulse.alphas.size].astype(float)
        comp = pulse.basis.oobe_complements[: pulse.alphas.size]
        in_band = float(np.dot(pulse.alphas**2, lam))
        eps = float(np.dot(pulse.alphas**2, comp))
    else:
        in_band = _in_band_numeric(pulse, 2048)
        refined = _in_band_numeric(pulse, 4096)
        eps = 1.0 - refined
        if abs(refined - in_band) > 5e-4 * abs(1.0 - in_band):
            raise InvalidConfig(
                "in-band integral did not stabilize under node doubling; "
                f"got {in_band} and {refined}"
            )
        in_band = refined
    samples = None
    if samples_at is not None:
        psd = np.abs(fourier_transform(pulse, samples_at)) ** 2
        samples = list(zip(np.atleast_1d(samples_at).tolist(), psd.tolist()))
    return SpectrumReport(in_band_energy=in_band, oobe=eps, samples=samples)


def pulse_to_dict(pulse: Pulse, design_params: dict = None) -> dict:
    """JSON-ready pulse description (see the file format in the README)."""
    d = {
        "format_version": 1,
        "kind": pulse.kind,
        "ts": pulse.ts,
        "w": pulse.w,
        "metadata": {
            "created_by": "ftnpulse",
            "design_params": design_params or {},
        },
    }
    if pulse.kind == KIND_RRC:
        d["beta"] = pulse.beta
    else:
        d["c"] = pulse.c
        d["alphas"] = pulse.alphas.tolist()
        d["basis"] = {
            "n_funcs": pulse.basis.n_funcs,
            "legendre_order": pulse.basis.config.legendre_order,
            "quadrature_nodes": pulse.basis.config.quadrature_nodes,
        }
    return d


def pulse_from_dict(d: dict, basis: PswfBasis = None) -> Pulse:
    """Rebuild a pulse from its JSON description.

    For PSWF combinations the basis is regenerated deterministically from the
    stored configuration unless one is supplied.
    """
    if d.get("format_version") != 1:
        raise InvalidConfig(f"unsupported pulse format_version {d.get('format_version')}")
    kind = d.get("kind")
    if kind == KIND_RRC:
        return make_truncated_rrc(d["beta"], d["w"], d["ts"])
    if kind == KIND_PSWF:
        if basis is None:
            from .pswf import PswfConfig, build_basis

            b = d.get("basis", {})
            basis = build_basis(
                PswfConfig(
                    c=d["c"],
                    n_funcs=b.get("n_funcs", len(d["alphas"])),
                    legendre_order=b.get("legendre_order", 0),
                    quadrature_nodes=b.get("quadrature_nodes", 512),
                )
            )
        return make_pswf_pulse(basis, np.asarray(d["alphas"]), d["ts"], d["w"])
    raise InvalidConfig(f"unknown pulse kind {kind!r}")


# Coefficients of the reference optimal pulse for c=15, T=0.7/(2W), L=2,
# epsilon=4.4e-4 (even indices 0..20; odd coefficients are zero).  Magnitudes
# are the published 4-decimal values; signs are expressed in this package's
# basis sign convention (per-function signs are convention-relative, the
# physical pulse is not).
REFERENCE_EVEN_ALPHAS = (
    0.8053, -0.442, -0.2923, 0.1996, 0.136, -0.0905,
    -0.0562, -0.03, 0.0107, -0.00014, 0.0011,
)


def reference_alphas(n: int = 22) -> np.ndarray:
    """Reference coefficient vector padded with zeros at odd indices."""
    a = np.zeros(n)
    for j, v in enumerate(REFERENCE_EVEN_ALPHAS):
        if 2 * j < n:
            a[2 * j] = v
    return a
