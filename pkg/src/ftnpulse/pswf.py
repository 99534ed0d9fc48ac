"""Numerical generation of truncated prolate spheroidal wave functions.

The basis lives on the normalized interval [-1, 1]; a caller's physical
window T_s only enters through evaluation scaling.  For a time-bandwidth
product c = 2*T_s*W the band-limiting kernel on [-1, 1] is
sin(g*(x-y)) / (pi*(x-y)) with g = pi*c/2.

Generation method: the band-limiting integral operator commutes with the
singular Sturm-Liouville operator d/dx[(1-x^2) d/dx] - g^2 x^2, which is
tridiagonal (per parity) in the orthonormal Legendre basis.  Solving that
symmetric tridiagonal eigenproblem gives the Legendre expansions directly
and is stable for every index.  Raw double-precision eigenpairs are then
refined by inverse iteration in extended precision, and each in-band energy
fraction lambda_i is obtained from the eigenvalue of the finite Fourier
operator: F psi = mu psi evaluated at x=0 (even functions) or via d/dx at
x=0 (odd functions), with lambda = (g / 2 pi) * |mu|^2.  This keeps full
relative accuracy even where lambda is within 1e-19 of 1 or as small as
1e-30, which a double-precision Rayleigh quotient of the kernel cannot do
(its noise floor is ~1e-15).  The Rayleigh quotient is still computed and
used to cross-validate every eigenvalue above that floor.
"""

import math
from dataclasses import dataclass, field

import mpmath as mp
import numpy as np
from numpy.polynomial.legendre import legval
from scipy.linalg import eigh_tridiagonal

from ._quad import gl_nodes
from .errors import BasisTooSmall, ConvergenceFailure, InvalidConfig, OutOfInterval

# Relative slack on the tail-energy bound used by choose_basis_size.
BASIS_SIZE_SLACK = 1e-3

# Extra Legendre degrees used when assembling the tridiagonal matrices so the
# stored expansions are unaffected by matrix truncation.
_MATRIX_PAD = 48

_REFINE_DPS = 50
_REFINE_ITERS = 3


@dataclass(frozen=True)
class PswfConfig:
    """Parameters controlling basis generation.

    c: time-bandwidth product 2*T_s*W of the target family.
    n_funcs: number of functions (and eigenvalues) to generate.
    legendre_order: length of the Legendre expansion kept per function;
        defaults to n_funcs + ceil(c) + 40 (coefficients decay
        super-exponentially past degree ~c, so this is ample).
    quadrature_nodes: node count for inner-product quadrature checks.
    """

    c: float
    n_funcs: int
    legendre_order: int = 0
    quadrature_nodes: int = 512

    def __post_init__(self):
        if not (self.c > 0):
            raise InvalidConfig(f"time-bandwidth product must be positive, got c={self.c}")
        if self.n_funcs < 1:
            raise InvalidConfig(f"n_funcs must be >= 1, got {self.n_funcs}")
        if self.legendre_order == 0:
            object.__setattr__(
                self, "legendre_order", self.n_funcs + math.ceil(self.c) + 40
            )
        if self.legendre_order < self.n_funcs + math.ceil(self.c) + 8:
            raise InvalidConfig(
                "legendre_order too small: need at least n_funcs + ceil(c) + 8, "
                f"got {self.legendre_order}"
            )
        if self.quadrature_nodes < 32:
            raise InvalidConfig("quadrature_nodes must be >= 32")


@dataclass(frozen=True)
class PswfBasis:
    """Truncated PSWF family: eigenvalues and Legendre expansions.

    eigenvalues is stored in extended precision (np.longdouble) so that the
    strict ordering 1 > lambda_0 > lambda_1 > ... survives even where the
    gaps are below double-precision resolution near 1.
    oobe_complements holds 1 - lambda_i with full relative accuracy.
    legendre_coeffs[i] are coefficients over the orthonormal Legendre
    polynomials sqrt(k+1/2) P_k on [-1, 1]; row i has the parity of i.
    """

    config: PswfConfig
    eigenvalues: np.ndarray          # (n_funcs,) longdouble, strictly decreasing in (0,1)
    oobe_complements: np.ndarray     # (n_funcs,) float64, 1 - lambda with relative accuracy
    legendre_coeffs: np.ndarray      # (n_funcs, legendre_order) float64
    parity: np.ndarray               # (n_funcs,) int, i % 2
    sl_eigenvalues: np.ndarray       # (n_funcs,) float64 Sturm-Liouville eigenvalues
    _std_coeffs: np.ndarray = field(repr=False, default=None)

    @property
    def n_funcs(self) -> int:
        return self.config.n_funcs

    @property
    def c(self) -> float:
        return self.config.c

    def eval_normalized(self, x, indices=None) -> np.ndarray:
        """Values of the unit-norm functions on [-1, 1] at abscissae x.

        Returns shape (len(indices),) + x.shape.
        """
        coeffs = self._std_coeffs
        if indices is not None:
            coeffs = coeffs[np.asarray(indices)]
        return legval(np.asarray(x, dtype=float), coeffs.T, tensor=True)


def _sl_tridiagonal(gamma2: float, parity: int, n_rows: int):
    """Diagonal and off-diagonal of the prolate SL operator, one parity block.

    Row m corresponds to Legendre degree k = 2m + parity.  Entries follow
    from x^2 P_k = a_k P_{k+2} + b_k P_k + c_k P_{k-2} in the orthonormal
    Legendre basis.
    """
    m = np.arange(n_rows)
    k = 2 * m + parity
    b = (2.0 * k * (k + 1) - 1.0) / ((2.0 * k - 1) * (2.0 * k + 3))
    diag = k * (k + 1.0) + gamma2 * b
    kq = k[:-1]
    q = (kq + 1.0) * (kq + 2.0) / ((2.0 * kq + 3) * np.sqrt((2.0 * kq + 1) * (2.0 * kq + 5)))
    offdiag = gamma2 * q
    return diag, offdiag


def _legendre_p0_table(n: int):
    """P_k(0) for k = 0..n-1 (zero at odd k)."""
    vals = np.zeros(n)
    vals[0] = 1.0
    for k in range(2, n, 2):
        vals[k] = -vals[k - 2] * (k - 1.0) / k
    return vals


def _fix_sign(vec: np.ndarray, parity: int, fn_index: int, p0: np.ndarray) -> np.ndarray:
    """Match the sign convention of the Legendre polynomial of equal index.

    Even functions: sign(psi(0)) == sign(P_i(0)).  Odd: sign(psi'(0)) ==
    sign(P_i'(0)).  This is the convention under which psi_i deforms
    continuously from +P_i as c -> 0.
    """
    m = np.arange(len(vec))
    k = 2 * m + parity
    if parity == 0:
        val = np.sum(vec * np.sqrt(k + 0.5) * p0[k])
        target = 1.0 if (fn_index // 2) % 2 == 0 else -1.0
    else:
        # P'_k(0) = k * P_{k-1}(0) for odd k
        val = np.sum(vec * np.sqrt(k + 0.5) * k * p0[k - 1])
        target = 1.0 if ((fn_index - 1) // 2) % 2 == 0 else -1.0
    if val * target < 0:
        return -vec
    return vec


def _mp_tridiag_solve(diag, off, rhs):
    """Thomas algorithm for (tridiagonal) A x = rhs in mpmath arithmetic."""
    n = len(rhs)
    cp = [mp.mpf(0)] * n
    dp = [mp.mpf(0)] * n
    piv = diag[0]
    if piv == 0:
        piv = mp.mpf("1e-60")
    cp[0] = off[0] / piv if n > 1 else mp.mpf(0)
    dp[0] = rhs[0] / piv
    for i in range(1, n):
        piv = diag[i] - off[i - 1] * cp[i - 1]
        if piv == 0:
            piv = mp.mpf("1e-60")
        if i < n - 1:
            cp[i] = off[i] / piv
        dp[i] = (rhs[i] - off[i - 1] * dp[i - 1]) / piv
    x = [mp.mpf(0)] * n
    x[-1] = dp[-1]
    for i in range(n - 2, -1, -1):
        x[i] = dp[i] - cp[i] * x[i + 1]
    return x


def _refine_eigenpair(gamma_mp, parity: int, chi: float, vec: np.ndarray):
    """Inverse-iteration refinement of one SL eigenpair in extended precision.

    Returns (chi_mp, coeff list in mp, lambda_mp) where lambda is the in-band
    energy fraction obtained from the finite Fourier operator eigenvalue.
    """
    n = len(vec)
    g2 = gamma_mp * gamma_mp
    m_idx = list(range(n))
    k_idx = [2 * m + parity for m in m_idx]
    diag = [
        mp.mpf(k) * (k + 1)
        + g2 * (2 * mp.mpf(k) * (k + 1) - 1) / ((2 * k - 1) * (2 * k + 3))
        for k in k_idx
    ]
    off = [
        g2 * mp.mpf(k + 1) * (k + 2) / ((2 * k + 3) * mp.sqrt(mp.mpf(2 * k + 1) * (2 * k + 5)))
        for k in k_idx[:-1]
    ]

    v = [mp.mpf(float(x)) for x in vec]
    sigma = mp.mpf(float(chi))
    shifted = [d - sigma for d in diag]
    for _ in range(_REFINE_ITERS):
        v = _mp_tridiag_solve(shifted, off, v)
        nrm = mp.sqrt(mp.fsum([x * x for x in v]))
        v = [x / nrm for x in v]

    # Rayleigh quotient for the refined Sturm-Liouville eigenvalue.
    av = [mp.mpf(0)] * n
    for i in range(n):
        av[i] = diag[i] * v[i]
        if i > 0:
            av[i] += off[i - 1] * v[i - 1]
        if i < n - 1:
            av[i] += off[i] * v[i + 1]
    chi_ref = mp.fsum([v[i] * av[i] for i in range(n)])

    # Finite Fourier operator eigenvalue -> in-band energy fraction.
    if parity == 0:
        # psi(0) and integral of psi
        p0 = mp.mpf(1)
        psi0 = mp.mpf(0)
        for m, k in enumerate(k_idx):
            if m > 0:
                p0 *= -mp.mpf(k - 1) / k
            psi0 += v[m] * mp.sqrt(mp.mpf(k) + mp.mpf(1) / 2) * p0
        integral = mp.sqrt(mp.mpf(2)) * v[0]
        mu_sq = (integral / psi0) ** 2
    else:
        # psi'(0) via P'_k(0) = k P_{k-1}(0), and first moment of psi
        pkm1 = mp.mpf(1)  # P_{k-1}(0) for k = 1 -> P_0(0) = 1
        dpsi0 = mp.mpf(0)
        for m, k in enumerate(k_idx):
            if m > 0:
                pkm1 *= -mp.mpf(k - 2) / (k - 1)
            dpsi0 += v[m] * mp.sqrt(mp.mpf(k) + mp.mpf(1) / 2) * k * pkm1
        moment = mp.sqrt(mp.mpf(2) / 3) * v[0]
        mu_sq = (gamma_mp * moment / dpsi0) ** 2
    lam = gamma_mp / (2 * mp.pi) * mu_sq
    return chi_ref, v, lam


def build_basis(config: PswfConfig) -> PswfBasis:
    """Generate the truncated PSWF family for config.

    Raises ConvergenceFailure if the refined eigenvalues fail the strict
    ordering/positivity checks or disagree with the double-precision
    Rayleigh quotient of the band-limiting kernel where that is reliable.
    """
    gamma = math.pi * config.c / 2.0
    n_even = (config.n_funcs + 1) // 2
    n_odd = config.n_funcs // 2
    n_rows = (config.legendre_order + _MATRIX_PAD) // 2 + 1

    blocks = {}
    for parity, count in ((0, n_even), (1, n_odd)):
        if count == 0:
            blocks[parity] = (np.empty(0), np.empty((n_rows, 0)))
            continue
        diag, off = _sl_tridiagonal(gamma * gamma, parity, n_rows)
        chi, vecs = eigh_tridiagonal(diag, off, select="i", select_range=(0, count - 1))
        blocks[parity] = (chi, vecs)

    p0 = _legendre_p0_table(2 * n_rows + 2)

    chi_all = np.empty(config.n_funcs)
    lam_all = np.empty(config.n_funcs, dtype=np.longdouble)
    comp_all = np.empty(config.n_funcs)
    coeffs = np.zeros((config.n_funcs, config.legendre_order))

    with mp.workdps(_REFINE_DPS):
        gamma_mp = mp.pi * mp.mpf(config.c) / 2
        for i in range(config.n_funcs):
            parity = i % 2
            j = i // 2
            chi_raw, vecs = blocks[parity]
            vec = _fix_sign(vecs[:, j].copy(), parity, i, p0)
            chi_ref, v_mp, lam_mp = _refine_eigenpair(gamma_mp, parity, chi_raw[j], vec)
            if not (0 < lam_mp < 1):
                raise ConvergenceFailure(
                    f"refined eigenvalue out of (0,1) at index {i}: {mp.nstr(lam_mp, 10)}"
                )
            chi_all[i] = float(chi_ref)
            lam_all[i] = np.longdouble(mp.nstr(lam_mp, 30))
            comp_all[i] = float(1 - lam_mp)
            row = np.array([float(x) for x in v_mp])
            k = 2 * np.arange(len(row)) + parity
            keep = k < config.legendre_order
            coeffs[i, k[keep]] = row[keep]

    # Order by Sturm-Liouville eigenvalue (theory: already interleaved).
    order = np.argsort(chi_all, kind="stable")
    chi_all = chi_all[order]
    lam_all = lam_all[order]
    comp_all = comp_all[order]
    coeffs = coeffs[order]
    parity_arr = (order % 2).astype(int)

    if np.any(np.diff(lam_all) >= 0):
        raise ConvergenceFailure("eigenvalues are not strictly decreasing")

    std = coeffs * np.sqrt(np.arange(config.legendre_order) + 0.5)

    basis = PswfBasis(
        config=config,
        eigenvalues=lam_all,
        oobe_complements=comp_all,
        legendre_coeffs=coeffs,
        parity=parity_arr,
        sl_eigenvalues=chi_all,
        _std_coeffs=std,
    )
    for arr in (basis.eigenvalues, basis.oobe_complements, basis.legendre_coeffs,
                basis.parity, basis.sl_eigenvalues, basis._std_coeffs):
        arr.setflags(write=False)

    _validate_against_rayleigh(basis)
    return basis


def rayleigh_quotient_eigenvalue(basis: PswfBasis, i: int, n_nodes: int = 0):
    """In-band energy fraction of function i via quadrature of the kernel.

    Double-precision reference with an absolute noise floor near 1e-15;
    reliable whenever lambda_i is well above that.
    """
    if n_nodes == 0:
        n_nodes = max(2 * basis.config.legendre_order, 64)
    gamma = math.pi * basis.c / 2.0
    x, w = gl_nodes(-1.0, 1.0, n_nodes)
    dx = x[:, None] - x[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        kern = np.sin(gamma * dx) / (math.pi * dx)
    np.fill_diagonal(kern, gamma / math.pi)
    psi = basis.eval_normalized(x, indices=[i])[0]
    wpsi = w * psi
    return float(wpsi @ kern @ wpsi)


def _validate_against_rayleigh(basis: PswfBasis):
    gamma = math.pi * basis.c / 2.0
    n_nodes = max(2 * basis.config.legendre_order, 64)
    x, w = gl_nodes(-1.0, 1.0, n_nodes)
    dx = x[:, None] - x[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        kern = np.sin(gamma * dx) / (math.pi * dx)
    np.fill_diagonal(kern, gamma / math.pi)
    psi = basis.eval_normalized(x)              # (n_funcs, n_nodes)
    wpsi = psi * w
    lam_rq = np.einsum("ia,ab,ib->i", wpsi, kern, wpsi)
    lam = basis.eigenvalues.astype(float)
    mask = lam > 1e-8
    err = np.abs(lam_rq[mask] - lam[mask])
    tol = 1e-9 + 1e-6 * lam[mask]
    if np.any(err > tol):
        worst = int(np.argmax(err - tol))
        raise ConvergenceFailure(
            "refined eigenvalues disagree with kernel Rayleigh quotient "
            f"(worst index {np.where(mask)[0][worst]}: |diff|={err[worst]:.3e})"
        )


def eval_truncated(basis: PswfBasis, i: int, t, ts: float):
    """Unit-norm truncated function i at physical time t for window ts.

    The function has unit energy over [-ts/2, ts/2]; raises OutOfInterval
    for |t| > ts/2 (the caller decides how to extend beyond the window).
    """
    if not 0 <= i < basis.n_funcs:
        raise InvalidConfig(f"function index {i} outside 0..{basis.n_funcs - 1}")
    if ts <= 0:
        raise InvalidConfig(f"window duration must be positive, got {ts}")
    t_arr = np.asarray(t, dtype=float)
    if np.any(np.abs(t_arr) > ts / 2 * (1 + 1e-12)):
        raise OutOfInterval(f"evaluation point outside [-{ts / 2}, {ts / 2}]")
    x = np.clip(2.0 * t_arr / ts, -1.0, 1.0)
    val = math.sqrt(2.0 / ts) * legval(x, basis._std_coeffs[i])
    return float(val) if np.isscalar(t) or t_arr.ndim == 0 else val


def choose_basis_size(basis: PswfBasis, epsilon: float) -> int:
    """Smallest N > c whose tail-energy bound eps/(1-lambda_{N-1}) is ~eps.

    "~" means within relative slack BASIS_SIZE_SLACK.  For eps*(1+slack) >= 1
    the bound is immediately loose (tail energy <= total energy) and the
    first admissible N is returned.
    """
    if not (0 < epsilon < 1):
        raise InvalidConfig(f"epsilon must be in (0, 1), got {epsilon}")
    n_min = math.floor(basis.c) + 1
    if n_min > basis.n_funcs:
        raise BasisTooSmall(
            f"need at least {n_min} stored functions for c={basis.c}, have {basis.n_funcs}"
        )
    if epsilon * (1 + BASIS_SIZE_SLACK) >= 1.0:
        return n_min
    threshold = BASIS_SIZE_SLACK / (1 + BASIS_SIZE_SLACK)
    lam = basis.eigenvalues.astype(float)
    for n in range(n_min, basis.n_funcs + 1):
        if lam[n - 1] <= threshold:
            return n
    raise BasisTooSmall(
        f"no stored eigenvalue is <= {threshold:.3e}; increase n_funcs"
    )


def integral_equation_residual(basis: PswfBasis, ts: float, w: float, n_nodes: int = 0):
    """Max residual of lambda*phi = K phi over quadrature nodes, per function.

    Uses the physical kernel sin(2 pi W (t-s)) / (pi (t-s)) on
    [-ts/2, ts/2] (diagonal value 2W) and phi = sqrt(lambda) * u.
    """
    if abs(2.0 * ts * w - basis.c) > 1e-9 * max(1.0, basis.c):
        raise InvalidConfig(f"2*ts*w = {2 * ts * w} does not match basis c = {basis.c}")
    if n_nodes == 0:
        n_nodes = max(2 * basis.config.legendre_order, 64)
    t, wt = gl_nodes(-ts / 2.0, ts / 2.0, n_nodes)
    dt = t[:, None] - t[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        kern = np.sin(2 * math.pi * w * dt) / (math.pi * dt)
    np.fill_diagonal(kern, 2.0 * w)
    x = 2.0 * t / ts
    u = basis.eval_normalized(x) * math.sqrt(2.0 / ts)      # (n_funcs, n_nodes)
    lam = basis.eigenvalues.astype(float)
    phi = np.sqrt(lam)[:, None] * u
    resid = lam[:, None] * phi - phi @ (kern * wt[None, :]).T
    return np.max(np.abs(resid), axis=1)


def basis_to_dict(basis: PswfBasis) -> dict:
    """JSON-ready export: {c, n_funcs, eigenvalues[], legendre_coeffs[][]}."""
    return {
        "c": basis.c,
        "n_funcs": basis.n_funcs,
        "legendre_order": basis.config.legendre_order,
        "quadrature_nodes": basis.config.quadrature_nodes,
        "eigenvalues": [float(v) for v in basis.eigenvalues],
        "legendre_coeffs": basis.legendre_coeffs.tolist(),
    }
