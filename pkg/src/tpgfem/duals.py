"""Local solutions of the adjoint equation on each element.

On an element ``[X1, X2]`` the test function halves solve

    -eps psi'' - p_bar psi' + b_hat psi = 0,   b_hat = b_bar - p_bar',

with ``psi(X1), psi(X2)`` equal to ``(0, 1)`` (rising half) or ``(1, 0)``
(falling half).  Three solvers are provided:

* closed-form exponentials for constant ``p_bar``;
* parabolic cylinder functions for linear ``p_bar``;
* a tailored finite point method (TFPM) on a uniform submesh, exact for
  frozen coefficients, used as the robust alternative for linear ``p_bar``.

Only the endpoint derivatives and the integral of each half enter the
Petrov-Galerkin matrix, so those are what the batched kernels return.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import pcf as _pcf
from .coefficients import LINEAR, PiecewiseCoefficients
from .mesh import Partition

__all__ = [
    "DualConditioningError",
    "DualDomainError",
    "DualHalf",
    "DualStabilityWarning",
    "ElementDuals",
    "TestFunction",
    "build_element_duals",
    "build_test_functions",
    "solve_dual_exact_constant",
    "solve_dual_exact_linear",
    "solve_dual_tfpm",
]

RISING = (0, 1)
FALLING = (1, 0)
ZERO = (0, 0)

# 8-point Gauss-Legendre rule on [0, 1]
_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)
_GL_X = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W

# switch from quadrature to closed-form integrals above this |mu| L
_SMALL_EXPONENT = 0.5


class DualDomainError(ValueError):
    """The local problem is outside the supported parameter range."""


class DualConditioningError(ArithmeticError):
    """The exact-linear construction is too ill-conditioned to trust."""


class DualStabilityWarning(RuntimeWarning):
    """A TFPM solution went negative beyond round-off."""


def _check_bc(bc, allow_zero=False):
    bc = tuple(int(v) for v in bc)
    if bc not in (RISING, FALLING) and not (allow_zero and bc == ZERO):
        raise ValueError(f"boundary data must be (0, 1) or (1, 0), got {bc}")
    return bc


def _zero_half(interval, method):
    x1, x2 = (float(v) for v in interval)
    if not x1 < x2:
        raise ValueError("degenerate element")
    return DualHalf((x1, x2), ZERO, 0.0, 0.0, 0.0, method, _ZeroRep())


# ---------------------------------------------------------------------------
# exponential kernels (vectorised)


def _roots(eps, c_hat, b_hat):
    """Roots mu1 >= 0 >= mu2 of eps mu^2 - c_hat mu - b_hat, and mu1 - mu2."""
    c_hat = np.asarray(c_hat, dtype=float)
    b_hat = np.broadcast_to(np.asarray(b_hat, dtype=float), c_hat.shape)
    sq = np.sqrt(c_hat * c_hat + 4.0 * eps * b_hat)
    pos = c_hat >= 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        big = np.where(pos, c_hat + sq, c_hat - sq) / (2.0 * eps)
        small = np.where(pos, -2.0 * b_hat / (c_hat + sq), 2.0 * b_hat / (sq - c_hat))
    mu1 = np.where(pos, big, small)
    mu2 = np.where(pos, small, big)
    zero = sq == 0.0
    mu1 = np.where(zero, 0.0, mu1)
    mu2 = np.where(zero, 0.0, mu2)
    return mu1, mu2, sq / eps


def _q_plus(twok, L):
    """2k / expm1(2kL), equal to 1/L at k = 0."""
    y = twok * L
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        out = np.where(y > 0.0, twok / np.expm1(y), 1.0 / L)
    return np.where(y > 700.0, 0.0, out)


def _q_minus(twok, L):
    """2k / (1 - exp(-2kL)), equal to 1/L at k = 0."""
    y = twok * L
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(y > 0.0, twok / -np.expm1(-y), 1.0 / L)


def _exprel(y):
    """expm1(y) / y with the removable singularity filled in."""
    y = np.asarray(y, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        out = np.where(y != 0.0, np.expm1(y) / y, 1.0)
    return out


def _shape_right(t, L, mu1, twok):
    """S_R on [0, L]: S_R(0) = 0, S_R(L) = 1."""
    y = twok * L
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        ratio = np.where(y > 0.0, np.expm1(-twok * t) / np.expm1(-y), t / L)
    return np.exp(mu1 * (t - L)) * ratio


def _shape_left(t, L, mu2, twok):
    """S_L on [0, L]: S_L(0) = 1, S_L(L) = 0."""
    y = twok * L
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        ratio = np.where(y > 0.0, np.expm1(-twok * (L - t)) / np.expm1(-y), (L - t) / L)
    return np.exp(mu2 * t) * ratio


def _shape_data(L, mu1, mu2, twok):
    """Endpoint derivatives and integrals of S_L and S_R on [0, L].

    Returns ``(sl0, slL, sr0, srL, int_l, int_r)``.
    """
    L = np.asarray(L, dtype=float)
    qp = _q_plus(twok, L)
    qm = _q_minus(twok, L)
    sr0 = np.exp(-mu1 * L) * qm
    srL = mu1 + qp
    sl0 = mu2 - qp
    slL = -np.exp(mu2 * L) * qm
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        denom = -np.expm1(-twok * L)
        int_r = L * (_exprel(-mu1 * L) - np.exp(-mu1 * L) * _exprel(mu2 * L)) / denom
        int_l = L * (_exprel(mu2 * L) - np.exp(mu2 * L) * _exprel(-mu1 * L)) / denom
    small = np.maximum(np.abs(mu1), np.abs(mu2)) * L <= _SMALL_EXPONENT
    if np.any(small):
        ls = np.broadcast_to(L, small.shape)[small]
        t = ls[..., None] * _GL_X
        args = [np.broadcast_to(v, small.shape)[small][..., None] for v in (mu1, mu2, twok)]
        m1, m2, tk = args
        gr = (_shape_right(t, ls[..., None], m1, tk) * _GL_W).sum(-1) * ls
        gl = (_shape_left(t, ls[..., None], m2, tk) * _GL_W).sum(-1) * ls
        int_r = np.array(int_r, dtype=float)
        int_l = np.array(int_l, dtype=float)
        int_r[small] = gr
        int_l[small] = gl
    return sl0, slL, sr0, srL, int_l, int_r


def _check_bhat(b_hat):
    b_hat = np.asarray(b_hat, dtype=float)
    if np.any(b_hat < 0.0):
        raise DualDomainError(
            f"b_hat = {float(b_hat.min()):.6g} < 0: the exponential local solution "
            "is oscillatory or not monotone"
        )


# ---------------------------------------------------------------------------
# representations


class _ZeroRep:
    def evaluate(self, x, bc):
        return np.zeros_like(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class _ConstantRep:
    x1: float
    x2: float
    mu1: float
    mu2: float
    twok: float

    def evaluate(self, x, bc):
        x = np.asarray(x, dtype=float)
        L = self.x2 - self.x1
        t = np.clip(x - self.x1, 0.0, L)
        if bc == RISING:
            return _shape_right(t, L, self.mu1, self.twok)
        return _shape_left(t, L, self.mu2, self.twok)


@dataclass(frozen=True)
class _TfpmRep:
    x1: float
    h: float
    psi: np.ndarray
    mu1: np.ndarray
    mu2: np.ndarray
    twok: np.ndarray

    def evaluate(self, x, bc):
        x = np.asarray(x, dtype=float)
        n1 = self.psi.size - 1
        s = (x - self.x1) / self.h
        j = np.clip(np.floor(s).astype(int), 0, n1 - 1)
        t = np.clip(x - (self.x1 + j * self.h), 0.0, self.h)
        left = _shape_left(t, self.h, self.mu2[j], self.twok[j])
        right = _shape_right(t, self.h, self.mu1[j], self.twok[j])
        return self.psi[j] * left + self.psi[j + 1] * right


@dataclass(frozen=True)
class _PcfRep:
    """psi in terms of phi_1, phi_2 with log-scaled coefficients."""

    x1: float
    x2: float
    x0: float
    sigma: float
    a: float
    sg: float
    coef: tuple  # ((m, e) for phi_1, (m, e) for phi_2) per bc, already / D

    def evaluate(self, x, bc):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        (c1m, c1e), (c2m, c2e) = self.coef[0 if bc == RISING else 1]
        out = np.empty_like(x)
        for i, xi in enumerate(x):
            z = (min(max(xi, self.x1), self.x2) - self.x0) / self.sigma
            (p1m, p1e), (p2m, p2e) = _phi(self.a, self.sg, z)
            terms = [(c1m * p1m, c1e + p1e), (c2m * p2m, c2e + p2e)]
            out[i] = _sum_to_float(terms)
        return out


def _sum_to_float(terms):
    top = max((e for m, e in terms if m != 0.0), default=0.0)
    return float(sum(m * math.exp(e - top) for m, e in terms) * math.exp(top))


# ---------------------------------------------------------------------------
# public element objects


@dataclass
class DualHalf:
    """One half of a test function on a single element."""

    interval: tuple
    bc: tuple
    d_left: float
    d_right: float
    mass: float
    method: str
    rep: object = field(repr=False, default=None)
    stable: bool = True
    load: Optional[float] = None

    def evaluate(self, x):
        """psi at ``x`` (clipped to the element)."""
        return self.rep.evaluate(x, self.bc)


@dataclass
class TestFunction:
    """Test function for interior node ``i``: rising half on ``I_i``,
    falling half on ``I_{i+1}``, zero elsewhere."""

    __test__ = False  # not a pytest class

    node: int
    left: DualHalf
    right: DualHalf

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        a, m = self.left.interval
        _, b = self.right.interval
        lm = (x >= a) & (x <= m)
        rm = (x > m) & (x <= b)
        if lm.any():
            out[lm] = self.left.evaluate(x[lm])
        if rm.any():
            out[rm] = self.right.evaluate(x[rm])
        return out


# ---------------------------------------------------------------------------
# exact constant


def _constant_batch(eps, c, b_hat, x1, x2):
    """Endpoint data for constant p_bar = c on many elements at once."""
    _check_bhat(b_hat)
    L = np.asarray(x2, dtype=float) - np.asarray(x1, dtype=float)
    mu1, mu2, twok = _roots(eps, -np.asarray(c, dtype=float), b_hat)
    sl0, slL, sr0, srL, int_l, int_r = _shape_data(L, mu1, mu2, twok)
    return dict(rise=(sr0, srL, int_r), fall=(sl0, slL, int_l), roots=(mu1, mu2, twok))


def solve_dual_exact_constant(eps, c, b_hat, interval, bc) -> DualHalf:
    """Exact local solution for constant convection ``p_bar = c``.

    ``bc`` is ``(0, 1)``, ``(1, 0)`` or the trivial ``(0, 0)``.  Raises
    :class:`DualDomainError` for ``b_hat < 0``.
    """
    bc = _check_bc(bc, allow_zero=True)
    if bc == ZERO:
        return _zero_half(interval, "exact-constant")
    x1, x2 = (float(v) for v in interval)
    if not x1 < x2:
        raise ValueError("degenerate element")
    data = _constant_batch(eps, np.array([c]), np.array([b_hat]), np.array([x1]), np.array([x2]))
    dl, dr, mass = (float(v[0]) for v in data["rise" if bc == RISING else "fall"])
    mu1, mu2, twok = (float(v[0]) for v in data["roots"])
    return DualHalf((x1, x2), bc, dl, dr, mass, "exact-constant", _ConstantRep(x1, x2, mu1, mu2, twok))


# ---------------------------------------------------------------------------
# TFPM


def _thomas_batch(lower, upper, rhs):
    """Solve rows ``lower_j y_{j-1} + y_j + upper_j y_{j+1} = rhs_j``.

    Arrays have shape (M, n); ``rhs`` has shape (M, n, r).
    """
    m, n = lower.shape
    cp = np.empty((m, n))
    dp = np.empty(rhs.shape)
    cp[:, 0] = upper[:, 0]
    dp[:, 0] = rhs[:, 0]
    for j in range(1, n):
        denom = 1.0 - lower[:, j] * cp[:, j - 1]
        cp[:, j] = upper[:, j] / denom
        dp[:, j] = (rhs[:, j] - lower[:, j, None] * dp[:, j - 1]) / denom[:, None]
    y = np.empty(rhs.shape)
    y[:, -1] = dp[:, -1]
    for j in range(n - 2, -1, -1):
        y[:, j] = dp[:, j] - cp[:, j, None] * y[:, j + 1]
    return y


def _tfpm_batch(eps, value, slope, anchor, b_hat, x1, x2, n1, freeze="endpoint", f=None):
    """TFPM local solutions for linear p_bar on M elements.

    ``freeze`` chooses where the coefficient is frozen for the endpoint
    derivatives: at the element endpoint itself or at the midpoint of the
    adjacent subinterval.  When ``f`` is given the loads ``int f psi`` are
    also returned, with ``f`` frozen at subinterval midpoints.
    """
    if n1 < 2:
        raise ValueError("TFPM needs at least 2 subintervals")
    if freeze not in ("endpoint", "midpoint"):
        raise ValueError("freeze must be 'endpoint' or 'midpoint'")
    value, slope, anchor, b_hat, x1, x2 = (
        np.atleast_1d(np.asarray(v, dtype=float)) for v in (value, slope, anchor, b_hat, x1, x2)
    )
    h = (x2 - x1) / n1
    j = np.arange(n1 + 1)
    y = x1[:, None] + h[:, None] * j
    y[:, -1] = x2

    def c_hat(pts):
        return -(value[:, None] + slope[:, None] * (pts - anchor[:, None]))

    bh = b_hat[:, None]
    # b_hat < 0 is admitted while the local exponentials stay real
    ends = c_hat(np.stack([x1, x2], axis=1))
    c_min = np.where(ends[:, 0] * ends[:, 1] <= 0.0, 0.0, np.min(np.abs(ends), axis=1))
    disc = c_min * c_min + 4.0 * eps * b_hat
    if np.any(disc < 0.0):
        k = int(np.argmin(disc))
        raise DualDomainError(
            f"complex local exponentials on [{x1[k]}, {x2[k]}]: "
            f"c_hat^2 + 4 eps b_hat < 0 with b_hat = {b_hat[k]:.6g}"
        )
    mu1, mu2, twok = _roots(eps, c_hat(y[:, 1:-1]), bh)
    hh = h[:, None]
    with np.errstate(over="ignore", under="ignore"):
        denom = 1.0 + np.exp(-twok * hh)
        lower = -np.exp(mu2 * hh) / denom
        upper = -np.exp(-mu1 * hh) / denom
    # third column: zero boundary data, row sums 1 + lower + upper on the
    # right; it gives 1 - psi without cancellation
    with np.errstate(over="ignore", under="ignore"):
        row_sum = np.expm1(-mu1 * hh) * np.expm1(mu2 * hh) / denom
    rhs = np.zeros(lower.shape + (3,))
    rhs[:, -1, 0] = -upper[:, -1]  # rising: psi_N1 = 1
    rhs[:, 0, 1] = -lower[:, 0]  # falling: psi_0 = 1
    rhs[:, :, 2] = row_sum
    lower_in = lower.copy()
    upper_in = upper.copy()
    lower_in[:, 0] = 0.0
    upper_in[:, -1] = 0.0
    inner = _thomas_batch(lower_in, upper_in, rhs)
    m = value.size
    psi = np.empty((m, n1 + 1, 2))
    psi[:, 1:-1] = inner[..., :2]
    # 1 - psi_rise = psi_fall + w and 1 - psi_fall = psi_rise + w
    w = inner[..., 2]
    chi_rise_last = inner[:, -1, 1] + w[:, -1]
    chi_fall_first = inner[:, 0, 0] + w[:, 0]
    psi[:, 0] = (0.0, 1.0)
    psi[:, -1] = (1.0, 0.0)

    # subinterval-midpoint frozen shapes, used for integrals and evaluation
    mids = 0.5 * (y[:, :-1] + y[:, 1:])
    s_mu1, s_mu2, s_twok = _roots(eps, c_hat(mids), bh)
    _, _, _, _, int_l, int_r = _shape_data(hh, s_mu1, s_mu2, s_twok)
    pieces = psi[:, :-1] * int_l[..., None] + psi[:, 1:] * int_r[..., None]
    mass = pieces.sum(axis=1)
    load = None
    if f is not None:
        load = (pieces * f(mids)[..., None]).sum(axis=1)

    if freeze == "endpoint":
        f_left = c_hat(x1[:, None])[:, 0]
        f_right = c_hat(x2[:, None])[:, 0]
    else:
        f_left = c_hat(mids[:, :1])[:, 0]
        f_right = c_hat(mids[:, -1:])[:, 0]
    l_mu1, l_mu2, l_twok = _roots(eps, f_left, b_hat)
    sl0, _, sr0, _, _, _ = _shape_data(h, l_mu1, l_mu2, l_twok)
    r_mu1, r_mu2, r_twok = _roots(eps, f_right, b_hat)
    _, slL, _, srL, _, _ = _shape_data(h, r_mu1, r_mu2, r_twok)
    # derivatives of S_L + S_R at the ends, free of the 1/H cancellation
    with np.errstate(over="ignore", under="ignore", invalid="ignore"):
        sum0 = l_mu2 - np.exp(-l_mu1 * h) * np.expm1(l_mu2 * h) * _q_minus(l_twok, h)
        sumL = r_mu1 + np.exp(r_mu2 * h) * np.expm1(-r_mu1 * h) * _q_minus(r_twok, h)
    d_left = np.stack([psi[:, 1, 0] * sr0, sum0 - chi_fall_first * sr0], axis=1)
    d_right = np.stack([sumL - chi_rise_last * slL, psi[:, -2, 1] * slL], axis=1)
    worst = psi.min(axis=(1, 2))
    return dict(
        rise=(d_left[:, 0], d_right[:, 0], mass[:, 0]),
        fall=(d_left[:, 1], d_right[:, 1], mass[:, 1]),
        psi=psi,
        shapes=(s_mu1, s_mu2, s_twok),
        h=h,
        stable=worst >= -1e-10,
        load=None if load is None else (load[:, 0], load[:, 1]),
    )


def solve_dual_tfpm(
    eps, value, slope, anchor, b_hat, interval, bc, n1=256, freeze="endpoint"
) -> DualHalf:
    """TFPM local solution for ``p_bar(x) = value + slope (x - anchor)``.

    Exact (to round-off) when ``slope == 0``.  ``b_hat < 0`` is accepted as
    long as the local exponentials are real on the whole element, otherwise
    :class:`DualDomainError` is raised.  A negative computed value
    beyond round-off is flagged with :class:`DualStabilityWarning`.
    """
    bc = _check_bc(bc, allow_zero=True)
    if bc == ZERO:
        return _zero_half(interval, "tfpm")
    x1, x2 = (float(v) for v in interval)
    if not x1 < x2:
        raise ValueError("degenerate element")
    data = _tfpm_batch(eps, value, slope, anchor, b_hat, x1, x2, int(n1), freeze)
    col = 0 if bc == RISING else 1
    dl, dr, mass = (float(v[0]) for v in data["rise" if bc == RISING else "fall"])
    stable = bool(data["stable"][0])
    if not stable:
        warnings.warn(f"TFPM dual on [{x1}, {x2}] is negative beyond round-off",
                      DualStabilityWarning, stacklevel=2)
    s_mu1, s_mu2, s_twok = (v[0] for v in data["shapes"])
    rep = _TfpmRep(x1, float(data["h"][0]), data["psi"][0, :, col].copy(), s_mu1, s_mu2, s_twok)
    return DualHalf((x1, x2), bc, dl, dr, mass, "tfpm", rep, stable)


# ---------------------------------------------------------------------------
# exact linear (parabolic cylinder functions)


def _phi(a, sg, z):
    """Log-scaled phi_1(z), phi_2(z) as ((m1, e1), (m2, e2))."""
    base = -sg * 0.25 * z * z
    q = 0.25 * z * abs(z)
    return (_pcf.u_tilde(a, z), base - q), (_pcf.u_tilde(a, -z), base + q)


def _dphi(a, sg, z):
    """Log-scaled d/dz of phi_1, phi_2."""
    base = -sg * 0.25 * z * z
    q = 0.25 * z * abs(z)
    if sg > 0:
        m1 = -_pcf.u_tilde(a - 1.0, z)
        m2 = _pcf.u_tilde(a - 1.0, -z)
    else:
        m1 = -(a + 0.5) * _pcf.u_tilde(a + 1.0, z)
        m2 = (a + 0.5) * _pcf.u_tilde(a + 1.0, -z)
    return (m1, base - q), (m2, base + q)


def _mul(x, y):
    return (x[0] * y[0], x[1] + y[1])


def _diff(x, y):
    """x - y for log-scaled numbers; also returns |x| + |y| (same scale)."""
    top = max(x[1], y[1])
    xm = x[0] * math.exp(x[1] - top)
    ym = y[0] * math.exp(y[1] - top)
    return (xm - ym, top), (abs(xm) + abs(ym), top)


def _div_float(x, y):
    return float(x[0] / y[0] * math.exp(x[1] - y[1]))


@dataclass(frozen=True)
class _LinearSolution:
    rise: tuple
    fall: tuple
    rep: _PcfRep
    condition: float


def _linear_element(eps, slope, x0, b_hat, x1, x2, cond_limit):
    if slope == 0.0:
        raise DualDomainError("zero slope: use the constant solver")
    sg = 1.0 if slope > 0.0 else -1.0
    sigma = math.sqrt(eps / abs(slope))
    beta = b_hat / abs(slope)
    a = beta + 0.5 if sg > 0 else beta - 0.5
    if abs(a) + 1.0 > _pcf.A_MAX:
        raise DualDomainError(f"PCF order {a:.4g} outside |a| <= {_pcf.A_MAX - 1}")
    rg = _pcf.rgamma(0.5 + a)
    if abs(rg) < 1e-12:
        raise DualConditioningError("Wronskian vanishes: 1/Gamma(1/2 + a) ~ 0")
    z1 = (x1 - x0) / sigma
    z2 = (x2 - x0) / sigma
    (f11, f21) = _phi(a, sg, z1)
    (f12, f22) = _phi(a, sg, z2)
    (g11, g21) = _dphi(a, sg, z1)
    (g12, g22) = _dphi(a, sg, z2)
    det, size = _diff(_mul(f11, f22), _mul(f21, f12))
    if det[0] == 0.0 or size[0] / abs(det[0]) > cond_limit:
        raise DualConditioningError(
            f"boundary system condition {size[0] / max(abs(det[0]), 1e-300):.3g} "
            f"exceeds {cond_limit:.3g}"
        )
    cond = size[0] / abs(det[0])
    wconst = math.sqrt(2.0 * math.pi) * rg
    w1 = (wconst, -sg * 0.5 * z1 * z1)
    w2 = (wconst, -sg * 0.5 * z2 * z2)
    rise_dl = _div_float(w1, det) / sigma
    rise_dr = _div_float(_diff(_mul(f11, g22), _mul(f21, g12))[0], det) / sigma
    fall_dl = _div_float(_diff(_mul(f22, g11), _mul(f12, g21))[0], det) / sigma
    fall_dr = -_div_float(w2, det) / sigma
    inv = (1.0 / det[0], -det[1])
    # rising: (phi1(z1) phi2 - phi2(z1) phi1) / D; falling: (phi2(z2) phi1 - phi1(z2) phi2) / D
    rise_coef = (_mul((-f21[0], f21[1]), inv), _mul(f11, inv))
    fall_coef = (_mul(f22, inv), _mul((-f12[0], f12[1]), inv))
    rep = _PcfRep(x1, x2, x0, sigma, a, sg, (rise_coef, fall_coef))
    return _LinearSolution((rise_dl, rise_dr), (fall_dl, fall_dr), rep, cond)


def _linear_masses(eps, value, slope, anchor, b_bar, x1, x2, sol):
    """Integrals from b_bar int psi = [eps psi' + p_bar psi]."""
    p1 = value + slope * (x1 - anchor)
    p2 = value + slope * (x2 - anchor)
    (rdl, rdr), (fdl, fdr) = sol.rise, sol.fall
    scale = abs(p1) + abs(p2) + eps * (abs(rdl) + abs(rdr) + abs(fdl) + abs(fdr))
    if abs(b_bar) > 1e-10 * max(scale, 1e-300) / max(x2 - x1, 1e-300):
        rise = (eps * rdr + p2 - eps * rdl) / b_bar
        fall = (eps * fdr - eps * fdl - p1) / b_bar
        return rise, fall
    # b_bar ~ 0: integrate the representation
    nodes = x1 + (x2 - x1) * (np.arange(64)[:, None] + _GL_X) / 64.0
    w = np.tile(_GL_W, (64, 1)) * (x2 - x1) / 64.0
    rise = float((sol.rep.evaluate(nodes.ravel(), RISING) * w.ravel()).sum())
    fall = float((sol.rep.evaluate(nodes.ravel(), FALLING) * w.ravel()).sum())
    return rise, fall


def solve_dual_exact_linear(
    eps, value, slope, anchor, b_hat, interval, bc, cond_limit=1e12
) -> DualHalf:
    """Exact local solution for ``p_bar(x) = value + slope (x - anchor)``.

    Built from ``exp(-sg z^2/4) U(a, +-z)`` in the scaled variable
    ``z = (x - x0)/sqrt(eps/|slope|)``.  ``b_hat`` may be negative here.
    Raises :class:`DualConditioningError` when the 2x2 boundary system is
    ill-conditioned, or :class:`DualDomainError` when the order leaves the
    supported range; callers fall back to :func:`solve_dual_tfpm`.
    """
    bc = _check_bc(bc, allow_zero=True)
    if bc == ZERO:
        return _zero_half(interval, "exact-linear")
    x1, x2 = (float(v) for v in interval)
    if not x1 < x2:
        raise ValueError("degenerate element")
    x0 = anchor - value / slope if slope != 0.0 else math.nan
    sol = _linear_element(eps, slope, x0, b_hat, x1, x2, cond_limit)
    mr, mf = _linear_masses(eps, value, slope, anchor, b_hat + slope, x1, x2, sol)
    dl, dr = sol.rise if bc == RISING else sol.fall
    mass = mr if bc == RISING else mf
    return DualHalf((x1, x2), bc, dl, dr, mass, "exact-linear", sol.rep)


# ---------------------------------------------------------------------------
# loads int f psi


def _graded_rule(levels: int):
    """Composite 8-point Gauss rule on [0, 1], graded geometrically towards
    both ends so that layers of width down to ``2^-levels`` are resolved."""
    inner = 0.5 * 0.5 ** np.arange(levels + 1)[::-1]
    breaks = np.concatenate(([0.0], inner, 1.0 - inner[::-1][1:], [1.0]))
    a, b = breaks[:-1], breaks[1:]
    nodes = (a[:, None] + (b - a)[:, None] * _GL_X).ravel()
    weights = ((b - a)[:, None] * _GL_W).ravel()
    return nodes, weights


def _constant_loads(x1, x2, mu1, mu2, twok, f):
    """int f psi for closed-form halves, by graded quadrature."""
    L = x2 - x1
    thinnest = np.max(np.maximum(np.abs(mu1), np.abs(mu2)) * L, initial=1.0)
    levels = int(np.clip(np.ceil(np.log2(max(thinnest, 1.0))) + 6, 2, 52))
    r, w = _graded_rule(levels)
    t = L[:, None] * r
    fx = f(x1[:, None] + t)
    Lc = L[:, None]
    rise = (fx * _shape_right(t, Lc, mu1[:, None], twok[:, None]) * w).sum(axis=1) * L
    fall = (fx * _shape_left(t, Lc, mu2[:, None], twok[:, None]) * w).sum(axis=1) * L
    return rise, fall


# Chebyshev points on [-1, 1] and the inverse Vandermonde for degree 4
_CHEB = np.cos(np.pi * (np.arange(5) + 0.5) / 5)
_CHEB_INV = np.linalg.inv(np.vander(_CHEB, 5, increasing=True))


def _linear_loads(eps, value, slope, anchor, b_bar, x1, x2, sol, masses, f):
    """int f psi for a parabolic cylinder half.

    ``f`` is replaced by its degree-4 interpolant at Chebyshev points and
    the moments ``int y^n psi`` (``y = x - midpoint``) follow exactly from
    ``(eps psi' + p_bar psi)' = b_bar psi``:

        (b_bar + n s) M_n = [y^n (eps psi' + p_bar psi)] - n eps [y^(n-1) psi]
                            + n (n-1) eps M_(n-2) - n q0 M_(n-1)
    """
    half = 0.5 * (x2 - x1)
    mid = x1 + half
    coef = _CHEB_INV @ f(mid + half * _CHEB)
    q0 = value + slope * (mid - anchor)
    ends = np.array([-half, half])
    p_ends = q0 + slope * ends
    out = []
    for (dl, dr), psi, m0 in zip((sol.rise, sol.fall), ((0.0, 1.0), (1.0, 0.0)), masses):
        psi = np.array(psi)
        g = eps * np.array([dl, dr]) + p_ends * psi
        moments = [m0]
        ok = True
        for n in range(1, 5):
            denom = b_bar + n * slope
            if abs(denom) < 1e-3 * (abs(b_bar) + abs(slope)):
                ok = False
                break
            rhs = (ends[1] ** n * g[1] - ends[0] ** n * g[0]
                   - n * eps * (ends[1] ** (n - 1) * psi[1] - ends[0] ** (n - 1) * psi[0])
                   - n * q0 * moments[n - 1])
            if n >= 2:
                rhs += n * (n - 1) * eps * moments[n - 2]
            moments.append(rhs / denom)
        if ok:
            out.append(float(sum(c * mom / half ** n for n, (c, mom) in enumerate(zip(coef, moments)))))
        else:
            out.append(_rep_load(sol.rep, RISING if psi[1] == 1.0 else FALLING, x1, x2, f))
    return tuple(out)


def _rep_load(rep, bc, x1, x2, f, levels=24):
    r, w = _graded_rule(levels)
    t = x1 + (x2 - x1) * r
    return float((f(t) * rep.evaluate(t, bc) * w).sum() * (x2 - x1))


# ---------------------------------------------------------------------------
# all elements


@dataclass
class ElementDuals:
    """Endpoint data of both halves on every element (index ``k - 1``)."""

    partition: Partition
    rise_dl: np.ndarray
    rise_dr: np.ndarray
    rise_mass: np.ndarray
    fall_dl: np.ndarray
    fall_dr: np.ndarray
    fall_mass: np.ndarray
    method: list
    stable: np.ndarray
    reps: list
    fallbacks: list
    rise_load: Optional[np.ndarray] = None
    fall_load: Optional[np.ndarray] = None

    def half(self, k: int, bc) -> DualHalf:
        bc = _check_bc(bc)
        i = k - 1
        rep = self.reps[i]
        if isinstance(rep, tuple):  # TFPM stores the two nodal vectors
            rep = rep[0] if bc == RISING else rep[1]
        loads = self.rise_load if bc == RISING else self.fall_load
        if bc == RISING:
            d = (self.rise_dl[i], self.rise_dr[i], self.rise_mass[i])
        else:
            d = (self.fall_dl[i], self.fall_dr[i], self.fall_mass[i])
        return DualHalf(self.partition.element(k), bc, float(d[0]), float(d[1]), float(d[2]),
                        self.method[i], rep, bool(self.stable[i]),
                        None if loads is None else float(loads[i]))


def build_element_duals(
    eps: float,
    coeffs: PiecewiseCoefficients,
    partition: Partition,
    mode: str = "exact",
    n1: int = 256,
    freeze: str = "endpoint",
    cond_limit: float = 1e12,
    f: Optional[Callable] = None,
) -> ElementDuals:
    """Local solutions on every element.

    Constant elements use the closed form.  Linear ones use parabolic
    cylinder functions in ``"exact"`` mode (falling back to TFPM when the
    construction is ill-conditioned or out of range) and TFPM in ``"tfpm"``
    mode.  If ``f`` is given, the loads ``int_{I_k} f psi`` of both halves
    are computed as well.
    """
    if mode not in ("exact", "tfpm"):
        raise ValueError(f"unknown dual mode {mode!r}")
    n = partition.n_elements
    if coeffs.n_elements != n:
        raise ValueError("coefficients do not match the partition")
    x = partition.nodes
    x1, x2 = x[:-1], x[1:]
    b_hat = coeffs.b - coeffs.slope
    out = {k: np.zeros(n) for k in ("rdl", "rdr", "rm", "fdl", "fdr", "fm")}
    method = ["exact-constant"] * n
    stable = np.ones(n, dtype=bool)
    reps: list = [None] * n
    fallbacks: list = []
    loads = (np.zeros(n), np.zeros(n)) if f is not None else None

    const = np.flatnonzero((coeffs.kind != LINEAR) | (coeffs.slope == 0.0))
    if const.size:
        data = _constant_batch(eps, coeffs.value[const],
                               b_hat[const], x1[const], x2[const])
        _store(out, const, data)
        mu1, mu2, twok = data["roots"]
        if loads is not None:
            lr, lf = _constant_loads(x1[const], x2[const], mu1, mu2, twok, f)
            loads[0][const], loads[1][const] = lr, lf
        for j, i in enumerate(const):
            reps[i] = _ConstantRep(float(x1[i]), float(x2[i]), float(mu1[j]), float(mu2[j]),
                                   float(twok[j]))

    linear = np.flatnonzero((coeffs.kind == LINEAR) & (coeffs.slope != 0.0))
    # constant-valued lines (slope 0) have been handled above with p_bar = value
    tfpm_idx: list[int] = []
    if mode == "exact":
        for i in linear:
            s = float(coeffs.slope[i])
            v = float(coeffs.value[i])
            c = float(coeffs.anchor[i])
            try:
                sol = _linear_element(eps, s, c - v / s, float(b_hat[i]), float(x1[i]),
                                      float(x2[i]), cond_limit)
            except (DualConditioningError, DualDomainError, _pcf.PcfDomainError) as exc:
                fallbacks.append((int(i) + 1, str(exc)))
                tfpm_idx.append(int(i))
                continue
            mr, mf = _linear_masses(eps, v, s, c, float(coeffs.b[i]), float(x1[i]),
                                    float(x2[i]), sol)
            out["rdl"][i], out["rdr"][i] = sol.rise
            out["fdl"][i], out["fdr"][i] = sol.fall
            out["rm"][i], out["fm"][i] = mr, mf
            method[i] = "exact-linear"
            reps[i] = sol.rep
            if loads is not None:
                loads[0][i], loads[1][i] = _linear_loads(
                    eps, v, s, c, float(coeffs.b[i]), float(x1[i]), float(x2[i]), sol, (mr, mf), f)
    else:
        tfpm_idx = [int(i) for i in linear]

    if tfpm_idx:
        idx = np.array(tfpm_idx)
        data = _tfpm_batch(eps, coeffs.value[idx], coeffs.slope[idx], coeffs.anchor[idx],
                           b_hat[idx], x1[idx], x2[idx], int(n1), freeze, f)
        _store(out, idx, data)
        if loads is not None:
            loads[0][idx], loads[1][idx] = data["load"]
        stable[idx] = data["stable"]
        s_mu1, s_mu2, s_twok = data["shapes"]
        for j, i in enumerate(idx):
            method[i] = "tfpm"
            reps[i] = tuple(
                _TfpmRep(float(x1[i]), float(data["h"][j]), data["psi"][j, :, col].copy(),
                         s_mu1[j], s_mu2[j], s_twok[j])
                for col in (0, 1)
            )
        if not stable.all():
            bad = np.flatnonzero(~stable) + 1
            warnings.warn(f"TFPM duals negative beyond round-off on elements {bad.tolist()}",
                          DualStabilityWarning, stacklevel=2)
    return ElementDuals(partition, out["rdl"], out["rdr"], out["rm"], out["fdl"], out["fdr"],
                        out["fm"], method, stable, reps, fallbacks,
                        None if loads is None else loads[0], None if loads is None else loads[1])


def _store(out, idx, data):
    out["rdl"][idx], out["rdr"][idx], out["rm"][idx] = data["rise"]
    out["fdl"][idx], out["fdr"][idx], out["fm"][idx] = data["fall"]


def build_test_functions(duals: ElementDuals) -> list[TestFunction]:
    """Test functions for interior nodes ``1..N-1``."""
    n = duals.partition.n_elements
    return [TestFunction(i, duals.half(i, RISING), duals.half(i + 1, FALLING))
            for i in range(1, n)]


def dual_summary(duals: ElementDuals) -> dict:
    """Counts of solver methods and fallbacks, for diagnostics."""
    counts: dict = {}
    for m in duals.method:
        counts[m] = counts.get(m, 0) + 1
    return {"methods": counts, "fallbacks": len(duals.fallbacks),
            "unstable": int((~duals.stable).sum())}
