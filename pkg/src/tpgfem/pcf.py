"""Weber parabolic cylinder functions U(a, x) and V(a, x).

Both solve ``-y'' + (a + x**2/4) y = 0``.  Three evaluation regimes are used:

* ``series``: Taylor expansion about the origin (closed-form initial values),
  continued by high-order Taylor stepping.  ``V`` is stepped forward from 0,
  ``U`` is stepped backward from the asymptotic crossover, i.e. always in the
  direction in which the computed solution is dominant.
* ``asymptotic``: the large-x expansions
  ``U ~ exp(-x^2/4) x^(-a-1/2) delta_1`` and
  ``V ~ sqrt(2/pi) exp(x^2/4) x^(a-1/2) delta_2`` for ``x >= C0(a)``.
* ``reflection``: negative arguments via the connection formulas

  ``U(a,-x) = -sin(pi a) U(a,x) + pi / Gamma(1/2+a) V(a,x)``
  ``V(a,-x) = cos(pi a) / Gamma(1/2-a) U(a,x) + sin(pi a) V(a,x)``.

Internally every value is carried as a mantissa times ``exp(E)`` with
``E = -x|x|/4`` for ``U`` and ``E = x**2/4`` for ``V``; the scaled accessors
(:func:`pcf_scaled`) stay finite far outside the range where the plain
values over- or underflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

__all__ = [
    "A_MAX",
    "X_MAX",
    "PcfDomainError",
    "PcfValue",
    "ScaledPcf",
    "gamma",
    "rgamma",
    "lgamma",
    "pcf_eval",
    "pcf_scaled",
    "pcf_shift",
    "asymptotic_switch",
    "asymptotic_factors",
    "u_tilde",
]

A_MAX = 30.0
X_MAX = 60.0
SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)
SQRT_PI = math.sqrt(math.pi)

_SERIES_TOL = 1e-17
_SERIES_WINDOW = 40
_SERIES_CAP = 500
_STEP_WINDOW = 4


class PcfDomainError(ValueError):
    """Raised for arguments outside the supported envelope."""


# ---------------------------------------------------------------------------
# Gamma function helpers


def _is_nonpositive_integer(x: float) -> bool:
    return x <= 0.0 and x == math.floor(x)


def _sin_pi(x: float) -> float:
    """sin(pi x) with exact zeros at the integers."""
    r = math.fmod(x, 2.0)
    if r == math.floor(r):
        return 0.0
    if r > 1.0:
        r -= 2.0
    elif r < -1.0:
        r += 2.0
    # fold into [-1/2, 1/2] for accuracy
    if r > 0.5:
        r = 1.0 - r
    elif r < -0.5:
        r = -1.0 - r
    return math.sin(math.pi * r)


def _cos_pi(x: float) -> float:
    return _sin_pi(x + 0.5)


def gamma(x: float) -> float:
    """Gamma function; raises ``ValueError`` at the poles."""
    if _is_nonpositive_integer(x):
        raise ValueError(f"gamma has a pole at {x}")
    return math.gamma(x)


def lgamma(x: float) -> float:
    """log|Gamma(x)|."""
    if _is_nonpositive_integer(x):
        raise ValueError(f"gamma has a pole at {x}")
    return math.lgamma(x)


def rgamma(x: float) -> float:
    """Reciprocal gamma function 1/Gamma(x), entire (zero at the poles)."""
    if _is_nonpositive_integer(x):
        return 0.0
    return 1.0 / math.gamma(x)


# ---------------------------------------------------------------------------
# Series kernels


def _origin_values(a: float) -> tuple[float, float, float, float]:
    """U(a,0), U'(a,0), V(a,0), V'(a,0)."""
    u0 = SQRT_PI * 2.0 ** (-0.5 * a - 0.25) * rgamma(0.75 + 0.5 * a)
    du0 = -SQRT_PI * 2.0 ** (-0.5 * a + 0.25) * rgamma(0.25 + 0.5 * a)
    v0 = 2.0 ** (0.5 * a + 0.25) * _sin_pi(0.75 - 0.5 * a) * rgamma(0.75 - 0.5 * a)
    dv0 = 2.0 ** (0.5 * a + 0.75) * _sin_pi(0.25 - 0.5 * a) * rgamma(0.25 - 0.5 * a)
    return u0, du0, v0, dv0


def _taylor_step(a, x0, y, dy, h, window=_STEP_WINDOW):
    """Advance (y, y') of y'' = (a + x^2/4) y from x0 to x0 + h.

    Uses Taylor coefficients about x0, carried as d_n = c_n h^n with
    (n+2)(n+1) d_{n+2} = h^2 [q d_n + (x0 h / 2) d_{n-1} + (h^2 / 4) d_{n-2}],
    q = a + x0^2/4.
    """
    q = a + 0.25 * x0 * x0
    h2 = h * h
    e1 = 0.5 * x0 * h
    e2 = 0.25 * h2
    d = [y, dy * h]
    val = d[0] + d[1]
    der = d[1]
    small = 0
    n = 0
    while n < _SERIES_CAP:
        acc = q * d[n]
        if n >= 1:
            acc += e1 * d[n - 1]
        if n >= 2:
            acc += e2 * d[n - 2]
        dn2 = h2 * acc / ((n + 2) * (n + 1))
        d.append(dn2)
        val += dn2
        der += (n + 2) * dn2
        if abs(dn2) * (n + 2) <= _SERIES_TOL * (abs(val) + abs(der)):
            small += 1
            if small >= window:
                break
        else:
            small = 0
        n += 1
    return val, der / h


def _step_length(a: float, x: float) -> float:
    return min(2.0, 2.5 / math.sqrt(abs(a) + 0.25 * x * x + 1.0))


def _integrate(a, x_from, y, dy, x_to):
    """Taylor-step (y, y') from x_from to x_to; returns (y, dy, log_scale).

    The pair is renormalised after each step and the log of the discarded
    magnitude is accumulated.
    """
    log_scale = 0.0
    x = x_from
    direction = 1.0 if x_to > x_from else -1.0
    while (x_to - x) * direction > 0.0:
        h = direction * min(_step_length(a, x), abs(x_to - x))
        y, dy = _taylor_step(a, x, y, dy, h)
        x = x_to if abs(x_to - (x + h)) < 1e-15 * max(1.0, abs(x_to)) else x + h
        nrm = max(abs(y), abs(dy))
        if nrm > 0.0:
            y /= nrm
            dy /= nrm
            log_scale += math.log(nrm)
    return y, dy, log_scale


# ---------------------------------------------------------------------------
# Asymptotic kernels


def _asymptotic_sum(alpha: float, x: float, sign: float):
    """sum_s sign^s (alpha)_{2s} / (s! (2 x^2)^s) with optimal truncation.

    Returns (S, T, err) with T = sum_s s * term_s and err the magnitude of the
    first omitted term.
    """
    inv = 1.0 / (2.0 * x * x)
    term = 1.0
    total = 1.0
    weighted = 0.0
    s = 0
    err = 0.0
    while True:
        nxt = sign * term * (alpha + 2 * s) * (alpha + 2 * s + 1) * inv / (s + 1)
        if abs(nxt) >= abs(term) and s > 0:
            err = abs(term)
            break
        s += 1
        term = nxt
        if abs(term) <= _SERIES_TOL * abs(total):
            err = abs(term)
            total += term
            weighted += s * term
            break
        total += term
        weighted += s * term
        if term == 0.0:
            break
        if s > _SERIES_CAP:
            err = abs(term)
            break
    return total, weighted, err


def _u_asymptotic(a: float, x: float):
    """(U e^{x^2/4}, U' e^{x^2/4}, delta_1) for large positive x."""
    s, t, _ = _asymptotic_sum(0.5 + a, x, -1.0)
    p = x ** (-a - 0.5)
    val = p * s
    der = p * (-(0.5 * x + (a + 0.5) / x) * s - 2.0 * t / x)
    return val, der, s


def _v_asymptotic(a: float, x: float):
    """(V e^{-x^2/4}, V' e^{-x^2/4}, delta_2) for large positive x."""
    s, t, _ = _asymptotic_sum(0.5 - a, x, 1.0)
    p = SQRT_2_OVER_PI * x ** (a - 0.5)
    val = p * s
    der = p * ((0.5 * x + (a - 0.5) / x) * s - 2.0 * t / x)
    return val, der, s


def _majorant_error(a: float, x: float) -> float:
    """Smallest term of the majorant series with alpha = 1/2 + |a|."""
    alpha = 0.5 + abs(a)
    inv = 1.0 / (2.0 * x * x)
    term = 1.0
    best = 1.0
    for s in range(_SERIES_CAP):
        term *= (alpha + 2 * s) * (alpha + 2 * s + 1) * inv / (s + 1)
        if term < best:
            best = term
        elif s > 0:
            break
    return best


@lru_cache(maxsize=4096)
def asymptotic_switch(a: float) -> float:
    """Crossover abscissa C0(a) beyond which the asymptotic forms are used.

    Smallest point of a 0.25-spaced grid (starting at 6) at which the
    optimally truncated majorant expansion is below 1e-16.  The majorant
    depends on |a| only, so C0 is even in ``a`` and nondecreasing in ``|a|``.
    """
    x = 6.0
    while _majorant_error(a, x) > 1e-16:
        x += 0.25
    return x


# ---------------------------------------------------------------------------
# Scaled evaluation on x >= 0


@lru_cache(maxsize=65536)
def _u_pos(a: float, x: float):
    """(U e^{x^2/4}, U' e^{x^2/4}) for x >= 0, plus regime tag."""
    c0 = asymptotic_switch(a)
    if x >= c0:
        val, der, _ = _u_asymptotic(a, x)
        return val, der, "asymptotic"
    if x * math.sqrt(max(a, 0.0) + 0.25 * x * x) <= 1.0:
        u0, du0, _, _ = _origin_values(a)
        if u0 != 0.0 or du0 != 0.0:
            val, der = _taylor_step(a, 0.0, u0, du0, x, window=_SERIES_WINDOW) if x > 0 else (u0, du0)
            g = math.exp(0.25 * x * x)
            return val * g, der * g, "series"
    uc, duc, _ = _u_asymptotic(a, c0)
    y, dy, log_scale = _integrate(a, c0, uc, duc, x)
    # uc, duc were scaled by e^{c0^2/4}
    g = math.exp(log_scale - 0.25 * c0 * c0 + 0.25 * x * x)
    return y * g, dy * g, "series"


@lru_cache(maxsize=65536)
def _v_pos(a: float, x: float):
    """(V e^{-x^2/4}, V' e^{-x^2/4}) for x >= 0, plus regime tag."""
    c0 = asymptotic_switch(a)
    if x >= c0:
        val, der, _ = _v_asymptotic(a, x)
        return val, der, "asymptotic"
    _, _, v0, dv0 = _origin_values(a)
    if x == 0.0:
        return v0, dv0, "series"
    if x <= _step_length(a, 0.0):
        val, der = _taylor_step(a, 0.0, v0, dv0, x, window=_SERIES_WINDOW)
        g = math.exp(-0.25 * x * x)
        return val * g, der * g, "series"
    y, dy, log_scale = _integrate(a, 0.0, v0, dv0, x)
    g = math.exp(log_scale - 0.25 * x * x)
    return y * g, dy * g, "series"


# ---------------------------------------------------------------------------
# Public API


@dataclass(frozen=True)
class ScaledPcf:
    """U, U', V, V' as mantissas: U = u * exp(u_exp), V = v * exp(v_exp)."""

    a: float
    x: float
    u: float
    du: float
    v: float
    dv: float
    u_exp: float
    v_exp: float
    regime: str


@dataclass(frozen=True)
class PcfValue:
    """Plain values of U(a,x), V(a,x) and their x-derivatives."""

    u: float
    v: float
    du: float
    dv: float
    regime: str


def _check_a(a: float) -> None:
    if not math.isfinite(a) or abs(a) > A_MAX:
        raise PcfDomainError(f"order a={a} outside |a| <= {A_MAX}")


def pcf_scaled(a: float, x: float) -> ScaledPcf:
    """Scaled U, V and derivatives for any finite real x (|a| <= 30)."""
    a = float(a)
    x = float(x)
    _check_a(a)
    if not math.isfinite(x):
        raise PcfDomainError(f"argument x={x} is not finite")
    ax = abs(x)
    u, du, reg_u = _u_pos(a, ax)
    v, dv, reg_v = _v_pos(a, ax)
    quarter = 0.25 * ax * ax
    if x >= 0.0:
        regime = "asymptotic" if reg_u == reg_v == "asymptotic" else "series"
        return ScaledPcf(a, x, u, du, v, dv, -quarter, quarter, regime)
    s = _sin_pi(a)
    c = _cos_pi(a)
    rp = math.pi * rgamma(0.5 + a)
    rm = c * rgamma(0.5 - a)
    damp = math.exp(-2.0 * quarter)
    # all mantissas below carry exp(+x^2/4)
    um = -s * u * damp + rp * v
    dum = s * du * damp - rp * dv
    vm = rm * u * damp + s * v
    dvm = -rm * du * damp - s * dv
    return ScaledPcf(a, x, um, dum, vm, dvm, quarter, quarter, "reflection")


def pcf_eval(a: float, x: float) -> PcfValue:
    """U(a,x), V(a,x), U'(a,x), V'(a,x) for |a| <= 30, |x| <= 60.

    Raises :class:`PcfDomainError` outside the envelope, or if a value is
    not representable in double precision (V grows like exp(x^2/4)).
    """
    if not math.isfinite(x) or abs(x) > X_MAX:
        raise PcfDomainError(f"argument x={x} outside |x| <= {X_MAX}")
    sc = pcf_scaled(a, x)
    try:
        eu = math.exp(sc.u_exp)
        ev = math.exp(sc.v_exp)
    except OverflowError as exc:
        raise PcfDomainError(f"U/V overflow double precision at x={x}") from exc
    out = PcfValue(sc.u * eu, sc.v * ev, sc.du * eu, sc.dv * ev, sc.regime)
    if not all(math.isfinite(t) for t in (out.u, out.v, out.du, out.dv)):
        raise PcfDomainError(f"U/V overflow double precision at a={a}, x={x}")
    return out


def u_tilde(a: float, y: float) -> float:
    """U(a, y) * exp(y|y|/4), moderate in size for every real y."""
    sc = pcf_scaled(a, y)
    return sc.u


def pcf_shift(a: float, x: float, k: int) -> tuple[float, float]:
    """(U(a+k, x), V(a+k, x)) via the order ladder.

    The ladder built from the derivative recurrences is run only in its stable
    direction (downwards for U, upwards for V); the other direction is taken
    from a direct evaluation at order a + k.
    """
    k = int(k)
    if abs(a + k) > A_MAX:
        raise PcfDomainError(f"ladder leaves |a| <= {A_MAX}: a+k={a + k}")
    base = pcf_eval(a, x)
    if k == 0:
        return base.u, base.v
    target = pcf_eval(a + k, x)
    u_val = target.u
    v_val = target.v
    if k < 0:
        # U(a-1) = x/2 U(a) - U'(a);  U'(a-1) = -x/2 U(a-1) - (a-1/2) U(a)
        u, du, order = base.u, base.du, a
        for _ in range(-k):
            u_lo = 0.5 * x * u - du
            du_lo = -0.5 * x * u_lo - (order - 0.5) * u
            u, du, order = u_lo, du_lo, order - 1.0
        u_val = u
    else:
        # V(a+1) = V'(a) + x/2 V(a);  V'(a+1) = x/2 V(a+1) + (a+1/2) V(a)
        v, dv, order = base.v, base.dv, a
        for _ in range(k):
            v_hi = dv + 0.5 * x * v
            dv_hi = 0.5 * x * v_hi + (order + 0.5) * v
            v, dv, order = v_hi, dv_hi, order + 1.0
        v_val = v
    return u_val, v_val


def asymptotic_factors(a: float, x: float) -> tuple[float, float]:
    """delta_1, delta_2 with U = exp(-x^2/4) x^(-a-1/2) delta_1 and
    V = sqrt(2/pi) exp(x^2/4) x^(a-1/2) delta_2, computed from the accurate
    values (not from the truncated expansion)."""
    if x <= 0.0:
        raise PcfDomainError("asymptotic factors are defined for x > 0")
    sc = pcf_scaled(a, x)
    d1 = sc.u / x ** (-a - 0.5)
    d2 = sc.v / (SQRT_2_OVER_PI * x ** (a - 0.5))
    return d1, d2
