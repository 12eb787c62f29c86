"""Scalar special functions used across the package.

The regularized incomplete gamma pair is authored here with the classic
series / continued-fraction split (series for x < a + 1, modified Lentz
continued fraction otherwise).  Tests cross-check it against scipy and
against Monte Carlo chi-square tails; the rest of the package treats these
as the single source of truth so that the same digits appear everywhere.
"""

from __future__ import annotations

import math

_EPS = 1.0e-16
_FPMIN = 1.0e-300
_MAX_ITER = 600


def _gamma_series(a: float, x: float) -> float:
    """Lower regularized P(a, x) by power series, for x < a + 1."""
    if x == 0.0:
        return 0.0
    ap = a
    term = 1.0 / a
    total = term
    for _ in range(_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    else:
        raise ArithmeticError(f"incomplete gamma series failed to converge (a={a}, x={x})")
    log_prefactor = -x + a * math.log(x) - math.lgamma(a)
    return total * math.exp(log_prefactor)


def _gamma_cf(a: float, x: float) -> float:
    """Upper regularized Q(a, x) by modified Lentz continued fraction, for x >= a + 1."""
    # For x beyond ~9e15 the b += 2.0 update is below one ulp of b and the
    # Lentz recurrence stalls one ulp away from its limit, never meeting the
    # strict tolerance.  Every such x has exp(log_prefactor) == 0.0, and the
    # fraction value h is at most ~1/x there, so Q is exactly 0.0; deciding
    # that from the prefactor alone skips the stalled iteration entirely.
    log_prefactor = -x + a * math.log(x) - math.lgamma(a)
    if log_prefactor < -746.0:
        return 0.0
    b = x + 1.0 - a
    c = 1.0 / _FPMIN
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER + 1):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = b + an / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    else:
        raise ArithmeticError(f"incomplete gamma continued fraction failed to converge (a={a}, x={x})")
    return math.exp(log_prefactor) * h


def reg_gamma_lower(a: float, x: float) -> float:
    """Regularized lower incomplete gamma P(a, x) = gamma(a, x) / Gamma(a)."""
    if a <= 0.0:
        raise ValueError(f"shape parameter must be positive, got a={a}")
    if x < 0.0:
        raise ValueError(f"argument must be nonnegative, got x={x}")
    if x == 0.0:
        return 0.0
    if math.isinf(x):
        return 1.0
    if x < a + 1.0:
        return _gamma_series(a, x)
    return 1.0 - _gamma_cf(a, x)


def reg_gamma_upper(a: float, x: float) -> float:
    """Regularized upper incomplete gamma Q(a, x) = Gamma(a, x) / Gamma(a)."""
    if a <= 0.0:
        raise ValueError(f"shape parameter must be positive, got a={a}")
    if x < 0.0:
        raise ValueError(f"argument must be nonnegative, got x={x}")
    if x == 0.0:
        return 1.0
    if math.isinf(x):
        return 0.0
    if x < a + 1.0:
        return 1.0 - _gamma_series(a, x)
    return _gamma_cf(a, x)


def normal_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def normal_sf(x: float) -> float:
    return 0.5 * math.erfc(x / math.sqrt(2.0))


def normal_pdf(x: float) -> float:
    return math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
