"""Special functions backing the p-value computations.

The regularized upper incomplete gamma function is evaluated in-repo with
the classic series / continued-fraction split so its accuracy can be pinned
against an independent quadrature oracle without pulling in scipy. The
complementary error function comes from the standard library.
"""

from __future__ import annotations

import math

_MAX_ITER = 2000
_EPS = 1e-16
_TINY = 1e-300


def erfc(x: float) -> float:
    """Complementary error function erfc(x) = 1 - erf(x)."""
    return math.erfc(x)


def normal_cdf(x: float) -> float:
    """Standard normal cumulative distribution function."""
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def regularized_gamma_upper(a: float, x: float) -> float:
    """Q(a, x) = Gamma(a, x) / Gamma(a).

    Q is the survival function of a Gamma(a, 1) variable; Q(k/2, t/2) is the
    survival function of a chi-square statistic t with k degrees of freedom.
    Series expansion below x < a + 1, Lentz continued fraction above.
    """
    if a <= 0.0:
        raise ValueError("shape parameter a must be positive")
    if x < 0.0:
        raise ValueError("x must be non-negative")
    if x == 0.0:
        return 1.0
    if x < a + 1.0:
        return 1.0 - _lower_series(a, x)
    return _upper_continued_fraction(a, x)


def _log_prefactor(a: float, x: float) -> float:
    return -x + a * math.log(x) - math.lgamma(a)


def _lower_series(a: float, x: float) -> float:
    # P(a, x) via the ascending series; converges fast for x < a + 1.
    term = 1.0 / a
    total = term
    k = a
    for _ in range(_MAX_ITER):
        k += 1.0
        term *= x / k
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    else:
        raise ArithmeticError(f"gamma series did not converge for a={a}, x={x}")
    return total * math.exp(_log_prefactor(a, x))


def _upper_continued_fraction(a: float, x: float) -> float:
    # Q(a, x) via the continued fraction, modified Lentz method.
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b if b != 0.0 else 1.0 / _TINY
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    else:
        raise ArithmeticError(f"gamma continued fraction did not converge for a={a}, x={x}")
    log_q = _log_prefactor(a, x)
    if log_q < -745.0:
        return 0.0
    return math.exp(log_q) * h
