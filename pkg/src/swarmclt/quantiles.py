"""Self-contained normal and chi-square quantile functions.

The inverse normal CDF uses a monotone rational approximation refined by one
Newton step against an erfc-based CDF (absolute error well under 1e-8). The
chi-square quantile bisects the regularized lower incomplete gamma function.
Both accept u in the open interval (0, 1).
"""

import math


def normal_cdf(x: float) -> float:
    """Standard normal CDF via the complementary error function."""
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def _normal_pdf(x: float) -> float:
    return math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)


# Rational approximation coefficients (Acklam); relative error ~1e-9 before
# the Newton refinement.
_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
      1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
      6.680131188771972e+01, -1.328068155288572e+01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
      -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
      3.754408661907416e+00)

_P_LOW = 0.02425
_P_HIGH = 1.0 - _P_LOW


def normal_quantile(u: float) -> float:
    """Inverse standard normal CDF, absolute error <= 1e-8 on (0, 1)."""
    if not 0.0 < u < 1.0:
        raise ValueError(f"normal_quantile requires u in (0, 1), got {u}")
    if u < _P_LOW:
        q = math.sqrt(-2.0 * math.log(u))
        x = ((((( _C[0]*q + _C[1])*q + _C[2])*q + _C[3])*q + _C[4])*q + _C[5]) / \
            (((( _D[0]*q + _D[1])*q + _D[2])*q + _D[3])*q + 1.0)
    elif u <= _P_HIGH:
        q = u - 0.5
        r = q * q
        x = ((((( _A[0]*r + _A[1])*r + _A[2])*r + _A[3])*r + _A[4])*r + _A[5]) * q / \
            ((((( _B[0]*r + _B[1])*r + _B[2])*r + _B[3])*r + _B[4])*r + 1.0)
    else:
        q = math.sqrt(-2.0 * math.log(1.0 - u))
        x = -((((( _C[0]*q + _C[1])*q + _C[2])*q + _C[3])*q + _C[4])*q + _C[5]) / \
            (((( _D[0]*q + _D[1])*q + _D[2])*q + _D[3])*q + 1.0)
    # one Newton step against the high-precision CDF
    pdf = _normal_pdf(x)
    if pdf > 0.0:
        x -= (normal_cdf(x) - u) / pdf
    return x


def _gamma_p_series(a: float, x: float) -> float:
    # series expansion, converges fast for x < a + 1
    term = 1.0 / a
    total = term
    n = a
    for _ in range(500):
        n += 1.0
        term *= x / n
        total += term
        if abs(term) < abs(total) * 1e-16:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_q_contfrac(a: float, x: float) -> float:
    # Lentz continued fraction for the upper tail, for x >= a + 1
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 500):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return h * math.exp(-x + a * math.log(x) - math.lgamma(a))


def gamma_p(a: float, x: float) -> float:
    """Regularized lower incomplete gamma P(a, x)."""
    if x < 0.0 or a <= 0.0:
        raise ValueError("gamma_p requires x >= 0 and a > 0")
    if x == 0.0:
        return 0.0
    if x < a + 1.0:
        return _gamma_p_series(a, x)
    return 1.0 - _gamma_q_contfrac(a, x)


def chi2_cdf(x: float, d: int) -> float:
    return gamma_p(0.5 * d, 0.5 * x)


def chi2_quantile(u: float, d: int) -> float:
    """Chi-square quantile with d degrees of freedom, bisected to <= 1e-10."""
    if not 0.0 < u < 1.0:
        raise ValueError(f"chi2_quantile requires u in (0, 1), got {u}")
    if d < 1:
        raise ValueError(f"chi2_quantile requires d >= 1, got {d}")
    lo, hi = 0.0, float(max(4 * d, 16))
    while chi2_cdf(hi, d) < u:
        hi *= 2.0
        if hi > 1e12:
            raise RuntimeError("chi2_quantile bracket expansion failed")
    # relative stop: small-u quantiles for d=1 sit near zero, where an
    # absolute tolerance would cost several digits
    while hi - lo > 1e-12 * hi:
        mid = 0.5 * (lo + hi)
        if chi2_cdf(mid, d) < u:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
