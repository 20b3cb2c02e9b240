"""Scalar special functions used by the barrier formulas.

Everything here is plain double precision with tight accuracy targets:
the univariate normal CDF is good to ~1e-16 absolute (erfc based), the
bivariate CDF to ~5e-15 (Drezner-Wesolowsky quadrature with the Genz
high-correlation branch), and the root finders (Hermite zeros, Lambert W)
converge to ~1e-14.
"""

from __future__ import annotations

import math

from .errors import DomainError

SQRT2 = math.sqrt(2.0)
SQRT_TWO_PI = math.sqrt(2.0 * math.pi)
INV_SQRT_TWO_PI = 1.0 / SQRT_TWO_PI
TWO_PI = 2.0 * math.pi


def norm_cdf(x: float) -> float:
    """Standard normal CDF, accurate to ~1e-16 in absolute terms."""
    if math.isnan(x):
        return math.nan
    return 0.5 * math.erfc(-x / SQRT2)


def norm_pdf(x: float) -> float:
    """Standard normal density."""
    return INV_SQRT_TWO_PI * math.exp(-0.5 * x * x)


def norm_pdf_deriv(k: int, x: float) -> float:
    """k-th derivative of the standard normal CDF.

    k = 0 is the CDF itself, k = 1 the density.  For k >= 2 the
    derivatives are Hermite-weighted Gaussians:

        d^k/dx^k N(x) = (-1)^(k-1) * He_{k-1}(x) * N'(x)

    with He_n the probabilists' Hermite polynomial.
    """
    if k < 0:
        raise DomainError(f"derivative order must be >= 0, got {k}")
    if k == 0:
        return norm_cdf(x)
    if k == 1:
        return norm_pdf(x)
    sign = -1.0 if (k % 2 == 0) else 1.0
    return sign * hermite_eval(k - 1, x) * norm_pdf(x)


def exp_times_norm_cdf(a: float, b: float) -> float:
    """exp(a) * N(b), evaluated stably when exp(a) alone would overflow.

    The barrier formulas only produce large positive a together with a
    deeply negative b, so the product stays moderate; for b <= -38 the
    CDF underflows and we switch to the Mills-ratio expansion in log
    space.
    """
    if b > -37.0:
        n = norm_cdf(b)
        if a < 700.0:
            return math.exp(a) * n
        if n == 0.0:
            return 0.0
        return math.exp(a + math.log(n))
    # N(b) ~ phi(b)/(-b) * (1 - 1/b^2 + 3/b^4 - 15/b^6)
    b2 = b * b
    series = 1.0 - 1.0 / b2 + 3.0 / (b2 * b2) - 15.0 / (b2 * b2 * b2)
    log_tail = -0.5 * b2 - math.log(-b * SQRT_TWO_PI) + math.log(series)
    arg = a + log_tail
    return 0.0 if arg < -745.0 else math.exp(arg)


# ---------------------------------------------------------------------------
# bivariate normal CDF
# ---------------------------------------------------------------------------

# Gauss-Legendre abscissae/weights (6, 12 and 20 point rules) as used by
# the Drezner-Wesolowsky/Genz algorithm.
_GL = {
    6: (
        (0.9324695142031522, 0.6612093864662647, 0.2386191860831970),
        (0.1713244923791705, 0.3607615730481384, 0.4679139345726904),
    ),
    12: (
        (0.9815606342467191, 0.9041172563704750, 0.7699026741943050,
         0.5873179542866171, 0.3678314989981802, 0.1252334085114692),
        (0.04717533638651177, 0.1069393259953183, 0.1600783285433464,
         0.2031674267230659, 0.2334925365383547, 0.2491470458134029),
    ),
    20: (
        (0.9931285991850949, 0.9639719272779138, 0.9122344282513259,
         0.8391169718222188, 0.7463319064601508, 0.6360536807265150,
         0.5108670019508271, 0.3737060887154196, 0.2277858511416451,
         0.07652652113349733),
        (0.01761400713915212, 0.04060142980038694, 0.06267204833410906,
         0.08327674157670475, 0.1019301198172404, 0.1181945319615184,
         0.1316886384491766, 0.1420961093183821, 0.1491729864726037,
         0.1527533871307259),
    ),
}


def _bvn_upper(dh: float, dk: float, r: float) -> float:
    # P(X > dh, Y > dk) for standard bivariate normal with correlation r.
    # Genz's rewrite of Drezner & Wesolowsky: direct quadrature over
    # asin(r) for |r| <= 0.925, tail expansion plus quadrature otherwise.
    if math.isinf(dh) or math.isinf(dk):
        if dh == math.inf or dk == math.inf:
            return 0.0
        if dh == -math.inf:
            return _bvn_upper(dk, dk, r) if dk == -math.inf else norm_cdf(-dk)
        return norm_cdf(-dh)

    h, k = dh, dk
    hk = h * k
    bvn = 0.0
    if abs(r) < 0.925:
        if r != 0.0:
            hs = 0.5 * (h * h + k * k)
            asr = math.asin(r)
            n = 6 if abs(r) < 0.3 else (12 if abs(r) < 0.75 else 20)
            xs, ws = _GL[n]
            for x, w in zip(xs, ws):
                for sgn in (-1.0, 1.0):
                    sn = math.sin(asr * 0.5 * (sgn * x + 1.0))
                    bvn += w * math.exp((sn * hk - hs) / (1.0 - sn * sn))
            bvn = bvn * asr / (2.0 * TWO_PI)
        return bvn + norm_cdf(-h) * norm_cdf(-k)

    if r < 0.0:
        k = -k
        hk = -hk
    if abs(r) < 1.0:
        a_sq = (1.0 - r) * (1.0 + r)
        a = math.sqrt(a_sq)
        bs = (h - k) ** 2
        c = (4.0 - hk) / 8.0
        d = (12.0 - hk) / 16.0
        asr = -0.5 * (bs / a_sq + hk)
        if asr > -100.0:
            bvn = a * math.exp(asr) * (
                1.0 - c * (bs - a_sq) * (1.0 - d * bs / 5.0) / 3.0
                + c * d * a_sq * a_sq / 5.0
            )
        if -hk < 100.0:
            b = math.sqrt(bs)
            bvn -= (
                math.exp(-0.5 * hk) * SQRT_TWO_PI * norm_cdf(-b / a)
                * b * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0)
            )
        a *= 0.5
        xs, ws = _GL[20]
        for x, w in zip(xs, ws):
            for sgn in (-1.0, 1.0):
                xsq = (a * (sgn * x + 1.0)) ** 2
                rs = math.sqrt(1.0 - xsq)
                asr = -0.5 * (bs / xsq + hk)
                if asr > -100.0:
                    bvn += (
                        a * w * math.exp(asr)
                        * (math.exp(-0.5 * hk * (1.0 - rs) / (1.0 + rs)) / rs
                           - (1.0 + c * xsq * (1.0 + d * xsq)))
                    )
        bvn = -bvn / TWO_PI
    if r > 0.0:
        bvn += norm_cdf(-max(h, k))
    else:
        bvn = -bvn
        if k > h:
            bvn += norm_cdf(k) - norm_cdf(h)
    return min(1.0, max(0.0, bvn))


def bivariate_norm_cdf(x: float, y: float, rho: float) -> float:
    """P(X <= x, Y <= y) for standard bivariate normal with correlation rho.

    Degenerate correlations are handled exactly:
    N2(x, y; 1) = N(min(x, y)) and N2(x, y; -1) = max(0, N(x) - N(-y)).
    """
    if math.isnan(x) or math.isnan(y) or math.isnan(rho):
        return math.nan
    if not -1.0 <= rho <= 1.0:
        raise DomainError(f"correlation must lie in [-1, 1], got {rho}")
    return _bvn_upper(-x, -y, rho)


# ---------------------------------------------------------------------------
# probabilists' Hermite polynomials
# ---------------------------------------------------------------------------


def hermite_eval(n: int, x: float) -> float:
    """Probabilists' Hermite polynomial He_n(x).

    Defined by d^n/dx^n exp(-x^2/2) = (-1)^n He_n(x) exp(-x^2/2), i.e.
    He_0 = 1, He_1 = x, He_{n+1}(x) = x He_n(x) - n He_{n-1}(x).
    """
    if n < 0:
        raise DomainError(f"Hermite degree must be >= 0, got {n}")
    if n == 0:
        return 1.0
    prev, cur = 1.0, x
    for m in range(1, n):
        prev, cur = cur, x * cur - m * prev
    return cur


def hermite_zeros(n: int) -> list[float]:
    """All n zeros of He_n in increasing order, to ~1e-14.

    Uses the interlacing property: the zeros of He_{n-1} bracket those of
    He_n, so each zero has a guaranteed bracket and bisection-safeguarded
    Newton converges unconditionally.
    """
    if n < 1:
        raise DomainError(f"need degree >= 1, got {n}")
    zeros = [0.0]
    for m in range(2, n + 1):
        prev = zeros
        # outer brackets: extend past the extreme zeros of He_{m-1} until
        # He_m changes sign (it is +inf at +inf, (-1)^m inf at -inf)
        hi = prev[-1] + 1.0
        while hermite_eval(m, hi) <= 0.0:
            hi += 1.0
        brackets = [(prev[-1], hi)]
        for i in range(len(prev) - 1):
            brackets.append((prev[i], prev[i + 1]))
        lo = prev[0] - 1.0
        while hermite_eval(m, lo) * hermite_eval(m, prev[0]) >= 0.0:
            lo -= 1.0
        brackets.append((lo, prev[0]))
        zeros = sorted(_hermite_newton(m, a, b) for a, b in brackets)
    return zeros


def hermite_largest_zero(n: int) -> float:
    """Largest zero of He_n (0 for n = 1, sqrt(3) for n = 3, ...)."""
    return hermite_zeros(n)[-1]


def _hermite_newton(n: int, lo: float, hi: float) -> float:
    # bracketed Newton on He_n; He_n' = n He_{n-1}
    flo = hermite_eval(n, lo)
    x = 0.5 * (lo + hi)
    for _ in range(100):
        f = hermite_eval(n, x)
        if f == 0.0:
            return x
        if (f > 0.0) == (flo > 0.0):
            lo = x
        else:
            hi = x
        df = n * hermite_eval(n - 1, x)
        step = f / df if df != 0.0 else math.inf
        xn = x - step
        if not lo < xn < hi:
            xn = 0.5 * (lo + hi)
        if abs(xn - x) <= 1e-15 * max(1.0, abs(x)):
            return xn
        x = xn
    return x


# ---------------------------------------------------------------------------
# Lambert W
# ---------------------------------------------------------------------------

_INV_E = math.exp(-1.0)


def lambert_w(x: float, branch: str = "principal") -> float:
    """Real branches of Lambert W: w with w * exp(w) = x.

    branch="principal" is W_0 (w >= -1, defined for x >= -1/e);
    branch="lower" is W_{-1} (w <= -1, defined for -1/e <= x < 0).
    Halley iteration, residual |w e^w - x| below ~1e-14 relative.
    """
    if branch not in ("principal", "lower"):
        raise DomainError(f"unknown branch {branch!r}")
    if math.isnan(x):
        return math.nan
    if x < -_INV_E:
        if x > -_INV_E - 1e-15:
            return -1.0
        raise DomainError(f"lambert_w undefined for x = {x} < -1/e")

    if branch == "lower":
        if x >= 0.0:
            raise DomainError(f"lower branch needs x < 0, got {x}")
        if x == -_INV_E:
            return -1.0
        # seed: series near the branch point, log asymptote near 0-
        p = -math.sqrt(2.0 * (1.0 + math.e * x))
        if p > -0.5:
            w = -1.0 + p - p * p / 3.0 + 11.0 * p ** 3 / 72.0
        else:
            l1 = math.log(-x)
            w = l1 - math.log(-l1)
    else:
        if x == -_INV_E:
            return -1.0
        if x == 0.0:
            return 0.0
        if x < -0.25:
            p = math.sqrt(2.0 * (1.0 + math.e * x))
            w = -1.0 + p - p * p / 3.0 + 11.0 * p ** 3 / 72.0
        elif x < 2.0:
            w = x * (1.0 - x + 1.5 * x * x) if abs(x) < 0.2 else math.log1p(x) * 0.7
        else:
            l1 = math.log(x)
            w = l1 - math.log(l1)
    return _halley_w(x, w)


def _halley_w(x: float, w: float) -> float:
    for _ in range(60):
        ew = math.exp(w)
        f = w * ew - x
        if f == 0.0:
            return w
        wp1 = w + 1.0
        denom = ew * wp1 - 0.5 * (w + 2.0) * f / wp1
        step = f / denom
        w -= step
        if abs(step) <= 5e-16 * max(1.0, abs(w)):
            # one more polish and out
            ew = math.exp(w)
            f = w * ew - x
            wp1 = w + 1.0
            if wp1 != 0.0 and ew * wp1 != 0.0:
                w -= f / (ew * wp1 - 0.5 * (w + 2.0) * f / wp1)
            return w
    return w
