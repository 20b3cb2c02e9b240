"""Closed-form crossing probabilities and last-exit / first-hit densities.

All results flow from one mechanism: a barrier g on [0, T] certified by a
measure mu (smoothed CDF = 1 along the barrier, bounded below it) has

    P(crossing from u)        = smoothed CDF of mu at (u, 0),
    P(last exceedance <= t)   = N(g(t)/sqrt(t)) - <mu, bivariate pairing>,
    last-exceedance density   = phi(g(t)/sqrt(t)) <mu', smoothing> / (2 sqrt(t)).

Two-sided corridors use a pair of measures (one per side, alternating
image trains for the constant corridor), the time-inverted family maps
back to its base through t -> T^2/t, and the image-method family gets its
crossing law over any probe horizon directly from its measure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .barriers import (
    HermiteBarrier,
    ImagesLambertBarrier,
    LinearBarrier,
    LogRemainingBarrier,
    SqrtRemainingBarrier,
    TimeInvertedBarrier,
    TwoSidedConstantBarrier,
    TwoSidedCurvedBarrier,
    ONE_SIDED,
)
from .errors import ConditionError, DomainError
from .measures import ImageMeasure
from .special import (
    bivariate_norm_cdf,
    hermite_eval,
    norm_cdf,
    norm_pdf,
    norm_pdf_deriv,
)

_SERIES_TOL = 1e-15


@dataclass(frozen=True)
class CrossingResult:
    """Probability plus the validity conditions that were checked.

    probability is None whenever a condition fails; the formulas are only
    proven on their stated parameter region and refusing beats quietly
    extrapolating.
    """

    probability: float | None
    conditions: tuple[tuple[str, bool], ...]

    @property
    def conditions_met(self) -> bool:
        return all(ok for _, ok in self.conditions)

    def failed(self) -> list[str]:
        return [text for text, ok in self.conditions if not ok]


def _result(prob_fn, conditions) -> CrossingResult:
    if all(ok for _, ok in conditions):
        return CrossingResult(prob_fn(), tuple(conditions))
    return CrossingResult(None, tuple(conditions))


# ---------------------------------------------------------------------------
# crossing probabilities
# ---------------------------------------------------------------------------


def crossing_prob(spec, start: float = 0.0) -> CrossingResult:
    """P(the motion started at `start` meets the barrier before the horizon).

    One-sided families translate the start point into the level parameter;
    two-sided families require the start strictly inside the corridor at
    time 0.  The time-inverted and image families are only defined for
    start = 0.
    """
    T = spec.horizon
    sT = math.sqrt(T)

    if isinstance(spec, TimeInvertedBarrier):
        conds = [("start = 0 (time-inverted family)", start == 0.0)]
        base = crossing_prob(spec.base, 0.0)
        conds.extend(base.conditions)
        return _result(lambda: base.probability, conds)

    if isinstance(spec, ImagesLambertBarrier):
        return images_crossing(spec, probe=T, start=start)

    if isinstance(spec, (TwoSidedConstantBarrier, TwoSidedCurvedBarrier)):
        s = spec.shifted_down(start)
        if isinstance(s, TwoSidedConstantBarrier):
            g0, g1 = s.a, s.b
        else:
            g0 = s.upper_level(0.0)
            g1 = s.a + s.b - g0
        conds = [(f"start strictly inside corridor at t=0 "
                  f"({g1 + start:.6g} < {start:.6g} < {g0 + start:.6g})",
                  g1 < 0.0 < g0)]
        if isinstance(s, TwoSidedConstantBarrier):
            return _result(lambda: _corridor_series_prob(s.a, s.b, T), conds)
        return _result(
            lambda: (norm_cdf(-s.a / sT) + norm_cdf(s.b / sT)) / s.c, conds
        )

    s = spec.shifted_down(start)
    if isinstance(s, LinearBarrier):
        a, b = s.a, s.b
        conds = [("start <= g(0), i.e. a >= start", a >= 0.0)]
        return _result(
            lambda: norm_cdf((-a - b * T) / sT)
            + math.exp(-2.0 * a * b) * norm_cdf((b * T - a) / sT),
            conds,
        )
    if isinstance(s, SqrtRemainingBarrier):
        a, b = s.a, s.b
        conds = [("start <= g(0), i.e. a + b*sqrt(T) >= start", a + b * sT >= 0.0)]
        return _result(lambda: norm_cdf(-a / sT) / norm_cdf(b), conds)
    if isinstance(s, LogRemainingBarrier):
        a, b = s.a, s.b
        conds = [_mirrored_cond(s)]
        conds.append(
            ("start <= g(0), i.e. a >= sqrt(T*ln(b/T)) + start",
             a >= math.sqrt(T * math.log(b / T)))
        )
        return _result(lambda: math.sqrt(b / T) * math.exp(-a * a / (2.0 * T)), conds)
    if isinstance(s, HermiteBarrier):
        a, b, n = s.a, s.b, s.n
        zn = s.largest_critical
        value = (
            b * T ** (-n / 2.0) * hermite_eval(n - 1, a / sT)
            * math.exp(-a * a / (2.0 * T))
        )
        conds = [
            (f"a - start >= z_n*sqrt(T) = {zn * sT:.6g}", a >= zn * sT),
            ("formula value <= 1 (start <= g(0))", value <= 1.0 + 1e-14),
        ]
        return _result(lambda: min(value, 1.0), conds)
    raise DomainError(f"unsupported barrier type {type(spec).__name__}")


def _corridor_series_prob(a: float, b: float, T: float) -> float:
    # alternating image series; terms decay like Gaussian tails, truncated
    # in completed +/- pairs once below tolerance
    sT = math.sqrt(T)
    total = 0.0
    j = 0
    while True:
        term = 2.0 * (
            norm_cdf((-a + j * (b - a)) / sT) + norm_cdf((b + j * (b - a)) / sT)
        )
        total += term if j % 2 == 0 else -term
        if abs(term) < _SERIES_TOL and j % 2 == 1:
            break
        if j > 10000:
            break
        j += 1
    return total


def _mirrored_cond(spec) -> tuple[str, bool]:
    mirrored = getattr(spec, "mirrored", False)
    return (
        "certifying functional bounded below the barrier (not mirrored)",
        not mirrored,
    )


def _reject_mirrored(spec):
    if getattr(spec, "mirrored", False):
        raise ConditionError(
            "mirrored log-remaining barrier: certifying functional is "
            "unbounded below the barrier, formulas do not apply"
        )


# ---------------------------------------------------------------------------
# bivariate pairings for the last-exceedance CDF
# ---------------------------------------------------------------------------


def _bvn_y_deriv(n: int, x0: float, y0: float, rho: float) -> float:
    # n-th partial derivative in y of the bivariate normal CDF at
    # (x0, y0; rho); n = 0 is the CDF itself
    if n == 0:
        return bivariate_norm_cdf(x0, y0, rho)
    q = math.sqrt((1.0 - rho) * (1.0 + rho))
    if q == 0.0:
        raise DomainError("derivative pairing degenerate at |rho| = 1")
    u = (x0 - rho * y0) / q
    total = 0.0
    m = n - 1
    for j in range(m + 1):
        sign = -1.0 if j % 2 else 1.0
        total += (
            math.comb(m, j) * sign * hermite_eval(j, y0) * norm_pdf(y0)
            * (-rho / q) ** (m - j) * norm_pdf_deriv(m - j, u)
        )
    return total


def _pairing_upper(measure: ImageMeasure, x0: float, t: float) -> float:
    # integral of N2(x0, -v/sqrt(T); -sqrt(t/T)) d mu(v)
    T = measure.horizon
    sT = math.sqrt(T)
    rho = -math.sqrt(t / T)
    total = 0.0
    for a in measure.atoms:
        y0 = -a.location / sT
        total += a.weight * sT ** (-a.order) * _bvn_y_deriv(a.order, x0, y0, rho)
    for c in measure.exp_components:
        total += _pairing_exp(c, x0, rho, sT)
    return total


def _pairing_lower(measure: ImageMeasure, x0: float, t: float) -> float:
    # mirrored side: integral of N2(x0, +v/sqrt(T); +sqrt(t/T)) d mu(v)
    T = measure.horizon
    sT = math.sqrt(T)
    rho = math.sqrt(t / T)
    total = 0.0
    for a in measure.atoms:
        sign = -1.0 if a.order % 2 else 1.0
        y0 = a.location / sT
        total += (
            sign * a.weight * sT ** (-a.order)
            * _bvn_y_deriv(a.order, x0, y0, rho)
        )
    if measure.exp_components:
        raise DomainError("exponential components unsupported on the lower side")
    return total


def _pairing_exp(c, x0: float, rho: float, sT: float) -> float:
    # closed form for int N2(x0, -v/sT; rho) w r e^{r(v-l)} dv: one
    # integration by parts, then the Gaussian-times-CDF integral collapses
    # back to bivariate CDFs with correlation -rho
    if c.rate == 0.0 or c.weight == 0.0:
        return 0.0
    gamma = c.rate * sT
    A = c.lower / sT
    shift = 0.5 * gamma * gamma - gamma * A
    z = x0 + rho * gamma
    if math.isinf(c.upper):
        val = (
            -bivariate_norm_cdf(x0, -A, rho)
            + math.exp(shift)
            * (norm_cdf(z) - bivariate_norm_cdf(A - gamma, z, -rho))
        )
    else:
        B = c.upper / sT
        val = (
            math.exp(gamma * (B - A)) * bivariate_norm_cdf(x0, -B, rho)
            - bivariate_norm_cdf(x0, -A, rho)
            + math.exp(shift)
            * (bivariate_norm_cdf(B - gamma, z, -rho)
               - bivariate_norm_cdf(A - gamma, z, -rho))
        )
    return c.weight * val


# ---------------------------------------------------------------------------
# one-sided last exceedance (sigma) and last touch (lambda)
# ---------------------------------------------------------------------------


def sigma_cdf(spec, t: float) -> float:
    """P(last time the motion sits at or above the barrier is <= t).

    Valid for every parameter choice of the one-sided families (no
    condition on the start side); defined on 0 < t <= horizon.  The law
    has an atom at the horizon (paths ending at or above the barrier),
    so the value at t = horizon is the left limit N(g(T)/sqrt(T)).
    """
    _check_one_sided(spec)
    _reject_mirrored(spec)
    T = spec.horizon
    if not 0.0 < t <= T:
        raise DomainError(f"sigma_cdf needs 0 < t <= {T}, got {t}")
    gt = spec.value(t)
    if t == T:
        return norm_cdf(gt / math.sqrt(T))
    x0 = gt / math.sqrt(t)
    return norm_cdf(x0) - _pairing_upper(spec.measure(), x0, t)


def sigma_pdf(spec, t: float) -> float:
    """Density of the last exceedance time, on 0 < t < horizon."""
    _check_one_sided(spec)
    _reject_mirrored(spec)
    T = spec.horizon
    if not 0.0 < t < T:
        raise DomainError(f"sigma_pdf needs 0 < t < {T}, got {t}")
    rem = T - t
    gt = spec.value(t)
    tail = norm_pdf(gt / math.sqrt(t))
    if isinstance(spec, LinearBarrier):
        b = spec.b
        br = b * math.sqrt(rem)
        return (norm_pdf(br) / math.sqrt(rem) + b * norm_cdf(br)) * tail / math.sqrt(t)
    if isinstance(spec, SqrtRemainingBarrier):
        b = spec.b
        return norm_pdf(b) / (2.0 * norm_cdf(b) * math.sqrt(t * rem)) * tail
    if isinstance(spec, LogRemainingBarrier):
        return 0.5 * math.sqrt(math.log(spec.b / rem) / (t * rem)) * tail
    if isinstance(spec, HermiteBarrier):
        x = spec.profile(t)
        return (
            hermite_eval(spec.n, x)
            / (2.0 * hermite_eval(spec.n - 1, x) * math.sqrt(t * rem))
        ) * tail
    raise DomainError(f"unsupported barrier type {type(spec).__name__}")


def sigma_pdf_via_measure(spec, t: float) -> float:
    """Generic density route: phi(g/sqrt(t)) <mu', smoothing> / (2 sqrt(t)).

    Agrees with sigma_pdf to rounding; kept as an independent evaluation
    path through the derivative measure.
    """
    _check_one_sided(spec)
    _reject_mirrored(spec)
    T = spec.horizon
    if not 0.0 < t < T:
        raise DomainError(f"density needs 0 < t < {T}, got {t}")
    gt = spec.value(t)
    deriv = spec.measure().derivative()
    return norm_pdf(gt / math.sqrt(t)) * deriv.smoothed_cdf(gt, t) / (2.0 * math.sqrt(t))


def _mirror(spec):
    if isinstance(spec, LinearBarrier):
        return LinearBarrier(-spec.a, -spec.b, spec.horizon)
    if isinstance(spec, SqrtRemainingBarrier):
        return SqrtRemainingBarrier(-spec.a, -spec.b, spec.horizon)
    raise DomainError(
        "last-touch law only ships for the linear and sqrt-remaining families"
    )


def lambda_cdf(spec, t: float) -> float:
    """P(last touch of the barrier <= t): the exceedance law for the
    barrier plus the same law for the reflected barrier."""
    return sigma_cdf(spec, t) + sigma_cdf(_mirror(spec), t)


def lambda_pdf(spec, t: float) -> float:
    """Density of the last touch time (linear / sqrt-remaining only)."""
    return sigma_pdf(spec, t) + sigma_pdf(_mirror(spec), t)


def _check_one_sided(spec):
    if not isinstance(spec, ONE_SIDED):
        raise DomainError(
            f"{type(spec).__name__} is not a one-sided [0, horizon] barrier"
        )


# ---------------------------------------------------------------------------
# time-inverted family
# ---------------------------------------------------------------------------


def hitting_cdf_inverted(spec: TimeInvertedBarrier, t: float) -> float:
    """P(first meeting of the inverted barrier is <= t), t >= horizon."""
    if not isinstance(spec, TimeInvertedBarrier):
        raise DomainError("hitting_cdf_inverted needs a time-inverted barrier")
    T = spec.horizon
    if t < T:
        raise DomainError(f"inverted barrier lives on [{T}, inf), got {t}")
    return 1.0 - sigma_cdf(spec.base, T * T / t)


def hitting_pdf_inverted(spec: TimeInvertedBarrier, t: float) -> float:
    """First-hit density through the inversion map: (T/t)^2 times the
    base exceedance density at T^2/t."""
    if not isinstance(spec, TimeInvertedBarrier):
        raise DomainError("hitting_pdf_inverted needs a time-inverted barrier")
    T = spec.horizon
    if not t > T:
        raise DomainError(f"density defined on ({T}, inf), got {t}")
    return (T * T / (t * t)) * sigma_pdf(spec.base, T * T / t)


# ---------------------------------------------------------------------------
# two-sided corridor laws
# ---------------------------------------------------------------------------


def _corridor_measures(spec):
    if isinstance(spec, TwoSidedConstantBarrier):
        return spec.image_atoms()
    if isinstance(spec, TwoSidedCurvedBarrier):
        return spec.image_atoms()
    raise DomainError(f"{type(spec).__name__} is not a two-sided corridor")


def two_sided_sigma_cdf(spec, t: float) -> float:
    """P(last time at-or-outside either corridor wall is <= t).

    As in the one-sided case the returned value at t = horizon is the
    left limit: the last-outside time has an atom at the horizon carried
    by paths that end outside the corridor.
    """
    T = spec.horizon
    if not 0.0 < t <= T:
        raise DomainError(f"needs 0 < t <= {T}, got {t}")
    mu0, mu1 = _corridor_measures(spec)
    g0, g1 = spec.value(t)
    sq = math.sqrt(t)
    total = 0.0
    for i, gi in enumerate((g0, g1)):
        x0 = gi / sq
        val = norm_cdf(x0) - _pairing_upper(mu0, x0, t) - _pairing_lower(mu1, x0, t)
        total += val if i == 0 else -val
    return total


def two_sided_sigma_pdf(spec, t: float) -> float:
    """Density of the last time outside the corridor, on 0 < t < horizon."""
    T = spec.horizon
    if not 0.0 < t < T:
        raise DomainError(f"needs 0 < t < {T}, got {t}")
    rem = T - t
    sq = math.sqrt(t)
    if isinstance(spec, TwoSidedConstantBarrier):
        a, b = spec.a, spec.b
        width2 = (a - b) * (a - b)
        series = 1.0
        j = 1
        while True:
            term = 2.0 * math.exp(-j * j * width2 / (2.0 * rem))
            series += term if j % 2 == 0 else -term
            if term < _SERIES_TOL and j % 2 == 0:
                break
            if j > 10000:
                break
            j += 1
        return (
            (norm_pdf(a / sq) + norm_pdf(b / sq)) * series
            / math.sqrt(2.0 * math.pi * t * rem)
        )
    if isinstance(spec, TwoSidedCurvedBarrier):
        g0, g1 = spec.value(t)
        sr = math.sqrt(rem)
        return (
            (norm_pdf(g0 / sq) + norm_pdf(g1 / sq))
            * (norm_pdf((g0 - spec.a) / sr) - norm_pdf((g0 - spec.b) / sr))
            / (2.0 * spec.c * math.sqrt(t * rem))
        )
    raise DomainError(f"{type(spec).__name__} is not a two-sided corridor")


# ---------------------------------------------------------------------------
# image-method family (first hit from below on [0, T'])
# ---------------------------------------------------------------------------


def images_crossing(
    spec: ImagesLambertBarrier,
    probe: float | None = None,
    measure: ImageMeasure | None = None,
    start: float = 0.0,
) -> CrossingResult:
    """P(first meeting <= probe) for the image-method barrier.

    Works for any probe horizon in (0, spec.horizon] and any certifying
    measure supported above f(0); defaults to the barrier's own
    derivative-atom measure.
    """
    if not isinstance(spec, ImagesLambertBarrier):
        raise DomainError("images_crossing needs an images-lambert barrier")
    T = spec.horizon if probe is None else probe
    probe_ok = 0.0 < T <= spec.horizon
    base = measure or spec.measure()
    f0 = spec.value(0.0)
    support_ok = all(p > f0 for p in base.support_points())
    conds = [
        ("start = 0 (image method)", start == 0.0),
        (f"probe horizon in (0, {spec.horizon}]", probe_ok),
        (f"measure supported above f(0) = {f0:.6g}", support_ok),
    ]

    def prob():
        fT = spec.value(T)
        sT = math.sqrt(T)
        return norm_cdf(-fT / sT) + base.with_horizon(T).smoothed_cdf(fT, 0.0)

    return _result(prob, conds)


def images_hitting_pdf(
    spec: ImagesLambertBarrier,
    t: float,
    measure: ImageMeasure | None = None,
) -> float:
    """Density in the probe horizon of the first-meeting law.

    Pairs the measure with v * phi((f(t) - v)/sqrt(t)) / (2 t^{3/2});
    derivative atoms pair through one extra Gaussian derivative plus a
    Leibniz term.
    """
    if not isinstance(spec, ImagesLambertBarrier):
        raise DomainError("images_hitting_pdf needs an images-lambert barrier")
    if not 0.0 < t <= spec.horizon:
        raise DomainError(f"needs 0 < t <= {spec.horizon}, got {t}")
    mu = measure or spec.measure()
    ft = spec.value(t)
    s = math.sqrt(t)
    total = 0.0
    for a in mu.atoms:
        z = (ft - a.location) / s
        total += a.weight * (
            a.location * s ** (-a.order) * norm_pdf_deriv(a.order + 1, z)
            - a.order * s ** (-(a.order - 1)) * norm_pdf_deriv(a.order, z)
        )
    for c in mu.exp_components:
        if c.rate == 0.0 or c.weight == 0.0:
            continue
        q = ft + c.rate * t
        pref = c.rate * math.exp(c.rate * (ft - c.lower) + 0.5 * c.rate * c.rate * t)
        if math.isinf(c.upper):
            dn = 1.0 - norm_cdf((c.lower - q) / s)
            dphi = norm_pdf((c.lower - q) / s)
        else:
            dn = norm_cdf((c.upper - q) / s) - norm_cdf((c.lower - q) / s)
            dphi = norm_pdf((c.lower - q) / s) - norm_pdf((c.upper - q) / s)
        total += c.weight * pref * (q * s * dn + t * dphi)
    return total / (2.0 * t * s)


# ---------------------------------------------------------------------------
# tabulation
# ---------------------------------------------------------------------------

KINDS = ("sigma", "lambda", "hitting_inverted", "hitting_images")


@dataclass(frozen=True)
class DensityCurve:
    kind: str
    grid: np.ndarray
    cdf: np.ndarray
    pdf: np.ndarray


def density_curve(spec, kind: str, n: int = 512,
                  t_min: float | None = None, t_max: float | None = None) -> DensityCurve:
    """Tabulate (cdf, pdf) columns for one of the shipped law kinds.

    Default grids clip 1e-9 * horizon away from the domain endpoints; the
    inverted family tabulates on [horizon, 100 * horizon].
    """
    if kind not in KINDS:
        raise DomainError(f"unknown curve kind {kind!r}; pick from {KINDS}")
    if n < 2:
        raise DomainError("need at least 2 grid points")
    T = spec.horizon
    eps = 1e-9 * T

    if kind == "hitting_inverted":
        if not isinstance(spec, TimeInvertedBarrier):
            raise DomainError("kind 'hitting_inverted' needs a time-inverted barrier")
        lo = T * (1.0 + 1e-9) if t_min is None else t_min
        hi = 100.0 * T if t_max is None else t_max
        grid = np.linspace(lo, hi, n)
        cdf = np.array([hitting_cdf_inverted(spec, float(t)) for t in grid])
        pdf = np.array([hitting_pdf_inverted(spec, float(t)) for t in grid])
        return DensityCurve(kind, grid, cdf, pdf)

    if kind == "hitting_images":
        if not isinstance(spec, ImagesLambertBarrier):
            raise DomainError("kind 'hitting_images' needs an images-lambert barrier")
        grid = np.linspace(eps if t_min is None else t_min,
                           T if t_max is None else t_max, n)
        cdf = np.array([
            images_crossing(spec, probe=float(t)).probability for t in grid
        ])
        pdf = np.array([images_hitting_pdf(spec, float(t)) for t in grid])
        return DensityCurve(kind, grid, cdf, pdf)

    grid = np.linspace(eps if t_min is None else t_min,
                       T - eps if t_max is None else t_max, n)
    if kind == "sigma":
        if isinstance(spec, (TwoSidedConstantBarrier, TwoSidedCurvedBarrier)):
            cdf_fn, pdf_fn = two_sided_sigma_cdf, two_sided_sigma_pdf
        else:
            cdf_fn, pdf_fn = sigma_cdf, sigma_pdf
    else:
        cdf_fn, pdf_fn = lambda_cdf, lambda_pdf
    cdf = np.array([cdf_fn(spec, float(t)) for t in grid])
    pdf = np.array([pdf_fn(spec, float(t)) for t in grid])
    return DensityCurve(kind, grid, cdf, pdf)
