"""Image measures and their Gaussian-smoothed functionals.

A barrier in this framework is certified by a measure on the far side of
the horizon value: mixtures of Dirac-derivative atoms and exponential
densities.  The central object is the smoothed CDF

    F(x, t) = integral of N((x - v) / sqrt(T - t)) d mu(v),

i.e. the CDF at x of the measure convolved with a centered Gaussian of
variance T - t.  A measure certifies a barrier g when F(g(t), t) = 1 for
all t in [0, T) while F stays bounded below the barrier; the crossing
probability from a start point u below the barrier is then F(u, 0).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

from .errors import DomainError
from .special import (
    exp_times_norm_cdf,
    hermite_eval,
    norm_cdf,
    norm_pdf_deriv,
)


@dataclass(frozen=True)
class DiracAtom:
    """Weighted derivative-of-delta atom: weight * delta_location^(order)."""

    location: float
    order: int
    weight: float

    def __post_init__(self):
        if self.order < 0:
            raise DomainError(f"atom order must be >= 0, got {self.order}")


@dataclass(frozen=True)
class ExpComponent:
    """Density weight * rate * exp(rate * (v - lower)) on (lower, upper).

    upper may be math.inf.  rate may be negative (decaying component with
    negative sign) or zero (a no-op kept for structural symmetry).
    """

    rate: float
    lower: float
    upper: float
    weight: float

    def __post_init__(self):
        if not self.upper > self.lower:
            raise DomainError("exponential component needs upper > lower")
        if math.isinf(self.upper) and self.rate > 0.0:
            # the density has infinite mass, but all smoothed functionals
            # below still converge (Gaussian tails win); allowed.
            pass


@dataclass(frozen=True)
class ImageMeasure:
    """A finite mixture of Dirac-derivative atoms and exponential pieces."""

    horizon: float
    atoms: tuple[DiracAtom, ...] = ()
    exp_components: tuple[ExpComponent, ...] = ()

    def __post_init__(self):
        if not self.horizon > 0.0:
            raise DomainError(f"horizon must be positive, got {self.horizon}")
        if not self.atoms and not self.exp_components:
            raise DomainError("measure needs at least one component")
        object.__setattr__(self, "atoms", tuple(self.atoms))
        object.__setattr__(self, "exp_components", tuple(self.exp_components))

    # -- smoothed functionals ------------------------------------------

    def smoothed_cdf(self, x: float, t: float) -> float:
        """CDF at x of the measure convolved with N(0, horizon - t).

        An atom of order n contributes
            weight * (T-t)^(-n/2) * N^(n)((x - location)/sqrt(T-t)),
        an exponential component integrates in closed form against the
        Gaussian kernel.
        """
        s = self._scale(t)
        total = 0.0
        for a in self.atoms:
            total += (
                a.weight * s ** (-a.order)
                * norm_pdf_deriv(a.order, (x - a.location) / s)
            )
        for c in self.exp_components:
            total += _exp_component_cdf(c, x, s)
        return total

    def smoothed_sf(self, x: float, t: float) -> float:
        """Survival form: integral of N((v - x)/sqrt(T - t)) d mu(v)."""
        s = self._scale(t)
        total = 0.0
        for a in self.atoms:
            sign = -1.0 if a.order % 2 else 1.0
            total += (
                sign * a.weight * s ** (-a.order)
                * norm_pdf_deriv(a.order, (a.location - x) / s)
            )
        for c in self.exp_components:
            total += _exp_component_mass(c) - _exp_component_cdf(c, x, s)
        return total

    def derivative(self) -> "ImageMeasure":
        """Distributional derivative, again an ImageMeasure.

        Atoms shift up one order.  An exponential component differentiates
        to rate * itself plus Dirac boundary terms at the interval ends
        (the upper one vanishes when upper = inf).
        """
        atoms = [replace(a, order=a.order + 1) for a in self.atoms]
        comps = []
        for c in self.exp_components:
            wr = c.weight * c.rate
            if wr != 0.0:
                atoms.append(DiracAtom(c.lower, 0, wr))
                if math.isfinite(c.upper):
                    atoms.append(
                        DiracAtom(c.upper, 0, -wr * math.exp(c.rate * (c.upper - c.lower)))
                    )
                comps.append(replace(c, weight=wr))
        if not atoms and not comps:
            # derivative of a zero-rate component: keep a null atom so the
            # object stays well formed
            atoms = [DiracAtom(0.0, 0, 0.0)]
        return ImageMeasure(self.horizon, tuple(atoms), tuple(comps))

    def with_horizon(self, horizon: float) -> "ImageMeasure":
        return replace(self, horizon=horizon)

    def support_points(self) -> list[float]:
        """Finite locations carrying mass (atom sites, component ends)."""
        pts = [a.location for a in self.atoms]
        for c in self.exp_components:
            pts.append(c.lower)
            if math.isfinite(c.upper):
                pts.append(c.upper)
        return pts

    def _scale(self, t: float) -> float:
        if not 0.0 <= t < self.horizon:
            raise DomainError(
                f"time {t} outside [0, {self.horizon}) for smoothed functional"
            )
        return math.sqrt(self.horizon - t)

    # -- serialization -------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "schema": 1,
            "horizon": self.horizon,
            "atoms": [
                {"location": a.location, "order": a.order, "weight": a.weight}
                for a in self.atoms
            ],
            "exp_components": [
                {
                    "rate": c.rate,
                    "lower": c.lower,
                    "upper": None if math.isinf(c.upper) else c.upper,
                    "weight": c.weight,
                }
                for c in self.exp_components
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ImageMeasure":
        if d.get("schema", 1) != 1:
            raise DomainError(f"unsupported measure schema {d.get('schema')!r}")
        atoms = tuple(
            DiracAtom(float(a["location"]), int(a["order"]), float(a["weight"]))
            for a in d.get("atoms", ())
        )
        comps = tuple(
            ExpComponent(
                float(c["rate"]),
                float(c["lower"]),
                math.inf if c.get("upper") is None else float(c["upper"]),
                float(c["weight"]),
            )
            for c in d.get("exp_components", ())
        )
        return cls(float(d["horizon"]), atoms, comps)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, s: str) -> "ImageMeasure":
        return cls.from_dict(json.loads(s))


def _exp_component_cdf(c: ExpComponent, x: float, s: float) -> float:
    # closed form for int_l^u N((x - v)/s) * w r e^{r (v-l)} dv; integrate
    # by parts once, complete the square in the remaining Gaussian
    if c.rate == 0.0 or c.weight == 0.0:
        return 0.0
    r, l, u, w = c.rate, c.lower, c.upper, c.weight
    rs2 = r * s * s
    shift = r * (x - l) + 0.5 * r * rs2
    if math.isinf(u):
        val = exp_times_norm_cdf(shift, (x - l + rs2) / s) - norm_cdf((x - l) / s)
    else:
        val = (
            exp_times_norm_cdf(r * (u - l), (x - u) / s)
            - norm_cdf((x - l) / s)
            + exp_times_norm_cdf(shift, (u - x - rs2) / s)
            - exp_times_norm_cdf(shift, (l - x - rs2) / s)
        )
    return w * val


def _exp_component_mass(c: ExpComponent) -> float:
    if c.rate == 0.0 or c.weight == 0.0:
        return 0.0
    if math.isinf(c.upper):
        if c.rate > 0.0:
            raise DomainError("survival form undefined: component has infinite mass")
        return -c.weight
    return c.weight * math.expm1(c.rate * (c.upper - c.lower))


# ---------------------------------------------------------------------------
# structural checks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IdentityReport:
    """Result of checking F(g(t), t) = 1 plus boundedness below the barrier."""

    max_deviation: float
    bound_bulk: float
    bound_tail: float
    grid_points: int = field(default=0)

    @property
    def bounded(self) -> bool:
        # a genuinely bounded functional has its sup settle well before the
        # horizon; blow-up shows as growth on the near-horizon tail grid
        return self.bound_tail <= max(2.0 * self.bound_bulk, self.bound_bulk + 0.25)

    @property
    def identity_holds(self) -> bool:
        return self.max_deviation < 1e-9


def barrier_time_grid(horizon: float, n: int = 1000) -> list[float]:
    """Default check grid: n points in [T*1e-6, T*(1 - 1e-6)].

    Symmetric clip.  Below ~1e-6 T the identity is still exact but
    evaluating it through the barrier value loses digits to the huge
    exponents, so deviations there measure float64, not the measure.
    """
    lo = 1e-6 * horizon
    hi = horizon * (1.0 - 1e-6)
    step = (hi - lo) / (n - 1)
    return [lo + i * step for i in range(n)]


def verify_barrier_identity(
    measure: ImageMeasure,
    barrier,
    grid: list[float] | None = None,
    offsets: tuple[float, ...] = (0.05, 0.2, 0.5, 1.0, 2.0),
) -> IdentityReport:
    """Check that the measure certifies the barrier.

    Evaluates |F(g(t), t) - 1| over the grid and probes |F(w, t)| at
    points w below the barrier (fixed offsets plus any support points that
    fall below it).  The bound is sampled separately on the bulk of the
    grid and on a near-horizon tail so that blow-up as t -> T is visible.
    """
    T = measure.horizon
    if grid is None:
        grid = barrier_time_grid(T)
    scale = math.sqrt(T)
    tail_start = T * (1.0 - 1e-3)

    max_dev = 0.0
    bulk = 0.0
    tail = 0.0
    support = measure.support_points()
    for t in grid:
        g = barrier(t)
        max_dev = max(max_dev, abs(measure.smoothed_cdf(g, t) - 1.0))
        c = 0.0
        for d in offsets:
            c = max(c, abs(measure.smoothed_cdf(g - d * scale, t)))
        for w in support:
            if w <= g:
                c = max(c, abs(measure.smoothed_cdf(w, t)))
        if t >= tail_start:
            tail = max(tail, c)
        else:
            bulk = max(bulk, c)
    return IdentityReport(max_dev, bulk, tail, len(grid))


def images_condition_residual(measure: ImageMeasure, f, t: float) -> float:
    """Pairing of the measure with exp((2 f(t) v - v^2) / (2 t)).

    This is the structural condition of the image method on [0, T']: the
    value must equal 1 for every t in (0, T'].  Atoms pair through
    derivatives of the Gaussian factor; terms are assembled in log space
    because the exponents explode as t -> 0 even though each pairing
    stays O(1) for a valid measure.
    """
    if not t > 0.0:
        raise DomainError(f"images condition needs t > 0, got {t}")
    ft = f(t)
    total = 0.0
    sqt = math.sqrt(t)
    for a in measure.atoms:
        # (-1)^n d^n/dv^n exp((2 f v - v^2)/(2t)) at v = location
        #   = t^(-n/2) He_n((location - f)/sqrt(t)) * exp((2 f loc - loc^2)/(2t))
        z = (a.location - ft) / sqt
        h = hermite_eval(a.order, z)
        if h == 0.0 or a.weight == 0.0:
            continue
        expo = (
            (2.0 * ft - a.location) * a.location / (2.0 * t)
            - 0.5 * a.order * math.log(t)
            + math.log(abs(h))
            + math.log(abs(a.weight))
        )
        sign = math.copysign(1.0, h) * math.copysign(1.0, a.weight)
        total += sign * math.exp(expo)
    for c in measure.exp_components:
        wr = c.weight * c.rate
        if wr == 0.0:
            continue
        q = ft + c.rate * t
        upper = 1.0 if math.isinf(c.upper) else norm_cdf((c.upper - q) / sqt)
        bracket = upper - norm_cdf((c.lower - q) / sqt)
        if bracket <= 0.0:
            continue
        expo = (
            math.log(abs(wr)) + 0.5 * math.log(2.0 * math.pi * t)
            + ft * ft / (2.0 * t) + c.rate * (ft - c.lower)
            + 0.5 * c.rate * c.rate * t + math.log(bracket)
        )
        total += math.copysign(1.0, wr) * math.exp(expo)
    return total
