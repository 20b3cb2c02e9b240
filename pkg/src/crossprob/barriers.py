"""Barrier families with certifying measures.

Each one-sided family is a time-dependent level g(t) on [0, horizon]
together with the image measure that certifies it (smoothed CDF equal to
1 along the barrier).  Two-sided families carry an upper and a lower
level and a pair of measures.  The time-inverted family lives on
[horizon, inf) and wraps a one-sided base barrier.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

from .errors import ConditionError, DomainError
from .measures import DiracAtom, ExpComponent, ImageMeasure
from .special import (
    SQRT_TWO_PI,
    hermite_eval,
    hermite_largest_zero,
    lambert_w,
    norm_cdf,
    norm_pdf,
)


# ---------------------------------------------------------------------------
# scalar root finding (bracketed Newton, bisection fallback)
# ---------------------------------------------------------------------------


def _expand_right(f, lo: float, step: float, target_below: bool):
    """Grow [lo, hi] rightward until f(hi) crosses zero.

    target_below=True expects f decreasing through 0, False increasing.
    """
    hi = lo + step
    for _ in range(200):
        v = f(hi)
        if (v <= 0.0) if target_below else (v >= 0.0):
            return hi
        step *= 2.0
        hi += step
    raise DomainError("failed to bracket root")


def _newton_bracketed(f, df, lo: float, hi: float, tol: float) -> float:
    flo = f(lo)
    if flo == 0.0:
        return lo
    x = 0.5 * (lo + hi)
    for _ in range(120):
        fx = f(x)
        if abs(fx) <= tol:
            return x
        if (fx > 0.0) == (flo > 0.0):
            lo = x
        else:
            hi = x
        d = df(x)
        xn = x - fx / d if d != 0.0 else math.inf
        if not lo < xn < hi:
            xn = 0.5 * (lo + hi)
        if abs(xn - x) <= 1e-16 * max(1.0, abs(x)):
            return xn
        x = xn
    return x


def hermite_gauss_largest_root(n: int, rhs: float) -> float:
    """Largest x with He_{n-1}(x) exp(-x^2/2) = rhs.

    The left side decreases monotonically to 0 beyond the largest zero
    z_n of He_n (its last critical point), so for 0 < rhs <= value at
    z_n there is exactly one root in [z_n, inf).
    """
    if n < 1:
        raise DomainError(f"need n >= 1, got {n}")
    if not rhs > 0.0:
        raise DomainError(f"need rhs > 0, got {rhs}")
    zn = hermite_largest_zero(n)

    def psi(x):
        return hermite_eval(n - 1, x) * math.exp(-0.5 * x * x) - rhs

    def dpsi(x):
        return -hermite_eval(n, x) * math.exp(-0.5 * x * x)

    peak = psi(zn)
    if peak <= 0.0:
        # rhs at (or a rounding error above) the maximum attainable value
        if peak > -1e-12 * rhs:
            return zn
        raise DomainError("no root: rhs exceeds the envelope maximum")
    hi = _expand_right(psi, zn, 1.0, target_below=True)
    return _newton_bracketed(psi, dpsi, zn, hi, tol=1e-13 * rhs)


class _BarrierBase:
    """Shared plumbing; subclasses define value() and parameters."""

    def grid(self, ts) -> np.ndarray:
        ts = np.asarray(ts, dtype=float)
        return np.array([self.value(float(t)) for t in np.ravel(ts)]).reshape(ts.shape)

    def _check_time(self, t: float):
        if not 0.0 <= t <= self.horizon:
            raise DomainError(
                f"time {t} outside [0, {self.horizon}] for {self.family} barrier"
            )


# ---------------------------------------------------------------------------
# one-sided families
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LinearBarrier(_BarrierBase):
    """g(t) = a + b t."""

    a: float
    b: float
    horizon: float
    family = "linear"

    def __post_init__(self):
        _check_horizon(self.horizon)

    def value(self, t: float) -> float:
        self._check_time(t)
        return self.a + self.b * t

    def grid(self, ts) -> np.ndarray:
        return self.a + self.b * np.asarray(ts, dtype=float)

    def measure(self) -> ImageMeasure:
        # twice the endpoint mass plus an exponential tail whose smoothed
        # CDF reproduces the closed-form limit functional exactly
        gT = self.a + self.b * self.horizon
        atoms = (DiracAtom(gT, 0, 2.0),)
        comps = ()
        if self.b != 0.0:
            comps = (ExpComponent(2.0 * self.b, gT, math.inf, 1.0),)
        return ImageMeasure(self.horizon, atoms, comps)

    def finite_measure(self, upper: float) -> ImageMeasure:
        """Truncated variant (exponential piece cut at `upper`)."""
        gT = self.a + self.b * self.horizon
        if self.b == 0.0:
            return ImageMeasure(self.horizon, (DiracAtom(gT, 0, 2.0),))
        return ImageMeasure(
            self.horizon,
            (DiracAtom(gT, 0, 2.0),),
            (ExpComponent(2.0 * self.b, gT, upper, 1.0),),
        )

    def shifted_down(self, delta: float) -> "LinearBarrier":
        return replace(self, a=self.a - delta)


@dataclass(frozen=True)
class SqrtRemainingBarrier(_BarrierBase):
    """g(t) = a + b sqrt(horizon - t)."""

    a: float
    b: float
    horizon: float
    family = "sqrt-remaining"

    def __post_init__(self):
        _check_horizon(self.horizon)

    def value(self, t: float) -> float:
        self._check_time(t)
        return self.a + self.b * math.sqrt(self.horizon - t)

    def grid(self, ts) -> np.ndarray:
        ts = np.asarray(ts, dtype=float)
        return self.a + self.b * np.sqrt(np.maximum(self.horizon - ts, 0.0))

    def measure(self) -> ImageMeasure:
        return ImageMeasure(
            self.horizon, (DiracAtom(self.a, 0, 1.0 / norm_cdf(self.b)),)
        )

    def shifted_down(self, delta: float) -> "SqrtRemainingBarrier":
        return replace(self, a=self.a - delta)


@dataclass(frozen=True)
class LogRemainingBarrier(_BarrierBase):
    """g(t) = a - sqrt((horizon - t) ln(b / (horizon - t))), b >= horizon.

    mirrored=True flips the square root to a + sqrt(...): that barrier
    satisfies the same smoothing identity but its functional is unbounded
    below the barrier, so none of the probability formulas apply to it.
    It is kept for negative testing of the verification machinery.
    """

    a: float
    b: float
    horizon: float
    mirrored: bool = False
    family = "log-remaining"

    def __post_init__(self):
        _check_horizon(self.horizon)
        if self.b < self.horizon:
            raise ConditionError(
                f"log-remaining barrier needs b >= horizon ({self.b} < {self.horizon})"
            )

    def value(self, t: float) -> float:
        self._check_time(t)
        rem = self.horizon - t
        if rem == 0.0:
            return self.a
        root = math.sqrt(rem * math.log(self.b / rem))
        return self.a + root if self.mirrored else self.a - root

    def grid(self, ts) -> np.ndarray:
        ts = np.asarray(ts, dtype=float)
        rem = np.maximum(self.horizon - ts, 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            root = np.sqrt(rem * np.log(self.b / rem))
        root = np.where(rem == 0.0, 0.0, root)
        return self.a + root if self.mirrored else self.a - root

    def measure(self) -> ImageMeasure:
        return ImageMeasure(
            self.horizon, (DiracAtom(self.a, 1, math.sqrt(2.0 * math.pi * self.b)),)
        )

    def shifted_down(self, delta: float) -> "LogRemainingBarrier":
        return replace(self, a=self.a - delta)


@dataclass(frozen=True)
class HermiteBarrier(_BarrierBase):
    """g(t) = a - sqrt(horizon - t) x(t) where x(t) is the largest root of
    He_{n-1}(x) exp(-x^2/2) = (horizon - t)^(n/2) / b.

    n = 1 reduces to the log-remaining family with its b replaced by b^2.
    """

    a: float
    b: float
    n: int
    horizon: float
    family = "hermite"

    def __post_init__(self):
        _check_horizon(self.horizon)
        if self.n < 1:
            raise ConditionError(f"hermite barrier needs n >= 1, got {self.n}")
        zn = hermite_largest_zero(self.n)
        b_min = (
            math.exp(0.5 * zn * zn) * self.horizon ** (self.n / 2.0)
            / hermite_eval(self.n - 1, zn)
        )
        if self.b < b_min * (1.0 - 1e-12):
            raise ConditionError(
                f"hermite barrier needs b >= {b_min:.6g} for n={self.n}, "
                f"horizon={self.horizon}; got {self.b}"
            )

    @cached_property
    def largest_critical(self) -> float:
        return hermite_largest_zero(self.n)

    def profile(self, t: float) -> float:
        """The scaled offset x(t); g(t) = a - sqrt(horizon - t) * x(t)."""
        self._check_time(t)
        if t == self.horizon:
            raise DomainError("profile undefined at the horizon")
        rhs = (self.horizon - t) ** (self.n / 2.0) / self.b
        return hermite_gauss_largest_root(self.n, rhs)

    def value(self, t: float) -> float:
        self._check_time(t)
        rem = self.horizon - t
        if rem == 0.0:
            return self.a
        return self.a - math.sqrt(rem) * self.profile(t)

    def measure(self) -> ImageMeasure:
        return ImageMeasure(
            self.horizon, (DiracAtom(self.a, self.n, SQRT_TWO_PI * self.b),)
        )

    def shifted_down(self, delta: float) -> "HermiteBarrier":
        return replace(self, a=self.a - delta)


@dataclass(frozen=True)
class ImagesLambertBarrier(_BarrierBase):
    """Lambert-W barrier for the image method: f(t) = a + t y(t) / a with
    y(t) the lower-branch solution of y e^y = -(a/b) exp(-a^2 / (2t)).

    Starts at f(0) = a/2 and ends at f(horizon) = a + horizon*y(horizon)/a.
    Needs a > 0 and b >= a exp(1 - a^2/(2 horizon)) so the Lambert argument
    stays above the branch point on (0, horizon].
    """

    a: float
    b: float
    horizon: float
    family = "images-lambert"

    def __post_init__(self):
        _check_horizon(self.horizon)
        if not self.a > 0.0:
            raise ConditionError(f"images barrier needs a > 0, got {self.a}")
        b_min = self.a * math.exp(1.0 - self.a * self.a / (2.0 * self.horizon))
        if self.b < b_min * (1.0 - 1e-12):
            raise ConditionError(
                f"images barrier needs b >= {b_min:.6g}, got {self.b}"
            )

    def lambert_root(self, t: float) -> float:
        """y(t) <= -1 solving y e^y = -(a/b) exp(-a^2/(2t))."""
        if not 0.0 < t <= self.horizon:
            raise DomainError(f"time {t} outside (0, {self.horizon}]")
        # log of minus the argument; solve y + ln(-y) = L in log space when
        # the argument itself would underflow
        L = math.log(self.a / self.b) - self.a * self.a / (2.0 * t)
        if L > -700.0:
            return lambert_w(-math.exp(L), branch="lower")
        y = L - math.log(-L)
        for _ in range(8):
            step = (y + math.log(-y) - L) / (1.0 + 1.0 / y)
            y -= step
            if abs(step) <= 1e-15 * abs(y):
                break
        return y

    def value(self, t: float) -> float:
        if t < 0.0 or t > self.horizon:
            raise DomainError(f"time {t} outside [0, {self.horizon}]")
        if t < 1e-12:
            return 0.5 * self.a
        return self.a + t * self.lambert_root(t) / self.a

    def measure(self) -> ImageMeasure:
        return ImageMeasure(self.horizon, (DiracAtom(self.a, 1, self.b),))


@dataclass(frozen=True)
class TimeInvertedBarrier:
    """ghat(t) = (t / T) g(T^2 / t) on [T, inf) for a one-sided base g."""

    base: object
    family = "time-inverted"

    def __post_init__(self):
        if isinstance(self.base, (TimeInvertedBarrier, TwoSidedConstantBarrier,
                                  TwoSidedCurvedBarrier, ImagesLambertBarrier)):
            raise ConditionError("time inversion needs a one-sided base barrier")

    @property
    def horizon(self) -> float:
        return self.base.horizon

    @property
    def a(self) -> float:
        return getattr(self.base, "a")

    @property
    def b(self) -> float:
        return getattr(self.base, "b")

    def value(self, t: float) -> float:
        T = self.horizon
        if t < T:
            raise DomainError(f"time {t} below horizon {T} for inverted barrier")
        return (t / T) * self.base.value(T * T / t)

    def grid(self, ts) -> np.ndarray:
        ts = np.asarray(ts, dtype=float)
        T = self.horizon
        return (ts / T) * self.base.grid(T * T / ts)


def time_invert(spec):
    """Invert time about the horizon; an involution on one-sided barriers."""
    if isinstance(spec, TimeInvertedBarrier):
        return spec.base
    return TimeInvertedBarrier(spec)


# ---------------------------------------------------------------------------
# two-sided families
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TwoSidedConstantBarrier(_BarrierBase):
    """Constant corridor: upper level a, lower level b, b < a."""

    a: float
    b: float
    horizon: float
    family = "two-sided-constant"

    def __post_init__(self):
        _check_horizon(self.horizon)
        if not self.b < self.a:
            raise ConditionError(f"corridor needs b < a, got b={self.b}, a={self.a}")

    def value(self, t: float) -> tuple[float, float]:
        self._check_time(t)
        return (self.a, self.b)

    def upper_grid(self, ts) -> np.ndarray:
        return np.full(np.shape(ts), self.a, dtype=float)

    def lower_grid(self, ts) -> np.ndarray:
        return np.full(np.shape(ts), self.b, dtype=float)

    def image_atoms(self, tol: float = 1e-17) -> tuple[ImageMeasure, ImageMeasure]:
        """Truncated alternating image trains for the two sides.

        Atom j of the upper measure sits at a + j(a - b) with weight
        2(-1)^j, and mirrored for the lower one.  Truncated (at even pair
        count) once additional atoms cannot move any smoothed functional
        by more than tol.
        """
        width = self.a - self.b
        sT = math.sqrt(self.horizon)
        up, lo = [], []
        j = 0
        while True:
            w = 2.0 if j % 2 == 0 else -2.0
            up.append(DiracAtom(self.a + j * width, 0, w))
            lo.append(DiracAtom(self.b - j * width, 0, w))
            done = j >= 1 and 2.0 * norm_cdf(-(j * width) / sT) < tol
            if done and j % 2 == 1:
                break
            if j > 2000:
                break
            j += 1
        return (
            ImageMeasure(self.horizon, tuple(up)),
            ImageMeasure(self.horizon, tuple(lo)),
        )

    def shifted_down(self, delta: float) -> "TwoSidedConstantBarrier":
        return replace(self, a=self.a - delta, b=self.b - delta)


@dataclass(frozen=True)
class TwoSidedCurvedBarrier(_BarrierBase):
    """Corridor from a single-atom pair: the upper level g0(t) is the
    largest w with N((w-a)/s) + N((b-w)/s) = c, s = sqrt(horizon - t),
    and the lower level is the mirror g1 = a + b - g0.

    Needs b < a and 2 N((b-a)/(2 sqrt(horizon))) < c < 1.
    """

    a: float
    b: float
    c: float
    horizon: float
    family = "two-sided-curved"

    def __post_init__(self):
        _check_horizon(self.horizon)
        if not self.b < self.a:
            raise ConditionError(f"corridor needs b < a, got b={self.b}, a={self.a}")
        floor = 2.0 * norm_cdf((self.b - self.a) / (2.0 * math.sqrt(self.horizon)))
        if not floor < self.c < 1.0:
            raise ConditionError(
                f"corridor level must satisfy {floor:.6g} < c < 1, got {self.c}"
            )

    def upper_level(self, t: float) -> float:
        self._check_time(t)
        s = math.sqrt(self.horizon - t)
        if s == 0.0:
            return self.a
        a, b, c = self.a, self.b, self.c
        mid = 0.5 * (a + b)

        def f(w):
            return norm_cdf((w - a) / s) + norm_cdf((b - w) / s) - c

        def df(w):
            return (norm_pdf((w - a) / s) - norm_pdf((b - w) / s)) / s

        hi = _expand_right(f, max(a, mid), s, target_below=False)
        return _newton_bracketed(f, df, mid, hi, tol=1e-13)

    def value(self, t: float) -> tuple[float, float]:
        g0 = self.upper_level(t)
        return (g0, self.a + self.b - g0)

    def upper_grid(self, ts) -> np.ndarray:
        ts = np.asarray(ts, dtype=float)
        return np.array([self.upper_level(float(t)) for t in np.ravel(ts)]).reshape(ts.shape)

    def lower_grid(self, ts) -> np.ndarray:
        return (self.a + self.b) - self.upper_grid(ts)

    def image_atoms(self) -> tuple[ImageMeasure, ImageMeasure]:
        w = 1.0 / self.c
        return (
            ImageMeasure(self.horizon, (DiracAtom(self.a, 0, w),)),
            ImageMeasure(self.horizon, (DiracAtom(self.b, 0, w),)),
        )

    def shifted_down(self, delta: float) -> "TwoSidedCurvedBarrier":
        return replace(self, a=self.a - delta, b=self.b - delta)


def _check_horizon(T: float):
    if not (isinstance(T, (int, float)) and T > 0.0 and math.isfinite(T)):
        raise ConditionError(f"horizon must be a positive finite number, got {T}")


ONE_SIDED = (LinearBarrier, SqrtRemainingBarrier, LogRemainingBarrier, HermiteBarrier)
TWO_SIDED = (TwoSidedConstantBarrier, TwoSidedCurvedBarrier)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

_SCHEMA = 1


def barrier_to_dict(spec) -> dict:
    params: dict = {}
    if isinstance(spec, TimeInvertedBarrier):
        if not isinstance(spec.base, SqrtRemainingBarrier):
            raise DomainError(
                "only sqrt-remaining bases serialize under the time-inverted tag"
            )
        params = {"a": spec.base.a, "b": spec.base.b}
    elif isinstance(spec, LogRemainingBarrier):
        params = {"a": spec.a, "b": spec.b}
        if spec.mirrored:
            params["mirrored"] = True
    elif isinstance(spec, HermiteBarrier):
        params = {"a": spec.a, "b": spec.b, "n": spec.n}
    elif isinstance(spec, TwoSidedCurvedBarrier):
        params = {"a": spec.a, "b": spec.b, "c": spec.c}
    else:
        params = {"a": spec.a, "b": spec.b}
    return {"schema": _SCHEMA, "family": spec.family, "params": params,
            "horizon": spec.horizon}


def barrier_from_dict(d: dict):
    if d.get("schema") != _SCHEMA:
        raise DomainError(f"unsupported barrier schema {d.get('schema')!r}")
    family = d.get("family")
    params = dict(d.get("params", {}))
    T = float(d["horizon"])
    try:
        if family == "linear":
            return LinearBarrier(float(params["a"]), float(params["b"]), T)
        if family == "sqrt-remaining":
            return SqrtRemainingBarrier(float(params["a"]), float(params["b"]), T)
        if family == "log-remaining":
            return LogRemainingBarrier(
                float(params["a"]), float(params["b"]), T,
                mirrored=bool(params.get("mirrored", False)),
            )
        if family == "hermite":
            return HermiteBarrier(float(params["a"]), float(params["b"]),
                                  int(params["n"]), T)
        if family == "time-inverted":
            return TimeInvertedBarrier(
                SqrtRemainingBarrier(float(params["a"]), float(params["b"]), T)
            )
        if family == "two-sided-constant":
            return TwoSidedConstantBarrier(float(params["a"]), float(params["b"]), T)
        if family == "two-sided-curved":
            return TwoSidedCurvedBarrier(float(params["a"]), float(params["b"]),
                                         float(params["c"]), T)
        if family == "images-lambert":
            return ImagesLambertBarrier(float(params["a"]), float(params["b"]), T)
    except KeyError as e:
        raise DomainError(f"missing parameter {e} for family {family!r}") from None
    raise DomainError(f"unknown barrier family {family!r}")
