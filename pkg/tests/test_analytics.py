"""Closed-form layer: frozen reference values, refusal behavior, the
last-exceedance and last-touch distributions, and quadrature consistency
between each CDF and its density.

Reference values were computed from the closed displays with
scipy.special.ndtr and from bisection/image-expansion oracles; see the
inline notes.
"""

import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import ndtr

from crossprob.analytics import (
    KINDS,
    crossing_prob,
    density_curve,
    hitting_cdf_inverted,
    hitting_pdf_inverted,
    images_crossing,
    images_hitting_pdf,
    lambda_cdf,
    lambda_pdf,
    sigma_cdf,
    sigma_pdf,
    sigma_pdf_via_measure,
    two_sided_sigma_cdf,
    two_sided_sigma_pdf,
)
from crossprob.barriers import (
    HermiteBarrier,
    ImagesLambertBarrier,
    LinearBarrier,
    LogRemainingBarrier,
    SqrtRemainingBarrier,
    TimeInvertedBarrier,
    TwoSidedConstantBarrier,
    TwoSidedCurvedBarrier,
    time_invert,
)
from crossprob.errors import DomainError

E = math.e

LINEAR = LinearBarrier(1.0, 0.5, 1.0)
FLAT = LinearBarrier(1.0, 0.0, 1.0)
SQRT = SqrtRemainingBarrier(1.0, 1.0, 1.0)
LOG = LogRemainingBarrier(1.5, E, 1.0)
HERM3 = HermiteBarrier(3.0, 7.0, 3, 2.0)
CORRIDOR = TwoSidedConstantBarrier(1.0, -1.0, 1.0)
CURVED = TwoSidedCurvedBarrier(1.0, -1.0, 0.5, 1.0)
IMAGES = ImagesLambertBarrier(1.0, 2.0, 1.0)
INVERTED = TimeInvertedBarrier(SQRT)

ONE_SIDED = [LINEAR, FLAT, SQRT, LOG, HERM3]


# -- crossing probabilities ---------------------------------------------------


def test_crossing_flat_reflection():
    assert crossing_prob(FLAT).probability == pytest.approx(
        0.31731050786291415, abs=1e-14)


def test_crossing_linear_display():
    # N(-(a+bT)/sqrt(T)) + e^{-2ab} N((bT-a)/sqrt(T))
    ref = ndtr(-1.5) + math.exp(-1.0) * ndtr(-0.5)
    assert crossing_prob(LINEAR).probability == pytest.approx(ref, abs=1e-15)


def test_crossing_sqrt_display():
    assert crossing_prob(SQRT).probability == pytest.approx(
        0.18857341734506025, abs=1e-14)


def test_crossing_log_display():
    assert crossing_prob(LOG).probability == pytest.approx(
        0.53526142851899028, abs=1e-14)


def test_crossing_hermite_equals_measure_pairing():
    res = crossing_prob(HERM3)
    assert res.conditions_met
    pairing = HERM3.measure().smoothed_cdf(0.0, 0.0)
    assert res.probability == pytest.approx(pairing, rel=1e-12)
    assert 0.0 < res.probability < 1.0


def test_crossing_corridor_frozen():
    # image-expansion oracle (independent alternating-series code)
    assert crossing_prob(CORRIDOR).probability == pytest.approx(
        0.62922257020047612, abs=1e-10)


def test_crossing_curved_display():
    ref = (ndtr(-1.0) + ndtr(-1.0)) / 0.5
    assert crossing_prob(CURVED).probability == pytest.approx(ref, abs=1e-14)


def test_crossing_images_frozen():
    assert images_crossing(IMAGES).probability == pytest.approx(
        0.94592460945991652, abs=1e-12)


def test_crossing_inverted_equals_base():
    assert crossing_prob(INVERTED).probability == crossing_prob(SQRT).probability


def test_crossing_start_shift():
    shifted = crossing_prob(LINEAR, start=0.3).probability
    rebased = crossing_prob(LinearBarrier(0.7, 0.5, 1.0)).probability
    assert shifted == pytest.approx(rebased, abs=1e-16)


# -- refusals -----------------------------------------------------------------


def test_refusal_hermite_above_one():
    res = crossing_prob(HermiteBarrier(2.0, 10.0, 2, 1.0))
    assert res.probability is None
    assert not res.conditions_met
    assert any("<= 1" in text for text in res.failed())


def test_refusal_log_start_above_barrier():
    res = crossing_prob(LogRemainingBarrier(0.5, E, 1.0))
    assert res.probability is None
    assert any("sqrt(T*ln(b/T))" in text for text in res.failed())


def test_refusal_mirrored_log():
    res = crossing_prob(LogRemainingBarrier(1.5, E, 1.0, mirrored=True))
    assert res.probability is None
    assert any("bounded" in text for text in res.failed())


def test_refusal_start_at_or_above_barrier():
    assert crossing_prob(LinearBarrier(-0.5, 1.0, 1.0)).probability is None
    assert crossing_prob(SqrtRemainingBarrier(-2.0, 1.0, 1.0)).probability is None
    assert crossing_prob(CORRIDOR, start=1.5).probability is None
    assert crossing_prob(CORRIDOR, start=-1.0).probability is None


def test_refusal_images_probe_and_start():
    assert images_crossing(IMAGES, probe=1.5).probability is None
    assert images_crossing(IMAGES, probe=0.0).probability is None
    assert images_crossing(IMAGES, start=0.2).probability is None
    assert crossing_prob(INVERTED, start=0.1).probability is None


# -- last-exceedance distribution --------------------------------------------


def test_sigma_cdf_limits():
    for bar in (LINEAR, SQRT, LOG):
        p = crossing_prob(bar).probability
        assert sigma_cdf(bar, 1e-9) == pytest.approx(1.0 - p, abs=1e-8)
        gT = bar.value(bar.horizon)
        assert sigma_cdf(bar, bar.horizon) == pytest.approx(
            ndtr(gT / math.sqrt(bar.horizon)), abs=1e-13)


def test_sigma_cdf_monotone_all_families():
    ts = np.linspace(1e-6, 1.0, 1000)
    for bar in ONE_SIDED:
        T = bar.horizon
        vals = [sigma_cdf(bar, float(t) * T) for t in ts]
        assert all(b >= a - 1e-13 for a, b in zip(vals, vals[1:]))
    for bar in (CORRIDOR, CURVED):
        vals = [two_sided_sigma_cdf(bar, float(t)) for t in ts]
        assert all(b >= a - 1e-13 for a, b in zip(vals, vals[1:]))
    tinv = np.linspace(1.0, 100.0, 1000)
    vals = [hitting_cdf_inverted(INVERTED, float(t)) for t in tinv]
    assert all(b >= a - 1e-13 for a, b in zip(vals, vals[1:]))


def test_sigma_pdf_display_matches_generic_pairing():
    for bar in ONE_SIDED:
        for frac in (0.13, 0.5, 0.92):
            t = frac * bar.horizon
            assert sigma_pdf(bar, t) == pytest.approx(
                sigma_pdf_via_measure(bar, t), rel=1e-11, abs=1e-14)


def test_sigma_domain_errors():
    with pytest.raises(DomainError):
        sigma_cdf(LINEAR, 0.0)
    with pytest.raises(DomainError):
        sigma_cdf(LINEAR, 1.0 + 1e-9)
    with pytest.raises(DomainError):
        sigma_cdf(CORRIDOR, 0.5)    # two-sided has its own entry point


# -- last-touch distribution --------------------------------------------------


def test_lambda_arcsine_law():
    zero = LinearBarrier(0.0, 0.0, 1.0)
    zero_sqrt = SqrtRemainingBarrier(0.0, 0.0, 1.0)
    for t in np.linspace(0.01, 0.99, 99):
        t = float(t)
        ref_cdf = (2.0 / math.pi) * math.asin(math.sqrt(t))
        ref_pdf = 1.0 / (math.pi * math.sqrt(t * (1.0 - t)))
        for bar in (zero, zero_sqrt):
            assert lambda_cdf(bar, t) == pytest.approx(ref_cdf, abs=1e-13)
            assert lambda_pdf(bar, t) == pytest.approx(ref_pdf, abs=1e-13)


def test_lambda_cdf_reaches_one_at_horizon():
    for bar in (LINEAR, SQRT):
        assert lambda_cdf(bar, bar.horizon) == pytest.approx(1.0, abs=1e-15)


def test_lambda_dominates_sigma():
    # {sigma <= t} = {lambda <= t, end below barrier} is the smaller event
    for bar in (LINEAR, SQRT):
        for t in (0.2, 0.6, 0.95):
            assert lambda_cdf(bar, t) >= sigma_cdf(bar, t) - 1e-15


def test_lambda_needs_mirrorable_family():
    with pytest.raises(DomainError):
        lambda_cdf(LOG, 0.5)


# -- time-inverted hitting ----------------------------------------------------


def test_inverted_cdf_relation():
    for t in (1.0, 1.5, 3.0, 20.0):
        assert hitting_cdf_inverted(INVERTED, t) == pytest.approx(
            1.0 - sigma_cdf(SQRT, 1.0 / t), abs=1e-15)
    with pytest.raises(DomainError):
        hitting_cdf_inverted(INVERTED, 0.999)


def test_inverted_total_probability():
    # the inverted barrier is eventually hit exactly as often as the base
    lim = hitting_cdf_inverted(INVERTED, 100.0)
    assert lim == pytest.approx(crossing_prob(SQRT).probability, abs=1e-12)


# -- two-sided ----------------------------------------------------------------


def test_two_sided_cdf_at_horizon_is_inside_mass():
    # left limit at the horizon: probability the endpoint is inside
    ref = ndtr(1.0) - ndtr(-1.0)
    assert two_sided_sigma_cdf(CORRIDOR, 1.0) == pytest.approx(ref, abs=1e-13)
    assert two_sided_sigma_cdf(CURVED, 1.0) == pytest.approx(ref, abs=1e-13)


def test_two_sided_rejects_one_sided():
    with pytest.raises(DomainError):
        two_sided_sigma_cdf(LINEAR, 0.5)


# -- quadrature consistency ---------------------------------------------------


@pytest.mark.parametrize("bar", [LINEAR, SQRT], ids=lambda b: b.family)
def test_sigma_density_integrates_to_cdf(bar):
    lo, hi = 0.05, 0.95
    val, err = quad(lambda t: sigma_pdf(bar, t), lo, hi, limit=200)
    assert err < 1e-7
    assert val == pytest.approx(sigma_cdf(bar, hi) - sigma_cdf(bar, lo), abs=1e-9)


def test_two_sided_density_integrates_to_cdf():
    lo, hi = 0.05, 0.95
    for bar in (CORRIDOR, CURVED):
        val, err = quad(lambda t: two_sided_sigma_pdf(bar, t), lo, hi, limit=200)
        assert err < 1e-7
        assert val == pytest.approx(
            two_sided_sigma_cdf(bar, hi) - two_sided_sigma_cdf(bar, lo), abs=1e-9)


def test_images_density_integrates_to_crossing():
    lo, hi = 0.05, 1.0
    val, err = quad(lambda t: images_hitting_pdf(IMAGES, t), lo, hi, limit=200)
    assert err < 1e-7
    ref = (images_crossing(IMAGES).probability
           - images_crossing(IMAGES, probe=lo).probability)
    assert val == pytest.approx(ref, abs=1e-9)


def test_inverted_density_integrates_to_cdf():
    val, err = quad(lambda t: hitting_pdf_inverted(INVERTED, t), 1.0, 6.0,
                    limit=200)
    assert err < 1e-7
    ref = hitting_cdf_inverted(INVERTED, 6.0) - hitting_cdf_inverted(INVERTED, 1.0)
    assert val == pytest.approx(ref, abs=1e-9)


# -- curve tabulation ---------------------------------------------------------


def test_density_curve_sigma():
    curve = density_curve(SQRT, "sigma", n=64)
    assert curve.kind == "sigma"
    assert len(curve.grid) == len(curve.cdf) == len(curve.pdf) == 64
    assert curve.grid[0] >= 1e-10 and curve.grid[-1] <= 1.0
    k = 40
    t = float(curve.grid[k])
    assert curve.cdf[k] == pytest.approx(sigma_cdf(SQRT, t), abs=1e-15)
    assert curve.pdf[k] == pytest.approx(sigma_pdf(SQRT, t), abs=1e-15)


def test_density_curve_kinds_and_windows():
    assert set(KINDS) == {"sigma", "lambda", "hitting_inverted", "hitting_images"}
    lam = density_curve(SQRT, "lambda", n=33)
    assert len(lam.grid) == 33
    inv = density_curve(INVERTED, "hitting_inverted", n=16)
    assert inv.grid[0] >= 1.0
    assert inv.grid[-1] <= 100.0
    img = density_curve(IMAGES, "hitting_images", n=16)
    assert img.grid[-1] <= 1.0
    two = density_curve(CORRIDOR, "sigma", n=16)
    assert two.cdf[-1] <= 1.0
    with pytest.raises(DomainError):
        density_curve(SQRT, "first-passage", n=16)
    with pytest.raises(DomainError):
        density_curve(SQRT, "sigma", n=1)
