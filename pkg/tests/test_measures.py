"""Measure layer: smoothed functionals against quadrature, the
distributional derivative against finite differences in x, and the
serialization round trip."""

import json
import math

import pytest
from scipy.integrate import quad

from crossprob.errors import DomainError
from crossprob.measures import (
    DiracAtom,
    ExpComponent,
    IdentityReport,
    ImageMeasure,
    barrier_time_grid,
    images_condition_residual,
    verify_barrier_identity,
)
from crossprob.special import norm_cdf


def _quad_oracle(comp: ExpComponent, x: float, s: float) -> float:
    """Direct quadrature of weight * rate * e^{rate(v-lower)} N((x-v)/s)."""
    f = lambda v: (comp.weight * comp.rate
                   * math.exp(comp.rate * (v - comp.lower))
                   * norm_cdf((x - v) / s))
    hi = comp.upper
    if math.isinf(hi):
        # Gaussian factor kills the integrand past x + rate s^2 + 40 s
        hi = max(comp.lower, x + comp.rate * s * s) + 42.0 * s
    val, err = quad(f, comp.lower, hi, limit=300, epsabs=1e-14, epsrel=1e-12)
    assert err < 1e-8 * max(1.0, abs(val))
    return val


def test_atom_cdf_order0():
    m = ImageMeasure(1.0, (DiracAtom(0.5, 0, 2.0),))
    for x, t in ((0.5, 0.0), (1.2, 0.3), (-0.7, 0.96)):
        s = math.sqrt(1.0 - t)
        assert m.smoothed_cdf(x, t) == pytest.approx(
            2.0 * norm_cdf((x - 0.5) / s), abs=1e-16)


def test_atom_cdf_order1_frozen():
    # single first-order atom at 0: value at x=0, t=0 is N'(0)
    m = ImageMeasure(1.0, (DiracAtom(0.0, 1, 1.0),))
    assert m.smoothed_cdf(0.0, 0.0) == pytest.approx(0.3989422804014327, abs=1e-16)


@pytest.mark.parametrize("comp", [
    ExpComponent(1.0, 0.3, math.inf, 1.0),
    ExpComponent(2.5, -0.2, math.inf, 0.7),
    ExpComponent(-1.5, 0.0, math.inf, 2.0),
    ExpComponent(1.2, -1.0, 2.0, 1.3),
    ExpComponent(-0.8, -0.5, 1.5, -0.6),
])
def test_exp_component_cdf_matches_quadrature(comp):
    m = ImageMeasure(1.0, (), (comp,))
    for x, t in ((0.0, 0.0), (1.1, 0.4), (-0.9, 0.84), (2.3, 0.1)):
        s = math.sqrt(1.0 - t)
        assert m.smoothed_cdf(x, t) == pytest.approx(
            _quad_oracle(comp, x, s), rel=1e-9, abs=1e-12)


def test_derivative_matches_x_derivative():
    # pairing with the derivative measure equals d/dx of the pairing
    m = ImageMeasure(
        1.0,
        (DiracAtom(0.2, 0, 1.5), DiracAtom(-0.4, 2, 0.3)),
        (ExpComponent(1.1, 0.0, math.inf, 0.8),
         ExpComponent(-0.9, -1.0, 1.0, 1.2)),
    )
    d = m.derivative()
    h = 1e-6
    for x, t in ((0.0, 0.0), (0.7, 0.5), (-1.3, 0.2), (1.9, 0.9)):
        fd = (m.smoothed_cdf(x + h, t) - m.smoothed_cdf(x - h, t)) / (2 * h)
        assert d.smoothed_cdf(x, t) == pytest.approx(fd, rel=1e-7, abs=1e-9)


def test_derivative_boundary_atoms():
    # finite component differentiates to itself*rate plus endpoint deltas
    c = ExpComponent(2.0, 0.0, 1.0, 1.0)
    d = ImageMeasure(1.0, (), (c,)).derivative()
    locs = sorted(a.location for a in d.atoms)
    assert locs == [0.0, 1.0]
    w = {a.location: a.weight for a in d.atoms}
    assert w[0.0] == pytest.approx(2.0)
    assert w[1.0] == pytest.approx(-2.0 * math.exp(2.0))
    assert d.exp_components[0].weight == pytest.approx(2.0)


def test_sf_complements_cdf_for_finite_mass():
    m = ImageMeasure(
        1.0,
        (DiracAtom(0.3, 0, 1.2),),
        (ExpComponent(1.5, -0.5, 0.8, 0.6),),
    )
    mass = 1.2 + 0.6 * (math.exp(1.5 * 1.3) - 1.0)
    for x, t in ((0.1, 0.0), (-0.8, 0.6), (1.4, 0.3)):
        total = m.smoothed_cdf(x, t) + m.smoothed_sf(x, t)
        assert total == pytest.approx(mass, rel=1e-13)


def test_sf_for_derivative_atoms_is_negated_cdf():
    # constants integrate to zero against delta derivatives
    m = ImageMeasure(1.0, (DiracAtom(0.5, 1, 2.0), DiracAtom(-0.2, 3, 0.7)))
    for x, t in ((0.4, 0.0), (-1.0, 0.7)):
        assert m.smoothed_sf(x, t) == pytest.approx(-m.smoothed_cdf(x, t), abs=1e-15)


def test_time_domain_checked():
    m = ImageMeasure(2.0, (DiracAtom(0.0, 0, 1.0),))
    with pytest.raises(DomainError):
        m.smoothed_cdf(0.0, 2.0)
    with pytest.raises(DomainError):
        m.smoothed_cdf(0.0, -0.1)
    m.smoothed_cdf(0.0, 1.999999)


def test_measure_validation():
    with pytest.raises(DomainError):
        ImageMeasure(0.0, (DiracAtom(0.0, 0, 1.0),))
    with pytest.raises(DomainError):
        ImageMeasure(1.0)
    with pytest.raises(DomainError):
        DiracAtom(0.0, -1, 1.0)
    with pytest.raises(DomainError):
        ExpComponent(1.0, 0.5, 0.5, 1.0)


def test_with_horizon_and_support():
    m = ImageMeasure(1.0, (DiracAtom(0.5, 0, 1.0),),
                     (ExpComponent(1.0, -0.3, 2.0, 1.0),))
    m2 = m.with_horizon(4.0)
    assert m2.horizon == 4.0
    assert m2.atoms == m.atoms
    assert sorted(m.support_points()) == [-0.3, 0.5, 2.0]
    m3 = ImageMeasure(1.0, (), (ExpComponent(1.0, 0.0, math.inf, 1.0),))
    assert m3.support_points() == [0.0]


def test_serialization_round_trip():
    m = ImageMeasure(
        2.5,
        (DiracAtom(1.5, 2, -3.0), DiracAtom(0.0, 0, 2.0)),
        (ExpComponent(1.0, 1.5, math.inf, 1.0),),
    )
    assert ImageMeasure.from_dict(m.to_dict()) == m
    assert ImageMeasure.from_json(m.to_json()) == m
    # infinity encodes as null so the text stays strict JSON
    assert "null" in m.to_json()
    assert "Infinity" not in m.to_json()


def test_serialization_rejects_unknown_schema():
    m = ImageMeasure(1.0, (DiracAtom(0.0, 0, 1.0),))
    d = m.to_dict()
    d["schema"] = 99
    with pytest.raises(DomainError):
        ImageMeasure.from_dict(d)


def test_identity_report_logic():
    assert IdentityReport(1e-10, 0.5, 0.6, 1000).identity_holds
    assert not IdentityReport(1e-8, 0.5, 0.6, 1000).identity_holds
    # tail may grow to max(2*bulk, bulk + 0.25) before it counts as blow-up
    assert IdentityReport(0.0, 0.5, 0.9, 1000).bounded
    assert not IdentityReport(0.0, 0.5, 1.1, 1000).bounded
    assert IdentityReport(0.0, 0.05, 0.29, 1000).bounded
    assert not IdentityReport(0.0, 0.3, 5.0, 1000).bounded


def test_flat_barrier_identity_by_hand():
    # mu = 2 delta_a certifies the constant barrier: 2 N(0) = 1 at g(t)
    a = 0.7
    m = ImageMeasure(1.0, (DiracAtom(a, 0, 2.0),))
    rep = verify_barrier_identity(m, lambda t: a)
    assert rep.max_deviation < 1e-15
    assert rep.bounded and rep.identity_holds
    # wrong weight: identity off by a visible constant
    bad = ImageMeasure(1.0, (DiracAtom(a, 0, 1.5),))
    rep = verify_barrier_identity(bad, lambda t: a)
    assert rep.max_deviation == pytest.approx(0.25, abs=1e-12)
    assert not rep.identity_holds


def test_barrier_time_grid_bounds():
    g = barrier_time_grid(2.0, 100)
    assert len(g) == 100
    assert g[0] == pytest.approx(2e-6)
    assert g[-1] == pytest.approx(2.0 * (1.0 - 1e-6))
    assert all(b > a for a, b in zip(g, g[1:]))


def test_images_condition_domain():
    m = ImageMeasure(1.0, (DiracAtom(1.0, 1, 2.0),))
    with pytest.raises(DomainError):
        images_condition_residual(m, lambda t: 0.5, 0.0)
