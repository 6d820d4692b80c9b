import numpy as np
import pytest
from hypothesis import given, strategies as st

from exterior_spectra.fields import (BallBump, BallScaledCoefficient, ConstantCoefficient,
                                     ConstantPotential, EllipticFields, OrderingError, RadialPower,
                                     RadialWell, ZeroPotential, check_bounded, check_ordering,
                                     evaluate_potential, identity)

PTS = np.random.default_rng(3).uniform(-4, 4, size=(400, 2))
BALL = ((1.5, 0.0), 0.3)


def test_zero_potential():
    assert evaluate_potential(ZeroPotential(), (2.0, 3.0)) == 0.0


def test_radial_power_value():
    V = RadialPower(1.0, 0.5, cutoff=1.0)
    assert evaluate_potential(V, (4.0, 0.0)) == pytest.approx(-0.125, rel=1e-15)
    assert evaluate_potential(V, (0.0, -4.0)) == pytest.approx(-4.0 ** -1.5, rel=1e-15)


def test_radial_power_capped_continuously():
    V = RadialPower(2.0, 0.5, cutoff=1.5)
    inside = V.values(np.array([[0.2, 0.0], [1.0, 0.0], [1.5, 0.0]]))
    assert np.all(inside == inside[-1])
    assert V.of_radius(np.array([1.5 + 1e-9]))[0] == pytest.approx(inside[-1], rel=1e-8)


@pytest.mark.parametrize("x, v", [((1.5, 0.0), -8.0), ((3.0, 0.0), 0.0), ((0.0, 1.2), -8.0), ((0.5, 0.0), 0.0)])
def test_radial_well_indicator(x, v):
    assert evaluate_potential(RadialWell(8.0, 1.0, 2.0), x) == v


def test_sum_and_breakpoints():
    V = RadialWell(8.0, 1.0, 2.0) + BallBump((1.5, 0.0), 0.3, 1.0)
    assert evaluate_potential(V, (1.5, 0.0)) == -7.0
    assert V.breakpoints() == (1.0, 2.0)
    assert not V.radial
    assert (RadialWell(8.0, 1.0, 2.0) + 2.0).radial


@pytest.mark.parametrize("bad", [dict(alpha=-1.0, eps=0.5), dict(alpha=1.0, eps=0.0)])
def test_radial_power_validation(bad):
    with pytest.raises(ValueError):
        RadialPower(**bad)


def test_check_bounded_rejects_nonfinite():
    class Blowup(ZeroPotential):
        def values(self, pts):
            with np.errstate(divide="ignore"):
                return 1.0 / np.hypot(pts[:, 0], pts[:, 1])
    with pytest.raises(ValueError):
        check_bounded(Blowup(), np.array([[0.0, 0.0], [1.0, 0.0]]))


def test_coefficient_symmetry_and_ellipticity():
    with pytest.raises(ValueError):
        ConstantCoefficient(1.0, 2.0, 1.0)  # indefinite
    c = ConstantCoefficient(2.0, 0.5, 1.0)
    assert c.ellipticity_constant == pytest.approx(np.linalg.eigvalsh(c.base)[0])
    a = c.matrices(PTS)
    assert np.array_equal(a, a.transpose(0, 2, 1))


def test_equal_fields_are_ordered_without_strict_ball():
    f = EllipticFields(identity(), ZeroPotential())
    w = check_ordering(f, f, PTS)
    assert w.pointwise_psd and w.pointwise_scalar and w.strict_ball is None


def test_potential_bump_gives_condition_a():
    f1 = EllipticFields(potential=RadialWell(8.0, 1.0, 2.0))
    f2 = EllipticFields(potential=RadialWell(8.0, 1.0, 2.0) + BallBump(*BALL, 1.0))
    w = check_ordering(f1, f2, PTS, BALL)
    assert w.pointwise_psd and w.pointwise_scalar
    assert w.strict_condition == "a" and w.n_ball_points > 0


def test_matrix_bump_gives_condition_b():
    f1 = EllipticFields()
    f2 = EllipticFields(coefficient=BallScaledCoefficient(identity(), *BALL, 1.0))
    w = check_ordering(f1, f2, PTS, BALL)
    assert w.strict_condition == "b"


def test_strict_ball_failure_reports_point():
    f1 = EllipticFields(potential=BallBump((1.5, 0.0), 0.1, 1.0))
    f2 = EllipticFields(potential=BallBump((1.5, 0.0), 0.1, 2.0))
    # declared ball larger than the actual strict region
    with pytest.raises(OrderingError) as exc:
        check_ordering(f1, f2, PTS, ((1.5, 0.0), 1.0))
    assert exc.value.point is not None


def test_unordered_fields_detected():
    f1 = EllipticFields(coefficient=ConstantCoefficient(2.0, 0.0, 1.0))
    f2 = EllipticFields(coefficient=ConstantCoefficient(1.0, 0.0, 2.0))
    w = check_ordering(f1, f2, PTS)
    assert not w.pointwise_psd and w.pointwise_scalar


@given(st.floats(0.1, 5), st.floats(-0.9, 0.9), st.floats(0.1, 5), st.floats(0, 3), st.floats(-2, 2))
def test_self_ordering_always_holds(a11, rho, a22, shift, c):
    a12 = rho * np.sqrt(a11 * a22)
    f = EllipticFields(ConstantCoefficient(a11, a12, a22), ConstantPotential(c))
    w = check_ordering(f, f, PTS[:20])
    assert w.pointwise_psd and w.pointwise_scalar and w.strict_ball is None
    g = EllipticFields(ConstantCoefficient(a11 + shift, a12, a22 + shift), ConstantPotential(c + shift))
    assert check_ordering(f, g, PTS[:20]).pointwise_psd
