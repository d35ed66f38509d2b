from __future__ import annotations

import numpy as np
import pytest

from oracles import KEYFRAMES
from scaleform.errors import ArgumentError
from scaleform.formation import ManeuverParams
from scaleform.schedule import ManeuverKeyframe, ManeuverSchedule, build_schedule


@pytest.fixture(scope="module")
def schedule():
    return build_schedule([ManeuverKeyframe.from_row(r) for r in KEYFRAMES])


def test_first_keyframe_values(schedule):
    p = schedule.evaluate(0.0).params
    assert np.allclose(p.s, [5, 2.5, 1])
    assert np.allclose(p.tau, [-47, 4, 0])


def test_interpolates_every_keyframe(schedule):
    for row in KEYFRAMES:
        z, _ = schedule.z(row[0])
        kf = ManeuverKeyframe.from_row(row)
        assert np.allclose(z, kf.params.as_vector(), atol=1e-12)


def test_row_round_trip():
    kf = ManeuverKeyframe.from_row(KEYFRAMES[6])
    assert kf.to_row() == [float(v) for v in KEYFRAMES[6]]
    with pytest.raises(ArgumentError):
        ManeuverKeyframe.from_row([1, 2, 3])


def test_derivative_matches_central_difference(schedule):
    h = 1e-5
    for t in np.linspace(0.3, 44.7, 37):
        zp, _ = schedule.z(t + h)
        zm, _ = schedule.z(t - h)
        _, dz = schedule.z(t)
        assert np.allclose((zp - zm) / (2 * h), dz, atol=1e-6)


def test_value_and_slope_continuous_at_knots(schedule):
    eps = 1e-9
    for t in [row[0] for row in KEYFRAMES[1:-1]]:
        a, da = schedule.z(t - eps)
        b, db = schedule.z(t + eps)
        assert np.allclose(a, b, atol=1e-7)
        assert np.allclose(da, db, atol=1e-6)


def test_natural_boundary(schedule):
    second = schedule._spline.derivative(2)
    assert np.allclose(second(0.0), 0.0, atol=1e-12)
    assert np.allclose(second(45.0), 0.0, atol=1e-12)


def test_clamped_outside_domain(schedule):
    z_lo, dz_lo = schedule.z(-3.0)
    z_hi, dz_hi = schedule.z(60.0)
    assert np.allclose(z_lo, schedule.z(0.0)[0])
    assert np.allclose(z_hi, schedule.z(45.0)[0])
    assert not dz_lo.any() and not dz_hi.any()


def test_equal_keyframes_give_constant_schedule():
    p = ManeuverParams((2, 3, 1), (1, -1, 0.5))
    sch = build_schedule([ManeuverKeyframe(0.0, p), ManeuverKeyframe(4.0, p)])
    z, dz = sch.z(np.linspace(-1, 5, 13))
    assert np.allclose(z, p.as_vector())
    assert np.allclose(dz, 0.0)
    assert sch.is_constant


def test_single_keyframe_constant():
    p = ManeuverParams((1, 2, 3), (4, 5, 6))
    sample = ManeuverSchedule.constant(p).evaluate(12.0)
    assert sample.params == p
    assert not sample.s_dot.any() and not sample.tau_dot.any()


@pytest.mark.parametrize("times", [[0, 0], [0, 2, 1], [0, float("nan")]])
def test_bad_times_rejected(times):
    frames = [ManeuverKeyframe(t, ManeuverParams()) for t in times]
    with pytest.raises(ArgumentError):
        build_schedule(frames)


def test_needs_two_keyframes():
    with pytest.raises(ArgumentError):
        build_schedule([ManeuverKeyframe(0.0, ManeuverParams())])


def test_vectorised_shape(schedule):
    z, dz = schedule.z(np.zeros((4, 5)))
    assert z.shape == (4, 5, 6) and dz.shape == (4, 5, 6)
