import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from narrowband.curves import (CharacteristicInterval, CharacteristicPoint, Curve, CurveError,
                               arc_quadrature, characteristic_points, curvature, extension_kernel,
                               is_nowhere_characteristic, kernel_envelope_slope, normal_frame)

SQ = math.sqrt(2) / 2


def _locations(points, axis):
    return sorted((round(p.location[0], 9), round(p.location[1], 9)) for p in points if p.axis == axis)


def test_circle_has_six_characteristic_points(circle):
    pts = characteristic_points(circle)
    assert len(pts) == 6
    assert all(isinstance(p, CharacteristicPoint) for p in pts)
    assert _locations(pts, "xi_axis") == [(0.0, 0.0), (0.0, 2.0)]
    assert _locations(pts, "eta_axis") == [(-1.0, 1.0), (1.0, 1.0)]
    expected = sorted([(round(SQ, 9), round(1 + SQ, 9)), (round(-SQ, 9), round(1 - SQ, 9))])
    assert _locations(pts, "antidiagonal") == expected


@pytest.mark.parametrize("tol", [1e-10, 1e-6, 1e-3, math.pi / 17])
def test_circle_count_is_tolerance_independent(circle, tol):
    assert len(characteristic_points(circle, tol=tol)) == 6


def test_generic_line_has_no_characteristic_points():
    assert characteristic_points(Curve.line(3.0)) == []
    assert is_nowhere_characteristic(Curve.line(3.0))


@pytest.mark.parametrize("lam,axis", [(0.0, "eta_axis"), (-1.0, "antidiagonal")])
def test_degenerate_line_is_one_flagged_interval(lam, axis):
    out = characteristic_points(Curve.line(lam))
    assert len(out) == 1
    assert isinstance(out[0], CharacteristicInterval)
    assert out[0].axis == axis
    assert (out[0].t_start, out[0].t_end) == (0.0, 1.0)


def test_tangent_is_parallel_at_reported_points(circle):
    # labels follow the circle table above: horizontal tangents at (0,0), (0,2) are xi_axis
    dirs = {"xi_axis": (1.0, 0.0), "eta_axis": (0.0, 1.0), "antidiagonal": (SQ, -SQ)}
    for p in characteristic_points(circle):
        tan = circle.tangent(p.t)
        assert abs(tan[0] * dirs[p.axis][1] - tan[1] * dirs[p.axis][0]) < 1e-9


def test_curvature_values(circle):
    ts = np.linspace(0, 1, 17)
    np.testing.assert_allclose(curvature(circle, ts), 1.0, atol=1e-12)
    assert np.allclose(curvature(Curve.line(0.7), ts), 0.0)
    parabola = Curve.graph([0.0, 0.0, 1.0], (-0.5, 0.5))
    assert curvature(parabola, 0.5) == pytest.approx(2.0, abs=1e-12)


def test_normal_frame_examples(circle):
    fr = normal_frame(circle, [[0.0, 3.0]], reach=math.inf)
    assert fr.nu[0] == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(fr.grad_nu[0], [0.0, 1.0], atol=1e-12)
    on = normal_frame(circle, circle.point(np.array([0.1, 0.37])))
    np.testing.assert_allclose(on.nu, 0.0, atol=1e-12)


def test_normal_frame_matches_dense_sampling(circle, rng):
    parabola = Curve.graph([0.1, -0.2, 1.0, 0.3], (-0.6, 0.5))
    dense = np.linspace(0.0, 1.0, 1_000_001)
    for curve in (circle, parabola):
        samples = curve.point(dense)
        reach = curve.default_reach()
        base = curve.point(rng.uniform(0.05, 0.95, 20))
        pts = base + rng.normal(size=(20, 2)) * 0.3 * reach
        fr = normal_frame(curve, pts, reach=math.inf)
        brute = np.array([np.min(np.linalg.norm(samples - p, axis=1)) for p in pts])
        np.testing.assert_allclose(fr.nu, brute, atol=1e-6)
        np.testing.assert_allclose(np.linalg.norm(pts - fr.foot, axis=1), fr.nu, atol=1e-12)


def test_normal_frame_rejects_points_beyond_reach(circle):
    with pytest.raises(CurveError, match="ambiguous|reach"):
        normal_frame(circle, [[0.0, 1.0]])


@settings(max_examples=60, deadline=None)
@given(st.floats(-3, 3), st.floats(-2, 4))
def test_frame_is_orthonormal(x, y):
    circle = Curve.circle((0.0, 1.0), 1.0)
    if abs(math.hypot(x, y - 1.0)) < 1e-3:
        return
    fr = normal_frame(circle, [[x, y]], reach=math.inf)
    g, tau = fr.grad_nu[0], fr.tangential[0]
    assert abs(np.linalg.norm(g) - 1) < 1e-10
    assert abs(np.linalg.norm(tau) - 1) < 1e-10
    assert abs(np.dot(g, tau)) < 1e-10


def test_arc_quadrature_lengths(circle):
    _, w = arc_quadrature(circle, 4096)
    assert np.all(w > 0)
    assert abs(w.sum() - 2 * math.pi) < 1e-6
    seg = Curve.graph([0.0], (-1.0, 1.0))
    assert arc_quadrature(seg, 64)[1].sum() == pytest.approx(2.0, abs=1e-12)


def test_arc_quadrature_second_order():
    # A quarter-ellipse-like graph: not periodic, so the composite rule is genuinely O(n^-2).
    curve = Curve.graph([0.0, 0.3, 1.0, -0.4], (-0.7, 0.9))

    def integral(n):
        nodes, w = arc_quadrature(curve, n)
        return np.sum(nodes[:, 0] ** 2 * w)

    ref = integral(1 << 16)
    ratios = [abs(integral(n) - ref) / abs(integral(2 * n) - ref) for n in (64, 128, 256)]
    for r in ratios:
        assert 3.6 < r < 4.4


def test_extension_kernel_closed_forms(circle):
    assert extension_kernel(circle, [[0.0, 0.0]])[0] == pytest.approx(2 * math.pi, abs=1e-9)
    seg = Curve.graph([0.0], (-1.0, 1.0))
    xs = np.array([0.5, 3.0, 17.0, 40.0])
    k = extension_kernel(seg, np.stack([xs, 0 * xs], axis=1), n=1 << 15)
    np.testing.assert_allclose(k, 2 * np.sin(xs) / xs, rtol=1e-6, atol=1e-9)


def test_extension_kernel_is_conjugate_symmetric(circle, rng):
    xs = rng.uniform(-30, 30, size=(25, 2))
    np.testing.assert_allclose(extension_kernel(circle, -xs), np.conj(extension_kernel(circle, xs)),
                               atol=1e-10)


def test_extension_kernel_demands_resolution(circle):
    with pytest.raises(ValueError, match="need at least"):
        extension_kernel(circle, [[300.0, 0.0]], n=64)


def test_kernel_decay_rates(circle):
    assert kernel_envelope_slope(circle, (1.0, 2.0)) == pytest.approx(-0.5, abs=0.1)
    seg = Curve.line(1.0)
    assert kernel_envelope_slope(seg, (1.0, -1.0)) == pytest.approx(0.0, abs=0.05)


def test_curve_json_roundtrip_and_validation(circle):
    again = Curve.from_json(circle.to_json())
    assert again.kind == "circle" and again.params == circle.params
    with pytest.raises(CurveError):
        Curve.from_dict({"kind": "spiral"})
    with pytest.raises(CurveError):
        Curve.circle((0, 0), 0.0)
