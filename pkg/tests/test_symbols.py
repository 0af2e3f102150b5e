import math
import warnings

import numpy as np
import pytest

from narrowband.curves import Curve, arc_quadrature, normal_frame
from narrowband.symbols import (FrequencyGrid, GridResolutionError, Symbol, build_bochner_riesz,
                                build_convolved_measure_symbol, build_line_symbol,
                                build_singular_symbol, build_tube_symbol, ceilings_from,
                                disc_cutoff, max_layer_index, profile_line_mass, smooth_bump,
                                transition, tube_area, verify_class, whitney_layers)

EPS = [2.0 ** -k for k in range(3, 7)]


def test_bump_profile_shape():
    t = np.linspace(0, 1.5, 3001)
    b = smooth_bump(t)
    assert np.all(b[t <= 0.5] == 1.0)
    assert np.all(b[t >= 1.0] == 0.0)
    assert np.all(np.diff(b) <= 1e-15)
    # symmetric extension to the real line: mass 2*(1/2 + transition)
    assert 1.0 < profile_line_mass() < 2.0


def test_grid_validation():
    with pytest.raises(ValueError):
        FrequencyGrid(2.0, 100)
    with pytest.raises(ValueError):
        FrequencyGrid(1.0, 1024)
    with pytest.raises(GridResolutionError, match="n >= 2048"):
        FrequencyGrid(2.0, 1024).check_resolution(2.0 ** -7)


def test_tube_support_sandwich(circle, grid):
    for eps in (2.0 ** -3, 2.0 ** -5):
        sym = build_tube_symbol(circle, eps, grid)
        sym.check_invariants()
        pts = grid.points()
        nu = normal_frame(circle, pts.reshape(-1, 2), reach=math.inf).nu.reshape(grid.n, grid.n)
        rad = np.linalg.norm(pts, axis=-1)
        live = np.abs(sym.values) > 0
        assert np.all(nu[live] < 2 * eps)
        # the cutoff underflows to 0.0 within ~1e-3 of the unit circle
        inner = (nu < eps / 2) & (rad < 0.99)
        assert np.all(live[inner])


def test_tube_area_scales_like_eps(circle, grid):
    ratios = [tube_area(build_tube_symbol(circle, e, grid)) / e for e in EPS]
    assert max(ratios) / min(ratios) < 1.2


def test_tube_xi_derivative_stable_under_halving(circle):
    fine = FrequencyGrid(2.0, 2048)
    consts = [verify_class(build_tube_symbol(circle, e, fine)).derivative_constants[(1, 0)]
              for e in EPS[:3]]
    for a, b in zip(consts, consts[1:]):
        assert 1 / 1.5 <= b / a <= 1.5


def test_tube_commutes_with_rotation(grid):
    theta = math.pi / 6
    rot = np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])
    base = Curve.circle((0.0, 0.5), 0.5)
    turned = Curve.circle(tuple(rot @ np.array([0.0, 0.5])), 0.5)
    eps = 2.0 ** -4
    a = build_tube_symbol(base, eps, grid)
    b = build_tube_symbol(turned, eps, grid)
    back = grid.points() @ rot  # rows are R^-1 applied to each grid point
    assert np.max(np.abs(b.values - a.sampler(back))) <= 1e-3


def test_convolved_symbol_is_bounded_and_tangentially_smooth(circle, grid):
    sups, tangs = [], []
    for e in EPS:
        sym = build_convolved_measure_symbol(circle, e, grid)
        sym.check_invariants()
        sups.append(np.max(np.abs(sym.values)))
        tangs.append(verify_class(sym).tangential_constant)
    assert max(sups) <= 3.0
    assert max(tangs) / min(tangs) <= 2.0


def test_convolved_symbol_converges_to_arc_measure(circle, grid):
    def f(p):
        return np.exp(-((p[..., 0] - 0.2) ** 2 + (p[..., 1] - 0.3) ** 2))

    nodes, w = arc_quadrature(circle, 1 << 14)
    limit = np.sum(f(nodes) * disc_cutoff(nodes) * w)
    errors = []
    for e in EPS:
        sym = build_convolved_measure_symbol(circle, e, grid)
        approx = np.sum(sym.values.real * f(grid.points())) * grid.spacing ** 2 / (e * sym.meta["normal_mass"])
        errors.append(abs(approx - limit) / abs(limit))
    assert errors[-1] < 0.02
    assert max(errors) == errors[0]


def test_line_symbols(grid):
    eps = 2.0 ** -4
    deg = build_line_symbol(0.0, eps, grid)
    xi, eta = grid.mesh()
    outer = transition(np.abs(eta), 0.5, 1.0)
    sample = build_line_symbol(0.0, eps, grid).sampler
    assert np.max(np.abs(deg.values.real - smooth_bump(np.abs(xi) / eps) * sample(np.stack([0 * xi, eta], -1)))) < 1e-12
    assert deg.curve.params["lambda"] == 0.0
    assert build_line_symbol(1.0, eps, grid).claimed_class == "exact_line"
    assert np.all(np.abs(deg.values) <= 1.0 + 1e-15)
    assert outer.shape == xi.shape


def test_bochner_riesz_examples(grid):
    disc = {"kind": "disc", "radius": 0.9}
    sharp = build_bochner_riesz(disc, 0.0, grid)
    inside = np.linalg.norm(grid.points(), axis=-1) < 0.9
    assert np.array_equal(sharp.values.real, inside.astype(float))
    unit = build_bochner_riesz({"kind": "disc", "radius": 1.0}, 1.0, grid)
    centre = grid.n // 2
    assert unit.values[centre, centre].real == pytest.approx(1.0)
    with pytest.raises(ValueError):
        build_bochner_riesz({"kind": "disc", "radius": 1.5}, 1.0, grid)
    tri = {"kind": "polygon", "vertices": [[-0.5, -0.4], [0.6, -0.3], [0.0, 0.7]]}
    assert np.max(build_bochner_riesz(tri, 1.0, grid).values.real) > 0


@pytest.mark.parametrize("kappa", [0.0, 0.5, 1.0])
def test_whitney_layers(grid, kappa):
    assert max_layer_index(grid) == 5
    sym = build_bochner_riesz({"kind": "disc", "radius": 0.9}, kappa, grid)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        layers = whitney_layers(sym)
    assert len(layers) == 6
    total = sum(np.asarray(l.values) for l in layers)
    assert np.max(np.abs(total - sym.values)) <= 1e-10
    d = np.maximum(0.9 - np.linalg.norm(grid.points(), axis=-1), 0)
    for n, layer in enumerate(layers):
        assert np.max(np.abs(layer.values)) <= 2.0 ** (-kappa * n + 2)
        live = np.abs(layer.values) > 1e-12  # last layer also holds rounding residue
        if 0 < n < len(layers) - 1:
            assert np.all(d[live] >= 2.0 ** (-n - 1) - 1e-12)
        if n > 0:
            assert np.all(d[live] <= 2.0 ** (-n + 2))
        assert verify_class(layer).passed


def test_whitney_warns_when_resolution_runs_out(grid):
    sym = build_bochner_riesz({"kind": "disc", "radius": 0.9}, 0.0, grid)
    with pytest.warns(UserWarning, match="capped"):
        whitney_layers(sym, n_max=9)


def test_singular_symbol(circle, grid):
    ones = lambda p: np.ones(np.shape(p)[:-1])  # noqa: E731
    flat = build_singular_symbol(circle, 0.0, grid, cutoff=ones)
    assert np.all(flat.values == 1.0)
    half = build_singular_symbol(circle, 0.5, grid, cutoff=ones)
    # (0, 1/4) is a grid point at distance 1/4 from the circle
    i = int(round((0.0 + 2.0) / grid.spacing))
    j = int(round((0.25 + 2.0) / grid.spacing))
    assert half.values[i, j].real == pytest.approx(2.0, rel=1e-12)
    with pytest.raises(ValueError):
        build_singular_symbol(circle, 1.0, grid)


def test_singular_layer_sups_grow_like_power(circle, grid):
    alpha = 0.5
    sym = build_singular_symbol(circle, alpha, grid)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        layers = whitney_layers(sym)
    sups = [np.max(np.abs(l.values)) for l in layers]
    for n in range(1, len(sups) - 1):
        assert sups[n] / 2.0 ** (n * alpha) == pytest.approx(sups[1] / 2.0 ** alpha, rel=0.25)


def test_verify_class_examples(circle, grid):
    tube = build_tube_symbol(circle, 2.0 ** -4, grid)
    assert verify_class(tube).passed
    report = verify_class(tube)
    assert report.support_excess <= 2 * tube.epsilon


def test_rippled_tube_fails_tangential_ceiling(grid):
    # inside B(0, 0.9) the disc cutoff is 1, so only the ripple moves tangentially
    small = Curve.circle((0.0, 0.4), 0.4)
    ceil = ceilings_from(verify_class(build_convolved_measure_symbol(small, 2.0 ** -3, grid)))
    tang = [verify_class(build_tube_symbol(small, e, grid, ripple=0.5)).tangential_constant for e in EPS]
    assert tang[-1] / tang[0] > 4
    assert tang[-1] > ceil["tangential"]
    plain = verify_class(build_tube_symbol(small, 2.0 ** -6, grid))
    assert plain.tangential_constant <= ceil["tangential"]


def test_symbol_binary_roundtrip(circle, tmp_path):
    g = FrequencyGrid(2.0, 64)
    sym = build_tube_symbol(circle, 0.25, g)
    path = tmp_path / "tube.sym"
    sym.dump(path)
    again = Symbol.load(path)
    assert np.array_equal(again.values, sym.values)
    assert again.epsilon == sym.epsilon and again.claimed_class == "M_eps"
    assert again.curve.params == circle.params
    head = path.read_bytes().split(b"\n", 1)[0]
    assert b'"n": 64' in head
