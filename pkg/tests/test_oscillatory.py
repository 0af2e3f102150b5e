import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from narrowband.engine import apply_bilinear, gaussian
from narrowband.norms import lp_norm
from narrowband.oscillatory import (Phase, PhaseError, QuadratureResolutionError, duhamel_symbol,
                                    linear_example_norm, resonance_norm_bound, resonant_cut,
                                    time_integrated_symbol, truncated_resonance_pairing, truncated_symbol)
from narrowband.symbols import FrequencyGrid, disc_cutoff

GRID = FrequencyGrid(2.0, 64)


def constant_phase(c):
    return Phase(lambda x, y: c + 0 * x, lambda x, y: (0 * x, 0 * y), name="constant")


def duhamel_series(t, c, terms=30):
    """t * (exp(i t c) - 1) / (i t c), termwise for small t c."""
    z = 1j * t * c
    if abs(z) >= 1:
        return (cmath.exp(z) - 1) / (1j * c)
    total, term = 0j, 1.0 + 0j
    for k in range(terms):
        total += term
        term = term * z / (k + 2)
    return t * total


class TestDuhamel:
    def test_zero_time(self):
        sym = duhamel_symbol(Phase.circle(), 0.0, GRID)
        assert not np.any(sym.values)

    def test_negative_time(self):
        with pytest.raises(ValueError):
            duhamel_symbol(Phase.circle(), -1.0, GRID)

    def test_resonant_cells_equal_m_t(self):
        # phi = 2 xi eta vanishes exactly on the grid axes
        phase = Phase.dispersion([0, 0, 1])
        t = 3.5
        sym = duhamel_symbol(phase, t, GRID)
        m = disc_cutoff(GRID.points())
        xi, eta = GRID.mesh()
        zero = phase(xi, eta) == 0
        assert zero.sum() >= GRID.n
        assert np.allclose(np.asarray(sym.values)[zero], t * m[zero], rtol=0, atol=1e-15)

    @pytest.mark.parametrize("c", [0.0, 1e-12, 3e-9, 1e-8 / 2.0, 2e-8, 1e-3, 0.7, 40.0])
    def test_removable_singularity(self, c):
        t = 2.0
        sym = duhamel_symbol(constant_phase(c), t, GRID, base=1.0)
        assert np.asarray(sym.values)[5, 7] == pytest.approx(duhamel_series(t, c, 60), rel=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(st.floats(0.0, 50.0))
    def test_pointwise_bound(self, t):
        phase = Phase.circle()
        sym = duhamel_symbol(phase, t, GRID)
        xi, eta = GRID.mesh()
        phi = np.abs(phase(xi, eta))
        m = np.abs(disc_cutoff(GRID.points()))
        bound = m * np.minimum(t, 2.0 / np.where(phi > 0, phi, 1e-300))
        assert np.all(np.abs(np.asarray(sym.values)) <= bound * (1 + 1e-12) + 1e-15)

    @pytest.mark.parametrize("t0, t1", [(0.0, 1.0), (0.5, 2.0), (1.0, 7.25)])
    def test_time_additivity(self, t0, t1):
        phase = Phase.circle()
        grid = FrequencyGrid(2.0, 128)
        diff = np.asarray(duhamel_symbol(phase, t1, grid).values) - np.asarray(duhamel_symbol(phase, t0, grid).values)
        quad = time_integrated_symbol(phase, t0, t1, grid)
        assert np.max(np.abs(diff - quad)) <= 1e-8

    def test_quadrature_step_checked(self):
        with pytest.raises(QuadratureResolutionError) as info:
            time_integrated_symbol(Phase.circle(), 0.0, 1.0, GRID, step=1.0)
        assert info.value.required < 1.0


class TestPhase:
    def test_circle_gradient(self):
        assert Phase.circle().check_nondegenerate() == pytest.approx(2.0)

    def test_vanishing_gradient_rejected(self):
        phase = Phase(lambda x, y: x ** 2 + y ** 2, lambda x, y: (2 * x, 2 * y), name="cone")
        with pytest.raises(PhaseError):
            phase.check_nondegenerate()

    def test_resonant_cut_profile(self):
        phase = Phase.circle()
        cut = resonant_cut(phase, 0.25, GRID)
        xi, eta = GRID.mesh()
        phi = np.abs(phase(xi, eta))
        assert np.all(cut[phi <= 0.125] == 1.0)
        assert np.all(cut[phi >= 0.25] == 0.0)

    def test_truncated_width(self):
        sym = truncated_symbol(Phase.circle(), 0.2, grid=GRID)
        assert sym.epsilon == pytest.approx(0.1)
        assert sym.claimed_class == "M_eps"


class TestResonancePairing:
    grid = FrequencyGrid(2.0, 128)

    def inputs(self):
        n, L = self.grid.n, self.grid.half_width
        return gaussian(n, L, 4.0, modulation=0.3), gaussian(n, L, 4.0, center=1.0, modulation=0.6)

    def test_static_matches_duhamel(self):
        phase, eps = Phase.circle(), 0.25
        f, g = self.inputs()
        times = [0.5, 1.5, 4.0]
        res = truncated_resonance_pairing(phase, eps, times, f, g, (2, 2, 2), self.grid)
        base = disc_cutoff(self.grid.points()) * resonant_cut(phase, eps, self.grid)
        for t, value in zip(times, res.norms):
            direct = lp_norm(apply_bilinear(duhamel_symbol(phase, t, self.grid, base=base), f, g), 2)
            assert value == pytest.approx(direct, rel=1e-8)
        assert res.sup == max(res.norms)
        assert res.exponent == 2

    def test_callable_inputs_agree(self):
        phase, eps = Phase.circle(), 0.25
        f, g = self.inputs()
        a = truncated_resonance_pairing(phase, eps, [1.0, 2.0], f, g, (2, 2, 2), self.grid)
        b = truncated_resonance_pairing(phase, eps, [1.0, 2.0], lambda s: f, lambda s: g, (2, 2, 2), self.grid)
        assert np.allclose(a.norms, b.norms, rtol=1e-8)

    def test_zero_symbol(self):
        f, g = self.inputs()
        res = truncated_resonance_pairing(Phase.circle(), 0.25, [1.0], f, g, (2, 2, 2), self.grid, base=0.0)
        assert res.norms == [0.0]

    def test_coarse_step_rejected(self):
        f, g = self.inputs()
        with pytest.raises(QuadratureResolutionError):
            truncated_resonance_pairing(Phase.circle(), 0.25, [1.0], f, g, (2, 2, 2), self.grid, step=5.0)

    def test_uniform_when_time_matches_eps(self):
        # curvature regime at (2,2,2): rho = 1/2, so T = eps^-1/2 keeps the norm bounded
        grid = FrequencyGrid(2.0, 1024)
        vals = [resonance_norm_bound(Phase.circle(), e, e ** -0.5, (2, 2, 2), grid)
                for e in (2.0 ** -k for k in range(3, 7))]
        assert max(vals) / min(vals) <= 4.0


class TestLinearExample:
    def test_zero_time(self):
        assert linear_example_norm(0.0, 0.1) == 0.0

    @pytest.mark.parametrize("t, eps", [(1.0, 2.0 ** -6), (1.0, 0.03), (100.0, 2.0 ** -9), (0.01, 0.3)])
    def test_small_phase_value(self, t, eps):
        assert t * eps ** 2 <= 1e-3
        assert linear_example_norm(t, eps) == pytest.approx(t * math.sqrt(2 * eps), rel=1e-3)

    def test_slope_in_eps(self):
        eps = [2.0 ** -k for k in range(4, 9)]
        vals = [linear_example_norm(1.0, e) for e in eps]
        slope = np.polyfit(np.log(eps), np.log(vals), 1)[0]
        assert slope == pytest.approx(0.5, abs=0.02)

    @settings(max_examples=40, deadline=None)
    @given(st.floats(0.0, 200.0), st.floats(1e-3, 1.0), st.floats(1.0, 2.0), st.floats(1.0, 2.0))
    def test_monotone(self, t, eps, a, b):
        base = linear_example_norm(t, eps)
        assert linear_example_norm(t * a, eps) >= base * (1 - 1e-10)
        assert linear_example_norm(t, eps * b) >= base * (1 - 1e-10)

    def test_large_phase_saturates(self):
        # |1 - exp(i t xi^2)| <= 2 caps the integrand by 4 / xi^4 away from 0
        assert linear_example_norm(1e4, 1.0) < 1e4 * math.sqrt(2.0)
