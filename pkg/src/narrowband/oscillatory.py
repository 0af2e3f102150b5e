"""Oscillatory bilinear symbols from dispersive equations.

A phase phi(xi, eta) produces the time-integrated (Duhamel) symbol
m * (exp(i t phi) - 1) / (i phi); cutting it to the resonant set |phi| <= eps
gives a narrow-band symbol around the zero set of phi.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

from .curves import Curve
from .engine import GridFunction, output_spectrum
from .norms import LebesgueTriple, best_lower_bound, lp_norm, conjugate
from .symbols import FrequencyGrid, Symbol, disc_cutoff, smooth_bump

SERIES_TERMS = 4


class PhaseError(ValueError):
    pass


class QuadratureResolutionError(ValueError):
    def __init__(self, step: float, required: float):
        super().__init__(f"time step {step:g} too coarse; need at most {required:g}")
        self.step = step
        self.required = required


@dataclass(frozen=True)
class Phase:
    """phi(xi, eta) with its gradient and, when known, the zero set as a Curve."""

    phi: Callable
    grad: Callable
    zero_set: Curve | None = None
    name: str = "phase"
    params: dict = field(default_factory=dict)

    def __call__(self, xi, eta):
        return self.phi(np.asarray(xi, dtype=float), np.asarray(eta, dtype=float))

    @classmethod
    def dispersion(cls, coeffs, name: str = "") -> "Phase":
        """phi = p(xi + eta) - p(xi) - p(eta) for the polynomial p with these coefficients."""
        p = np.polynomial.Polynomial(coeffs)
        dp = p.deriv()
        return cls(lambda x, y: p(x + y) - p(x) - p(y),
                   lambda x, y: (dp(x + y) - dp(x), dp(x + y) - dp(y)),
                   None, name or "dispersion", {"dispersion": [float(c) for c in coeffs]})

    @classmethod
    def circle(cls, center=(0.0, 1.0), radius: float = 1.0) -> "Phase":
        """phi = |zeta - c|^2 - r^2, whose zero set is the circle of radius r about c."""
        cx, cy = float(center[0]), float(center[1])
        r2 = float(radius) ** 2
        return cls(lambda x, y: (x - cx) ** 2 + (y - cy) ** 2 - r2,
                   lambda x, y: (2 * (x - cx), 2 * (y - cy)),
                   Curve.circle((cx, cy), radius), "circle",
                   {"center": [cx, cy], "radius": float(radius)})

    def gradient_on_zero_set(self, samples: int = 512) -> float:
        """Smallest |grad phi| over sampled zero-set points inside the unit ball."""
        if self.zero_set is not None:
            pts = self.zero_set.point((np.arange(samples) + 0.5) / samples)
        else:
            # scan a fine grid of the unit box for sign changes of phi
            ax = np.linspace(-1, 1, 2 * (samples // 2) + 1)
            x, y = np.meshgrid(ax, ax, indexing="ij")
            v = self(x, y)
            near = np.abs(v) <= np.abs(np.gradient(v, ax[1] - ax[0])[0]) * (ax[1] - ax[0])
            pts = np.stack([x[near], y[near]], axis=-1)
        pts = pts[np.linalg.norm(pts, axis=-1) <= 1.0]
        if len(pts) == 0:
            return math.inf
        gx, gy = self.grad(pts[:, 0], pts[:, 1])
        return float(np.min(np.hypot(gx, gy)))

    def check_nondegenerate(self, tol: float = 1e-6) -> float:
        g = self.gradient_on_zero_set()
        if not g > tol:
            raise PhaseError(f"grad phi vanishes on the zero set (min |grad phi| = {g:.3g})")
        return g


def _duhamel_factor(phi: np.ndarray, t: float) -> np.ndarray:
    """(exp(i t phi) - 1) / (i phi), with the removable point handled by a short series."""
    phi = np.asarray(phi, dtype=float)
    if t == 0:
        return np.zeros(phi.shape, dtype=complex)
    theta = 1e-8 / t
    small = np.abs(phi) <= theta
    out = np.empty(phi.shape, dtype=complex)
    big = ~small
    z = t * phi[big]
    # exp(iz) - 1 = 2i sin(z/2) exp(iz/2), free of cancellation
    out[big] = 2.0 * np.sin(z / 2) * np.exp(0.5j * z) / phi[big]
    z = 1j * t * phi[small]
    term = np.full(z.shape, t, dtype=complex)
    acc = term.copy()
    for k in range(1, SERIES_TERMS):
        term = term * z / (k + 1)
        acc += term
    out[small] = acc
    return out


def _base_values(grid: FrequencyGrid, base) -> np.ndarray:
    pts = grid.points()
    if base is None:
        return np.asarray(disc_cutoff(pts), dtype=complex)
    if isinstance(base, Symbol):
        return np.asarray(base.values)
    if callable(base):
        return np.asarray(base(pts), dtype=complex)
    return np.broadcast_to(np.asarray(base, dtype=complex), (grid.n, grid.n)).copy()


def duhamel_symbol(phase: Phase, t: float, grid: FrequencyGrid | None = None, base=None) -> Symbol:
    """m * (exp(i t phi) - 1) / (i phi); equals m * t where phi = 0."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    grid = grid or FrequencyGrid()
    xi, eta = grid.mesh()
    values = _base_values(grid, base) * _duhamel_factor(phase(xi, eta), float(t))
    return Symbol(grid, values, 1.0, "custom", phase.zero_set,
                  {"builder": "duhamel", "phase": phase.name, "t": float(t)})


def resonant_cut(phase: Phase, epsilon: float, grid: FrequencyGrid) -> np.ndarray:
    """Smooth cut equal to 1 on |phi| <= eps/2 and 0 on |phi| >= eps."""
    xi, eta = grid.mesh()
    return smooth_bump(np.abs(phase(xi, eta)) / epsilon)


def truncated_symbol(phase: Phase, epsilon: float, t: float | None = None,
                     grid: FrequencyGrid | None = None, base=None) -> Symbol:
    """The resonant part cut * m, or cut * duhamel(t) / t when t is given.

    The claimed tube half-width is eps / min|grad phi| on the zero set.
    """
    grid = grid or FrequencyGrid()
    cut = resonant_cut(phase, epsilon, grid)
    values = _base_values(grid, base) * cut
    if t is not None and t > 0:
        xi, eta = grid.mesh()
        values = values * _duhamel_factor(phase(xi, eta), float(t)) / t
    width = epsilon / phase.gradient_on_zero_set()
    cls = "M_eps" if phase.zero_set is not None else "custom"
    return Symbol(grid, values, width, cls, phase.zero_set,
                  {"builder": "resonant_cut", "phase": phase.name, "cut": float(epsilon),
                   "t": None if t is None else float(t)})


def _gauss_panels(t0: float, t1: float, step: float, order: int):
    """Nodes and weights of composite Gauss-Legendre on [t0, t1]."""
    if t1 <= t0:
        return np.zeros(0), np.zeros(0)
    panels = max(1, math.ceil((t1 - t0) / step - 1e-12))
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(t0, t1, panels + 1)
    half = np.diff(edges) / 2
    mid = (edges[:-1] + edges[1:]) / 2
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def time_integrated_symbol(phase: Phase, t0: float, t1: float, grid: FrequencyGrid | None = None,
                           base=None, order: int = 8, step: float | None = None) -> np.ndarray:
    """Gauss-Legendre quadrature of exp(i s phi) m over s in [t0, t1]."""
    grid = grid or FrequencyGrid()
    xi, eta = grid.mesh()
    phi = phase(xi, eta)
    m = _base_values(grid, base)
    peak = float(np.max(np.abs(phi[np.abs(m) > 0]))) if np.any(np.abs(m) > 0) else 0.0
    required = 0.1 / peak if peak > 0 else math.inf
    step = required if step is None else step
    if step > required * (1 + 1e-12):
        raise QuadratureResolutionError(step, required)
    nodes, weights = _gauss_panels(t0, t1, min(step, max(t1 - t0, 1e-300)), order)
    acc = np.zeros(phi.shape, dtype=complex)
    for s, w in zip(nodes, weights):
        acc += w * np.exp(1j * s * phi)
    return m * acc


@dataclass
class ResonanceResult:
    times: list
    norms: list
    sup: float
    exponent: object


def truncated_resonance_pairing(phase: Phase, epsilon: float, t_grid, f, g, triple,
                                grid: FrequencyGrid | None = None, base=None,
                                order: int = 8, step: float | None = None) -> ResonanceResult:
    """|| int_0^t B_{exp(i s phi) m cut}(f(s), g(s)) ds ||_{r'} for each t in t_grid.

    f and g are GridFunctions or callables s -> GridFunction. The s-integral
    is composite Gauss-Legendre with panels of length at most 0.1 / max|phi|
    over the cut support.
    """
    triple = triple if isinstance(triple, LebesgueTriple) else LebesgueTriple(*triple)
    r_dual = conjugate(triple.r)
    times = sorted(float(t) for t in t_grid)
    if any(t < 0 for t in times):
        raise ValueError("times must be nonnegative")
    sample = f(0.0) if callable(f) else f
    grid = grid or FrequencyGrid(sample.half_width, sample.n)
    xi, eta = grid.mesh()
    phi = phase(xi, eta)
    m = _base_values(grid, base) * resonant_cut(phase, epsilon, grid)
    support = np.abs(m) > 0
    peak = float(np.max(np.abs(phi[support]))) if support.any() else 0.0
    required = 0.1 / peak if peak > 0 else math.inf
    if step is not None and step > required * (1 + 1e-12):
        raise QuadratureResolutionError(step, required)
    step = required if step is None else step

    def spectrum(s):
        fs = f(s) if callable(f) else f
        gs = g(s) if callable(g) else g
        sym = Symbol(grid, m * np.exp(1j * s * phi), 1.0, "custom")
        return output_spectrum(sym, fs, gs)

    static = not callable(f) and not callable(g)
    acc = np.zeros(2 * grid.n, dtype=complex)
    norms = []
    prev = 0.0
    for t in times:
        if static:
            # the s-integral acts on the symbol alone
            chunk = Symbol(grid, time_integrated_symbol(phase, prev, t, grid, m, order,
                                                        min(step, max(t - prev, 1e-300))),
                           1.0, "custom")
            if t > prev:
                acc = acc + output_spectrum(chunk, f, g)
        else:
            nodes, weights = _gauss_panels(prev, t, step, order)
            for s, w in zip(nodes, weights):
                acc = acc + w * spectrum(s)
        prev = t
        out = GridFunction(2 * grid.n, 2 * grid.half_width, acc, "frequency").to_spatial()
        norms.append(lp_norm(out, r_dual))
    return ResonanceResult(times, norms, max(norms) if norms else 0.0, r_dual)


def resonance_norm_bound(phase: Phase, epsilon: float, t: float, triple,
                         grid: FrequencyGrid | None = None, base=None,
                         families=("flat_hats", "rescaled_bumps"),
                         ascent: dict | None = None, seed: int = 0) -> float:
    """Best lower bound for the norm of the time-t resonant Duhamel operator."""
    grid = grid or FrequencyGrid()
    triple = triple if isinstance(triple, LebesgueTriple) else LebesgueTriple(*triple)
    sym = truncated_symbol(phase, epsilon, None, grid, base)
    xi, eta = grid.mesh()
    values = np.asarray(sym.values) * _duhamel_factor(phase(xi, eta), float(t))
    sym = sym.with_values(values, claimed_class="custom")
    best, _ = best_lower_bound(sym, triple, families, ascent, seed=seed)
    return best.lower_bound


def _half_sinc(u):
    """sin(u/2) / (u/2), by its Taylor series for small u."""
    u = np.asarray(u, dtype=float)
    small = np.abs(u) < 1e-3
    out = np.empty_like(u)
    v = u[small] ** 2 / 4
    out[small] = 1 - v / 6 + v ** 2 / 120 - v ** 3 / 5040
    big = ~small
    out[big] = np.sin(u[big] / 2) / (u[big] / 2)
    return out


def linear_example_norm(t: float, epsilon: float) -> float:
    """(int_{|xi| <= eps} |(1 - exp(i t xi^2)) / xi^2|^2 dxi)^{1/2}.

    Uses |1 - exp(iu)| = |u| * |sin(u/2) / (u/2)| with u = t xi^2, so the
    integrand is t^2 * half_sinc(t xi^2)^2.
    """
    if t < 0 or epsilon <= 0:
        raise ValueError("need t >= 0 and eps > 0")
    if t == 0:
        return 0.0

    def integrand(xi):
        return float(t * t * _half_sinc(np.array([t * xi * xi]))[0] ** 2)

    # break points at the oscillation scale keep quad accurate for large t eps^2
    periods = t * epsilon ** 2 / (2 * math.pi)
    pieces = max(1, min(2000, int(math.ceil(periods)) * 4))
    edges = np.sqrt(np.linspace(0.0, epsilon ** 2, pieces + 1))
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        val, _ = integrate.quad(integrand, a, b, epsabs=0.0, epsrel=1e-13, limit=200)
        total += val
    return math.sqrt(2.0 * total)


__all__ = [
    "Phase", "PhaseError", "QuadratureResolutionError", "duhamel_symbol", "resonant_cut",
    "truncated_symbol", "time_integrated_symbol", "truncated_resonance_pairing",
    "ResonanceResult", "resonance_norm_bound", "linear_example_norm",
]
