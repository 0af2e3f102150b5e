"""Sampled bilinear symbols on a square frequency grid and numerical class checks."""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.spatial import cKDTree

from .curves import Curve, arc_quadrature, normal_frame

SYMBOL_CLASSES = ("M_eps", "N_eps", "exact_line", "bochner_riesz", "singular", "custom")
C_SYM = 2.0

# Radial cutoff to B(0,1): identically 1 inside CUTOFF_INNER.
CUTOFF_INNER = 0.9
CUTOFF_OUTER = 1.0
# Cutoff along a line symbol, in the coordinate parallel to the line.
LINE_INNER = 0.8
LINE_OUTER = 0.95


class GridResolutionError(ValueError):
    """The grid spacing is too coarse for the requested tube width."""


def _h(x):
    out = np.zeros_like(x, dtype=float)
    pos = x > 0
    out[pos] = np.exp(-1.0 / x[pos])
    return out


def smooth_bump(t):
    """C-infinity profile equal to 1 on [0, 1/2] and 0 on [1, inf), even in t."""
    t = np.abs(np.asarray(t, dtype=float))
    a = _h(1.0 - t)
    b = _h(t - 0.5)
    return a / (a + b)


def smooth_bump_derivative_bounds(order: int = 2, samples: int = 200001):
    """Sup norms of the first ``order`` derivatives of smooth_bump."""
    t = np.linspace(0.0, 1.2, samples)
    dt = t[1] - t[0]
    vals = smooth_bump(t)
    bounds = []
    for _ in range(order):
        vals = np.gradient(vals, dt)
        bounds.append(float(np.max(np.abs(vals))))
    return bounds


def transition(rho, inner: float, outer: float):
    """Smooth radial cutoff: 1 for rho <= inner, 0 for rho >= outer."""
    t = 0.5 + 0.5 * (np.asarray(rho, dtype=float) - inner) / (outer - inner)
    return smooth_bump(np.maximum(t, 0.0))


def disc_cutoff(points):
    """The fixed cutoff to B(0,1) applied to curve symbols."""
    rho = np.linalg.norm(np.asarray(points, dtype=float), axis=-1)
    return transition(rho, CUTOFF_INNER, CUTOFF_OUTER)


def profile_line_mass(profile=smooth_bump) -> float:
    """Integral over the real line of profile(|s|)."""
    return 2.0 * integrate.quad(lambda s: float(profile(s)), 0.0, 1.0, limit=200)[0]


def profile_disc_mass(profile=smooth_bump) -> float:
    """Integral over the plane of profile(|x|)."""
    return 2.0 * np.pi * integrate.quad(lambda s: float(profile(s)) * s, 0.0, 1.0, limit=200)[0]


@dataclass(frozen=True)
class FrequencyGrid:
    """The square [-L, L)^2 sampled with n points per axis, spacing 2L/n."""

    half_width: float = 2.0
    n: int = 1024

    def __post_init__(self):
        n = int(self.n)
        if n < 64 or n & (n - 1):
            raise ValueError(f"grid size must be a power of two >= 64, got {self.n}")
        if self.half_width < 2:
            raise ValueError("grid half width must be at least 2")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "half_width", float(self.half_width))

    @property
    def L(self) -> float:
        return self.half_width

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / self.n

    @property
    def axis(self) -> np.ndarray:
        return -self.half_width + self.spacing * np.arange(self.n)

    def mesh(self):
        """Coordinates (xi, eta) with xi along axis 0."""
        return np.meshgrid(self.axis, self.axis, indexing="ij")

    def points(self) -> np.ndarray:
        xi, eta = self.mesh()
        return np.stack([xi, eta], axis=-1)

    def check_resolution(self, epsilon: float) -> None:
        """Require at least 8 samples across the 2*epsilon wide tube."""
        if self.spacing > epsilon / 4 * (1 + 1e-12):
            need = self.n
            while 2.0 * self.half_width / need > epsilon / 4 * (1 + 1e-12):
                need *= 2
            raise GridResolutionError(
                f"grid spacing {self.spacing:g} too coarse for epsilon={epsilon:g}; need n >= {need}")


@dataclass(frozen=True)
class Symbol:
    grid: FrequencyGrid
    values: np.ndarray
    epsilon: float
    claimed_class: str
    curve: Curve | None = None
    meta: dict = field(default_factory=dict)
    sampler: Callable | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.claimed_class not in SYMBOL_CLASSES:
            raise ValueError(f"unknown symbol class {self.claimed_class!r}")
        if self.values.shape != (self.grid.n, self.grid.n):
            raise ValueError("symbol values do not match the grid")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        self.values.setflags(write=False)

    def with_values(self, values, claimed_class=None, epsilon=None, **meta):
        return replace(self, values=np.array(values, dtype=complex),
                       claimed_class=claimed_class or self.claimed_class,
                       epsilon=self.epsilon if epsilon is None else epsilon,
                       meta={**self.meta, **meta}, sampler=None)

    def check_invariants(self) -> None:
        if self.claimed_class in ("M_eps", "N_eps"):
            if np.max(np.abs(self.values)) > C_SYM * (1 + 1e-9):
                raise ValueError("symbol exceeds the class sup bound")
            if self.curve is not None:
                excess = support_excess(self)
                if excess > 2 * self.epsilon * (1 + 1e-9) + self.grid.spacing:
                    raise ValueError(f"support reaches distance {excess:g} > 2 eps from the curve")

    # -- binary dump ----------------------------------------------------------

    def header(self) -> dict:
        return {"n": self.grid.n, "L": self.grid.half_width, "epsilon": self.epsilon,
                "class": self.claimed_class,
                "curve": None if self.curve is None else self.curve.to_dict(),
                "meta": self.meta}

    def dumps(self) -> bytes:
        head = json.dumps(self.header(), sort_keys=True).encode() + b"\n"
        body = np.ascontiguousarray(self.values, dtype="<c16").tobytes()
        return head + body

    def dump(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.dumps())

    @classmethod
    def loads(cls, blob: bytes) -> "Symbol":
        head, body = blob.split(b"\n", 1)
        doc = json.loads(head)
        grid = FrequencyGrid(doc["L"], doc["n"])
        values = np.frombuffer(body, dtype="<c16").reshape(grid.n, grid.n).astype(complex)
        curve = None if doc.get("curve") is None else Curve.from_dict(doc["curve"])
        return cls(grid, values, doc["epsilon"], doc["class"], curve, doc.get("meta", {}))

    @classmethod
    def load(cls, path) -> "Symbol":
        with open(path, "rb") as fh:
            return cls.loads(fh.read())


# -- builders -------------------------------------------------------------------


def _check_tube(curve: Curve, epsilon: float, grid: FrequencyGrid) -> None:
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if epsilon > curve.default_reach():
        raise ValueError(f"epsilon={epsilon:g} exceeds the reach {curve.default_reach():g} of the curve")
    grid.check_resolution(epsilon)


def _near_cells(curve: Curve, grid: FrequencyGrid, radius: float):
    """Flat indices of grid cells within ``radius`` of the curve, and their frames."""
    pts = grid.points().reshape(-1, 2)
    near = np.linalg.norm(pts, axis=-1) < CUTOFF_OUTER + radius
    if curve.kind == "graph":
        ts = np.linspace(0.0, 1.0, 1 << 14)
        tree = cKDTree(curve.point(ts))
        d, _ = tree.query(pts[near], distance_upper_bound=radius + 1e-3)
        idx = np.flatnonzero(near)[np.isfinite(d)]
    else:
        idx = np.flatnonzero(near)
    frame = normal_frame(curve, pts[idx], reach=math.inf)
    keep = frame.nu < radius
    idx = idx[keep]
    return idx, normal_frame(curve, pts[idx], reach=math.inf)


def build_tube_symbol(curve: Curve, epsilon: float, grid: FrequencyGrid | None = None,
                      profile=smooth_bump, ripple: float = 0.0) -> Symbol:
    """profile(dist/eps) times the fixed cutoff to B(0,1).

    A nonzero ``ripple`` multiplies by about 1 + ripple*cos(arc/eps): still an
    M_eps symbol, but its tangential derivatives grow like 1/eps.
    """
    grid = grid or FrequencyGrid()
    _check_tube(curve, epsilon, grid)
    if not 0 <= ripple <= 1:
        raise ValueError("ripple must lie in [0, 1]")
    # whole number of ripple periods, so closed curves have no seam
    periods = max(1, round(curve.length / (2.0 * math.pi * epsilon)))

    def sample(points):
        pts = np.asarray(points, dtype=float)
        frame = normal_frame(curve, pts, reach=math.inf)
        vals = profile(frame.nu / epsilon) * disc_cutoff(pts)
        if ripple:
            vals = vals * (1.0 + ripple * np.cos(2.0 * math.pi * periods * frame.foot_t))
        return vals

    idx, _ = _near_cells(curve, grid, epsilon)
    values = np.zeros(grid.n * grid.n, dtype=complex)
    values[idx] = sample(grid.points().reshape(-1, 2)[idx])
    return Symbol(grid, values.reshape(grid.n, grid.n), float(epsilon), "M_eps", curve,
                  {"builder": "tube", "normal_mass": profile_line_mass(profile), "ripple": ripple},
                  sampler=sample)


def build_convolved_measure_symbol(curve: Curve, epsilon: float, grid: FrequencyGrid | None = None,
                                   weight=None, profile=smooth_bump) -> Symbol:
    """eps^-1 times the arc measure (with ``weight``) convolved with profile(|.|/eps).

    The result is multiplied by the fixed cutoff to B(0,1), which keeps the
    tangential derivatives O(1).
    """
    grid = grid or FrequencyGrid()
    _check_tube(curve, epsilon, grid)
    n_nodes = max(64, int(math.ceil(32 * curve.length / epsilon)))
    nodes, w = arc_quadrature(curve, n_nodes)
    if weight is not None:
        w = w * np.asarray(weight(nodes), dtype=float)
    tree = cKDTree(nodes)

    def sample(points):
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        out = np.zeros(len(pts))
        for start in range(0, len(pts), 50000):
            chunk = pts[start:start + 50000]
            pairs = tree.sparse_distance_matrix(cKDTree(chunk), epsilon, output_type="coo_matrix")
            contrib = profile(pairs.data / epsilon) * w[pairs.row]
            out[start:start + len(chunk)] = np.bincount(pairs.col, contrib, minlength=len(chunk))
        out *= disc_cutoff(pts) / epsilon
        return out.reshape(np.shape(points)[:-1])

    idx, _ = _near_cells(curve, grid, epsilon)
    values = np.zeros(grid.n * grid.n, dtype=complex)
    values[idx] = sample(grid.points().reshape(-1, 2)[idx])
    return Symbol(grid, values.reshape(grid.n, grid.n), float(epsilon), "N_eps", curve,
                  {"builder": "convolved", "normal_mass": profile_disc_mass(profile)},
                  sampler=sample)


def build_line_symbol(lam: float, epsilon: float, grid: FrequencyGrid | None = None,
                      profile=smooth_bump) -> Symbol:
    """profile((xi - lam*eta)/eps), cut off along the line to stay inside B(0,1)."""
    grid = grid or FrequencyGrid()
    grid.check_resolution(epsilon)
    norm = math.hypot(lam, 1.0)

    def sample(points):
        pts = np.asarray(points, dtype=float)
        xi, eta = pts[..., 0], pts[..., 1]
        along = (lam * xi + eta) / norm
        return profile((xi - lam * eta) / epsilon) * transition(np.abs(along), LINE_INNER, LINE_OUTER)

    values = sample(grid.points()).astype(complex)
    half = LINE_OUTER / norm
    curve = Curve.line(lam, (-half, half), name=f"line lambda={lam:g}")
    return Symbol(grid, values, float(epsilon), "exact_line", curve,
                  {"builder": "line", "lambda": float(lam),
                   "normal_mass": profile_line_mass(profile) / norm},
                  sampler=sample)


def _region_distance(region: dict, points):
    """Distance to the boundary for points inside the region, negative outside."""
    pts = np.asarray(points, dtype=float)
    kind = region.get("kind")
    if kind == "disc":
        c = np.asarray(region.get("center", (0.0, 0.0)), dtype=float)
        return float(region["radius"]) - np.linalg.norm(pts - c, axis=-1)
    if kind == "polygon":
        verts = np.asarray(region["vertices"], dtype=float)
        area2 = np.sum(verts[:, 0] * np.roll(verts[:, 1], -1) - np.roll(verts[:, 0], -1) * verts[:, 1])
        if area2 < 0:
            verts = verts[::-1]
        dist = np.full(pts.shape[:-1], np.inf)
        for a, b in zip(verts, np.roll(verts, -1, axis=0)):
            e = b - a
            inward = np.array([-e[1], e[0]]) / np.linalg.norm(e)
            dist = np.minimum(dist, (pts - a) @ inward)
        return dist
    raise ValueError(f"unknown region kind {kind!r}")


def _region_inside_unit_ball(region: dict) -> bool:
    if region["kind"] == "disc":
        return np.linalg.norm(region.get("center", (0, 0))) + region["radius"] <= 1 + 1e-12
    return bool(np.all(np.linalg.norm(np.asarray(region["vertices"], float), axis=-1) <= 1 + 1e-12))


def build_bochner_riesz(region: dict, kappa: float, grid: FrequencyGrid | None = None) -> Symbol:
    """indicator(K) * dist(., boundary K)^kappa for a disc or convex polygon K."""
    grid = grid or FrequencyGrid()
    if kappa < 0:
        raise ValueError("kappa must be nonnegative")
    if not _region_inside_unit_ball(region):
        raise ValueError("region must lie inside the unit ball")
    d = _region_distance(region, grid.points())
    inside = d > 0
    values = np.where(inside, np.where(inside, np.maximum(d, 0.0), 1.0) ** kappa, 0.0)
    curve = None
    if region["kind"] == "disc":
        curve = Curve.circle(region.get("center", (0.0, 0.0)), region["radius"], name="disc boundary")
    return Symbol(grid, values.astype(complex), 1.0, "bochner_riesz", curve,
                  {"builder": "bochner_riesz", "region": region, "kappa": float(kappa)})


def build_dilated_bochner_riesz(region: dict, kappa: float, dilation: float,
                                grid: FrequencyGrid | None = None) -> Symbol:
    """m(zeta / dilation) / m(0) for m = indicator(K) * dist(., boundary K)^kappa.

    The normalization makes the symbol equal 1 at the origin, so it tends to 1
    pointwise as the dilation grows. K must contain the origin in its interior;
    unlike build_bochner_riesz the dilated region may leave the unit ball.
    """
    grid = grid or FrequencyGrid()
    if kappa < 0 or dilation <= 0:
        raise ValueError("kappa must be nonnegative and the dilation positive")
    d0 = float(_region_distance(region, np.zeros(2)))
    if d0 <= 0:
        raise ValueError("region must contain the origin in its interior")
    d = _region_distance(region, grid.points() / dilation) / d0
    values = np.where(d > 0, np.maximum(d, 0.0) ** kappa, 0.0)
    return Symbol(grid, values.astype(complex), 1.0, "bochner_riesz", None,
                  {"builder": "dilated_bochner_riesz", "region": region, "kappa": float(kappa),
                   "dilation": float(dilation)})


def build_singular_symbol(curve: Curve, alpha: float, grid: FrequencyGrid | None = None,
                          cutoff=disc_cutoff) -> Symbol:
    """cutoff * dist(., curve)^-alpha, cell-averaged (4x4) on cells meeting the curve."""
    grid = grid or FrequencyGrid()
    if not 0 <= alpha < 1:
        raise ValueError("alpha must lie in [0, 1)")
    pts = grid.points().reshape(-1, 2)
    nu = normal_frame(curve, pts, reach=math.inf).nu
    with np.errstate(divide="ignore"):
        values = np.where(nu > 0, nu, np.inf) ** (-alpha) if alpha else np.ones_like(nu)
    delta = grid.spacing
    crossing = np.flatnonzero(nu <= delta / math.sqrt(2.0))
    if alpha and len(crossing):
        offs = ((np.arange(4) + 0.5) / 4 - 0.5) * delta
        ox, oy = np.meshgrid(offs, offs, indexing="ij")
        sub = pts[crossing][:, None, :] + np.stack([ox.ravel(), oy.ravel()], axis=-1)[None]
        sub_nu = normal_frame(curve, sub.reshape(-1, 2), reach=math.inf).nu.reshape(len(crossing), 16)
        values[crossing] = np.mean(np.maximum(sub_nu, 1e-300) ** (-alpha), axis=1)
    values = values * np.asarray(cutoff(pts), dtype=float)
    return Symbol(grid, values.reshape(grid.n, grid.n).astype(complex), 1.0, "singular", curve,
                  {"builder": "singular", "alpha": float(alpha)})


def constant_symbol(grid: FrequencyGrid, value: complex = 1.0) -> Symbol:
    return Symbol(grid, np.full((grid.n, grid.n), value, dtype=complex), 1.0, "custom")


# -- layers ---------------------------------------------------------------------


def _layer_distance(symbol: Symbol) -> np.ndarray:
    if symbol.claimed_class == "bochner_riesz":
        return np.maximum(_region_distance(symbol.meta["region"], symbol.grid.points()), 0.0)
    if symbol.curve is None:
        raise ValueError("layers need a region or a curve")
    return normal_frame(symbol.curve, symbol.grid.points(), reach=math.inf).nu


def max_layer_index(grid: FrequencyGrid) -> int:
    """Largest n with 2^-n >= 8 * spacing."""
    return int(math.floor(math.log2(1.0 / (8.0 * grid.spacing)) + 1e-12))


def whitney_layers(symbol: Symbol, n_max: int | None = None) -> list[Symbol]:
    """Dyadic partition of a symbol by distance to its boundary curve.

    Layer n >= 1 lives where 2^(-n-1) <= dist <= 2^(-n+1); layer 0 is the bulk
    dist >= 1/2. The last layer also absorbs everything closer to the boundary,
    so the layers always sum back to the symbol exactly.
    """
    if symbol.claimed_class not in ("bochner_riesz", "singular"):
        raise ValueError("whitney layers need a Bochner-Riesz or singular symbol")
    limit = max_layer_index(symbol.grid)
    if n_max is None:
        n_max = limit
    elif n_max > limit:
        warnings.warn(f"layer index capped at {limit} by grid resolution")
        n_max = limit
    d = _layer_distance(symbol)
    m = np.asarray(symbol.values)
    residual = float(np.sum(np.abs(m[(d > 0) & (d < 2.0 ** (-n_max - 1))])) * symbol.grid.spacing ** 2)
    if residual > 0:
        warnings.warn(f"resolution exhausted at layer {n_max}; last layer carries mass {residual:.3g}")

    def at_least(n):
        # 1 where dist >= 2^-n, 0 where dist <= 2^-n-1.
        return 1.0 - smooth_bump(d * 2.0 ** n)

    layers = []
    prev = np.zeros_like(d)
    for n in range(n_max + 1):
        cur = np.ones_like(d) if n == n_max else at_least(n)
        part = m * (cur - prev)
        layers.append(replace(symbol, values=part, epsilon=2.0 ** (-n), claimed_class="M_eps",
                              meta={**symbol.meta, "layer": n, "residual_mass": residual},
                              sampler=None))
        prev = cur
    # Make the partition exact in floating point by assigning the rounding
    # residue to the last layer.
    total = sum(np.asarray(layer.values) for layer in layers)
    fix = np.asarray(layers[-1].values) + (m - total)
    layers[-1] = replace(layers[-1], values=fix)
    return layers


# -- class verification -------------------------------------------------------------

MULTI_INDICES = {1: [(1, 0), (0, 1)], 2: [(2, 0), (1, 1), (0, 2)]}


@dataclass
class ClassReport:
    derivative_constants: dict
    tangential_constant: float
    support_excess: float
    ceilings: dict
    passed: bool
    epsilon: float = 0.0

    def as_row(self) -> dict:
        row = {"epsilon": self.epsilon}
        for key, val in self.derivative_constants.items():
            row[f"d{key[0]}{key[1]}"] = val
        row["tangential"] = self.tangential_constant
        row["support_excess"] = self.support_excess
        row["pass"] = self.passed
        return row


def _finite_difference(values: np.ndarray, alpha, delta: float) -> np.ndarray:
    pad = np.pad(values, 1)
    c = pad[1:-1, 1:-1]

    def shift(i, j):
        return pad[1 + i:pad.shape[0] - 1 + i, 1 + j:pad.shape[1] - 1 + j]

    if alpha == (0, 0):
        return values
    if alpha == (1, 0):
        return (shift(1, 0) - shift(-1, 0)) / (2 * delta)
    if alpha == (0, 1):
        return (shift(0, 1) - shift(0, -1)) / (2 * delta)
    if alpha == (2, 0):
        return (shift(1, 0) - 2 * c + shift(-1, 0)) / delta ** 2
    if alpha == (0, 2):
        return (shift(0, 1) - 2 * c + shift(0, -1)) / delta ** 2
    if alpha == (1, 1):
        return (shift(1, 1) - shift(1, -1) - shift(-1, 1) + shift(-1, -1)) / (4 * delta ** 2)
    raise ValueError(f"multi-index {alpha} not supported")


def _higher_difference(values, alpha, delta):
    out = values
    for axis, k in enumerate(alpha):
        for _ in range(k):
            out = np.gradient(out, delta, axis=axis)
    return out


def support_excess(symbol: Symbol, rel_tol: float = 1e-12) -> float:
    """Largest distance to the curve among cells where the symbol is nonzero."""
    vals = np.abs(np.asarray(symbol.values))
    mask = vals > rel_tol * max(vals.max(), 1e-300)
    if not mask.any():
        return 0.0
    pts = symbol.grid.points()[mask]
    return float(np.max(normal_frame(symbol.curve, pts, reach=math.inf).nu))


def default_ceilings(order: int = 2) -> dict:
    bounds = smooth_bump_derivative_bounds(order)
    ceil = {(0, 0): 10 * C_SYM}
    for k in range(1, order + 1):
        for alpha in MULTI_INDICES.get(k, [(k, 0), (0, k)]):
            ceil[alpha] = 10 * C_SYM * max(1.0, bounds[k - 1])
    ceil["tangential"] = 10 * C_SYM * max(1.0, bounds[0])
    return ceil


def ceilings_from(report: ClassReport, factor: float = 10.0) -> dict:
    """Class ceilings as ``factor`` times the constants of a reference report."""
    ceil = {k: factor * max(v, 1e-12) for k, v in report.derivative_constants.items()}
    ceil["tangential"] = factor * max(report.tangential_constant, 1e-12)
    return ceil


def verify_class(symbol: Symbol, order: int = 2, ceilings: dict | None = None,
                 check_tangential: bool | None = None) -> ClassReport:
    """Measure the symbol-class constants by central differences with spacing Delta.

    Derivative constants are sup |d^alpha m| * eps^|alpha|. The tangential
    constant is sup |<(grad nu)^perp, grad m>| over the support, taken along
    the tangential direction from normal_frame; when the symbol carries its
    sampler the difference is taken on the exact function, otherwise on the
    grid gradient. The tangential ceiling only counts toward ``passed`` for
    N_eps symbols unless ``check_tangential`` says otherwise.
    """
    if symbol.curve is None:
        raise ValueError("class verification needs a curve")
    delta = symbol.grid.spacing
    eps = symbol.epsilon
    m = np.asarray(symbol.values)
    constants = {(0, 0): float(np.max(np.abs(m)))}
    for k in range(1, order + 1):
        for alpha in MULTI_INDICES.get(k, [(k - j, j) for j in range(k + 1)]):
            deriv = _finite_difference(m, alpha, delta) if k <= 2 else _higher_difference(m, alpha, delta)
            constants[alpha] = float(np.max(np.abs(deriv)) * eps ** k)

    vals = np.abs(m)
    mask = vals > 1e-9 * max(vals.max(), 1e-300)
    pts = symbol.grid.points()[mask]
    tangential = 0.0
    if len(pts):
        frame = normal_frame(symbol.curve, pts, reach=math.inf)
        tau = frame.tangential
        if symbol.sampler is not None:
            fwd = np.asarray(symbol.sampler(pts + delta * tau))
            bwd = np.asarray(symbol.sampler(pts - delta * tau))
            tang = (fwd - bwd) / (2 * delta)
        else:
            gx = _finite_difference(m, (1, 0), delta)[mask]
            gy = _finite_difference(m, (0, 1), delta)[mask]
            tang = tau[:, 0] * gx + tau[:, 1] * gy
        tangential = float(np.max(np.abs(tang)))
    excess = float(np.max(normal_frame(symbol.curve, pts, reach=math.inf).nu)) if len(pts) else 0.0

    ceil = ceilings or default_ceilings(order)
    ok = all(constants[a] <= ceil.get(a, math.inf) for a in constants)
    if check_tangential is None:
        check_tangential = symbol.claimed_class == "N_eps"
    if check_tangential:
        ok = ok and tangential <= ceil.get("tangential", math.inf)
    if symbol.claimed_class in ("M_eps", "N_eps", "exact_line"):
        ok = ok and excess <= 2 * eps + delta
    return ClassReport(constants, tangential, excess, ceil, bool(ok), eps)


def tube_area(symbol: Symbol) -> float:
    """Discrete area of the support, Delta^2 times the number of nonzero cells."""
    vals = np.abs(np.asarray(symbol.values))
    return float(np.count_nonzero(vals > 1e-12 * vals.max()) * symbol.grid.spacing ** 2)
