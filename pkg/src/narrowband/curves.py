"""Analytic plane curves in the frequency plane and the geometric queries on them."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.spatial import cKDTree

# Directions whose parallel tangents make a curve point characteristic.
AXIS_DIRECTIONS = {
    "xi_axis": np.array([1.0, 0.0]),
    "eta_axis": np.array([0.0, 1.0]),
    "antidiagonal": np.array([1.0, -1.0]) / math.sqrt(2.0),
}

_BISECTION_STEPS = 60


class CurveError(ValueError):
    """Raised for malformed curve definitions or queries outside a curve's reach."""


@dataclass(frozen=True)
class Curve:
    """A parametrized curve t -> gamma(t), t in [0, 1].

    ``kind`` is one of ``circle`` (center, radius), ``line`` (the segment
    xi = lam * eta for eta in t_range) or ``graph`` (eta = poly(xi) with
    coefficients in increasing degree, for xi in xi_range).
    """

    kind: str
    params: dict = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        if self.kind == "circle":
            if float(self.params.get("radius", 0)) <= 0:
                raise CurveError("circle radius must be positive")
            if len(self.params.get("center", ())) != 2:
                raise CurveError("circle center must have two coordinates")
        elif self.kind == "line":
            lo, hi = self.params.get("t_range", (-1.0, 1.0))
            if not hi > lo:
                raise CurveError("line t_range must be increasing")
        elif self.kind == "graph":
            lo, hi = self.params.get("xi_range", (-1.0, 1.0))
            if not hi > lo:
                raise CurveError("graph xi_range must be increasing")
            if len(self.params.get("coeffs", ())) == 0:
                raise CurveError("graph needs at least one coefficient")
        else:
            raise CurveError(f"unknown curve kind {self.kind!r}")
        if not self.name:
            object.__setattr__(self, "name", self.kind)

    # -- construction helpers -------------------------------------------------

    @classmethod
    def circle(cls, center=(0.0, 1.0), radius=1.0, name=""):
        return cls("circle", {"center": [float(c) for c in center], "radius": float(radius)}, name)

    @classmethod
    def line(cls, lam, t_range=(-1.0, 1.0), name=""):
        return cls("line", {"lambda": float(lam), "t_range": [float(t) for t in t_range]}, name)

    @classmethod
    def graph(cls, coeffs, xi_range=(-0.5, 0.5), name=""):
        return cls("graph", {"coeffs": [float(c) for c in coeffs],
                             "xi_range": [float(x) for x in xi_range]}, name)

    @classmethod
    def from_dict(cls, doc: dict) -> "Curve":
        if not isinstance(doc, dict) or "kind" not in doc:
            raise CurveError("curve document needs a 'kind' field")
        kind = doc["kind"]
        name = doc.get("name", "")
        if kind == "circle":
            return cls.circle(doc.get("center", (0.0, 1.0)), doc.get("radius", 1.0), name)
        if kind == "line":
            if "lambda" not in doc:
                raise CurveError("line curve needs 'lambda'")
            return cls.line(doc["lambda"], doc.get("t_range", (-1.0, 1.0)), name)
        if kind == "graph":
            if "coeffs" not in doc:
                raise CurveError("graph curve needs 'coeffs'")
            return cls.graph(doc["coeffs"], doc.get("xi_range", (-0.5, 0.5)), name)
        raise CurveError(f"unknown curve kind {kind!r}")

    @classmethod
    def from_json(cls, text: str) -> "Curve":
        return cls.from_dict(json.loads(text))

    def to_dict(self) -> dict:
        return {"kind": self.kind, **self.params}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    # -- parametrization ------------------------------------------------------

    @property
    def closed(self) -> bool:
        return self.kind == "circle"

    def _span(self):
        key = "t_range" if self.kind == "line" else "xi_range"
        lo, hi = self.params[key]
        return float(lo), float(hi)

    def _poly(self):
        return np.polynomial.Polynomial(self.params["coeffs"])

    def point(self, t):
        """gamma(t) as an array of shape t.shape + (2,)."""
        t = np.asarray(t, dtype=float)
        if self.kind == "circle":
            cx, cy = self.params["center"]
            r = self.params["radius"]
            th = 2 * np.pi * t
            return np.stack([cx + r * np.cos(th), cy + r * np.sin(th)], axis=-1)
        lo, hi = self._span()
        s = lo + (hi - lo) * t
        if self.kind == "line":
            return np.stack([self.params["lambda"] * s, s], axis=-1)
        return np.stack([s, self._poly()(s)], axis=-1)

    def derivative(self, t, order=1):
        """d^order gamma / dt^order for order 1 or 2."""
        t = np.asarray(t, dtype=float)
        if self.kind == "circle":
            r = self.params["radius"]
            th = 2 * np.pi * t
            w = 2 * np.pi
            if order == 1:
                return np.stack([-r * w * np.sin(th), r * w * np.cos(th)], axis=-1)
            return np.stack([-r * w * w * np.cos(th), -r * w * w * np.sin(th)], axis=-1)
        lo, hi = self._span()
        scale = hi - lo
        s = lo + scale * t
        if self.kind == "line":
            if order == 1:
                lam = self.params["lambda"]
                return np.stack(np.broadcast_arrays(lam * scale + 0 * s, scale + 0 * s), axis=-1)
            return np.zeros(t.shape + (2,))
        poly = self._poly()
        if order == 1:
            return np.stack([scale + 0 * s, scale * poly.deriv(1)(s)], axis=-1)
        return np.stack([0 * s, scale ** 2 * poly.deriv(2)(s)], axis=-1)

    def tangent(self, t):
        d = self.derivative(t)
        return d / np.linalg.norm(d, axis=-1, keepdims=True)

    def speed(self, t):
        return np.linalg.norm(self.derivative(t), axis=-1)

    @property
    def length(self) -> float:
        if self.kind == "circle":
            return 2 * np.pi * self.params["radius"]
        if self.kind == "line":
            lo, hi = self._span()
            return (hi - lo) * math.hypot(self.params["lambda"], 1.0)
        _, w = arc_quadrature(self, 1 << 14)
        return float(w.sum())

    def check_regular(self, samples: int = 1024) -> None:
        t = np.linspace(0.0, 1.0, samples)
        if np.min(self.speed(t)) <= 1e-12:
            raise CurveError(f"curve {self.name} is not regular (vanishing tangent)")

    def max_curvature(self) -> float:
        if self.kind == "circle":
            return 1.0 / self.params["radius"]
        if self.kind == "line":
            return 0.0
        return float(np.max(curvature(self, np.linspace(0.0, 1.0, 4097))))

    def min_curvature(self) -> float:
        if self.kind == "circle":
            return 1.0 / self.params["radius"]
        if self.kind == "line":
            return 0.0
        return float(np.min(curvature(self, np.linspace(0.0, 1.0, 4097))))

    def default_reach(self) -> float:
        kmax = self.max_curvature()
        return math.inf if kmax == 0 else 1.0 / (2.0 * kmax)


@dataclass(frozen=True)
class CharacteristicPoint:
    t: float
    axis: str
    location: tuple


@dataclass(frozen=True)
class CharacteristicInterval:
    """A sub-arc whose tangent is constantly parallel to a degenerate direction."""

    t_start: float
    t_end: float
    axis: str


@dataclass
class NormalFrame:
    """Distance to the curve with the unit normal and tangential directions.

    Arrays are vectorized over the leading shape of the query points.
    """

    nu: np.ndarray
    grad_nu: np.ndarray
    tangential: np.ndarray
    foot: np.ndarray
    foot_t: np.ndarray


def curvature(curve: Curve, t):
    """Unsigned curvature |gamma' x gamma''| / |gamma'|^3."""
    d1 = curve.derivative(t, 1)
    d2 = curve.derivative(t, 2)
    cross = d1[..., 0] * d2[..., 1] - d1[..., 1] * d2[..., 0]
    return np.abs(cross) / np.linalg.norm(d1, axis=-1) ** 3


def _angle_function(curve, direction):
    def f(t):
        tan = curve.tangent(t)
        return tan[..., 0] * direction[1] - tan[..., 1] * direction[0]
    return f


def characteristic_points(curve: Curve, tol: float = 1e-8, samples: int = 4096):
    """Points whose tangent is within angle ``tol`` of a degenerate direction.

    Sign changes of the signed angle are refined by bisection; tangential
    zeros (no sign change) are located by bounded minimization. A sub-arc along
    which the tangent stays degenerate is returned as a CharacteristicInterval.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    curve.check_regular()
    ts = np.linspace(0.0, 1.0, samples + 1)
    if curve.closed:
        ts = ts[:-1]
    found = []
    for axis, direction in AXIS_DIRECTIONS.items():
        ang = _angle_function(curve, direction)
        vals = ang(ts)
        if np.all(np.abs(vals) <= tol):
            found.append(CharacteristicInterval(0.0, 1.0, axis))
            continue
        roots = []
        m = len(ts)
        pairs = range(m) if curve.closed else range(m - 1)
        for i in pairs:
            j = (i + 1) % m
            a, b = ts[i], ts[j] if j > i else ts[j] + 1.0
            fa, fb = vals[i], vals[j]
            if fa == 0.0:
                roots.append(a)
            elif fa * fb < 0:
                for _ in range(_BISECTION_STEPS):
                    mid = 0.5 * (a + b)
                    fm = ang(mid % 1.0 if curve.closed else mid)
                    if fa * fm <= 0:
                        b = mid
                    else:
                        a, fa = mid, fm
                roots.append(0.5 * (a + b))
        # Touching zeros: local minima of |angle| that never change sign.
        absv = np.abs(vals)
        for i in range(1, m - 1):
            if absv[i] <= absv[i - 1] and absv[i] <= absv[i + 1] and vals[i - 1] * vals[i + 1] > 0:
                res = minimize_scalar(lambda s: abs(float(ang(s))), bounds=(ts[i - 1], ts[i + 1]),
                                      method="bounded", options={"xatol": 1e-14})
                if abs(float(ang(res.x))) <= tol:
                    roots.append(res.x)
        if not curve.closed and abs(vals[-1]) <= tol and vals[-1] != 0.0:
            roots.append(ts[-1])
        for r in sorted(set(round(float(r) % 1.0 if curve.closed else float(r), 13) for r in roots)):
            loc = curve.point(r)
            found.append(CharacteristicPoint(r, axis, (float(loc[0]), float(loc[1]))))
    return found


def is_nowhere_characteristic(curve: Curve) -> bool:
    return len(characteristic_points(curve)) == 0


def arc_quadrature(curve: Curve, n: int):
    """Composite midpoint rule in the parameter: (nodes, weights) for integrals d(sigma)."""
    if n < 8:
        raise ValueError("arc quadrature needs n >= 8")
    t = (np.arange(n) + 0.5) / n
    return curve.point(t), curve.speed(t) / n


def _nearest_parameter(curve: Curve, pts: np.ndarray) -> np.ndarray:
    """Parameter of the nearest curve point for each query (generic curves)."""
    dense = 1 << 15
    ts = np.linspace(0.0, 1.0, dense + 1)
    tree = cKDTree(curve.point(ts))
    _, idx = tree.query(pts)
    t = ts[idx]
    h = 1.0 / dense
    # Newton steps on d/dt |gamma(t) - x|^2 / 2, safeguarded to the bracket.
    lo, hi = np.clip(t - h, 0.0, 1.0), np.clip(t + h, 0.0, 1.0)
    for _ in range(30):
        diff = curve.point(t) - pts
        d1 = curve.derivative(t, 1)
        d2 = curve.derivative(t, 2)
        g = np.sum(diff * d1, axis=-1)
        hess = np.sum(d1 * d1, axis=-1) + np.sum(diff * d2, axis=-1)
        step = np.where(hess > 0, g / np.where(hess > 0, hess, 1.0), 0.0)
        t_new = np.clip(t - step, lo, hi)
        if np.max(np.abs(t_new - t)) < 1e-15:
            t = t_new
            break
        t = t_new
    return t


def normal_frame(curve: Curve, points, reach: float | None = None) -> NormalFrame:
    """Distance field, unit normal and tangential frame at the query points.

    Points on the concave side farther than ``reach`` (default 1/(2 max
    curvature)) are rejected since their nearest point may not be unique.
    On the curve itself the normal is the outward one, continued from outside.
    """
    pts = np.asarray(points, dtype=float)
    if pts.shape[-1] != 2:
        raise ValueError("points must have a trailing dimension of 2")
    shape = pts.shape[:-1]
    pts = pts.reshape(-1, 2)
    reach = curve.default_reach() if reach is None else reach
    if curve.kind == "circle":
        c = np.asarray(curve.params["center"])
        r = curve.params["radius"]
        rel = pts - c
        dist = np.linalg.norm(rel, axis=-1)
        at_center = dist < 1e-300
        if np.any(at_center) and r > reach:
            raise CurveError("query at the circle center: nearest point ambiguous")
        outward = np.where(at_center[:, None], np.array([1.0, 0.0]),
                           rel / np.where(at_center, 1.0, dist)[:, None])
        foot = c + r * outward
        foot_t = (np.arctan2(outward[:, 1], outward[:, 0]) / (2 * np.pi)) % 1.0
        inside = dist < r
        nu = np.abs(dist - r)
        if np.any(inside & (nu > reach)):
            bad = pts[np.argmax(inside & (nu > reach))]
            raise CurveError(f"point {bad.tolist()} is beyond reach {reach}: nearest point ambiguous")
        grad = np.where(inside[:, None], -outward, outward)
    else:
        if curve.kind == "line":
            lam = curve.params["lambda"]
            lo, hi = curve._span()
            d = np.array([lam, 1.0]) / math.hypot(lam, 1.0)
            s = np.clip(pts @ d / math.hypot(lam, 1.0), lo, hi)
            foot_t = (s - lo) / (hi - lo)
        else:
            foot_t = _nearest_parameter(curve, pts)
        foot = curve.point(foot_t)
        diff = pts - foot
        nu = np.linalg.norm(diff, axis=-1)
        tan = curve.tangent(foot_t)
        normal = np.stack([tan[:, 1], -tan[:, 0]], axis=-1)
        if curve.kind == "graph":
            d2 = curve.derivative(foot_t, 2)
            concave = np.sum(diff * d2, axis=-1) > 0
            if np.any(concave & (nu > reach)):
                bad = pts[np.argmax(concave & (nu > reach))]
                raise CurveError(f"point {bad.tolist()} is beyond reach {reach}: nearest point ambiguous")
        on_curve = nu < 1e-14
        grad = np.where(on_curve[:, None], normal, diff / np.where(on_curve, 1.0, nu)[:, None])
    tangential = np.stack([-grad[:, 1], grad[:, 0]], axis=-1)
    return NormalFrame(
        nu=nu.reshape(shape),
        grad_nu=grad.reshape(shape + (2,)),
        tangential=tangential.reshape(shape + (2,)),
        foot=foot.reshape(shape + (2,)),
        foot_t=np.asarray(foot_t).reshape(shape),
    )


def distance(curve: Curve, points) -> np.ndarray:
    """Euclidean distance to the curve with no reach check."""
    return normal_frame(curve, points, reach=math.inf).nu


def extension_kernel(curve: Curve, xs, weight=None, n: int | None = None):
    """Fourier extension of the weighted arc measure evaluated at spatial points.

    Returns integral over the curve of exp(i x . lambda) weight(lambda) d(sigma).
    The quadrature must resolve the oscillation: max|x| * (arc spacing) <= 1/4.
    """
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    xmax = float(np.max(np.linalg.norm(xs, axis=-1))) if xs.size else 0.0
    length = curve.length
    needed = max(8, int(math.ceil(4.0 * xmax * length)))
    if n is None:
        n = max(needed, 256)
    elif n < needed:
        raise ValueError(f"extension kernel under-resolved: need at least {needed} nodes, got {n}")
    nodes, w = arc_quadrature(curve, n)
    if weight is not None:
        w = w * np.asarray(weight(nodes), dtype=float)
    out = np.empty(len(xs), dtype=complex)
    chunk = max(1, 4_000_000 // n)
    for i in range(0, len(xs), chunk):
        phase = xs[i:i + chunk] @ nodes.T
        out[i:i + chunk] = np.exp(1j * phase) @ w
    return out


def kernel_envelope_slope(curve: Curve, direction, r_range=(10.0, 300.0), bins: int = 12,
                          samples: int = 20000, weight=None) -> float:
    """Log-log slope of the extension-kernel envelope along a ray.

    The envelope is the maximum of |kernel| over each of ``bins`` geometric
    windows of the radius; the slope is a least-squares fit through those
    maxima, so oscillation between stationary points does not bias it.
    """
    lo, hi = map(float, r_range)
    if not 0 < lo < hi:
        raise ValueError("need 0 < r_min < r_max")
    d = np.asarray(direction, dtype=float)
    norm = np.linalg.norm(d)
    if norm == 0:
        raise ValueError("direction must be nonzero")
    r = np.linspace(lo, hi, samples)
    k = np.abs(extension_kernel(curve, r[:, None] * (d / norm)[None, :], weight=weight))
    edges = np.geomspace(lo, hi, bins + 1)
    xs, ys = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        sel = (r >= a) & (r < b)
        if not sel.any():
            continue
        i = np.argmax(k[sel])
        xs.append(r[sel][i])
        ys.append(max(k[sel][i], 1e-300))
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])
