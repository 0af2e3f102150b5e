"""Predicted decay exponents for narrow-band pseudo-products.

``predict`` returns the largest exponent rho for which a bound
|B| <~ eps^rho (possibly with a logarithmic factor, or up to an arbitrary
small loss delta) is proved for the given geometry, and ``necessary_ceiling``
returns the smallest exponent any such bound can have.  All region tests run
on exact rationals in the inverse exponents (1/p, 1/q, 1/r).
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.optimize import linprog

from .norms import INF, LebesgueTriple, format_exponent

GEOMETRIES = ("nowhere_characteristic", "nonvanishing_curvature", "arbitrary",
              "line_nondegenerate", "line_degenerate")
CLASSES = ("M_eps", "N_eps")
LOG_CORRECTIONS = ("none", "sqrt_log", "log")

_ALIASES = {
    "curvature": "nonvanishing_curvature",
    "nowhere": "nowhere_characteristic",
    "noncharacteristic": "nowhere_characteristic",
    "non_characteristic": "nowhere_characteristic",
    "general": "arbitrary",
    "line": "line_nondegenerate",
    "degenerate_line": "line_degenerate",
}

HALF = Fraction(1, 2)
ONE = Fraction(1)
ZERO = Fraction(0)


class RegimeMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class Regime:
    """Curve geometry plus symbol class.

    ``lam`` is the slope of a line regime (the line xi = lam * eta); the
    degenerate lines are lam = 0 and lam = -1.
    """

    geometry: str
    symbol_class: str = "M_eps"
    lam: object = None

    def __post_init__(self):
        geometry = _ALIASES.get(self.geometry, self.geometry)
        object.__setattr__(self, "geometry", geometry)
        if geometry not in GEOMETRIES:
            raise RegimeMismatchError(f"unknown geometry {self.geometry!r}; expected one of {GEOMETRIES}")
        if self.symbol_class not in CLASSES:
            raise RegimeMismatchError(f"unknown symbol class {self.symbol_class!r}; expected M_eps or N_eps")
        lam = self.lam
        if geometry == "line_degenerate":
            lam = 0 if lam is None else lam
            if lam not in (0, -1):
                raise RegimeMismatchError(f"degenerate lines have lam in {{0, -1}}, got {lam}")
        elif geometry == "line_nondegenerate":
            if lam is not None and lam in (0, -1):
                raise RegimeMismatchError(f"lam={lam} is a degenerate line")
        elif lam is not None:
            raise RegimeMismatchError(f"lam only applies to line regimes, not {geometry}")
        object.__setattr__(self, "lam", lam)

    @classmethod
    def parse(cls, value) -> "Regime":
        if isinstance(value, Regime):
            return value
        if isinstance(value, dict):
            return cls(**value)
        return cls(str(value))

    @classmethod
    def for_curve(cls, curve, symbol_class: str = "M_eps") -> "Regime":
        """The most specific geometry a curve belongs to."""
        from .curves import is_nowhere_characteristic

        if curve.kind == "line":
            lam = curve.params["lambda"]
            if lam in (0, -1):
                return cls("line_degenerate", symbol_class, lam)
            return cls("line_nondegenerate", symbol_class, lam)
        if is_nowhere_characteristic(curve):
            return cls("nowhere_characteristic", symbol_class)
        if curve.min_curvature() > 0:
            return cls("nonvanishing_curvature", symbol_class)
        return cls("arbitrary", symbol_class)

    def check_curve(self, curve) -> None:
        """Raise if the curve does not have the geometry this regime assumes."""
        from .curves import is_nowhere_characteristic

        is_line = curve.kind == "line"
        if self.geometry.startswith("line") != is_line:
            raise RegimeMismatchError(f"regime {self.geometry} does not apply to a {curve.kind} curve")
        if is_line and self != Regime.for_curve(curve, self.symbol_class):
            raise RegimeMismatchError(f"line slope {curve.params['lambda']} does not match {self.geometry}")
        if self.geometry == "nonvanishing_curvature" and not curve.min_curvature() > 0:
            raise RegimeMismatchError("curvature regime needs strictly positive curvature")
        if self.geometry == "nowhere_characteristic" and not is_nowhere_characteristic(curve):
            raise RegimeMismatchError("curve has characteristic points")

    def label(self) -> str:
        tail = "" if self.lam is None else f",lam={self.lam}"
        return f"{self.geometry}/{self.symbol_class}{tail}"


@dataclass(frozen=True)
class ExponentPrediction:
    rho: Fraction | None
    optimal: bool
    log_correction: str
    delta_loss: bool
    source: str
    ceiling: Fraction | None = None

    @property
    def proven(self) -> bool:
        return self.rho is not None

    def rho_float(self) -> float:
        return math.nan if self.rho is None else float(self.rho)

    def to_record(self) -> dict:
        return {
            "rho": None if self.rho is None else str(self.rho),
            "optimal": self.optimal,
            "log_correction": self.log_correction,
            "delta_loss": self.delta_loss,
            "source": self.source,
            "ceiling": None if self.ceiling is None else str(self.ceiling),
        }

    def summary(self) -> str:
        rho = "none" if self.rho is None else _plain(self.rho)
        parts = [f"rho={rho}", f"optimal={str(self.optimal).lower()}"]
        if self.log_correction != "none":
            parts.append(f"log={self.log_correction}")
        if self.delta_loss:
            parts.append("delta_loss=true")
        return " ".join(parts)


def _plain(x: Fraction) -> str:
    """0.5 for 1/2, 1 for 1, exact fraction otherwise."""
    x = Fraction(x)
    if x.denominator == 1:
        return str(x.numerator)
    as_float = float(x)
    if Fraction(repr(as_float)) == x:
        return repr(as_float)
    return f"{x.numerator}/{x.denominator}"


@dataclass(frozen=True)
class _Candidate:
    rho: Fraction
    log: str = "none"
    delta: bool = False
    source: str = ""

    def key(self):
        return (self.rho, not self.delta, -LOG_CORRECTIONS.index(self.log))


def _triple(triple) -> LebesgueTriple:
    if isinstance(triple, LebesgueTriple):
        return triple
    return LebesgueTriple(*triple)


def _low_sum(x) -> Fraction:
    """1/max(p,2) + 1/max(q,2) + 1/max(r,2) - 1."""
    return sum((min(v, HALF) for v in x), ZERO) - 1


# Endpoint statements, keyed by inverse exponents up to permutation.
_ENDPOINTS = {
    "nowhere_characteristic": {
        (ONE, ONE, HALF): (_Candidate(ONE, source="(1,1,2) endpoint, nowhere characteristic"),),
        (HALF, HALF, ONE): (_Candidate(ONE, source="(2,2,1) endpoint, nowhere characteristic"),),
        (ZERO, ONE, HALF): (_Candidate(Fraction(1, 4), source="(inf,1,2) endpoint, nowhere characteristic"),),
        (ONE, ONE, ZERO): (_Candidate(HALF, source="(1,1,inf) endpoint, nowhere characteristic"),),
        (ONE, ONE, ONE): (_Candidate(ONE, source="(1,1,1) endpoint"),),
    },
    "nonvanishing_curvature": {
        (ONE, ONE, HALF): (_Candidate(ONE, "sqrt_log", source="(1,1,2) endpoint, curvature"),),
        (HALF, HALF, ONE): (_Candidate(Fraction(3, 4), source="(2,2,1) endpoint, curvature"),),
        (ZERO, ONE, HALF): (_Candidate(Fraction(1, 4), "sqrt_log", source="(inf,1,2) endpoint, curvature"),),
        (ONE, ONE, ZERO): (_Candidate(HALF, "log", source="(1,1,inf) endpoint, curvature"),),
        (ONE, ONE, ONE): (_Candidate(ONE, source="(1,1,1) endpoint"),),
    },
    "arbitrary": {
        (ONE, ONE, HALF): (_Candidate(HALF, source="(1,1,2) endpoint, arbitrary curve"),),
        (HALF, HALF, ONE): (_Candidate(HALF, source="(2,2,1) endpoint, arbitrary curve"),),
        (ZERO, ONE, HALF): (_Candidate(ZERO, source="(inf,1,2) endpoint, arbitrary curve"),),
        (ONE, ONE, ZERO): (_Candidate(ZERO, source="(1,1,inf) endpoint, arbitrary curve"),),
        (ONE, ONE, ONE): (_Candidate(ONE, source="(1,1,1) endpoint"),),
    },
}


_ENDPOINT_KEYS = {geometry: {tuple(sorted(k)): v for k, v in table.items()}
                  for geometry, table in _ENDPOINTS.items()}


def _endpoint(x, geometry):
    return list(_ENDPOINT_KEYS.get(geometry, {}).get(tuple(sorted(x)), ()))


def _general(x) -> list:
    """Interpolated bound valid for every smooth compact curve."""
    s = sum(x, ZERO)
    zeros = sum(1 for v in x if v == 0)
    out = []
    rho = _low_sum(x)
    if (1 <= s <= Fraction(3, 2) and zeros == 0 and rho >= 0) or (s >= Fraction(3, 2) and zeros <= 1):
        out.append(_Candidate(rho, source="interpolated general bound"))
    if all(v >= HALF for v in x):
        out.append(_Candidate(min(x), source="general bound, all exponents at most 2"))
    return out + _endpoint(x, "arbitrary")


def _nowhere(x) -> list:
    s = sum(x, ZERO)
    zeros = sum(1 for v in x if v == 0)
    out = _general(x)
    if max(x) > HALF and ((1 <= s <= 2 and zeros == 0) or (s == 2 and zeros <= 1)):
        rho = min(_low_sum(x) + max(x) - HALF, ONE)
        out.append(_Candidate(rho, source="interpolated nowhere-characteristic bound"))
    if all(v >= HALF for v in x) and s >= 2:
        out.append(_Candidate(ONE, source="nowhere characteristic, all exponents at most 2"))
    if zeros == 0:
        pairs_ok = all(x[i] + x[j] <= Fraction(3, 2) for i, j in ((0, 1), (0, 2), (1, 2)))
        if 1 <= s < 2 and pairs_ok:
            out.append(_Candidate(s - 1, source="nowhere characteristic, scaling region"))
        for i in range(3):
            j, k = (m for m in range(3) if m != i)
            if x[i] <= HALF <= min(x[j], x[k]) and x[j] + x[k] >= Fraction(3, 2):
                out.append(_Candidate(x[i] + HALF, source="nowhere characteristic, one index above 2"))
    return out + _endpoint(x, "nowhere_characteristic")


def _curvature(x, symbol_class) -> list:
    s = sum(x, ZERO)
    zeros = sum(1 for v in x if v == 0)
    out = _general(x)
    if zeros == 0:
        if all(v <= HALF for v in x):
            out.append(_Candidate(s - 1, source="curvature, all exponents at least 2"))
        for i in range(3):
            j, k = (m for m in range(3) if m != i)
            if x[i] < HALF and x[j] > HALF and x[k] > HALF:
                rho = -HALF + x[i] + (x[j] + x[k]) / 2
                out.append(_Candidate(rho, delta=True, source="curvature, one index above 2"))
        if s > Fraction(5, 2):
            out.append(_Candidate(ONE, source="curvature, 1/p+1/q+1/r > 5/2"))
        if all(v > HALF for v in x) and Fraction(3, 2) <= s <= Fraction(5, 2):
            out.append(_Candidate((s - HALF) / 2, delta=True, source="curvature, all exponents below 2"))
        if symbol_class == "N_eps":
            out.extend(_curvature_tangential(x, s))
    return out + _endpoint(x, "nonvanishing_curvature")


def _curvature_tangential(x, s) -> list:
    """Extra bounds for tangentially smooth symbols, exactly one index below 2."""
    low = [i for i in range(3) if x[i] > HALF]
    if len(low) != 1:
        return []
    out = []
    i = low[0]
    j, k = (m for m in range(3) if m != i)
    for big, mid in ((j, k), (k, j)):
        # big has the larger exponent (smaller inverse), both above 2
        if x[big] < x[mid] < HALF and x[i] + x[mid] > 1:
            rho = -HALF + x[big] + (x[i] + x[mid]) / 2
            out.append(_Candidate(rho, delta=True, source="curvature, tangentially smooth, mixed indices"))
    if x[i] + x[j] < 1 and x[i] + x[k] < 1 and s > 1:
        out.append(_Candidate(s - 1, delta=True, source="curvature, tangentially smooth, scaling region"))
    return out


def _line(x, regime: Regime) -> list:
    s = sum(x, ZERO)
    if regime.geometry == "line_nondegenerate":
        if s <= 2:
            return [_Candidate(s - 1, source="non-degenerate line")]
        # the cut-off segment is compact and nowhere characteristic
        return _nowhere(x)
    a, b, c = _line_roles(x, regime.lam)
    if s <= 2 and b + c <= 1:
        return [_Candidate(s - 1, source="degenerate line")]
    return _general(x)


def _line_roles(x, lam):
    """Reorder so the first entry is the index localized by a degenerate line."""
    if lam == -1:
        return x[2], x[1], x[0]
    return x


def _choose(candidates):
    if not candidates:
        return None
    return max(candidates, key=_Candidate.key)


def necessary_ceiling(triple, regime) -> Fraction:
    """Smallest exponent compatible with the known lower-bound constructions."""
    t = _triple(triple)
    regime = Regime.parse(regime)
    x = t.inverses
    s = sum(x, ZERO)
    ceiling = min(ONE, s - 1)
    geometry = regime.geometry
    if geometry in ("nonvanishing_curvature", "arbitrary"):
        # focusing at a characteristic point with curvature, any of the three axes
        ceiling = min(ceiling, min(-HALF + (s + v) / 2 for v in x))
    if geometry == "arbitrary":
        # a flat piece along each characteristic axis
        ceiling = min(ceiling, min(x))
    if geometry == "line_degenerate":
        ceiling = min(ceiling, _line_roles(x, regime.lam)[0])
    if geometry in ("nonvanishing_curvature", "nowhere_characteristic", "arbitrary"):
        # exact kernel asymptotics of the smoothed arc measure at (1,1,r)
        low, mid, high = sorted(x)
        if mid == 1 and low <= HALF:
            ceiling = min(ceiling, HALF + low)
    return ceiling


def predict(triple, regime) -> ExponentPrediction:
    """Best proven exponent for the triple in the regime (rho=None if none)."""
    t = _triple(triple)
    regime = Regime.parse(regime)
    x = t.inverses
    geometry = regime.geometry
    if geometry == "arbitrary":
        candidates = _general(x)
    elif geometry == "nowhere_characteristic":
        candidates = _nowhere(x)
    elif geometry == "nonvanishing_curvature":
        candidates = _curvature(x, regime.symbol_class)
    else:
        candidates = _line(x, regime)
    ceiling = necessary_ceiling(t, regime)
    best = _choose(candidates)
    if best is None:
        return ExponentPrediction(None, False, "none", False, "no proven bound", ceiling)
    if best.rho > ceiling:
        raise AssertionError(f"prediction {best.rho} exceeds ceiling {ceiling} for {t} in {regime.label()}")
    return ExponentPrediction(best.rho, best.rho == ceiling, best.log, best.delta, best.source, ceiling)


_HULL_VERTICES = None


def _hull_vertices():
    global _HULL_VERTICES
    if _HULL_VERTICES is None:
        base = [(1, 1, 1), (1, 1, Fraction(1, 2)), (Fraction(2, 3), Fraction(2, 3), 1)]
        pts = sorted({y for b in base for y in itertools.permutations(b)})
        _HULL_VERTICES = np.array([[float(v) for v in y] for y in pts])
    return _HULL_VERTICES


def in_restriction_hull(x, tol: float = 1e-9) -> bool:
    """Convex-hull membership of inverse exponents, as an LP feasibility problem."""
    verts = _hull_vertices()
    k = len(verts)
    a_eq = np.vstack([verts.T, np.ones((1, k))])
    b_eq = np.array([float(v) for v in x] + [1.0])
    res = linprog(np.zeros(k), A_eq=a_eq, b_eq=b_eq, bounds=[(0, None)] * k, method="highs")
    if res.status != 0:
        return False
    return bool(np.abs(a_eq @ res.x - b_eq).max() <= tol)


def restriction_extension_admissible(triple, regime) -> tuple:
    """(admissible, reason) for the arc-measure pseudo-product of the regime."""
    t = _triple(triple)
    regime = Regime.parse(regime)
    x = t.inverses
    s = t.inverse_sum
    finite = all(v > 0 for v in x)
    if regime.geometry == "nonvanishing_curvature":
        if finite and s > Fraction(5, 2):
            return True, "curvature, 1/p+1/q+1/r > 5/2"
        signed = (x[0] - x[1] + x[2], -x[0] + x[1] + x[2], x[0] + x[1] - x[2])
        if finite and all(v < 1 for v in x) and all(v <= 1 for v in signed) and s > Fraction(7, 3):
            return True, "curvature, kernel-decay interpolation region"
        if in_restriction_hull(x):
            return True, "curvature, convex hull of (1,1,1), (1,1,2), (3/2,3/2,1)"
        return False, "outside the proven curvature regions"
    if regime.geometry == "nowhere_characteristic":
        if all(v >= HALF for v in x) and s >= 2:
            return True, "nowhere characteristic, exponents at most 2 with 1/p+1/q+1/r >= 2"
        return False, "outside the proven nowhere-characteristic region"
    pred = predict(t, regime)
    if pred.rho is not None and pred.rho >= 1 and pred.log_correction == "none" and not pred.delta_loss:
        return True, f"decay eps^1 proved ({pred.source})"
    return False, "no eps^1 bound proved"


CSV_COLUMNS = ("p", "q", "r", "rho", "optimal", "log_correction", "delta_loss", "source")


def prediction_table(triples, regime) -> list:
    regime = Regime.parse(regime)
    rows = []
    for triple in triples:
        t = _triple(triple)
        pred = predict(t, regime)
        rows.append({
            "p": format_exponent(t.p), "q": format_exponent(t.q), "r": format_exponent(t.r),
            "rho": "none" if pred.rho is None else str(pred.rho),
            "optimal": str(pred.optimal).lower(),
            "log_correction": pred.log_correction,
            "delta_loss": str(pred.delta_loss).lower(),
            "source": pred.source,
        })
    return rows


def table_csv(triples, regime) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(prediction_table(triples, regime))
    return buf.getvalue()


def exponent_grid(steps: int = 21) -> list:
    """All sub-Hoelder triples whose inverse exponents lie on a uniform grid of [0, 1]."""
    values = [Fraction(k, steps - 1) for k in range(steps)]
    out = []
    for x in itertools.product(values, repeat=3):
        if sum(x) >= 1:
            out.append(tuple(INF if v == 0 else 1 / v for v in x))
    return out


__all__ = [
    "GEOMETRIES", "CLASSES", "Regime", "RegimeMismatchError", "ExponentPrediction",
    "predict", "necessary_ceiling", "restriction_extension_admissible", "in_restriction_hull",
    "prediction_table", "table_csv", "exponent_grid", "CSV_COLUMNS",
]
