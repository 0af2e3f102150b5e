"""Epsilon sweeps, power-law fits and measured-versus-predicted verdicts."""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin

from .curves import Curve, CurveError
from .engine import GridFunction, apply_bilinear, gaussian
from .exponents import ExponentPrediction, Regime, RegimeMismatchError, necessary_ceiling, predict
from .norms import (InvalidExponentError, LebesgueTriple, NormEstimate, best_lower_bound,
                    lp_norm, witness_lower_bound, WitnessResolutionError)
from .symbols import (FrequencyGrid, GridResolutionError, build_bochner_riesz,
                      build_convolved_measure_symbol, build_dilated_bochner_riesz,
                      build_line_symbol, build_tube_symbol, constant_symbol, max_layer_index,
                      verify_class, whitney_layers)

BUILDERS = ("tube", "convolved", "line")
CORRECTIONS = ("auto", "none", "sqrt_log", "log")
DEFAULT_EPSILONS = tuple(2.0 ** -k for k in range(3, 7))
DEFAULT_TOLERANCE = 0.15
LOOSE_TOLERANCE = 0.25
MIN_R_SQUARED = 0.98
_LOG_COEFFICIENT = {"none": 0.0, "sqrt_log": 0.5, "log": 1.0}


class ConfigError(ValueError):
    """A sweep configuration that does not match the schema.

    ``pointer`` is the JSON pointer of the offending field.
    """

    def __init__(self, pointer: str, message: str):
        super().__init__(f"{pointer or '/'}: {message}")
        self.pointer = pointer
        self.message = message


class SweepPointError(RuntimeError):
    def __init__(self, epsilon: float, cause: Exception):
        super().__init__(f"sweep failed at eps={epsilon:g}: {cause}")
        self.epsilon = epsilon
        self.cause = cause


class CeilingViolation(RuntimeError):
    """A measured lower bound decays more slowly than any true norm can."""


# -- configuration -------------------------------------------------------------------


@dataclass
class SweepConfig:
    builder: str
    triple: LebesgueTriple
    curve: Curve
    regime: Regime
    epsilons: tuple = DEFAULT_EPSILONS
    builder_params: dict = field(default_factory=dict)
    grid_n: int = 1024
    half_width: float = 2.0
    families: tuple = ("flat_hats", "rescaled_bumps")
    ascent: dict | None = field(default_factory=lambda: {"restarts": 8, "iters": 12})
    seed: int = 0
    threads: int = 1
    log_correction: str = "auto"
    tolerance: float | None = None

    def __post_init__(self):
        if self.builder not in BUILDERS:
            raise ConfigError("/builder", f"unknown builder {self.builder!r}; expected one of {BUILDERS}")
        if self.log_correction not in CORRECTIONS:
            raise ConfigError("/log_correction", f"expected one of {CORRECTIONS}")
        eps = tuple(float(e) for e in self.epsilons)
        if len(eps) < 4:
            raise ConfigError("/epsilons", "a sweep needs at least 4 values of eps")
        for i, e in enumerate(eps):
            k = -math.log2(e) if e > 0 else math.nan
            if not (e > 0 and abs(k - round(k)) < 1e-12):
                raise ConfigError(f"/epsilons/{i}", f"eps={e!r} is not a dyadic power 2^-k")
        self.epsilons = tuple(sorted(set(eps), reverse=True))
        grid = self.grid()
        for i, e in enumerate(self.epsilons):
            try:
                grid.check_resolution(e)
            except GridResolutionError as exc:
                raise ConfigError(f"/epsilons/{i}", str(exc)) from exc
        try:
            self.regime.check_curve(self.curve)
        except RegimeMismatchError as exc:
            raise ConfigError("/regime", str(exc)) from exc

    def grid(self) -> FrequencyGrid:
        try:
            return FrequencyGrid(self.half_width, self.grid_n)
        except ValueError as exc:
            raise ConfigError("/grid_n", str(exc)) from exc

    def build_symbol(self, epsilon: float):
        grid = self.grid()
        params = dict(self.builder_params)
        if self.builder == "tube":
            return build_tube_symbol(self.curve, epsilon, grid, ripple=params.get("ripple", 0.0))
        if self.builder == "convolved":
            return build_convolved_measure_symbol(self.curve, epsilon, grid)
        return build_line_symbol(self.curve.params["lambda"], epsilon, grid)

    def to_dict(self) -> dict:
        return {
            "builder": self.builder,
            "curve": self.curve.to_dict(),
            "builder_params": self.builder_params,
            "regime": {"geometry": self.regime.geometry, "symbol_class": self.regime.symbol_class},
            "triple": self.triple.to_list(),
            "epsilons": list(self.epsilons),
            "grid_n": self.grid_n,
            "half_width": self.half_width,
            "families": list(self.families),
            "ascent": self.ascent,
            "seed": self.seed,
            "threads": self.threads,
            "log_correction": self.log_correction,
            "tolerance": self.tolerance,
        }

    @classmethod
    def from_dict(cls, doc) -> "SweepConfig":
        """Validate a JSON document; errors carry the JSON pointer of the bad field."""
        if not isinstance(doc, dict):
            raise ConfigError("", "config must be a JSON object")
        known = {"builder", "curve", "builder_params", "regime", "triple", "epsilons", "grid_n",
                 "half_width", "families", "ascent", "seed", "threads", "log_correction",
                 "tolerance", "lambda"}
        for key in doc:
            if key not in known:
                raise ConfigError(f"/{key}", "unknown field")
        builder = doc.get("builder")
        if builder is None:
            raise ConfigError("/builder", "required field missing")
        if builder not in BUILDERS:
            raise ConfigError("/builder", f"unknown builder {builder!r}; expected one of {BUILDERS}")

        params = doc.get("builder_params", {})
        if not isinstance(params, dict):
            raise ConfigError("/builder_params", "must be an object")
        if builder == "line":
            lam = params.get("lambda", doc.get("lambda"))
            if not isinstance(lam, (int, float)):
                raise ConfigError("/builder_params/lambda", "line builder needs a numeric lambda")
            curve = Curve.line(lam)
        else:
            if "curve" not in doc:
                raise ConfigError("/curve", "required field missing")
            if not isinstance(doc["curve"], dict):
                raise ConfigError("/curve", "must be an object")
            try:
                curve = Curve.from_dict(doc["curve"])
            except (CurveError, TypeError, ValueError) as exc:
                pointer = "/curve/kind" if "kind" in str(exc) else "/curve"
                raise ConfigError(pointer, str(exc)) from exc

        triple_doc = doc.get("triple")
        if not isinstance(triple_doc, list) or len(triple_doc) != 3:
            raise ConfigError("/triple", "expected a list of three exponents")
        try:
            triple = LebesgueTriple(*triple_doc)
        except InvalidExponentError as exc:
            raise ConfigError("/triple", str(exc)) from exc

        default_class = "N_eps" if builder in ("convolved", "line") else "M_eps"
        regime_doc = doc.get("regime")
        try:
            if regime_doc is None:
                regime = Regime.for_curve(curve, default_class)
            elif isinstance(regime_doc, str):
                regime = Regime(regime_doc, default_class, _line_lam(curve, regime_doc))
            elif isinstance(regime_doc, dict):
                geometry = regime_doc.get("geometry")
                if not isinstance(geometry, str):
                    raise ConfigError("/regime/geometry", "required string field")
                regime = Regime(geometry, regime_doc.get("symbol_class", default_class),
                                _line_lam(curve, geometry))
            else:
                raise ConfigError("/regime", "must be a string or an object")
        except RegimeMismatchError as exc:
            raise ConfigError("/regime", str(exc)) from exc

        kwargs = {}
        for key, kind in (("grid_n", int), ("seed", int), ("threads", int)):
            if key in doc:
                if not isinstance(doc[key], int) or isinstance(doc[key], bool) or doc[key] < 0:
                    raise ConfigError(f"/{key}", "expected a nonnegative integer")
                kwargs[key] = doc[key]
        if "threads" in kwargs and kwargs["threads"] < 1:
            raise ConfigError("/threads", "need at least one thread")
        for key in ("half_width", "tolerance"):
            if key in doc and doc[key] is not None:
                if not isinstance(doc[key], (int, float)) or doc[key] <= 0:
                    raise ConfigError(f"/{key}", "expected a positive number")
                kwargs[key] = float(doc[key])
        if "epsilons" in doc:
            eps = doc["epsilons"]
            if not isinstance(eps, list):
                raise ConfigError("/epsilons", "expected a list of numbers")
            for i, e in enumerate(eps):
                if not isinstance(e, (int, float)) or isinstance(e, bool):
                    raise ConfigError(f"/epsilons/{i}", "expected a number")
            kwargs["epsilons"] = tuple(eps)
        if "families" in doc:
            fams = doc["families"]
            if not isinstance(fams, list):
                raise ConfigError("/families", "expected a list of witness families")
            from .norms import FAMILIES
            for i, fam in enumerate(fams):
                if fam not in FAMILIES:
                    raise ConfigError(f"/families/{i}", f"unknown witness family {fam!r}")
            kwargs["families"] = tuple(fams)
        if "ascent" in doc:
            asc = doc["ascent"]
            if asc is not None:
                if not isinstance(asc, dict):
                    raise ConfigError("/ascent", "expected an object or null")
                for key in asc:
                    if key not in ("restarts", "iters"):
                        raise ConfigError(f"/ascent/{key}", "unknown field")
                    if not isinstance(asc[key], int) or asc[key] < 1:
                        raise ConfigError(f"/ascent/{key}", "expected a positive integer")
            kwargs["ascent"] = asc
        if "log_correction" in doc:
            kwargs["log_correction"] = doc["log_correction"]
        return cls(builder=builder, triple=triple, curve=curve, regime=regime,
                   builder_params=params, **kwargs)

    @classmethod
    def from_json(cls, text: str) -> "SweepConfig":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError("", f"invalid JSON: {exc}") from exc
        return cls.from_dict(doc)


def _line_lam(curve: Curve, geometry: str):
    if curve.kind == "line" and geometry.startswith("line"):
        return curve.params["lambda"]
    return None


# -- fitting ----------------------------------------------------------------------


@dataclass(frozen=True)
class PowerFit:
    slope: float
    intercept: float
    log_coefficient: float
    r_squared: float


def _lstsq(log_eps, response):
    design = np.vstack([log_eps, np.ones_like(log_eps)]).T
    coef, *_ = np.linalg.lstsq(design, response, rcond=None)
    resid = response - design @ coef
    total = np.sum((response - response.mean()) ** 2)
    ss = float(np.sum(resid ** 2))
    r2 = 1.0 - ss / total if total > 0 else 1.0
    return float(coef[0]), float(coef[1]), ss, float(r2)


def fit_power_law(points, correction: str = "none") -> PowerFit:
    """Fit log v = slope log eps + intercept + c log(-log eps).

    ``correction`` fixes c: none -> 0, sqrt_log -> 1/2, log -> 1; ``select``
    tries c in {0, 1/2} and keeps the smaller residual.
    """
    pts = [(float(e), float(v)) for e, v in points]
    if len(pts) < 3:
        raise ValueError("need at least 3 points to fit")
    if any(v <= 0 for _, v in pts):
        raise ValueError("power-law fit needs positive values")
    if any(not 0 < e < 1 for e, _ in pts):
        raise ValueError("eps values must lie in (0, 1)")
    log_eps = np.log([e for e, _ in pts])
    log_v = np.log([v for _, v in pts])
    if correction == "select":
        options = [0.0, 0.5]
    elif correction in _LOG_COEFFICIENT:
        options = [_LOG_COEFFICIENT[correction]]
    else:
        raise ValueError(f"unknown correction {correction!r}")
    best = None
    for c in options:
        slope, intercept, ss, r2 = _lstsq(log_eps, log_v - c * np.log(-log_eps))
        if best is None or ss < best[0] - 1e-15:
            best = (ss, PowerFit(slope, intercept, c, r2))
    return best[1]


class PowerLawRegressor(RegressorMixin, BaseEstimator):
    """sklearn-style wrapper: X is a column of eps values, y the measured norms."""

    def __init__(self, correction: str = "none"):
        self.correction = correction

    def fit(self, X, y):
        eps = np.asarray(X, dtype=float).reshape(-1)
        fit = fit_power_law(zip(eps, np.asarray(y, dtype=float)), self.correction)
        self.slope_ = fit.slope
        self.intercept_ = fit.intercept
        self.log_coefficient_ = fit.log_coefficient
        self.r_squared_ = fit.r_squared
        return self

    def predict(self, X):
        eps = np.asarray(X, dtype=float).reshape(-1)
        return np.exp(self.intercept_ + self.slope_ * np.log(eps)
                      + self.log_coefficient_ * np.log(-np.log(eps)))


# -- sweeps -----------------------------------------------------------------------


@dataclass
class SweepPoint:
    epsilon: float
    value: float
    witness: str
    estimates: dict = field(default_factory=dict)


@dataclass
class ScalingFit:
    slope: float
    intercept: float
    log_coefficient: float
    r_squared: float
    points: list
    predicted: ExponentPrediction
    verdict: str
    tolerance: float = DEFAULT_TOLERANCE
    ceiling: float | None = None
    note: str = ""
    witnesses: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "log_coefficient": self.log_coefficient,
            "r_squared": self.r_squared,
            "points": [[e, v] for e, v in self.points],
            "predicted": self.predicted.to_record(),
            "verdict": self.verdict,
            "tolerance": self.tolerance,
            "ceiling": self.ceiling,
            "note": self.note,
        }

    def verdict_line(self) -> str:
        rho = "none" if self.predicted.rho is None else f"{float(self.predicted.rho):.6g}"
        return f"VERDICT {self.verdict} slope={self.slope:.4f} predicted={rho}"


def tolerance_for(prediction: ExponentPrediction, override: float | None = None) -> float:
    if override is not None:
        return override
    if prediction.delta_loss or prediction.log_correction != "none":
        return LOOSE_TOLERANCE
    return DEFAULT_TOLERANCE


def judge(slope: float, r_squared: float, prediction: ExponentPrediction, tolerance: float) -> tuple:
    """(verdict, note) for a fitted slope against a prediction."""
    if prediction.rho is None:
        return "inconclusive", "no proven exponent for this cell"
    if r_squared < MIN_R_SQUARED:
        return "inconclusive", f"r^2={r_squared:.4f} below {MIN_R_SQUARED}"
    gap = abs(slope - float(prediction.rho))
    if gap <= tolerance:
        if prediction.delta_loss:
            return "consistent", "consistent up to the arbitrary small loss delta"
        side = "upper bound proved optimal" if prediction.optimal else "upper bound only"
        return "consistent", side
    return "inconsistent", f"|slope - rho| = {gap:.4f} > {tolerance}"


def _resolve_correction(config: SweepConfig, prediction: ExponentPrediction) -> str:
    if config.log_correction == "auto":
        return prediction.log_correction
    return config.log_correction


def run_point(config: SweepConfig, epsilon: float) -> SweepPoint:
    try:
        symbol = config.build_symbol(epsilon)
        best, every = best_lower_bound(symbol, config.triple, config.families, config.ascent,
                                       seed=config.seed, threads=1)
    except Exception as exc:  # noqa: BLE001 - reported with the offending eps
        raise SweepPointError(epsilon, exc) from exc
    return SweepPoint(epsilon, best.lower_bound, best.witness,
                      {e.witness: e.lower_bound for e in every})


def _tripwire_armed(config: SweepConfig) -> bool:
    """The ceiling check needs the witnesses that certify it: both analytic families plus the ascent."""
    return config.ascent is not None and {"flat_hats", "rescaled_bumps"} <= set(config.families)


def sweep(config: SweepConfig, out_dir: str | None = None) -> ScalingFit:
    """Measure best lower bounds over the eps list and compare the fitted slope."""
    eps = list(config.epsilons)
    slots = [None] * len(eps)
    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            futures = {pool.submit(run_point, config, e): i for i, e in enumerate(eps)}
            for fut, i in futures.items():
                slots[i] = fut.result()
    else:
        for i, e in enumerate(eps):
            slots[i] = run_point(config, e)

    prediction = predict(config.triple, config.regime)
    correction = _resolve_correction(config, prediction)
    points = [(p.epsilon, p.value) for p in slots]
    fit = fit_power_law(points, correction)
    tol = tolerance_for(prediction, config.tolerance)
    verdict, note = judge(fit.slope, fit.r_squared, prediction, tol)
    ceiling = float(necessary_ceiling(config.triple, config.regime))
    result = ScalingFit(fit.slope, fit.intercept, fit.log_coefficient, fit.r_squared, points,
                        prediction, verdict, tol, ceiling, note, [p.witness for p in slots])
    if _tripwire_armed(config) and fit.r_squared >= MIN_R_SQUARED and fit.slope > ceiling + tol:
        raise CeilingViolation(
            f"fitted slope {fit.slope:.4f} exceeds the necessary ceiling {ceiling} + {tol}")
    if out_dir is not None:
        write_outputs(result, slots, out_dir)
    return result


def slope_without_largest(points, correction: str = "none") -> float:
    """Slope after dropping the largest eps, for stability checks."""
    pts = sorted(points, key=lambda p: p[0])[:-1]
    return fit_power_law(pts, correction).slope


def _fmt(x: float) -> str:
    return repr(float(x))


def results_csv(slots) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["epsilon", "best_lower_bound", "witness"])
    for p in slots:
        writer.writerow([_fmt(p.epsilon), _fmt(p.value), p.witness])
    return buf.getvalue()


def plotdata_tsv(fit: ScalingFit) -> str:
    lines = ["log_epsilon\tlog_value\tlog_fitted"]
    for e, v in fit.points:
        le = math.log(e)
        fitted = fit.intercept + fit.slope * le + fit.log_coefficient * math.log(-le)
        lines.append(f"{_fmt(le)}\t{_fmt(math.log(v))}\t{_fmt(fitted)}")
    return "\n".join(lines) + "\n"


def write_outputs(fit: ScalingFit, slots, out_dir: str) -> list:
    os.makedirs(out_dir, exist_ok=True)
    files = {
        "results.csv": results_csv(slots),
        "fit.json": json.dumps(fit.to_dict(), sort_keys=True, indent=2) + "\n",
        "plotdata.tsv": plotdata_tsv(fit),
    }
    paths = []
    for name, text in files.items():
        path = os.path.join(out_dir, name)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
        paths.append(path)
    return paths


# -- Bochner-Riesz means ----------------------------------------------------------------


@dataclass
class BochnerRieszReport:
    dilations: list
    errors: list
    monotone: bool
    layer_bounds: list
    layer_sups: list
    layer_sum_error: float
    summable: bool

    def table(self) -> list:
        base = self.errors[0] if self.errors else 1.0
        return [{"dilation": d, "error": e, "relative_to_first": e / base if base else 0.0}
                for d, e in zip(self.dilations, self.errors)]


def _hoelder_dual(triple: LebesgueTriple):
    """r' for a Hoelder triple, after checking 1/p + 1/q = 1/r'."""
    if triple.inverse_sum != 1:
        raise InvalidExponentError("Bochner-Riesz convergence needs a Hoelder triple (1/p+1/q+1/r = 1)")
    return triple.inverses[2], triple


def bochner_riesz_convergence(region: dict, kappa: float, triple, dilations=None,
                              grid: FrequencyGrid | None = None, width: float = 8.0,
                              layer_check: bool = True) -> BochnerRieszReport:
    """Relative L^{r'} error of dilated Bochner-Riesz means against f*g.

    f and g are Gaussians of spatial width ``width``; the symbol is dilated
    on a fixed grid, so larger dilations only make it smoother there.
    """
    triple = triple if isinstance(triple, LebesgueTriple) else LebesgueTriple(*triple)
    inv_r, _ = _hoelder_dual(triple)
    r_dual = math.inf if inv_r == 1 else 1 / (1 - inv_r)
    grid = grid or FrequencyGrid()
    dilations = list(dilations or [2.0 ** k for k in range(0, 13)])
    f = gaussian(grid.n, grid.half_width, width)
    g = gaussian(grid.n, grid.half_width, width, modulation=0.1)
    exact = apply_bilinear(constant_symbol(grid), f, g)
    scale = lp_norm(exact, r_dual)
    errors = []
    for lam in dilations:
        b = apply_bilinear(build_dilated_bochner_riesz(region, kappa, lam, grid), f, g)
        diff = GridFunction(b.n, b.half_width, b.values - exact.values, b.side)
        errors.append(lp_norm(diff, r_dual) / scale)
    monotone = all(b < a for a, b in zip(errors, errors[1:]))

    bounds, sups, sum_err, summable = [], [], 0.0, True
    if layer_check:
        base = build_bochner_riesz(region, kappa, grid)
        layers = whitney_layers(base, max_layer_index(grid))
        total = sum(np.asarray(layer.values) for layer in layers)
        sum_err = float(np.max(np.abs(total - np.asarray(base.values))))
        for layer in layers:
            sups.append(float(np.max(np.abs(layer.values))))
            est = _layer_lower_bound(layer, triple)
            bounds.append(est)
        tail = bounds[1:]
        summable = kappa > 0 and all(b <= 0.75 * a for a, b in zip(tail, tail[1:]))
    return BochnerRieszReport(dilations, errors, monotone, bounds, sups, sum_err, summable)


def _layer_lower_bound(layer, triple) -> float:
    best = 0.0
    for fam in ("flat_hats", "rescaled_bumps"):
        try:
            best = max(best, witness_lower_bound(layer, triple, fam).lower_bound)
        except WitnessResolutionError:
            continue
    return best


__all__ = [
    "SweepConfig", "ConfigError", "SweepPointError", "CeilingViolation", "PowerFit",
    "fit_power_law", "PowerLawRegressor", "SweepPoint", "ScalingFit", "sweep", "run_point",
    "judge", "tolerance_for", "slope_without_largest", "write_outputs", "results_csv",
    "plotdata_tsv", "bochner_riesz_convergence", "BochnerRieszReport", "DEFAULT_EPSILONS",
]
