"""Lower bounds for the norm of a pseudo-product between Lebesgue spaces.

Every estimate is the ratio |<B(f, g), h>| / (|f|_p |g|_q |h|_r) for an explicit
witness triple, so it is a true lower bound for the discrete operator norm.

All three norms are taken on the doubled output grid, where the pairing is an
exact discrete integral of f g h. Native n-point norms of f and g would let a
spiky witness hide mass between samples (a single-sample spike has a large
band-limited L^1 norm), and the constant symbol could then beat Hoelder.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

import numpy as np
from sklearn.base import BaseEstimator

from .curves import characteristic_points, curvature
from .engine import GridFunction, partial_kernels, trilinear_pairing
from .symbols import Symbol, transition

FAMILIES = ("flat_hats", "rescaled_bumps", "power_law", "dilation_product", "random", "ascent")
INF = math.inf


class InvalidExponentError(ValueError):
    pass


class WitnessResolutionError(ValueError):
    """The requested witness would need detail below the grid resolution."""


def parse_exponent(value) -> Fraction | float:
    """An exponent in [1, inf] as an exact Fraction, or math.inf."""
    if isinstance(value, str):
        text = value.strip().lower()
        if text in ("inf", "infinity", "oo", "∞"):
            return INF
        try:
            value = Fraction(text)
        except ValueError as exc:
            raise InvalidExponentError(f"cannot parse exponent {value!r}") from exc
    if isinstance(value, float):
        if math.isinf(value) and value > 0:
            return INF
        if math.isnan(value):
            raise InvalidExponentError("exponent is NaN")
        value = Fraction(value).limit_denominator(10 ** 6)
    value = Fraction(value)
    if value < 1:
        raise InvalidExponentError("exponents below 1 unsupported")
    return value


def inverse(p) -> Fraction:
    return Fraction(0) if p == INF else 1 / Fraction(p)


def conjugate(p) -> Fraction | float:
    if p == 1:
        return INF
    if p == INF:
        return Fraction(1)
    return Fraction(p) / (Fraction(p) - 1)


def format_exponent(p) -> str:
    if p == INF:
        return "inf"
    p = Fraction(p)
    return str(p.numerator) if p.denominator == 1 else f"{p.numerator}/{p.denominator}"


@dataclass(frozen=True)
class LebesgueTriple:
    """Exponents (p, q, r) for f, g and the dual function h; infinity is exact."""

    p: object
    q: object
    r: object

    def __post_init__(self):
        for name in "pqr":
            object.__setattr__(self, name, parse_exponent(getattr(self, name)))
        if self.inverse_sum < 1:
            raise InvalidExponentError(
                f"1/p + 1/q + 1/r = {self.inverse_sum} < 1 violates the sub-Hoelder condition")

    @cached_property
    def inverses(self) -> tuple:
        return inverse(self.p), inverse(self.q), inverse(self.r)

    @property
    def inverse_sum(self) -> Fraction:
        return sum(self.inverses, Fraction(0))

    def as_tuple(self) -> tuple:
        return self.p, self.q, self.r

    def to_list(self) -> list:
        return [format_exponent(x) for x in self.as_tuple()]

    def __str__(self) -> str:
        return "(" + ",".join(self.to_list()) + ")"


def lp_norm(f: GridFunction, p) -> float:
    """Discrete L^p norm with the spatial cell weight; p = inf gives the max."""
    p = parse_exponent(p)
    if f.side != "spatial":
        raise ValueError("lp_norm expects a spatial grid function")
    mag = np.abs(f.values)
    if p == INF:
        return float(mag.max())
    p = float(p)
    scale = mag.max()
    if scale == 0:
        return 0.0
    return float(scale * (np.sum((mag / scale) ** p) * f.dx) ** (1.0 / p))


@dataclass
class NormEstimate:
    triple: LebesgueTriple
    epsilon: float
    lower_bound: float
    witness: str
    params: dict = field(default_factory=dict)
    iterations: int = 0
    seed: int | None = None
    history: list = field(default_factory=list, repr=False)
    functions: tuple | None = field(default=None, repr=False)

    def to_record(self) -> dict:
        return {"triple": self.triple.to_list(), "epsilon": self.epsilon,
                "lower_bound": self.lower_bound,
                "witness": {"family": self.witness, **self.params},
                "iterations": self.iterations, "seed": self.seed}

    def to_json(self) -> str:
        return json.dumps(self.to_record(), sort_keys=True)


def output_norm(fn: GridFunction, p, output_n: int) -> float:
    """L^p norm of a band-limited function sampled on the output grid of size output_n."""
    fn = fn.to_spatial()
    if fn.n != output_n:
        fn = fn.upsample(output_n // fn.n)
    return lp_norm(fn, p)


def downsample(fn: GridFunction, factor: int = 2) -> GridFunction:
    """Low-pass projection back onto the band of a grid ``factor`` times coarser."""
    freq = fn.to_frequency()
    n = fn.n // factor
    pad = (factor - 1) * n // 2
    return GridFunction(n, fn.half_width / factor, freq.values[pad:pad + n], "frequency").to_spatial()


def ratio(symbol: Symbol, triple: LebesgueTriple, f: GridFunction, g: GridFunction,
          h: GridFunction) -> float:
    out_n = 2 * symbol.grid.n
    denom = (output_norm(f, triple.p, out_n) * output_norm(g, triple.q, out_n)
             * output_norm(h, triple.r, out_n))
    if denom == 0:
        return 0.0
    return abs(trilinear_pairing(symbol, f, g, h).value) / denom


def recompute(symbol: Symbol, estimate: NormEstimate) -> float:
    """Recompute the ratio from the witness functions stored in an estimate."""
    if estimate.functions is None:
        raise ValueError("estimate does not carry its witness functions")
    return ratio(symbol, estimate.triple, *estimate.functions)


# -- analytic witness families ------------------------------------------------------


def _spectral(n, L, fn):
    return GridFunction.from_frequency(fn, n, L).to_spatial()


def _support_point(symbol: Symbol) -> tuple:
    """A frequency point where the symbol is largest, preferring the origin."""
    m = np.abs(np.asarray(symbol.values))
    grid = symbol.grid
    k0 = int(np.argmin(np.abs(grid.axis)))
    if m[k0, k0] >= 0.5 * m.max():
        return 0.0, 0.0
    k, l = np.unravel_index(np.argmax(m), m.shape)
    return float(grid.axis[k]), float(grid.axis[l])


def _flat_hats(symbol, triple, widths=(1.0, 1.5)):
    n, L = symbol.grid.n, symbol.grid.half_width
    for w in widths:
        inner = min(1.05 * w, 0.6 * L)
        outer = min(inner + 0.8, 0.95 * L)
        f = _spectral(n, L, lambda x: transition(np.abs(x), inner, outer))
        h = _spectral(2 * n, 2 * L, lambda x: transition(np.abs(x), 2 * inner, 2 * outer))
        yield {"plateau": inner}, (f, f, h)


def _rescaled_bumps(symbol, triple, scales=(0.25, 0.5, 1.0)):
    n, L = symbol.grid.n, symbol.grid.half_width
    eps = symbol.epsilon
    xi0, eta0 = _support_point(symbol)
    usable = [s for s in scales if s * eps >= 2 * symbol.grid.spacing]
    if not usable:
        raise WitnessResolutionError(
            f"rescaled bumps of width {min(scales) * eps:g} are below the grid spacing")
    for s in usable:
        width = s * eps
        f = _spectral(n, L, lambda x: np.exp(-0.5 * ((x - xi0) / width) ** 2))
        g = _spectral(n, L, lambda x: np.exp(-0.5 * ((x - eta0) / width) ** 2))
        h = _spectral(2 * n, 2 * L, lambda x: np.exp(-0.5 * ((x + xi0 + eta0) / (2 * width)) ** 2))
        yield {"scale": s, "center": [xi0, eta0]}, (f, g, h)


def _power_law(symbol, triple, delta=0.05, widths=(0.25, 0.5)):
    if 1 in triple.as_tuple():
        raise WitnessResolutionError("power-law witness is disabled when an exponent equals 1")
    if symbol.curve is None:
        raise WitnessResolutionError("power-law witness needs a curve")
    n, L = symbol.grid.n, symbol.grid.half_width
    a, b, c = (1 - x - Fraction(delta).limit_denominator(10 ** 6) / 3 for x in triple.inverses)
    m = np.abs(np.asarray(symbol.values))
    grid = symbol.grid
    points = []
    for cp in characteristic_points(symbol.curve):
        if not hasattr(cp, "location") or curvature(symbol.curve, cp.t) <= 0:
            continue
        k = int(np.argmin(np.abs(grid.axis - cp.location[0])))
        l = int(np.argmin(np.abs(grid.axis - cp.location[1])))
        if m[k, l] >= 0.5 * m.max():
            points.append(cp)
    if not points:
        raise WitnessResolutionError("no curvature characteristic point inside the symbol support")
    floor = 0.5 * grid.spacing

    def law(center, expo, width):
        return lambda x: transition(np.abs(x - center), width, 2 * width) / np.maximum(
            np.abs(x - center), floor) ** float(expo)

    for cp in points:
        x0, y0 = cp.location
        for w in widths:
            f = _spectral(n, L, law(x0, a, w))
            g = _spectral(n, L, law(y0, b, w))
            h = _spectral(2 * n, 2 * L, law(-x0 - y0, c, w))
            yield {"delta": delta, "axis": cp.axis, "center": [x0, y0], "width": w}, (f, g, h)


def _dilation_product(symbol, triple, widths=(2.0, 4.0), fixed_width=4.0):
    n, L = symbol.grid.n, symbol.grid.half_width
    eps = symbol.epsilon
    probe = GridFunction(n, L, np.zeros(n))
    usable = [w for w in widths if 6 * w / eps <= probe.period]
    if not usable:
        raise WitnessResolutionError(
            f"dilated function of width {min(widths) / eps:g} does not fit in the period {probe.period:g}")
    g = GridFunction.from_spatial(lambda x: np.exp(-0.5 * (x / fixed_width) ** 2), n, L)
    h = GridFunction.from_spatial(lambda x: np.exp(-0.5 * (x / fixed_width) ** 2), 2 * n, 2 * L)
    for w in usable:
        f = GridFunction.from_spatial(lambda x: np.exp(-0.5 * (eps * x / w) ** 2), n, L)
        yield {"width": w, "fixed_width": fixed_width}, (f, g, h)


_GENERATORS = {
    "flat_hats": _flat_hats,
    "rescaled_bumps": _rescaled_bumps,
    "power_law": _power_law,
    "dilation_product": _dilation_product,
}


def witness_lower_bound(symbol: Symbol, triple: LebesgueTriple, family: str, **options) -> NormEstimate:
    """Best ratio over a small parameter sweep of one analytic witness family."""
    if family not in _GENERATORS:
        raise ValueError(f"unknown witness family {family!r}")
    best = None
    for params, fns in _GENERATORS[family](symbol, triple, **options):
        val = ratio(symbol, triple, *fns)
        if best is None or val > best.lower_bound:
            best = NormEstimate(triple, symbol.epsilon, val, family, params, functions=fns)
    if best is None:
        raise WitnessResolutionError(f"no admissible parameters for {family}")
    return best


# -- alternating dual-alignment ascent ----------------------------------------------


def dual_align(kernel: np.ndarray, s, cell: float) -> np.ndarray:
    """Maximizer of |sum K u cell| under |u|_s = 1 (up to scaling)."""
    mag = np.abs(kernel)
    if mag.max() == 0:
        return np.zeros_like(kernel)
    phase = np.where(mag > 0, np.conj(kernel) / np.where(mag > 0, mag, 1.0), 0.0)
    if s == 1:
        u = np.zeros_like(kernel)
        j = int(np.argmax(mag))
        u[j] = phase[j] / cell
        return u
    if s == INF:
        return phase
    dual = float(conjugate(s))
    return (mag / mag.max()) ** (dual - 1.0) * phase


def _band_masks(symbol: Symbol):
    m = np.abs(np.asarray(symbol.values)) > 0
    n = symbol.grid.n
    rows = m.any(axis=1)
    cols = m.any(axis=0)
    k = np.arange(n)
    anti = np.zeros(2 * n, dtype=bool)
    kk, ll = np.nonzero(m)
    anti[(2 * n - kk - ll) % (2 * n)] = True
    return rows, cols, anti


def _random_start(symbol, rng, masks):
    n, L = symbol.grid.n, symbol.grid.half_width
    rows, cols, anti = masks
    out = []
    for size, half, mask in ((n, L, rows), (n, L, cols), (2 * n, 2 * L, anti)):
        noise = rng.standard_normal(size) + 1j * rng.standard_normal(size)
        out.append(GridFunction(size, half, noise * mask, "frequency").to_spatial())
    return out


def _align(symbol, triple, fns, which):
    """Candidate replacement for one argument, aligned with its partial kernel.

    For h the alignment is exact. For f and g it is exact on the output grid
    and then projected back onto the input band, so it is only a proposal.
    """
    f, g, h = fns
    exps = {"f": triple.p, "g": triple.q, "h": triple.r}
    kern = partial_kernels(symbol, f, g, h, which)
    if which == "h":
        return GridFunction(h.n, h.half_width, dual_align(kern, exps["h"], h.dx))
    n, L = symbol.grid.n, symbol.grid.half_width
    fine = GridFunction(n, L, kern).upsample(2)
    aligned = GridFunction(2 * n, 2 * L, dual_align(fine.values, exps[which], fine.dx))
    return downsample(aligned)


def _unit(fn: GridFunction, p, out_n) -> GridFunction | None:
    size = output_norm(fn, p, out_n)
    return fn.scaled(1.0 / size) if size > 0 else None


def _ascent_run(symbol, triple, iters, start):
    """Alternating updates; a proposal is kept only if the ratio grows."""
    f, g, h = start
    out_n = 2 * symbol.grid.n
    exps = {"f": triple.p, "g": triple.q, "h": triple.r}
    best = ratio(symbol, triple, f, g, h)
    history = [best]
    for _ in range(iters):
        for which in ("h", "f", "g"):
            current = {"f": f, "g": g, "h": h}
            proposal = _unit(_align(symbol, triple, (f, g, h), which), exps[which], out_n)
            old = _unit(current[which], exps[which], out_n)
            if proposal is None:
                history.append(best)
                continue
            # projection can overshoot, so also try blends with the old argument
            candidates = [proposal]
            if which != "h" and old is not None:
                candidates += [GridFunction(old.n, old.half_width, t * proposal.values + (1 - t) * old.values)
                               for t in (0.5, 0.25)]
            for cand in candidates:
                trial = dict(current, **{which: cand})
                val = ratio(symbol, triple, trial["f"], trial["g"], trial["h"])
                if val > best:
                    best = val
                    f, g, h = trial["f"], trial["g"], trial["h"]
                    break
            history.append(best)
    return history, (f, g, h)


def _seed_starts(symbol, triple):
    """Analytic witnesses used as deterministic starting points."""
    starts = []
    for family in ("flat_hats", "rescaled_bumps"):
        try:
            starts.append((family, witness_lower_bound(symbol, triple, family).functions))
        except WitnessResolutionError:
            continue
    return starts


def ascent_lower_bound(symbol: Symbol, triple: LebesgueTriple, restarts: int = 8, iters: int = 12,
                       seed: int = 0, threads: int = 1, seeded: bool = True) -> NormEstimate:
    """Alternating dual alignment over f, g, h.

    Starts from random band-limited triples and, unless ``seeded`` is false,
    from the flat-hat and rescaled-bump witnesses as well. The recorded
    history is nondecreasing.
    """
    if iters < 1:
        raise ValueError("iters must be at least 1")
    if not np.any(np.asarray(symbol.values)):
        return NormEstimate(triple, symbol.epsilon, 0.0, "ascent", {"restarts": restarts},
                            iterations=0, seed=seed)
    masks = _band_masks(symbol)
    starts = _seed_starts(symbol, triple) if seeded else []
    for i, child in enumerate(np.random.SeedSequence(seed).spawn(restarts)):
        starts.append((f"random{i}", _random_start(symbol, np.random.default_rng(child), masks)))

    def run(item):
        return _ascent_run(symbol, triple, iters, item[1])

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            runs = list(pool.map(run, starts))
    else:
        runs = [run(item) for item in starts]
    best_i = max(range(len(runs)), key=lambda i: runs[i][0][-1])
    history, fns = runs[best_i]
    return NormEstimate(triple, symbol.epsilon, history[-1], "ascent",
                        {"restarts": restarts, "iters": iters, "start": starts[best_i][0]},
                        iterations=len(history) - 1, seed=seed, history=history, functions=fns)


def random_lower_bound(symbol: Symbol, triple: LebesgueTriple, seed: int = 0) -> NormEstimate:
    rng = np.random.default_rng(seed)
    fns = _random_start(symbol, rng, _band_masks(symbol))
    return NormEstimate(triple, symbol.epsilon, ratio(symbol, triple, *fns), "random",
                        seed=seed, functions=fns)


def best_lower_bound(symbol: Symbol, triple: LebesgueTriple, families=("flat_hats", "rescaled_bumps"),
                     ascent: dict | None = None, seed: int = 0, threads: int = 1):
    """Best estimate over the listed families plus the ascent; returns (best, all)."""
    estimates = []
    for fam in families:
        if fam in ("ascent", "random"):
            continue
        try:
            estimates.append(witness_lower_bound(symbol, triple, fam))
        except WitnessResolutionError:
            continue
    if "random" in families:
        estimates.append(random_lower_bound(symbol, triple, seed))
    if ascent is not None or "ascent" in families:
        opts = dict(ascent or {})
        estimates.append(ascent_lower_bound(symbol, triple, seed=seed, threads=threads, **opts))
    if not estimates:
        raise WitnessResolutionError("no witness family could be evaluated")
    return max(estimates, key=lambda e: e.lower_bound), estimates


class NormProbe(BaseEstimator):
    """Estimator wrapper: ``fit(symbol)`` stores the best lower bound in ``estimate_``."""

    def __init__(self, p=2, q=2, r=2, families=("flat_hats", "rescaled_bumps"), restarts=8,
                 iters=12, seed=0, threads=1, use_ascent=True):
        self.p = p
        self.q = q
        self.r = r
        self.families = families
        self.restarts = restarts
        self.iters = iters
        self.seed = seed
        self.threads = threads
        self.use_ascent = use_ascent

    def fit(self, symbol: Symbol, y=None):
        triple = LebesgueTriple(self.p, self.q, self.r)
        ascent = {"restarts": self.restarts, "iters": self.iters} if self.use_ascent else None
        self.estimate_, self.estimates_ = best_lower_bound(
            symbol, triple, self.families, ascent, self.seed, self.threads)
        return self

    def predict(self, symbols):
        return np.array([self.fit(s).estimate_.lower_bound for s in symbols])
