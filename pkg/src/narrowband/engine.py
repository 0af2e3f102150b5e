"""Pseudo-products, trilinear pairings and their independent oracles on periodic grids.

Conventions: the Fourier transform is unitary,
f_hat(xi) = (2 pi)^-1/2 * integral exp(-i x xi) f(x) dx, and
B_m(f, g)(x) = (2 pi)^-1 * double integral exp(i x (xi + eta)) m f_hat(xi) g_hat(eta),
which makes B_1(f, g) = f * g. The trilinear form is
(2 pi)^-1/2 * double integral m f_hat(xi) g_hat(eta) h_hat(-xi - eta), equal to the
spatial integral of B_m(f, g) * h (no complex conjugation).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.fft as sfft
from scipy import integrate

from .curves import Curve, arc_quadrature
from .symbols import Symbol, smooth_bump

SQRT_2PI = math.sqrt(2.0 * math.pi)


class GridMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class GridFunction:
    """Samples of a band-limited function on a periodic grid.

    The frequency samples sit at -L + k*Delta (Delta = 2L/n); the spatial
    samples at -P/2 + j*dx with dx = pi/L and period P = n*dx.
    """

    n: int
    half_width: float
    values: np.ndarray
    side: str = "spatial"

    def __post_init__(self):
        if self.side not in ("spatial", "frequency"):
            raise ValueError("side must be 'spatial' or 'frequency'")
        vals = np.asarray(self.values, dtype=complex)
        if vals.shape != (self.n,):
            raise ValueError("values must have length n")
        if self.n % 4:
            raise ValueError("n must be a multiple of 4")
        object.__setattr__(self, "values", vals)

    @property
    def L(self) -> float:
        return self.half_width

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / self.n

    @property
    def dx(self) -> float:
        return math.pi / self.half_width

    @property
    def period(self) -> float:
        return self.n * self.dx

    @property
    def x(self) -> np.ndarray:
        return -0.5 * self.period + self.dx * np.arange(self.n)

    @property
    def freqs(self) -> np.ndarray:
        return -self.half_width + self.spacing * np.arange(self.n)

    def cell(self) -> float:
        return self.dx if self.side == "spatial" else self.spacing

    @classmethod
    def from_spatial(cls, fn, n: int, half_width: float) -> "GridFunction":
        probe = cls(n, half_width, np.zeros(n))
        return cls(n, half_width, fn(probe.x), "spatial")

    @classmethod
    def from_frequency(cls, fn, n: int, half_width: float) -> "GridFunction":
        probe = cls(n, half_width, np.zeros(n))
        return cls(n, half_width, fn(probe.freqs), "frequency")

    def _phases(self):
        x0 = -0.5 * self.period
        xi0 = -self.half_width
        j = np.arange(self.n)
        pre = np.exp(-1j * self.dx * xi0 * j)
        post = np.exp(-1j * x0 * xi0) * np.exp(-1j * x0 * self.spacing * j)
        return pre, post

    def to_frequency(self) -> "GridFunction":
        if self.side == "frequency":
            return self
        pre, post = self._phases()
        vals = self.dx / SQRT_2PI * post * sfft.fft(self.values * pre)
        return GridFunction(self.n, self.half_width, vals, "frequency")

    def to_spatial(self) -> "GridFunction":
        if self.side == "spatial":
            return self
        pre, post = self._phases()
        vals = self.spacing * self.n / SQRT_2PI * np.conj(pre) * sfft.ifft(self.values * np.conj(post))
        return GridFunction(self.n, self.half_width, vals, "spatial")

    def spectrum_at(self, freqs) -> np.ndarray:
        """Band-limited interpolation: the continuous transform of the samples."""
        spatial = self.to_spatial()
        freqs = np.asarray(freqs, dtype=float)
        x = spatial.x
        keep = np.abs(spatial.values) > 1e-300
        xs, vs = x[keep], spatial.values[keep]
        flat = freqs.ravel()
        out = np.empty(flat.shape, dtype=complex)
        chunk = max(1, 2_000_000 // max(len(xs), 1))
        for i in range(0, len(flat), chunk):
            out[i:i + chunk] = np.exp(-1j * np.outer(flat[i:i + chunk], xs)) @ vs
        return (out * self.dx / SQRT_2PI).reshape(freqs.shape)

    def values_at(self, xs) -> np.ndarray:
        """Band-limited (trigonometric) interpolation of the spatial samples."""
        freq = self.to_frequency()
        xs = np.asarray(xs, dtype=float)
        flat = xs.ravel()
        out = np.empty(flat.shape, dtype=complex)
        chunk = max(1, 2_000_000 // self.n)
        for i in range(0, len(flat), chunk):
            out[i:i + chunk] = np.exp(1j * np.outer(flat[i:i + chunk], freq.freqs)) @ freq.values
        return (out * self.spacing / SQRT_2PI).reshape(xs.shape)

    def upsample(self, factor: int) -> "GridFunction":
        """Same function on a grid with ``factor`` times the band (zero padded)."""
        freq = self.to_frequency()
        pad = (factor - 1) * self.n // 2
        vals = np.concatenate([np.zeros(pad), freq.values, np.zeros((factor - 1) * self.n - pad)])
        return GridFunction(factor * self.n, factor * self.half_width, vals, "frequency").to_spatial()

    def norm2(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2) * self.cell()))

    def scaled(self, c) -> "GridFunction":
        return GridFunction(self.n, self.half_width, self.values * c, self.side)

    def dumps(self) -> bytes:
        head = json.dumps({"n": self.n, "L": self.half_width, "side": self.side}, sort_keys=True)
        return head.encode() + b"\n" + np.ascontiguousarray(self.values, dtype="<c16").tobytes()

    @classmethod
    def loads(cls, blob: bytes) -> "GridFunction":
        head, body = blob.split(b"\n", 1)
        doc = json.loads(head)
        vals = np.frombuffer(body, dtype="<c16").astype(complex)
        return cls(doc["n"], doc["L"], vals, doc["side"])


@dataclass
class TrilinearResult:
    value: complex
    method: str
    resolution: dict = field(default_factory=dict)


def _check_pair(symbol: Symbol, *fns: GridFunction) -> None:
    for fn in fns:
        if fn.n != symbol.grid.n or not math.isclose(fn.half_width, symbol.grid.half_width):
            raise GridMismatchError(
                f"function grid (n={fn.n}, L={fn.half_width}) does not match symbol grid "
                f"(n={symbol.grid.n}, L={symbol.grid.half_width})")


def _check_output(symbol: Symbol, h: GridFunction) -> None:
    if h.n != 2 * symbol.grid.n or not math.isclose(h.half_width, 2 * symbol.grid.half_width):
        raise GridMismatchError("h must live on the doubled grid (2n samples, band [-2L, 2L))")


@lru_cache(maxsize=8)
def _antidiagonal_index(n: int) -> np.ndarray:
    k = np.arange(n)
    return (k[:, None] + k[None, :]).ravel()


@lru_cache(maxsize=8)
def _reflected_index(n: int) -> np.ndarray:
    """Index of -(xi_k + eta_l) on the doubled frequency grid."""
    k = np.arange(n)
    return (2 * n - k[:, None] - k[None, :]) % (2 * n)


def _antidiagonal_sums(a: np.ndarray) -> np.ndarray:
    n = a.shape[0]
    idx = _antidiagonal_index(n)
    flat = a.ravel()
    re = np.bincount(idx, flat.real, minlength=2 * n)
    im = np.bincount(idx, flat.imag, minlength=2 * n)
    return re + 1j * im


def output_spectrum(symbol: Symbol, f: GridFunction, g: GridFunction) -> np.ndarray:
    """Frequency samples of B_m(f, g) on the doubled band, one per anti-diagonal."""
    _check_pair(symbol, f, g)
    fh = f.to_frequency().values
    gh = g.to_frequency().values
    a = np.asarray(symbol.values) * fh[:, None] * gh[None, :]
    return _antidiagonal_sums(a) * symbol.grid.spacing / SQRT_2PI


def apply_bilinear(symbol: Symbol, f: GridFunction, g: GridFunction) -> GridFunction:
    """B_m(f, g) sampled on the 2n-point spatial grid covering the band [-2L, 2L)."""
    spec = output_spectrum(symbol, f, g)
    return GridFunction(2 * symbol.grid.n, 2 * symbol.grid.half_width, spec, "frequency").to_spatial()


def trilinear_pairing(symbol: Symbol, f: GridFunction, g: GridFunction, h: GridFunction,
                      method: str = "fft_diagonal_sum") -> TrilinearResult:
    """The trilinear form <B_m(f, g), h> with h on the doubled grid."""
    _check_output(symbol, h)
    if method == "fft_diagonal_sum":
        out = apply_bilinear(symbol, f, g)
        hs = h.to_spatial()
        value = complex(np.sum(out.values * hs.values) * hs.dx)
    elif method == "direct_oracle":
        _check_pair(symbol, f, g)
        fh = f.to_frequency().values
        gh = g.to_frequency().values
        hh = h.to_frequency().values[_reflected_index(symbol.grid.n)]
        m = np.asarray(symbol.values)
        total = 0j
        for k in range(symbol.grid.n):
            total += fh[k] * np.sum(m[k] * gh * hh[k])
        value = complex(total * symbol.grid.spacing ** 2 / SQRT_2PI)
    else:
        raise ValueError(f"unknown pairing method {method!r}")
    return TrilinearResult(value, method, {"n": symbol.grid.n, "L": symbol.grid.half_width})


def partial_kernels(symbol: Symbol, f: GridFunction, g: GridFunction, h: GridFunction, which: str):
    """Spatial kernel K with pairing = sum_j K_j u_j dx for u the chosen argument."""
    if which == "h":
        return apply_bilinear(symbol, f, g).values
    _check_output(symbol, h)
    n = symbol.grid.n
    delta = symbol.grid.spacing
    fh = f.to_frequency().values
    gh = g.to_frequency().values
    hh = h.to_frequency().values[_reflected_index(n)]
    m = np.asarray(symbol.values)
    if which == "f":
        coef = (m * hh) @ gh
    elif which == "g":
        coef = fh @ (m * hh)
    else:
        raise ValueError("which must be 'f', 'g' or 'h'")
    coef = coef * delta ** 2 / SQRT_2PI
    # K(x_j) = (2 pi)^-1/2 sum_k coef_k exp(-i x_j xi_k)
    grid_fn = GridFunction(n, symbol.grid.half_width, np.conj(coef), "frequency").to_spatial()
    return np.conj(grid_fn.values) / delta


def chi_hat(y, profile=smooth_bump, nodes: int = 400):
    """Unitary Fourier transform of the even profile chi(|u|), by Gauss-Legendre."""
    u, w = np.polynomial.legendre.leggauss(nodes)
    # Split [0,1] at the plateau edge so both pieces are smooth.
    pieces = [(0.0, 0.5), (0.5, 1.0)]
    y = np.asarray(y, dtype=float)
    out = np.zeros(y.shape)
    for a, b in pieces:
        s = 0.5 * (b - a) * u + 0.5 * (a + b)
        ws = 0.5 * (b - a) * w * profile(s)
        out += np.cos(np.multiply.outer(y, s)) @ ws
    return 2.0 * out / SQRT_2PI


def line_kernel_pairing(lam: float, epsilon: float, f: GridFunction, g: GridFunction,
                        h: GridFunction, profile=smooth_bump, upsample: int = 16,
                        tail_tol: float = 1e-8) -> TrilinearResult:
    """Physical-space oracle for the line symbol profile((xi - lam*eta)/eps).

    Evaluates (2 pi)^-1/2 * double integral eps*chi_hat(eps*y) f(x+y) g(x-lam*y) h(x)
    by a composite rule on a refined lattice, with linear interpolation for
    g(x - lam*y). No cutoff along the line is included, so inputs should have
    spectra well inside the region where the cutoff equals 1.
    """
    fine = [fn.to_spatial().upsample(upsample) if fn.n == f.n else fn.to_spatial().upsample(upsample // 2)
            for fn in (f, g, h)]
    ff, gf, hf = fine
    if not (ff.n == gf.n == hf.n):
        raise GridMismatchError("f, g must share a grid and h must live on the doubled grid")
    x = ff.x
    dx = ff.dx
    for name, fn in zip("fgh", fine):
        mass = np.abs(fn.values) ** 2
        edge = mass[: len(mass) // 16].sum() + mass[-len(mass) // 16:].sum()
        if edge > tail_tol * mass.sum():
            raise ValueError(f"{name} has tail mass {edge / mass.sum():.2e} near the period boundary")

    def window(vals, tol=1e-12):
        big = np.flatnonzero(np.abs(vals) > tol * np.abs(vals).max())
        return big[0], big[-1]

    hi0, hi1 = window(hf.values)
    xs = np.arange(hi0, hi1 + 1)
    # eps*chi_hat(eps*y) is negligible past |y| ~ 200/eps; the period may clip it first.
    ymax = min(0.5 * ff.period, 200.0 / epsilon)
    if epsilon * ymax < 200.0:
        # Oscillating tails cancel against smooth inputs, so bound the envelope only.
        u0 = epsilon * ymax
        envelope = np.max(np.abs(chi_hat(np.linspace(u0, 1.5 * u0, 2001), profile))) / chi_hat(0.0, profile)
        if envelope > 1e-3:
            raise ValueError(f"period {ff.period:.4g} clips the kernel (tail envelope {envelope:.1e}); "
                             "use a larger n")
    ny = int(ymax / dx)
    ys = np.arange(-ny, ny + 1)
    kern = epsilon * chi_hat(epsilon * ys * dx, profile)
    total = 0j
    n = ff.n
    gvals = gf.values
    for i0 in range(0, len(xs), 256):
        xi = xs[i0:i0 + 256]
        fpart = ff.values[(xi[:, None] + ys[None, :]) % n]
        pos = (xi[:, None] - lam * ys[None, :]).astype(float)
        lo = np.floor(pos)
        frac = pos - lo
        lo = lo.astype(np.int64) % n
        gpart = (1 - frac) * gvals[lo] + frac * gvals[(lo + 1) % n]
        total += np.sum(hf.values[xi] * ((fpart * gpart) @ kern))
    value = complex(total * dx * dx / SQRT_2PI)
    return TrilinearResult(value, "line_kernel_1d", {"upsample": upsample, "y_points": len(ys)})


def restriction_extension_pairing(curve: Curve, f: GridFunction, g: GridFunction, h: GridFunction,
                                  weight=None, n_nodes: int | None = None) -> complex:
    """(2 pi)^-1/2 * integral over the curve of f_hat(xi) g_hat(eta) h_hat(-xi-eta) weight d(sigma).

    Spectra are evaluated off-grid by band-limited interpolation; the node
    count must resolve their oscillation along the curve.
    """
    spans = []
    for fn in (f, g, h):
        sp = fn.to_spatial()
        big = np.flatnonzero(np.abs(sp.values) > 1e-14 * np.abs(sp.values).max())
        spans.append(np.max(np.abs(sp.x[big])) if len(big) else 0.0)
    needed = int(math.ceil(8.0 * max(spans) * curve.length)) + 64
    if n_nodes is None:
        n_nodes = needed
    elif n_nodes < needed:
        raise ValueError(f"restriction-extension quadrature under-resolved: need {needed} nodes")
    nodes, w = arc_quadrature(curve, n_nodes)
    if weight is not None:
        w = w * np.asarray(weight(nodes), dtype=float)
        if not np.any(w):
            return 0j
    fv = f.spectrum_at(nodes[:, 0])
    gv = g.spectrum_at(nodes[:, 1])
    hv = h.spectrum_at(-nodes[:, 0] - nodes[:, 1])
    return complex(np.sum(fv * gv * hv * w) / SQRT_2PI)


def one_dim_multiplier(fn: GridFunction, multiplier) -> GridFunction:
    """Apply the Fourier multiplier ``multiplier(xi)`` to a grid function."""
    freq = fn.to_frequency()
    return GridFunction(fn.n, fn.half_width, freq.values * multiplier(freq.freqs), "frequency").to_spatial()


def gaussian(n: int, half_width: float, width: float, center: float = 0.0,
             modulation: float = 0.0) -> GridFunction:
    """exp(-(x-center)^2 / (2 width^2)) * exp(i modulation x) on the spatial grid."""
    return GridFunction.from_spatial(
        lambda x: np.exp(-0.5 * ((x - center) / width) ** 2 + 1j * modulation * x), n, half_width)


__all__ = [
    "GridFunction", "TrilinearResult", "GridMismatchError", "apply_bilinear", "trilinear_pairing",
    "line_kernel_pairing", "restriction_extension_pairing", "partial_kernels", "output_spectrum",
    "chi_hat", "one_dim_multiplier", "gaussian",
]
