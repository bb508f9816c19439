"""Periodic Fourier discretization of functions on the line.

The line is truncated to the box [-L, L) sampled at N equispaced points.
All spectral operators act through the real FFT, so outputs are real by
construction.  The Nyquist mode is kept for even symbols such as |k|^s and
zeroed for odd symbols such as ik.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Union

import numpy as np

__all__ = [
    "Grid",
    "Profile",
    "SobolevIndex",
    "fractional_derivative",
    "derivative",
    "sobolev_inner",
    "sobolev_norm",
    "l2_inner",
    "lp_integral",
    "interpolate",
    "shift",
    "reflect",
    "symmetrize_even",
    "save_profile",
    "load_profile",
]


@dataclass(frozen=True)
class Grid:
    """Equispaced periodic grid on [-L, L) with N points."""

    L: float
    n: int

    def __post_init__(self):
        if not (np.isfinite(self.L) and self.L > 0):
            raise ValueError(f"half length must be positive, got {self.L}")
        if self.n < 16 or self.n % 2:
            raise ValueError(f"n_points must be even and >= 16, got {self.n}")

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.n

    @cached_property
    def x(self) -> np.ndarray:
        return -self.L + self.h * np.arange(self.n)

    @cached_property
    def k(self) -> np.ndarray:
        """Wavenumbers pi*j/L for j = -N/2 .. N/2-1, in ascending order."""
        j = np.arange(-self.n // 2, self.n // 2)
        return np.pi * j / self.L

    @cached_property
    def kr(self) -> np.ndarray:
        """Nonnegative wavenumbers matching numpy.fft.rfft ordering."""
        return np.pi * np.arange(self.n // 2 + 1) / self.L

    @cached_property
    def ik(self) -> np.ndarray:
        # odd symbol: Nyquist zeroed
        s = 1j * self.kr
        s[-1] = 0.0
        return s

    @cached_property
    def _phase(self) -> np.ndarray:
        # rfft assumes the first sample sits at x=0; ours sits at x=-L
        return np.exp(-1j * self.kr * self.L)

    def symbol(self, s: float) -> np.ndarray:
        """|k|^s on the rfft modes (|0|^0 = 1)."""
        if s == 0:
            return np.ones_like(self.kr)
        return self.kr ** s

    def rfft(self, values: np.ndarray) -> np.ndarray:
        return np.fft.rfft(values)

    def irfft(self, coeffs: np.ndarray) -> np.ndarray:
        return np.fft.irfft(coeffs, n=self.n)

    def mode_weights(self) -> np.ndarray:
        """Multiplicity of each rfft mode in the full spectrum (1 for 0 and Nyquist)."""
        w = np.full(self.n // 2 + 1, 2.0)
        w[0] = 1.0
        w[-1] = 1.0
        return w

    def scaled(self, factor: float) -> "Grid":
        return Grid(self.L * factor, self.n)

    def zero(self) -> "Profile":
        return Profile(self, np.zeros(self.n))

    def profile(self, func) -> "Profile":
        return Profile(self, np.asarray(func(self.x), dtype=float))


@dataclass
class Profile:
    """Real grid function; the discrete stand-in for an element of H^s(R)."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.n,):
            raise ValueError(
                f"values have shape {self.values.shape}, grid expects ({self.grid.n},)"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("profile contains non-finite values")

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    @property
    def peak(self) -> float:
        return float(np.max(np.abs(self.values)))

    def like(self, values) -> "Profile":
        return Profile(self.grid, values)

    def copy(self) -> "Profile":
        return Profile(self.grid, self.values.copy())

    def __add__(self, other):
        _check_same_grid(self, other)
        return self.like(self.values + other.values)

    def __sub__(self, other):
        _check_same_grid(self, other)
        return self.like(self.values - other.values)

    def __mul__(self, scalar):
        return self.like(self.values * float(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return self.like(-self.values)


@dataclass(frozen=True)
class SobolevIndex:
    """Order s of D^s, plus an optional weight c on the L^2 part."""

    s: float
    c_weight: float | None = None

    def __post_init__(self):
        if not 0 <= self.s <= 4:
            raise ValueError(f"Sobolev order must lie in [0, 4], got {self.s}")
        if self.c_weight is not None and not self.c_weight > 0:
            raise ValueError("c_weight must be positive")


IndexLike = Union[SobolevIndex, float, int]


def _check_same_grid(u: Profile, v: Profile):
    if u.grid != v.grid:
        raise ValueError(f"grid mismatch: {u.grid} vs {v.grid}")


def _as_index(idx: IndexLike) -> SobolevIndex:
    if isinstance(idx, SobolevIndex):
        return idx
    return SobolevIndex(float(idx))


def fractional_derivative(v: Profile, s: float) -> Profile:
    """D^s v, the Fourier multiplier with symbol |k|^s."""
    if s < 0:
        raise ValueError(f"order must be nonnegative, got {s}")
    if not np.all(np.isfinite(v.values)):
        raise ValueError("non-finite input to fractional_derivative")
    if s == 0:
        return v.copy()
    g = v.grid
    return v.like(g.irfft(g.symbol(s) * g.rfft(v.values)))


def derivative(v: Profile, order: int = 1) -> Profile:
    """Spectral d^m/dx^m; the Nyquist mode is dropped for odd orders."""
    g = v.grid
    if order % 2:
        sym = g.ik ** order
    else:
        sym = (1j * g.kr) ** order
    return v.like(g.irfft(sym * g.rfft(v.values)))


def sobolev_inner(u: Profile, v: Profile, idx: IndexLike = 0.0) -> float:
    """(D^s u, D^s v)_{L^2} + w (u, v)_{L^2} with w = 1 or the index's c_weight.

    s = 0 is read as the plain L^2 product (scaled by c_weight if given).
    """
    _check_same_grid(u, v)
    idx = _as_index(idx)
    g = u.grid
    U, V = g.rfft(u.values), g.rfft(v.values)
    w = 1.0 if idx.c_weight is None else idx.c_weight
    if idx.s == 0:
        mult = np.full_like(g.kr, w)
    else:
        mult = w + g.kr ** (2 * idx.s)
    return float(g.h / g.n * np.sum(g.mode_weights() * mult * (U * V.conj()).real))


def sobolev_norm(v: Profile, idx: IndexLike = 0.0) -> float:
    return float(np.sqrt(max(sobolev_inner(v, v, idx), 0.0)))


def l2_inner(u: Profile, v: Profile) -> float:
    _check_same_grid(u, v)
    return float(u.grid.h * np.dot(u.values, v.values))


def lp_integral(v: Profile, m: int) -> float:
    """Signed integral of v^m over the box (rectangle rule)."""
    if m < 1:
        raise ValueError("power must be a positive integer")
    return float(v.grid.h * np.sum(v.values ** m))


def interpolate(v: Profile, points) -> np.ndarray:
    """Evaluate the trigonometric interpolant of v at arbitrary points.

    Direct non-uniform sum, chunked to bound memory.  The Nyquist mode enters
    as a cosine so the interpolant is real.
    """
    g = v.grid
    pts = np.asarray(points, dtype=float)
    coef = g.rfft(v.values) * g._phase / g.n
    coef = coef * g.mode_weights()
    out = np.empty(pts.size)
    flat = pts.ravel()
    step = max(1, 2 ** 22 // coef.size)
    for i in range(0, flat.size, step):
        xs = flat[i:i + step]
        out[i:i + step] = (np.exp(1j * np.outer(xs, g.kr)) @ coef).real
    return out.reshape(pts.shape)


def shift(v: Profile, y: float) -> Profile:
    """v(. - y), exact for the trigonometric interpolant."""
    g = v.grid
    V = g.rfft(v.values) * np.exp(-1j * g.kr * y)
    # keep the Nyquist coefficient real
    V[-1] = (g.rfft(v.values)[-1] * np.cos(g.kr[-1] * y)).real
    return v.like(g.irfft(V))


def reflect(v: Profile) -> Profile:
    """v(-x) on the grid: index j maps to (N - j) mod N."""
    return v.like(np.roll(v.values[::-1], 1))


def symmetrize_even(v: Profile) -> Profile:
    return v.like(0.5 * (v.values + reflect(v).values))


def save_profile(v: Profile, path, **meta) -> None:
    """Two-column text (x, value) with a JSON header line carrying L and N."""
    header = json.dumps({"L": v.grid.L, "N": v.grid.n, **meta})
    data = np.column_stack([v.grid.x, v.values])
    np.savetxt(path, data, fmt="%.17g", header=header, comments="# ")


def load_profile(path) -> Profile:
    text = Path(path).read_text().splitlines()
    if not text or not text[0].startswith("#"):
        raise ValueError(f"{path}: missing JSON header line")
    meta = json.loads(text[0].lstrip("#").strip())
    grid = Grid(float(meta["L"]), int(meta["N"]))
    data = np.loadtxt(path, comments="#", ndmin=2)
    if data.shape != (grid.n, 2):
        raise ValueError(f"{path}: expected {grid.n} rows of (x, value)")
    return Profile(grid, data[:, 1])
