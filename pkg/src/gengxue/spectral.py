"""Periodic-domain spectral primitives.

The real line is approximated by the torus ``[-L, L)`` sampled at ``N``
equispaced points.  Everything here works on real fields through
``numpy.fft.rfft``; the full-length complex table is only materialised for
:class:`SpectralCoeffs`.

Cubic products are de-aliased by zero padding onto a ``2N`` grid, which is
the smallest padding that keeps every retained mode of a triple product
exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np


class NonFiniteFieldError(FloatingPointError):
    """Raised when a field would be built from NaN or Inf samples."""


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform periodic grid on ``[-L, L)`` with its wavenumber tables."""

    L: float
    N: int

    def __post_init__(self):
        if not isinstance(self.N, (int, np.integer)) or isinstance(self.N, bool):
            raise TypeError(f"N must be an integer, got {self.N!r}")
        if self.N < 16 or not _is_power_of_two(int(self.N)):
            raise ValueError(f"N must be a power of two >= 16, got {self.N}")
        if not np.isfinite(self.L) or self.L <= 0:
            raise ValueError(f"L must be positive and finite, got {self.L}")
        object.__setattr__(self, "L", float(self.L))
        object.__setattr__(self, "N", int(self.N))

    def __eq__(self, other):
        return isinstance(other, Grid) and self.L == other.L and self.N == other.N

    def __hash__(self):
        return hash((self.L, self.N))

    @property
    def dx(self) -> float:
        return 2.0 * self.L / self.N

    @property
    def length(self) -> float:
        return 2.0 * self.L

    @property
    def scale(self) -> float:
        """Wavenumber unit ``pi / L``."""
        return np.pi / self.L

    @cached_property
    def x(self) -> np.ndarray:
        x = -self.L + np.arange(self.N) * self.dx
        x.setflags(write=False)
        return x

    @cached_property
    def k_index(self) -> np.ndarray:
        """Integer mode numbers in standard FFT ordering (``-N/2`` is Nyquist)."""
        k = np.fft.fftfreq(self.N, d=1.0 / self.N).astype(int)
        k.setflags(write=False)
        return k

    @cached_property
    def k(self) -> np.ndarray:
        k = self.k_index * self.scale
        k.setflags(write=False)
        return k

    @cached_property
    def nyquist_mask(self) -> np.ndarray:
        m = self.k_index == -self.N // 2
        m.setflags(write=False)
        return m

    @cached_property
    def kr(self) -> np.ndarray:
        """Non-negative wavenumbers of the ``rfft`` layout (last entry is Nyquist)."""
        kr = np.arange(self.N // 2 + 1) * self.scale
        kr.setflags(write=False)
        return kr

    @property
    def k_max(self) -> float:
        return self.N // 2 * self.scale

    @cached_property
    def _phase(self) -> np.ndarray:
        # rfft of samples starting at -L carries the factor exp(i k L)
        ph = np.exp(1j * self.kr * self.L)
        ph.setflags(write=False)
        return ph


def make_grid(L: float = 50.0, N: int = 512) -> Grid:
    return Grid(L, N)


def _check_finite(values: np.ndarray) -> None:
    if not np.all(np.isfinite(values)):
        raise NonFiniteFieldError("field contains non-finite samples")


@dataclass(frozen=True, eq=False)
class StateField:
    """Real samples of one field on a grid."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=float, copy=True)
        if vals.shape != (self.grid.N,):
            raise ValueError(f"expected {self.grid.N} samples, got shape {vals.shape}")
        _check_finite(vals)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_function(cls, grid: Grid, fn) -> "StateField":
        return cls(grid, fn(grid.x))

    @classmethod
    def constant(cls, grid: Grid, c: float) -> "StateField":
        return cls(grid, np.full(grid.N, float(c)))

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def shifted(self, cells: int) -> "StateField":
        return StateField(self.grid, np.roll(self.values, cells))


@dataclass(frozen=True, eq=False)
class SpectralCoeffs:
    """Full complex coefficient table (``numpy.fft.fft`` ordering) of a real field."""

    grid: Grid
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex, copy=True)
        if c.shape != (self.grid.N,):
            raise ValueError(f"expected {self.grid.N} coefficients, got shape {c.shape}")
        mirror = np.conj(np.roll(c[::-1], 1))
        scale = max(np.max(np.abs(c)), np.finfo(float).tiny)
        if np.max(np.abs(c - mirror)) > 1e-12 * scale:
            raise ValueError("coefficients are not Hermitian-symmetric")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)


def transform(f: StateField) -> SpectralCoeffs:
    return SpectralCoeffs(f.grid, np.fft.fft(f.values))


def inverse_transform(c: SpectralCoeffs) -> StateField:
    return StateField(c.grid, np.fft.ifft(c.coeffs).real)


# --- array level kernels -------------------------------------------------
# These work on bare ndarrays; the public wrappers below add the StateField
# bookkeeping.  The time stepper calls the kernels directly.


def deriv_array(values: np.ndarray, grid: Grid, order: int = 1) -> np.ndarray:
    fh = np.fft.rfft(values)
    mult = (1j * grid.kr) ** order
    if order % 2 == 1:
        mult[-1] = 0.0
    return np.fft.irfft(fh * mult, n=grid.N)


def derivs_array(values: np.ndarray, grid: Grid, max_order: int) -> list[np.ndarray]:
    """``[f, f', f'', ...]`` up to ``max_order`` from a single forward FFT."""
    fh = np.fft.rfft(values)
    out = [np.asarray(values, dtype=float)]
    ik = 1j * grid.kr
    for order in range(1, max_order + 1):
        mult = ik**order
        if order % 2 == 1:
            mult[-1] = 0.0
        out.append(np.fft.irfft(fh * mult, n=grid.N))
    return out


def helmholtz_apply_array(values: np.ndarray, grid: Grid) -> np.ndarray:
    return np.fft.irfft(np.fft.rfft(values) * (1.0 + grid.kr**2), n=grid.N)


def helmholtz_inv_array(values: np.ndarray, grid: Grid) -> np.ndarray:
    return np.fft.irfft(np.fft.rfft(values) / (1.0 + grid.kr**2), n=grid.N)


def _pad_rfft(fh: np.ndarray, n: int, m: int) -> np.ndarray:
    """Zero-pad an ``rfft`` table of an ``n`` grid onto an ``m`` grid."""
    out = np.zeros(m // 2 + 1, dtype=complex)
    out[: n // 2 + 1] = fh * (m / n)
    if m > n:
        # the Nyquist cosine splits evenly between +-n/2 on the finer grid
        out[n // 2] *= 0.5
    return out


def _unpad_rfft(Fh: np.ndarray, n: int, m: int) -> np.ndarray:
    out = Fh[: n // 2 + 1] * (n / m)
    if m > n:
        out[-1] = 2.0 * out[-1].real
    return out


def dealiased_product_array(arrays: Sequence[np.ndarray], grid: Grid) -> np.ndarray:
    n = grid.N
    m = 2 * n
    prod = None
    for a in arrays:
        fine = np.fft.irfft(_pad_rfft(np.fft.rfft(a), n, m), n=m)
        prod = fine if prod is None else prod * fine
    return np.fft.irfft(_unpad_rfft(np.fft.rfft(prod), n, m), n=n)


class ProductBuffer:
    """Caches padded copies of fields so repeated products reuse one FFT each.

    ``add(key, arr)`` registers the padded copy of ``arr``; ``fine_product(keys)``
    multiplies padded copies on the fine grid, and ``project_rfft`` maps a sum
    of such products back to the coarse ``rfft`` table with one transform.
    """

    def __init__(self, grid: Grid):
        self.grid = grid
        self._fine: dict[str, np.ndarray] = {}

    def add(self, key: str, arr: np.ndarray) -> None:
        n = self.grid.N
        self._fine[key] = np.fft.irfft(_pad_rfft(np.fft.rfft(arr), n, 2 * n), n=2 * n)

    def fine_product(self, keys: Sequence[str]) -> np.ndarray:
        out = self._fine[keys[0]]
        for key in keys[1:]:
            out = out * self._fine[key]
        return out

    def project_rfft(self, fine: np.ndarray) -> np.ndarray:
        n = self.grid.N
        return _unpad_rfft(np.fft.rfft(fine), n, 2 * n)


def trig_interp_array(values: np.ndarray, grid: Grid, x) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    fh = np.fft.rfft(values) / grid.N
    w = np.full(grid.N // 2 + 1, 2.0)
    w[0] = 1.0
    w[-1] = 1.0
    theta = np.outer(x + grid.L, grid.kr)
    # the Nyquist term is the real cosine only
    coeffs = fh * w
    vals = (np.cos(theta) @ coeffs.real) - (np.sin(theta[:, :-1]) @ coeffs[:-1].imag)
    return vals


def oversampled_sup_array(values: np.ndarray, grid: Grid, factor: int = 4) -> float:
    if factor < 1 or not _is_power_of_two(int(factor)):
        raise ValueError(f"oversampling factor must be a power of two, got {factor}")
    if factor == 1:
        return float(np.max(np.abs(values)))
    n = grid.N
    m = n * factor
    fine = np.fft.irfft(_pad_rfft(np.fft.rfft(values), n, m), n=m)
    # every coarse node is also a fine node; keep their exact samples
    return float(max(np.max(np.abs(fine)), np.max(np.abs(values))))


# --- public surface ------------------------------------------------------


def _same_grid(fs: Sequence[StateField]) -> Grid:
    grid = fs[0].grid
    for f in fs[1:]:
        if f.grid != grid:
            raise ValueError("fields live on different grids")
    return grid


def deriv(f: StateField, order: int = 1) -> StateField:
    if order < 1:
        raise ValueError(f"derivative order must be positive, got {order}")
    return StateField(f.grid, deriv_array(f.values, f.grid, order))


def helmholtz_apply(f: StateField) -> StateField:
    """``f - f''`` through the multiplier ``1 + k^2``."""
    return StateField(f.grid, helmholtz_apply_array(f.values, f.grid))


def helmholtz_inv(f: StateField) -> StateField:
    """``(1 - d^2)^{-1} f``, i.e. convolution with the periodised kernel ``kernel_p``."""
    return StateField(f.grid, helmholtz_inv_array(f.values, f.grid))


def kernel_p(x):
    """Green's function of ``1 - d^2`` on the line, ``exp(-|x|) / 2``."""
    return 0.5 * np.exp(-np.abs(x))


def dealiased_product(fs: Sequence[StateField]) -> StateField:
    if not 2 <= len(fs) <= 3:
        raise ValueError(f"dealiased_product takes 2 or 3 fields, got {len(fs)}")
    grid = _same_grid(fs)
    return StateField(grid, dealiased_product_array([f.values for f in fs], grid))


def trig_interp(f: StateField, x):
    """Band-limited interpolant of ``f`` at ``x`` (scalar in, scalar out)."""
    out = trig_interp_array(f.values, f.grid, x)
    return float(out[0]) if np.ndim(x) == 0 else out


def oversampled_sup(f: StateField, factor: int = 4) -> float:
    return oversampled_sup_array(f.values, f.grid, factor)


def periodic_reduce(x, grid: Grid):
    """Map positions into ``[-L, L)``."""
    return (np.asarray(x) + grid.L) % grid.length - grid.L


def boundary_decay(values: np.ndarray, cells: int = 2) -> float:
    """Largest magnitude in the first/last ``cells`` samples."""
    v = np.abs(np.asarray(values))
    return float(max(v[:cells].max(), v[-cells:].max()))
