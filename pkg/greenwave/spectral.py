"""
Greenwave Spectral Engine
Fourier analysis per boundary condition, Green-function convolution,
homogeneous evolution and spectral derivatives
"""

import logging
import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Tuple, Union

import numpy as np
from scipy import fft as sp_fft

from .kernels import ArrayLike, EquationParams, KernelBank
from .reduction import BCKind, Parity, extend

logger = logging.getLogger(__name__)


class Basis(Enum):
    """Coefficient basis tied to a boundary condition kind"""

    COMPLEX_EXP = "complex_exp"  # modes -N..N
    SINE = "sine"  # modes 1..N
    COSINE = "cosine"  # modes 0..N


class GridKind(Enum):
    PERIODIC = "periodic"
    INTERVAL = "interval"


BASIS_FOR = {
    BCKind.PERIODIC: Basis.COMPLEX_EXP,
    BCKind.DIRICHLET: Basis.SINE,
    BCKind.NEUMANN: Basis.COSINE,
}

GRID_FOR = {
    Basis.COMPLEX_EXP: GridKind.PERIODIC,
    Basis.SINE: GridKind.INTERVAL,
    Basis.COSINE: GridKind.INTERVAL,
}


def basis_for(kind: Union[BCKind, Basis]) -> Basis:
    return kind if isinstance(kind, Basis) else BASIS_FOR[kind]


def _next_power_of_two(n: int) -> int:
    return 1 << max(0, int(n - 1).bit_length())


@dataclass(frozen=True)
class SpaceGrid:
    """
    Uniform grid in the standard coordinate y:
    periodic [0, 2 pi) with 2 n_x points, or interval [0, pi] with
    n_x + 1 points. Both share the spacing pi / n_x.
    """

    kind: GridKind
    n_x: int

    def __post_init__(self):
        if self.n_x < 2 or self.n_x & (self.n_x - 1):
            raise ValueError(
                f"n_x must be a power of two >= 2, got {self.n_x}"
            )

    @classmethod
    def for_modes(cls, kind: GridKind, N: int) -> "SpaceGrid":
        """Smallest grid that resolves modes up to N without aliasing N"""
        return cls(kind, max(2, _next_power_of_two(N + 1)))

    @property
    def size(self) -> int:
        if self.kind is GridKind.PERIODIC:
            return 2 * self.n_x
        return self.n_x + 1

    @property
    def spacing(self) -> float:
        return math.pi / self.n_x

    @property
    def points(self) -> np.ndarray:
        return np.arange(self.size) * self.spacing

    @property
    def max_modes(self) -> int:
        return self.n_x - 1


@dataclass
class SpectralField:
    """
    Truncated coefficients along the last axis; leading axes batch
    several fields (for example one per time level).
    Mode n has wavenumber scale * n.
    """

    basis: Basis
    coeffs: np.ndarray
    scale: float = 1.0

    @property
    def N(self) -> int:
        size = self.coeffs.shape[-1]
        if self.basis is Basis.COMPLEX_EXP:
            return (size - 1) // 2
        if self.basis is Basis.SINE:
            return size
        return size - 1

    @property
    def modes(self) -> np.ndarray:
        N = self.N
        if self.basis is Basis.COMPLEX_EXP:
            return np.arange(-N, N + 1)
        if self.basis is Basis.SINE:
            return np.arange(1, N + 1)
        return np.arange(0, N + 1)

    @property
    def wavenumbers(self) -> np.ndarray:
        return self.scale * self.modes

    def with_coeffs(self, coeffs: np.ndarray) -> "SpectralField":
        return replace(self, coeffs=coeffs)

    def complex_coeffs(self) -> np.ndarray:
        """Coefficients c_n, n = -N..N, of the (extended) periodic field"""
        N = self.N
        shape = self.coeffs.shape[:-1] + (2 * N + 1,)
        if self.basis is Basis.COMPLEX_EXP:
            return self.coeffs.astype(complex)
        out = np.zeros(shape, dtype=complex)
        if self.basis is Basis.SINE:
            b = self.coeffs
            out[..., N + 1 :] = -0.5j * b
            out[..., N - 1 :: -1] = 0.5j * b
        else:
            a = self.coeffs
            out[..., N] = a[..., 0]
            out[..., N + 1 :] = 0.5 * a[..., 1:]
            out[..., N - 1 :: -1] = 0.5 * a[..., 1:]
        return out

    def l2_norm(self) -> np.ndarray:
        """sqrt of the mean square over one period of the extended field"""
        return np.sqrt(np.sum(np.abs(self.complex_coeffs()) ** 2, axis=-1))


def _check_grid(samples: np.ndarray, grid: SpaceGrid, basis: Basis):
    if GRID_FOR[basis] is not grid.kind:
        raise ValueError(
            f"Basis {basis.value} needs a {GRID_FOR[basis].value} grid, "
            f"got {grid.kind.value}"
        )
    if samples.shape[-1] != grid.size:
        raise ValueError(
            f"Expected {grid.size} samples on the {grid.kind.value} grid, "
            f"got {samples.shape[-1]}"
        )


def analyze(
    samples: np.ndarray,
    grid: SpaceGrid,
    kind: Union[BCKind, Basis],
    N: int = None,
    scale: float = 1.0,
    check_parity: bool = True,
) -> SpectralField:
    """
    Samples to coefficients. DBC/NBC samples are odd/even extended to the
    periodic grid first. With check_parity=False an odd extension zeroes
    the endpoint values (sources need not vanish at the ends).
    """
    basis = basis_for(kind)
    samples = np.asarray(samples, dtype=float)
    _check_grid(samples, grid, basis)
    N = grid.max_modes if N is None else int(N)
    if not 0 <= N <= grid.max_modes:
        raise ValueError(
            f"N={N} outside 0..{grid.max_modes} for n_x={grid.n_x}"
        )

    if basis is Basis.SINE:
        periodic = extend(
            samples, Parity.ODD, check=check_parity, zero_ends=True
        )
    elif basis is Basis.COSINE:
        periodic = extend(samples, Parity.EVEN, check=check_parity)
    else:
        periodic = samples
    M = periodic.shape[-1]
    c = sp_fft.fft(periodic, axis=-1) / M

    if basis is Basis.COMPLEX_EXP:
        coeffs = np.concatenate([c[..., M - N :], c[..., : N + 1]], axis=-1)
    elif basis is Basis.SINE:
        coeffs = -2.0 * c[..., 1 : N + 1].imag
    else:
        coeffs = np.concatenate(
            [c[..., :1].real, 2.0 * c[..., 1 : N + 1].real], axis=-1
        )
    return SpectralField(basis, coeffs, scale)


def synthesize(field: SpectralField, grid: SpaceGrid) -> np.ndarray:
    """Coefficients to real samples on the grid"""
    if GRID_FOR[field.basis] is not grid.kind:
        raise ValueError(
            f"Basis {field.basis.value} cannot be synthesized on a "
            f"{grid.kind.value} grid"
        )
    N = field.N
    if N > grid.max_modes:
        raise ValueError(f"N={N} exceeds grid capacity {grid.max_modes}")
    M = 2 * grid.n_x
    c = field.complex_coeffs()
    full = np.zeros(c.shape[:-1] + (M,), dtype=complex)
    full[..., : N + 1] = c[..., N:]
    if N:
        full[..., M - N :] = c[..., :N]
    values = sp_fft.ifft(full, axis=-1).real * M
    if grid.kind is GridKind.INTERVAL:
        return values[..., : grid.n_x + 1]
    return values


def spectral_derivative(g: SpectralField) -> SpectralField:
    """d/dx; sine and cosine bases swap"""
    k = g.wavenumbers
    if g.basis is Basis.COMPLEX_EXP:
        return g.with_coeffs(g.coeffs * (1j * k))
    if g.basis is Basis.SINE:
        zero = np.zeros(g.coeffs.shape[:-1] + (1,))
        return SpectralField(
            Basis.COSINE,
            np.concatenate([zero, g.coeffs * k], axis=-1),
            g.scale,
        )
    return SpectralField(Basis.SINE, -g.coeffs[..., 1:] * k[1:], g.scale)


def second_derivative(g: SpectralField) -> SpectralField:
    """d^2/dx^2 in place of two basis swaps"""
    k = g.wavenumbers
    return g.with_coeffs(-(k * k) * g.coeffs)


def kernel_bank(field: SpectralField, params: EquationParams) -> KernelBank:
    return KernelBank(params, field.wavenumbers)


def green_convolve(
    g: SpectralField, t: ArrayLike, params: EquationParams, order: int = 0
) -> SpectralField:
    """
    Coefficient n times H_n(t) (order 0) or H_n'(t) (order 1). An array
    of times adds a leading axis.
    """
    if order not in (0, 1):
        raise ValueError(f"order must be 0 or 1, got {order}")
    values = kernel_bank(g, params).evaluate(t)[order]
    return g.with_coeffs(values * g.coeffs)


def homogeneous_evolution(
    u0: SpectralField,
    u1: SpectralField,
    t: ArrayLike,
    params: EquationParams,
) -> Tuple[SpectralField, SpectralField]:
    """
    Free evolution of the data (u0, u1):
        u_n   = (u1_n + 2 h_n u0_n) H_n + u0_n H_n'
        u_t,n = u1_n H_n' - k_n^2 u0_n H_n
    """
    if u0.basis is not u1.basis or u0.N != u1.N:
        raise ValueError("u0 and u1 must share basis and truncation")
    bank = kernel_bank(u0, params)
    H, dH, _ = bank.evaluate(t)
    a0, a1 = u0.coeffs, u1.coeffs
    u = (a1 + 2.0 * bank.h * a0) * H + a0 * dH
    u_t = a1 * dH - bank.k_sq * a0 * H
    return u0.with_coeffs(u), u0.with_coeffs(u_t)
