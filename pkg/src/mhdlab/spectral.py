"""
Truncated Fourier representation of periodic vector fields on [0, 2*pi]^n.

Coefficients follow the convention

    f_hat(k) = (2*pi)^{-n} * integral of f(x) exp(-i k.x) dx,
    f(x)     = sum_k f_hat(k) exp(i k.x),

so a grid field ``g`` maps to ``rfftn(g) / N**n``.  Only the half spectrum
produced by ``rfftn`` is stored (last axis holds k_last >= 0); the conjugate
half is implied by Hermitian symmetry.  The Nyquist index of every axis is
never retained.

All norms are computed from coefficients over the full lattice, i.e. the
L2 norm is ``sqrt(sum_k |f_hat(k)|^2)`` (the mean square of ``f`` over the
torus).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

import numpy as np
import scipy.fft as sfft

__all__ = [
    "Lattice",
    "SpectralField",
    "PhysicalGrid",
    "make_lattice",
    "transform_to_spectral",
    "transform_to_physical",
    "leray_project",
    "lambda_pow",
    "directional_derivative",
    "sobolev_norm",
    "grad_linf_bound",
    "random_field",
    "inner_product",
    "divergence_residual",
    "hermitian_residual",
    "symmetrize",
    "from_modes",
    "physical_gradient",
]


@dataclass(frozen=True)
class Lattice:
    """Index set of retained wavevectors for an ``N**n`` periodic grid."""

    n: int
    N: int
    dealias_fraction: Fraction = Fraction(2, 3)

    @property
    def k_max(self) -> int:
        return self.N // 2 - 1

    @property
    def dealias_cutoff(self) -> int:
        """Largest |k_i| kept by the dealias mask."""
        return math.floor(self.dealias_fraction * Fraction(self.N, 2))

    @property
    def grid_shape(self) -> tuple[int, ...]:
        return (self.N,) * self.n

    @property
    def spectral_shape(self) -> tuple[int, ...]:
        return (self.N,) * (self.n - 1) + (self.N // 2 + 1,)

    @property
    def axes(self) -> tuple[int, ...]:
        return tuple(range(1, self.n + 1))

    @cached_property
    def wavevectors(self) -> np.ndarray:
        """Integer wavevectors, shape ``(n, *spectral_shape)``."""
        full = np.fft.fftfreq(self.N, 1.0 / self.N).round().astype(np.int64)
        half = np.arange(self.N // 2 + 1, dtype=np.int64)
        axes = [full] * (self.n - 1) + [half]
        return np.stack(np.meshgrid(*axes, indexing="ij"))

    @cached_property
    def kfloat(self) -> np.ndarray:
        return self.wavevectors.astype(float)

    @cached_property
    def k2(self) -> np.ndarray:
        return np.sum(self.kfloat**2, axis=0)

    @cached_property
    def kabs(self) -> np.ndarray:
        return np.sqrt(self.k2)

    @cached_property
    def retained(self) -> np.ndarray:
        return np.all(np.abs(self.wavevectors) <= self.k_max, axis=0)

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        return np.all(np.abs(self.wavevectors) <= self.dealias_cutoff, axis=0)

    @cached_property
    def weights(self) -> np.ndarray:
        """Multiplicity of each stored entry in a full-lattice sum."""
        w = np.where(self.wavevectors[-1] > 0, 2.0, 1.0)
        return w * self.retained

    @cached_property
    def nonzero(self) -> np.ndarray:
        return self.k2 > 0

    @cached_property
    def inv_k2(self) -> np.ndarray:
        out = np.zeros(self.spectral_shape)
        np.divide(1.0, self.k2, out=out, where=self.nonzero)
        return out

    def index_of(self, k) -> tuple[tuple[int, ...], bool]:
        """Storage index of wavevector ``k`` and whether it is conjugated."""
        k = tuple(int(v) for v in k)
        if len(k) != self.n:
            raise ValueError(f"wavevector {k} has wrong dimension for n={self.n}")
        if any(abs(v) > self.k_max for v in k):
            raise ValueError(f"wavevector {k} is outside the retained lattice")
        conj = k[-1] < 0
        if conj:
            k = tuple(-v for v in k)
        return tuple(v % self.N for v in k), conj

    def grid_points(self) -> np.ndarray:
        x = 2 * np.pi * np.arange(self.N) / self.N
        return np.stack(np.meshgrid(*([x] * self.n), indexing="ij"))


def make_lattice(n: int, N: int, dealias_fraction=Fraction(2, 3)) -> Lattice:
    """Build a lattice for an ``N**n`` grid.

    Raises:
        ValueError: if ``n`` is not 2 or 3, or ``N`` is odd or below 16.
    """
    if n not in (2, 3):
        raise ValueError(f"dimension n must be 2 or 3, got {n}")
    if N % 2 != 0 or N < 16:
        raise ValueError(f"grid N must be even >= 16, got {N}")
    return Lattice(n=n, N=N, dealias_fraction=Fraction(dealias_fraction))


@dataclass(frozen=True)
class SpectralField:
    """Half-spectrum Fourier coefficients, shape ``(components, *spectral_shape)``."""

    lattice: Lattice
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.coeffs.shape[1:] != self.lattice.spectral_shape:
            raise ValueError(
                f"coefficient shape {self.coeffs.shape} does not match lattice "
                f"{self.lattice.spectral_shape}"
            )

    @classmethod
    def zeros(cls, lattice: Lattice, components: int | None = None) -> SpectralField:
        c = lattice.n if components is None else components
        return cls(lattice, np.zeros((c,) + lattice.spectral_shape, dtype=complex))

    @property
    def components(self) -> int:
        return self.coeffs.shape[0]

    def coeff(self, k) -> np.ndarray:
        """Coefficient vector at an arbitrary retained wavevector."""
        idx, conj = self.lattice.index_of(k)
        v = self.coeffs[(slice(None),) + idx]
        return np.conj(v) if conj else v.copy()

    def mean(self) -> np.ndarray:
        return self.coeffs[(slice(None),) + (0,) * self.lattice.n].copy()

    def is_mean_zero(self) -> bool:
        return not np.any(self.mean())

    def with_coeffs(self, coeffs: np.ndarray) -> SpectralField:
        return SpectralField(self.lattice, coeffs)

    def __add__(self, other: SpectralField) -> SpectralField:
        _check_same(self, other)
        return self.with_coeffs(self.coeffs + other.coeffs)

    def __sub__(self, other: SpectralField) -> SpectralField:
        _check_same(self, other)
        return self.with_coeffs(self.coeffs - other.coeffs)

    def __mul__(self, scalar) -> SpectralField:
        return self.with_coeffs(self.coeffs * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> SpectralField:
        return self.with_coeffs(-self.coeffs)


@dataclass(frozen=True)
class PhysicalGrid:
    """Real samples on the uniform grid, shape ``(components, N, ..., N)``."""

    lattice: Lattice
    samples: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.samples.shape[1:] != self.lattice.grid_shape:
            raise ValueError(
                f"sample shape {self.samples.shape} does not match grid "
                f"{self.lattice.grid_shape}"
            )


def _check_same(f: SpectralField, g: SpectralField):
    if f.lattice != g.lattice:
        raise ValueError("fields live on different lattices")
    if f.coeffs.shape != g.coeffs.shape:
        raise ValueError("fields have different component counts")


def _neg_index(a: np.ndarray, axes: tuple[int, ...]) -> np.ndarray:
    """Return ``a`` re-indexed at ``-i mod N`` along ``axes``."""
    return np.roll(np.flip(a, axis=axes), 1, axis=axes)


def symmetrize(f: SpectralField) -> SpectralField:
    """Impose Hermitian symmetry and zero all non-retained entries."""
    lat = f.lattice
    c = f.coeffs * lat.retained
    plane = c[..., 0]
    axes = tuple(range(1, lat.n))
    c[..., 0] = 0.5 * (plane + np.conj(_neg_index(plane, axes)))
    return f.with_coeffs(c)


def hermitian_residual(f: SpectralField) -> float:
    """Largest violation of ``coeff(-k) = conj(coeff(k))`` on the stored plane."""
    lat = f.lattice
    plane = f.coeffs[..., 0]
    axes = tuple(range(1, lat.n))
    res = np.abs(plane - np.conj(_neg_index(plane, axes)))
    outside = np.abs(f.coeffs[:, ~lat.retained]) if np.any(~lat.retained) else np.zeros(1)
    return float(max(res.max(initial=0.0), outside.max(initial=0.0)))


def transform_to_spectral(g: PhysicalGrid) -> SpectralField:
    lat = g.lattice
    c = sfft.rfftn(g.samples, axes=lat.axes) / lat.N**lat.n
    return symmetrize(SpectralField(lat, c))


def transform_to_physical(f: SpectralField) -> PhysicalGrid:
    lat = f.lattice
    x = sfft.irfftn(f.coeffs * lat.N**lat.n, s=lat.grid_shape, axes=lat.axes)
    return PhysicalGrid(lat, x)


def leray_project(f: SpectralField) -> SpectralField:
    """Apply ``I - k k^T / |k|^2`` mode by mode; the k = 0 entry is zeroed."""
    lat = f.lattice
    if f.components != lat.n:
        raise ValueError("Leray projection needs an n-component field")
    k = lat.kfloat
    kdotf = np.sum(k * f.coeffs, axis=0)
    c = f.coeffs - k * (kdotf * lat.inv_k2)
    c[(slice(None),) + (0,) * lat.n] = 0.0
    return f.with_coeffs(c)


def _kpow(lat: Lattice, s: float) -> np.ndarray:
    out = np.zeros(lat.spectral_shape)
    np.power(lat.k2, 0.5 * s, out=out, where=lat.nonzero)
    return out


def lambda_pow(f: SpectralField, s: float) -> SpectralField:
    """Fractional power ``Lambda^s``: multiply coefficient k by ``|k|^s``.

    The k = 0 coefficient is left untouched for ``s == 0`` and set to zero
    otherwise.

    Raises:
        ValueError: for negative ``s`` on a field with nonzero mean.
    """
    if s == 0:
        return f.with_coeffs(f.coeffs.copy())
    if s < 0 and not f.is_mean_zero():
        raise ValueError("negative powers of Lambda need a mean-zero field")
    return f.with_coeffs(f.coeffs * _kpow(f.lattice, s))


def directional_derivative(f: SpectralField, bvec) -> SpectralField:
    """``(b . grad) f``, Fourier symbol ``i (b . k)``."""
    lat = f.lattice
    bvec = np.asarray(bvec, dtype=float)
    symbol = np.tensordot(bvec, lat.kfloat, axes=1)
    return f.with_coeffs(1j * symbol * f.coeffs)


def _sobolev_weight(lat: Lattice, s: float, homogeneous: bool) -> np.ndarray:
    if not homogeneous:
        return (1.0 + lat.k2) ** s
    if s == 0:
        return np.ones(lat.spectral_shape)
    return _kpow(lat, 2 * s)


def sobolev_norm(f: SpectralField, s: float, homogeneous: bool = False) -> float:
    """H^s norm (weight ``(1+|k|^2)^s``) or homogeneous norm (weight ``|k|^{2s}``)."""
    lat = f.lattice
    if homogeneous and s < 0 and not f.is_mean_zero():
        raise ValueError("homogeneous norms with s < 0 need a mean-zero field")
    w = _sobolev_weight(lat, s, homogeneous) * lat.weights
    return float(np.sqrt(np.sum(w * np.sum(np.abs(f.coeffs) ** 2, axis=0))))


def inner_product(f: SpectralField, g: SpectralField) -> complex:
    """Normalized L2 pairing ``(2 pi)^{-n} int f . conj(g) dx``."""
    _check_same(f, g)
    w = f.lattice.weights
    per_k = np.sum(f.coeffs * np.conj(g.coeffs), axis=0)
    # the conjugate half contributes conj(per_k); for real fields this is the real part
    full = np.sum(per_k * (w == 1)) + np.sum(2 * per_k.real * (w == 2))
    return complex(full)


def grad_linf_bound(f: SpectralField) -> float:
    """``sum_{k != 0} |k| |f_hat(k)|`` with the Euclidean norm over components."""
    lat = f.lattice
    mag = np.sqrt(np.sum(np.abs(f.coeffs) ** 2, axis=0))
    return float(np.sum(lat.weights * lat.kabs * mag))


def sup_bound(f: SpectralField) -> float:
    """``sum_k |f_hat(k)|``, an upper bound on ``max_x |f(x)|``."""
    lat = f.lattice
    mag = np.sqrt(np.sum(np.abs(f.coeffs) ** 2, axis=0))
    return float(np.sum(lat.weights * mag))


def divergence_residual(f: SpectralField, floor: float = 1e-250) -> float:
    """Max over k != 0 of ``|k . f_hat(k)| / (|k| |f_hat(k)|)``."""
    lat = f.lattice
    mag = np.sqrt(np.sum(np.abs(f.coeffs) ** 2, axis=0))
    ok = lat.nonzero & (mag > floor) & lat.retained
    if not np.any(ok):
        return 0.0
    kdotf = np.abs(np.sum(lat.kfloat * f.coeffs, axis=0))
    return float(np.max(kdotf[ok] / (lat.kabs[ok] * mag[ok])))


def divergence_magnitude(f: SpectralField) -> float:
    """Max over k != 0 of ``|k . f_hat(k)| / |k|`` (absolute drift measure)."""
    lat = f.lattice
    kdotf = np.abs(np.sum(lat.kfloat * f.coeffs, axis=0))
    return float(np.max(kdotf * np.sqrt(lat.inv_k2)))


def from_modes(lattice: Lattice, modes: dict, components: int | None = None) -> SpectralField:
    """Build a real field from ``{k: coefficient vector}``; conjugates are implied.

    Listing both ``k`` and ``-k`` keeps whichever comes last.
    """
    f = SpectralField.zeros(lattice, components)
    c = f.coeffs
    for k, v in modes.items():
        v = np.broadcast_to(np.asarray(v, dtype=complex), (c.shape[0],))
        idx, conj = lattice.index_of(k)
        val = np.conj(v) if conj else v
        c[(slice(None),) + idx] = val
        if idx[-1] == 0:
            nidx = tuple((-i) % lattice.N for i in idx)
            if nidx != idx:
                c[(slice(None),) + nidx] = np.conj(val)
            else:
                c[(slice(None),) + idx] = val.real
    return f


def physical_gradient(f: SpectralField) -> np.ndarray:
    """Grid samples of ``d f_c / d x_j``, shape ``(components, n, N, ..., N)``."""
    lat = f.lattice
    dc = 1j * lat.kfloat[None, :] * f.coeffs[:, None]
    flat = dc.reshape((-1,) + lat.spectral_shape)
    x = transform_to_physical(SpectralField(lat, flat)).samples
    return x.reshape((f.components, lat.n) + lat.grid_shape)


def random_field(
    lattice: Lattice,
    seed: int,
    decay_exponent: float,
    amplitude: float,
    m: float = 0.0,
    components: int | None = None,
) -> SpectralField:
    """Random mean-zero, solenoidal, dealiased field with ``|f_hat(k)| = C |k|^{-sigma}``.

    Directions are drawn from white noise (seeded ``numpy`` generator), projected
    onto ``k``-perpendicular vectors and normalised, then the whole field is
    rescaled so that its H^m norm equals ``amplitude``.

    Raises:
        ValueError: for a negative amplitude.
    """
    if amplitude < 0:
        raise ValueError(f"amplitude must be positive, got {amplitude}")
    if amplitude == 0:
        return SpectralField.zeros(lattice, components)
    rng = np.random.default_rng(seed)
    c = lattice.n if components is None else components
    noise = rng.standard_normal((c,) + lattice.grid_shape)
    f = transform_to_spectral(PhysicalGrid(lattice, noise))
    if c == lattice.n:
        f = leray_project(f)
    mag = np.sqrt(np.sum(np.abs(f.coeffs) ** 2, axis=0))
    keep = lattice.dealias_mask & lattice.nonzero & lattice.retained & (mag > 0)
    scale = np.zeros(lattice.spectral_shape)
    scale[keep] = lattice.kabs[keep] ** (-decay_exponent) / mag[keep]
    f = symmetrize(f.with_coeffs(f.coeffs * scale))
    return f * (amplitude / sobolev_norm(f, m))
