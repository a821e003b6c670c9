"""Dirichlet-Laplacian eigenbasis on boxes and the diagonal operator algebra.

Fields live in the L2-orthonormal sine basis

    phi_m(x) = prod_i sqrt(2 / L_i) * sin(m_i * pi * x_i / L_i),   m_i = 1..N_i

with A = -Laplacian acting as multiplication by lambda_m = sum_i (m_i pi / L_i)^2.
Coefficients are stored flat, in lexicographic (C) order of the multi-index.

Collocation uses the interior nodes of the type-I discrete sine transform. With
a dealiasing factor ``p`` an axis with N modes is sampled on ``p * (N + 1) - 1``
nodes; ``p = 2`` resolves quartic products of band-limited fields exactly,
which covers every cubic nonlinearity tested against a basis function.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import fft

__all__ = [
    "BoxDomain",
    "Basis",
    "SpectralField",
    "GridField",
    "build_basis",
    "to_grid",
    "to_spectral",
    "apply_power_of_A",
    "apply_K",
    "apply_B",
    "gradient",
    "inner_product",
    "K_multiplier",
    "B_multiplier",
]


@dataclass(frozen=True)
class BoxDomain:
    """Interval ``(0, L)`` or rectangle ``(0, L1) x (0, L2)``."""

    lengths: tuple[float, ...]

    def __post_init__(self):
        lengths = tuple(float(v) for v in np.atleast_1d(self.lengths))
        if len(lengths) not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {len(lengths)}")
        if not all(np.isfinite(v) and v > 0 for v in lengths):
            raise ValueError(f"box lengths must be positive, got {lengths}")
        object.__setattr__(self, "lengths", lengths)

    @property
    def dim(self) -> int:
        return len(self.lengths)


@dataclass(frozen=True)
class Basis:
    """Truncated sine eigenbasis; immutable and shareable once built."""

    domain: BoxDomain
    modes: tuple[int, ...]
    normalized: bool = field(default=True)

    def __post_init__(self):
        modes = tuple(int(m) for m in np.atleast_1d(self.modes))
        if len(modes) != self.domain.dim:
            raise ValueError(f"need one mode count per axis ({self.domain.dim}), got {modes}")
        if any(m < 1 for m in modes):
            raise ValueError(f"mode counts must be >= 1, got {modes}")
        object.__setattr__(self, "modes", modes)

    @property
    def dim(self) -> int:
        return self.domain.dim

    @property
    def size(self) -> int:
        return int(np.prod(self.modes))

    @cached_property
    def wavenumbers(self) -> tuple[np.ndarray, ...]:
        """Per-axis ``m * pi / L`` for m = 1..N."""
        return tuple(
            np.arange(1, n + 1) * np.pi / length for n, length in zip(self.modes, self.domain.lengths)
        )

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        grids = np.meshgrid(*[k**2 for k in self.wavenumbers], indexing="ij")
        lam = np.sum(grids, axis=0).ravel()
        lam.setflags(write=False)
        return lam

    def mode_index(self, multi_index) -> int:
        """Flat position of a 1-based multi-index such as ``(1,)`` or ``(2, 1)``."""
        idx = tuple(int(m) for m in np.atleast_1d(multi_index))
        if len(idx) != self.dim or any(not 1 <= m <= n for m, n in zip(idx, self.modes)):
            raise IndexError(f"mode {idx} outside basis {self.modes}")
        return int(np.ravel_multi_index(tuple(m - 1 for m in idx), self.modes))

    def unit(self, multi_index, amplitude: float = 1.0) -> np.ndarray:
        c = np.zeros(self.size)
        c[self.mode_index(multi_index)] = amplitude
        return c

    # -- collocation ---------------------------------------------------------

    def grid_shape(self, dealias: int = 1) -> tuple[int, ...]:
        dealias = _check_dealias(dealias)
        return tuple(dealias * (n + 1) - 1 for n in self.modes)

    def grid_nodes(self, dealias: int = 1) -> tuple[np.ndarray, ...]:
        """Interior node coordinates per axis."""
        return tuple(
            np.arange(1, m + 1) * length / (m + 1)
            for m, length in zip(self.grid_shape(dealias), self.domain.lengths)
        )

    def grid_weight(self, dealias: int = 1) -> float:
        """Quadrature weight of one node (uniform rule, exact for the sine products)."""
        return float(np.prod([length / (m + 1) for m, length in zip(self.grid_shape(dealias), self.domain.lengths)]))

    def synthesize(self, coeffs: np.ndarray, dealias: int = 1, deriv_axis: int | None = None) -> np.ndarray:
        """Evaluate a coefficient vector (or its derivative along one axis) on the grid."""
        shape = self.grid_shape(dealias)
        c = np.asarray(coeffs, dtype=float).reshape(self.modes)
        for axis, (n, m, length) in enumerate(zip(self.modes, shape, self.domain.lengths)):
            scale = np.sqrt(2.0 / length)
            if axis == deriv_axis:
                k = self.wavenumbers[axis].reshape([-1 if a == axis else 1 for a in range(self.dim)])
                c = _pad_axis(c * k, axis, m + 2, offset=1)
                c = 0.5 * scale * fft.dct(c, type=1, axis=axis)
                c = np.take(c, np.arange(1, m + 1), axis=axis)
            else:
                c = _pad_axis(c, axis, m)
                c = 0.5 * scale * fft.dst(c, type=1, axis=axis)
        return c

    def analyze(self, values: np.ndarray, dealias: int = 1) -> np.ndarray:
        """Sine-transform quadrature of grid values, truncated to the retained modes."""
        shape = self.grid_shape(dealias)
        v = np.asarray(values, dtype=float)
        if v.shape != shape:
            raise ValueError(f"grid of shape {v.shape} does not match basis grid {shape} (dealias={dealias})")
        for axis, (n, m, length) in enumerate(zip(self.modes, shape, self.domain.lengths)):
            v = fft.dst(v, type=1, axis=axis) * (np.sqrt(2.0 / length) * length / (2.0 * (m + 1)))
            v = np.take(v, np.arange(n), axis=axis)
        return v.ravel()

    def evaluate(self, coeffs: np.ndarray, points, deriv_axis: int | None = None) -> np.ndarray:
        """Direct eigenfunction sum at arbitrary points of shape ``(P, dim)`` (or ``(P,)`` in 1D)."""
        pts = np.asarray(points, dtype=float)
        if self.dim == 1:
            pts = pts.reshape(-1, 1)
        factors = []
        for axis, (k, length) in enumerate(zip(self.wavenumbers, self.domain.lengths)):
            arg = np.outer(pts[:, axis], k)
            scale = np.sqrt(2.0 / length)
            factors.append(scale * k * np.cos(arg) if axis == deriv_axis else scale * np.sin(arg))
        c = np.asarray(coeffs, dtype=float).reshape(self.modes)
        if self.dim == 1:
            return factors[0] @ c
        return np.einsum("pa,pb,ab->p", factors[0], factors[1], c)


def _check_dealias(dealias) -> int:
    d = int(dealias)
    if d != dealias or d < 1:
        raise ValueError(f"dealias factor must be a positive integer, got {dealias}")
    return d


def _pad_axis(c: np.ndarray, axis: int, length: int, offset: int = 0) -> np.ndarray:
    shape = list(c.shape)
    shape[axis] = length
    out = np.zeros(shape)
    index = [slice(None)] * c.ndim
    index[axis] = slice(offset, offset + c.shape[axis])
    out[tuple(index)] = c
    return out


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Coefficients of one scalar field in a :class:`Basis`."""

    basis: Basis
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float).ravel()
        if c.size != self.basis.size:
            raise ValueError(f"expected {self.basis.size} coefficients, got {c.size}")
        if not np.all(np.isfinite(c)):
            raise ValueError("spectral coefficients must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zeros(cls, basis: Basis) -> SpectralField:
        return cls(basis, np.zeros(basis.size))

    @classmethod
    def mode(cls, basis: Basis, multi_index, amplitude: float = 1.0) -> SpectralField:
        return cls(basis, basis.unit(multi_index, amplitude))

    def _other(self, other):
        if isinstance(other, SpectralField):
            if other.basis != self.basis:
                raise ValueError("fields live on different bases")
            return other.coeffs
        return NotImplemented

    def __add__(self, other):
        c = self._other(other)
        return NotImplemented if c is NotImplemented else SpectralField(self.basis, self.coeffs + c)

    def __sub__(self, other):
        c = self._other(other)
        return NotImplemented if c is NotImplemented else SpectralField(self.basis, self.coeffs - c)

    def __mul__(self, scalar):
        if isinstance(scalar, SpectralField):
            return NotImplemented
        return SpectralField(self.basis, self.coeffs * float(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return SpectralField(self.basis, -self.coeffs)

    def norm(self) -> float:
        return float(np.sqrt(self.coeffs @ self.coeffs))


@dataclass(frozen=True, eq=False)
class GridField:
    """Values of one field on the (possibly refined) interior collocation grid."""

    basis: Basis
    values: np.ndarray
    dealias: int = 1

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.basis.grid_shape(self.dealias):
            raise ValueError(f"grid of shape {v.shape} does not match {self.basis.grid_shape(self.dealias)}")
        if not np.all(np.isfinite(v)):
            raise ValueError("grid values must be finite")
        object.__setattr__(self, "values", v)


def build_basis(domain: BoxDomain, modes_per_axis) -> Basis:
    return Basis(domain, tuple(np.atleast_1d(modes_per_axis)))


def to_grid(f: SpectralField, dealias: int = 1) -> GridField:
    return GridField(f.basis, f.basis.synthesize(f.coeffs, dealias), dealias)


def to_spectral(g: GridField) -> SpectralField:
    return SpectralField(g.basis, g.basis.analyze(g.values, g.dealias))


def K_multiplier(lam, gamma):
    """Symbol of A^{-1}(A^{-1} + gamma)^{-1}."""
    return 1.0 / (1.0 + gamma * np.asarray(lam))


def B_multiplier(lam, gamma):
    """Symbol of (A^{-1} + gamma)^{-1}."""
    lam = np.asarray(lam)
    return lam / (1.0 + gamma * lam)


def _check_gamma(gamma):
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")


def apply_power_of_A(f: SpectralField, p: float) -> SpectralField:
    if p == 0:
        return SpectralField(f.basis, f.coeffs)
    return SpectralField(f.basis, f.coeffs * f.basis.eigenvalues**p)


def apply_K(f: SpectralField, gamma: float) -> SpectralField:
    _check_gamma(gamma)
    return SpectralField(f.basis, f.coeffs * K_multiplier(f.basis.eigenvalues, gamma))


def apply_B(f: SpectralField, gamma: float) -> SpectralField:
    _check_gamma(gamma)
    return SpectralField(f.basis, f.coeffs * B_multiplier(f.basis.eigenvalues, gamma))


def gradient(f: SpectralField, dealias: int = 1) -> tuple[GridField, ...]:
    b = f.basis
    return tuple(GridField(b, b.synthesize(f.coeffs, dealias, deriv_axis=ax), dealias) for ax in range(b.dim))


def inner_product(f: SpectralField, g: SpectralField) -> float:
    if f.basis != g.basis:
        raise ValueError("inner product of fields on different bases")
    return float(f.coeffs @ g.coeffs)
