"""The order-reduced thermoelastic plate system in z = -Laplacian(w) form.

    (A^{-1} + gamma) z_tt + a(z) A z - alpha A theta = f(z, grad z)
    beta theta_t + eta A theta + sigma theta + alpha z_t = 0,     z = theta = 0 on the boundary

Dynamics are always written against the linear stiffness ``A z``; whatever the
stiffness law adds on top is collected in the explicit forcing

    N(z) = -(a(z) - 1) A z + f(z, grad z).

For the cubic law a(z) = 1 + 3 omega z^2 together with f = 6 omega z |grad z|^2,
N(z) is exactly ``omega * (-3 z^2 A z + 6 z |grad z|^2)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import HyperbolicityError
from .spectral import B_multiplier, Basis, SpectralField, apply_power_of_A

DEALIAS = 2

__all__ = [
    "DEALIAS",
    "StiffnessLaw",
    "ModelParams",
    "PlateState",
    "CompatibilityJet",
    "reduce_order",
    "expand_order",
    "nonlinearity_F",
    "nonlinearity_F_spectral",
    "nonlinearity_G",
    "explicit_forcing",
    "rhs",
    "compatibility_data",
    "hyperbolicity_min",
    "A_CUBE_SIGN",
]

# Sign s with  -3 z^2 A z + 6 z |grad z|^2 = s * A(z^3); fixed by the single-mode
# symbolic check in tests/test_model.py.
A_CUBE_SIGN = -1


@dataclass(frozen=True)
class StiffnessLaw:
    """Stiffness coefficient a(.) multiplying A z.

    ``cubic``: a(z) = 1 + 3 omega z^2.  ``constant``: a = value.
    ``tabulated``: piecewise-linear through ``breakpoints`` with clamped ends.
    """

    kind: str = "cubic"
    value: float = 1.0
    breakpoints: tuple[tuple[float, float], ...] = field(default=())

    def __post_init__(self):
        if self.kind not in ("cubic", "constant", "tabulated"):
            raise ValueError(f"unknown stiffness kind {self.kind!r}")
        if self.kind == "constant" and not (np.isfinite(self.value) and self.value > 0):
            raise ValueError(f"constant stiffness must be positive, got {self.value}")
        if self.kind == "tabulated":
            pts = tuple((float(x), float(y)) for x, y in self.breakpoints)
            xs = [p[0] for p in pts]
            if len(pts) < 2 or any(b <= a for a, b in zip(xs, xs[1:])):
                raise ValueError("tabulated stiffness needs >= 2 breakpoints with increasing abscissae")
            if not np.all(np.isfinite(pts)):
                raise ValueError("tabulated stiffness breakpoints must be finite")
            object.__setattr__(self, "breakpoints", pts)

    @classmethod
    def cubic(cls) -> StiffnessLaw:
        return cls("cubic")

    @classmethod
    def constant(cls, c: float) -> StiffnessLaw:
        return cls("constant", value=float(c))

    @classmethod
    def tabulated(cls, xs, ys) -> StiffnessLaw:
        return cls("tabulated", breakpoints=tuple(zip(xs, ys)))

    def __call__(self, z, omega: float = 1.0):
        z = np.asarray(z, dtype=float)
        if self.kind == "cubic":
            return 1.0 + 3.0 * omega * z**2
        if self.kind == "constant":
            return np.full_like(z, self.value)
        xs, ys = np.array(self.breakpoints).T
        return np.interp(z, xs, ys)

    def derivative(self, z, omega: float = 1.0):
        z = np.asarray(z, dtype=float)
        if self.kind == "cubic":
            return 6.0 * omega * z
        if self.kind == "constant":
            return np.zeros_like(z)
        xs, ys = np.array(self.breakpoints).T
        slopes = np.diff(ys) / np.diff(xs)
        seg = np.clip(np.searchsorted(xs, z, side="right") - 1, 0, len(slopes) - 1)
        inside = (z >= xs[0]) & (z <= xs[-1])
        return np.where(inside, slopes[seg], 0.0)

    def always_hyperbolic(self, omega: float) -> bool:
        if self.kind == "cubic":
            return omega >= 0
        if self.kind == "constant":
            return True
        return min(y for _, y in self.breakpoints) > 0


@dataclass(frozen=True)
class ModelParams:
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0
    eta: float = 1.0
    sigma: float = 1.0
    omega: float = 1.0
    stiffness: StiffnessLaw = field(default_factory=StiffnessLaw.cubic)

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma", "eta", "sigma"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive, got {v}")
        if not np.isfinite(self.omega):
            raise ValueError("omega must be finite")

    def linearized(self) -> ModelParams:
        """Same constants with the nonlinearity switched off (omega = 0, a = 1)."""
        return replace(self, omega=0.0, stiffness=StiffnessLaw.cubic())

    @property
    def is_linear(self) -> bool:
        law = self.stiffness
        if law.kind == "cubic":
            return self.omega == 0
        return law.kind == "constant" and law.value == 1.0


@dataclass(frozen=True, eq=False)
class PlateState:
    """Phase point (z, z_t, theta) at time t."""

    t: float
    z: SpectralField
    zt: SpectralField
    theta: SpectralField

    def __post_init__(self):
        if not (self.z.basis == self.zt.basis == self.theta.basis):
            raise ValueError("z, zt and theta must share one basis")

    @property
    def basis(self) -> Basis:
        return self.z.basis

    @classmethod
    def from_arrays(cls, basis: Basis, t, z, zt, theta) -> PlateState:
        return cls(float(t), SpectralField(basis, z), SpectralField(basis, zt), SpectralField(basis, theta))

    @classmethod
    def zeros(cls, basis: Basis, t: float = 0.0) -> PlateState:
        zero = SpectralField.zeros(basis)
        return cls(t, zero, zero, zero)

    def stacked(self) -> np.ndarray:
        """``(3, n_modes)`` array of (z, zt, theta) coefficients."""
        return np.stack([self.z.coeffs, self.zt.coeffs, self.theta.coeffs])


@dataclass(frozen=True, eq=False)
class CompatibilityJet:
    """Initial time derivatives z^0..z^order and theta^0..theta^(order-1)."""

    order: int
    z_derivs: list
    theta_derivs: list

    def __post_init__(self):
        if len(self.z_derivs) != self.order + 1 or len(self.theta_derivs) != self.order:
            raise ValueError("jet lengths inconsistent with order")

    def taylor(self, t):
        """Taylor polynomials (z, z_t, theta) of the jet at time offset ``t``, as coefficient arrays."""
        from math import factorial

        z = sum(d.coeffs * t**k / factorial(k) for k, d in enumerate(self.z_derivs))
        zt = sum(d.coeffs * t ** (k - 1) / factorial(k - 1) for k, d in enumerate(self.z_derivs) if k >= 1)
        theta = sum(d.coeffs * t**k / factorial(k) for k, d in enumerate(self.theta_derivs))
        return z, zt, theta


# -- pointwise building blocks (coefficient arrays in, coefficient arrays out) --


def _grid(basis: Basis, c: np.ndarray) -> np.ndarray:
    return basis.synthesize(c, DEALIAS)


def _grads(basis: Basis, c: np.ndarray) -> list[np.ndarray]:
    return [basis.synthesize(c, DEALIAS, deriv_axis=ax) for ax in range(basis.dim)]


def cubic_forcing_coeffs(basis: Basis, z: np.ndarray, omega: float) -> np.ndarray:
    """omega * (-3 z^2 A z + 6 z |grad z|^2), dealiased."""
    if omega == 0 or not np.any(z):
        return np.zeros(basis.size)
    zg = _grid(basis, z)
    azg = _grid(basis, basis.eigenvalues * z)
    grad_sq = sum(g * g for g in _grads(basis, z))
    return omega * basis.analyze(-3.0 * zg * zg * azg + 6.0 * zg * grad_sq, DEALIAS)


def cubic_forcing_rate_coeffs(basis: Basis, z: np.ndarray, zt: np.ndarray, omega: float) -> np.ndarray:
    """Time derivative of the cubic forcing along z_t (the four-term G expression)."""
    if omega == 0 or not (np.any(z) and np.any(zt)):
        return np.zeros(basis.size)
    lam = basis.eigenvalues
    zg, ztg = _grid(basis, z), _grid(basis, zt)
    azg, aztg = _grid(basis, lam * z), _grid(basis, lam * zt)
    gz, gzt = _grads(basis, z), _grads(basis, zt)
    grad_sq = sum(g * g for g in gz)
    grad_dot = sum(a * b for a, b in zip(gz, gzt))
    expr = -6.0 * zg * ztg * azg - 3.0 * zg * zg * aztg + 6.0 * ztg * grad_sq + 12.0 * zg * grad_dot
    return omega * basis.analyze(expr, DEALIAS)


def lower_order_forcing_coeffs(basis: Basis, z: np.ndarray, params: ModelParams) -> np.ndarray:
    """f(z, grad z): 6 omega z |grad z|^2 for the cubic law, zero otherwise."""
    if params.stiffness.kind != "cubic" or params.omega == 0 or not np.any(z):
        return np.zeros(basis.size)
    zg = _grid(basis, z)
    grad_sq = sum(g * g for g in _grads(basis, z))
    return params.omega * basis.analyze(6.0 * zg * grad_sq, DEALIAS)


def stiffness_times_Az_coeffs(basis: Basis, z: np.ndarray, params: ModelParams) -> np.ndarray:
    """P(a(z) * A z), dealiased."""
    law = params.stiffness
    az = basis.eigenvalues * z
    if law.kind == "constant":
        return law.value * az
    a = law(_grid(basis, z), params.omega)
    return basis.analyze(a * _grid(basis, az), DEALIAS)


def explicit_forcing_coeffs(basis: Basis, z: np.ndarray, params: ModelParams) -> np.ndarray:
    """N(z) = -(a(z) - 1) A z + f(z, grad z)."""
    law = params.stiffness
    if law.kind == "cubic":
        return cubic_forcing_coeffs(basis, z, params.omega)
    if law.kind == "constant":
        return -(law.value - 1.0) * basis.eigenvalues * z
    a = law(_grid(basis, z), params.omega)
    return -basis.analyze((a - 1.0) * _grid(basis, basis.eigenvalues * z), DEALIAS)


def explicit_forcing_rate_coeffs(basis: Basis, z: np.ndarray, zt: np.ndarray, params: ModelParams) -> np.ndarray:
    """d/dt N(z(t)) given z_t."""
    law = params.stiffness
    lam = basis.eigenvalues
    if law.kind == "cubic":
        return cubic_forcing_rate_coeffs(basis, z, zt, params.omega)
    if law.kind == "constant":
        return -(law.value - 1.0) * lam * zt
    zg = _grid(basis, z)
    a, da = law(zg, params.omega), law.derivative(zg, params.omega)
    expr = -da * _grid(basis, zt) * _grid(basis, lam * z) - (a - 1.0) * _grid(basis, lam * zt)
    return basis.analyze(expr, DEALIAS)


def min_stiffness(basis: Basis, z: np.ndarray, law: StiffnessLaw, omega: float = 1.0) -> float:
    """min a(z) over the refined grid plus the boundary, where z = 0."""
    return float(min(np.min(law(_grid(basis, z), omega)), law(0.0, omega)))


def rhs_coeffs(basis: Basis, z, zt, theta, params: ModelParams, check: bool = True):
    """(z_tt, theta_t) coefficient arrays of the resolved system."""
    lam = basis.eigenvalues
    if check and not params.stiffness.always_hyperbolic(params.omega):
        amin = min_stiffness(basis, z, params.stiffness, params.omega)
        if amin <= 0:
            raise HyperbolicityError(amin)
    drive = -lam * z + params.alpha * lam * theta + explicit_forcing_coeffs(basis, z, params)
    ztt = B_multiplier(lam, params.gamma) * drive
    thetat = -(params.eta * lam * theta + params.sigma * theta + params.alpha * zt) / params.beta
    return ztt, thetat


# -- field-level operations -------------------------------------------------------


def reduce_order(w: SpectralField) -> SpectralField:
    return apply_power_of_A(w, 1.0)


def expand_order(z: SpectralField) -> SpectralField:
    """Recover w = A^{-1} z."""
    return apply_power_of_A(z, -1.0)


def nonlinearity_F(z: SpectralField, omega: float = 1.0) -> SpectralField:
    return SpectralField(z.basis, cubic_forcing_coeffs(z.basis, z.coeffs, omega))


def nonlinearity_F_spectral(z: SpectralField, omega: float = 1.0, sign: int = A_CUBE_SIGN) -> SpectralField:
    """sign * omega * A(z^3), cubing on the refined grid."""
    if sign not in (-1, 1):
        raise ValueError("sign must be +1 or -1")
    b = z.basis
    cube = b.analyze(_grid(b, z.coeffs) ** 3, DEALIAS)
    return SpectralField(b, sign * omega * b.eigenvalues * cube)


def nonlinearity_G(z: SpectralField, zt: SpectralField, omega: float = 1.0) -> SpectralField:
    if z.basis != zt.basis:
        raise ValueError("z and zt must share one basis")
    return SpectralField(z.basis, cubic_forcing_rate_coeffs(z.basis, z.coeffs, zt.coeffs, omega))


def explicit_forcing(z: SpectralField, params: ModelParams) -> SpectralField:
    return SpectralField(z.basis, explicit_forcing_coeffs(z.basis, z.coeffs, params))


def rhs(state: PlateState, params: ModelParams) -> tuple[SpectralField, SpectralField]:
    b = state.basis
    ztt, thetat = rhs_coeffs(b, state.z.coeffs, state.zt.coeffs, state.theta.coeffs, params)
    return SpectralField(b, ztt), SpectralField(b, thetat)


def compatibility_data(
    z0: SpectralField, z1: SpectralField, theta0: SpectralField, params: ModelParams, order: int = 3
) -> CompatibilityJet:
    """Initial time derivatives obtained by differentiating the resolved system at t = 0."""
    if not 1 <= int(order) <= 3:
        raise ValueError(f"compatibility order must be 1, 2 or 3, got {order}")
    b = z0.basis
    lam = b.eigenvalues
    zs = [z0.coeffs, z1.coeffs]
    ths = [theta0.coeffs]
    if order >= 2:
        z2, th1 = rhs_coeffs(b, z0.coeffs, z1.coeffs, theta0.coeffs, params)
        zs.append(z2)
        ths.append(th1)
    if order >= 3:
        drive = -lam * z1.coeffs + params.alpha * lam * th1 + explicit_forcing_rate_coeffs(b, z0.coeffs, z1.coeffs, params)
        zs.append(B_multiplier(lam, params.gamma) * drive)
        ths.append(-(params.eta * lam * th1 + params.sigma * th1 + params.alpha * z2) / params.beta)
    return CompatibilityJet(int(order), [SpectralField(b, c) for c in zs], [SpectralField(b, c) for c in ths])


def hyperbolicity_min(z: SpectralField, law: StiffnessLaw, omega: float = 1.0) -> float:
    return min_stiffness(z.basis, z.coeffs, law, omega)
