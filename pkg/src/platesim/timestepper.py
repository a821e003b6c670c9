"""Time integration of the full nonlinear system and run control.

Per mode the linear part is the 3x3 generator M(lambda) acting on
(z_k, z_t,k, theta_k); the stiffness law's excess over the linear A z enters
only the z_t row as the explicit forcing B N(z). Three schemes share this split:

- ``etd2``: exponential Runge-Kutta of order 2 (exact exp(M dt), phi-weighted forcing),
- ``imex``: integrating-factor midpoint (linear block exact via exp(M dt/2), forcing explicit),
- ``rk4``:  classical explicit reference on the full right-hand side,

and ``kato`` delegates to the fixed-point construction in :mod:`linear_solvers`.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from scipy import linalg

from .energy import dissipation_rate, make_report, nonlinear_work
from .errors import CoercivityError, HyperbolicityError, NonContractionError, SolverConvergenceError
from .linear_solvers import KatoConfig, kato_fixed_point
from .model import (
    ModelParams,
    PlateState,
    explicit_forcing_coeffs,
    min_stiffness,
    reduce_order,
    rhs_coeffs,
)
from .spectral import B_multiplier, Basis, SpectralField
from .trajectory import Trajectory

log = logging.getLogger(__name__)

SCHEMES = ("etd2", "imex", "rk4", "kato")

__all__ = ["SCHEMES", "SchemeSpec", "RunControl", "Trajectory", "linear_block", "linear_blocks", "step", "run"]


@dataclass(frozen=True)
class SchemeSpec:
    kind: str = "etd2"
    dt: float = 1e-3
    t_end: float = 1.0
    kato: KatoConfig | None = None

    def __post_init__(self):
        if self.kind not in SCHEMES:
            raise ValueError(f"unknown scheme {self.kind!r}; expected one of {SCHEMES}")
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.t_end >= self.dt * (1 - 1e-12):
            raise ValueError(f"t_end ({self.t_end}) must be at least dt ({self.dt})")

    @property
    def n_steps(self) -> int:
        return max(1, int(round(self.t_end / self.dt)))

    @property
    def step_size(self) -> float:
        """Actual step: dt adjusted so that an integer number of steps lands on t_end."""
        return self.t_end / self.n_steps


@dataclass(frozen=True)
class RunControl:
    """Halting rules. ``blowup_norm_threshold=None`` means ``blowup_factor * X(0)``."""

    blowup_norm_threshold: float | None = None
    blowup_factor: float = 1e6
    hyperbolicity_floor: float = 0.0
    sample_every: int = 1

    def __post_init__(self):
        if self.blowup_norm_threshold is not None and not self.blowup_norm_threshold > 0:
            raise ValueError("blowup_norm_threshold must be positive")
        if not self.blowup_factor > 0:
            raise ValueError("blowup_factor must be positive")
        if int(self.sample_every) != self.sample_every or self.sample_every < 1:
            raise ValueError("sample_every must be a positive integer")


def linear_block(params: ModelParams, lam: float) -> np.ndarray:
    """Generator of d/dt (z, z_t, theta) for one mode of the linearized system."""
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    return linear_blocks(params, np.array([lam], dtype=float))[0]


def linear_blocks(params: ModelParams, lams) -> np.ndarray:
    """Stack of :func:`linear_block` matrices, shape ``(len(lams), 3, 3)``."""
    lam = np.asarray(lams, dtype=float)
    b = B_multiplier(lam, params.gamma)
    m = np.zeros((lam.size, 3, 3))
    m[:, 0, 1] = 1.0
    m[:, 1, 0] = -b * lam
    m[:, 1, 2] = params.alpha * b * lam
    m[:, 2, 1] = -params.alpha / params.beta
    m[:, 2, 2] = -(params.eta * lam + params.sigma) / params.beta
    return m


@lru_cache(maxsize=32)
def _operators(basis: Basis, params: ModelParams, kind: str, dt: float):
    mats = linear_blocks(params, basis.eigenvalues)
    n = len(mats)
    if kind == "etd2":
        # exp of [[M h, h e1, 0], [0, 0, 1], [0, 0, 0]] holds e^{Mh}, h phi1(Mh) e1, h phi2(Mh) e1
        aug = np.zeros((n, 5, 5))
        aug[:, :3, :3] = mats * dt
        aug[:, 1, 3] = 1.0
        aug[:, 3, 4] = 1.0
        ex = linalg.expm(aug)
        return ex[:, :3, :3].copy(), dt * ex[:, :3, 3].copy(), dt * ex[:, :3, 4].copy()
    if kind == "imex":
        half = linalg.expm(0.5 * dt * mats)
        return half, half @ half
    return ()


def _apply(mats: np.ndarray, u: np.ndarray) -> np.ndarray:
    return np.einsum("mij,jm->im", mats, u)


class _Stepper:
    """Precomputed one-step map ``u -> u_next`` on ``(3, n_modes)`` arrays."""

    def __init__(self, basis: Basis, params: ModelParams, kind: str, dt: float):
        self.basis, self.params, self.kind, self.dt = basis, params, kind, float(dt)
        self.ops = _operators(basis, params, kind, float(dt))
        self.bvec = B_multiplier(basis.eigenvalues, params.gamma)

    def forcing(self, z: np.ndarray) -> np.ndarray:
        """B N(z), the only nonlinear contribution (z_t row)."""
        if self.params.is_linear:
            return np.zeros_like(z)
        return self.bvec * explicit_forcing_coeffs(self.basis, z, self.params)

    def __call__(self, u: np.ndarray) -> np.ndarray:
        h = self.dt
        if self.kind == "etd2":
            ex, p1, p2 = self.ops
            nu = self.forcing(u[0])
            a = _apply(ex, u) + p1.T * nu
            if self.params.is_linear:
                return a
            return a + p2.T * (self.forcing(a[0]) - nu)
        if self.kind == "imex":
            half, full = self.ops
            if self.params.is_linear:
                return _apply(full, u)
            nu = np.zeros_like(u)
            nu[1] = self.forcing(u[0])
            mid = _apply(half, u + 0.5 * h * nu)
            nm = np.zeros_like(u)
            nm[1] = self.forcing(mid[0])
            return _apply(full, u) + h * _apply(half, nm)
        return self._rk4(u)

    def _f(self, u):
        ztt, tht = rhs_coeffs(self.basis, u[0], u[1], u[2], self.params, check=False)
        return np.stack([u[1], ztt, tht])

    def _rk4(self, u):
        h = self.dt
        k1 = self._f(u)
        k2 = self._f(u + 0.5 * h * k1)
        k3 = self._f(u + 0.5 * h * k2)
        k4 = self._f(u + h * k3)
        return u + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def step(state: PlateState, params: ModelParams, scheme: SchemeSpec) -> PlateState:
    """Advance one step of size ``scheme.dt`` (not available for ``kato``)."""
    if scheme.kind == "kato":
        raise ValueError("kato advances whole windows; use run()")
    b = state.basis
    with np.errstate(over="ignore", invalid="ignore"):
        u = _Stepper(b, params, scheme.kind, scheme.dt)(state.stacked())
    if not np.all(np.isfinite(u)):
        raise SolverConvergenceError("non-finite state after one step", math.inf)
    return PlateState.from_arrays(b, state.t + scheme.dt, u[0], u[1], u[2])


def _as_state(init, basis: Basis | None) -> PlateState:
    if isinstance(init, PlateState):
        return init
    w0, w1, th0 = init
    if not all(isinstance(f, SpectralField) for f in (w0, w1, th0)):
        raise TypeError("w-form data must be a tuple of three SpectralFields")
    return PlateState(0.0, reduce_order(w0), reduce_order(w1), th0)


class _Recorder:
    """Collects samples and integrates dissipation and nonlinear work at step resolution."""

    def __init__(self, basis, params, t0, u0):
        self.basis, self.params = basis, params
        self.times, self.rows, self.diags = [], [], []
        self.cum_d = self.cum_w = 0.0
        self.prev = (self._d(u0), self._w(u0))
        self.e1b0 = make_report(basis, t0, u0[0], u0[1], u0[2], params).E1_beta
        self.last_t = None

    def _d(self, u):
        return dissipation_rate(self.basis, u[2], self.params)

    def _w(self, u):
        return nonlinear_work(self.basis, u[0], u[1], self.params)

    def advance(self, u, h):
        d, w = self._d(u), self._w(u)
        self.cum_d += 0.5 * h * (d + self.prev[0])
        self.cum_w += 0.5 * h * (w + self.prev[1])
        self.prev = (d, w)

    def sample(self, t, u):
        if self.last_t is not None and t <= self.last_t:
            return self.diags[-1]
        rep = make_report(self.basis, t, u[0], u[1], u[2], self.params, self.cum_d, self.cum_w, self.e1b0)
        self.times.append(t)
        self.rows.append(u.copy())
        self.diags.append(rep)
        self.last_t = t
        return rep

    def trajectory(self, halt_reason="completed", message=""):
        arr = np.array(self.rows)
        return Trajectory(self.basis, self.times, arr[:, 0], arr[:, 1], arr[:, 2], self.diags, halt_reason, message)


def run(
    init,
    params: ModelParams,
    scheme: SchemeSpec | None = None,
    control: RunControl | None = None,
) -> Trajectory:
    """Integrate from ``init`` (a PlateState or w-form ``(w0, w1, theta0)``) and record diagnostics.

    Halting is never silent: the returned trajectory ends at the last valid
    state and carries ``halt_reason`` and a message.
    """
    scheme = scheme or SchemeSpec()
    control = control or RunControl()
    state = _as_state(init, None)
    basis = state.basis
    if scheme.kind == "kato":
        return _run_kato(state, params, scheme, control)
    # overflow shows up as non-finite states or X above the threshold, both reported as halts
    with np.errstate(over="ignore", invalid="ignore"):
        return _run_steps(state, params, scheme, control)


def _run_steps(state: PlateState, params: ModelParams, scheme: SchemeSpec, control: RunControl) -> Trajectory:
    basis = state.basis
    u = state.stacked()
    t0 = state.t
    rec = _Recorder(basis, params, t0, u)
    rep0 = rec.sample(t0, u)
    threshold = control.blowup_norm_threshold or control.blowup_factor * rep0.X
    watch_a = not params.stiffness.always_hyperbolic(params.omega)
    if watch_a and rep0.min_a <= control.hyperbolicity_floor:
        return rec.trajectory("hyperbolicity_loss", f"min a(z) = {rep0.min_a:.6g} at the initial time")

    n = scheme.n_steps
    h = scheme.step_size
    stepper = _Stepper(basis, params, scheme.kind, h)
    for i in range(1, n + 1):
        t = t0 + i * h
        u_new = stepper(u)
        if not np.all(np.isfinite(u_new)):
            rec.sample(t - h, u)
            return rec.trajectory("solver_failure", f"non-finite state at t={t:.6g}")
        rec.advance(u_new, h)
        u = u_new
        if watch_a:
            amin = min_stiffness(basis, u[0], params.stiffness, params.omega)
            if amin <= control.hyperbolicity_floor:
                rec.sample(t, u)
                return rec.trajectory(
                    "hyperbolicity_loss",
                    f"min a(z) = {amin:.6g} <= floor {control.hyperbolicity_floor:g} at t={t:.6g}",
                )
        if i % control.sample_every == 0 or i == n:
            rep = rec.sample(t, u)
            if threshold > 0 and rep.X > threshold:
                return rec.trajectory("blowup", f"X = {rep.X:.6g} exceeds {threshold:.6g} at t={t:.6g}")
    return rec.trajectory()


def _run_kato(state: PlateState, params: ModelParams, scheme: SchemeSpec, control: RunControl) -> Trajectory:
    cfg = scheme.kato or KatoConfig(dt=scheme.dt)
    if cfg.dt != scheme.dt:
        cfg = replace(cfg, dt=scheme.dt)
    try:
        full, iterations, histories = kato_fixed_point(state, params, cfg, scheme.t_end)
        reason, msg = "completed", ""
        info = {"iterations": iterations, "rho_history": histories}
    except NonContractionError as exc:
        log.warning("fixed-point iteration failed: %s", exc)
        full = Trajectory(state.basis, [state.t], state.z.coeffs, state.zt.coeffs, state.theta.coeffs)
        reason, msg = "solver_failure", str(exc)
        info = {"rho_history": [exc.history]}
    except (SolverConvergenceError, HyperbolicityError, CoercivityError) as exc:
        full = Trajectory(state.basis, [state.t], state.z.coeffs, state.zt.coeffs, state.theta.coeffs)
        lost = isinstance(exc, (HyperbolicityError, CoercivityError))
        reason = "hyperbolicity_loss" if lost else "solver_failure"
        msg = str(exc)
        info = {}

    basis = state.basis
    u0 = np.stack([full.z[0], full.zt[0], full.theta[0]])
    rec = _Recorder(basis, params, full.times[0], u0)
    rep0 = rec.sample(full.times[0], u0)
    threshold = control.blowup_norm_threshold or control.blowup_factor * rep0.X
    last = len(full) - 1
    for i in range(1, len(full)):
        u = np.stack([full.z[i], full.zt[i], full.theta[i]])
        rec.advance(u, full.times[i] - full.times[i - 1])
        if i % control.sample_every == 0 or i == last:
            rep = rec.sample(full.times[i], u)
            if threshold > 0 and rep.X > threshold:
                out = rec.trajectory("blowup", f"X exceeds {threshold:.6g} at t={full.times[i]:.6g}")
                out.info.update(info)
                return out
    out = rec.trajectory(reason, msg)
    out.info.update(info)
    return out
