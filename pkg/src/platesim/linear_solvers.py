"""Linear heat and wave solvers and the fixed-point map built from them.

The fixed-point map sends a guess (zbar, thetabar) on a short window to (z, theta):

1. theta solves  theta_t + (eta/beta) A theta = gbar,  gbar = -(alpha zbar_t + sigma thetabar) / beta
2. z solves      z_t t + abar(t, x) A z = fbar  with  abar = a(zbar) / gamma and
                 fbar = (1-K) f(zbar) / gamma + K(a(zbar) A zbar) / gamma + (alpha/gamma) (1-K) A theta

where theta in fbar is the freshly computed temperature. A fixed point solves
the resolved plate system on the window.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import CoercivityError, HyperbolicityError, NonContractionError, SolverConvergenceError
from .model import (
    DEALIAS,
    ModelParams,
    PlateState,
    compatibility_data,
    lower_order_forcing_coeffs,
    min_stiffness,
    stiffness_times_Az_coeffs,
)
from .spectral import Basis, K_multiplier, SpectralField
from .trajectory import Trajectory

log = logging.getLogger(__name__)

__all__ = [
    "HeatProblem",
    "WaveProblem",
    "KatoConfig",
    "HeatSolution",
    "WaveSolution",
    "phi_functions",
    "solve_heat",
    "solve_wave",
    "kato_map",
    "kato_fixed_point",
    "rho_metric",
]


def phi_functions(x):
    """phi1(x) = (e^x - 1)/x and phi2(x) = (e^x - 1 - x)/x^2, stable near 0."""
    x = np.asarray(x, dtype=float)
    phi1 = np.empty_like(x)
    phi2 = np.empty_like(x)
    small = np.abs(x) < 0.5
    xs = x[small]
    term1 = np.ones_like(xs)
    term2 = np.full_like(xs, 0.5)
    s1, s2 = term1.copy(), term2.copy()
    for k in range(1, 22):
        term1 = term1 * xs / (k + 1)
        term2 = term2 * xs / (k + 2)
        s1 += term1
        s2 += term2
    phi1[small], phi2[small] = s1, s2
    xl = x[~small]
    em1 = np.expm1(xl)
    phi1[~small] = em1 / xl
    phi2[~small] = (em1 - xl) / xl**2
    return phi1, phi2


def _step_grid(t0: float, t_end: float, dt: float):
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if t_end < dt * (1 - 1e-12):
        raise ValueError(f"t_end ({t_end}) must be at least dt ({dt})")
    n = max(1, int(round(t_end / dt)))
    return t0 + (t_end / n) * np.arange(n + 1), t_end / n


def _coeffs(value, basis: Basis) -> np.ndarray:
    if value is None:
        return np.zeros(basis.size)
    if isinstance(value, SpectralField):
        return value.coeffs
    return np.broadcast_to(np.asarray(value, dtype=float), (basis.size,))


@dataclass(frozen=True, eq=False)
class HeatProblem:
    """theta_t + diffusivity * A theta = source(t) on ``[t0, t0 + t_end]``.

    ``source`` is a callable of time returning coefficients (or None), or an
    array of samples with one row per step node.
    """

    theta0: SpectralField
    diffusivity: float
    source: Callable | np.ndarray | None = None
    t_end: float = 1.0
    dt: float = 1e-3
    t0: float = 0.0

    def __post_init__(self):
        if not self.diffusivity > 0:
            raise ValueError(f"diffusivity must be positive, got {self.diffusivity}")
        _step_grid(self.t0, self.t_end, self.dt)


@dataclass(frozen=True)
class HeatSolution:
    times: np.ndarray
    theta: np.ndarray

    def field(self, basis: Basis, i: int) -> SpectralField:
        return SpectralField(basis, self.theta[i])


def solve_heat(p: HeatProblem) -> HeatSolution:
    """Exponential integrator per mode; exact for source terms linear in time."""
    basis = p.theta0.basis
    times, h = _step_grid(p.t0, p.t_end, p.dt)
    rate = p.diffusivity * basis.eigenvalues
    decay = np.exp(-rate * h)
    phi1, phi2 = phi_functions(-rate * h)
    w_old, w_new = h * (phi1 - phi2), h * phi2

    if p.source is None:
        samples = None
    elif callable(p.source):
        samples = np.array([_coeffs(p.source(t), basis) for t in times])
    else:
        samples = np.asarray(p.source, dtype=float)
        if samples.shape != (len(times), basis.size):
            raise ValueError(f"source samples must have shape {(len(times), basis.size)}")

    out = np.empty((len(times), basis.size))
    out[0] = p.theta0.coeffs
    for n in range(len(times) - 1):
        nxt = decay * out[n]
        if samples is not None:
            nxt += w_old * samples[n] + w_new * samples[n + 1]
        out[n + 1] = nxt
    return HeatSolution(times, out)


@dataclass(frozen=True, eq=False)
class WaveProblem:
    """z_tt + coeff(t, x) * A z = forcing(t) with z = 0 on the boundary.

    ``coeff(t)`` returns values on the refined grid (``DEALIAS``) or a scalar;
    it is sampled at step midpoints. ``forcing(t)`` returns coefficients or None.
    """

    z0: SpectralField
    z1: SpectralField
    coeff: Callable | float = 1.0
    forcing: Callable | None = None
    t_end: float = 1.0
    dt: float = 1e-3
    solver_tol: float = 1e-12
    solver_max_iter: int = 200
    coercivity_floor: float = 1e-12
    t0: float = 0.0

    def __post_init__(self):
        if not (self.solver_tol > 0 and self.solver_max_iter >= 1 and self.coercivity_floor > 0):
            raise ValueError("solver_tol, solver_max_iter and coercivity_floor must be positive")
        _step_grid(self.t0, self.t_end, self.dt)


@dataclass(frozen=True)
class WaveSolution:
    times: np.ndarray
    z: np.ndarray
    zt: np.ndarray
    max_iterations: int


def _pcg(apply, rhs, precond, x0, tol, max_iter):
    """Preconditioned conjugate gradients for a symmetric positive definite operator."""
    bnorm = np.linalg.norm(rhs)
    if bnorm == 0:
        return np.zeros_like(rhs), 0
    x = x0.copy()
    r = rhs - apply(x)
    rel = np.linalg.norm(r) / bnorm
    if rel <= tol:
        return x, 0
    zr = r / precond
    p = zr.copy()
    rz = r @ zr
    for k in range(1, max_iter + 1):
        ap = apply(p)
        step = rz / (p @ ap)
        x += step * p
        r -= step * ap
        rel = np.linalg.norm(r) / bnorm
        if rel <= tol:
            return x, k
        zr = r / precond
        rz_new = r @ zr
        p = zr + (rz_new / rz) * p
        rz = rz_new
    raise SolverConvergenceError(f"conjugate gradients did not converge in {max_iter} iterations", rel)


def solve_wave(p: WaveProblem) -> WaveSolution:
    """Implicit midpoint with the coefficient frozen at each step midpoint.

    Each step solves (I + c G A) m = r for the midpoint value m, c = dt^2/4 and
    G = P(abar * .) the Galerkin multiplication by the coefficient. Multiplying
    through by A makes the system symmetric positive definite, so it is solved
    by conjugate gradients preconditioned with lambda (1 + c mean(abar) lambda).
    """
    basis = p.z0.basis
    lam = basis.eigenvalues
    times, h = _step_grid(p.t0, p.t_end, p.dt)
    c = 0.25 * h * h
    z = np.empty((len(times), basis.size))
    v = np.empty_like(z)
    z[0], v[0] = p.z0.coeffs, p.z1.coeffs
    worst = 0

    for n in range(len(times) - 1):
        tm = 0.5 * (times[n] + times[n + 1])
        coeff = p.coeff(tm) if callable(p.coeff) else p.coeff
        coeff = np.asarray(coeff, dtype=float)
        cmin = float(np.min(coeff))
        if cmin < p.coercivity_floor:
            raise CoercivityError(f"wave coefficient {cmin:.6g} below coercivity floor {p.coercivity_floor:.3g} at t={tm:.6g}")
        f = _coeffs(p.forcing(tm), basis) if p.forcing is not None else 0.0
        r = z[n] + 0.5 * h * v[n] + c * f

        if coeff.ndim == 0:
            mid = r / (1.0 + c * float(coeff) * lam)
        else:
            grid_coeff = np.broadcast_to(coeff, basis.grid_shape(DEALIAS))

            def apply(u, grid_coeff=grid_coeff):
                au = lam * u
                return au + c * lam * basis.analyze(grid_coeff * basis.synthesize(au, DEALIAS), DEALIAS)

            mean = float(np.mean(grid_coeff))
            precond = lam * (1.0 + c * mean * lam)
            guess = r / (1.0 + c * mean * lam)
            mid, its = _pcg(apply, lam * r, precond, guess, p.solver_tol, p.solver_max_iter)
            worst = max(worst, its)

        z[n + 1] = 2.0 * mid - z[n]
        v[n + 1] = 4.0 * (mid - z[n]) / h - v[n]
    return WaveSolution(times, z, v, worst)


@dataclass(frozen=True)
class KatoConfig:
    window: float = 0.1
    dt: float = 1e-3
    tol_rho: float = 1e-10
    max_iter: int = 50
    damping: float = 1.0
    max_halvings: int = 4
    solver_tol: float = 1e-13
    solver_max_iter: int = 200
    # +1 follows from rearranging the resolved z-equation; -1 flips the term for comparison
    theta_sign: int = 1

    def __post_init__(self):
        if not (self.window > 0 and self.tol_rho > 0 and self.dt > 0):
            raise ValueError("window, tol_rho and dt must be positive")
        if not 0 < self.damping <= 1:
            raise ValueError(f"damping must lie in (0, 1], got {self.damping}")
        if self.theta_sign not in (-1, 1):
            raise ValueError("theta_sign must be +1 or -1")


def rho_metric(a: Trajectory, b: Trajectory) -> float:
    """max_t (||dz||^2 + ||dz_t||^2 + ||grad dz||^2 + ||dtheta||_{H^1}^2)^(1/2)."""
    if a.basis != b.basis or a.z.shape != b.z.shape or not np.allclose(a.times, b.times, rtol=0, atol=1e-12):
        raise ValueError("trajectories must share basis and time grid")
    w = 1.0 + a.basis.eigenvalues
    dz, dzt, dth = a.z - b.z, a.zt - b.zt, a.theta - b.theta
    per_time = (dz**2 * w).sum(axis=1) + (dzt**2).sum(axis=1) + (dth**2 * w).sum(axis=1)
    return float(np.sqrt(per_time.max()))


def _wave_forcing_samples(guess: Trajectory, theta: np.ndarray, params: ModelParams, theta_sign: int) -> np.ndarray:
    basis = guess.basis
    lam = basis.eigenvalues
    one_minus_k = 1.0 - K_multiplier(lam, params.gamma)
    k = K_multiplier(lam, params.gamma)
    g = params.gamma
    out = np.empty_like(guess.z)
    for j, zbar in enumerate(guess.z):
        f = lower_order_forcing_coeffs(basis, zbar, params)
        a_az = stiffness_times_Az_coeffs(basis, zbar, params)
        out[j] = one_minus_k * f / g + k * a_az / g + theta_sign * (params.alpha / g) * one_minus_k * lam * theta[j]
    return out


def kato_map(guess: Trajectory, params: ModelParams, cfg: KatoConfig) -> Trajectory:
    """One application of the fixed-point map on the guess's time grid."""
    basis = guess.basis
    t0, t1 = guess.times[0], guess.times[-1]
    law, omega = params.stiffness, params.omega
    if not law.always_hyperbolic(omega):
        amin = min(min_stiffness(basis, zb, law, omega) for zb in guess.z)
        if amin <= 0:
            raise HyperbolicityError(amin)

    gbar = -(params.alpha * guess.zt + params.sigma * guess.theta) / params.beta
    heat = solve_heat(
        HeatProblem(SpectralField(basis, guess.theta[0]), params.eta / params.beta, gbar, t1 - t0, cfg.dt, t0)
    )
    fbar = _wave_forcing_samples(guess, heat.theta, params, cfg.theta_sign)
    h = (t1 - t0) / (len(guess.times) - 1)

    def locate(t):
        j = min(int(np.floor((t - t0) / h)), len(guess.times) - 2)
        return j, (t - guess.times[j]) / h

    def coeff(t):
        j, s = locate(t)
        zmid = (1 - s) * guess.z[j] + s * guess.z[j + 1]
        return law(basis.synthesize(zmid, DEALIAS), omega) / params.gamma

    def forcing(t):
        j, s = locate(t)
        return (1 - s) * fbar[j] + s * fbar[j + 1]

    wave = solve_wave(
        WaveProblem(
            SpectralField(basis, guess.z[0]),
            SpectralField(basis, guess.zt[0]),
            coeff,
            forcing,
            t1 - t0,
            cfg.dt,
            cfg.solver_tol,
            cfg.solver_max_iter,
            t0=t0,
        )
    )
    return Trajectory(basis, guess.times, wave.z, wave.zt, heat.theta)


def _initial_guess(state: PlateState, params: ModelParams, times: np.ndarray) -> Trajectory:
    """Taylor polynomials built from the compatibility jet at the window start."""
    jet = compatibility_data(state.z, state.zt, state.theta, params, order=3)
    parts = [jet.taylor(t - times[0]) for t in times]
    z, zt, th = (np.array([p[i] * np.ones(state.basis.size) for p in parts]) for i in range(3))
    return Trajectory(state.basis, times, z, zt, th)


def _solve_window(state: PlateState, params: ModelParams, cfg: KatoConfig, length: float):
    times, _ = _step_grid(state.t, length, cfg.dt)
    guess = _initial_guess(state, params, times)
    history = []
    rises = 0
    for it in range(1, cfg.max_iter + 1):
        new = kato_map(guess, params, cfg)
        rho = rho_metric(new, guess)
        history.append(rho)
        if not np.isfinite(rho):
            raise NonContractionError("fixed-point iterates became non-finite", history)
        if rho <= cfg.tol_rho:
            return new, it, history
        rises = rises + 1 if len(history) > 1 and rho > history[-2] else 0
        if rises >= 3:
            raise NonContractionError(f"rho increased for 3 consecutive iterations on window at t={state.t:.6g}", history)
        if cfg.damping == 1.0:
            guess = new
        else:
            d = cfg.damping
            guess = Trajectory(
                guess.basis,
                guess.times,
                guess.z + d * (new.z - guess.z),
                guess.zt + d * (new.zt - guess.zt),
                guess.theta + d * (new.theta - guess.theta),
            )
    raise NonContractionError(f"no convergence to tol_rho={cfg.tol_rho:g} in {cfg.max_iter} iterations", history)


def kato_fixed_point(init: PlateState, params: ModelParams, cfg: KatoConfig, t_end: float | None = None):
    """Fixed point of the map on successive windows covering ``[init.t, init.t + t_end]``.

    Returns ``(trajectory, iterations, rho_history)`` with one entry of the last
    two per window. A window that stops contracting is retried at half length,
    at most ``cfg.max_halvings`` times.
    """
    total = cfg.window if t_end is None else float(t_end)
    n_total = max(1, int(round(total / cfg.dt)))
    n_window = max(1, int(round(cfg.window / cfg.dt)))
    state = init
    pieces, iterations, histories = [], [], []
    done = 0
    while done < n_total:
        n = min(n_window, n_total - done)
        for attempt in range(cfg.max_halvings + 1):
            try:
                window, its, hist = _solve_window(state, params, cfg, n * cfg.dt)
                break
            except NonContractionError as exc:
                if attempt == cfg.max_halvings or n == 1:
                    raise
                log.info("window at t=%.6g did not contract (%s); halving", state.t, exc)
                n = max(1, n // 2)
        pieces.append(window if not pieces else _drop_first(window))
        iterations.append(its)
        histories.append(hist)
        state = window.state(len(window) - 1)
        done += n
    traj = Trajectory(
        init.basis,
        np.concatenate([p.times for p in pieces]),
        np.concatenate([p.z for p in pieces]),
        np.concatenate([p.zt for p in pieces]),
        np.concatenate([p.theta for p in pieces]),
    )
    return traj, iterations, histories


def _drop_first(t: Trajectory) -> Trajectory:
    return Trajectory(t.basis, t.times[1:], t.z[1:], t.zt[1:], t.theta[1:])
