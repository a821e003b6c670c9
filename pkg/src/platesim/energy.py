"""Energy functionals, the level-1 energy identity, barrier polynomials and decay fits.

Energies (all norms through Parseval in the orthonormal sine basis):

    E1 = 1/2 |A^{-1/2} z_t|^2 + gamma/2 |z_t|^2 + 1/2 |A^{1/2} z|^2 + 1/2 |A^{1/2} theta|^2
    E2 = 1/2 |z_t|^2 + gamma/2 |A^{1/2} z_t|^2 + 1/2 |A z|^2 + 1/2 |A theta|^2
    E3 = E2 with (z, z_t, theta) -> (z_t, z_tt, theta_t)
    X  = E2 + E3

``E1_beta`` carries beta/2 on the thermal term; with it the balance

    E1_beta(T) - E1_beta(0) + int_0^T (eta |A theta|^2 + sigma |A^{1/2} theta|^2) = int_0^T <N(z), z_t>

holds exactly for the semi-discrete system.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .model import ModelParams, PlateState, explicit_forcing_coeffs, min_stiffness, rhs_coeffs
from .spectral import Basis

__all__ = [
    "EnergyReport",
    "BarrierConfig",
    "BarrierReport",
    "DecayFit",
    "AprioriFit",
    "energy_levels",
    "energy_e1_beta",
    "dissipation_rate",
    "nonlinear_work",
    "make_report",
    "identity_residual",
    "identity_residual_series",
    "boost_ratio",
    "barrier_eval",
    "barrier_roots",
    "smallness_thresholds",
    "fit_decay",
    "apriori_constants",
]


@dataclass(frozen=True)
class EnergyReport:
    t: float
    E1: float
    E1_beta: float
    E2: float
    E3: float
    X: float
    min_a: float
    boost_ratio: float
    cum_dissipation: float
    identity_residual: float


def _levels(basis: Basis, z, zt, theta, params: ModelParams):
    lam = basis.eigenvalues
    g = params.gamma
    ztt, tht = rhs_coeffs(basis, z, zt, theta, params, check=False)
    kin1 = 0.5 * np.sum(zt * zt / lam) + 0.5 * g * np.sum(zt * zt)
    pot1 = 0.5 * np.sum(lam * z * z)
    th1 = 0.5 * np.sum(lam * theta * theta)
    e1 = kin1 + pot1 + th1
    e1b = kin1 + pot1 + params.beta * th1
    e2 = 0.5 * np.sum(zt * zt) + 0.5 * g * np.sum(lam * zt * zt) + 0.5 * np.sum(lam**2 * z * z) + 0.5 * np.sum(lam**2 * theta * theta)
    e3 = 0.5 * np.sum(ztt * ztt) + 0.5 * g * np.sum(lam * ztt * ztt) + 0.5 * np.sum(lam**2 * zt * zt) + 0.5 * np.sum(lam**2 * tht * tht)
    return float(e1), float(e1b), float(e2), float(e3)


def energy_levels(state: PlateState, params: ModelParams) -> tuple[float, float, float]:
    e1, _, e2, e3 = _levels(state.basis, state.z.coeffs, state.zt.coeffs, state.theta.coeffs, params)
    return e1, e2, e3


def energy_e1_beta(state: PlateState, params: ModelParams) -> float:
    return _levels(state.basis, state.z.coeffs, state.zt.coeffs, state.theta.coeffs, params)[1]


def dissipation_rate(basis: Basis, theta, params: ModelParams) -> float:
    """eta |A theta|^2 + sigma |A^{1/2} theta|^2."""
    lam = basis.eigenvalues
    return float(params.eta * np.sum(lam**2 * theta * theta) + params.sigma * np.sum(lam * theta * theta))


def nonlinear_work(basis: Basis, z, zt, params: ModelParams) -> float:
    """<N(z), z_t>."""
    if params.is_linear:
        return 0.0
    return float(explicit_forcing_coeffs(basis, z, params) @ zt)


def _boost(basis: Basis, z, x: float) -> float:
    if x <= 0:
        return 0.0
    return float(np.sum(basis.eigenvalues**3 * z * z) / (x + x**3))


def boost_ratio(state: PlateState, params: ModelParams) -> float:
    """|A^{3/2} z|^2 / (X + X^3); zero for the zero state."""
    _, e2, e3 = energy_levels(state, params)
    return _boost(state.basis, state.z.coeffs, e2 + e3)


def make_report(basis: Basis, t, z, zt, theta, params: ModelParams, cum_dissipation=0.0, cum_work=0.0, e1_beta0=None):
    e1, e1b, e2, e3 = _levels(basis, z, zt, theta, params)
    x = e2 + e3
    base = e1b if e1_beta0 is None else e1_beta0
    return EnergyReport(
        t=float(t),
        E1=e1,
        E1_beta=e1b,
        E2=e2,
        E3=e3,
        X=x,
        min_a=min_stiffness(basis, z, params.stiffness, params.omega),
        boost_ratio=_boost(basis, z, x),
        cum_dissipation=float(cum_dissipation),
        identity_residual=float(e1b - base + cum_dissipation - cum_work),
    )


def identity_residual_series(traj, params: ModelParams, quadrature: str = "trapezoid") -> np.ndarray:
    """Signed residual of the level-1 identity at every sample, from the samples alone."""
    if len(traj) < 2:
        raise ValueError("identity residual needs at least 2 samples")
    b = traj.basis
    e1b = np.array([_levels(b, traj.z[i], traj.zt[i], traj.theta[i], params)[1] for i in range(len(traj))])
    diss = np.array([dissipation_rate(b, th, params) for th in traj.theta])
    work = np.array([nonlinear_work(b, traj.z[i], traj.zt[i], params) for i in range(len(traj))])
    integrand = diss - work
    if quadrature == "trapezoid":
        cum = integrate.cumulative_trapezoid(integrand, traj.times, initial=0.0)
    elif quadrature == "simpson":
        cum = integrate.cumulative_simpson(integrand, x=traj.times, initial=0.0)
    else:
        raise ValueError(f"unknown quadrature {quadrature!r}")
    return e1b - e1b[0] + cum


def identity_residual(traj, params: ModelParams, quadrature: str = "trapezoid") -> float:
    """|LHS - RHS| of the level-1 identity over the whole trajectory."""
    return float(abs(identity_residual_series(traj, params, quadrature)[-1]))


# -- barrier machinery -------------------------------------------------------------


@dataclass(frozen=True)
class BarrierConfig:
    C1: float = 1.0
    C2: float = 1.0
    C3: float = 1.0
    C4: float = 1.0

    def __post_init__(self):
        for name in ("C1", "C2", "C3", "C4"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be a finite nonnegative number, got {v}")
        if not self.C1 > 0:
            raise ValueError("C1 must be positive")


_K_POWERS = (2, 4, 6, 8)
_H_POWERS = (1.5, 2, 3, 4, 4.5, 6, 9)


def _k(x, c4):
    return x - c4 * sum(x**p for p in _K_POWERS)


def _h(x, c1, c3):
    return c1 * x - c3 * sum(x**p for p in _H_POWERS)


def barrier_eval(x: float, cfg: BarrierConfig) -> tuple[float, float]:
    """(k(x), h(x)) for k(x) = x - C4 (x^2 + x^4 + x^6 + x^8) and the posynomial h."""
    if x < 0:
        raise ValueError(f"barrier functions are defined for x >= 0, got {x}")
    x = float(x)
    return _k(x, cfg.C4), _h(x, cfg.C1, cfg.C3)


def _bisect(f, lo, hi, tol=1e-15, max_iter=400):
    """Root of a function with f(lo) > 0 > f(hi)."""
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi) or hi - lo <= tol * max(1.0, abs(mid)):
            break
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _decreasing_root(f):
    """Positive root of a strictly decreasing f with f(0+) > 0, or inf if it stays positive."""
    hi = 1.0
    while f(hi) > 0:
        hi *= 2.0
        if hi > 1e300:
            return math.inf
    return _bisect(f, 0.0, hi)


@dataclass(frozen=True)
class BarrierReport:
    eta_root: float
    xi_root: float
    k_peak: float
    k_max: float
    delta1: float | None
    delta2: float | None
    X0: float | None
    admissible: bool

    @property
    def eta_unbounded(self) -> bool:
        return math.isinf(self.eta_root)

    @property
    def xi_unbounded(self) -> bool:
        return math.isinf(self.xi_root)


def barrier_roots(cfg: BarrierConfig, X0: float | None = None, eps1: float | None = None) -> BarrierReport:
    """Positive zeros of k and h, and the sublevel bands of k(y) <= C2 X0.

    Dividing out the trivial root at 0, k(x)/x and h(x)/x are strictly
    decreasing, so each positive zero is found by bracketed bisection.
    """
    c1, c2, c3, c4 = cfg.C1, cfg.C2, cfg.C3, cfg.C4
    eta = _decreasing_root(lambda x: 1.0 - c4 * sum(x ** (p - 1) for p in _K_POWERS)) if c4 > 0 else math.inf
    xi = _decreasing_root(lambda x: c1 - c3 * sum(x ** (p - 1) for p in _H_POWERS)) if c3 > 0 else math.inf

    if c4 > 0:
        peak = _decreasing_root(lambda x: 1.0 - c4 * sum(p * x ** (p - 1) for p in _K_POWERS))
        kmax = _k(peak, c4)
    else:
        peak, kmax = math.inf, math.inf

    d1 = d2 = None
    admissible = False
    if X0 is not None:
        if X0 < 0:
            raise ValueError("X0 must be nonnegative")
        level = c2 * X0
        if level < kmax:
            if c4 > 0:
                d1 = _bisect(lambda y: level - _k(y, c4), 0.0, peak) if level > 0 else 0.0
                d2 = _bisect(lambda y: _k(y, c4) - level, peak, eta)
            else:
                # k(y) = y
                d1, d2 = level, math.inf
            admissible = (
                X0 < 1.0 and X0 < d2 and d1 < xi and X0 < xi and (eps1 is None or d1 < eps1)
            )
    return BarrierReport(eta, xi, peak, kmax, d1, d2, X0, admissible)


def smallness_thresholds(cfg: BarrierConfig, eps1: float | None = None) -> dict:
    """Largest X(0) levels meeting the global-existence and decay conditions.

    ``eps2`` bounds X(0) for the barrier argument, ``eps3`` keeps the absorbing
    bound delta1 small enough that both bracketed factors stay >= 1/2, and
    ``eps_tilde = min(eps / (2 C2), eps3)``.
    """
    e1 = math.inf if eps1 is None else float(eps1)

    def ok2(x0):
        return barrier_roots(cfg, x0, eps1).admissible

    def ok3(x0):
        rep = barrier_roots(cfg, x0)
        if rep.delta1 is None:
            return False
        d = rep.delta1
        first = 1 - cfg.C4 * (d + d**3 + d**5 + d**7)
        second = 1 - cfg.C4 * (d**0.5 + d + d**2 + d**3 + d**3.5 + d**5 + d**8)
        return first >= 0.5 and second >= 0.5

    eps2 = _largest_ok(ok2)
    eps3 = _largest_ok(ok3)
    eps = min(1.0, e1, eps2)
    eps_tilde = min(eps / (2 * cfg.C2), eps3) if cfg.C2 > 0 else eps3
    return {"eps1": e1, "eps2": eps2, "eps": eps, "eps3": eps3, "eps_tilde": eps_tilde}


def _largest_ok(ok, hi=1.0):
    """Supremum of x in (0, hi] with ok(x), assuming ok holds on an initial segment."""
    if ok(hi):
        return hi
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * hi:
            break
    return lo


# -- decay fitting and a-priori constants -------------------------------------------


@dataclass(frozen=True)
class DecayFit:
    C: float
    k: float
    r2: float
    window: tuple[float, float]


def fit_decay(times, X_values, trim: float = 0.05, floor: float = 1e-14) -> DecayFit:
    """Least-squares line through (t, ln X) on the trimmed window.

    The prefactor is inflated to the largest observed X(t) / (e^{-kt} X(0)) so
    that X(t) <= C e^{-kt} X(0) holds at every sample of the window.
    """
    t = np.asarray(times, dtype=float)
    x = np.asarray(X_values, dtype=float)
    if t.shape != x.shape or t.ndim != 1:
        raise ValueError("times and X_values must be 1-D arrays of equal length")
    if len(x) == 0 or not x[0] > 0:
        raise ValueError("X(0) must be positive")
    x0 = x[0]
    n = len(t)
    cut = int(math.floor(trim * n))
    tw, xw = t[cut : n - cut], x[cut : n - cut]
    if np.any(xw <= 0):
        raise ValueError("non-positive energy samples inside the fit window")
    keep = xw > floor * x0
    tw, xw = tw[keep], xw[keep]
    if len(tw) < 8:
        raise ValueError(f"need >= 8 samples above the floor, got {len(tw)}")
    logx = np.log(xw)
    slope, intercept = np.polyfit(tw, logx, 1)
    pred = slope * tw + intercept
    ss_res = float(np.sum((logx - pred) ** 2))
    ss_tot = float(np.sum((logx - logx.mean()) ** 2))
    # ss_tot may carry rounding noise for constant data
    r2 = 1.0 if ss_tot <= 1e-28 * max(1.0, float(np.sum(logx**2))) else 1.0 - ss_res / ss_tot
    k = -float(slope)
    if abs(k) < 1e-13:
        k = 0.0
    ratio = float(np.max(xw / (x0 * np.exp(-k * tw))))
    return DecayFit(C=ratio, k=k, r2=float(r2), window=(float(tw[0]), float(tw[-1])))


@dataclass(frozen=True)
class AprioriFit:
    C1: float
    C2: float
    C3: float
    C4: float
    slack: float


_C3_POWERS = (1.5, 2, 3, 4, 6)
_C4_POWERS = (2, 4, 6, 8)


def apriori_constants(traj_or_times, X_values=None, C1: float | None = None, C2: float | None = None) -> AprioriFit:
    """Constants making X(T) + C1 int X <= C2 X(0) + C3 int S3(X) + C4 S4(X(T)) hold at every sample.

    C1 defaults to the fitted decay rate. Without ``C2`` the smallest C2 with
    C3 = C4 = 0 is returned. With ``C2`` fixed (typically from the linearized
    run), a common weight C3 = C4 is scanned up to the smallest value covering
    the deficit. ``slack`` is the minimum of RHS - LHS over the samples.
    """
    if X_values is None:
        traj = traj_or_times
        times = np.asarray(traj.times, dtype=float)
        X = traj.series("X")
    else:
        times = np.asarray(traj_or_times, dtype=float)
        X = np.asarray(X_values, dtype=float)
    if len(times) == 0:
        raise ValueError("empty trajectory")
    if len(times) < 2:
        raise ValueError("need at least 2 samples")
    x0 = float(X[0])
    if np.all(X == 0):
        return AprioriFit(0.0, 0.0, 0.0, 0.0, math.inf)
    if C1 is None:
        try:
            C1 = max(fit_decay(times, X).k, 0.0)
        except ValueError:
            C1 = 0.0
    lhs = X + C1 * integrate.cumulative_trapezoid(X, times, initial=0.0)
    s3 = integrate.cumulative_trapezoid(sum(X**p for p in _C3_POWERS), times, initial=0.0)
    s4 = sum(X**p for p in _C4_POWERS)
    if C2 is None:
        C2 = float(np.max(lhs) / x0)
        c = 0.0
    else:
        C2 = float(C2)
        deficit = lhs - C2 * x0
        cover = s3 + s4
        uncovered = (deficit > 0) & (cover <= 0)
        if np.any(uncovered):
            C2 = max(C2, float(np.max(lhs[uncovered]) / x0))
            deficit = lhs - C2 * x0
        need = (deficit > 0) & (cover > 0)
        c = float(np.max(deficit[need] / cover[need])) if np.any(need) else 0.0
    rhs = C2 * x0 + c * (s3 + s4)
    return AprioriFit(float(C1), C2, c, c, float(np.min(rhs - lhs)))
