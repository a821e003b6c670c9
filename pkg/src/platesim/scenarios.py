"""Named experiments: each runs the simulator, analyzes the result and writes a record."""

from __future__ import annotations

import logging
from dataclasses import asdict, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
from scipy import linalg

from .config import RunConfig, build_initial_state
from .energy import (
    BarrierConfig,
    apriori_constants,
    barrier_roots,
    fit_decay,
    identity_residual,
    make_report,
    smallness_thresholds,
)
from .errors import PlatesimError
from .model import ModelParams, PlateState
from .records import RunRecord, software_version, write_csv
from .timestepper import SchemeSpec, linear_blocks, run
from .trajectory import Trajectory

log = logging.getLogger(__name__)

__all__ = ["run_scenario", "run_ladder"]


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _fit(traj: Trajectory, trim: float) -> dict | None:
    try:
        return asdict(fit_decay(traj.times, traj.series("X"), trim=trim))
    except ValueError as exc:
        log.info("no decay fit: %s", exc)
        return None


def _barrier(traj: Trajectory, params: ModelParams, control, scheme: SchemeSpec, trim: float) -> dict | None:
    """Fit C1 and C2 on the linearized twin run, then C3 = C4 on the actual run, and analyze the barrier."""
    x = traj.series("X")
    if len(traj) < 2 or x[0] <= 0:
        return None
    twin = run(traj.state(0), params.linearized(), replace(scheme, kind="etd2" if scheme.kind == "kato" else scheme.kind), control)
    try:
        c1 = fit_decay(twin.times, twin.series("X"), trim=trim).k
    except ValueError:
        return None
    if not c1 > 0:
        return None
    lin = apriori_constants(twin, C1=c1)
    fitted = apriori_constants(traj, C1=c1, C2=lin.C2)
    cfg = BarrierConfig(fitted.C1, fitted.C2, fitted.C3, fitted.C4)
    report = barrier_roots(cfg, float(x[0]))
    out = {"constants": asdict(fitted), "linear_C2": lin.C2, **asdict(report)}
    out["thresholds"] = smallness_thresholds(cfg)
    return out


def _write_main(record: RunRecord, traj: Trajectory, name: str = "trajectory.csv") -> None:
    write_csv(Path(record.output_dir) / name, traj.diagnostics)
    record.manifest.append(name)


def _max_rel_dev(a, b) -> float:
    a, b = np.asarray(a), np.asarray(b)
    n = min(len(a), len(b))
    scale = np.maximum(np.abs(b[:n]), np.finfo(float).tiny)
    return float(np.max(np.abs(a[:n] - b[:n]) / scale))


def _closed_form_X(traj: Trajectory, params: ModelParams) -> np.ndarray:
    basis = traj.basis
    mats = linear_blocks(params, basis.eigenvalues)
    u0 = np.stack([traj.z[0], traj.zt[0], traj.theta[0]])
    out = []
    for t in traj.times:
        u = np.einsum("mij,jm->im", linalg.expm(mats * (t - traj.times[0])), u0)
        out.append(make_report(basis, t, u[0], u[1], u[2], params).X)
    return np.array(out)


def _scaled_modes(cfg: RunConfig, factor: float) -> tuple:
    return tuple(max(1, int(round(m * factor))) for m in cfg.modes)


def run_scenario(cfg: RunConfig, out_dir=None, emit: bool | None = None) -> RunRecord:
    """Execute ``cfg.scenario``, write CSV/JSON (and SVG plots) into the output directory."""
    out = Path(out_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    record = RunRecord(cfg.scenario, cfg.echo(), software_version(), _now(), "", "completed", output_dir=str(out))
    params, scheme, control = cfg.params, cfg.scheme, cfg.control
    state = build_initial_state(cfg)
    name = cfg.scenario

    if name == "linear_analytic":
        params = params.linearized()
    main = run(state, params, scheme, control)
    record.halt_reason, record.message = main.halt_reason, main.message
    _write_main(record, main)
    x = main.series("X")
    res = record.results
    res["n_samples"] = len(main)
    res["t_final"] = float(main.times[-1])
    res["X0"] = float(x[0])
    res["X_final"] = float(x[-1])
    res["max_X_over_X0"] = float(np.max(x) / x[0]) if x[0] > 0 else 0.0

    if name in ("small_data_decay", "linear_analytic", "barrier_probe", "boost_check"):
        record.decay_fit = _fit(main, cfg.decay_trim)

    if name == "small_data_decay":
        record.barrier = _barrier(main, params, control, scheme, cfg.decay_trim)
    elif name == "barrier_probe":
        record.barrier = _barrier(main, params, control, scheme, cfg.decay_trim)
        if record.barrier is not None:
            res["admissible"] = record.barrier["admissible"]
    elif name == "energy_identity":
        half = run(state, params, replace(scheme, dt=scheme.dt / 2), control)
        r = [identity_residual(main, params), identity_residual(half, params)]
        res["identity_residual"] = r
        res["ratio"] = r[0] / r[1] if r[1] > 0 else float("inf")
        record.ladder = {"dt": [scheme.dt, scheme.dt / 2], "residual": r}
    elif name == "kato_vs_direct":
        other = replace(scheme, kind="etd2" if scheme.kind == "kato" else "kato")
        twin = run(state, params, other, control)
        kato, direct = (main, twin) if scheme.kind == "kato" else (twin, main)
        res["kato_halt_reason"] = kato.halt_reason
        res["iterations"] = kato.info.get("iterations", [])
        res["rho_history"] = kato.info.get("rho_history", [])
        res["contraction_ratios"] = [
            [h[i + 1] / h[i] for i in range(len(h) - 1) if h[i] > 0] for h in res["rho_history"]
        ]
        res["max_rel_dev_X"] = _max_rel_dev(kato.series("X"), direct.series("X"))
        _write_main(record, twin, f"trajectory_{other.kind}.csv")
    elif name == "linear_analytic":
        exact = _closed_form_X(main, params)
        res["max_rel_dev_X"] = _max_rel_dev(x, exact)
    elif name == "boost_check":
        sups = {}
        for factor in (0.5, 1.0, 2.0):
            modes = _scaled_modes(cfg, factor)
            if factor == 1.0:
                traj = main
            else:
                traj = run(build_initial_state(cfg, cfg.basis(modes)), params, scheme, control)
            sups["x".join(map(str, modes))] = float(np.max(traj.series("boost_ratio")))
        vals = np.array(list(sups.values()))
        res["sup_boost_ratio"] = sups
        res["boost_variation"] = float((vals.max() - vals.min()) / vals.min()) if vals.min() > 0 else 0.0
    elif name == "hyperbolicity_probe":
        a = main.series("min_a")
        res["min_a_final"] = float(a[-1])
        res["min_a_initial"] = float(a[0])
        res["halt_time"] = float(main.times[-1])

    if emit if emit is not None else cfg.plots:
        from .plots import emit_plots

        record.save()
        record.manifest.extend(p.name for p in emit_plots(record) if p.name not in record.manifest)
    record.finished = _now()
    record.save()
    return record


def run_ladder(cfg: RunConfig, halvings: int, out_dir=None, emit: bool | None = None) -> RunRecord:
    """dt-refinement study: identity residual and final X at dt, dt/2, ..., dt/2^halvings."""
    if halvings < 1:
        raise ValueError("halvings must be >= 1")
    out = Path(out_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    record = RunRecord(f"ladder:{cfg.scenario}", cfg.echo(), software_version(), _now(), "", "completed", output_dir=str(out))
    params = cfg.params.linearized() if cfg.scenario == "linear_analytic" else cfg.params
    state: PlateState = build_initial_state(cfg)
    dts, residuals, finals = [], [], []
    for k in range(halvings + 1):
        dt = cfg.scheme.dt / 2**k
        traj = run(state, params, replace(cfg.scheme, dt=dt), cfg.control)
        if traj.halt_reason != "completed":
            record.halt_reason, record.message = traj.halt_reason, traj.message
            break
        if k == 0:
            _write_main(record, traj)
        dts.append(dt)
        residuals.append(identity_residual(traj, params))
        finals.append(float(traj.series("X")[-1]))
    ratios = [residuals[i] / residuals[i + 1] if residuals[i + 1] > 0 else float("inf") for i in range(len(residuals) - 1)]
    record.ladder = {"dt": dts, "residual": residuals, "X_final": finals, "ratio": ratios}
    if emit if emit is not None else cfg.plots:
        from .plots import emit_plots

        record.save()
        record.manifest.extend(p.name for p in emit_plots(record) if p.name not in record.manifest)
    record.finished = _now()
    record.save()
    return record


def safe_run(cfg: RunConfig, out_dir=None) -> RunRecord:
    """run_scenario that converts solver exceptions into a solver_failure record."""
    try:
        return run_scenario(cfg, out_dir)
    except PlatesimError as exc:
        out = Path(out_dir or cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        rec = RunRecord(cfg.scenario, cfg.echo(), software_version(), _now(), _now(), "solver_failure", str(exc), output_dir=str(out))
        rec.save()
        return rec
