"""YAML run configuration: parsing, validation with key paths, defaults and overrides."""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigError
from .linear_solvers import KatoConfig
from .model import DEALIAS, ModelParams, PlateState, StiffnessLaw, reduce_order
from .spectral import Basis, BoxDomain, SpectralField, build_basis
from .timestepper import SCHEMES, RunControl, SchemeSpec

SCENARIOS = (
    "small_data_decay",
    "energy_identity",
    "kato_vs_direct",
    "linear_analytic",
    "boost_check",
    "barrier_probe",
    "hyperbolicity_probe",
)
FIELD_KINDS = ("zero", "single_mode", "multi_mode", "gaussian", "random")

__all__ = ["SCENARIOS", "RunConfig", "FieldSpec", "parse_config", "load_config", "apply_overrides", "build_initial_state"]


@dataclass(frozen=True)
class FieldSpec:
    kind: str = "zero"
    index: tuple = (1,)
    amplitude: float = 0.0
    modes: tuple = ()  # ((index, amplitude), ...)
    center: tuple = ()
    width: float = 0.1


@dataclass(frozen=True)
class RunConfig:
    lengths: tuple
    modes: tuple
    params: ModelParams
    init_form: str
    displacement: FieldSpec
    velocity: FieldSpec
    temperature: FieldSpec
    scheme: SchemeSpec
    control: RunControl
    scenario: str = "small_data_decay"
    seed: int = 0
    output_dir: str = "platesim_out"
    plots: bool = True
    decay_trim: float = 0.05
    raw: dict = field(default_factory=dict, compare=False)

    @property
    def dim(self) -> int:
        return len(self.lengths)

    def basis(self, modes: int | tuple | None = None) -> Basis:
        m = self.modes if modes is None else tuple(np.broadcast_to(np.atleast_1d(modes), (self.dim,)))
        return build_basis(BoxDomain(self.lengths), m)

    def echo(self) -> dict:
        """The fully defaulted configuration as plain data."""
        return copy.deepcopy(self.raw)


DEFAULTS = {
    "domain": {"dim": 1, "lengths": None},
    "resolution": {"modes": 32, "dealias": DEALIAS},
    "params": {"alpha": 1.0, "beta": 1.0, "gamma": 1.0, "eta": 1.0, "sigma": 1.0, "omega": 1.0},
    "stiffness": {"kind": "cubic", "value": 1.0, "breakpoints": []},
    "init": {"form": "w", "displacement": {"kind": "zero"}, "velocity": {"kind": "zero"}, "temperature": {"kind": "zero"}},
    "scheme": {
        "kind": "etd2",
        "dt": 1e-3,
        "t_end": 1.0,
        "kato": {"window": 0.1, "tol_rho": 1e-10, "max_iter": 50, "damping": 1.0, "max_halvings": 4},
    },
    "control": {"blowup_norm_threshold": None, "blowup_factor": 1e6, "hyperbolicity_floor": 0.0, "sample_every": 1},
    "analysis": {"decay_trim": 0.05},
    "scenario": "small_data_decay",
    "seed": 0,
    "output": {"directory": "platesim_out", "plots": True},
}
_FIELD_KEYS = {"kind", "index", "amplitude", "modes", "center", "width"}


def _merge(defaults: dict, given: dict, path: str) -> dict:
    if not isinstance(given, dict):
        raise ConfigError(path or "<root>", f"expected a mapping, got {type(given).__name__}")
    out = copy.deepcopy(defaults)
    for key, value in given.items():
        where = f"{path}.{key}" if path else str(key)
        if key not in defaults:
            raise ConfigError(where, f"unknown key (allowed: {', '.join(sorted(defaults))})")
        if isinstance(defaults[key], dict) and key not in ("displacement", "velocity", "temperature"):
            out[key] = _merge(defaults[key], value, where)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _num(value, path, positive=False, nonneg=False, allow_none=False):
    if value is None and allow_none:
        return None
    if isinstance(value, str):
        # YAML 1.1 reads exponent literals without a dot (1e-3) as strings
        try:
            value = float(value)
        except ValueError:
            pass
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    v = float(value)
    if not np.isfinite(v):
        raise ConfigError(path, "must be finite")
    if positive and not v > 0:
        raise ConfigError(path, f"must be positive, got {v:g}")
    if nonneg and v < 0:
        raise ConfigError(path, f"must be nonnegative, got {v:g}")
    return v


def _int(value, path, minimum=None):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(path, f"expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(path, f"must be >= {minimum}, got {value}")
    return int(value)


def _per_axis(value, dim, path, conv):
    vals = value if isinstance(value, (list, tuple)) else [value] * dim
    if len(vals) != dim:
        raise ConfigError(path, f"expected {dim} entries, got {len(vals)}")
    return tuple(conv(v, f"{path}[{i}]") for i, v in enumerate(vals))


def _index(value, dim, path):
    idx = value if isinstance(value, (list, tuple)) else [value]
    if len(idx) != dim:
        raise ConfigError(path, f"mode index needs {dim} entries")
    return tuple(_int(v, f"{path}[{i}]", 1) for i, v in enumerate(idx))


def _field_spec(raw, dim, path) -> FieldSpec:
    if not isinstance(raw, dict):
        raise ConfigError(path, "expected a mapping")
    for key in raw:
        if key not in _FIELD_KEYS:
            raise ConfigError(f"{path}.{key}", f"unknown key (allowed: {', '.join(sorted(_FIELD_KEYS))})")
    kind = raw.get("kind", "zero")
    if kind not in FIELD_KINDS:
        raise ConfigError(f"{path}.kind", f"unknown field kind {kind!r} (valid: {', '.join(FIELD_KINDS)})")
    amp = _num(raw.get("amplitude", 0.0 if kind == "zero" else 1.0), f"{path}.amplitude")
    if kind == "single_mode":
        return FieldSpec(kind, index=_index(raw.get("index", [1] * dim), dim, f"{path}.index"), amplitude=amp)
    if kind == "multi_mode":
        entries = raw.get("modes")
        if not isinstance(entries, list) or not entries:
            raise ConfigError(f"{path}.modes", "expected a non-empty list of {index, amplitude}")
        modes = []
        for i, e in enumerate(entries):
            p = f"{path}.modes[{i}]"
            if not isinstance(e, dict) or set(e) - {"index", "amplitude"}:
                raise ConfigError(p, "each entry needs exactly the keys index and amplitude")
            modes.append((_index(e.get("index"), dim, f"{p}.index"), _num(e.get("amplitude"), f"{p}.amplitude")))
        return FieldSpec(kind, modes=tuple(modes))
    if kind == "gaussian":
        center = raw.get("center")
        if center is None:
            raise ConfigError(f"{path}.center", "required for gaussian data")
        return FieldSpec(
            kind,
            amplitude=amp,
            center=_per_axis(center, dim, f"{path}.center", _num),
            width=_num(raw.get("width", 0.1), f"{path}.width", positive=True),
        )
    if kind == "random":
        return FieldSpec(kind, amplitude=amp)
    return FieldSpec("zero")


def _stiffness(raw, path) -> StiffnessLaw:
    kind = raw["kind"]
    try:
        if kind == "cubic":
            return StiffnessLaw.cubic()
        if kind == "constant":
            return StiffnessLaw.constant(_num(raw["value"], f"{path}.value", positive=True))
        if kind == "tabulated":
            pts = raw["breakpoints"]
            if not isinstance(pts, list):
                raise ConfigError(f"{path}.breakpoints", "expected a list of [z, a] pairs")
            pairs = []
            for i, p in enumerate(pts):
                if not isinstance(p, (list, tuple)) or len(p) != 2:
                    raise ConfigError(f"{path}.breakpoints[{i}]", "expected a [z, a] pair")
                pairs.append((_num(p[0], f"{path}.breakpoints[{i}][0]"), _num(p[1], f"{path}.breakpoints[{i}][1]")))
            return StiffnessLaw("tabulated", breakpoints=tuple(pairs))
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from None
    raise ConfigError(f"{path}.kind", f"unknown stiffness kind {kind!r} (valid: cubic, constant, tabulated)")


def _normalize_init(raw):
    """Allow the shortcut ``init: {kind: single_mode, ...}`` for displacement-only data."""
    if isinstance(raw, dict) and "kind" in raw:
        raw = dict(raw)
        form = raw.pop("form", "w")
        return {"form": form, "displacement": raw}
    return raw


def parse_config(data: dict) -> RunConfig:
    """Validate a configuration mapping; errors name the offending key path."""
    if not isinstance(data, dict):
        raise ConfigError("<root>", "configuration must be a mapping")
    data = dict(data)
    if "init" in data:
        data["init"] = _normalize_init(data["init"])
    if "domain" not in data:
        raise ConfigError("domain", "required")
    merged = _merge(DEFAULTS, data, "")

    dom = merged["domain"]
    dim = _int(dom["dim"], "domain.dim")
    if dim not in (1, 2):
        raise ConfigError("domain.dim", f"must be 1 or 2, got {dim}")
    lengths = dom["lengths"] if dom["lengths"] is not None else [1.0] * dim
    lengths = _per_axis(lengths, dim, "domain.lengths", lambda v, p: _num(v, p, positive=True))

    res = merged["resolution"]
    modes = _per_axis(res["modes"], dim, "resolution.modes", lambda v, p: _int(v, p, 1))
    if res["dealias"] != DEALIAS:
        raise ConfigError("resolution.dealias", f"only the exact cubic dealiasing factor {DEALIAS} is supported")

    pr = merged["params"]
    vals = {}
    for name in ("alpha", "beta", "gamma", "eta", "sigma"):
        vals[name] = _num(pr[name], f"params.{name}", positive=True)
    vals["omega"] = _num(pr["omega"], "params.omega")
    params = ModelParams(**vals, stiffness=_stiffness(merged["stiffness"], "stiffness"))

    ini = merged["init"]
    if not isinstance(ini, dict):
        raise ConfigError("init", "expected a mapping")
    if ini["form"] not in ("w", "z"):
        raise ConfigError("init.form", f"must be 'w' or 'z', got {ini['form']!r}")
    specs = {k: _field_spec(ini[k], dim, f"init.{k}") for k in ("displacement", "velocity", "temperature")}

    sc = merged["scheme"]
    if sc["kind"] not in SCHEMES:
        raise ConfigError("scheme.kind", f"unknown scheme {sc['kind']!r} (valid: {', '.join(SCHEMES)})")
    dt = _num(sc["dt"], "scheme.dt", positive=True)
    t_end = _num(sc["t_end"], "scheme.t_end", positive=True)
    if t_end < dt:
        raise ConfigError("scheme.t_end", f"must be at least scheme.dt ({dt:g})")
    kr = sc["kato"]
    try:
        kato = KatoConfig(
            window=_num(kr["window"], "scheme.kato.window", positive=True),
            dt=dt,
            tol_rho=_num(kr["tol_rho"], "scheme.kato.tol_rho", positive=True),
            max_iter=_int(kr["max_iter"], "scheme.kato.max_iter", 1),
            damping=_num(kr["damping"], "scheme.kato.damping", positive=True),
            max_halvings=_int(kr["max_halvings"], "scheme.kato.max_halvings", 0),
        )
    except ValueError as exc:
        raise ConfigError("scheme.kato", str(exc)) from None
    scheme = SchemeSpec(sc["kind"], dt, t_end, kato)

    ct = merged["control"]
    control = RunControl(
        blowup_norm_threshold=_num(ct["blowup_norm_threshold"], "control.blowup_norm_threshold", positive=True, allow_none=True),
        blowup_factor=_num(ct["blowup_factor"], "control.blowup_factor", positive=True),
        hyperbolicity_floor=_num(ct["hyperbolicity_floor"], "control.hyperbolicity_floor"),
        sample_every=_int(ct["sample_every"], "control.sample_every", 1),
    )

    scenario = merged["scenario"]
    if scenario not in SCENARIOS:
        raise ConfigError("scenario", f"unknown scenario {scenario!r} (valid: {', '.join(SCENARIOS)})")
    trim = _num(merged["analysis"]["decay_trim"], "analysis.decay_trim", nonneg=True)
    if trim >= 0.5:
        raise ConfigError("analysis.decay_trim", "must be below 0.5")
    out = merged["output"]
    if not isinstance(out["plots"], bool):
        raise ConfigError("output.plots", "expected true or false")
    merged["domain"]["lengths"] = list(lengths)

    return RunConfig(
        lengths=lengths,
        modes=modes,
        params=params,
        init_form=ini["form"],
        displacement=specs["displacement"],
        velocity=specs["velocity"],
        temperature=specs["temperature"],
        scheme=scheme,
        control=control,
        scenario=scenario,
        seed=_int(merged["seed"], "seed"),
        output_dir=str(out["directory"]),
        plots=out["plots"],
        decay_trim=trim,
        raw=merged,
    )


def _set_path(data: dict, dotted: str, value):
    keys = dotted.split(".")
    node = data
    for k in keys[:-1]:
        node = node.setdefault(k, {})
        if not isinstance(node, dict):
            raise ConfigError(dotted, f"cannot descend into non-mapping at {k!r}")
    node[keys[-1]] = value


def apply_overrides(data: dict, overrides) -> dict:
    """Apply ``key.path=value`` strings; values are parsed as YAML scalars or lists."""
    data = copy.deepcopy(data)
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(item, "override must look like key.path=value")
        key, text = item.split("=", 1)
        _set_path(data, key.strip(), yaml.safe_load(text))
    return data


def load_config(path, overrides=None) -> RunConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(str(path), "configuration file not found")
    try:
        data = yaml.safe_load(p.read_text()) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(str(path), f"malformed YAML: {exc}") from None
    if isinstance(data, dict) and "init" in data:
        # expand the shortcut first so init.displacement.* overrides apply to it
        data["init"] = _normalize_init(data["init"])
    return parse_config(apply_overrides(data, overrides))


def _field(spec: FieldSpec, basis: Basis, rng: np.random.Generator) -> SpectralField:
    if spec.kind == "zero":
        return SpectralField.zeros(basis)
    if spec.kind == "single_mode":
        return SpectralField.mode(basis, spec.index, spec.amplitude)
    if spec.kind == "multi_mode":
        c = np.zeros(basis.size)
        for idx, amp in spec.modes:
            c[basis.mode_index(idx)] += amp
        return SpectralField(basis, c)
    if spec.kind == "gaussian":
        nodes = np.meshgrid(*basis.grid_nodes(DEALIAS), indexing="ij")
        r2 = sum((x - c) ** 2 for x, c in zip(nodes, spec.center))
        values = spec.amplitude * np.exp(-r2 / (2 * spec.width**2))
        return SpectralField(basis, basis.analyze(values, DEALIAS))
    # random: coefficients with a lambda^-2 envelope, scaled to the lowest mode
    lam = basis.eigenvalues
    c = rng.standard_normal(basis.size) * (lam.min() / lam) ** 2
    return SpectralField(basis, spec.amplitude * c)


def build_initial_state(cfg: RunConfig, basis: Basis | None = None) -> PlateState:
    """Initial phase point in z-form; w-form data are reduced with z = A w."""
    basis = basis or cfg.basis()
    rng = np.random.default_rng(cfg.seed)
    d = _field(cfg.displacement, basis, rng)
    v = _field(cfg.velocity, basis, rng)
    th = _field(cfg.temperature, basis, rng)
    if cfg.init_form == "w":
        d, v = reduce_order(d), reduce_order(v)
    return PlateState(0.0, d, v, th)
