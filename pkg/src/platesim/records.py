"""Run records and their on-disk form: a diagnostics CSV and a JSON metadata file."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from importlib import metadata
from pathlib import Path

import numpy as np

CSV_COLUMNS = ("t", "E1", "E1_beta", "E2", "E3", "X", "min_a", "boost_ratio", "identity_residual_cum")
EXIT_CODES = {"completed": 0, "blowup": 2, "hyperbolicity_loss": 2, "solver_failure": 1}

__all__ = ["CSV_COLUMNS", "EXIT_CODES", "RunRecord", "write_csv", "read_csv", "software_version", "to_jsonable"]


def software_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def write_csv(path, diagnostics) -> Path:
    """One row per EnergyReport, 17 significant digits, locale independent."""
    path = Path(path)
    lines = [",".join(CSV_COLUMNS)]
    for d in diagnostics:
        row = (d.t, d.E1, d.E1_beta, d.E2, d.E3, d.X, d.min_a, d.boost_ratio, d.identity_residual)
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")
    return path


def read_csv(path) -> dict[str, np.ndarray]:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"diagnostics CSV not found: {path}")
    lines = path.read_text().strip().splitlines()
    if not lines or tuple(lines[0].split(",")) != CSV_COLUMNS:
        raise ValueError(f"{path} does not have the expected header")
    rows = [[float(v) for v in line.split(",")] for line in lines[1:]]
    data = np.array(rows, dtype=float).reshape(len(rows), len(CSV_COLUMNS))
    return {name: data[:, i] for i, name in enumerate(CSV_COLUMNS)}


def to_jsonable(obj):
    """Convert dataclasses, numpy scalars/arrays and non-finite floats to strict JSON data."""
    if hasattr(obj, "__dataclass_fields__"):
        return to_jsonable(asdict(obj))
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


@dataclass
class RunRecord:
    scenario: str
    config: dict
    version: str
    started: str
    finished: str
    halt_reason: str
    message: str = ""
    decay_fit: dict | None = None
    barrier: dict | None = None
    results: dict = field(default_factory=dict)
    ladder: dict | None = None
    manifest: list = field(default_factory=list)
    output_dir: str = "."

    @property
    def exit_code(self) -> int:
        return EXIT_CODES[self.halt_reason]

    def csv_path(self) -> Path | None:
        for name in self.manifest:
            if name.endswith(".csv"):
                return Path(self.output_dir) / name
        return None

    def save(self, name: str = "record.json") -> Path:
        path = Path(self.output_dir) / name
        if name not in self.manifest:
            self.manifest.append(name)
        path.write_text(json.dumps(to_jsonable(asdict(self)), indent=2, sort_keys=True) + "\n")
        return path

    @classmethod
    def load(cls, path) -> RunRecord:
        path = Path(path)
        if not path.is_file():
            raise FileNotFoundError(f"record not found: {path}")
        data = json.loads(path.read_text())
        data["output_dir"] = str(path.parent)
        return cls(**data)
