"""Sampled solution histories shared by the integrators and the diagnostics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import PlateState
from .spectral import Basis

HALT_REASONS = ("completed", "blowup", "hyperbolicity_loss", "solver_failure")


@dataclass(eq=False)
class Trajectory:
    """Samples of (z, z_t, theta); coefficient arrays have shape ``(n_samples, n_modes)``."""

    basis: Basis
    times: np.ndarray
    z: np.ndarray
    zt: np.ndarray
    theta: np.ndarray
    diagnostics: list = field(default_factory=list)
    halt_reason: str = "completed"
    message: str = ""
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.z, self.zt, self.theta = (np.atleast_2d(np.asarray(a, dtype=float)) for a in (self.z, self.zt, self.theta))
        n = len(self.times)
        for name in ("z", "zt", "theta"):
            arr = getattr(self, name)
            if arr.shape != (n, self.basis.size):
                raise ValueError(f"{name} has shape {arr.shape}, expected {(n, self.basis.size)}")
        if n > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("trajectory times must be strictly increasing")
        if self.halt_reason not in HALT_REASONS:
            raise ValueError(f"unknown halt reason {self.halt_reason!r}")

    @classmethod
    def from_states(cls, states, **kwargs) -> Trajectory:
        states = list(states)
        if not states:
            raise ValueError("need at least one state")
        return cls(
            states[0].basis,
            [s.t for s in states],
            [s.z.coeffs for s in states],
            [s.zt.coeffs for s in states],
            [s.theta.coeffs for s in states],
            **kwargs,
        )

    def __len__(self) -> int:
        return len(self.times)

    def state(self, i: int) -> PlateState:
        return PlateState.from_arrays(self.basis, self.times[i], self.z[i], self.zt[i], self.theta[i])

    @property
    def states(self) -> list[PlateState]:
        return [self.state(i) for i in range(len(self))]

    def series(self, name: str) -> np.ndarray:
        """One diagnostic field (e.g. ``"X"``) as an array aligned with ``times``."""
        return np.array([getattr(d, name) for d in self.diagnostics], dtype=float)
