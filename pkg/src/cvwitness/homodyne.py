"""Generalized-quadrature homodyne settings for N modes.

A setting is a local-oscillator phase ``theta`` plus the angles of a cascade
of N - 1 polarization rotations (``rotations``) and phase shifts
(``phases``).  Mode ``l`` reaches the detector with amplitude ``A_l`` and
phase ``phases[l]`` (the last mode carries no phase), so the measured
quadrature variance is ``u^T gamma u`` with unit ``u`` in R^{2N}.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .symplectic import n_modes_of


@dataclass(frozen=True)
class MeasurementSetting:
    theta: float
    rotations: tuple[float, ...]
    phases: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "rotations", tuple(float(a) for a in self.rotations))
        object.__setattr__(self, "phases", tuple(float(a) for a in self.phases))
        if len(self.rotations) != len(self.phases):
            raise ValueError("need as many rotation angles as phases (N - 1 each)")

    @property
    def modes(self) -> int:
        return len(self.rotations) + 1

    @cached_property
    def u(self) -> np.ndarray:
        return build_measurement_vector(self.theta, self.rotations, self.phases, self.modes)

    @cached_property
    def P(self) -> np.ndarray:
        return np.outer(self.u, self.u)

    def to_dict(self) -> dict:
        return {"theta": self.theta, "rotations": list(self.rotations), "phases": list(self.phases)}

    @classmethod
    def from_dict(cls, data: dict) -> "MeasurementSetting":
        return cls(float(data["theta"]), tuple(data["rotations"]), tuple(data["phases"]))


def mode_amplitudes(rotations) -> np.ndarray:
    """Nested ``cos/sin`` amplitudes; their squares sum to one."""
    amps = np.empty(len(rotations) + 1)
    carry = 1.0
    for l, phi in enumerate(rotations):
        amps[l] = carry * np.cos(phi)
        carry *= np.sin(phi)
    amps[-1] = carry
    return amps


def build_measurement_vector(theta, rotations, phases, n_modes: int) -> np.ndarray:
    rotations = np.atleast_1d(np.asarray(rotations, dtype=float))
    phases = np.atleast_1d(np.asarray(phases, dtype=float))
    if n_modes < 1:
        raise ValueError("n_modes must be >= 1")
    if rotations.size != n_modes - 1 or phases.size != n_modes - 1:
        raise ValueError(
            f"{n_modes} modes need {n_modes - 1} rotations and phases, "
            f"got {rotations.size} and {phases.size}"
        )
    amps = mode_amplitudes(rotations)
    ph = np.append(phases, 0.0)
    u = np.empty(2 * n_modes)
    u[0::2] = amps * np.cos(theta - ph)
    u[1::2] = amps * np.sin(theta - ph)
    return u


def variance(gamma, setting: MeasurementSetting) -> float:
    """Exact quadrature variance ``Tr[P gamma] = u^T gamma u``."""
    gamma = np.asarray(gamma, dtype=float)
    if n_modes_of(gamma) != setting.modes:
        raise ValueError(f"setting is for {setting.modes} modes, gamma has {gamma.shape}")
    u = setting.u
    return float(u @ gamma @ u)


def sample_setting(n_modes: int, rng) -> MeasurementSetting:
    """Uniform angles: theta and rotations in [0, pi], phases in [0, 2 pi)."""
    theta = rng.uniform(0.0, np.pi)
    rotations = rng.uniform(0.0, np.pi, n_modes - 1)
    phases = rng.uniform(0.0, 2 * np.pi, n_modes - 1)
    return MeasurementSetting(theta, tuple(rotations), tuple(phases))


def tomographic_count(n_modes: int) -> int:
    """Independent second moments of an N-mode state."""
    return n_modes * (2 * n_modes + 1)


@dataclass(frozen=True)
class Surface:
    phi: np.ndarray
    varphi: np.ndarray
    values: np.ndarray  # values[i, j] at (phi[i], varphi[j])

    def below_one_fraction(self) -> float:
        return float(np.mean(self.values < 1.0))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("phi,varphi,variance\n")
        for i, a in enumerate(self.phi):
            for j, b in enumerate(self.varphi):
                buf.write(f"{a:.12g},{b:.12g},{self.values[i, j]:.12g}\n")
        return buf.getvalue()


def scan_surface(gamma, theta: float = 0.0, grid: int = 201,
                 lo: float = -np.pi, hi: float = np.pi) -> Surface:
    """Two-mode variance surface over the rotation angle and the phase."""
    gamma = np.asarray(gamma, dtype=float)
    if n_modes_of(gamma) != 2:
        raise ValueError("scan_surface needs a two-mode covariance matrix")
    phi = np.linspace(lo, hi, grid)
    varphi = np.linspace(lo, hi, grid)
    A, B = np.meshgrid(phi, varphi, indexing="ij")
    u = np.stack(
        [
            np.cos(A) * np.cos(theta - B),
            np.cos(A) * np.sin(theta - B),
            np.sin(A) * np.cos(theta),
            np.sin(A) * np.sin(theta),
        ],
        axis=-1,
    )
    values = np.einsum("...i,ij,...j->...", u, gamma, u)
    return Surface(phi, varphi, values)


def settings_to_json(settings) -> str:
    return json.dumps([s.to_dict() for s in settings])


def settings_from_json(text: str) -> list[MeasurementSetting]:
    return [MeasurementSetting.from_dict(d) for d in json.loads(text)]
