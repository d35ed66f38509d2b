"""Maneuver keyframes interpolated by natural cubic splines."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.interpolate import CubicSpline

from .errors import ArgumentError
from .formation import ManeuverParams

# column order used by keyframe tables: t, s_x, tau_x, s_y, tau_y, s_phi, tau_phi
TABLE_COLUMNS = ("t", "s_x", "tau_x", "s_y", "tau_y", "s_phi", "tau_phi")


@dataclass(frozen=True)
class ManeuverKeyframe:
    t: float
    params: ManeuverParams

    @classmethod
    def from_row(cls, row: Sequence[float]) -> "ManeuverKeyframe":
        """Build from a ``(t, s_x, tau_x, s_y, tau_y, s_phi, tau_phi)`` row."""
        if len(row) != 7:
            raise ArgumentError(f"keyframe row needs 7 values, got {len(row)}")
        t, sx, tx, sy, ty, sp, tp = (float(v) for v in row)
        return cls(t, ManeuverParams((sx, sy, sp), (tx, ty, tp)))

    def to_row(self) -> list[float]:
        s, tau = self.params.s, self.params.tau
        return [self.t, s[0], tau[0], s[1], tau[1], s[2], tau[2]]


class ScheduleSample(NamedTuple):
    params: ManeuverParams
    s_dot: NDArray[np.float64]
    tau_dot: NDArray[np.float64]

    @property
    def z(self) -> NDArray[np.float64]:
        return self.params.as_vector()

    @property
    def z_dot(self) -> NDArray[np.float64]:
        return np.concatenate([self.s_dot, self.tau_dot])


class ManeuverSchedule:
    """Per-component natural cubic spline through the keyframes.

    Outside ``[t_first, t_last]`` the schedule holds the endpoint value with
    zero derivative.
    """

    def __init__(self, keyframes: Sequence[ManeuverKeyframe]) -> None:
        self.keyframes = tuple(keyframes)
        self.times = np.array([kf.t for kf in self.keyframes], dtype=float)
        self._values = np.array([kf.params.as_vector() for kf in self.keyframes])
        if len(self.keyframes) >= 2:
            self._spline = CubicSpline(self.times, self._values, axis=0, bc_type="natural")
            self._dspline = self._spline.derivative()
        else:
            self._spline = None

    @classmethod
    def constant(cls, params: ManeuverParams, t: float = 0.0) -> "ManeuverSchedule":
        return cls([ManeuverKeyframe(t, params)])

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.times[0]), float(self.times[-1])

    @property
    def is_constant(self) -> bool:
        return bool(np.all(self._values == self._values[0]))

    def z(self, t: ArrayLike) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        """Stacked ``[s, tau]`` and its time derivative; vectorised over ``t``."""
        t = np.asarray(t, dtype=float)
        shape = t.shape
        flat = t.ravel()
        if self._spline is None:
            val = np.broadcast_to(self._values[0], (flat.size, 6)).copy()
            der = np.zeros((flat.size, 6))
        else:
            lo, hi = self.domain
            clipped = np.clip(flat, lo, hi)
            val = self._spline(clipped)
            der = self._dspline(clipped)
            der[(flat < lo) | (flat > hi)] = 0.0
        return val.reshape(shape + (6,)), der.reshape(shape + (6,))

    def evaluate(self, t: float) -> ScheduleSample:
        val, der = self.z(float(t))
        return ScheduleSample(ManeuverParams(val[:3], val[3:]), der[:3].copy(), der[3:].copy())


def build_schedule(keyframes: Sequence[ManeuverKeyframe]) -> ManeuverSchedule:
    """Natural cubic spline schedule; times must be strictly increasing."""
    if len(keyframes) < 2:
        raise ArgumentError("a schedule needs at least two keyframes")
    times = np.array([kf.t for kf in keyframes], dtype=float)
    if not np.all(np.isfinite(times)) or np.any(np.diff(times) <= 0):
        raise ArgumentError(f"keyframe times must be finite and strictly increasing, got {times.tolist()}")
    return ManeuverSchedule(keyframes)
