"""Single-integrator agents under the two distributed control laws.

Both laws are linear in the stacked state, so each is compiled once into
``g_dot = K g + B z(t) + C z_dot(t)`` with ``z = [s; tau]``. The per-agent
functions :func:`control_stationary` and :func:`control_moving` evaluate the
same laws from local relative measurements and are used to check the
compiled form.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict
from typing import Callable, Literal

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import ArgumentError, DivergenceError, SingularityError
from .formation import NominalScene, apply_maneuver, as_configuration, parameter_matrix
from .graph import DepDecomposition, decompose_deps
from .laplacian import (
    MatValLaplacian,
    Triple,
    _weights,
    assemble_laplacian,
    follower_triples,
    lift,
)
from .schedule import ManeuverSchedule
from .stabilizer import Stabilizer, synthesize_stabilizer

Mode = Literal["stationary", "moving"]


@dataclass
class SimConfig:
    dt: float = 1e-3
    t_end: float = 45.0
    k_l: float = 2.0
    k_f: float = 2.0
    mode: Mode = "moving"
    seed: int = 0
    init_box: tuple[float, float, float] = (5.0, 5.0, 1.5)
    initial: NDArray[np.float64] | None = field(default=None, repr=False)
    decay_rate: float | None = 1.0

    def __post_init__(self) -> None:
        if not self.dt > 0:
            raise ArgumentError(f"dt must be positive, got {self.dt}")
        if self.t_end < 0:
            raise ArgumentError(f"t_end must be non-negative, got {self.t_end}")
        if self.mode not in ("stationary", "moving"):
            raise ArgumentError(f"unknown mode {self.mode!r}")
        if self.mode == "moving" and not (self.k_l > 0 and self.k_f > 0):
            raise ArgumentError("moving-leader gains must be positive")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["init_box"] = list(self.init_box)
        d["initial"] = None if self.initial is None else np.asarray(self.initial).tolist()
        return d


def leader_reference(
    scene: NominalScene, schedule: ManeuverSchedule, t: float
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Leader targets ``g_l*`` and velocities at time ``t``."""
    sample = schedule.evaluate(t)
    A = parameter_matrix(scene.leader_states(), scene.theta)
    return (A @ sample.z).reshape(-1, 3), (A @ sample.z_dot).reshape(-1, 3)


def reference_state(scene: NominalScene, schedule: ManeuverSchedule, t: float) -> NDArray[np.float64]:
    return apply_maneuver(scene.g_tilde, schedule.evaluate(t).params, scene.theta)


def control_stationary(
    state: ArrayLike, scene: NominalScene, lap: MatValLaplacian, D: ArrayLike
) -> NDArray[np.float64]:
    """Stationary-leader law evaluated agent by agent.

    Each follower sums its constraint residuals ``W_jk g_ik + W_ki g_jk``
    over the triples it owns and applies ``-Theta D_k``.
    """
    g = as_configuration(state)
    D = np.asarray(D, dtype=float).ravel()
    m = lap.m
    out = np.zeros_like(g)
    frame = scene.frame
    for k in range(m + 1, scene.n + 1):
        acc = np.zeros(3)
        for i, j, kk in lap.triples:
            if kk != k:
                continue
            wp = _weights(scene, (i, j, k))
            acc += wp.W_jk @ (g[i - 1] - g[k - 1]) + wp.W_ki @ (g[j - 1] - g[k - 1])
        out[k - 1] = -frame @ (D[3 * (k - m - 1) : 3 * (k - m)] * acc)
    return out


def follower_velocity(
    scene: NominalScene, triple: Triple, state: NDArray[np.float64], velocities: NDArray[np.float64], k_f: float
) -> NDArray[np.float64]:
    """Moving-leader law for one follower given its two neighbors' velocities."""
    i, j, k = triple
    wp = _weights(scene, triple)
    g = state
    rhs = wp.W_jk @ (k_f * (g[i - 1] - g[k - 1]) + velocities[i - 1]) + wp.W_ki @ (
        k_f * (g[j - 1] - g[k - 1]) + velocities[j - 1]
    )
    return np.linalg.solve(wp.W_kk, rhs)


def _check_w_kk(scene: NominalScene, triples: dict[int, Triple]) -> None:
    for k, triple in sorted(triples.items()):
        w = _weights(scene, triple)
        sv = np.linalg.svd(w.W_kk, compute_uv=False)
        if sv[-1] <= 1e-9 * max(1.0, sv[0]):
            raise SingularityError(f"W_kk of follower {k} (triple {triple}) is singular")


def control_moving(
    state: ArrayLike,
    scene: NominalScene,
    dec: DepDecomposition,
    t: float,
    schedule: ManeuverSchedule,
    k_l: float,
    k_f: float,
) -> NDArray[np.float64]:
    """Moving-leader law evaluated agent by agent.

    Leaders track their reference with velocity feed-forward. Followers are
    processed DEP by DEP in construction order, so entry velocities are
    already known; the coupled equations of a DEP's inner agents are solved
    jointly.
    """
    g = as_configuration(state)
    m = scene.m
    triples = follower_triples(dec)
    _check_w_kk(scene, triples)
    vel = np.full_like(g, np.nan)
    g_ref, v_ref = leader_reference(scene, schedule, t)
    vel[:m] = -k_l * (g[:m] - g_ref) + v_ref
    for dep in dec.deps:
        pos = {v: p for p, v in enumerate(dep.inner)}
        size = 3 * dep.length
        lhs = np.zeros((size, size))
        rhs = np.zeros(size)
        for p, k in enumerate(dep.inner):
            i, j, _ = triples[k]
            wp = _weights(scene, (i, j, k))
            r = slice(3 * p, 3 * p + 3)
            lhs[r, r] += wp.W_kk
            rhs[r] += k_f * (wp.W_jk @ (g[i - 1] - g[k - 1]) + wp.W_ki @ (g[j - 1] - g[k - 1]))
            for nb, W in ((i, wp.W_jk), (j, wp.W_ki)):
                if nb in pos:
                    c = pos[nb]
                    lhs[r, 3 * c : 3 * c + 3] -= W
                else:
                    rhs[r] += W @ vel[nb - 1]
        sol = np.linalg.solve(lhs, rhs)
        for p, k in enumerate(dep.inner):
            vel[k - 1] = sol[3 * p : 3 * p + 3]
    return vel


@dataclass
class LinearLaw:
    """``g_dot = K g + B z + C z_dot`` on stacked ``3n`` states."""

    K: NDArray[np.float64]
    B: NDArray[np.float64]
    C: NDArray[np.float64]

    def __call__(self, g: NDArray[np.float64], z: NDArray[np.float64], z_dot: NDArray[np.float64]):
        return self.K @ g + self.B @ z + self.C @ z_dot


def stationary_law(scene: NominalScene, lap: MatValLaplacian, D: ArrayLike) -> LinearLaw:
    D = np.asarray(D, dtype=float).ravel()
    n, m = scene.n, scene.m
    nf = n - m
    K = np.zeros((3 * n, 3 * n))
    K[3 * m :] = -lift(scene.frame, nf) @ (D[:, None] * lap.M[3 * m :])
    return LinearLaw(K, np.zeros((3 * n, 6)), np.zeros((3 * n, 6)))


def moving_law(scene: NominalScene, lap: MatValLaplacian, k_l: float, k_f: float) -> LinearLaw:
    """Compiled moving-leader law; ``lap`` must carry one triple per follower."""
    n, m = scene.n, scene.m
    A_l = parameter_matrix(scene.leader_states(), scene.theta)
    Lg = np.zeros((3 * m, 3 * n))
    Lg[:, : 3 * m] = -k_l * np.eye(3 * m)
    Lz = k_l * A_l
    Lzd = A_l
    M = lap.M
    M_ff = M[3 * m :, 3 * m :]
    M_fl = M[3 * m :, : 3 * m]
    inv = np.linalg.inv(M_ff)
    K = np.vstack([Lg, -inv @ (k_f * M[3 * m :] + M_fl @ Lg)])
    B = np.vstack([Lz, -inv @ (M_fl @ Lz)])
    C = np.vstack([Lzd, -inv @ (M_fl @ Lzd)])
    return LinearLaw(K, B, C)


def rk4_step(f: Callable, t: float, y: NDArray[np.float64], dt: float) -> NDArray[np.float64]:
    """One classical fourth-order Runge-Kutta step of ``y' = f(t, y)``."""
    k1 = f(t, y)
    k2 = f(t + 0.5 * dt, y + 0.5 * dt * k1)
    k3 = f(t + 0.5 * dt, y + 0.5 * dt * k2)
    k4 = f(t + dt, y + dt * k3)
    return y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


@dataclass
class Trajectory:
    """Uniformly sampled states, references and tracking errors."""

    t: NDArray[np.float64]
    g: NDArray[np.float64]
    g_ref: NDArray[np.float64]
    m: int
    mode: str = "moving"

    @property
    def delta(self) -> NDArray[np.float64]:
        return self.g - self.g_ref

    @property
    def delta_l(self) -> NDArray[np.float64]:
        return self.delta[:, : self.m]

    @property
    def delta_f(self) -> NDArray[np.float64]:
        return self.delta[:, self.m :]

    @property
    def delta_l_norm(self) -> NDArray[np.float64]:
        with np.errstate(over="ignore"):
            return np.linalg.norm(self.delta_l.reshape(len(self.t), -1), axis=1)

    @property
    def delta_f_norm(self) -> NDArray[np.float64]:
        with np.errstate(over="ignore"):
            return np.linalg.norm(self.delta_f.reshape(len(self.t), -1), axis=1)

    def __len__(self) -> int:
        return len(self.t)


def initial_state(scene: NominalScene, config: SimConfig) -> NDArray[np.float64]:
    if config.initial is not None:
        g0 = as_configuration(config.initial).copy()
        if g0.shape != scene.g_tilde.shape:
            raise ArgumentError(f"initial state shape {g0.shape} does not match {scene.g_tilde.shape}")
        return g0
    rng = np.random.default_rng(config.seed)
    box = np.asarray(config.init_box, dtype=float)
    return scene.g_tilde + rng.uniform(-box, box, size=scene.g_tilde.shape)


def control_pipeline(
    scene: NominalScene, dec: DepDecomposition | None = None
) -> tuple[DepDecomposition, NominalScene, MatValLaplacian]:
    """Decomposition, DEP-induced control scene and its Laplacian."""
    if scene.m != 2:
        raise ArgumentError(f"the control laws use exactly two leaders, scene has {scene.m}")
    if dec is None:
        dec = decompose_deps(scene.graph, scene.leaders)
    control = scene.with_graph(dec.induced_graph())
    return dec, control, assemble_laplacian(control)


def run_simulation(
    scene: NominalScene,
    config: SimConfig,
    schedule: ManeuverSchedule,
    dec: DepDecomposition | None = None,
    stabilizer: Stabilizer | None = None,
) -> Trajectory:
    """Integrate the configured law with fixed-step RK4 from ``t = 0``.

    In stationary mode the target is the schedule frozen at ``t = 0`` and the
    leaders sit on it throughout.
    """
    dec, control, lap = control_pipeline(scene, dec)
    n, m = scene.n, scene.m
    steps = int(round(config.t_end / config.dt))
    times = np.arange(steps + 1) * config.dt
    A = parameter_matrix(scene.g_tilde, scene.theta)

    if config.mode == "stationary":
        if stabilizer is None:
            stabilizer = synthesize_stabilizer(control, dec, lap, rate=config.decay_rate)
        law = stationary_law(control, lap, stabilizer.D)
        z0, _ = schedule.z(0.0)
        half_z = np.broadcast_to(z0, (2 * steps + 1, 6))
        half_zd = np.zeros((2 * steps + 1, 6))
    else:
        _check_w_kk(control, follower_triples(dec))
        law = moving_law(control, lap, config.k_l, config.k_f)
        half_z, half_zd = schedule.z(np.arange(2 * steps + 1) * (0.5 * config.dt))

    # forcing term sampled on the half-step grid used by RK4 stages
    forcing = half_z @ law.B.T + half_zd @ law.C.T
    ref = (half_z[::2] @ A.T).reshape(-1, n, 3)

    g0 = initial_state(scene, config)
    if config.mode == "stationary":
        g0[:m] = ref[0, :m]
    y = g0.ravel().copy()
    out = np.empty((steps + 1, 3 * n))
    out[0] = y
    K = law.K
    dt = config.dt

    for s in range(steps):
        with np.errstate(over="ignore", invalid="ignore"):
            k1 = K @ y + forcing[2 * s]
            k2 = K @ (y + 0.5 * dt * k1) + forcing[2 * s + 1]
            k3 = K @ (y + 0.5 * dt * k2) + forcing[2 * s + 1]
            k4 = K @ (y + dt * k3) + forcing[2 * s + 2]
            y = y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(y)):
            partial = Trajectory(times[: s + 1], out[: s + 1].reshape(-1, n, 3), ref[: s + 1], m, config.mode)
            raise DivergenceError(f"state became non-finite at t={times[s + 1]:.6g}", times[s + 1], partial)
        out[s + 1] = y
    return Trajectory(times, out.reshape(-1, n, 3), ref, m, config.mode)


def fit_decay_rate(t: ArrayLike, err: ArrayLike, scale: float = 1.0, tail: float = 0.4) -> float | None:
    """Exponential decay rate: minus the least-squares slope of ``log err``.

    Samples at or below ``1e2 * eps * scale`` are discarded; the slope is
    fitted on the last ``tail`` fraction of the remaining samples.
    """
    t = np.asarray(t, dtype=float)
    err = np.asarray(err, dtype=float)
    floor = 1e2 * np.finfo(float).eps * max(1.0, scale)
    keep = np.flatnonzero(err > floor)
    if keep.size < 3:
        return None
    keep = keep[int(np.floor((1.0 - tail) * keep.size)) :]
    if keep.size < 3:
        return None
    slope, _ = np.polyfit(t[keep], np.log(err[keep]), 1)
    return float(-slope)


@dataclass
class ErrorReport:
    delta_l: NDArray[np.float64]
    delta_f: NDArray[np.float64]
    final_l: float
    final_f: float
    rate_l: float | None
    rate_f: float | None

    def summary(self) -> dict:
        return {
            "final_delta_l": self.final_l,
            "final_delta_f": self.final_f,
            "rate_l": self.rate_l,
            "rate_f": self.rate_f,
        }


def compute_errors(traj: Trajectory) -> ErrorReport:
    """Tracking-error norms, final values and fitted exponential rates."""
    if len(traj) == 0:
        raise ArgumentError("empty trajectory")
    dl, df = traj.delta_l_norm, traj.delta_f_norm
    scale = float(np.abs(traj.g_ref).max()) if traj.g_ref.size else 1.0
    return ErrorReport(
        dl, df, float(dl[-1]), float(df[-1]),
        fit_decay_rate(traj.t, dl, scale), fit_decay_rate(traj.t, df, scale),
    )
