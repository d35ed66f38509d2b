"""Configurations, maneuver transforms and nominal-scene checks.

A configuration is an ``(n, 3)`` array whose rows are agent states
``(p_x, p_y, phi)``. Yaw is an unwrapped real number.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import ArgumentError, ConsistencyError, SingularityError
from .graph import DepDecomposition, SensingGraph

AXES = ("x", "y", "phi")
RANK_RTOL = 1e-9
SPAN_RTOL = 1e-9


class Pose(NamedTuple):
    p_x: float
    p_y: float
    phi: float


@dataclass(frozen=True)
class ManeuverParams:
    """Scaling factors ``s = (s_x, s_y, s_phi)`` and translation ``tau``."""

    s: NDArray[np.float64]
    tau: NDArray[np.float64]

    def __init__(self, s: ArrayLike = (1.0, 1.0, 1.0), tau: ArrayLike = (0.0, 0.0, 0.0)) -> None:
        s = np.array(s, dtype=float).reshape(3)
        tau = np.array(tau, dtype=float).reshape(3)
        if not (np.all(np.isfinite(s)) and np.all(np.isfinite(tau))):
            raise ArgumentError("maneuver parameters must be finite")
        s.setflags(write=False)
        tau.setflags(write=False)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "tau", tau)

    @classmethod
    def identity(cls) -> "ManeuverParams":
        return cls()

    @classmethod
    def from_vector(cls, z: ArrayLike) -> "ManeuverParams":
        z = np.asarray(z, dtype=float).reshape(6)
        return cls(z[:3], z[3:])

    def as_vector(self) -> NDArray[np.float64]:
        return np.concatenate([self.s, self.tau])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ManeuverParams):
            return NotImplemented
        return bool(np.array_equal(self.s, other.s) and np.array_equal(self.tau, other.tau))

    def __hash__(self) -> int:
        return hash((tuple(self.s), tuple(self.tau)))


def frame_matrix(theta: float) -> NDArray[np.float64]:
    """``blockdiag(R(theta), 1)``: rotates the scaling frame into the world frame."""
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def as_configuration(g: ArrayLike) -> NDArray[np.float64]:
    """Coerce stacked ``3n`` vectors or ``(n, 3)`` arrays to ``(n, 3)``."""
    arr = np.asarray(g, dtype=float)
    if arr.ndim == 1:
        if arr.size % 3:
            raise ArgumentError(f"stacked state length {arr.size} is not a multiple of 3")
        arr = arr.reshape(-1, 3)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ArgumentError(f"configuration must have shape (n, 3), got {arr.shape}")
    return arr


def to_frame(g: ArrayLike, theta: float) -> NDArray[np.float64]:
    """Express states in the scaling frame: rows ``Theta^T g_i``."""
    return as_configuration(g) @ frame_matrix(theta)


def apply_maneuver(g_tilde: ArrayLike, params: ManeuverParams, theta: float) -> NDArray[np.float64]:
    """Per agent ``Theta diag(s) Theta^T g_i + tau``."""
    g = as_configuration(g_tilde)
    if not np.all(np.isfinite(g)) or not np.isfinite(theta):
        raise ArgumentError("configuration and scaling direction must be finite")
    frame = frame_matrix(theta)
    scale = frame @ np.diag(params.s) @ frame.T
    return g @ scale.T + params.tau


def affinely_spans(values: ArrayLike) -> bool:
    """Whether the scalar set affinely spans the real line (two distinct values).

    Distinctness uses the tolerance ``max - min > 1e-9 * (1 + max|v|)``.
    """
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise ArgumentError("affine span of an empty set is undefined")
    return bool(v.max() - v.min() > SPAN_RTOL * (1.0 + np.abs(v).max()))


def parameter_matrix(g_tilde: ArrayLike, theta: float) -> NDArray[np.float64]:
    """The ``3n x 6`` matrix mapping ``[s; tau]`` to the transformed configuration."""
    g = as_configuration(g_tilde)
    frame = frame_matrix(theta)
    g_theta = g @ frame
    blocks = [np.hstack([frame @ np.diag(row), np.eye(3)]) for row in g_theta]
    if not blocks:
        return np.zeros((0, 6))
    return np.vstack(blocks)


def numerical_rank(a: NDArray[np.float64], rtol: float = RANK_RTOL) -> int:
    if a.size == 0:
        return 0
    sv = np.linalg.svd(a, compute_uv=False)
    if sv[0] == 0.0:
        return 0
    return int(np.sum(sv > rtol * sv[0]))


@dataclass
class ConfigurationReport:
    A: NDArray[np.float64]
    rank: int
    singular_values: NDArray[np.float64]
    spans: dict[str, bool]

    @property
    def nonsingular(self) -> bool:
        return self.rank == 6

    @property
    def failing_axes(self) -> list[str]:
        return [ax for ax in AXES if not self.spans[ax]]

    def __str__(self) -> str:
        verdict = "non-singular" if self.nonsingular else "singular"
        spans = ", ".join(f"{ax}:{'ok' if ok else 'FAIL'}" for ax, ok in self.spans.items())
        return f"{verdict} (rank {self.rank}/6; spans {spans})"


def check_configuration(g_tilde: ArrayLike, theta: float) -> ConfigurationReport:
    """Rank of the parameter matrix and per-axis affine-span verdicts.

    The two characterisations of non-singularity are cross-checked; a
    disagreement raises ``ConsistencyError``.
    """
    g = as_configuration(g_tilde)
    A = parameter_matrix(g, theta)
    sv = np.linalg.svd(A, compute_uv=False) if A.size else np.zeros(0)
    rank = numerical_rank(A)
    g_theta = g @ frame_matrix(theta)
    if len(g):
        spans = {ax: affinely_spans(g_theta[:, q]) for q, ax in enumerate(AXES)}
    else:
        spans = {ax: False for ax in AXES}
    report = ConfigurationReport(A, rank, sv, spans)
    if (rank == 6) != all(spans.values()):
        raise ConsistencyError(
            f"rank {rank} disagrees with affine-span verdicts {spans}"
        )
    return report


@dataclass(frozen=True)
class NominalScene:
    """Sensing graph, nominal configuration, scaling direction and leaders."""

    graph: SensingGraph
    g_tilde: NDArray[np.float64]
    theta: float = 0.0
    leaders: tuple[int, ...] = (1, 2)

    def __post_init__(self) -> None:
        g = as_configuration(self.g_tilde).copy()
        g.setflags(write=False)
        object.__setattr__(self, "g_tilde", g)
        object.__setattr__(self, "leaders", tuple(int(v) for v in self.leaders))
        object.__setattr__(self, "theta", float(self.theta))
        if not np.isfinite(self.theta) or not np.all(np.isfinite(g)):
            raise ArgumentError("scene values must be finite")
        if len(g) != self.graph.n:
            raise ArgumentError(f"{len(g)} nominal states for {self.graph.n} agents")
        if self.leaders != tuple(range(1, self.m + 1)):
            raise ArgumentError(f"leaders must be labelled 1..m, got {self.leaders}")

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def m(self) -> int:
        return len(self.leaders)

    @property
    def followers(self) -> tuple[int, ...]:
        return tuple(range(self.m + 1, self.n + 1))

    @property
    def frame(self) -> NDArray[np.float64]:
        return frame_matrix(self.theta)

    @property
    def g_theta(self) -> NDArray[np.float64]:
        """Nominal states in the scaling frame."""
        return self.g_tilde @ self.frame

    def nominal(self, agent: int) -> Pose:
        return Pose(*self.g_tilde[agent - 1])

    def with_graph(self, graph: SensingGraph) -> "NominalScene":
        return NominalScene(graph, self.g_tilde, self.theta, self.leaders)

    def leader_states(self) -> NDArray[np.float64]:
        return self.g_tilde[: self.m]

    def follower_states(self) -> NDArray[np.float64]:
        return self.g_tilde[self.m :]


@dataclass
class Recovery:
    params: ManeuverParams
    residual: float


def recover_params(g_l: ArrayLike, scene: NominalScene) -> Recovery:
    """Least-squares maneuver parameters reproducing the leader states."""
    if scene.m < 2:
        raise ArgumentError(f"parameter recovery needs at least two leaders, got {scene.m}")
    gl = as_configuration(g_l)
    if len(gl) != scene.m:
        raise ArgumentError(f"expected {scene.m} leader states, got {len(gl)}")
    A = parameter_matrix(scene.leader_states(), scene.theta)
    if numerical_rank(A) < 6:
        raise SingularityError("leaders' nominal configuration is singular; parameters not identifiable")
    b = gl.ravel()
    z, *_ = np.linalg.lstsq(A, b, rcond=None)
    return Recovery(ManeuverParams.from_vector(z), float(np.linalg.norm(A @ z - b)))


@dataclass
class AssumptionReport:
    """Per-assumption verdicts with the offending items.

    ``a2_violations`` holds ``(dep_index, (u, v), axis)`` for edges and entry
    pairs; ``a3_violations`` holds ``(dep_index, entry_i, agent, axis)``;
    ``a4_violations`` holds ``(triple, axis)``.
    """

    a1: bool
    a1_failing_axes: list[str]
    a2_violations: list = field(default_factory=list)
    a3_violations: list = field(default_factory=list)
    a4_violations: list = field(default_factory=list)

    @property
    def a2(self) -> bool:
        return not self.a2_violations

    @property
    def a3(self) -> bool:
        return not self.a3_violations

    @property
    def a4(self) -> bool:
        return not self.a4_violations

    @property
    def all_hold(self) -> bool:
        return self.a1 and self.a2 and self.a3 and self.a4


def _zero_axes(diff: NDArray[np.float64], scale: float) -> list[str]:
    tol = SPAN_RTOL * (1.0 + scale)
    return [AXES[q] for q in range(3) if abs(diff[q]) <= tol]


def dep_edge_pairs(dep) -> list[tuple[int, int]]:
    """Bidirectional chain edges of a DEP followed by its entry pair."""
    pairs = list(zip(dep.inner, dep.inner[1:]))
    pairs.append((dep.entry_i, dep.entry_j))
    return pairs


def check_assumptions(
    scene: NominalScene, dec: DepDecomposition, triples: Sequence[tuple[int, int, int]] | None = None
) -> AssumptionReport:
    """Evaluate the four non-degeneracy assumptions on the nominal scene.

    ``triples`` defaults to the constraint set of the DEP-induced subgraph,
    which is what the moving-leader law uses.
    """
    if dec.n != scene.n or not dec.is_valid(scene.graph):
        raise ArgumentError("decomposition does not match the scene graph")
    from .laplacian import constraint_index_set

    gt = scene.g_theta
    scale = float(np.abs(gt).max()) if gt.size else 0.0
    cfg = check_configuration(scene.g_tilde, scene.theta)
    report = AssumptionReport(a1=cfg.nonsingular, a1_failing_axes=cfg.failing_axes)
    for h, dep in enumerate(dec.deps):
        for u, v in dep_edge_pairs(dep):
            for ax in _zero_axes(gt[u - 1] - gt[v - 1], scale):
                report.a2_violations.append((h, (u, v), ax))
        for l in dep.inner[1:]:
            for ax in _zero_axes(gt[dep.entry_i - 1] - gt[l - 1], scale):
                report.a3_violations.append((h, dep.entry_i, l, ax))
    if triples is None:
        triples = constraint_index_set(dec.induced_graph())
    for i, j, k in triples:
        for ax in _zero_axes(gt[j - 1] - gt[i - 1], scale):
            report.a4_violations.append(((i, j, k), ax))
    return report
