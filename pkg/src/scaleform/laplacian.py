"""Matrix-valued constraints and the matrix-valued Laplacian.

For a triple ``(i, j, k)`` with ``i < j`` both measured by ``k`` the
constraint is ``W_jk g_ik + W_ki g_jk = 0`` where ``W_ab = diag(w_ab) Theta^T``
and ``w_ab`` is the nominal difference ``a - b`` expressed in the scaling frame.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import ArgumentError, ConsistencyError, ManeuverabilityError
from .formation import AXES, NominalScene, as_configuration, numerical_rank
from .graph import DepDecomposition, SensingGraph

Triple = tuple[int, int, int]
ZERO_MINOR_RTOL = 1e-9


def constraint_index_set(graph: SensingGraph) -> list[Triple]:
    """All ``(i, j, k)`` with ``(i, k), (j, k)`` edges and ``i < j``, sorted by ``k``."""
    out = []
    for k in graph.vertices:
        nbrs = sorted(graph.in_neighbors(k))
        for a, i in enumerate(nbrs):
            for j in nbrs[a + 1 :]:
                out.append((i, j, k))
    return out


def follower_triples(dec: DepDecomposition) -> dict[int, Triple]:
    """The single constraint each inner agent gets from its position in its DEP."""
    out = {}
    for dep in dec.deps:
        for pos, k in enumerate(dep.inner):
            a, b = sorted(dep.neighbors_of(pos))
            out[k] = (a, b, k)
    return out


@dataclass(frozen=True)
class WeightPair:
    """Weights of one constraint; ``w_*`` are the diagonals of the ``w`` factors."""

    w_jk: NDArray[np.float64]
    w_ki: NDArray[np.float64]
    W_jk: NDArray[np.float64]
    W_ki: NDArray[np.float64]

    @property
    def W_kk(self) -> NDArray[np.float64]:
        return self.W_jk + self.W_ki


def _weights(scene: NominalScene, triple: Triple) -> WeightPair:
    i, j, k = triple
    gt = scene.g_theta
    w_jk = gt[j - 1] - gt[k - 1]
    w_ki = gt[k - 1] - gt[i - 1]
    frame_t = scene.frame.T
    return WeightPair(w_jk, w_ki, np.diag(w_jk) @ frame_t, np.diag(w_ki) @ frame_t)


def constraint_weights(scene: NominalScene, triple: Triple) -> WeightPair:
    """Weights ``(W_jk, W_ki)`` of the constraint indexed by ``triple``.

    The nominal residual ``W_jk g~_ik + W_ki g~_jk`` is checked to vanish.
    """
    i, j, k = (int(v) for v in triple)
    g = scene.graph
    if not (i < j and all(1 <= v <= g.n for v in (i, j, k))
            and (i, k) in g.edges and (j, k) in g.edges):
        raise ArgumentError(f"{(i, j, k)} is not in the constraint index set")
    wp = _weights(scene, (i, j, k))
    gt = scene.g_tilde
    residual = wp.W_jk @ (gt[i - 1] - gt[k - 1]) + wp.W_ki @ (gt[j - 1] - gt[k - 1])
    scale = max(1.0, float(np.abs(gt).max()) ** 2)
    if np.abs(residual).max() > 1e-12 * scale:
        raise ConsistencyError(f"nominal residual {residual} for constraint {(i, j, k)}")
    return wp


def lift(block: NDArray[np.float64], count: int) -> NDArray[np.float64]:
    """``blockdiag(block, ..., block)`` with ``count`` copies."""
    return np.kron(np.eye(count), block)


@dataclass(frozen=True)
class MatValLaplacian:
    """``M = M_hat blockdiag(Theta^T)`` with its leader/follower partition."""

    M: NDArray[np.float64]
    M_hat: NDArray[np.float64]
    m: int
    theta: float
    triples: tuple[Triple, ...]

    @property
    def n(self) -> int:
        return self.M.shape[0] // 3

    def block(self, k: int, i: int) -> NDArray[np.float64]:
        return self.M[3 * (k - 1) : 3 * k, 3 * (i - 1) : 3 * i]

    @property
    def ll(self) -> NDArray[np.float64]:
        return self.M_hat[: 3 * self.m, : 3 * self.m]

    @property
    def lf(self) -> NDArray[np.float64]:
        return self.M_hat[: 3 * self.m, 3 * self.m :]

    @property
    def fl(self) -> NDArray[np.float64]:
        return self.M_hat[3 * self.m :, : 3 * self.m]

    @property
    def ff(self) -> NDArray[np.float64]:
        return self.M_hat[3 * self.m :, 3 * self.m :]

    @property
    def rank(self) -> int:
        return numerical_rank(self.M)

    def dump_csv(self, directory: str | Path) -> list[Path]:
        """Write ``M``, ``M_hat`` and the four partition blocks as CSV files."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        written = []
        for name, mat in [("M", self.M), ("M_hat", self.M_hat), ("M_hat_ll", self.ll),
                          ("M_hat_lf", self.lf), ("M_hat_fl", self.fl), ("M_hat_ff", self.ff)]:
            path = directory / f"{name}.csv"
            with open(path, "w", newline="") as fh:
                writer = csv.writer(fh)
                for row in mat:
                    writer.writerow([f"{v:.12g}" for v in row])
            written.append(path)
        return written


def assemble_laplacian(scene: NominalScene) -> MatValLaplacian:
    """Aggregate every constraint of ``scene.graph`` into ``M`` and ``M_hat``."""
    n = scene.n
    triples = constraint_index_set(scene.graph)
    m_hat = np.zeros((3 * n, 3 * n))

    def add(k: int, i: int, diag: NDArray[np.float64]) -> None:
        r, c = 3 * (k - 1), 3 * (i - 1)
        m_hat[r : r + 3, c : c + 3] += np.diag(diag)

    for i, j, k in triples:
        wp = _weights(scene, (i, j, k))
        add(k, i, wp.w_jk)
        add(k, j, wp.w_ki)
        add(k, k, -(wp.w_jk + wp.w_ki))
    M = m_hat @ lift(scene.frame.T, n)
    lap = MatValLaplacian(M, m_hat, scene.m, scene.theta, tuple(triples))

    scale = max(1.0, float(np.abs(M).max()) if M.size else 0.0)
    if n:
        row_sums = M.reshape(n, 3, n, 3).sum(axis=2)
        if np.abs(row_sums).max() > 1e-12 * scale:
            raise ConsistencyError("block row sums of M do not vanish")
        g_scale = max(1.0, float(np.abs(scene.g_tilde).max()))
        if np.abs(M @ scene.g_tilde.ravel()).max() > 1e-12 * scale * g_scale * n:
            raise ConsistencyError("nominal configuration is not in the null space of M")
    return lap


@dataclass(frozen=True)
class AxisDecomposition:
    """Per-axis split ``Q M_hat_ff P_ff = blockdiag(M_ff^x, M_ff^y, M_ff^phi)``.

    Followers are ordered by DEP construction order; ``row_order`` and
    ``col_order`` index rows/columns of ``M_hat_ff`` so that
    ``M_hat_ff[np.ix_(row_order, col_order)]`` is the block-diagonal form.
    """

    ff: dict[str, NDArray[np.float64]]
    fl: dict[str, NDArray[np.float64]]
    follower_order: tuple[int, ...]
    row_order: NDArray[np.intp]
    col_order: NDArray[np.intp]
    dep_slices: tuple[slice, ...]

    @property
    def Q(self) -> NDArray[np.float64]:
        q = np.zeros((len(self.row_order),) * 2)
        q[np.arange(len(self.row_order)), self.row_order] = 1.0
        return q

    @property
    def P(self) -> NDArray[np.float64]:
        p = np.zeros((len(self.col_order),) * 2)
        p[self.col_order, np.arange(len(self.col_order))] = 1.0
        return p

    def blockdiag(self) -> NDArray[np.float64]:
        nf = len(self.follower_order)
        out = np.zeros((3 * nf, 3 * nf))
        for q, ax in enumerate(AXES):
            out[q * nf : (q + 1) * nf, q * nf : (q + 1) * nf] = self.ff[ax]
        return out

    def reassemble(self) -> NDArray[np.float64]:
        return self.Q.T @ self.blockdiag() @ self.P.T

    def dep_block(self, h: int, axis: str) -> NDArray[np.float64]:
        sl = self.dep_slices[h]
        return self.ff[axis][sl, sl]


def axis_decompose(lap: MatValLaplacian, dec: DepDecomposition) -> AxisDecomposition:
    """Split the follower block into independent x, y and yaw matrices."""
    m, n = lap.m, lap.n
    order = tuple(v for v in dec.follower_order() if v > m)
    if sorted(order) != list(range(m + 1, n + 1)):
        raise ArgumentError("decomposition does not cover the followers of this Laplacian")
    nf = len(order)
    rows = np.array([3 * (v - m - 1) + q for q in range(3) for v in order], dtype=np.intp)
    cols = rows.copy()
    lead_cols = np.array([3 * (v - 1) + q for q in range(3) for v in range(1, m + 1)], dtype=np.intp)
    permuted = lap.ff[np.ix_(rows, cols)]
    permuted_fl = lap.fl[np.ix_(rows, lead_cols)]
    ff = {ax: permuted[q * nf : (q + 1) * nf, q * nf : (q + 1) * nf].copy() for q, ax in enumerate(AXES)}
    fl = {ax: permuted_fl[q * nf : (q + 1) * nf, q * m : (q + 1) * m].copy() for q, ax in enumerate(AXES)}

    slices, start = [], 0
    for dep in dec.deps:
        length = sum(1 for v in dep.inner if v > m)
        slices.append(slice(start, start + length))
        start += length
    result = AxisDecomposition(ff, fl, order, rows, cols, tuple(slices))
    if not np.array_equal(result.reassemble(), lap.ff):
        raise ConsistencyError("per-axis blocks do not reassemble to M_hat_ff")
    return result


def is_tridiagonal(t: NDArray[np.float64]) -> bool:
    t = np.asarray(t)
    if t.ndim != 2 or t.shape[0] != t.shape[1]:
        return False
    return not np.any(np.triu(t, 2)) and not np.any(np.tril(t, -2))


def tridiag_minors(t: ArrayLike) -> NDArray[np.float64]:
    """Leading principal minors ``f_1..f_d`` by the three-term recurrence.

    ``f_i = t_ii f_{i-1} - t_{i,i-1} t_{i-1,i} f_{i-2}`` with ``f_0 = 1``.
    """
    t = np.asarray(t, dtype=float)
    if t.ndim != 2 or t.shape[0] != t.shape[1]:
        raise ArgumentError(f"expected a square matrix, got shape {t.shape}")
    if not is_tridiagonal(t):
        raise ArgumentError("matrix is not tridiagonal")
    d = t.shape[0]
    f = np.empty(d)
    prev2, prev = 0.0, 1.0
    for i in range(d):
        cur = t[i, i] * prev
        if i:
            cur -= t[i, i - 1] * t[i - 1, i] * prev2
        f[i] = cur
        prev2, prev = prev, cur
    return f


def leading_minors(a: ArrayLike) -> NDArray[np.float64]:
    """Leading principal minors of any square matrix."""
    a = np.asarray(a, dtype=float)
    if is_tridiagonal(a):
        return tridiag_minors(a)
    return np.array([np.linalg.det(a[:k, :k]) for k in range(1, a.shape[0] + 1)])


def minor_scales(a: NDArray[np.float64]) -> NDArray[np.float64]:
    """Hadamard bounds of the leading minors, used to judge a minor as zero."""
    a = np.asarray(a, dtype=float)
    out = np.empty(a.shape[0])
    for k in range(1, a.shape[0] + 1):
        out[k - 1] = np.prod(np.linalg.norm(a[:k, :k], axis=1))
    return out


def first_zero_minor(a: NDArray[np.float64]) -> int | None:
    """Order of the first vanishing leading minor, or ``None``."""
    f = leading_minors(a)
    scale = minor_scales(a)
    for k, (fk, sk) in enumerate(zip(f, scale), start=1):
        if abs(fk) <= ZERO_MINOR_RTOL * sk or sk == 0.0:
            return k
    return None


def diagnose_follower_block(lap: MatValLaplacian, dec: DepDecomposition) -> list[tuple[int, str, int]]:
    """``(dep, axis, order)`` of the first zero leading minor per dep/axis block."""
    axd = axis_decompose(lap, dec)
    out = []
    for h in range(len(dec.deps)):
        for ax in AXES:
            block = axd.dep_block(h, ax)
            if block.size == 0:
                continue
            k = first_zero_minor(block)
            if k is not None:
                out.append((h, ax, k))
    return out


def follower_targets(
    lap: MatValLaplacian,
    scene: NominalScene,
    g_l_star: ArrayLike,
    dec: DepDecomposition | None = None,
) -> NDArray[np.float64]:
    """Follower states uniquely fixed by the leader states through ``M g = 0``."""
    gl = as_configuration(g_l_star)
    if len(gl) != lap.m:
        raise ArgumentError(f"expected {lap.m} leader states, got {len(gl)}")
    ff = lap.ff
    nf = lap.n - lap.m
    if numerical_rank(ff) < 3 * nf:
        diagnostics = diagnose_follower_block(lap, dec) if dec is not None else []
        detail = "; ".join(f"dep {h} axis {ax} minor {k}" for h, ax, k in diagnostics)
        raise ManeuverabilityError(
            "follower block M_hat_ff is singular" + (f" ({detail})" if detail else ""),
            diagnostics,
        )
    frame = scene.frame
    rhs = lap.fl @ lift(frame.T, lap.m) @ gl.ravel()
    gf = -lift(frame, nf) @ np.linalg.solve(ff, rhs)
    return gf.reshape(-1, 3)


def dep_follower_indices(dec: DepDecomposition, m: int) -> list[NDArray[np.intp]]:
    """Indices into stacked follower vectors (``3(n-m)``) for each dep's agents."""
    out = []
    for dep in dec.deps:
        idx = [3 * (v - m - 1) + q for v in dep.inner if v > m for q in range(3)]
        out.append(np.array(idx, dtype=np.intp))
    return out
