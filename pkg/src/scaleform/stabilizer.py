"""Diagonal stabilizing matrices for the follower block, synthesised per DEP.

Because the follower block of a DEP-induced graph is block lower triangular
in DEP order, ``D M_hat_ff`` is stable as soon as every per-DEP diagonal
block ``D^h M_hat_ff^h`` is. Each such block further splits into three
tridiagonal per-axis matrices.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.optimize import linear_sum_assignment

from .errors import ArgumentError, SynthesisError, UnsupportedLengthError
from .formation import AXES, NominalScene, check_assumptions
from .graph import Dep, DepDecomposition
from .laplacian import MatValLaplacian, follower_triples, lift, tridiag_minors, ZERO_MINOR_RTOL, minor_scales

POSITIVITY_RTOL = 1e-8
GROWTH = 2.0
MAX_DOUBLINGS = 60

Method = Literal["auto", "closed_form", "search"]


def dep_follower_block(scene: NominalScene, dec: DepDecomposition, h: int) -> NDArray[np.float64]:
    """``M_hat_ff^h``: rows and columns of dep ``h``'s inner agents, agent-major.

    Built from the single constraint each inner agent carries in the
    DEP-induced graph.
    """
    dep = _dep(dec, h)
    triples = follower_triples(dec)
    pos = {v: p for p, v in enumerate(dep.inner)}
    gt = scene.g_theta
    block = np.zeros((3 * dep.length, 3 * dep.length))
    for p, k in enumerate(dep.inner):
        a, b, _ = triples[k]
        w_bk = gt[b - 1] - gt[k - 1]
        w_ka = gt[k - 1] - gt[a - 1]
        for col, w in ((a, w_bk), (b, w_ka), (k, -(w_bk + w_ka))):
            if col in pos:
                c = pos[col]
                block[3 * p : 3 * p + 3, 3 * c : 3 * c + 3] += np.diag(w)
    return block


def axis_block(block: NDArray[np.float64], q: int) -> NDArray[np.float64]:
    """Per-axis (tridiagonal) slice of an agent-major ``3l x 3l`` block."""
    return block[q::3, q::3]


def _dep(dec: DepDecomposition, h: int) -> Dep:
    if not 0 <= h < len(dec.deps):
        raise ArgumentError(f"dep index {h} out of range 0..{len(dec.deps) - 1}")
    return dec.deps[h]


def _min_real(a: NDArray[np.float64]) -> float:
    if a.size == 0:
        return np.inf
    return float(np.linalg.eigvals(a).real.min())


def _is_stable(a: NDArray[np.float64]) -> bool:
    norm = float(np.abs(a).sum(axis=1).max()) if a.size else 0.0
    return _min_real(a) > POSITIVITY_RTOL * norm


def _check_factors(scene: NominalScene, dec: DepDecomposition, h: int) -> None:
    report = check_assumptions(scene, dec)
    a2 = [v for v in report.a2_violations if v[0] == h]
    a3 = [v for v in report.a3_violations if v[0] == h]
    if a2:
        _, (u, v), ax = a2[0]
        raise SynthesisError(f"dep {h}: pair ({u}, {v}) has zero {ax} difference (non-degeneracy fails)")
    if a3:
        _, i, l, ax = a3[0]
        raise SynthesisError(f"dep {h}: inner agent {l} has zero {ax} difference to entry {i}")


def _verify_block(d: NDArray[np.float64], block: NDArray[np.float64], h: int) -> None:
    prod = d[:, None] * block
    if not _is_stable(prod):
        raise SynthesisError(
            f"dep {h}: D^h M_hat_ff^h is not stable", spectral_abscissa=-_min_real(prod)
        )


def stabilize_dep_closed_form(scene: NominalScene, dec: DepDecomposition, h: int) -> NDArray[np.float64]:
    """Closed-form diagonal of ``D^h`` for a dep with one or two inner agents.

    Returned agent-major (``3l`` entries, dep inner order).
    """
    dep = _dep(dec, h)
    if dep.length > 2:
        raise UnsupportedLengthError(f"dep {h} has {dep.length} inner agents; closed form needs 1 or 2")
    _check_factors(scene, dec, h)
    gt = scene.g_theta
    block = dep_follower_block(scene, dec, h)
    triples = follower_triples(dec)

    def diff(a: int, b: int) -> NDArray[np.float64]:
        return gt[a - 1] - gt[b - 1]

    if dep.length == 1:
        a, b, _ = triples[dep.inner[0]]
        d = diff(a, b)
    else:
        i, j = dep.entry_i, dep.entry_j
        k, l = dep.inner
        il, kl, ij, kj = diff(i, l), diff(k, l), diff(i, j), diff(k, j)
        d_k = np.sign(il) * np.abs(kl * ij * kj) + il
        d_l = kl * ij * il
        # rows whose stored triple is ordered opposite to (i, l, k) / (k, j, l) are negated
        sign_k = 1.0 if triples[k][0] == i else -1.0
        sign_l = 1.0 if triples[l][0] == k else -1.0
        d = np.concatenate([sign_k * d_k, sign_l * d_l])
    _verify_block(d, block, h)
    return d


def stabilize_axis_search(t: NDArray[np.float64], max_doublings: int = MAX_DOUBLINGS) -> NDArray[np.float64]:
    """Diagonal ``d`` with ``diag(d) t`` stable, for tridiagonal ``t``.

    Signs make every leading minor of ``diag(d) t`` positive; then each new
    entry is appended with unit magnitude while the earlier entries are
    doubled until the leading block is stable.
    """
    t = np.asarray(t, dtype=float)
    f = tridiag_minors(t)
    scale = minor_scales(t)
    zero = np.abs(f) <= ZERO_MINOR_RTOL * scale
    if np.any(zero) or np.any(scale == 0.0):
        k = int(np.argmax(zero | (scale == 0.0))) + 1
        raise SynthesisError(f"leading minor of order {k} vanishes; no diagonal stabilizer by this route")
    signs = np.sign(f) * np.sign(np.concatenate([[1.0], f[:-1]]))
    d = np.empty(len(t))
    for k in range(len(t)):
        d[k] = signs[k]
        lead = t[: k + 1, : k + 1]
        for _ in range(max_doublings + 1):
            if _is_stable(d[: k + 1, None] * lead):
                break
            d[:k] *= GROWTH
        else:
            prod = d[: k + 1, None] * lead
            raise SynthesisError(
                f"no stabilizer after {max_doublings} doublings at order {k + 1}",
                spectral_abscissa=-_min_real(prod),
            )
    return d


def stabilize_dep_search(
    scene: NominalScene, dec: DepDecomposition, h: int, max_doublings: int = MAX_DOUBLINGS
) -> NDArray[np.float64]:
    """Search-based diagonal of ``D^h`` for a dep of any length (agent-major)."""
    dep = _dep(dec, h)
    block = dep_follower_block(scene, dec, h)
    d = np.empty(3 * dep.length)
    for q, ax in enumerate(AXES):
        try:
            d[q::3] = stabilize_axis_search(axis_block(block, q), max_doublings)
        except SynthesisError as exc:
            raise SynthesisError(f"dep {h} axis {ax}: {exc}", exc.spectral_abscissa) from exc
    _verify_block(d, block, h)
    return d


def normalize_dep(d: NDArray[np.float64], block: NDArray[np.float64], rate: float) -> NDArray[np.float64]:
    """Rescale each axis of a stabilizing diagonal so its slowest mode decays at ``rate``."""
    out = d.copy()
    for q in range(3):
        t = axis_block(block, q)
        if t.size == 0:
            continue
        slowest = _min_real(d[q::3, None] * t)
        out[q::3] *= rate / slowest
    return out


@dataclass
class Stabilizer:
    """Per-dep diagonal blocks and the assembled follower-ordered diagonal ``D``."""

    blocks: list[NDArray[np.float64]]
    methods: list[str]
    D: NDArray[np.float64]
    min_real_part: float
    eigenvalues: NDArray[np.complex128] = field(repr=False, default=None)

    @property
    def spectral_abscissa(self) -> float:
        """Largest real part of ``-D M_hat_ff`` (negative when stable)."""
        return -self.min_real_part

    def per_agent(self, m: int) -> dict[int, NDArray[np.float64]]:
        return {m + 1 + a: self.D[3 * a : 3 * a + 3] for a in range(len(self.D) // 3)}


def synthesize_stabilizer(
    scene: NominalScene,
    dec: DepDecomposition,
    lap: MatValLaplacian | None = None,
    method: Method = "auto",
    rate: float | None = 1.0,
    max_doublings: int = MAX_DOUBLINGS,
) -> Stabilizer:
    """Stabilize every dep independently and assemble ``D``.

    ``auto`` uses the closed form for deps with at most two inner agents and
    the search otherwise. With ``rate`` set, each dep/axis block is rescaled
    by a positive factor so its slowest eigenvalue equals ``rate``.
    """
    m = scene.m
    nf = scene.n - m
    D = np.zeros(3 * nf)
    blocks, methods = [], []
    for h, dep in enumerate(dec.deps):
        use_closed = method == "closed_form" or (method == "auto" and dep.length <= 2)
        if use_closed:
            d = stabilize_dep_closed_form(scene, dec, h)
        else:
            d = stabilize_dep_search(scene, dec, h, max_doublings)
        if rate is not None:
            d = normalize_dep(d, dep_follower_block(scene, dec, h), rate)
        blocks.append(d)
        methods.append("closed_form" if use_closed else "search")
        for p, v in enumerate(dep.inner):
            if v <= m:
                raise ArgumentError(f"leader {v} appears as an inner agent")
            D[3 * (v - m - 1) : 3 * (v - m)] = d[3 * p : 3 * p + 3]
    if lap is None:
        from .laplacian import assemble_laplacian

        lap = assemble_laplacian(scene.with_graph(dec.induced_graph()))
    report = verify_stabilizer(D, lap)
    if not report.passed:
        raise SynthesisError(
            "assembled D does not stabilize M_hat_ff", spectral_abscissa=-report.min_real_part
        )
    return Stabilizer(blocks, methods, D, report.min_real_part, report.eigenvalues)


@dataclass
class SpectralReport:
    eigenvalues: NDArray[np.complex128]
    min_real_part: float
    threshold: float
    similarity_gap: float

    @property
    def passed(self) -> bool:
        return self.min_real_part > self.threshold

    @property
    def similar(self) -> bool:
        scale = max(1.0, float(np.abs(self.eigenvalues).max()) if self.eigenvalues.size else 0.0)
        return self.similarity_gap <= 1e-9 * scale


def _multiset_gap(a: NDArray[np.complex128], b: NDArray[np.complex128]) -> float:
    if a.size == 0:
        return 0.0
    cost = np.abs(a[:, None] - b[None, :])
    r, c = linear_sum_assignment(cost)
    return float(cost[r, c].max())


def verify_stabilizer(D: ArrayLike, lap: MatValLaplacian) -> SpectralReport:
    """Spectrum of ``D M_hat_ff`` and of its world-frame similarity transform."""
    D = np.asarray(D, dtype=float).ravel()
    ff = lap.ff
    if D.shape[0] != ff.shape[0]:
        raise ArgumentError(f"D has {D.shape[0]} entries, follower block has {ff.shape[0]} rows")
    prod = D[:, None] * ff
    eig = np.linalg.eigvals(prod) if prod.size else np.zeros(0, dtype=complex)
    nf = ff.shape[0] // 3
    from .formation import frame_matrix

    frame = frame_matrix(lap.theta)
    world = lift(frame, nf) @ prod @ lift(frame.T, nf)
    eig_world = np.linalg.eigvals(world) if world.size else np.zeros(0, dtype=complex)
    norm = float(np.abs(prod).sum(axis=1).max()) if prod.size else 0.0
    min_re = float(eig.real.min()) if eig.size else np.inf
    return SpectralReport(eig, min_re, POSITIVITY_RTOL * norm, _multiset_gap(eig, eig_world))
