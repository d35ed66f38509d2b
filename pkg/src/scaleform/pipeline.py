"""Staged validation of a scene: graph, decomposition, assumptions, rank, stabilizer."""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import DecompositionError, FormationError, GraphShapeError
from .formation import check_assumptions, numerical_rank
from .graph import DepDecomposition, decompose_deps, is_two_rooted
from .laplacian import MatValLaplacian, assemble_laplacian
from .scenefile import SceneFile
from .stabilizer import Stabilizer, synthesize_stabilizer


@dataclass
class Stage:
    name: str
    ok: bool
    detail: str = ""


@dataclass
class ValidationReport:
    stages: list[Stage] = field(default_factory=list)
    dec: DepDecomposition | None = None
    lap: MatValLaplacian | None = None
    control_lap: MatValLaplacian | None = None
    stabilizer: Stabilizer | None = None

    @property
    def passed(self) -> bool:
        return all(s.ok for s in self.stages)

    @property
    def first_failure(self) -> Stage | None:
        return next((s for s in self.stages if not s.ok), None)

    def add(self, name: str, ok: bool, detail: str = "") -> bool:
        self.stages.append(Stage(name, ok, detail))
        return ok

    def verdicts(self) -> dict[str, bool]:
        return {s.name: s.ok for s in self.stages}

    def table(self) -> str:
        width = max((len(s.name) for s in self.stages), default=5)
        lines = [f"{s.name:<{width}}  {'PASS' if s.ok else 'FAIL'}  {s.detail}".rstrip() for s in self.stages]
        lines.append(f"{'verdict':<{width}}  {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines)


def validate_scene(sf: SceneFile, mode: str | None = None) -> ValidationReport:
    """Run every check in order, stopping at the first stage later ones depend on.

    ``mode`` defaults to the scene's configured mode; the stabilizer stage
    only runs in stationary mode.
    """
    scene = sf.scene
    mode = mode or sf.sim.mode
    rep = ValidationReport()
    m = scene.m
    if not rep.add("leaders", m == 2, f"{m} leader(s)" + ("" if m == 2 else "; the control laws need exactly 2")):
        return rep
    g = scene.graph
    try:
        g.require_bidirectional()
        rep.add("bidirectional", True)
    except GraphShapeError as exc:
        rep.add("bidirectional", False, str(exc))
        return rep
    if not rep.add("two_rooted", is_two_rooted(g, scene.leaders), f"roots {scene.leaders}"):
        try:
            decompose_deps(g, scene.leaders)
        except DecompositionError as exc:
            rep.stages[-1].detail += f"; agent {exc.witness} is not 2-reachable"
        return rep

    try:
        if sf.deps is not None:
            sf.deps.validate(g)
            dec = sf.deps
            source = "from scene file"
        else:
            dec = decompose_deps(g, scene.leaders)
            source = "computed"
    except FormationError as exc:
        rep.add("decomposition", False, str(exc))
        return rep
    rep.dec = dec
    rep.add("decomposition", True, f"{len(dec.deps)} DEP(s) {source}, lengths {[d.length for d in dec.deps]}")

    report = check_assumptions(scene, dec)
    rep.add("A1_nonsingular", report.a1, "" if report.a1 else f"axes {report.a1_failing_axes} do not span")
    rep.add("A2_neighbors", report.a2, "" if report.a2 else
            "; ".join(f"dep {h} pair {p} axis {ax}" for h, p, ax in report.a2_violations))
    rep.add("A3_entry_offsets", report.a3, "" if report.a3 else
            "; ".join(f"dep {h} entry {i} agent {l} axis {ax}" for h, i, l, ax in report.a3_violations))
    rep.add("A4_triples", report.a4, "" if report.a4 else
            "; ".join(f"triple {t} axis {ax}" for t, ax in report.a4_violations))
    if not report.all_hold:
        return rep

    try:
        lap = assemble_laplacian(scene)
        control = assemble_laplacian(scene.with_graph(dec.induced_graph()))
    except FormationError as exc:
        rep.add("rank", False, str(exc))
        return rep
    rep.lap, rep.control_lap = lap, control
    want = 3 * scene.n - 6
    rank = numerical_rank(lap.M)
    if not rep.add("rank", rank == want, f"rank(M) = {rank}, expected {want}"):
        return rep

    if mode == "stationary":
        try:
            rep.stabilizer = synthesize_stabilizer(scene.with_graph(dec.induced_graph()), dec, control)
            st = rep.stabilizer
            rep.add("stabilizer", True, f"min Re eig = {st.min_real_part:.6g} ({', '.join(st.methods)})")
        except FormationError as exc:
            rep.add("stabilizer", False, str(exc))
    return rep
