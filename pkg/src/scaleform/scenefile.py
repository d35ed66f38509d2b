"""JSON scene files, leader-state files and trajectory/manifest output.

Scene schema (angles in radians, agents labelled ``1..n``)::

    {
      "name": "...",                      optional
      "theta": 0.0,
      "leaders": [1, 2],
      "agents": [{"id": 1, "p_x": -4, "p_y": -2, "phi": 0.3927, "comment": "pi/8"}, ...],
      "edges": [[i, k], ...],             k measures i
      "deps": [{"entry_i": 1, "entry_j": 2, "inner": [3, 4, 5]}, ...],   optional
      "schedule": {"rows": [[t, s_x, tau_x, s_y, tau_y, s_phi, tau_phi], ...]},
      "sim": {"dt": 0.001, "t_end": 45, "k_l": 2, "k_f": 2,
              "mode": "moving", "seed": 0, "init_box": [5, 5, 1.5]}
    }

``comment`` keys are accepted anywhere an object is expected and ignored.
"""

from __future__ import annotations

import csv
import hashlib
import json
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np
from numpy.typing import NDArray

from .errors import FormationError, SceneFormatError
from .formation import NominalScene
from .graph import Dep, DepDecomposition, SensingGraph
from .schedule import ManeuverKeyframe, ManeuverSchedule, build_schedule
from .simulator import SimConfig, Trajectory

SHIPPED_SCENE = "formation9.json"
_SIM_KEYS = {"dt", "t_end", "k_l", "k_f", "mode", "seed", "init_box", "decay_rate"}


@dataclass
class SceneFile:
    scene: NominalScene
    deps: DepDecomposition | None
    schedule: ManeuverSchedule
    sim: SimConfig
    sha256: str
    name: str = ""
    path: Path | None = None


def _fail(field: str, msg: str) -> SceneFormatError:
    return SceneFormatError(f"{field}: {msg}")


def _number(value: Any, field: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise _fail(field, f"expected a number, got {value!r}")
    if not np.isfinite(value):
        raise _fail(field, "must be finite")
    return float(value)


def _int(value: Any, field: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise _fail(field, f"expected an integer, got {value!r}")
    return value


def _list(value: Any, field: str) -> list:
    if not isinstance(value, list):
        raise _fail(field, f"expected a list, got {type(value).__name__}")
    return value


def _require(doc: dict, key: str, where: str = "") -> Any:
    if key not in doc:
        raise _fail(f"{where}{key}", "missing")
    return doc[key]


def parse_scene(text: str, path: Path | None = None) -> SceneFile:
    """Parse a scene document; errors name the offending line or field."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SceneFormatError(f"line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise SceneFormatError("top level must be a JSON object")

    agents = _list(_require(doc, "agents"), "agents")
    if not agents:
        raise _fail("agents", "no agents")
    rows = {}
    for idx, a in enumerate(agents):
        where = f"agents[{idx}]"
        if not isinstance(a, dict):
            raise _fail(where, "expected an object")
        aid = _int(_require(a, "id", where + "."), where + ".id")
        if aid in rows:
            raise _fail(where + ".id", f"duplicate id {aid}")
        rows[aid] = [_number(_require(a, k, where + "."), f"{where}.{k}") for k in ("p_x", "p_y", "phi")]
    n = len(rows)
    if sorted(rows) != list(range(1, n + 1)):
        raise _fail("agents", f"ids must be contiguous 1..{n}, got {sorted(rows)}")
    g_tilde = np.array([rows[i] for i in range(1, n + 1)])

    edges = []
    for idx, e in enumerate(_list(_require(doc, "edges"), "edges")):
        e = _list(e, f"edges[{idx}]")
        if len(e) != 2:
            raise _fail(f"edges[{idx}]", "expected a pair [i, k]")
        edges.append((_int(e[0], f"edges[{idx}][0]"), _int(e[1], f"edges[{idx}][1]")))
    theta = _number(doc.get("theta", 0.0), "theta")
    leaders = tuple(_int(v, f"leaders[{i}]") for i, v in enumerate(_list(_require(doc, "leaders"), "leaders")))

    try:
        graph = SensingGraph(n, edges)
        scene = NominalScene(graph, g_tilde, theta, leaders)
    except FormationError as exc:
        raise SceneFormatError(str(exc)) from exc

    dec = None
    if "deps" in doc and doc["deps"] is not None:
        deps = []
        for idx, d in enumerate(_list(doc["deps"], "deps")):
            where = f"deps[{idx}]"
            if not isinstance(d, dict):
                raise _fail(where, "expected an object")
            inner = tuple(_int(v, f"{where}.inner") for v in _list(_require(d, "inner", where + "."), where + ".inner"))
            try:
                deps.append(Dep(_int(_require(d, "entry_i", where + "."), where + ".entry_i"),
                                _int(_require(d, "entry_j", where + "."), where + ".entry_j"), inner))
            except FormationError as exc:
                raise _fail(where, str(exc)) from exc
        dec = DepDecomposition(n, leaders[:2], tuple(deps))

    schedule = _parse_schedule(doc.get("schedule"))
    sim = _parse_sim(doc.get("sim", {}))
    sha = hashlib.sha256(text.encode("utf-8")).hexdigest()
    return SceneFile(scene, dec, schedule, sim, sha, str(doc.get("name", "")), path)


def _parse_schedule(block: Any) -> ManeuverSchedule:
    if block is None:
        raise _fail("schedule", "missing")
    if not isinstance(block, dict):
        raise _fail("schedule", "expected an object")
    rows = _list(_require(block, "rows", "schedule."), "schedule.rows")
    if not rows:
        raise _fail("schedule.rows", "no keyframes")
    frames = []
    for idx, r in enumerate(rows):
        r = _list(r, f"schedule.rows[{idx}]")
        if len(r) != 7:
            raise _fail(f"schedule.rows[{idx}]", f"expected 7 values, got {len(r)}")
        frames.append(ManeuverKeyframe.from_row([_number(v, f"schedule.rows[{idx}][{c}]") for c, v in enumerate(r)]))
    if len(frames) == 1:
        return ManeuverSchedule(frames)
    try:
        return build_schedule(frames)
    except FormationError as exc:
        raise _fail("schedule.rows", str(exc)) from exc


def _parse_sim(block: Any) -> SimConfig:
    if not isinstance(block, dict):
        raise _fail("sim", "expected an object")
    unknown = set(block) - _SIM_KEYS - {"comment"}
    if unknown:
        raise _fail("sim", f"unknown keys {sorted(unknown)}")
    kw: dict[str, Any] = {}
    for key in ("dt", "t_end", "k_l", "k_f"):
        if key in block:
            kw[key] = _number(block[key], f"sim.{key}")
    if "decay_rate" in block:
        kw["decay_rate"] = None if block["decay_rate"] is None else _number(block["decay_rate"], "sim.decay_rate")
    if "mode" in block:
        kw["mode"] = block["mode"]
    if "seed" in block:
        kw["seed"] = _int(block["seed"], "sim.seed")
    if "init_box" in block:
        box = _list(block["init_box"], "sim.init_box")
        if len(box) != 3:
            raise _fail("sim.init_box", "expected three half-widths")
        kw["init_box"] = tuple(_number(v, f"sim.init_box[{i}]") for i, v in enumerate(box))
    try:
        return SimConfig(**kw)
    except FormationError as exc:
        raise _fail("sim", str(exc)) from exc


def load_scene(path: str | Path) -> SceneFile:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        return parse_scene(text, path)
    except SceneFormatError as exc:
        raise SceneFormatError(f"{path}: {exc}") from exc


def shipped_scene_text() -> str:
    return resources.files("scaleform.data").joinpath(SHIPPED_SCENE).read_text(encoding="utf-8")


def shipped_scene() -> SceneFile:
    """The bundled nine-agent scene with its keyframe schedule."""
    return parse_scene(shipped_scene_text())


_NUMBER = re.compile(r"[,\s]+")


def parse_states(text: str, count: int) -> NDArray[np.float64]:
    """Read ``count`` poses from whitespace/comma separated reals; ``#`` starts a comment."""
    values = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        for tok in _NUMBER.split(line):
            if not tok:
                continue
            try:
                v = float(tok)
            except ValueError:
                raise SceneFormatError(f"line {lineno}: {tok!r} is not a number") from None
            if not np.isfinite(v):
                raise SceneFormatError(f"line {lineno}: non-finite value")
            values.append(v)
    if len(values) != 3 * count:
        raise SceneFormatError(f"expected {3 * count} values for {count} poses, got {len(values)}")
    return np.array(values).reshape(count, 3)


def trajectory_header(n: int) -> list[str]:
    cols = ["t"]
    for i in range(1, n + 1):
        cols += [f"p_x_{i}", f"p_y_{i}", f"phi_{i}", f"p_x_{i}_ref", f"p_y_{i}_ref", f"phi_{i}_ref"]
    return cols + ["delta_l", "delta_f"]


def write_trajectory_csv(traj: Trajectory, path: str | Path, stride: int = 1) -> Path:
    """Every ``stride``-th sample plus the last one, 12 significant digits."""
    path = Path(path)
    n = traj.g.shape[1]
    idx = list(range(0, len(traj), max(1, stride)))
    if idx and idx[-1] != len(traj) - 1:
        idx.append(len(traj) - 1)
    dl, df = traj.delta_l_norm, traj.delta_f_norm
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(trajectory_header(n))
        for k in idx:
            row = [traj.t[k]]
            for i in range(n):
                row += list(traj.g[k, i]) + list(traj.g_ref[k, i])
            row += [dl[k], df[k]]
            w.writerow([f"{v:.12g}" for v in row])
    return path


def write_json(obj: Any, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path
