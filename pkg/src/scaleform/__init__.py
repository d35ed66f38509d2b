"""Distributed non-uniform scaling formation maneuvers for planar agents with yaw."""

from .errors import (
    ArgumentError,
    ConsistencyError,
    ConstructionError,
    DecompositionError,
    DivergenceError,
    FormationError,
    GraphShapeError,
    ManeuverabilityError,
    SceneFormatError,
    SingularityError,
    SynthesisError,
    UnsupportedLengthError,
)
from .formation import (
    ManeuverParams,
    NominalScene,
    Pose,
    apply_maneuver,
    check_assumptions,
    check_configuration,
    frame_matrix,
    parameter_matrix,
    recover_params,
)
from .graph import (
    Dep,
    DepDecomposition,
    SensingGraph,
    build_dep_induced,
    decompose_deps,
    is_two_rooted,
    two_reachable,
)
from .laplacian import (
    MatValLaplacian,
    assemble_laplacian,
    axis_decompose,
    constraint_index_set,
    constraint_weights,
    follower_targets,
    tridiag_minors,
)
from .schedule import ManeuverKeyframe, ManeuverSchedule, build_schedule
from .scenefile import SceneFile, load_scene, parse_scene, shipped_scene
from .simulator import (
    SimConfig,
    Trajectory,
    compute_errors,
    control_moving,
    control_stationary,
    leader_reference,
    run_simulation,
)
from .stabilizer import (
    Stabilizer,
    stabilize_dep_closed_form,
    stabilize_dep_search,
    synthesize_stabilizer,
    verify_stabilizer,
)

__version__ = "0.1.0"
