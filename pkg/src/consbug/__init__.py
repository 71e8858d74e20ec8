"""Conservative basis-update & Galerkin low-rank integrators for kinetic equations."""

from .integrators import (
    PRESETS,
    DiagnosticsRecord,
    IntegratorConfig,
    SimulationDiverged,
    aug_bug_step,
    conservative_s_step,
    midpoint_bug_step,
    parallel2_cons_step,
    parallel_bug_step,
    preset,
    run,
)
from .linalg import ortho_columns, svd
from .lowrank import (
    LowRankState,
    TruncationPolicy,
    augment_frames,
    conservative_truncate,
    evaluate,
    svd_truncate,
)
from .model import global_invariants, invariant_density
from .rte import Linesource2dModel, SlabRteModel, linesource_init, planesource_init
from .timestep import ButcherTableau, rk_step, tableau
from .vlasov import FieldContext, VlasovModel, bump_on_tail_init

__version__ = "0.1.0"
