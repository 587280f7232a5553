"""Finite-element solver for the thermal quasi-geostrophic (TQG) model and
its alpha-regularised variant on the doubly periodic unit square."""

from .mesh import MeshTopology, build_periodic_mesh
from .spaces import CgField, DgField, FemSpace, QuadratureRule
from .elliptic import (
    EllipticSolveError,
    SolverSettings,
    SparseOperator,
    StreamSolver,
    assemble_helmholtz,
)
from .transport import TransportOperator, lax_friedrichs
from .stepper import SimState, StepSettings, cfl_number, ssprk3, ssprk3_step
from .diagnostics import (
    BkmMonitors,
    DiagnosticsRecord,
    casimir,
    energy,
    relative_errors,
)
from .stability import (
    DispersionParams,
    GrowthRateScan,
    growth_rate_scan,
    is_unstable,
    phase_speed,
)
from .harness import (
    SimConfig,
    alpha_sweep,
    canonical_initial_state,
    initial_state,
    parse_config,
    read_snapshot,
    run,
    serialize_config,
    write_snapshot,
)

__version__ = "0.1.0"
