"""Construction and verification of lambda-translating soliton surfaces."""

from .domains import DomainMesh, annulus_domain, disk_domain, ellipse_domain, make_domain, polygon_domain
from .geometry import (
    coarea_slices,
    conormal_height_integral,
    first_variation_check,
    flux,
    mean_curvature,
    normal_square_integral,
    soliton_residual,
    weighted_area,
)
from .mesh import DensityFrame, PlanarBoundary, TriMesh, read_obj, write_obj
from .rotational import RadialProfile, rotational_to_mesh, solve_rotational
from .solver import (
    GraphSolution,
    SolverConfig,
    continuation_sweep,
    solution_to_mesh,
    solvability_bound,
    solve_graph,
)
from .verify import MultiBoundarySpec, ReportEntry, VerificationReport

__version__ = "0.1.0"
