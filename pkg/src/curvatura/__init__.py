"""Lines of curvature of link surfaces in the 3-sphere of R^4."""
from .curvature import (
    omega_ambient,
    omega_double_torus_closed_form,
    omega_frame,
    principal_directions,
    principal_frames,
    shape_operator_fd_oracle,
)
from .errors import CurvaturaError
from .field4 import LinkSurface, make_double_torus, project_to_surface, surface_point
from .stereo import (
    StereoMap,
    SurfaceMesh,
    check_transfer,
    make_stereo_map,
    mesh_double_torus,
    stereo_inverse,
    stereo_project,
)
from .symmetry import SymmetryGroup
from .tracer import Trace, build_cw_complex, e2_seeds, explicit_separatrices, foliation_atlas, trace_batch, trace_line
from .umbilic import (
    ThetaSystem,
    UmbilicReport,
    closed_form_roots,
    find_umbilics,
    groebner_candidates,
    known_umbilics,
    monge_chart_jet,
    separatrix_slopes,
    umbilic_index,
)

__all__ = [
    "CurvaturaError",
    "LinkSurface",
    "StereoMap",
    "SurfaceMesh",
    "SymmetryGroup",
    "ThetaSystem",
    "Trace",
    "UmbilicReport",
    "build_cw_complex",
    "check_transfer",
    "closed_form_roots",
    "e2_seeds",
    "explicit_separatrices",
    "find_umbilics",
    "foliation_atlas",
    "groebner_candidates",
    "known_umbilics",
    "make_double_torus",
    "make_stereo_map",
    "mesh_double_torus",
    "monge_chart_jet",
    "omega_ambient",
    "omega_double_torus_closed_form",
    "omega_frame",
    "principal_directions",
    "principal_frames",
    "project_to_surface",
    "separatrix_slopes",
    "shape_operator_fd_oracle",
    "stereo_inverse",
    "stereo_project",
    "surface_point",
    "trace_batch",
    "trace_line",
    "umbilic_index",
]
