"""dtour: smooth tours through the space of 2D projections.

Build keyframe sequences from data (principal-component pairs, spectral
coordinates, random walks, or stacked embedding sweeps), compile them
into arc-length-parameterized paths, project millions of points, and
serve interactive sessions to the browser UI.
"""

from .dataio import (
    Dataset,
    LabelColumn,
    StandardizeRecord,
    TourFile,
    load_columnar,
    load_csv,
    load_tour,
    save_columnar,
    save_tour,
    standardize,
)
from .engine import Projection, SessionState, TourEngine, project
from .geometry import (
    geodesic_distance,
    geodesic_interpolate,
    gram_schmidt,
    nearest_orthonormal,
    principal_angles,
    procrustes_align,
    random_basis,
    svd_2x2,
)
from .path import Keyframe, KeyframeSequence, TourPath, catmull_rom_basis, compile_path
from .strategies import (
    LaplacianEigenmaps,
    PrincipalComponents,
    grand_tour_extend,
    le_tour,
    little_tour,
    manual_drag,
    residual_axis,
    rotate_about_residual,
    sequential_tour,
)

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "Keyframe",
    "KeyframeSequence",
    "LabelColumn",
    "LaplacianEigenmaps",
    "PrincipalComponents",
    "Projection",
    "SessionState",
    "StandardizeRecord",
    "TourEngine",
    "TourFile",
    "TourPath",
    "catmull_rom_basis",
    "compile_path",
    "geodesic_distance",
    "geodesic_interpolate",
    "gram_schmidt",
    "grand_tour_extend",
    "le_tour",
    "little_tour",
    "load_columnar",
    "load_csv",
    "load_tour",
    "manual_drag",
    "nearest_orthonormal",
    "principal_angles",
    "procrustes_align",
    "project",
    "random_basis",
    "residual_axis",
    "rotate_about_residual",
    "save_columnar",
    "save_tour",
    "sequential_tour",
    "standardize",
    "svd_2x2",
    "__version__",
]
