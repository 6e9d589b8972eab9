"""Modal characterization of measured surface deviations.

The toolkit builds a modal basis from an eigen analysis of a nominal
geometry, projects measured point clouds onto it, filters the result into
position/orientation/size/form/waviness bands, interpolates form defects
from sparse probings, and plans the probing itself (uniform sampling, tour
optimization, DMIS program export).
"""

from .basis import (
    EUCLIDEAN,
    INFINITY,
    NATURAL,
    RIGID,
    SIZE,
    ModalBasis,
    TaggedField,
    compute_modal_basis,
    enrich_basis,
    renormalize,
    rigid_and_size_fields,
    solve_modes,
)
from .decomposition import (
    DeviationField,
    ModalSignature,
    ResidualReport,
    band_filter,
    decompose,
    pearson_correlation,
    reconstruct,
    residual_report,
    significant_modes,
    write_e_curve_csv,
    write_signature_csv,
)
from .errors import (
    AssemblyError,
    ConfigError,
    EigenSolverError,
    IllConditionedWarning,
    IngestionError,
    InterpolationFailureError,
    InvalidBasisError,
    InvalidParameterError,
    ModalFormError,
    UndefinedCorrelationError,
)
from .estimators import ModalDecomposer, SparseFieldInterpolator
from .geometry import (
    PROFILE_1D,
    SPHERICAL_CAP,
    Geometry,
    SampleSet,
    build_profile,
    build_spherical_cap,
    uniform_subsample,
)
from .interpolation import (
    DegradedProjection,
    SweepResult,
    build_degraded_projection,
    interpolate,
    run_sweep,
    synthesize_defect,
    write_case_csv,
)
from .io import ingest_point_cloud, write_field_csv
from .operators import OperatorPair, assemble_operators
from .planning import (
    MeasurementPlan,
    emit_dmis,
    order_tour,
    plan_probe_path,
    simulate_probing,
)

__version__ = "0.1.0"

__all__ = [
    "AssemblyError",
    "ConfigError",
    "DegradedProjection",
    "DeviationField",
    "EigenSolverError",
    "EUCLIDEAN",
    "Geometry",
    "IllConditionedWarning",
    "INFINITY",
    "IngestionError",
    "InterpolationFailureError",
    "InvalidBasisError",
    "InvalidParameterError",
    "MeasurementPlan",
    "ModalBasis",
    "ModalDecomposer",
    "ModalFormError",
    "ModalSignature",
    "NATURAL",
    "OperatorPair",
    "PROFILE_1D",
    "ResidualReport",
    "RIGID",
    "SampleSet",
    "SIZE",
    "SPHERICAL_CAP",
    "SparseFieldInterpolator",
    "SweepResult",
    "TaggedField",
    "UndefinedCorrelationError",
    "assemble_operators",
    "band_filter",
    "build_degraded_projection",
    "build_profile",
    "build_spherical_cap",
    "compute_modal_basis",
    "decompose",
    "emit_dmis",
    "enrich_basis",
    "ingest_point_cloud",
    "interpolate",
    "order_tour",
    "pearson_correlation",
    "plan_probe_path",
    "reconstruct",
    "renormalize",
    "residual_report",
    "rigid_and_size_fields",
    "run_sweep",
    "significant_modes",
    "simulate_probing",
    "solve_modes",
    "synthesize_defect",
    "uniform_subsample",
    "write_case_csv",
    "write_e_curve_csv",
    "write_field_csv",
    "write_signature_csv",
]
