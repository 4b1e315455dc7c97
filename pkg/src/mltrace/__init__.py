"""Multilevel Chebyshev-Hutchinson estimation of ``trace(f(A))``."""

__version__ = "0.1.0"

from .chebyshev import (  # noqa: E402
    ChebyshevModel,
    FunctionSpec,
    chebyshev_coefficients,
    interpolant_value,
    map_operator,
    term_quadratic_forms,
)
from .matio import (  # noqa: E402
    AffineOperator,
    ExplicitOperator,
    GramPlusShift,
    SparseMatrix,
    matvec,
    parse_matrix_market,
    read_matrix_market,
    spectral_interval,
    write_matrix_market,
)
from .multilevel import (  # noqa: E402
    CostModel,
    allocate_samples,
    build_variance_table,
    estimate_trace,
    multilevel_estimate,
    select_levels,
)
from .sampling import ProbeStream, collect_pilot, single_level_estimate  # noqa: E402
