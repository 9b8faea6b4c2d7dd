"""Non-local average upwind divergence for scalar conservation laws."""
from .filters import builtin_filter, dirac, moment_distance, rescale, tabulated_filter
from .flux import FluxSpec, advection, burgers, lwr, split_scalar, table_flux
from .geometry import Grid, GridFunction, fold, sample_shift, standard_measure
from .operator import apply, apply_raw, build_plan, lipschitz_bound

__version__ = "0.1.0"

__all__ = [
    "FluxSpec", "Grid", "GridFunction", "advection", "apply", "apply_raw", "build_plan",
    "builtin_filter", "burgers", "dirac", "fold", "lipschitz_bound", "lwr", "moment_distance",
    "rescale", "sample_shift", "split_scalar", "standard_measure", "table_flux",
    "tabulated_filter",
]
