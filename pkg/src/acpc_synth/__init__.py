"""Optimal average-cost-per-surveillance-cycle control of MDPs under Rabin objectives."""

__version__ = "0.1.0"

from .model import Dra, Mdp, ModelError, ProductMdp, build_product, lift_surveillance, validate_mdp  # noqa: E402
from .graph import compute_maecs, mec_decompose, almost_sure_reach  # noqa: E402
from .solvers import SspInstance, acps_solve, ssp_solve, collapse_zero_cost_ecs  # noqa: E402
from .reduction import reduce_maec, ActionCapExceeded  # noqa: E402
from .synthesis import InfeasibleError, synthesize  # noqa: E402

__all__ = [
    "Dra", "Mdp", "ModelError", "ProductMdp", "build_product", "lift_surveillance", "validate_mdp",
    "compute_maecs", "mec_decompose", "almost_sure_reach",
    "SspInstance", "acps_solve", "ssp_solve", "collapse_zero_cost_ecs",
    "reduce_maec", "ActionCapExceeded", "InfeasibleError", "synthesize",
]
