"""Vertex-reinforced random walks on the integers: simulation, exact enumeration, exponent analysis."""

import warnings

# numba probes for TBB at import of the parallel backend; the fallback layer is fine.
warnings.filterwarnings("ignore", message="The TBB threading layer")

__version__ = "0.1.0"

from .weights import (  # noqa: E402
    Environment,
    WeightSpec,
    homogeneous,
    linear_weight,
    make_custom_weight,
    make_power_weight,
    make_site_env,
    make_table_weight,
    shifted_weight,
    weight_at,
)
from .walk import (  # noqa: E402
    StoppingClock,
    WalkState,
    init_walk,
    local_time,
    run_until,
    step,
    step_probability_right,
)
from .rng import RngStream  # noqa: E402
from .events import EventSpec  # noqa: E402
