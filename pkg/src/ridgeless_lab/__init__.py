"""Label-noise error of ridgeless regression with random feature maps."""

__version__ = "0.1.0"

from .closedform import (  # noqa: E402
    counterexample_expectation,
    gaussian_exact,
    lower_bound,
    relative_chain,
    sphere_exact,
)
from .estimator import (  # noqa: E402
    EstimatorConfig,
    NoiseCurve,
    estimate_curve_vs_n,
    estimate_curve_vs_p,
    single_trace_sample,
)
from .numkit import RngStream  # noqa: E402
from .activations import Activation  # noqa: E402
from .featmaps import (  # noqa: E402
    NTK,
    RFF,
    FixedTheta,
    GaussianDirect,
    IdentityMap,
    NTKParamNN,
    OneHotHistogram,
    Polynomial,
    RandomNN,
    SphereDirect,
    ThetaParams,
    spec_from_json,
)
from .optimizer import OptimConfig, train  # noqa: E402
from .rankcheck import cov_check, frk_check  # noqa: E402
