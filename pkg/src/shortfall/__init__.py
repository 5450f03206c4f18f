"""Expected shortfall (CVaR) and distortion risk measures.

Submodules: ``distributions``, ``choquet``, ``empirical``,
``measurement_error``, ``heavy_tail``, ``montecarlo`` and ``cli``.
"""

from .choquet import (
    CvarDistortion,
    IdentityDistortion,
    choquet_expected_loss,
    coherence_probe,
    cvar_quantile_integral,
)
from .distributions import ChiSquareLaw, NormalLaw, UniformLaw
from .empirical import EmpiricalSample, empirical_cvar
from .errors import (
    DivergentIntegralError,
    DomainError,
    InputError,
    NumericalError,
    ShortfallError,
    UnsupportedDerivativeError,
)
from .quadrature import QuadratureConfig
from .report import RiskReport

__version__ = "0.1.0"
