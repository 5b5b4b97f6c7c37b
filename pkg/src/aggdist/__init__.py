"""Aggregate (compound) loss distributions.

Computes the law of Z = X_1 + ... + X_N for configurable count and loss
models through four engines (Panjer recursion, FFT with tilting, direct
characteristic-function integration, Monte Carlo), evaluates VaR and
expected shortfall, and provides closed-form approximations for
cross-validation.
"""

from .approx import (TranslatedGammaFit, fit_translated_gamma, heavy_tail_var,
                     normal_approx_quantile, translated_gamma_fit)
from .discretise import DiscreteSeverity, Mode, TailPolicy, discretise
from .distributions import (GPD, Binomial, FrequencyModel, Gamma, Lognormal,
                            NegBin, Normal, Poisson, SeverityModel,
                            parse_frequency, parse_severity)
from .dni import (DniSettings, ForwardCfEvaluator, compound_cf, dni_cdf,
                  dni_quantile, es_via_cf, gauss7, sev_cf)
from .errors import (AggdistError, ConvergenceError, EsUndefinedError,
                     GridTooShortError, InsufficientSamplesError,
                     ParameterError, TailMassError, UnderflowError)
from .fft import compound_via_fft, default_tilt, fft_transform
from .grid import CompoundGrid
from .moments import CompoundMoments, compound_central_moments, compound_poisson_cumulants
from .montecarlo import McRun, mc_es, mc_quantile, mc_quantile_ci, simulate_compound
from .panjer import (AtIndex, AtQuantile, PanjerParams, brute_force_convolution,
                     extended_panjer_recursion, panjer_params, panjer_quantile,
                     panjer_recursion, panjer_recursion_abl, stabilised_compound,
                     zero_modified, zero_truncated)
from .riskmeasures import RiskReport, es_from_grid, var_from_grid

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
