"""Negative binomial approximation of call-function expectations via Stein's method.

Core entry points:

* :class:`NBParams`, :func:`nb_call_expectation` -- the approximating law
* :class:`SteinSolution` -- g_z and its envelopes
* :class:`DependencyModel` -- locally dependent summands
* :mod:`nbstein.bounds` -- the error bounds
* :mod:`nbstein.oracle`, :mod:`nbstein.cdo`
"""

from .cdo import Portfolio, TrancheReport, compare_bounds, tranche_expected_loss
from .dependency import DependencyModel, PairwiseBernoulli, ProductLaw, TableLaw, exact_sum_distribution
from .dists import DiscreteDist, TailCertificate, convolve_all, dtv_unit_shift
from .errors import (ConfigError, ConstructionError, InfeasibleMatchingError, NBSteinError,
                     ParameterDomainError, PreconditionError, SeriesConvergenceError,
                     StateSpaceError, UnsupportedLawError)
from .nb import (NBParams, SeriesControl, match_mean, match_mean_var, nb_call_expectation,
                 nb_logpmf, nb_mean_var, nb_pmf)
from .oracle import OracleResult, exact_call_expectation, true_error_profile
from .stein import SteinSolution

__version__ = "0.1.0"
