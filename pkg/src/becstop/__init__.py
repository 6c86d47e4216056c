"""Stopping-set analysis toolkit for concatenated code ensembles on the
binary erasure channel.

The package splits into enumerator construction (exact and log-domain),
finite-length stopping-distance bounds, asymptotic spectral shapes with
growth-rate extraction, EXIT-chart threshold analysis, a Monte Carlo
decoder, and desk-scale brute-force oracles used to validate all of the
above.
"""

from .enumerators import (EnsembleEnumerator, EnsembleSpec, SupportTable,
                          iossef, iossef_hcc, iossef_rma, puncture_siosef,
                          siosef_accumulator, siosef_feedforward,
                          siosef_identity, siosef_repetition, ssef)
from .finite_bounds import (BoundPoint, TruncatedTableError, bound_sweep,
                            failure_bound, hmin_quantile)
from .spectral import (Rho0Result, SpectralCurve, SpectralPointVars,
                       SpectralResult, extract_rho0, f_rma, grad_f_rma, psi,
                       r_s_hcc, r_s_rma, r_s_rma_punctured, spectral_curve)
from .exit_analysis import (ExitCurve, ThresholdResult, compound_outer_exit,
                            exit_accumulator, exit_feedforward,
                            exit_repetition, inner_accumulator_curve,
                            threshold)
from .codec_sim import (CodeInstance, DecodeResult, ErasurePattern,
                        bec_transmit, encode, iterative_decode, monte_carlo,
                        sample_instance)
from .brute_force import (closure_support_pairs, exhaustive_ensemble_ssef,
                          is_stopping_set, max_stopping_set_within,
                          support_pair_counts)

__version__ = "0.1.0"

__all__ = [
    "EnsembleSpec", "EnsembleEnumerator", "SupportTable",
    "siosef_accumulator", "siosef_feedforward", "siosef_repetition",
    "siosef_identity", "puncture_siosef", "iossef", "iossef_rma",
    "iossef_hcc", "ssef",
    "BoundPoint", "TruncatedTableError", "failure_bound", "hmin_quantile",
    "bound_sweep",
    "SpectralPointVars", "SpectralResult", "SpectralCurve", "Rho0Result",
    "f_rma", "grad_f_rma", "r_s_rma", "r_s_rma_punctured", "r_s_hcc", "psi",
    "extract_rho0", "spectral_curve",
    "ExitCurve", "ThresholdResult", "exit_repetition", "exit_accumulator",
    "exit_feedforward", "compound_outer_exit", "inner_accumulator_curve",
    "threshold",
    "CodeInstance", "ErasurePattern", "DecodeResult", "sample_instance",
    "encode", "bec_transmit", "iterative_decode", "monte_carlo",
    "closure_support_pairs", "support_pair_counts", "is_stopping_set",
    "max_stopping_set_within", "exhaustive_ensemble_ssef",
    "__version__",
]
