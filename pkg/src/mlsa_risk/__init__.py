"""Nested, averaged and multilevel stochastic approximation of VaR and ES."""
from .core_sa import LearningRate, SaState, advance, h1, h2, nsa_step, run_scheme
from .harness import (Ellipse, GaussianFit, ellipse_95, fit_gaussian, normality_report,
                      run_replications)
from .mlsa import MlConfig, RiskEstimate, run_mlsa
from .sampling import BiasParam, LossModel, sample_biased, sample_coupled
from .schemes import SCHEMES, SchemeConfig, run_estimate
from .swap import PAPER_SWAP, SwapLossModel, SwapParams, analytic_var_es
from .theory import ModelQuantities, sigma_amlsa, sigma_ansa, sigma_mlsa, sigma_nsa

__version__ = "0.1.0"
