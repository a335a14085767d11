"""One configuration type and one entry point for all six estimators.

``sa``/``asa`` run the recursion on exact loss draws (benchmark only),
``nsa``/``ansa`` on nested draws at a single bias, ``mlsa``/``amlsa`` use the
multilevel telescopic estimator. The ``a`` prefix means the VaR estimate is
the running average of the iterates.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import rng as rngmod
from .core_sa import DEFAULT_CHUNK, LearningRate, check_alpha, run_scheme
from .mlsa import (LevelResult, MlConfig, RiskEstimate, ansa_params_for_accuracy, combine,
                   nsa_params_for_accuracy, run_mlsa)
from .sampling import LossModel, sample_biased

SCHEMES = ("sa", "asa", "nsa", "ansa", "mlsa", "amlsa")


@dataclass(frozen=True)
class ScalingSpec:
    """Renormalised error ``base ** -exponent * (estimate - target)``."""

    var_exponent: float
    es_exponent: float
    base: float

    @property
    def factors(self) -> np.ndarray:
        return np.array([self.base ** -self.var_exponent, self.base ** -self.es_exponent])

    def apply(self, raw, target) -> np.ndarray:
        return (np.asarray(raw, float) - np.asarray(target, float)) * self.factors


@dataclass(frozen=True)
class SchemeConfig:
    scheme: str
    rate: LearningRate
    alpha: float
    k: int = 1
    n_steps: int = 1
    ml: Optional[MlConfig] = None
    xi0: object = 0.0

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; pick one of {SCHEMES}")
        check_alpha(self.alpha)
        if self.multilevel:
            if self.ml is None:
                raise ValueError(f"{self.scheme} needs a multilevel configuration")
            if self.ml.averaged != (self.scheme == "amlsa"):
                raise ValueError("averaging flag does not match the scheme")
        elif self.k < 1 or self.n_steps < 1:
            raise ValueError("k and n_steps must be positive")

    @property
    def multilevel(self) -> bool:
        return self.scheme in ("mlsa", "amlsa")

    @property
    def averaged(self) -> bool:
        return self.scheme.startswith("a")

    @property
    def bias(self) -> float:
        """``h`` for single-level schemes, ``h_L`` for multilevel ones."""
        return self.ml.h_last if self.multilevel else 1.0 / self.k

    def scaling(self) -> ScalingSpec:
        beta = self.rate.beta
        if self.scheme in ("sa", "nsa"):
            return ScalingSpec(beta, 1.0, self.bias)
        if self.scheme in ("asa", "ansa"):
            return ScalingSpec(1.0, 1.0, self.bias)
        if self.scheme == "mlsa":
            es = 1.0 / beta + (2 * beta - 1) / (4 * beta * (1 + beta))
            return ScalingSpec(1.0, es, self.bias)
        return ScalingSpec(1.0, 9.0 / 8.0, self.bias)

    @classmethod
    def for_accuracy(cls, scheme: str, epsilon: float, rate: LearningRate, alpha: float,
                     h0: Optional[float] = None, m: int = 2, num_levels: Optional[int] = None,
                     xi0: float = 0.0) -> "SchemeConfig":
        """Parameters prescribed by the complexity results for accuracy ``epsilon``.

        Multilevel schemes need ``h0`` (then the level count follows from the
        accuracy) or ``num_levels`` (then ``h0 = epsilon * m**num_levels``).
        """
        if scheme in ("sa", "nsa"):
            bias, n = nsa_params_for_accuracy(epsilon, rate.beta)
            return cls(scheme, rate, alpha, bias.k, n, None, xi0)
        if scheme in ("asa", "ansa"):
            bias, n = ansa_params_for_accuracy(epsilon)
            return cls(scheme, rate, alpha, bias.k, n, None, xi0)
        if scheme in ("mlsa", "amlsa"):
            averaged = scheme == "amlsa"
            if num_levels is not None:
                k0 = round(1.0 / (epsilon * m ** num_levels))
                ml = MlConfig.with_levels(k0, m, num_levels, rate, alpha, averaged, xi0)
            else:
                if h0 is None:
                    raise ValueError("multilevel schemes need h0 or num_levels")
                ml = MlConfig.for_accuracy(epsilon, h0, m, rate, alpha, averaged, xi0)
            return cls(scheme, rate, alpha, ml=ml, xi0=xi0)
        raise ValueError(f"unknown scheme {scheme!r}")

    def to_dict(self) -> dict:
        d = {"scheme": self.scheme, "alpha": self.alpha, "xi0": self.xi0,
             "rate": {"gamma1": self.rate.gamma1, "beta": self.rate.beta, "offset": self.rate.offset}}
        if self.multilevel:
            d.update(k0=self.ml.k0, m=self.ml.m, num_levels=self.ml.num_levels,
                     schedule=list(self.ml.schedule))
            d["xi0"] = self.ml.xi0 if isinstance(self.ml.xi0, float) else list(self.ml.xi0)
        else:
            d.update(k=self.k, n_steps=self.n_steps)
        return d


def run_estimate(model: LossModel, cfg: SchemeConfig, seed=0,
                 chunk: int = DEFAULT_CHUNK) -> RiskEstimate:
    """Single VaR/ES estimate for any scheme.

    Single-level schemes draw from the same sub-stream as level 0 of the
    multilevel schemes, so a one-level multilevel run with ``k0 = k``
    reproduces the nested run bit for bit.

    Exact draws (``sa``/``asa``) are booked at one unit each.
    """
    ss = rngmod.as_seed_sequence(seed)
    if cfg.multilevel:
        return run_mlsa(model, cfg.ml, ss, chunk)
    rng = rngmod.generator(rngmod.child(ss, 0))
    if cfg.scheme in ("sa", "asa"):
        source = lambda c: (model.sample_exact(c, rng), c)
    else:
        source = lambda c: sample_biased(model, cfg.k, rng, c)
    state = run_scheme(source, cfg.n_steps, cfg.rate, cfg.alpha, cfg.xi0, chunk)
    return combine([LevelResult(0, cfg.n_steps, state)], cfg.averaged)
