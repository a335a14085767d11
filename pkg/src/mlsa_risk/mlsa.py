"""Multilevel VaR/ES estimators and the accuracy-to-parameter maps.

Level 0 runs one nested chain at ``h_0 = 1/k0``. Each level ``l >= 1`` runs a
coarse chain at ``h_{l-1}`` and a fine chain at ``h_l = h_0 / m**l`` fed by the
same coupled draws; the estimator is the telescopic sum of the level
outputs. The averaged variant telescopes the running averages of the VaR
iterates and leaves the ES untouched.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import rng as rngmod
from .core_sa import (DEFAULT_CHUNK, LearningRate, SaState, advance, check_alpha,
                      run_scheme)
from .sampling import BiasParam, LossModel, sample_biased, sample_coupled

_EPS_GUARD = 1e-9


def _k(h0) -> int:
    if isinstance(h0, BiasParam):
        return h0.k
    h = float(h0)
    if not 0.0 < h <= 1.0:
        raise ValueError(f"bias parameter must lie in (0, 1], got {h}")
    return BiasParam.from_h(h).k


def _ceil(x: float) -> int:
    # Shields exact powers (e.g. 256 ** (1/1)) from round-off pushing ceil up.
    return int(math.ceil(x - _EPS_GUARD * max(1.0, abs(x))))


def level_bias(h0, m: int, ell: int) -> BiasParam:
    """``h_l = h_0 / m**l``."""
    if ell < 0:
        raise ValueError("level must be non-negative")
    k = _k(h0) * m ** ell
    if k > np.iinfo(np.int64).max:
        raise OverflowError(f"k0 * m**{ell} overflows 64-bit integers")
    return BiasParam(int(k))


def levels_for_accuracy(epsilon: float, h0, m: int) -> int:
    """Smallest level count ``L`` with ``h_0 / m**L <= epsilon``."""
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    h = 1.0 / _k(h0)
    if not h > epsilon:
        raise ValueError("multilevel schemes need h0 > epsilon")
    return _ceil(math.log(h / epsilon) / math.log(m))


def nsa_params_for_accuracy(epsilon: float, beta: float) -> Tuple[BiasParam, int]:
    """``h = 1/ceil(eps^(-1/beta))`` and ``n = ceil(h^-2)``."""
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    if not 0.5 < beta <= 1.0:
        raise ValueError("beta must lie in (1/2, 1]")
    k = max(1, _ceil(epsilon ** (-1.0 / beta)))
    return BiasParam(k), k * k


def ansa_params_for_accuracy(epsilon: float) -> Tuple[BiasParam, int]:
    """``h = 1/ceil(1/eps)`` and ``n = ceil(h^-2)``, free of beta."""
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    k = max(1, _ceil(1.0 / epsilon))
    return BiasParam(k), k * k


def _level_hs(h0, m: int, num_levels: int) -> np.ndarray:
    k0 = _k(h0)
    return np.array([1.0 / (k0 * m ** l) for l in range(num_levels + 1)])


def schedule_mlsa_real(h0, m: int, num_levels: int, beta: float) -> np.ndarray:
    if not 0.5 < beta <= 1.0:
        raise ValueError("beta must lie in (1/2, 1]")
    hs = _level_hs(h0, m, num_levels)
    a = (2 * beta - 1) / (2 * (1 + beta))
    return hs[-1] ** (-2 / beta) * np.sum(hs ** -a) ** (1 / beta) * hs ** (3 / (2 * (1 + beta)))


def schedule_amlsa_real(h0, m: int, num_levels: int) -> np.ndarray:
    hs = _level_hs(h0, m, num_levels)
    return hs[-1] ** -2.0 * np.sum(hs ** -0.25) * hs ** 0.75


def schedule_mlsa(h0, m: int, num_levels: int, beta: float) -> List[int]:
    """Per-level iteration counts of the multilevel VaR scheme, ceiled."""
    return [_ceil(v) for v in schedule_mlsa_real(h0, m, num_levels, beta)]


def schedule_amlsa(h0, m: int, num_levels: int) -> List[int]:
    """Per-level iteration counts of the averaged multilevel scheme, ceiled."""
    return [_ceil(v) for v in schedule_amlsa_real(h0, m, num_levels)]


@dataclass(frozen=True)
class MlConfig:
    k0: int
    m: int
    num_levels: int
    rate: LearningRate
    alpha: float
    schedule: Tuple[int, ...]
    averaged: bool = False
    xi0: object = 0.0

    def __post_init__(self):
        object.__setattr__(self, "schedule", tuple(int(n) for n in self.schedule))
        if np.ndim(self.xi0) == 0:
            object.__setattr__(self, "xi0", float(self.xi0))
        else:
            object.__setattr__(self, "xi0", tuple(float(v) for v in self.xi0))
            if len(self.xi0) != self.num_levels + 1:
                raise ValueError("per-level starting points need one entry per bias level")
        check_alpha(self.alpha)
        if self.num_levels < 0:
            raise ValueError("number of levels must be non-negative")
        if self.m < 2:
            raise ValueError("refinement factor must be at least 2")
        if self.k0 < 1:
            raise ValueError("k0 must be at least 1")
        if len(self.schedule) != self.num_levels + 1:
            raise ValueError("schedule needs one entry per level")
        if min(self.schedule) < 1:
            raise ValueError("every level needs at least one iteration")
        tail = self.schedule[1:]
        if any(b > a for a, b in zip(tail, tail[1:])):
            raise ValueError("iteration counts must be non-increasing over levels >= 1")

    @property
    def h0(self) -> float:
        return 1.0 / self.k0

    def start(self, bias_level: int) -> float:
        """Starting VaR iterate of a chain fed by ``X_{h_l}``."""
        return self.xi0 if isinstance(self.xi0, float) else self.xi0[bias_level]

    @property
    def h_last(self) -> float:
        return 1.0 / (self.k0 * self.m ** self.num_levels)

    @classmethod
    def for_accuracy(cls, epsilon: float, h0, m: int, rate: LearningRate, alpha: float,
                     averaged: bool = False, xi0: float = 0.0) -> "MlConfig":
        k0 = _k(h0)
        L = levels_for_accuracy(epsilon, BiasParam(k0), m)
        return cls.with_levels(k0, m, L, rate, alpha, averaged, xi0)

    @classmethod
    def with_levels(cls, k0: int, m: int, num_levels: int, rate: LearningRate, alpha: float,
                    averaged: bool = False, xi0: float = 0.0) -> "MlConfig":
        h0 = BiasParam(k0)
        if averaged:
            sched = schedule_amlsa(h0, m, num_levels)
        else:
            sched = schedule_mlsa(h0, m, num_levels, rate.beta)
        return cls(k0, m, num_levels, rate, alpha, tuple(sched), averaged, xi0)


@dataclass(frozen=True)
class LevelResult:
    level: int
    n_steps: int
    fine: SaState
    coarse: Optional[SaState] = None

    @property
    def cost(self) -> int:
        return self.fine.cost

    def var_increment(self, averaged: bool) -> float:
        pick = (lambda s: s.xi_bar) if averaged else (lambda s: s.xi)
        return pick(self.fine) - (pick(self.coarse) if self.coarse is not None else 0.0)

    @property
    def es_increment(self) -> float:
        return self.fine.chi - (self.coarse.chi if self.coarse is not None else 0.0)


@dataclass(frozen=True)
class RiskEstimate:
    var: float
    es: float
    cost: int
    per_level: Tuple[LevelResult, ...] = field(default_factory=tuple)


def run_level(model: LossModel, cfg: MlConfig, level: int, rng: np.random.Generator,
              chunk: int = DEFAULT_CHUNK) -> LevelResult:
    n = cfg.schedule[level]
    if level == 0:
        state = run_scheme(lambda c: sample_biased(model, cfg.k0, rng, c), n,
                           cfg.rate, cfg.alpha, cfg.start(0), chunk)
        return LevelResult(0, n, state)
    coarse = SaState(xi=cfg.start(level - 1))
    fine = SaState(xi=cfg.start(level))
    left = n
    while left > 0:
        size = min(chunk, left)
        draw = sample_coupled(model, cfg.k0, cfg.m, level, rng, size)
        # The pair's cost is booked once, on the fine chain.
        coarse = advance(coarse, draw.coarse, cfg.rate, cfg.alpha)
        fine = advance(fine, draw.fine, cfg.rate, cfg.alpha, draw.cost)
        left -= size
    return LevelResult(level, n, fine, coarse)


def combine(levels: Sequence[LevelResult], averaged: bool) -> RiskEstimate:
    levels = tuple(sorted(levels, key=lambda r: r.level))
    var = sum(r.var_increment(averaged) for r in levels)
    es = sum(r.es_increment for r in levels)
    return RiskEstimate(var=float(var), es=float(es), cost=int(sum(r.cost for r in levels)),
                        per_level=levels)


def run_mlsa(model: LossModel, cfg: MlConfig, seed=0, chunk: int = DEFAULT_CHUNK) -> RiskEstimate:
    """Multilevel VaR/ES estimate.

    Level ``l`` draws from the sub-stream ``(seed, l)``, so levels are
    independent and the result does not depend on their execution order.
    """
    ss = rngmod.as_seed_sequence(seed)
    results = [run_level(model, cfg, l, rngmod.generator(rngmod.child(ss, l)), chunk)
               for l in range(cfg.num_levels + 1)]
    return combine(results, cfg.averaged)


def mlsa_cost(cfg: MlConfig) -> int:
    """Exact payoff count of :func:`run_mlsa` for ``cfg``."""
    return int(sum(n * cfg.k0 * cfg.m ** l for l, n in enumerate(cfg.schedule)))


# -- deterministic complexity ------------------------------------------------

def predicted_cost(scheme: str, epsilon: float, beta: float, m: int = 2,
                   h0=None, num_levels: Optional[int] = None) -> Tuple[int, dict]:
    """Payoff count each scheme spends to reach accuracy ``epsilon``.

    Multilevel schemes take either ``h0`` (levels from the accuracy rule) or
    ``num_levels`` (then ``h0 = epsilon * m**num_levels`` so that the last
    level sits exactly at ``epsilon``).
    """
    scheme = scheme.lower()
    if scheme in ("nsa", "sa"):
        bias, n = nsa_params_for_accuracy(epsilon, beta)
        return n * bias.k, {"k": bias.k, "n": n}
    if scheme in ("ansa", "asa"):
        bias, n = ansa_params_for_accuracy(epsilon)
        return n * bias.k, {"k": bias.k, "n": n}
    if scheme in ("mlsa", "amlsa"):
        if num_levels is not None:
            k0 = BiasParam.from_h(epsilon * m ** num_levels).k
            L = num_levels
        else:
            k0 = _k(h0)
            L = levels_for_accuracy(epsilon, BiasParam(k0), m)
        if scheme == "mlsa":
            sched = schedule_mlsa(BiasParam(k0), m, L, beta)
        else:
            sched = schedule_amlsa(BiasParam(k0), m, L)
        cost = sum(n * k0 * m ** l for l, n in enumerate(sched))
        return int(cost), {"k0": k0, "m": m, "num_levels": L, "schedule": list(sched)}
    raise ValueError(f"unknown scheme {scheme!r}")


def complexity_sweep(epsilons: Sequence[float], beta: float, schemes=("nsa", "ansa", "mlsa", "amlsa"),
                     m: int = 2, h0=None, num_levels: Optional[int] = 3) -> List[dict]:
    rows = []
    for scheme in schemes:
        for eps in epsilons:
            cost, params = predicted_cost(scheme, eps, beta, m, h0, num_levels)
            rows.append({"scheme": scheme, "epsilon": float(eps), "cost": cost, **params})
    return rows


def loglog_slope(x: Sequence[float], y: Sequence[float]) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    x, y = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    if len(x) < 2:
        return float("nan")
    return float(np.polyfit(x, y, 1)[0])
