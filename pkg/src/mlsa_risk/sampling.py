"""Nested simulation of a loss written as a conditional expectation.

A :class:`LossModel` supplies outer risk factors ``Y`` and payoff draws
``phi(Y, Z)`` with fresh ``Z``. The biased loss ``X_h`` is the mean of
``K = 1/h`` payoffs over one ``Y``; the multilevel schemes use coarse/fine
pairs that share ``Y`` and the first block of inner draws.

Cost is counted in payoff evaluations. Outer draws are free.
"""
from __future__ import annotations

import abc
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

# Cap on payoff draws materialised at once by the generic summation path.
_INNER_BLOCK = 1 << 20


class LossModel(abc.ABC):
    """Sampler interface for ``X_0 = E[phi(Y, Z) | Y]``.

    Subclasses implement :meth:`sample_outer` and :meth:`sample_payoff`.
    :meth:`payoff_sums` has a generic implementation that calls
    :meth:`sample_payoff` once per inner draw; models whose conditional
    payoff law is known may override it with an exact-in-law shortcut.
    """

    @abc.abstractmethod
    def sample_outer(self, size: int, rng: np.random.Generator) -> np.ndarray:
        """Draw ``size`` independent outer factors ``Y``."""

    @abc.abstractmethod
    def sample_payoff(self, y: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """One payoff ``phi(y_i, Z_i)`` per entry of ``y``, each with fresh ``Z``."""

    def exact_loss(self, y: np.ndarray) -> Optional[np.ndarray]:
        """``E[phi(Y, Z) | Y = y]`` when available in closed form."""
        return None

    def sample_exact(self, size: int, rng: np.random.Generator) -> np.ndarray:
        y = self.sample_outer(size, rng)
        x = self.exact_loss(y)
        if x is None:
            raise NotImplementedError(f"{type(self).__name__} has no exact loss")
        return x

    def payoff_sums(self, y: np.ndarray, count: int, rng: np.random.Generator,
                    squares: bool = False) -> Tuple[np.ndarray, Optional[np.ndarray]]:
        """Sum (and optionally sum of squares) of ``count`` payoffs per ``y``.

        Memory stays bounded regardless of ``count``.
        """
        y = np.asarray(y)
        total = np.zeros(len(y))
        total_sq = np.zeros(len(y)) if squares else None
        rows = len(y)
        per_block = max(1, _INNER_BLOCK // max(rows, 1))
        done = 0
        while done < count:
            reps = min(per_block, count - done)
            yy = np.repeat(y, reps, axis=0) if reps > 1 else y
            phi = np.asarray(self.sample_payoff(yy, rng), float).reshape(rows, reps)
            total += phi.sum(axis=1)
            if squares:
                total_sq += (phi * phi).sum(axis=1)
            done += reps
        return total, total_sq


@dataclass(frozen=True)
class BiasParam:
    """Bias parameter ``h = 1/k`` with ``k`` inner samples."""

    k: int

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ValueError(f"inner sample count must be a positive integer, got {self.k}")

    @property
    def h(self) -> float:
        return 1.0 / self.k

    @classmethod
    def from_h(cls, h: float) -> "BiasParam":
        k = round(1.0 / h)
        if k < 1 or abs(k * h - 1.0) > 1e-12:
            raise ValueError(f"h={h} is not the reciprocal of a positive integer")
        return cls(int(k))


@dataclass(frozen=True)
class CoupledDraw:
    """Coarse/fine loss pairs sharing ``Y`` and the coarse inner draws."""

    coarse: np.ndarray
    fine: np.ndarray
    cost: int


def sample_biased(model: LossModel, bias, rng: np.random.Generator,
                  size: int = 1) -> Tuple[np.ndarray, int]:
    """``size`` i.i.d. draws of ``X_h`` and their payoff cost ``size * k``."""
    k = bias.k if isinstance(bias, BiasParam) else BiasParam(bias).k
    y = model.sample_outer(size, rng)
    sums, _ = model.payoff_sums(y, k, rng)
    return sums / k, size * k


def sample_coupled(model: LossModel, k0: int, m: int, level: int,
                   rng: np.random.Generator, size: int = 1) -> CoupledDraw:
    """Perfectly correlated pairs ``(X_{h_{l-1}}, X_{h_l})`` for level ``l >= 1``.

    The coarse loss averages ``k0 * m**(l-1)`` payoffs; the fine loss adds
    ``k0 * m**(l-1) * (m-1)`` further payoffs over the same ``Y`` and averages
    the union, i.e. ``fine = coarse/m + extra_sum / (k0 * m**l)``.
    """
    if level < 1:
        raise ValueError("coupled draws need level >= 1")
    if m < 2:
        raise ValueError("refinement factor must be at least 2")
    if k0 < 1:
        raise ValueError("k0 must be at least 1")
    n_coarse = k0 * m ** (level - 1)
    n_fine = n_coarse * m
    y = model.sample_outer(size, rng)
    s_coarse, _ = model.payoff_sums(y, n_coarse, rng)
    s_extra, _ = model.payoff_sums(y, n_fine - n_coarse, rng)
    return CoupledDraw(coarse=s_coarse / n_coarse, fine=(s_coarse + s_extra) / n_fine,
                       cost=size * n_fine)


@dataclass(frozen=True)
class CouplingStats:
    mean: float
    variance: float
    skewness: float
    n_pairs: int
    cost: int


def coupling_diagnostic(model: LossModel, k0: int, m: int, level: int,
                        n_pairs: int, rng: np.random.Generator) -> CouplingStats:
    """Empirical moments of ``G_l = h_l^{-1/2} (X_{h_l} - X_{h_{l-1}})``.

    For large ``l`` the law of ``G_l`` approaches a centred Gaussian with
    variance ``(m - 1) * E[Var(phi | Y)]``.
    """
    if n_pairs < 2:
        raise ValueError("n_pairs must be at least 2")
    draw = sample_coupled(model, k0, m, level, rng, n_pairs)
    h = 1.0 / (k0 * m ** level)
    g = (draw.fine - draw.coarse) / np.sqrt(h)
    var = float(np.var(g, ddof=1))
    centred = g - g.mean()
    m2 = float(np.mean(centred ** 2))
    skew = float(np.mean(centred ** 3) / m2 ** 1.5) if m2 > 0 else 0.0
    return CouplingStats(mean=float(g.mean()), variance=var, skewness=skew,
                         n_pairs=int(n_pairs), cost=draw.cost)


class CountingModel(LossModel):
    """Wraps a model and counts every payoff it evaluates.

    Forces the generic per-draw summation path, so the count is the true
    number of ``phi`` evaluations.
    """

    def __init__(self, inner: LossModel):
        self.inner = inner
        self.payoff_calls = 0

    def sample_outer(self, size, rng):
        return self.inner.sample_outer(size, rng)

    def sample_payoff(self, y, rng):
        out = self.inner.sample_payoff(y, rng)
        self.payoff_calls += int(np.size(out))
        return out

    def exact_loss(self, y):
        return self.inner.exact_loss(y)
