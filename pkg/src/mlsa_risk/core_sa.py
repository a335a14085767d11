"""Two-time-scale stochastic approximation kernel for VaR and ES.

The VaR iterate follows a Robbins-Monro recursion on the gradient field
``h1`` with step ``gamma_n = gamma1 * (offset + n) ** -beta``; the ES iterate
is a running mean driven by ``h2`` with step ``1 / n``. The running average of
the VaR iterates (Polyak-Ruppert) is carried along in the same state.

Two entry points advance a chain: :func:`nsa_step` (one innovation, pure) and
:func:`advance` (a block of innovations, same arithmetic, much faster). They
produce bitwise identical states.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Tuple

import numpy as np

# An innovation source returns ``count`` i.i.d. loss draws and the number of
# payoff evaluations spent producing them.
Source = Callable[[int], Tuple[np.ndarray, int]]

DEFAULT_CHUNK = 8192


def check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"confidence level must lie in (0, 1), got {alpha}")
    return alpha


@dataclass(frozen=True)
class LearningRate:
    """Power step schedule ``gamma1 * (offset + n) ** -beta``, ``n >= 1``."""

    gamma1: float
    beta: float
    offset: int = 0

    def __post_init__(self):
        if not self.gamma1 > 0:
            raise ValueError("gamma1 must be positive")
        if not 0.5 < self.beta <= 1.0:
            raise ValueError("beta must lie in (1/2, 1]")
        if self.offset < 0 or int(self.offset) != self.offset:
            raise ValueError("offset must be a non-negative integer")

    def __call__(self, n: int) -> float:
        return self.gamma1 * (self.offset + n) ** -self.beta


@dataclass(frozen=True)
class SaState:
    """State of one VaR/ES chain.

    ``pos_sum`` and ``pos_sq_sum`` accumulate ``(x_k - xi_{k-1})^+`` and its
    square along the run; they feed the plug-in estimator of
    ``Var((X - xi*)^+)`` without storing the trajectory.
    """

    xi: float = 0.0
    chi: float = 0.0
    n: int = 0
    xi_bar: float = 0.0
    cost: int = 0
    pos_sum: float = 0.0
    pos_sq_sum: float = 0.0


def h1(xi: float, x: float, alpha: float) -> float:
    """VaR gradient field; ties ``x == xi`` count as exceedances."""
    if x >= xi:
        return 1.0 - 1.0 / (1.0 - alpha)
    return 1.0


def h2(xi: float, chi: float, x: float, alpha: float) -> float:
    return chi - (xi + max(x - xi, 0.0) / (1.0 - alpha))


def nsa_step(state: SaState, x: float, rate: LearningRate, alpha: float) -> SaState:
    """Apply one step of the coupled VaR/ES recursion to innovation ``x``.

    The ES update uses the pre-update VaR iterate.
    """
    n = state.n + 1
    pos = max(x - state.xi, 0.0)
    xi = state.xi - rate(n) * h1(state.xi, x, alpha)
    chi = state.chi - h2(state.xi, state.chi, x, alpha) / n
    return replace(
        state,
        xi=xi,
        chi=chi,
        n=n,
        xi_bar=state.xi_bar + (xi - state.xi_bar) / n,
        pos_sum=state.pos_sum + pos,
        pos_sq_sum=state.pos_sq_sum + pos * pos,
    )


def advance(state: SaState, xs, rate: LearningRate, alpha: float, cost: int = 0) -> SaState:
    """Run the recursion over a block of innovations.

    Arithmetic mirrors :func:`nsa_step` operation for operation so both paths
    agree to the last bit.
    """
    one_minus = 1.0 - alpha
    down = 1.0 - 1.0 / one_minus
    g1, beta, c = rate.gamma1, rate.beta, rate.offset
    xi, chi, xbar, n = state.xi, state.chi, state.xi_bar, state.n
    s1, s2 = state.pos_sum, state.pos_sq_sum
    for x in np.asarray(xs, dtype=float).tolist():
        n += 1
        if x >= xi:
            pos = x - xi
            step = down
        else:
            pos = 0.0
            step = 1.0
        chi = chi - (chi - (xi + pos / one_minus)) / n
        s1 += pos
        s2 += pos * pos
        xi = xi - g1 * (c + n) ** -beta * step
        xbar = xbar + (xi - xbar) / n
    return SaState(xi=xi, chi=chi, n=n, xi_bar=xbar, cost=state.cost + int(cost),
                   pos_sum=s1, pos_sq_sum=s2)


def run_scheme(source: Source, n_steps: int, rate: LearningRate, alpha: float,
               xi0: float = 0.0, chunk: int = DEFAULT_CHUNK) -> SaState:
    """Run ``n_steps`` iterations fed by ``source``.

    ``source(count)`` must return ``(draws, cost)``; draws are consumed in
    blocks of ``chunk`` so the result depends only on the source's stream.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be at least 1")
    alpha = check_alpha(alpha)
    state = SaState(xi=float(xi0))
    left = int(n_steps)
    while left > 0:
        size = min(chunk, left)
        xs, cost = source(size)
        state = advance(state, xs, rate, alpha, cost)
        left -= size
    return state


def mc_var_pos_part(xi_prev, x) -> float:
    """Plug-in variance of ``(x_k - xi_{k-1})^+`` along a trajectory."""
    pos = np.maximum(np.asarray(x, float) - np.asarray(xi_prev, float), 0.0)
    if pos.size < 2:
        raise ValueError("need at least two steps")
    return float(np.mean(pos ** 2) - np.mean(pos) ** 2)


def state_var_pos_part(state: SaState) -> float:
    """Same estimator as :func:`mc_var_pos_part`, read off the accumulators."""
    if state.n < 2:
        raise ValueError("need at least two steps")
    mean = state.pos_sum / state.n
    return state.pos_sq_sum / state.n - mean * mean
