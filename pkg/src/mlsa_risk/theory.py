"""Asymptotic covariance evaluators and their plug-in estimators.

The four ``sigma_*`` functions return the limiting covariance of the
renormalised (VaR, ES) error of the nested, averaged nested, multilevel and
averaged multilevel schemes. Their inputs are gathered in
:class:`ModelQuantities`; for the swap model every entry has a closed form
(:func:`swap_quantities`), for other models the Monte Carlo estimators below
fill the gaps.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy import integrate
from scipy.stats import norm

from .core_sa import LearningRate, SaState, check_alpha, mc_var_pos_part, state_var_pos_part
from .sampling import LossModel, sample_coupled
from . import swap as swapmod

__all__ = [
    "ModelQuantities", "check_cov2", "sigma_nsa", "sigma_ansa", "sigma_mlsa", "sigma_amlsa",
    "mc_var_pos_part", "state_var_pos_part", "xi_path", "GQuantities", "mc_g_quantities",
    "mc_abs_g_density", "es_variance_mlsa", "es_variance_amlsa", "bias_limit", "swap_quantities", "swap_g_closed_form",
]

NAN = float("nan")


@dataclass(frozen=True)
class ModelQuantities:
    f_at_xistar: float
    xi_star: float
    chi_star: float
    mean_pos_part: float
    var_pos_part: float
    var_pos_part_h0: float = NAN
    e_absG_fG: float = NAN
    var_indG: float = NAN
    v_at_xistar: float = NAN
    v_integral: float = NAN
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.f_at_xistar > 0:
            raise ValueError("density at the VaR must be positive")
        for name in ("var_pos_part", "var_pos_part_h0", "var_indG"):
            v = getattr(self, name)
            if v < 0:
                raise ValueError(f"{name} must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)


def check_cov2(sigma, tol: float = 1e-12) -> np.ndarray:
    """Validate a 2x2 covariance: symmetric and positive semidefinite."""
    s = np.asarray(sigma, float)
    if s.shape != (2, 2):
        raise ValueError("expected a 2x2 matrix")
    if not np.allclose(s, s.T, rtol=0, atol=tol * max(1.0, np.abs(s).max())):
        raise ValueError("matrix is not symmetric")
    if np.linalg.eigvalsh(s).min() < -tol * max(1.0, np.abs(s).max()):
        raise ValueError("matrix is not positive semidefinite")
    return s


def _var_denominator(beta: float, gamma1: float, f: float, alpha: float) -> float:
    if not 0.5 < beta <= 1.0:
        raise ValueError("beta must lie in (1/2, 1]")
    d = 2.0 * f - ((1.0 - alpha) / gamma1 if beta == 1.0 else 0.0)
    if not d > 0:
        raise ValueError("gamma1 too small for beta = 1: VaR variance is unbounded")
    return d


def sigma_nsa(beta: float, gamma1: float, q: ModelQuantities, alpha: float) -> np.ndarray:
    alpha = check_alpha(alpha)
    f = q.f_at_xistar
    var = alpha * gamma1 / _var_denominator(beta, gamma1, f, alpha)
    cross = alpha * (q.chi_star - q.xi_star) / f if beta == 1.0 else 0.0
    es = q.var_pos_part / (1 - alpha) ** 2
    return np.array([[var, cross], [cross, es]])


def sigma_ansa(q: ModelQuantities, alpha: float) -> np.ndarray:
    alpha = check_alpha(alpha)
    f = q.f_at_xistar
    var = alpha * (1 - alpha) / f ** 2
    cross = alpha / (1 - alpha) * q.mean_pos_part / f
    es = q.var_pos_part / (1 - alpha) ** 2
    return np.array([[var, cross], [cross, es]])


def sigma_mlsa(beta: float, gamma1: float, h0: float, m: int, q: ModelQuantities,
               alpha: float) -> np.ndarray:
    alpha = check_alpha(alpha)
    f = q.f_at_xistar
    var = gamma1 * q.e_absG_fG / ((1 - alpha) * _var_denominator(beta, gamma1, f, alpha))
    es = es_variance_mlsa(beta, h0, m, q.var_pos_part_h0, q.var_indG, alpha)
    return np.array([[var, 0.0], [0.0, es]])


def es_variance_mlsa(beta: float, h0: float, m: int, var_pos_h0: float, var_indG: float,
                     alpha: float) -> float:
    a = (2 * beta - 1) / (2 * (1 + beta))
    ma = m ** a - 1.0
    return float(h0 ** a * ma ** (1 / beta) / (1 - alpha) ** 2
                 * (var_pos_h0 / h0 / m ** (a / beta) + var_indG / ma))


def es_variance_amlsa(h0: float, m: int, var_pos_h0: float, var_indG: float,
                      alpha: float) -> float:
    shrink = 1.0 - m ** -0.25
    return float((h0 ** -0.375 * math.sqrt(shrink) * var_pos_h0
                  + h0 ** 0.25 * var_indG / m ** 0.25) / (1 - alpha) ** 2)


def sigma_amlsa(h0: float, m: int, q: ModelQuantities, alpha: float) -> np.ndarray:
    alpha = check_alpha(alpha)
    shrink = 1.0 - m ** -0.25
    var = q.e_absG_fG / ((1 - alpha) ** 2 * shrink)
    es = es_variance_amlsa(h0, m, q.var_pos_part_h0, q.var_indG, alpha)
    return np.array([[var, 0.0], [0.0, es]])


def bias_limit(q: ModelQuantities) -> Tuple[float, float]:
    """First-order bias coefficients of ``(xi^h*, chi^h*)`` in ``h``.

    ``xi^h* - xi^0* ~ -v(xi*)/f * h`` and ``chi^h* - chi^0* ~ -h int v / (1 - alpha)``.
    The ES coefficient needs alpha, recorded in the provenance as ``alpha``.
    """
    alpha = q.provenance.get("alpha")
    if alpha is None:
        raise ValueError("quantities must record alpha in their provenance")
    return (-q.v_at_xistar / q.f_at_xistar, -q.v_integral / (1 - alpha))


# -- Monte Carlo estimators ---------------------------------------------------

def xi_path(xs, rate: LearningRate, alpha: float, xi0: float = 0.0) -> np.ndarray:
    """Pre-update VaR iterates ``xi_{k-1}`` of a chain fed by ``xs``."""
    inv = 1.0 / (1.0 - alpha)
    g1, beta, c = rate.gamma1, rate.beta, rate.offset
    out = []
    xi = float(xi0)
    for n, x in enumerate(np.asarray(xs, float).tolist(), start=1):
        out.append(xi)
        step = 1.0 - inv if x >= xi else 1.0
        xi = xi - g1 * (c + n) ** -beta * step
    return np.array(out)


@dataclass(frozen=True)
class GQuantities:
    var_indG: float
    g_scale2: float
    n_samples: int
    cost: int


def mc_g_quantities(model: LossModel, k_last: int, m: int, n_samples: int,
                    rng: np.random.Generator, alpha: float,
                    rate: Optional[LearningRate] = None, xi0: float = 0.0) -> GQuantities:
    """Plug-in estimates of ``Var(1_{X_0 > xi*} G)`` and ``E[G^2]``.

    ``G`` is replaced by ``((m-1) * inner sample variance)^(1/2) * N(0,1)`` at
    the finest bias ``1/k_last``; the indicator uses the VaR chain run on the
    same finest-level losses.
    """
    if n_samples < 2:
        raise ValueError("n_samples must be at least 2")
    alpha = check_alpha(alpha)
    rate = rate or LearningRate(1.0, 0.9)
    y = model.sample_outer(n_samples, rng)
    sums, sq = model.payoff_sums(y, k_last, rng, squares=True)
    x = sums / k_last
    inner_var = np.maximum(sq / k_last - x * x, 0.0)
    g = np.sqrt((m - 1) * inner_var) * rng.standard_normal(n_samples)
    ind_g = (x > xi_path(x, rate, alpha, xi0)) * g
    var_ind = float(np.mean(ind_g ** 2) - np.mean(ind_g) ** 2)
    return GQuantities(var_indG=var_ind, g_scale2=float((m - 1) * inner_var.mean()),
                       n_samples=int(n_samples), cost=int(n_samples * k_last))


def mc_abs_g_density(model: LossModel, k0: int, m: int, level: int, xi: float,
                     n_pairs: int, rng: np.random.Generator) -> float:
    """``h_l^{-1/2} E|1_{X_{h_l} > xi} - 1_{X_{h_{l-1}} > xi}|``.

    Converges to ``E[|G| f_G(xi)]`` as the level grows, which makes it a
    model-agnostic estimator of that entry.
    """
    draw = sample_coupled(model, k0, m, level, rng, n_pairs)
    flips = np.abs((draw.fine > xi).astype(float) - (draw.coarse > xi))
    return float(flips.mean() * math.sqrt(k0 * m ** level))


# -- closed forms for the swap model -----------------------------------------

def swap_g_closed_form(p: "swapmod.SwapParams", m: int, xi: float,
                       k0: Optional[int] = None, level: Optional[int] = None) -> Tuple[float, float]:
    """``E[|G| f_G(xi)]`` and ``Var(1_{X_0 > xi} G)`` for the swap.

    Without ``k0``/``level`` the limit objects are returned: ``G`` is
    Gaussian with variance ``(m-1) s2`` and independent of ``X_0``. With them,
    the finite-level conditional density of ``X_{h_{l-1}}`` given ``G_l`` is
    integrated against ``|g|``; ``(X_{h_{l-1}}, G_l)`` is jointly Gaussian with
    covariance ``-(m-1) s2 sqrt(h_l)``.
    """
    der = swapmod.derive(p)
    s2, eta = der.s2_inner, der.eta
    var_g = (m - 1) * s2
    tail = norm.sf(xi / eta)
    var_ind = tail * var_g
    if k0 is None or level is None:
        return float(math.sqrt(var_g) * math.sqrt(2 / math.pi) * norm.pdf(xi / eta) / eta), float(var_ind)
    h_l = 1.0 / (k0 * m ** level)
    var_x = eta ** 2 + s2 * h_l * m
    cov = -(m - 1) * s2 * math.sqrt(h_l)
    cond_sd = math.sqrt(var_x - cov ** 2 / var_g)
    sd_g = math.sqrt(var_g)

    def integrand(u):
        g = sd_g * u
        return abs(g) * norm.pdf(xi, loc=cov / var_g * g, scale=cond_sd) * norm.pdf(u)

    val, _ = integrate.quad(integrand, -12, 12, points=[0.0], limit=200, epsabs=1e-13)
    return float(val), float(var_ind)


def swap_quantities(p: "swapmod.SwapParams", h0: Optional[float] = None, m: int = 2) -> ModelQuantities:
    """Every entry of :class:`ModelQuantities` for the swap, in closed form."""
    der = swapmod.derive(p)
    alpha = p.alpha
    xi, chi = swapmod.analytic_var_es(p)
    f = swapmod.density_at(p, xi)
    mean_pos, var_pos = swapmod.pos_part_moments(der.eta, xi)
    var_h0 = NAN
    if h0 is not None:
        scale = math.sqrt(der.eta ** 2 + h0 * der.s2_inner)
        var_h0 = swapmod.pos_part_moments(scale, scale * norm.ppf(alpha))[1]
    e_abs, var_ind = swap_g_closed_form(p, m, xi)
    prov = {"alpha": alpha, "m": m, "h0": h0, "source": "closed-form Gaussian",
            "var_pos_part_h0": "closed-form" if h0 is not None else "unset"}
    return ModelQuantities(
        f_at_xistar=f, xi_star=xi, chi_star=chi, mean_pos_part=mean_pos, var_pos_part=var_pos,
        var_pos_part_h0=var_h0, e_absG_fG=e_abs, var_indG=var_ind,
        v_at_xistar=float(swapmod.bias_function(p, xi)), v_integral=swapmod.bias_integral(p, xi),
        provenance=prov)
