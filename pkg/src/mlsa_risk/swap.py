"""Short position on a par swap written on a Bachelier rate.

The rate follows ``dS = kappa S dt + sigma dW``. Coupons ``dT_i (S_{T_{i-1}} - K)``
are paid at ``T_1 < ... < T_d``, the strike makes the swap par at inception and
the nominal makes each leg worth ``nominal_target``. The loss at the short
horizon ``delta`` is exactly Gaussian, ``X_0 ~ eta * N(0, 1)``, which gives
closed-form VaR and ES and an exact sampler to benchmark the nested schemes.

The nested representation is ``phi(y, z) = a * y + sum_j b_j z_j`` with
``Y = s_y U_0`` and ``Z_j = s_j U_j``; it is linear in ``Z`` so the conditional
payoff variance does not depend on ``Y``.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy.stats import norm

from .core_sa import check_alpha
from .sampling import LossModel


def _ou_scale(t: float, kappa: float) -> float:
    """Std of ``int_0^t exp(-kappa s) dW_s``, with the kappa -> 0 limit."""
    if kappa == 0:
        return float(np.sqrt(t))
    return float(np.sqrt(-np.expm1(-2.0 * kappa * t) / (2.0 * kappa)))


def quarterly_schedule(maturity_years: float = 1.0, months: int = 3) -> Tuple[float, ...]:
    """Coupon times under 30/360: every period is ``months / 12`` years."""
    n = int(round(maturity_years * 12 / months))
    return tuple((i + 1) * months * 30 / 360 for i in range(n))


@dataclass(frozen=True)
class SwapParams:
    s0: float = 1.0
    r: float = 0.02
    kappa: float = 0.12
    sigma: float = 0.20
    coupon_times: Tuple[float, ...] = field(default_factory=quarterly_schedule)
    horizon: float = 7 / 360
    alpha: float = 0.85
    nominal_target: float = 100.0

    def __post_init__(self):
        times = tuple(float(t) for t in self.coupon_times)
        object.__setattr__(self, "coupon_times", times)
        if not times:
            raise ValueError("empty coupon schedule")
        if any(b <= a for a, b in zip((0.0,) + times, times)):
            raise ValueError("coupon times must be positive and strictly increasing")
        if not 0.0 < self.horizon < times[0]:
            raise ValueError("horizon must lie strictly before the first coupon")
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        check_alpha(self.alpha)

    @property
    def maturity(self) -> float:
        return self.coupon_times[-1]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["coupon_times"] = list(self.coupon_times)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SwapParams":
        d = dict(d)
        if "coupon_times" in d:
            d["coupon_times"] = tuple(d["coupon_times"])
        return cls(**d)


PAPER_SWAP = SwapParams()


def _legs(p: SwapParams):
    t = np.asarray(p.coupon_times)
    t_prev = np.concatenate([[0.0], t[:-1]])
    dt = t - t_prev
    disc = np.exp(-p.r * t) * dt
    weights = disc * np.exp(p.kappa * t_prev)
    return t, t_prev, dt, disc, weights


def par_strike(p: SwapParams) -> float:
    """Strike that sets the swap value to zero at inception."""
    _, _, _, disc, weights = _legs(p)
    if disc.sum() == 0:
        raise ValueError("discounted accrual sum vanishes")
    return float(p.s0 * weights.sum() / disc.sum())


@dataclass(frozen=True)
class SwapDerived:
    strike: float
    nominal: float
    eta: float
    s2_inner: float
    y_scale: float
    y_coef: float
    z_coefs: Tuple[float, ...]
    z_scales: Tuple[float, ...]


def derive(p: SwapParams) -> SwapDerived:
    t, _, dt, disc, weights = _legs(p)
    strike = par_strike(p)
    nominal = p.nominal_target / (strike * disc.sum())
    amp = nominal * p.sigma
    y_scale = _ou_scale(p.horizon, p.kappa)
    y_coef = amp * weights[1:].sum()
    # Z_1 covers (delta, T_1]; Z_j covers (T_{j-1}, T_j] for 2 <= j <= d-1.
    d = len(t)
    z_scales = []
    z_coefs = []
    for j in range(1, d):
        span = t[0] - p.horizon if j == 1 else dt[j - 1]
        z_scales.append(_ou_scale(span, p.kappa))
        z_coefs.append(amp * weights[j:].sum())
    z_scales = np.array(z_scales)
    z_coefs = np.array(z_coefs)
    s2 = float(np.sum((z_coefs * z_scales) ** 2))
    return SwapDerived(strike=strike, nominal=float(nominal), eta=float(y_coef * y_scale),
                       s2_inner=s2, y_scale=y_scale, y_coef=float(y_coef),
                       z_coefs=tuple(z_coefs.tolist()), z_scales=tuple(z_scales.tolist()))


def leg_values(p: SwapParams) -> Tuple[float, float]:
    """Inception values of the fixed and floating legs."""
    _, _, _, disc, weights = _legs(p)
    der = derive(p)
    fixed = der.nominal * der.strike * disc.sum()
    floating = der.nominal * p.s0 * weights.sum()
    return float(fixed), float(floating)


def analytic_var_es(p: SwapParams) -> Tuple[float, float]:
    """Closed-form ``(VaR, ES)`` of the Gaussian loss ``eta * N(0, 1)``."""
    alpha = check_alpha(p.alpha)
    eta = derive(p).eta
    if not eta > 0:
        raise ValueError("degenerate loss: eta must be positive")
    return gaussian_var_es(eta, alpha)


def gaussian_var_es(scale: float, alpha: float) -> Tuple[float, float]:
    z = norm.ppf(alpha)
    return float(scale * z), float(scale / (1.0 - alpha) * norm.pdf(z))


def sample_exact(p: SwapParams, rng: np.random.Generator, size: int = 1) -> np.ndarray:
    return derive(p).eta * rng.standard_normal(size)


class SwapLossModel(LossModel):
    """Nested sampler for the swap loss.

    With ``aggregate=True`` the sum of ``count`` payoffs over one ``Y`` is
    drawn in one shot from its exact conditional law: Gaussian with mean
    ``count * a * y`` and variance ``count * s2``, plus the independent
    chi-square residual for the sum of squares. This is equal in law to the
    per-draw path and its cost is still accounted as ``count`` payoffs.
    """

    def __init__(self, params: SwapParams = PAPER_SWAP, aggregate: bool = True):
        self.params = params
        self.derived = derive(params)
        self.aggregate = aggregate
        self._zc = np.asarray(self.derived.z_coefs) * np.asarray(self.derived.z_scales)

    def __repr__(self):
        return f"SwapLossModel(aggregate={self.aggregate})"

    def __getstate__(self):
        return {"params": self.params, "aggregate": self.aggregate}

    def __setstate__(self, state):
        self.__init__(state["params"], state["aggregate"])

    def sample_outer(self, size, rng):
        return self.derived.y_scale * rng.standard_normal(size)

    def sample_payoff(self, y, rng):
        y = np.asarray(y, float)
        u = rng.standard_normal((len(y), len(self._zc)))
        return self.derived.y_coef * y + u @ self._zc

    def exact_loss(self, y):
        return self.derived.y_coef * np.asarray(y, float)

    def payoff_sums(self, y, count, rng, squares=False):
        if not self.aggregate:
            return super().payoff_sums(y, count, rng, squares)
        y = np.asarray(y, float)
        s2 = self.derived.s2_inner
        mean = self.derived.y_coef * y + np.sqrt(s2 / count) * rng.standard_normal(len(y))
        total = count * mean
        if not squares:
            return total, None
        resid = s2 * rng.chisquare(count - 1, len(y)) if count > 1 else np.zeros(len(y))
        return total, count * mean * mean + resid

    def biased_scale(self, h: float) -> float:
        """Std of ``X_h``: ``sqrt(eta^2 + h * s2)``."""
        return float(np.sqrt(self.derived.eta ** 2 + h * self.derived.s2_inner))


def as_loss_model(p: SwapParams, aggregate: bool = True) -> SwapLossModel:
    return SwapLossModel(p, aggregate)


def density_at(p: SwapParams, x: float) -> float:
    eta = derive(p).eta
    return float(norm.pdf(x / eta) / eta)


def pos_part_moments(scale: float, xi: float) -> Tuple[float, float]:
    """Mean and variance of ``(X - xi)^+`` for ``X ~ N(0, scale^2)``."""
    z = xi / scale
    tail = norm.sf(z)
    m1 = scale * norm.pdf(z) - xi * tail
    m2 = (scale ** 2 + xi ** 2) * tail - xi * scale * norm.pdf(z)
    return float(m1), float(m2 - m1 * m1)


def bias_function(p: SwapParams, xi) -> np.ndarray:
    """First-order coefficient ``v`` in ``F_{X_h} - F_{X_0} = v h + o(h)``."""
    der = derive(p)
    xi = np.asarray(xi, float)
    return -(der.s2_inner * xi) / (2.0 * der.eta ** 3) * norm.pdf(xi / der.eta)


def bias_integral(p: SwapParams, xi: float) -> float:
    """``int_xi^inf v``; closed form since ``int x pdf(x/eta) dx = eta^2 pdf``."""
    der = derive(p)
    return float(-der.s2_inner * norm.pdf(xi / der.eta) / (2.0 * der.eta))


def biased_var_es(p: SwapParams, h: float) -> Tuple[float, float]:
    """Exact minimisers ``(xi^h*, chi^h*)`` for the Gaussian ``X_h``."""
    der = derive(p)
    return gaussian_var_es(float(np.sqrt(der.eta ** 2 + h * der.s2_inner)), p.alpha)


def summary(p: SwapParams) -> dict:
    der = derive(p)
    xi, chi = analytic_var_es(p)
    return {"strike": der.strike, "nominal": der.nominal, "eta": der.eta,
            "s2_inner": der.s2_inner, "var": xi, "es": chi}
