"""Replicated runs, Gaussian fits and 95% confidence ellipses.

Replication ``i`` seeds its own Philox stream from ``(master_seed, i)``, so the
output matrix does not depend on the worker count or on completion order.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from . import rng as rngmod
from .core_sa import DEFAULT_CHUNK, state_var_pos_part
from .sampling import LossModel
from .schemes import ScalingSpec, SchemeConfig, run_estimate
from .theory import check_cov2, es_variance_amlsa, es_variance_mlsa

CHI2_2_95 = 5.991464547


class ReplicationError(RuntimeError):
    def __init__(self, index: int, cause: BaseException):
        super().__init__(f"replication {index} failed: {cause!r}")
        self.index = index


@dataclass(frozen=True)
class Replications:
    """Per-replication outputs, in replication order."""

    raw: np.ndarray          # R x 2 (VaR, ES) estimates
    errors: np.ndarray       # R x 2 renormalised errors
    cost: np.ndarray         # R payoff counts
    var_pos: np.ndarray      # R plug-in Var((X - xi_{k-1})^+) along the level-0 chain
    target: Tuple[float, float]
    scaling: ScalingSpec
    master_seed: int

    @property
    def r(self) -> int:
        return len(self.raw)


def _one(args):
    model, cfg, master_seed, namespace, index, chunk = args
    try:
        est = run_estimate(model, cfg, rngmod.seed_sequence(master_seed, *namespace, index), chunk)
    except Exception as exc:  # surfaced with its index by the caller
        return index, exc
    vp = state_var_pos_part(est.per_level[0].fine)
    return index, (est.var, est.es, est.cost, vp)


def run_replications(model: LossModel, cfg: SchemeConfig, target: Sequence[float], r: int,
                     master_seed: int = 0, workers: int = 1,
                     scaling: Optional[ScalingSpec] = None,
                     chunk: int = DEFAULT_CHUNK, namespace: tuple = ()) -> Replications:
    """Run ``r`` independent estimates and renormalise their errors.

    ``workers > 1`` spreads replications over processes; ``workers <= 0``
    uses every available CPU. ``namespace`` keys are inserted between the
    master seed and the replication index to keep separate studies apart.
    """
    if r < 2:
        raise ValueError("need at least two replications")
    scaling = scaling or cfg.scaling()
    jobs = [(model, cfg, int(master_seed), tuple(namespace), i, chunk) for i in range(r)]
    if workers <= 0:
        workers = os.cpu_count() or 1
    if workers == 1:
        results = [_one(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_one, jobs, chunksize=max(1, r // (4 * workers))))
    out = np.empty((r, 4))
    for index, res in sorted(results, key=lambda t: t[0]):
        if isinstance(res, BaseException):
            raise ReplicationError(index, res) from res
        out[index] = res
    raw = out[:, :2]
    target = (float(target[0]), float(target[1]))
    return Replications(raw=raw, errors=scaling.apply(raw, target), cost=out[:, 2].astype(np.int64),
                        var_pos=out[:, 3], target=target, scaling=scaling,
                        master_seed=int(master_seed))


@dataclass(frozen=True)
class GaussianFit:
    mu: np.ndarray
    sigma: np.ndarray
    r: int

    def scaled(self, factors) -> "GaussianFit":
        f = np.asarray(factors, float)
        return GaussianFit(self.mu * f, self.sigma * np.outer(f, f), self.r)

    def to_dict(self) -> dict:
        return {"mu": self.mu.tolist(), "sigma": self.sigma.tolist(), "r": self.r}


def fit_gaussian(samples) -> GaussianFit:
    x = np.asarray(samples, float)
    if x.ndim != 2 or x.shape[1] != 2:
        raise ValueError("expected an R x 2 array")
    if len(x) < 2:
        raise ValueError("need at least two samples")
    return GaussianFit(x.mean(axis=0), np.cov(x, rowvar=False, ddof=1), len(x))


@dataclass(frozen=True)
class Ellipse:
    center: np.ndarray
    semi_axes: Tuple[float, float]
    angle: float

    def to_dict(self) -> dict:
        return {"center": self.center.tolist(), "semi_axes": list(self.semi_axes),
                "angle": self.angle}

    def boundary(self, n: int = 200) -> np.ndarray:
        t = np.linspace(0.0, 2 * np.pi, n)
        c, s = math.cos(self.angle), math.sin(self.angle)
        a, b = self.semi_axes
        pts = np.stack([a * np.cos(t), b * np.sin(t)])
        return (np.array([[c, -s], [s, c]]) @ pts).T + self.center


def ellipse_95(fit: GaussianFit) -> Ellipse:
    """95% level set of the fitted Gaussian.

    Semi-axes are ``sqrt(lambda_i * q)`` with ``q`` the chi-square(2) 95%
    quantile, largest first; the angle is that of the major axis, in
    ``(-pi/2, pi/2]``.
    """
    sigma = check_cov2(fit.sigma)
    lam, vec = np.linalg.eigh(sigma)
    lam = np.clip(lam[::-1], 0.0, None)
    major = vec[:, -1]
    angle = math.atan2(major[1], major[0])
    if angle <= -math.pi / 2:
        angle += math.pi
    elif angle > math.pi / 2:
        angle -= math.pi
    axes = tuple(float(math.sqrt(v * CHI2_2_95)) for v in lam)
    return Ellipse(np.asarray(fit.mu, float).copy(), axes, float(angle))


def normality_report(samples, bins: int = 50) -> list:
    """Skewness, excess kurtosis and a histogram for each column."""
    x = np.asarray(samples, float)
    if x.ndim == 1:
        x = x[:, None]
    report = []
    for col in x.T:
        if np.ptp(col) == 0:
            report.append({"degenerate": True, "skewness": None, "excess_kurtosis": None,
                           "counts": [len(col)], "edges": [float(col[0]), float(col[0])]})
            continue
        counts, edges = np.histogram(col, bins=bins)
        report.append({"degenerate": False, "skewness": float(stats.skew(col)),
                       "excess_kurtosis": float(stats.kurtosis(col)),
                       "counts": counts.tolist(), "edges": edges.tolist()})
    return report


def normality_ok(report: list, skew_tol: float = 0.25, kurt_tol: float = 0.6) -> bool:
    return all(not m["degenerate"] and abs(m["skewness"]) < skew_tol
               and abs(m["excess_kurtosis"]) < kurt_tol for m in report)


def mc_es_variance(reps: Replications, alpha: float) -> float:
    """ES variance factor from the chains' own plug-in ``Var((X - xi)^+)``."""
    return float(np.mean(reps.var_pos) / (1.0 - alpha) ** 2)


def es_variance_ci(fit: GaussianFit, level: float = 0.95) -> Tuple[float, float]:
    return variance_ci(fit.sigma[1, 1], fit.r, level)


def variance_ci(var: float, r: int, level: float = 0.95) -> Tuple[float, float]:
    """Chi-square confidence interval for a Gaussian variance."""
    lo_q, hi_q = stats.chi2.ppf([(1 + level) / 2, (1 - level) / 2], r - 1)
    return float((r - 1) * var / lo_q), float((r - 1) * var / hi_q)


def _num(x: float):
    return float(x) if math.isfinite(x) else None


@dataclass
class CltSummary:
    scheme: str
    config: dict
    target: Tuple[float, float]
    fit: GaussianFit
    ellipse: Ellipse
    normality: list
    theory_sigma: Optional[np.ndarray]
    es_variance_fitted: float
    es_variance_mc: float
    mean_cost: float
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "scheme": self.scheme, "config": self.config, "target": list(self.target),
            "fit": self.fit.to_dict(), "ellipse": self.ellipse.to_dict(),
            "normality": [{k: v for k, v in m.items() if k not in ("counts", "edges")}
                          for m in self.normality],
            "histograms": [{"counts": m["counts"], "edges": m["edges"]} for m in self.normality],
            "theory_sigma": None if self.theory_sigma is None else np.asarray(self.theory_sigma).tolist(),
            "es_variance": {"fitted": self.es_variance_fitted, "mc": _num(self.es_variance_mc),
                            "ratio": _num(self.es_variance_fitted / self.es_variance_mc)
                            if self.es_variance_mc > 0 else None},
            "mean_cost": self.mean_cost, **self.extra,
        }


def mc_es_variance_ml(reps: Replications, cfg: SchemeConfig, var_indG: float) -> float:
    """Multilevel ES variance factor with the level-0 chains' plug-in variance."""
    ml = cfg.ml
    var_h0 = float(np.mean(reps.var_pos))
    if cfg.scheme == "amlsa":
        return es_variance_amlsa(ml.h0, ml.m, var_h0, var_indG, cfg.alpha)
    return es_variance_mlsa(cfg.rate.beta, ml.h0, ml.m, var_h0, var_indG, cfg.alpha)


def clt_study(reps: Replications, cfg: SchemeConfig, theory_sigma=None,
              var_indG: Optional[float] = None) -> CltSummary:
    """Fit, ellipse, normality diagnostics and the ES variance comparison.

    Multilevel schemes need ``var_indG`` for the Monte Carlo ES variance;
    without it that entry is reported as NaN.
    """
    fit = fit_gaussian(reps.errors)
    if cfg.multilevel:
        es_mc = mc_es_variance_ml(reps, cfg, var_indG) if var_indG is not None else float("nan")
    else:
        # Var(chi_n) ~ Var((X - xi)^+) / ((1 - alpha)^2 n), then renormalised.
        es_mc = mc_es_variance(reps, cfg.alpha) * float(reps.scaling.factors[1]) ** 2 / cfg.n_steps
    return CltSummary(
        scheme=cfg.scheme, config=cfg.to_dict(), target=reps.target, fit=fit,
        ellipse=ellipse_95(fit), normality=normality_report(reps.errors),
        theory_sigma=None if theory_sigma is None else check_cov2(theory_sigma),
        es_variance_fitted=float(fit.sigma[1, 1]), es_variance_mc=es_mc,
        mean_cost=float(reps.cost.mean()))
