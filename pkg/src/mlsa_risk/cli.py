"""Command line front end.

    mlsa-risk analytic   --preset paper-swap
    mlsa-risk estimate   --preset paper-swap --scheme mlsa --seed 3
    mlsa-risk clt-study  --config run.json --workers 4 --out runs/nsa
    mlsa-risk complexity --preset paper-swap --out runs/cost

Every command writes a directory holding the resolved ``config.json`` and a
``summary.json``; ``clt-study`` adds ``replications.csv`` and ``complexity``
adds ``complexity.csv``. Failures exit nonzero with a JSON error on stderr.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
import time
import warnings
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from . import harness, mlsa, swap, theory
from . import rng as rngmod
from .core_sa import LearningRate
from .sampling import sample_biased
from .schemes import SCHEMES, SchemeConfig, run_estimate

PRESETS = ("paper-swap",)

# Stream keys far above any replication index.
_REFERENCE_STREAM = 1 << 40
_G_STREAM = (1 << 40) + 1
_PILOT_STREAM = (1 << 40) + 2

# Step sizes used for the case study, per scheme.
_PAPER_RATES = {
    "sa": (1.0, 0.9, 0.0), "asa": (1.0, 0.9, 0.0),
    "nsa": (0.1, 0.9, 250.0), "ansa": (0.1, 0.9, 250.0),
    "mlsa": (0.1, 0.9, 1500.0), "amlsa": (0.1, 0.9, 1500.0),
}


@dataclass
class RunConfig:
    model: dict = field(default_factory=dict)
    scheme: str = "nsa"
    epsilon: Optional[float] = 1 / 256
    k: Optional[int] = None
    n_steps: Optional[int] = None
    h0: Optional[float] = None
    m: int = 2
    num_levels: Optional[int] = None
    gamma1: float = 1.0
    beta: float = 0.9
    offset: float = 0.0
    xi0: object = 0.0
    pilot_size: int = 10_000
    replications: int = 100
    seed: int = 0
    workers: int = 1
    out: str = "run"
    target: object = "auto"
    reference_runs: int = 200
    reference_steps: int = 100_000
    reference_rate: List[float] = field(default_factory=lambda: [1.0, 0.9, 0.0])
    g_samples: int = 100_000
    epsilons: List[float] = field(default_factory=lambda: [2.0 ** -j for j in range(4, 9)])
    preset: Optional[str] = None

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.preset is not None and self.preset not in PRESETS:
            raise ValueError(f"unknown preset {self.preset!r}")
        if not 0.5 < self.beta <= 1.0:
            raise ValueError("beta must lie in (1/2, 1]")
        if self.scheme == "amlsa" and not 8 / 9 < self.beta < 1:
            warnings.warn("the averaged multilevel CLT is stated for beta in (8/9, 1)")
        if self.gamma1 <= 0:
            raise ValueError("gamma1 must be positive")
        if self.epsilon is not None and not 0 < self.epsilon < 1:
            raise ValueError("epsilon must lie in (0, 1)")
        if self.scheme in ("mlsa", "amlsa") and self.num_levels is None:
            if self.h0 is None or self.epsilon is None:
                raise ValueError("multilevel schemes need h0 and epsilon, or num_levels")
            if not self.h0 > self.epsilon:
                raise ValueError("multilevel schemes need h0 > epsilon")
        if self.epsilon is None and self.scheme not in ("mlsa", "amlsa") and self.k is None:
            raise ValueError("give epsilon or an explicit k")
        if not (self.xi0 == "pilot" or isinstance(self.xi0, (int, float))):
            raise ValueError('xi0 must be a number or "pilot"')
        if self.pilot_size < 1:
            raise ValueError("pilot_size must be positive")
        if self.replications < 2:
            raise ValueError("replications must be at least 2")
        if not (isinstance(self.target, str) and self.target in ("auto", "analytic", "biased", "biased-exact")
                or (isinstance(self.target, (list, tuple)) and len(self.target) == 2)):
            raise ValueError("target must be auto, analytic, biased, biased-exact or [var, es]")
        self.params()

    def params(self) -> swap.SwapParams:
        return swap.SwapParams.from_dict(self.model)

    def rate(self) -> LearningRate:
        return LearningRate(self.gamma1, self.beta, self.offset)

    def to_dict(self) -> dict:
        d = asdict(self)
        if isinstance(self.target, tuple):
            d["target"] = list(self.target)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        d = dict(d)
        preset = d.get("preset")
        if preset is not None:
            base = preset_dict(preset, d.get("scheme", "nsa"))
            base.update(d)
            d = base
        return cls(**d)

    def scheme_config(self) -> SchemeConfig:
        """Scheme configuration; a pilot start is left at 0 here, see :func:`resolve_scheme`."""
        rate = self.rate()
        alpha = self.params().alpha
        x0 = 0.0 if self.xi0 == "pilot" else float(self.xi0)
        if self.scheme in ("mlsa", "amlsa"):
            if self.num_levels is not None and self.h0 is not None:
                ml = mlsa.MlConfig.with_levels(mlsa.BiasParam.from_h(self.h0).k, self.m, self.num_levels,
                                               rate, alpha, self.scheme == "amlsa", x0)
                return SchemeConfig(self.scheme, rate, alpha, ml=ml, xi0=x0)
            return SchemeConfig.for_accuracy(self.scheme, self.epsilon, rate, alpha, self.h0, self.m,
                                             self.num_levels, x0)
        if self.k is not None:
            n = self.n_steps if self.n_steps is not None else self.k * self.k
            return SchemeConfig(self.scheme, rate, alpha, self.k, n, None, x0)
        cfg = SchemeConfig.for_accuracy(self.scheme, self.epsilon, rate, alpha, xi0=x0)
        if self.n_steps is not None:
            cfg = SchemeConfig(cfg.scheme, rate, alpha, cfg.k, self.n_steps, None, x0)
        return cfg


def preset_dict(name: str, scheme: str) -> dict:
    if name != "paper-swap":
        raise ValueError(f"unknown preset {name!r}")
    g1, beta, c = _PAPER_RATES.get(scheme, _PAPER_RATES["nsa"])
    return {"model": swap.PAPER_SWAP.to_dict(), "scheme": scheme, "epsilon": 1 / 256,
            "h0": 1 / 32, "m": 2, "num_levels": None, "gamma1": g1, "beta": beta, "offset": c,
            "replications": 5000, "reference_runs": 200, "reference_steps": 100_000,
            "xi0": "pilot"}


def pilot_quantile(model, alpha: float, k: int, size: int, rng) -> float:
    """Empirical alpha-quantile of ``size`` draws of ``X_{1/k}``."""
    x, _ = sample_biased(model, k, rng, size)
    return float(np.quantile(x, alpha))


def resolve_scheme(cfg: RunConfig, model) -> tuple:
    """Scheme configuration with the starting point resolved, plus its provenance.

    ``xi0 = "pilot"`` starts every chain at the empirical quantile of a
    pilot sample at the bias it is fed with; the pilot is shared by all replications
    and its payoff count is reported separately from the estimator cost.
    """
    scfg = cfg.scheme_config()
    if cfg.xi0 != "pilot":
        return scfg, {"kind": "fixed", "xi0": scfg.xi0, "cost": 0}
    rng = rngmod.generator(rngmod.seed_sequence(cfg.seed, _PILOT_STREAM))
    if scfg.scheme in ("sa", "asa"):
        x0 = float(np.quantile(model.sample_exact(cfg.pilot_size, rng), scfg.alpha))
        cost = cfg.pilot_size
        ml = None
    elif scfg.multilevel:
        ks = [scfg.ml.k0 * scfg.ml.m ** l for l in range(scfg.ml.num_levels + 1)]
        starts = tuple(pilot_quantile(model, scfg.alpha, k, cfg.pilot_size, rng) for k in ks)
        ml = replace(scfg.ml, xi0=starts)
        x0, cost = starts[-1], cfg.pilot_size * sum(ks)
    else:
        x0 = pilot_quantile(model, scfg.alpha, scfg.k, cfg.pilot_size, rng)
        cost, ml = cfg.pilot_size * scfg.k, None
    init = {"kind": "pilot", "xi0": list(ml.xi0) if ml else x0, "cost": cost, "size": cfg.pilot_size}
    return replace(scfg, xi0=x0, ml=ml), init


# -- commands ----------------------------------------------------------------

def _finite(obj):
    """Replace non-finite floats by None so every output is strict JSON."""
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    return obj


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_finite(obj), indent=2, allow_nan=False) + "\n")


def _prepare(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "config.json", cfg.to_dict())
    return out


def cmd_analytic(cfg: RunConfig) -> dict:
    p = cfg.params()
    report = swap.summary(p)
    report["leg_values"] = list(swap.leg_values(p))
    h0 = cfg.h0 if cfg.h0 is not None else None
    report["quantities"] = theory.swap_quantities(p, h0, cfg.m).to_dict()
    return report


def biased_reference(cfg: RunConfig, h_last: float, model: swap.SwapLossModel) -> dict:
    """Average of ``reference_runs`` nested runs at bias ``h_last``."""
    g1, beta, c = cfg.reference_rate
    alpha = cfg.params().alpha
    ref_cfg = SchemeConfig("nsa", LearningRate(g1, beta, c), alpha,
                           mlsa.BiasParam.from_h(h_last).k, cfg.reference_steps)
    reps = harness.run_replications(model, ref_cfg, (0.0, 0.0), cfg.reference_runs,
                                    cfg.seed, cfg.workers, namespace=(_REFERENCE_STREAM,))
    mean = reps.raw.mean(axis=0)
    se = reps.raw.std(axis=0, ddof=1) / np.sqrt(reps.r)
    return {"var": float(mean[0]), "es": float(mean[1]), "stderr": se.tolist(), "runs": reps.r,
            "n_steps": cfg.reference_steps, "h": h_last}


def resolve_target(cfg: RunConfig, scfg: SchemeConfig, model) -> dict:
    t = cfg.target
    if isinstance(t, (list, tuple)):
        return {"kind": "given", "var": float(t[0]), "es": float(t[1])}
    if t == "auto":
        t = "biased" if scfg.multilevel else "analytic"
    p = cfg.params()
    if t == "analytic":
        xi, chi = swap.analytic_var_es(p)
        return {"kind": "analytic", "var": xi, "es": chi}
    if t == "biased-exact":
        xi, chi = swap.biased_var_es(p, scfg.bias)
        return {"kind": "biased-exact", "var": xi, "es": chi}
    ref = biased_reference(cfg, scfg.bias, model)
    return {"kind": "biased", **ref}


def cmd_estimate(cfg: RunConfig) -> dict:
    model = swap.SwapLossModel(cfg.params())
    scfg, init = resolve_scheme(cfg, model)
    t0 = time.perf_counter()
    est = run_estimate(model, scfg, rngmod.seed_sequence(cfg.seed, 0))
    return {"scheme": scfg.scheme, "config": scfg.to_dict(), "var": est.var, "es": est.es,
            "cost": est.cost, "init": init, "seconds": time.perf_counter() - t0,
            "levels": [{"level": r.level, "n_steps": r.n_steps, "var_increment":
                        r.var_increment(scfg.averaged), "es_increment": r.es_increment,
                        "cost": r.cost} for r in est.per_level]}


def theory_sigma(scfg: SchemeConfig, q: theory.ModelQuantities):
    alpha, rate = scfg.alpha, scfg.rate
    try:
        if scfg.scheme in ("sa", "nsa"):
            return theory.sigma_nsa(rate.beta, rate.gamma1, q, alpha)
        if scfg.scheme in ("asa", "ansa"):
            return theory.sigma_ansa(q, alpha)
        if scfg.scheme == "mlsa":
            return theory.sigma_mlsa(rate.beta, rate.gamma1, scfg.ml.h0, scfg.ml.m, q, alpha)
        return theory.sigma_amlsa(scfg.ml.h0, scfg.ml.m, q, alpha)
    except ValueError:
        return None


REPLICATION_COLUMNS = ("replication", "var", "es", "err_var", "err_es", "cost", "var_pos_part")


def write_replications(path: Path, reps: harness.Replications) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(REPLICATION_COLUMNS)
        for i in range(reps.r):
            w.writerow([i, *(repr(float(v)) for v in (reps.raw[i, 0], reps.raw[i, 1], reps.errors[i, 0],
                                                          reps.errors[i, 1])),
                        int(reps.cost[i]), repr(float(reps.var_pos[i]))])


def cmd_clt_study(cfg: RunConfig, out: Path) -> dict:
    model = swap.SwapLossModel(cfg.params())
    scfg, init = resolve_scheme(cfg, model)
    target = resolve_target(cfg, scfg, model)
    t0 = time.perf_counter()
    reps = harness.run_replications(model, scfg, (target["var"], target["es"]), cfg.replications,
                                    cfg.seed, cfg.workers)
    h0 = scfg.ml.h0 if scfg.multilevel else None
    q = theory.swap_quantities(cfg.params(), h0, scfg.ml.m if scfg.multilevel else cfg.m)
    var_ind = None
    if scfg.multilevel:
        gq = theory.mc_g_quantities(model, scfg.ml.k0 * scfg.ml.m ** scfg.ml.num_levels, scfg.ml.m,
                                    cfg.g_samples, rngmod.generator(rngmod.seed_sequence(cfg.seed, _G_STREAM)), scfg.alpha,
                                    scfg.rate, scfg.xi0)
        var_ind = gq.var_indG
    summary = harness.clt_study(reps, scfg, theory_sigma(scfg, q), var_ind)
    summary.extra.update(target=target, init=init, quantities=q.to_dict(), var_indG_mc=var_ind,
                         seconds=time.perf_counter() - t0,
                         ellipse_boundary=summary.ellipse.boundary(100).tolist())
    write_replications(out / "replications.csv", reps)
    return summary.to_dict()


def cmd_complexity(cfg: RunConfig, out: Path) -> dict:
    schemes = ("nsa", "ansa", "mlsa", "amlsa")
    # Levels are held fixed and h0 = epsilon * m**L follows the accuracy.
    num_levels = cfg.num_levels if cfg.num_levels is not None else 3
    rows = mlsa.complexity_sweep(cfg.epsilons, cfg.beta, schemes, cfg.m, num_levels=num_levels)
    with (out / "complexity.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("scheme", "epsilon", "cost"))
        for r in rows:
            w.writerow((r["scheme"], repr(r["epsilon"]), r["cost"]))
    slopes = {}
    for s in schemes:
        pts = [(r["epsilon"], r["cost"]) for r in rows if r["scheme"] == s]
        slopes[s] = mlsa.loglog_slope(*zip(*pts)) if len(pts) > 1 else None
    return {"beta": cfg.beta, "num_levels": num_levels, "rows": rows, "slopes": slopes}


# -- entry point ---------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        _fail("UsageError", message, 2)


def _fail(kind: str, message: str, code: int = 1):
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")
    sys.exit(code)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="mlsa-risk", description="Nested and multilevel SA estimators of VaR and ES.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in ("analytic", "estimate", "clt-study", "complexity"):
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="JSON run configuration")
        p.add_argument("--preset", choices=PRESETS)
        p.add_argument("--seed", type=int)
        p.add_argument("--workers", type=int)
        p.add_argument("--out")
        p.add_argument("--scheme", choices=SCHEMES)
        p.add_argument("--epsilon", type=float)
        p.add_argument("--replications", type=int)
    return ap


def load_config(args) -> RunConfig:
    d = {}
    if args.config is not None:
        d = json.loads(args.config.read_text())
        if not isinstance(d, dict):
            raise ValueError("config must be a JSON object")
    if args.preset is not None:
        d["preset"] = args.preset
    for key in ("seed", "workers", "out", "scheme", "epsilon", "replications"):
        v = getattr(args, key)
        if v is not None:
            d[key] = v
    return RunConfig.from_dict(d)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
        out = _prepare(cfg)
        if args.command == "analytic":
            result = cmd_analytic(cfg)
        elif args.command == "estimate":
            result = cmd_estimate(cfg)
        elif args.command == "clt-study":
            result = cmd_clt_study(cfg, out)
        else:
            result = cmd_complexity(cfg, out)
        _write_json(out / "summary.json", result)
    except Exception as exc:
        _fail(type(exc).__name__, str(exc))
    if args.command in ("analytic", "estimate"):
        print(json.dumps(_finite({k: v for k, v in result.items() if k not in ("quantities", "levels")}), indent=2))
    else:
        print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
