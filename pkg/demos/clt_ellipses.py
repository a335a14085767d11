"""
Gaussian limits of the renormalised errors
==========================================

Replicate the nested and averaged nested schemes, fit a bivariate Gaussian
to the renormalised (VaR, ES) errors and draw the 95% ellipse. Writes one CSV
of ellipse points per scheme next to this file.
"""

from pathlib import Path

import numpy as np

from mlsa_risk import harness, swap, theory
from mlsa_risk.core_sa import LearningRate
from mlsa_risk.schemes import SchemeConfig

p = swap.PAPER_SWAP
model = swap.SwapLossModel(p)
q = theory.swap_quantities(p)
out = Path(__file__).with_name("ellipses")
out.mkdir(exist_ok=True)

for scheme in ("nsa", "ansa"):
    cfg = SchemeConfig.for_accuracy(scheme, 1 / 64, LearningRate(2.0, 0.9, 100), p.alpha)
    reps = harness.run_replications(model, cfg, swap.analytic_var_es(p), 400, master_seed=11)
    study = harness.clt_study(reps, cfg)
    print(scheme, "fitted covariance\n", np.round(study.fit.sigma, 2))
    print("ES variance: fitted %.2f, plug-in %.2f" % (study.es_variance_fitted, study.es_variance_mc))
    print("ellipse semi-axes", np.round(study.ellipse.semi_axes, 3), "angle %.3f" % study.ellipse.angle)
    np.savetxt(out / f"{scheme}.csv", study.ellipse.boundary(200), delimiter=",", header="err_var,err_es")

print("limit covariance of the averaged scheme\n", np.round(theory.sigma_ansa(q, p.alpha), 2))
