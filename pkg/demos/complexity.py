"""
Cost against accuracy
=====================

Deterministic cost formulas only: no simulation. The log-log slopes recover
the complexity exponents of the four schemes.
"""

from mlsa_risk import mlsa

eps = [2.0 ** -j for j in range(4, 9)]
beta = 0.9
rows = mlsa.complexity_sweep(eps, beta, num_levels=3)

for scheme in ("nsa", "ansa", "mlsa", "amlsa"):
    costs = [r["cost"] for r in rows if r["scheme"] == scheme]
    slope = mlsa.loglog_slope(eps, costs)
    print(f"{scheme:6s}", " ".join(f"{c:>12,d}" for c in costs), f"  slope {slope:.3f}")

print("expected: nsa %.3f, ansa -3, mlsa %.3f, amlsa -2.5" % (-3 / beta, -(1 + 3 / (2 * beta))))
