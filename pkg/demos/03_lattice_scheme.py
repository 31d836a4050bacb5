#!/usr/bin/env python3
# The lattice scheme in one picture: cell masses, total rate, compensator,
# small-jump covariance, and simulated endpoint moments against the formulas.
import numpy as np

from levyctmc import CGMY, GridSpec, SchemeProcess, build_jump_table, choose_truncation_by_mass, mc_estimate
from levyctmc.payoffs import EndpointCoordinate

model = CGMY(c=0.007, g=2.0, m=4.0, y=1.5)
h = 0.01
R = choose_truncation_by_mass(model, h)
table = build_jump_table(model, GridSpec(h=h, R=R))
print(f"h={h}, truncation R={table.grid.r_eff}, states={table.states.shape[0]}")
print(f"total jump rate      : {table.total_rate:9.3f} /year")
print(f"compensator mu_h     : {table.mu_h_lambda[0]:9.5f}")
print(f"small-jump cov C_h   : {table.C_h[0, 0]:9.3e}")
print(f"cutoff drift mu~     : {table.mu_tilde[0]:9.5f}")
print(f"dropped (floored) mass: {table.dropped_mass:.3e}")

proc = SchemeProcess(mu=np.zeros(1), Sigma=np.zeros((1, 1)), table=table, T=1.0)
res = mc_estimate(EndpointCoordinate(0), proc, 50_000, seed=1)
mean_theory = (proc.mu + table.mu_tilde)[0] * proc.T
var_theory = proc.T * (table.C_h[0, 0] + float(np.sum((table.states[:, 0] * h) ** 2 * table.masses)))
print(f"\nendpoint mean: MC {res.estimate:+.5f} vs theory {mean_theory:+.5f} (SE {res.stderr:.5f})")
print(f"endpoint var : MC {res.variance:.5f} vs theory {var_theory:.5f}")
print(f"abstract cost: {res.cost_ops:.3e} ops for {res.n} paths")
