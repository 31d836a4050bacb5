#!/usr/bin/env python3
# Tour of the 1-d jump-measure catalog: tail integrals, interval masses,
# small-jump second moments and the Blumenthal-Getoor index.
import numpy as np

from levyctmc import CGMY, HEM, VG

models = {
    "HEM": HEM(lam=3.0, p=0.6, eta1=20.0, eta2=25.0, sigma=0.05),
    "VG": VG(sigma=0.1, nu=0.06, theta=0.1),
    "CGMY(0.2)": CGMY(c=1.23, g=15.0, m=20.0, y=0.2),
    "CGMY(1.5)": CGMY(c=0.007, g=2.0, m=4.0, y=1.5),
}

print(f"{'model':<11} {'U(0.1)':>12} {'U(-0.1)':>12} {'mass[0.1,0.2]':>14} {'x^2 on cell(h=0.01)':>20} {'beta':>5}")
for name, m in models.items():
    print(
        f"{name:<11} {m.tail_integral(0.1):>12.6f} {m.tail_integral(-0.1):>12.6f} "
        f"{m.interval_mass(0.1, 0.2):>14.6f} {m.truncated_second_moment(0.01):>20.3e} {m.bg_index():>5.2f}"
    )

# infinite-activity models blow up near zero, finite-activity ones do not
print("\ntotal jump intensity (mass of R \\ {0}):")
for name, m in models.items():
    total = float(m.positive_tail(0.0)) + float(m.negative_tail(0.0))
    print(f"  {name:<11} {total if np.isfinite(total) else float('inf')}")

# the CGMY small-jump second moment scales like h^{2-y}
m = models["CGMY(1.5)"]
for h in [1e-2, 1e-3, 1e-4]:
    ratio = m.truncated_second_moment(h) / m.truncated_second_moment(h / 2)
    print(f"h={h:7.0e}: log2 of the cell second-moment ratio = {np.log2(ratio):.4f} (expect {2 - m.y})")
