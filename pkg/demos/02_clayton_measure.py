#!/usr/bin/env python3
# Two-dimensional jump measures from a Clayton copula: rectangle masses by
# corner sums, marginal consistency, and the mass the construction leaves on
# the coordinate axes when the margins have finite activity.
import numpy as np

from levyctmc import ClaytonCopula, CopulaMeasure, HEM

cop = ClaytonCopula(theta=0.7, eta=0.3, d=2)
m1 = HEM(lam=3.0, p=0.6, eta1=20.0, eta2=25.0, sigma=0.05)
m2 = HEM(lam=5.0, p=0.6, eta1=20.0, eta2=25.0, sigma=0.05)
measure = CopulaMeasure(cop, [m1, m2])

print("copula values:", cop(1.0, 1.0), cop(1.0, np.inf), cop(1.0, -1.0))

box = [(0.09, 0.11), (-np.inf, np.inf)]
print("strip mass [0.09,0.11] x R:", measure.rectangle_mass(box))
print("margin interval mass     :", m1.interval_mass(0.09, 0.11))

# a joint box in the ++ quadrant and in a mixed quadrant
print("box (0.05,0.2] x (0.1,0.4]:  ", measure.rectangle_mass([(0.05, 0.2), (0.1, 0.4)]))
print("box (0.05,0.2] x [-0.4,-0.1):", measure.rectangle_mass([(0.05, 0.2), (-0.4, -0.1)]))

# the axis slice: both margins are compound Poisson, so some jumps move
# only one coordinate
strip = measure.rectangle_mass([(0.05, 0.2), (-np.inf, np.inf)])
up = measure.rectangle_mass([(0.05, 0.2), (0.0, np.inf)])
down = measure.rectangle_mass([(0.05, 0.2), (-np.inf, 0.0)])
print(f"axis-slice share of the strip: {(strip - up - down) / strip:.3%}")

print("bg index of the pair:", measure.bg_index())
