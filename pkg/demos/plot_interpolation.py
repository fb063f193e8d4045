"""
K-functionals and Gagliardo-Nirenberg ratios
============================================

Compare the exact K-functional with the rearrangement formula for
Lebesgue pairs and with the Calderon-Zygmund upper bound for Sobolev
pairs, then evaluate a Gagliardo-Nirenberg ratio.
"""

import math

import numpy as np

from czkit import build_space
from czkit.interpolation import gn_check, k_curve, k_lebesgue, k_sobolev_upper

sp = build_space("path:8")
f = np.random.default_rng(1).standard_normal(sp.n)
ts = np.geomspace(0.1, 10, 7)

print("   t   K(L1,Linf)   formula")
for t, k in zip(ts, k_curve(sp, f, ts, "L1,Linf")):
    print(f"{t:6.2f} {k.value:10.4f} {k_lebesgue(sp, f, t, 1, math.inf).value:10.4f}")

print("   t   K(W1,Winf)  CZ upper")
for t, k in zip(ts[:4], k_curve(sp, f, ts[:4], "W1,Winf")):
    up = k_sobolev_upper(sp, f, t, 1, math.inf, 1)
    print(f"{t:6.2f} {k.value:10.4f} {up.value:10.4f}")

for n in (16, 32, 64):
    sp = build_space(f"cycle:{n}")
    spike = np.eye(n)[0]
    res = gn_check(sp, spike, 2, 4)
    print(f"cycle:{n:<3d} GN ratio {res['sup']:.3f}  (difference variant {res['sup_difference']:.3f})")
