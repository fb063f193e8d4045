"""
Poincare and pseudo-Poincare constants
======================================

Estimate the classical Poincare constant, its heat-semigroup variant and
the global pseudo-Poincare constant on paths of growing length.
"""

from czkit import build_space
from czkit.poincare import global_from_local, poincare_constant

for n in (8, 16, 32):
    sp = build_space(f"path:{n}")
    c = poincare_constant(sp, 2, "classical", seed=0)
    ps = poincare_constant(sp, 2, "pseudo", seed=0)
    print(f"path:{n:<3d} classical {c.constant:.4f}  pseudo {ps.constant:.4f}  ratio {ps.constant / c.constant:.4f}")

# The global constant is controlled by the local one through a bounded covering
sp = build_space("cycle:16")
for q in (1, 2):
    res = global_from_local(sp, q, seed=0)
    print(f"q={q}: global {res['global']:.4f} <= N1^(1/q) * local = {res['bound']:.4f}  ({res['holds']})")
