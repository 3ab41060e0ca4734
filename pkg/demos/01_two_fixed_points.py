"""
Two positive solutions for the same kernel
==========================================

The kernel below admits two strictly positive solutions of
``f(t) = int_0^1 K(t, u) f(u)^k du``: the constant one and a second one with
a fifth-root (or seventh-root) kink at t = 1/2. Both are checked numerically
on the default quadrature rule.
"""

import numpy as np

from gibbs_tree import apply_H, builtin_construction, default_rule

rule = default_rule()
print(f"quadrature: {rule.describe()['n_nodes']} nodes, graded toward t = 1/2")

# Order k = 2, then k = 3. Each construction carries its kernel and both solutions.
for name in ("k2", "k3"):
    c = builtin_construction(name)
    print(f"\n{name}: kernel {c.kernel.describe()}")
    for label, sol in c.solutions.items():
        f = sol.on(rule)
        residual = apply_H(c.kernel, rule, c.k, f).sup_distance(f)
        print(f"  {label:6s} f(0) = {sol(0.0):.6f}  f(1/2) = {sol(0.5):.6f}  f(1) = {sol(1.0):.6f}"
              f"  sup |H f - f| = {residual:.2e}")

# The second solution is far from constant: print a coarse profile.
c = builtin_construction("k2")
t = np.linspace(0, 1, 11)
print("\nk2 second solution on a coarse grid:")
for ti, fi in zip(t, c.nontrivial(t)):
    print(f"  t = {ti:.1f}   f = {fi:.6f}")
