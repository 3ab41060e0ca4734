"""
From eigenfunctions to normalised fixed points and back
=======================================================

A positive eigenfunction g of the order-k operator becomes a fixed point
``h = (g / g(0))^k`` of the normalised map ``f -> (Wf / Wf(0))^k``. The
normalised map can also be iterated directly. Started near the second
solution, the iteration is watched against both known fixed points.
"""

import numpy as np

from gibbs_tree import GridFunction, builtin_construction, default_rule, eigen_to_fixed, fixed_to_eigen, iterate_R

rule = default_rule()
c = builtin_construction("k2")

h1 = GridFunction.constant(rule)
h2 = eigen_to_fixed(c.nontrivial.on(rule), c.k)
print(f"h2(0) = {h2(0.0):.3f}, h2(1) = {h2(1.0):.6f}")

# Back to an eigenfunction: the eigenvalue is 1 / f(0) for the unit-eigenvalue solution.
g, lam0, lam = fixed_to_eigen(c.kernel, rule, h2, c.k)
print(f"eigenvalue of g = h2^(1/2): {lam0:.10f}   1/f(0) = {1 / c.nontrivial(0.0):.10f}")

# Perturb and iterate, with and without damping.
start = GridFunction(rule, h2.values + 0.01 * np.sin(np.pi * rule.nodes))
for damping in (1.0, 0.5):
    f, report = iterate_R(c.kernel, rule, c.k, start, damping=damping, known={"mu1": h1, "mu2": h2})
    d = report.distances
    print(f"\ndamping {damping}: {report.status.value} after {report.iterations} steps,"
          f" residual {report.final_residual_sup:.1e}")
    print(f"  distance to mu1: {d['mu1']:.3e}   distance to mu2: {d['mu2']:.3e}")

# An increasing start away from both also ends on the second solution.
f, report = iterate_R(c.kernel, rule, c.k, GridFunction.from_callable(rule, lambda t: 1 + 0.3 * t),
                      known={"mu1": h1, "mu2": h2})
print(f"\nfrom 1 + 0.3 t: {report.iterations} steps, distances {report.distances}")
