"""
A linear kernel family for every k >= 4
=======================================

For each order k and each n > k a root xi of a polynomial equation gives the
coupling gamma of ``K(t, u) = 1 + gamma (t - 1/2)(u - 1/2)``. Whenever
|gamma| < 4 the kernel is positive and ``xi + xi^n (t - 1/2)`` is a second
positive solution next to f = 1.

This script tabulates the sweep and shows how slowly gamma settles.
"""

from gibbs_tree import construct, default_rule, family_construction, sweep

k = 4
print(f"k = {k}: limit 12/k = {12 / k}")
print(f"{'n':>5} {'xi':>10} {'alpha':>10} {'gamma':>9}  admissible")
for rec in sweep(k, range(k + 1, k + 16)):
    print(f"{rec.n:5d} {rec.xi:10.6f} {rec.alpha:10.3e} {rec.gamma:9.5f}  {rec.admissible}")

# The gap to the limit shrinks roughly like log(n) / n.
print("\nconvergence of gamma:")
for n in (k + 10, k + 50, k + 200, k + 1000):
    print(f"  n = {n:5d}   |gamma - 12/k| = {abs(construct(k, n).gamma - 12 / k):.4f}")

# Verify the first admissible record end to end.
c = family_construction(k, k + 1)
for rep in c.verify(default_rule(), tol=1e-9):
    print(f"\n{rep.label}: residual {rep.final_residual_sup:.2e}, eigenvalue {rep.lambda_:.12f}")
