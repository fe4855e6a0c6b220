# Uniqueness certificates: approximation construction and run comparison
# ======================================================================
#
# The uniqueness argument for the degenerate equation rests on an
# approximation: from any admissible solution u of F_k = 0 one can build a
# nearby admissible u_delta with 0 < F_k(u_delta) <= delta and
# ||u - u_delta|| <= delta, by blending u toward t(t-1) with a small weight
# theta.  Comparing two independent runs through their approximants bounds
# their distance by 2 delta plus solver slack.

import numpy as np

from gsge.fields import constant_geodesic_problem
from gsge.grid import GridSpec
from gsge.solver import degenerate_solve
from gsge.verifier import (check_concavity, check_cone_propagation,
                           comparison_uniqueness_test, uniqueness_approximation)

grid = GridSpec(n=2, nx=16, nt=7)
p = constant_geodesic_problem(grid, k=2, gamma=0.5, s=0.4, r=1.0,
                              A_const=1.5, c=1.0)

# The construction needs (r/2, ..., r/2, r/2 - s) in the closed cone; with
# r = 1, s = 0.4 and k = 2 that vector is (0.5, 0.1): sigma_1 = 0.6 and
# sigma_2 = 0.05, comfortably inside.

run = degenerate_solve(p, grid)
u = run.extrapolated

for delta in (1e-2, 1e-3, 1e-4):
    field, rep = uniqueness_approximation(u, p, grid, delta)
    d = rep.details
    print(f"delta={delta:7.0e}: theta={d['theta']:.3e} "
          f"F_k in ({d['F_min']:.2e}, {d['F_max']:.2e}], "
          f"||u - u_delta|| = {d['sup_deviation']:.2e}")

# Two independent routes to the same degenerate limit: bump the right side
# only, or bump gamma alongside it.  The comparison check builds approximants
# for both (the second bound is the minimal nodal F_k of the first) and
# verifies the 2-delta distance bound from the maximum principle chain.

run2 = degenerate_solve(p, grid, mode="gamma-epsilon")
rep = comparison_uniqueness_test(p, grid, delta=1e-2, run1=run, run2=run2)
print("\n" + rep.line())
print(f"  distance {rep.details['diff_sup']:.3e} <= bound "
      f"{rep.details['bound']:.3e} (2 delta + solver slack)")

# The sampled proposition checks that back all of the above: the augmented
# cone is convex with ln F_k and F_k^{1/(k+1)} concave on it, and the E
# matrix inherits cone membership from the hypotheses.

for rep in (check_concavity(2026, samples=3000),
            check_cone_propagation(2026, samples=3000)):
    print(rep.line())
