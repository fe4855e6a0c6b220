# Elementary symmetric functions, Garding cones, and rank-one identities
# =======================================================================
#
# The whole solver rests on a small algebra kernel: sigma_k of a spectrum or
# a symmetric matrix, its first and second derivatives, and cone membership.
# This demo walks through that kernel on hand-checkable inputs.

import numpy as np

from gsge import symfunc as sf

# sigma_2(1, 2, 3) = 1*2 + 1*3 + 2*3 = 11, and sigma_2 of four ones counts
# the C(4,2) = 6 pairs.

print("sigma_2(1,2,3)   =", sf.sigma_of_spectrum((1.0, 2.0, 3.0), 2))
print("sigma_2(1,1,1,1) =", sf.sigma_of_spectrum((1.0, 1.0, 1.0, 1.0), 2))

# Matrix route: sigma_k(A) is the sum of k x k principal minors, computed
# from power traces (Newton's identities) rather than an eigensolve.  The two
# routes agree to rounding.

rng = np.random.default_rng(0)
A = rng.normal(size=(5, 5))
A = 0.5 * (A + A.T)
for k in range(1, 6):
    coeff = sf.sigma_of_matrix(A, k)
    eigen = sf.sigma_of_spectrum(np.linalg.eigvalsh(A), k)
    print(f"k={k}: coefficient route {coeff:+.12f}   eigen route {eigen:+.12f}")

# The gradient sigma_k^{ij} is the Newton tensor T_{k-1}(A).  Two identities
# pin it down: its trace is (n-k+1) sigma_{k-1}(A), and contracting against A
# recovers k sigma_k(A) (Euler's relation for a degree-k polynomial).

k = 3
G = sf.sigma_grad(A, k)
print("\ntrace identity :", np.trace(G), "vs", (5 - k + 1) * sf.sigma_of_matrix(A, 2))
print("euler identity :", float(np.sum(G * A)), "vs", k * sf.sigma_of_matrix(A, k))

# Garding cone membership asks sigma_1, ..., sigma_k > 0.  The margin is the
# smallest sigma_j scaled by its binomial count, so one number summarizes how
# deep inside (or outside) the cone a spectrum sits.

for lam in ((1.0, 1.0, 1.0), (3.0, 1.0, -1.0), (1.0, 1.0, 0.0)):
    print(f"lambda={lam}: in Gamma_3 -> {bool(sf.in_gamma_k(lam, 3))}, "
          f"margin {sf.gamma_margin(lam, 3):+.3f}")

# Rank-one downdate identities: subtracting X (x) X from A moves sigma_k in a
# way that the gradient contraction knows exactly.

X = rng.normal(size=5)
l1, r1, l2, r2 = sf.rank_one_identities(A, X, k)
print("\nrank-one identity 1:", l1, "=", r1)
print("rank-one identity 2:", l2, "=", r2)

# sigma_k^{1/k} is concave on the cone; a quick midpoint check.

a = np.abs(rng.normal(size=5)) + 0.1
b = np.abs(rng.normal(size=5)) + 0.1
mid = sf.sigma_of_spectrum((a + b) / 2, k) ** (1 / k)
avg = 0.5 * (sf.sigma_of_spectrum(a, k) ** (1 / k)
             + sf.sigma_of_spectrum(b, k) ** (1 / k))
print(f"\nmidpoint concavity of sigma_k^(1/k): {mid:.6f} >= {avg:.6f}")
