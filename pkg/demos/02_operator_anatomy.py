# Anatomy of the spacetime operator at a single jet
# ==================================================
#
# The equation u_tt sigma_k(W[u]) - sigma_k^{ij}(W[u]) u_ti u_tj = psi is a
# statement about one point at a time.  Here we build every ingredient at a
# reference jet small enough to verify by hand:
#
#   u_tt = 2,  grad u = 0,  grad u_t = e_1,  hess u = 0,  A = I_3,  k = 2.
#
# Then W = I_3, E = u_tt W - du_t (x) du_t = diag(1, 2, 2), and the operator
# value is 2 * sigma_2(I) - sigma_2^{11}(I) = 6 - 2 = 4.

import numpy as np

from gsge.conformal import (Jet, ProblemParams, assemble_E, assemble_R,
                            assemble_W, classify_admissible, F_k_of,
                            log_residual, preset_params, residual_pair,
                            validate_theorem_regime)
from gsge.linearize import ellipticity_form, ellipticity_form_direct, g_coefficients

p = ProblemParams(n=3, k=2, gamma=0.0, s=1.0, r=1.0)
jet = Jet(u=0.0, ut=0.0, utt=2.0, grad_u=np.zeros(3),
          grad_ut=np.array([1.0, 0.0, 0.0]), hess_u=np.zeros((3, 3)),
          A_here=np.eye(3), psi_here=4.0)

W = assemble_W(jet, p)
E = assemble_E(jet, p)
R = assemble_R(jet, p)
print("W =\n", W)
print("E =\n", E)
print("augmented matrix R =\n", R)
print("F_k(R) =", F_k_of(R, p.k))

# The same value two ways: directly and through u_tt^{1-k} sigma_k(E).  The
# equality is the rank-one identity at work.

direct, via_E = residual_pair(jet, p)
print("residual pair:", direct, "==", via_E)

# Admissibility is three margins: the cone margin of W, u_tt itself, and
# sigma_k(E).  All positive here, so the jet is strict and the log residual
# against psi = 4 vanishes.

verdict = classify_admissible(jet, p)
print("admissibility:", verdict.clazz, "margins:", verdict.margins)
print("log residual vs psi=4:", log_residual(jet, p))

# Linearized coefficients of ln F_k: these drive every Newton step.

g = g_coefficients(jet, p)
print("\ng_tt =", g.g_tt)
print("g_ti =", g.g_ti)
print("g_ij =\n", g.g_ij)

# Ellipticity: the square-completed quadratic form and the raw coefficient
# contraction agree, and for xi = e_0 the hand value is
# sigma_2(E)/u_tt + sigma_2^{11}(E)/u_tt = 8/2 + 4/2 = 6.

xi = np.array([1.0, 0.0, 0.0, 0.0])
print("\nellipticity form:", ellipticity_form(jet, p, xi),
      "direct contraction:", ellipticity_form_direct(jet, p, xi))

# Coefficient presets for the named conformal tensors, and the regime check
# for the main estimate (gamma > 0, or r > 0 with 2 s k <= r n).

for name, extra in (("schouten", {}), ("neg-schouten", {}),
                    ("neg-ricci", {"n": 4}),
                    ("neg-modified-schouten", {"n": 4, "tau": 0.5})):
    print(f"{name:24s} (s, r, gamma) = {preset_params(name, **extra)}")

for params in (ProblemParams(n=4, k=2, gamma=0.0, s=1.0, r=1.0),
               ProblemParams(n=3, k=2, gamma=0.0, s=2.0, r=1.0)):
    print(validate_theorem_regime(params).message)
