"""Independent oracles for the test suite.

Everything here deliberately avoids the production code paths: sigma_k by
exhaustive subset enumeration and by eigenvalues, derivatives by finite
differences, norms by a second loop-based implementation.
"""

from itertools import combinations

import numpy as np

from gsge.grid import jet_at


def sigma_subsets(lam, k):
    """Brute-force sum over all k-subsets of the spectrum."""
    return float(sum(np.prod([lam[i] for i in c])
                     for c in combinations(range(len(lam)), k)))


def sigma_eigen(A, k):
    """Eigen-decomposition route (the oracle the production code avoids)."""
    return sigma_subsets(np.linalg.eigvalsh(A), k)


def sym_basis(n, i, j):
    """Unit symmetric direction: e_i e_j^T symmetrized (diagonal kept unit)."""
    E = np.zeros((n, n))
    if i == j:
        E[i, i] = 1.0
    else:
        E[i, j] = E[j, i] = 0.5
    return E


def fd_sigma_grad(sigma, A, k, h=1e-6):
    """Central finite differences of sigma(A, k) in symmetric directions."""
    n = A.shape[0]
    G = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            E = sym_basis(n, i, j)
            G[i, j] = (sigma(A + h * E, k) - sigma(A - h * E, k)) / (2 * h)
    return G


def fd_second_directional(sigma, A, k, X, Y, h=1e-5):
    """Mixed second difference of sigma in symmetric directions X, Y."""
    return (sigma(A + h * X + h * Y, k) - sigma(A + h * X - h * Y, k)
            - sigma(A - h * X + h * Y, k) + sigma(A - h * X - h * Y, k)) / (4 * h * h)


def independent_norms(field, p):
    """Loop-based recomputation of the interior sup-norms."""
    g = field.grid
    out = {"sup_abs_u": 0.0, "sup_abs_ut": 0.0, "sup_grad_u": 0.0,
           "max_utt": -np.inf, "sup_hess_u": 0.0, "sup_grad_ut": 0.0}
    for m in range(1, g.nt + 1):
        for flat in range(g.n_space):
            idx = np.unravel_index(flat, g.spatial_shape)
            jet = jet_at(field, (m, idx), p)
            out["sup_abs_u"] = max(out["sup_abs_u"], abs(jet.u))
            out["sup_abs_ut"] = max(out["sup_abs_ut"], abs(jet.ut))
            out["sup_grad_u"] = max(out["sup_grad_u"], float(np.linalg.norm(jet.grad_u)))
            out["max_utt"] = max(out["max_utt"], jet.utt)
            out["sup_hess_u"] = max(out["sup_hess_u"],
                                    float(np.linalg.norm(jet.hess_u)))
            out["sup_grad_ut"] = max(out["sup_grad_ut"],
                                     float(np.linalg.norm(jet.grad_ut)))
    return out


def rel_err(a, b, *scales):
    """|a - b| relative to the magnitude of the computation."""
    denom = max(1e-30, abs(a), abs(b), *[abs(s) for s in scales])
    return abs(a - b) / denom
