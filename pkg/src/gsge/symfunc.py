"""Elementary symmetric function algebra on spectra and symmetric matrices.

All matrix routines run on stacks: an input of shape ``(..., n, n)`` is
processed along the leading axes at once, which keeps per-node work inside
solver loops vectorized.  Values sigma_j of a matrix are obtained from power
traces through Newton's identities (the characteristic-polynomial coefficient
route), never through an eigen-decomposition; the eigenvalue route exists
only as a test oracle.

The gradient sigma_k^{ij} = d sigma_k / d A_ij is the (k-1)-th Newton tensor

    T_{k-1}(A) = sigma_{k-1} I - sigma_{k-2} A + ... + (-1)^{k-1} A^{k-1},

which satisfies tr T_{k-1} = (n-k+1) sigma_{k-1} and <T_{k-1}, A> = k sigma_k.
"""

from math import comb

import numpy as np

from .errors import InputError, ParameterError

# Dense 4-index second-derivative storage is n**4; keep dimensions desk scale.
MAX_HESS_DIM = 8

__all__ = [
    "sigma_of_spectrum",
    "sigma_all_of_spectrum",
    "sigma_of_matrix",
    "sigma_all_of_matrix",
    "sigma_grad",
    "sigma_hess",
    "gamma_margin",
    "gamma_margin_matrix",
    "in_gamma_k",
    "in_gamma_k_closure",
    "rank_one_identities",
]


def _check_k(k, n):
    if not isinstance(k, (int, np.integer)):
        raise ParameterError(f"k must be an integer, got {k!r}")
    if not 1 <= k <= n:
        raise ParameterError(f"k={k} out of range 1..{n}")


def _check_symmetric(A, tol_scale=1e-12):
    """Reject matrices that are asymmetric beyond roundoff-level tolerance."""
    A = np.asarray(A, dtype=float)
    if A.ndim < 2 or A.shape[-1] != A.shape[-2]:
        raise InputError(f"expected square matrix stack, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InputError("matrix entries must be finite")
    skew = np.abs(A - np.swapaxes(A, -1, -2)).max()
    scale = max(1.0, np.abs(A).max())
    if skew > tol_scale * scale:
        raise InputError(f"matrix asymmetry {skew:.3e} exceeds tolerance")
    return A


def sigma_all_of_spectrum(lam, kmax):
    """All e_0..e_kmax of the eigenvalue vector(s) ``lam`` of shape (..., n).

    Exact polynomial recursion e_j <- e_j + x * e_{j-1}, no eigen-solve.
    """
    lam = np.asarray(lam, dtype=float)
    n = lam.shape[-1]
    e = np.zeros(lam.shape[:-1] + (kmax + 1,))
    e[..., 0] = 1.0
    for i in range(n):
        x = lam[..., i]
        for j in range(min(i + 1, kmax), 0, -1):
            e[..., j] += x * e[..., j - 1]
    return e


def sigma_of_spectrum(lam, k):
    """sigma_k of an eigenvalue vector; batched over leading axes."""
    lam = np.asarray(lam, dtype=float)
    if lam.ndim < 1 or lam.shape[-1] < 1:
        raise InputError("spectrum must have length n >= 1")
    if not np.all(np.isfinite(lam)):
        raise InputError("spectrum entries must be finite")
    _check_k(k, lam.shape[-1])
    out = sigma_all_of_spectrum(lam, k)[..., k]
    return float(out) if lam.ndim == 1 else out


def _powers(A, m):
    """[I, A, A^2, ..., A^m] for a matrix stack."""
    n = A.shape[-1]
    eye = np.broadcast_to(np.eye(n), A.shape)
    out = [eye]
    for _ in range(m):
        out.append(out[-1] @ A)
    return out


def _newton_coefficients(traces, kmax):
    """e_1..e_kmax from power traces p_1..p_kmax via Newton's identities."""
    e = [np.ones_like(traces[0]), traces[0].copy()]
    for m in range(2, kmax + 1):
        acc = np.zeros_like(traces[0])
        sign = 1.0
        for j in range(1, m + 1):
            acc += sign * e[m - j] * traces[j - 1]
            sign = -sign
        e.append(acc / m)
    return e


def sigma_all_of_matrix(A, kmax, check=True):
    """Stack of [sigma_0, ..., sigma_kmax] along the trailing axis."""
    A = _check_symmetric(A) if check else np.asarray(A, dtype=float)
    if kmax == 0:
        return np.ones(A.shape[:-2] + (1,))
    P = _powers(A, kmax)
    traces = [np.trace(P[j], axis1=-2, axis2=-1) for j in range(1, kmax + 1)]
    e = _newton_coefficients(traces, kmax)
    return np.stack(e, axis=-1)


def sigma_of_matrix(A, k, check=True):
    """sigma_k(A) = sum of all k x k principal minors, coefficient route."""
    A = _check_symmetric(A) if check else np.asarray(A, dtype=float)
    _check_k(k, A.shape[-1])
    out = sigma_all_of_matrix(A, k, check=False)[..., k]
    return float(out) if A.ndim == 2 else out


def sigma_grad(A, k, check=True):
    """sigma_k^{ij}(A): the Newton tensor T_{k-1}(A), batched."""
    A = _check_symmetric(A) if check else np.asarray(A, dtype=float)
    _check_k(k, A.shape[-1])
    P = _powers(A, k - 1)
    e = sigma_all_of_matrix(A, k - 1, check=False)
    T = np.zeros_like(A)
    sign = 1.0
    for m in range(k):
        T += sign * e[..., k - 1 - m, None, None] * P[m]
        sign = -sign
    return T


def _newton_tensor(P, e, ell):
    """T_ell(A) from precomputed powers P and coefficients e."""
    T = np.zeros_like(P[0])
    sign = 1.0
    for m in range(ell + 1):
        T += sign * e[..., ell - m, None, None] * P[m]
        sign = -sign
    return T


def sigma_hess(A, k, check=True):
    """Second partials sigma_k^{ij,pq}(A), symmetrized over (ij) and (pq).

    Entries are derivatives treating the n^2 matrix entries as independent,
    then averaged over the swaps (i,j)<->(j,i) and (p,q)<->(q,p) so that the
    stored array contracts correctly against symmetric perturbations.
    Identically zero for k = 1.
    """
    A = _check_symmetric(A) if check else np.asarray(A, dtype=float)
    n = A.shape[-1]
    _check_k(k, n)
    if n > MAX_HESS_DIM:
        raise ParameterError(f"n={n} exceeds dense second-derivative cap {MAX_HESS_DIM}")
    shape = A.shape[:-2] + (n, n, n, n)
    if k == 1:
        return np.zeros(shape)
    P = _powers(A, k - 1)
    e = sigma_all_of_matrix(A, k - 1, check=False)
    H = np.zeros(shape)
    # d(A^m)_{ij}/dA_{pq} = sum_{a+b=m-1} (A^a)_{ip} (A^b)_{qj}
    sign = -1.0
    for m in range(1, k):
        coeff = e[..., k - 1 - m]
        inner = np.zeros(shape)
        for a in range(m):
            inner += np.einsum("...ip,...qj->...ijpq", P[a], P[m - 1 - a])
        H += sign * coeff[..., None, None, None, None] * inner
        sign = -sign
    # d sigma_{k-1-m}/dA_{pq} = T_{k-2-m}(A)_{pq}
    sign = 1.0
    for m in range(k - 1):
        T2 = _newton_tensor(P, e, k - 2 - m)
        H += sign * np.einsum("...ij,...pq->...ijpq", P[m], T2)
        sign = -sign
    H = 0.25 * (
        H
        + np.swapaxes(H, -4, -3)
        + np.swapaxes(H, -2, -1)
        + np.swapaxes(np.swapaxes(H, -4, -3), -2, -1)
    )
    return H


def gamma_margin(lam, k):
    """min_{j<=k} sigma_j(lam) / C(n,j); positive iff lam lies in Gamma_k."""
    lam = np.asarray(lam, dtype=float)
    n = lam.shape[-1]
    _check_k(k, n)
    e = sigma_all_of_spectrum(lam, k)
    scaled = np.stack([e[..., j] / comb(n, j) for j in range(1, k + 1)], axis=-1)
    out = scaled.min(axis=-1)
    return float(out) if lam.ndim == 1 else out


def gamma_margin_matrix(A, k, check=True):
    """Cone margin of the spectrum of A, computed without eigenvalues."""
    A = _check_symmetric(A) if check else np.asarray(A, dtype=float)
    n = A.shape[-1]
    _check_k(k, n)
    e = sigma_all_of_matrix(A, k, check=False)
    scaled = np.stack([e[..., j] / comb(n, j) for j in range(1, k + 1)], axis=-1)
    out = scaled.min(axis=-1)
    return float(out) if A.ndim == 2 else out


def in_gamma_k(lam, k, margin=0.0):
    """Strict cone test: sigma_j(lam) > margin * C(n,j) for all j = 1..k."""
    if margin < 0:
        raise ParameterError("margin must be >= 0")
    out = gamma_margin(lam, k)
    return out > margin


def in_gamma_k_closure(lam, k, tol=0.0):
    """Closed-cone test with tolerance: sigma_j(lam) >= -tol * C(n,j)."""
    out = gamma_margin(lam, k)
    return out >= -tol


def rank_one_identities(A, X, k):
    """Both sides of the two rank-one downdate identities.

    Returns (lhs1, rhs1, lhs2, rhs2) with

        lhs1 = sigma_k^{ij}(A - X X^T) X_i X_j,   rhs1 = sigma_k^{ij}(A) X_i X_j,
        lhs2 = sigma_k(A - X X^T),                rhs2 = sigma_k(A) - rhs1.

    The caller asserts lhs1 == rhs1 and lhs2 == rhs2.
    """
    A = _check_symmetric(A)
    X = np.asarray(X, dtype=float)
    _check_k(k, A.shape[-1])
    B = A - np.einsum("...i,...j->...ij", X, X)
    rhs1 = np.einsum("...i,...ij,...j->...", X, sigma_grad(A, k, check=False), X)
    lhs1 = np.einsum("...i,...ij,...j->...", X, sigma_grad(B, k, check=False), X)
    lhs2 = sigma_all_of_matrix(B, k, check=False)[..., k]
    rhs2 = sigma_all_of_matrix(A, k, check=False)[..., k] - rhs1
    if A.ndim == 2:
        return float(lhs1), float(rhs1), float(lhs2), float(rhs2)
    return lhs1, rhs1, lhs2, rhs2
