"""Pointwise assembly of the conformal tensors and the spacetime operator.

Everything here works in flat orthonormal coordinates on the unit torus, so
covariant derivatives are plain partial derivatives and the background metric
is the identity.  The operator acts on the augmented (n+1) x (n+1) matrix

    R = [[u_tt, du_t^T], [du_t, W[u]]],
    W[u] = hess(u) + s du (x) du + (gamma lap(u) - (r/2)|grad u|^2) I + A,

through F_k(R) = r_00 sigma_k(r) - sigma_k^{ij}(r) r_0i r_0j, which for
u_tt > 0 equals u_tt^{1-k} sigma_k(E_u) with E_u = u_tt W[u] - du_t (x) du_t.
"""

from dataclasses import dataclass, replace

import numpy as np

from . import symfunc
from .errors import DomainError, InputError, ParameterError

__all__ = [
    "ProblemParams",
    "Jet",
    "AdmissibilityVerdict",
    "RegimeReport",
    "assemble_W",
    "assemble_E",
    "assemble_R",
    "F_k_of",
    "residual_pair",
    "classify_admissible",
    "log_residual",
    "preset_params",
    "validate_theorem_regime",
]


@dataclass
class ProblemParams:
    """Problem data: dimension, index, coefficient triple and gridded fields.

    ``A_field`` has shape spatial + (n, n), ``psi`` shape (nt+2,) + spatial,
    ``u0``/``u1`` shape spatial.  The gridded members may be None for purely
    pointwise work (property sweeps on synthetic jets).
    """

    n: int
    k: int
    gamma: float = 0.0
    s: float = 1.0
    r: float = 1.0
    A_field: np.ndarray = None
    psi: np.ndarray = None
    u0: np.ndarray = None
    u1: np.ndarray = None

    def __post_init__(self):
        if self.n < 1:
            raise ParameterError(f"n must be >= 1, got {self.n}")
        if not 1 <= self.k <= self.n:
            raise ParameterError(f"k={self.k} out of range 1..{self.n}")
        if self.gamma < 0:
            raise ParameterError(f"gamma must be >= 0, got {self.gamma}")

    def with_gamma(self, gamma):
        return replace(self, gamma=gamma)


@dataclass(frozen=True)
class Jet:
    """All pointwise derivative data of u at one spacetime node."""

    u: float
    ut: float
    utt: float
    grad_u: np.ndarray
    grad_ut: np.ndarray
    hess_u: np.ndarray
    A_here: np.ndarray
    psi_here: float = np.nan

    def __post_init__(self):
        h = np.asarray(self.hess_u, dtype=float)
        if np.abs(h - h.T).max() > 1e-12 * max(1.0, np.abs(h).max()):
            raise InputError("jet hessian must be symmetric")


@dataclass(frozen=True)
class AdmissibilityVerdict:
    """Classification of a jet with the three margins that decided it.

    ``margins = (cone margin of W, u_tt, sigma_k(E))`` where the cone margin
    is min_j sigma_j(W)/C(n,j) over j = 1..k.  class is one of
    "strict" | "degenerate" | "violated".
    """

    clazz: str
    margins: tuple

    @property
    def strict(self):
        return self.clazz == "strict"


@dataclass(frozen=True)
class RegimeReport:
    """Which hypothesis regime of the main estimate the parameters satisfy."""

    gamma_regime: bool
    growth_regime: bool
    message: str

    @property
    def satisfied(self):
        return self.gamma_regime or self.growth_regime


# Stack cores: leading axes broadcast, so the same code serves a single jet
# and a full grid of nodes.

def W_core(hess, grad, A, s, r, gamma):
    hess = np.asarray(hess, dtype=float)
    grad = np.asarray(grad, dtype=float)
    n = hess.shape[-1]
    lap = np.trace(hess, axis1=-2, axis2=-1)
    g2 = np.einsum("...i,...i->...", grad, grad)
    outer = np.einsum("...i,...j->...ij", grad, grad)
    scal = gamma * lap - 0.5 * r * g2
    return hess + s * outer + scal[..., None, None] * np.eye(n) + A


def E_core(utt, W, grad_ut):
    utt = np.asarray(utt, dtype=float)
    return utt[..., None, None] * W - np.einsum("...i,...j->...ij", grad_ut, grad_ut)


def R_core(utt, grad_ut, W):
    utt = np.asarray(utt, dtype=float)
    grad_ut = np.asarray(grad_ut, dtype=float)
    n = W.shape[-1]
    R = np.zeros(W.shape[:-2] + (n + 1, n + 1))
    R[..., 0, 0] = utt
    R[..., 0, 1:] = grad_ut
    R[..., 1:, 0] = grad_ut
    R[..., 1:, 1:] = W
    return R


def F_k_core(R, k):
    r00 = R[..., 0, 0]
    r0 = R[..., 0, 1:]
    rr = R[..., 1:, 1:]
    quad = np.einsum(
        "...i,...ij,...j->...", r0, symfunc.sigma_grad(rr, k, check=False), r0
    )
    return r00 * symfunc.sigma_of_matrix(rr, k, check=False) - quad


def assemble_W(jet: Jet, p: ProblemParams) -> np.ndarray:
    """W[u] at the jet, flat metric."""
    return W_core(jet.hess_u, jet.grad_u, jet.A_here, p.s, p.r, p.gamma)


def assemble_E(jet: Jet, p: ProblemParams) -> np.ndarray:
    """E_u = u_tt W[u] - du_t (x) du_t at the jet."""
    return E_core(jet.utt, assemble_W(jet, p), jet.grad_ut)


def assemble_R(jet: Jet, p: ProblemParams) -> np.ndarray:
    """Augmented matrix with r_00 = u_tt, r_0i = u_ti, r_ij = W_ij[u]."""
    return R_core(jet.utt, jet.grad_ut, assemble_W(jet, p))


def F_k_of(R: np.ndarray, k: int) -> float:
    """r_00 sigma_k(r) - sigma_k^{ij}(r) r_0i r_0j for an augmented matrix."""
    R = np.asarray(R, dtype=float)
    out = F_k_core(R, k)
    return float(out) if R.ndim == 2 else out


def residual_pair(jet: Jet, p: ProblemParams):
    """Operator value by both routes: (direct, via_E).

    direct = u_tt sigma_k(W) - sigma_k^{ij}(W) u_ti u_tj and
    via_E = u_tt^{1-k} sigma_k(E); the two agree identically (rank-one
    identity corollary).  via_E is NaN when u_tt <= 0.
    """
    W = assemble_W(jet, p)
    quad = float(jet.grad_ut @ symfunc.sigma_grad(W, p.k, check=False) @ jet.grad_ut)
    direct = jet.utt * symfunc.sigma_of_matrix(W, p.k, check=False) - quad
    if jet.utt > 0:
        E = E_core(jet.utt, W, jet.grad_ut)
        via_E = jet.utt ** (1 - p.k) * symfunc.sigma_of_matrix(E, p.k, check=False)
    else:
        via_E = float("nan")
    return float(direct), float(via_E)


def strict_margins(utt, W, grad_ut, k):
    """(cone margin of W, u_tt, sigma_k(E)) for a jet stack."""
    wm = symfunc.gamma_margin_matrix(W, k, check=False)
    E = E_core(utt, W, grad_ut)
    sigE = symfunc.sigma_of_matrix(E, k, check=False)
    return wm, np.asarray(utt, dtype=float), sigE


def classify_admissible(jet: Jet, p: ProblemParams, margin: float = 0.0) -> AdmissibilityVerdict:
    """Strict / degenerate / violated classification with margins."""
    W = assemble_W(jet, p)
    wm, utt, sigE = strict_margins(jet.utt, W, jet.grad_ut, p.k)
    margins = (float(wm), float(utt), float(sigE))
    if all(m > margin for m in margins):
        clazz = "strict"
    elif all(m >= -margin for m in margins):
        clazz = "degenerate"
    else:
        clazz = "violated"
    return AdmissibilityVerdict(clazz, margins)


def log_residual(jet: Jet, p: ProblemParams) -> float:
    """ln F_k - ln psi at a strictly admissible jet, computed via E.

    ln F_k = (1-k) ln u_tt + ln sigma_k(E); raises DomainError carrying the
    failing margin when the jet is not strict or psi_here <= 0.
    """
    verdict = classify_admissible(jet, p)
    if not verdict.strict:
        from .errors import AdmissibilityError

        raise AdmissibilityError(
            f"jet is {verdict.clazz}, margins={verdict.margins}", margins=verdict.margins
        )
    if not jet.psi_here > 0:
        raise DomainError(f"psi must be positive, got {jet.psi_here}")
    _, _, sigE = verdict.margins
    return float((1 - p.k) * np.log(jet.utt) + np.log(sigE) - np.log(jet.psi_here))


_PRESETS = ("schouten", "neg-schouten", "neg-ricci", "neg-modified-schouten")


def preset_params(name: str, n: int = None, tau: float = None):
    """Coefficient triples (s, r, gamma) of the named conformal tensor.

    schouten -> (1, 1, 0); neg-schouten -> (-1, -1, 0);
    neg-ricci(n) -> (-1, -2, 1/(n-2));
    neg-modified-schouten(n, tau) -> (-1, tau - 2, (1-tau)/(n-2)), tau <= 1.
    """
    if name == "schouten":
        return (1.0, 1.0, 0.0)
    if name == "neg-schouten":
        return (-1.0, -1.0, 0.0)
    if name == "neg-ricci":
        if n is None or n <= 2:
            raise ParameterError("neg-ricci preset needs dimension n > 2")
        return (-1.0, -2.0, 1.0 / (n - 2))
    if name == "neg-modified-schouten":
        if n is None or n <= 2:
            raise ParameterError("neg-modified-schouten preset needs dimension n > 2")
        if tau is None or tau > 1:
            raise ParameterError("neg-modified-schouten preset needs tau <= 1")
        return (-1.0, tau - 2.0, (1.0 - tau) / (n - 2))
    raise ParameterError(f"unknown preset {name!r}; choose from {_PRESETS}")


def validate_theorem_regime(p: ProblemParams) -> RegimeReport:
    """Flag whether gamma > 0 or (r > 0 and 2 s k <= r n) holds.

    Outside both regimes the solvers warn but do not refuse.
    """
    gamma_regime = p.gamma > 0
    growth_regime = p.r > 0 and 2 * p.s * p.k <= p.r * p.n
    if gamma_regime and growth_regime:
        msg = "both regimes hold"
    elif gamma_regime:
        msg = "gamma > 0 regime holds"
    elif growth_regime:
        msg = "r > 0 with 2sk <= rn regime holds"
    else:
        msg = (
            f"warning: outside both regimes (gamma={p.gamma}, "
            f"2sk={2 * p.s * p.k} vs rn={p.r * p.n}); estimates unproven"
        )
    return RegimeReport(gamma_regime, growth_regime, msg)
