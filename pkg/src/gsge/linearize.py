"""Linearization of the log-form operator and global Jacobian assembly.

The solver works on G(R) = ln F_k(R); its pointwise linearization has
coefficients

    g_tt = sigma_k(W) u_tt^{k-1} / sigma_k(E),
    g_ti = -sigma_k^{ij}(E) u_tj / sigma_k(E),
    g_ij = u_tt sigma_k^{ij}(E) / sigma_k(E),

applied to the perturbation through v_tt, v_ti and
M_ij(v) = v_ij + s u_i v_j + s u_j v_i + (gamma lap v - r <grad u, grad v>) d_ij.
The assembled sparse matrix is the exact derivative of the stacked discrete
log-residual with respect to the interior unknowns.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import conformal, symfunc
from .conformal import Jet, ProblemParams
from .errors import AdmissibilityError, SolveError
from .grid import GridSpec, JetStack, SpacetimeField, jet_stack

__all__ = [
    "GCoefficients",
    "SparseOperator",
    "g_coefficients",
    "ellipticity_form",
    "ellipticity_form_direct",
    "assemble_jacobian",
    "solve_linear",
]


@dataclass(frozen=True)
class GCoefficients:
    """Pointwise coefficients of the linearized log operator."""

    g_tt: float
    g_ti: np.ndarray
    g_ij: np.ndarray


def _strict_or_raise(jet, p, margin=0.0):
    verdict = conformal.classify_admissible(jet, p, margin)
    if not verdict.strict:
        raise AdmissibilityError(
            f"linearization requires a strictly admissible jet; jet is "
            f"{verdict.clazz} with margins {verdict.margins}",
            margins=verdict.margins,
        )
    return verdict


def g_coefficients(jet: Jet, p: ProblemParams) -> GCoefficients:
    """Linearized coefficients at one strictly admissible jet."""
    _strict_or_raise(jet, p)
    W = conformal.assemble_W(jet, p)
    E = conformal.E_core(jet.utt, W, jet.grad_ut)
    sigE = symfunc.sigma_of_matrix(E, p.k, check=False)
    sgE = symfunc.sigma_grad(E, p.k, check=False)
    sigW = symfunc.sigma_of_matrix(W, p.k, check=False)
    g_tt = sigW * jet.utt ** (p.k - 1) / sigE
    g_ti = -(sgE @ jet.grad_ut) / sigE
    g_ij = jet.utt * sgE / sigE
    return GCoefficients(float(g_tt), g_ti, g_ij)


def ellipticity_form(jet: Jet, p: ProblemParams, xi) -> float:
    """Square-completed ellipticity quadratic in xi = (xi_0, xi_1..xi_n).

    Evaluates u_tt^{-1} sigma_k(E) xi_0^2
    + (n-k+1) sigma_{k-1}(E) gamma u_tt |xi|^2
    + sigma_k^{ij}(E) y_i y_j / u_tt with y_i = u_ti xi_0 - u_tt xi_i.
    Positive for every xi != 0 at a strictly admissible jet.
    """
    _strict_or_raise(jet, p)
    xi = np.asarray(xi, dtype=float)
    xi0, xs = xi[0], xi[1:]
    W = conformal.assemble_W(jet, p)
    E = conformal.E_core(jet.utt, W, jet.grad_ut)
    sig = symfunc.sigma_all_of_matrix(E, p.k, check=False)
    sgE = symfunc.sigma_grad(E, p.k, check=False)
    y = jet.grad_ut * xi0 - jet.utt * xs
    out = sig[p.k] / jet.utt * xi0**2
    out += (p.n - p.k + 1) * sig[p.k - 1] * p.gamma * jet.utt * (xs @ xs)
    out += (y @ sgE @ y) / jet.utt
    return float(out)


def ellipticity_form_direct(jet: Jet, p: ProblemParams, xi) -> float:
    """The same quadratic as the raw coefficient contraction (no square
    completion); agrees with ellipticity_form to rounding."""
    _strict_or_raise(jet, p)
    xi = np.asarray(xi, dtype=float)
    xi0, xs = xi[0], xi[1:]
    W = conformal.assemble_W(jet, p)
    E = conformal.E_core(jet.utt, W, jet.grad_ut)
    sig = symfunc.sigma_all_of_matrix(E, p.k, check=False)
    sgE = symfunc.sigma_grad(E, p.k, check=False)
    c_tt = (1 - p.k) * sig[p.k] / jet.utt + np.einsum("ij,ij->", sgE, W)
    out = c_tt * xi0**2
    out -= 2 * xi0 * (sgE @ jet.grad_ut) @ xs
    out += jet.utt * (xs @ sgE @ xs)
    out += (p.n - p.k + 1) * sig[p.k - 1] * p.gamma * jet.utt * (xs @ xs)
    return float(out)


def g_stacks(js: JetStack, p: ProblemParams, margin: float = 0.0):
    """Vectorized linearization coefficients over all interior nodes.

    Returns (g_tt, g_t, g, strict_mask, margins) where margins is the
    (cone margin of W, utt, sigma_k(E)) triple of stacked arrays.
    """
    W = conformal.W_core(js.hess_u, js.grad_u, js.A, p.s, p.r, p.gamma)
    wm, utt, sigE = conformal.strict_margins(js.utt, W, js.grad_ut, p.k)
    strict = (wm > margin) & (utt > margin) & (sigE > margin)
    E = conformal.E_core(js.utt, W, js.grad_ut)
    sgE = symfunc.sigma_grad(E, p.k, check=False)
    sigW = symfunc.sigma_of_matrix(W, p.k, check=False)
    with np.errstate(all="ignore"):
        g_tt = sigW * js.utt ** (p.k - 1) / sigE
        g_t = -np.einsum("nij,nj->ni", sgE, js.grad_ut) / sigE[:, None]
        g = js.utt[:, None, None] * sgE / sigE[:, None, None]
    return g_tt, g_t, g, strict, (wm, utt, sigE)


class SparseOperator:
    """Row-compressed Jacobian over the interior unknowns.

    Rows and columns follow the canonical interior-node order
    (time-major, lexicographic space); GridSpec.node_of_row maps back.
    """

    def __init__(self, grid: GridSpec, matrix):
        self.grid = grid
        self.matrix = matrix.tocsr()
        self.matrix.sum_duplicates()
        self.matrix.sort_indices()

    @property
    def shape(self):
        return self.matrix.shape

    def matvec(self, v):
        return self.matrix @ np.asarray(v, dtype=float)

    def dump_coo(self, path):
        """Coordinate text dump: one 'row col value' line per entry."""
        coo = self.matrix.tocoo()
        order = np.lexsort((coo.col, coo.row))
        with open(path, "w") as f:
            for i in order:
                f.write(f"{coo.row[i]} {coo.col[i]} {coo.data[i]:.17g}\n")


def _spatial_neighbor_maps(grid: GridSpec, offsets):
    """Raveled spatial index of cell+offset for each offset tuple."""
    base = np.arange(grid.n_space).reshape(grid.spatial_shape)
    maps = {}
    for off in offsets:
        arr = base
        for a, d in enumerate(off):
            if d:
                arr = np.roll(arr, -d, axis=a)
        maps[off] = arr.reshape(-1)
    return maps


def assemble_jacobian(field: SpacetimeField, p: ProblemParams, grid: GridSpec = None,
                      margin: float = 0.0) -> SparseOperator:
    """Exact Jacobian of the stacked discrete log-residual.

    Raises AdmissibilityError naming the worst node if any interior node is
    not strictly admissible.
    """
    g = grid or field.grid
    js = jet_stack(field, p)
    g_tt, g_t, gm, strict, margins = g_stacks(js, p, margin)
    if not strict.all():
        worst = int(np.argmin(np.minimum(np.minimum(margins[0], margins[1]), margins[2])))
        m, idx = g.node_of_row(worst)
        raise AdmissibilityError(
            f"non-strict node (t-level {m}, x {tuple(int(i) for i in idx)}) with "
            f"margins ({margins[0][worst]:.3e}, {margins[1][worst]:.3e}, "
            f"{margins[2][worst]:.3e})",
            margins=(margins[0][worst], margins[1][worst], margins[2][worst]),
            node=(m, idx),
        )

    n, h, tau = g.n, g.h, g.tau_h
    N, S = g.n_interior, g.n_space
    trg = np.trace(gm, axis1=-2, axis2=-1)
    b = 2 * p.s * np.einsum("nij,nj->ni", gm, js.grad_u) - p.r * trg[:, None] * js.grad_u
    ghat_diag = np.einsum("naa->na", gm) + p.gamma * trg[:, None]

    sp_offsets = set()
    zero = (0,) * n
    e = lambda a, d: tuple(d if i == a else 0 for i in range(n))
    for a in range(n):
        sp_offsets.update({e(a, 1), e(a, -1)})
        for bb in range(a + 1, n):
            for sa in (1, -1):
                for sb in (1, -1):
                    off = list(zero)
                    off[a], off[bb] = sa, sb
                    sp_offsets.add(tuple(off))
    maps = _spatial_neighbor_maps(g, sp_offsets | {zero})

    m_idx = np.arange(N) // S + 1
    sp_idx = np.arange(N) % S
    rows_list, cols_list, data_list = [], [], []

    def add(dm, off, coef):
        valid = (m_idx + dm >= 1) & (m_idx + dm <= g.nt)
        if not valid.any():
            return
        cols = (m_idx + dm - 1) * S + maps[off][sp_idx]
        rows_list.append(np.arange(N)[valid])
        cols_list.append(cols[valid])
        data_list.append(np.asarray(coef, dtype=float)[valid] if np.ndim(coef) else
                         np.full(valid.sum(), coef))

    center = -2 * g_tt / tau**2 - 2 * ghat_diag.sum(axis=1) / h**2
    add(0, zero, center)
    for dm in (1, -1):
        add(dm, zero, g_tt / tau**2)
    for a in range(n):
        for d in (1, -1):
            add(0, e(a, d), ghat_diag[:, a] / h**2 + d * b[:, a] / (2 * h))
    for a in range(n):
        for bb in range(a + 1, n):
            for sa in (1, -1):
                for sb in (1, -1):
                    off = list(zero)
                    off[a], off[bb] = sa, sb
                    add(0, tuple(off), sa * sb * gm[:, a, bb] / (2 * h**2))
    for dm in (1, -1):
        for a in range(n):
            for d in (1, -1):
                add(dm, e(a, d), dm * d * g_t[:, a] / (2 * tau * h))

    matrix = sp.coo_matrix(
        (np.concatenate(data_list), (np.concatenate(rows_list), np.concatenate(cols_list))),
        shape=(N, N),
    )
    return SparseOperator(g, matrix)


def solve_linear(matrix, rhs, opts=None):
    """Newton-direction solve: diagonal-preconditioned LGMRES with a direct
    LU fallback below the size threshold."""
    A = matrix.matrix if isinstance(matrix, SparseOperator) else matrix
    rhs = np.asarray(rhs, dtype=float)
    N = A.shape[0]
    solver = getattr(opts, "linear_solver", "krylov") if opts is not None else "krylov"
    rtol = getattr(opts, "linear_rtol", 1e-8) if opts is not None else 1e-8
    maxiter = getattr(opts, "linear_maxiter", 80) if opts is not None else 80
    direct_limit = getattr(opts, "direct_limit", 20_000) if opts is not None else 20_000

    def direct():
        return spla.splu(A.tocsc()).solve(rhs)

    if solver == "direct":
        if N > direct_limit:
            raise SolveError(f"direct solve refused: {N} unknowns > {direct_limit}")
        return direct()
    d = A.diagonal()
    d = np.where(np.abs(d) > 0, d, 1.0)
    M = spla.LinearOperator(A.shape, matvec=lambda x: x / d)
    x, info = spla.lgmres(A, rhs, M=M, rtol=rtol, atol=0.0, maxiter=maxiter)
    if info == 0 and np.all(np.isfinite(x)):
        return x
    if N <= direct_limit:
        return direct()
    raise SolveError(f"Krylov solve failed (info={info}) and {N} unknowns > {direct_limit}")
