"""Discretization of torus x [0,1]: periodic space, Dirichlet time.

The grid is uniform in every direction: nx points per spatial axis with
spacing h = 1/nx, and nt interior time levels with spacing tau_h = 1/(nt+1)
(total nt+2 levels; the t=0 and t=1 slices hold the boundary data and are
never unknowns).  Jets come from second-order central stencils; mixed second
derivatives use the 4-point cross, which keeps the discrete Hessian
symmetric by construction.
"""

from dataclasses import dataclass

import numpy as np

from . import conformal, symfunc
from .conformal import Jet, ProblemParams
from .errors import ConfigError, DomainError, InputError, ParameterError

__all__ = [
    "GridSpec",
    "SpacetimeField",
    "JetStack",
    "NormReport",
    "jet_at",
    "jet_stack",
    "sup_norms",
    "spatial_W",
    "validate_problem",
]


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic-space x Dirichlet-time grid."""

    n: int
    nx: int
    nt: int

    def __post_init__(self):
        if self.n < 1:
            raise ParameterError(f"n must be >= 1, got {self.n}")
        if self.nx < 4:
            raise ParameterError(f"nx must be >= 4, got {self.nx}")
        if self.nt < 1:
            raise ParameterError(f"nt must be >= 1, got {self.nt}")

    @property
    def h(self):
        return 1.0 / self.nx

    @property
    def tau_h(self):
        return 1.0 / (self.nt + 1)

    @property
    def spatial_shape(self):
        return (self.nx,) * self.n

    @property
    def shape(self):
        return (self.nt + 2,) + self.spatial_shape

    @property
    def n_space(self):
        return self.nx**self.n

    @property
    def n_interior(self):
        return self.nt * self.n_space

    @property
    def t_levels(self):
        return np.arange(self.nt + 2) * self.tau_h

    def node_of_row(self, row):
        """Canonical interior-node order: time-major, lexicographic space."""
        m, rest = divmod(int(row), self.n_space)
        return (m + 1, np.unravel_index(rest, self.spatial_shape))

    def row_of_node(self, m, idx):
        return (m - 1) * self.n_space + int(np.ravel_multi_index(idx, self.spatial_shape))


class SpacetimeField:
    """Scalar values on the grid, time-major then lexicographic space."""

    def __init__(self, grid: GridSpec, values: np.ndarray):
        values = np.asarray(values, dtype=float)
        if values.shape != grid.shape:
            raise InputError(f"field shape {values.shape} != grid shape {grid.shape}")
        self.grid = grid
        self.values = values

    @classmethod
    def from_boundary(cls, grid, u0, u1):
        """Linear-in-t interpolant of the two boundary slices."""
        u0 = np.broadcast_to(np.asarray(u0, dtype=float), grid.spatial_shape)
        u1 = np.broadcast_to(np.asarray(u1, dtype=float), grid.spatial_shape)
        t = grid.t_levels.reshape((-1,) + (1,) * grid.n)
        return cls(grid, (1 - t) * u0 + t * u1)

    def copy(self):
        return SpacetimeField(self.grid, self.values.copy())

    def interior_flat(self):
        return self.values[1:-1].reshape(-1)

    def with_interior(self, flat):
        out = self.values.copy()
        out[1:-1] = np.asarray(flat, dtype=float).reshape((self.grid.nt,) + self.grid.spatial_shape)
        return SpacetimeField(self.grid, out)


@dataclass
class JetStack:
    """Stacked jets of every interior node in canonical row order."""

    grid: GridSpec
    u: np.ndarray
    ut: np.ndarray
    utt: np.ndarray
    grad_u: np.ndarray
    grad_ut: np.ndarray
    hess_u: np.ndarray
    A: np.ndarray
    psi: np.ndarray


@dataclass(frozen=True)
class NormReport:
    """Interior maxima of the six monitored quantities.

    Vector gradients are measured in the Euclidean norm, the Hessian in the
    Frobenius norm; utt_max is the signed maximum of u_tt.
    """

    u_abs: float
    ut_abs: float
    grad_u: float
    utt_max: float
    hess_u: float
    grad_ut: float

    def as_dict(self):
        return {
            "sup_abs_u": self.u_abs,
            "sup_abs_ut": self.ut_abs,
            "sup_grad_u": self.grad_u,
            "max_utt": self.utt_max,
            "sup_hess_u": self.hess_u,
            "sup_grad_ut": self.grad_ut,
        }


def _roll(values, shift, axis):
    return np.roll(values, -shift, axis=axis)


def jet_at(field: SpacetimeField, node, p: ProblemParams) -> Jet:
    """Second-order jet at one interior node (m, spatial index tuple)."""
    g = field.grid
    m, idx = node
    idx = tuple(int(i) % g.nx for i in np.atleast_1d(np.asarray(idx, dtype=int)))
    if not 1 <= m <= g.nt:
        raise DomainError(f"time level {m} is not interior (1..{g.nt})")
    V = field.values
    h, tau = g.h, g.tau_h
    n = g.n

    def at(mm, ii):
        return V[(mm,) + tuple(x % g.nx for x in ii)]

    def shift(ii, a, d):
        jj = list(ii)
        jj[a] += d
        return tuple(jj)

    u0 = at(m, idx)
    ut = (at(m + 1, idx) - at(m - 1, idx)) / (2 * tau)
    utt = (at(m + 1, idx) - 2 * u0 + at(m - 1, idx)) / tau**2
    grad_u = np.zeros(n)
    grad_ut = np.zeros(n)
    hess = np.zeros((n, n))
    for a in range(n):
        up, dn = shift(idx, a, 1), shift(idx, a, -1)
        grad_u[a] = (at(m, up) - at(m, dn)) / (2 * h)
        hess[a, a] = (at(m, up) - 2 * u0 + at(m, dn)) / h**2
        grad_ut[a] = (
            (at(m + 1, up) - at(m + 1, dn)) / (2 * h)
            - (at(m - 1, up) - at(m - 1, dn)) / (2 * h)
        ) / (2 * tau)
        for b in range(a + 1, n):
            val = (
                at(m, shift(up, b, 1))
                - at(m, shift(up, b, -1))
                - at(m, shift(dn, b, 1))
                + at(m, shift(dn, b, -1))
            ) / (4 * h**2)
            hess[a, b] = val
            hess[b, a] = val
    A_here = p.A_field[idx] if p.A_field is not None else np.zeros((n, n))
    psi_here = float(p.psi[(m,) + idx]) if p.psi is not None else np.nan
    return Jet(float(u0), float(ut), float(utt), grad_u, grad_ut, hess, A_here, psi_here)


def jet_stack(field: SpacetimeField, p: ProblemParams) -> JetStack:
    """All interior jets at once via rolled array stencils."""
    g = field.grid
    V = field.values
    n, h, tau = g.n, g.h, g.tau_h
    N = g.n_interior
    u = V[1:-1]
    ut = (V[2:] - V[:-2]) / (2 * tau)
    utt = (V[2:] - 2 * V[1:-1] + V[:-2]) / tau**2

    grad_full = [None] * n
    grad_u = np.empty((g.nt,) + g.spatial_shape + (n,))
    grad_ut = np.empty_like(grad_u)
    hess = np.empty((g.nt,) + g.spatial_shape + (n, n))
    for a in range(n):
        plus = _roll(V, 1, axis=a + 1)
        minus = _roll(V, -1, axis=a + 1)
        grad_full[a] = (plus - minus) / (2 * h)
        grad_u[..., a] = grad_full[a][1:-1]
        grad_ut[..., a] = (grad_full[a][2:] - grad_full[a][:-2]) / (2 * tau)
        hess[..., a, a] = (plus[1:-1] - 2 * u + minus[1:-1]) / h**2
    for a in range(n):
        for b in range(a + 1, n):
            pp = _roll(_roll(V, 1, axis=a + 1), 1, axis=b + 1)[1:-1]
            pm = _roll(_roll(V, 1, axis=a + 1), -1, axis=b + 1)[1:-1]
            mp = _roll(_roll(V, -1, axis=a + 1), 1, axis=b + 1)[1:-1]
            mm = _roll(_roll(V, -1, axis=a + 1), -1, axis=b + 1)[1:-1]
            val = (pp - pm - mp + mm) / (4 * h**2)
            hess[..., a, b] = val
            hess[..., b, a] = val

    if p.A_field is not None:
        A = np.broadcast_to(p.A_field, (g.nt,) + p.A_field.shape).reshape(N, n, n)
    else:
        A = np.zeros((N, n, n))
    psi = p.psi[1:-1].reshape(N) if p.psi is not None else np.full(N, np.nan)
    return JetStack(
        grid=g,
        u=u.reshape(N),
        ut=ut.reshape(N),
        utt=utt.reshape(N),
        grad_u=grad_u.reshape(N, n),
        grad_ut=grad_ut.reshape(N, n),
        hess_u=hess.reshape(N, n, n),
        A=A,
        psi=psi,
    )


def sup_norms(field: SpacetimeField, p: ProblemParams) -> NormReport:
    """Interior maxima of |u|, |u_t|, |grad u|, u_tt, |hess u|, |grad u_t|."""
    js = jet_stack(field, p)
    return NormReport(
        u_abs=float(np.abs(js.u).max()),
        ut_abs=float(np.abs(js.ut).max()),
        grad_u=float(np.sqrt((js.grad_u**2).sum(axis=-1)).max()),
        utt_max=float(js.utt.max()),
        hess_u=float(np.sqrt((js.hess_u**2).sum(axis=(-2, -1))).max()),
        grad_ut=float(np.sqrt((js.grad_ut**2).sum(axis=-1)).max()),
    )


def spatial_jets(u_spatial, grid: GridSpec):
    """(grad, hess) arrays of a purely spatial field, periodic stencils."""
    u = np.asarray(u_spatial, dtype=float)
    if u.shape != grid.spatial_shape:
        raise InputError(f"spatial field shape {u.shape} != {grid.spatial_shape}")
    n, h = grid.n, grid.h
    grad = np.empty(grid.spatial_shape + (n,))
    hess = np.empty(grid.spatial_shape + (n, n))
    for a in range(n):
        plus = np.roll(u, -1, axis=a)
        minus = np.roll(u, 1, axis=a)
        grad[..., a] = (plus - minus) / (2 * h)
        hess[..., a, a] = (plus - 2 * u + minus) / h**2
    for a in range(n):
        for b in range(a + 1, n):
            pp = np.roll(np.roll(u, -1, axis=a), -1, axis=b)
            pm = np.roll(np.roll(u, -1, axis=a), 1, axis=b)
            mp = np.roll(np.roll(u, 1, axis=a), -1, axis=b)
            mm = np.roll(np.roll(u, 1, axis=a), 1, axis=b)
            val = (pp - pm - mp + mm) / (4 * h**2)
            hess[..., a, b] = val
            hess[..., b, a] = val
    return grad, hess


def spatial_W(u_spatial, p: ProblemParams, grid: GridSpec):
    """Discrete W of a spatial field (no time dependence)."""
    grad, hess = spatial_jets(u_spatial, grid)
    A = p.A_field if p.A_field is not None else np.zeros(grid.spatial_shape + (p.n, p.n))
    return conformal.W_core(hess, grad, A, p.s, p.r, p.gamma)


def _worst_node(margins_flat, grid, time_levels):
    """Locate the node with the smallest margin in a flat spatial-major array."""
    i = int(np.argmin(margins_flat))
    per_level = grid.n_space
    lvl = time_levels[i // per_level] if time_levels is not None else None
    idx = np.unravel_index(i % per_level, grid.spatial_shape)
    return lvl, idx


def validate_problem(p: ProblemParams, grid: GridSpec, margin: float = 0.0):
    """Load-time validation of gridded problem data.

    Checks shapes, psi >= 0, lambda(A) in Gamma_k at every node, and
    lambda(W[u0]), lambda(W[u1]) in Gamma_k at every node.  Raises
    ConfigError naming the offending field and worst node.
    """
    if p.n != grid.n:
        raise ConfigError(f"problem n={p.n} != grid n={grid.n}")
    for name in ("A_field", "psi", "u0", "u1"):
        if getattr(p, name) is None:
            raise ConfigError(f"missing problem field {name!r}")
    if p.A_field.shape != grid.spatial_shape + (p.n, p.n):
        raise ConfigError(f"A_field shape {p.A_field.shape} invalid")
    if p.psi.shape != grid.shape:
        raise ConfigError(f"psi shape {p.psi.shape} != {grid.shape}")
    for name in ("u0", "u1"):
        if getattr(p, name).shape != grid.spatial_shape:
            raise ConfigError(f"{name} shape invalid")
    if np.min(p.psi) < 0:
        raise ConfigError(f"psi must be >= 0 everywhere, min {np.min(p.psi):.3e}")
    mA = symfunc.gamma_margin_matrix(p.A_field.reshape(-1, p.n, p.n), p.k, check=False)
    if mA.min() <= margin:
        _, idx = _worst_node(mA, grid, None)
        raise ConfigError(f"A not in Gamma_{p.k} at node {idx} (margin {mA.min():.3e})")
    for name in ("u0", "u1"):
        W = spatial_W(getattr(p, name), p, grid).reshape(-1, p.n, p.n)
        mW = symfunc.gamma_margin_matrix(W, p.k, check=False)
        if mW.min() <= margin:
            _, idx = _worst_node(mW, grid, None)
            raise ConfigError(
                f"W[{name}] not in Gamma_{p.k} at node {idx} (margin {mW.min():.3e})"
            )
