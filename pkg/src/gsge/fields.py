"""Field constructors on the unit torus: constants, trigonometric products,
and manufactured solutions with analytic jets.

A manufactured solution fixes u* first and defines the right side as the
operator applied to the *analytic* jets of u*, sampled at the nodes; solving
with that right side and measuring the distance to u* exposes the pure
discretization error of the scheme.
"""

from dataclasses import dataclass

import numpy as np

from . import conformal, symfunc
from .conformal import ProblemParams
from .grid import GridSpec, SpacetimeField

__all__ = [
    "spatial_coords",
    "trig_spatial",
    "constant_diagonal_A",
    "ManufacturedSolution",
    "manufactured_problem",
    "constant_geodesic_problem",
]

TWO_PI = 2.0 * np.pi


def spatial_coords(grid: GridSpec):
    """n coordinate arrays of shape spatial_shape with spacing h on [0,1)."""
    axes = [np.arange(grid.nx) * grid.h for _ in range(grid.n)]
    return np.meshgrid(*axes, indexing="ij") if grid.n > 1 else [axes[0]]


def trig_spatial(grid: GridSpec, base=0.0, amp=0.0, modes=None, phases=None):
    """base + amp * prod_a cos(2 pi m_a x_a + phi_a) sampled on the grid."""
    if amp == 0.0:
        return np.full(grid.spatial_shape, float(base))
    modes = modes or (1,) * grid.n
    phases = phases or (0.0,) * grid.n
    xs = spatial_coords(grid)
    prod = np.ones(grid.spatial_shape)
    for a in range(grid.n):
        prod = prod * np.cos(TWO_PI * modes[a] * xs[a] + phases[a])
    return base + amp * prod


def constant_diagonal_A(grid: GridSpec, c: float):
    """A = c I at every spatial node (in Gamma_k for every k when c > 0)."""
    A = np.zeros(grid.spatial_shape + (grid.n, grid.n))
    A[...] = c * np.eye(grid.n)
    return A


@dataclass
class ManufacturedSolution:
    """u*(x,t) = a2 t^2 + a1 t + a0 + amp S(x) q(t) with analytic jets.

    S(x) = prod_a cos(2 pi m_a x_a + phi_a) and q(t) = 1 + tamp sin(pi t).
    Small ``amp`` against a dominant constant-diagonal A keeps u* strictly
    admissible on desk-scale grids.
    """

    a2: float = 0.6
    a1: float = 0.2
    a0: float = 1.0
    amp: float = 0.01
    modes: tuple = (1, 1)
    phases: tuple = (0.3, 0.7)
    tamp: float = 0.5

    def _spatial_parts(self, grid):
        xs = spatial_coords(grid)
        n = grid.n
        cos = [np.cos(TWO_PI * self.modes[a] * xs[a] + self.phases[a]) for a in range(n)]
        sin = [np.sin(TWO_PI * self.modes[a] * xs[a] + self.phases[a]) for a in range(n)]
        S = np.ones(grid.spatial_shape)
        for c in cos:
            S = S * c
        gradS = np.empty(grid.spatial_shape + (n,))
        hessS = np.empty(grid.spatial_shape + (n, n))
        w = [TWO_PI * m for m in self.modes]
        for a in range(n):
            da = -w[a] * sin[a]
            rest = np.ones(grid.spatial_shape)
            for b in range(n):
                if b != a:
                    rest = rest * cos[b]
            gradS[..., a] = da * rest
            hessS[..., a, a] = -w[a] ** 2 * S
            for b in range(a + 1, n):
                rest2 = np.ones(grid.spatial_shape)
                for c in range(n):
                    if c not in (a, b):
                        rest2 = rest2 * cos[c]
                val = w[a] * w[b] * sin[a] * sin[b] * rest2
                hessS[..., a, b] = val
                hessS[..., b, a] = val
        return S, gradS, hessS

    def _time_parts(self, grid):
        t = grid.t_levels
        q = 1.0 + self.tamp * np.sin(np.pi * t)
        qd = self.tamp * np.pi * np.cos(np.pi * t)
        qdd = -self.tamp * np.pi**2 * np.sin(np.pi * t)
        return t, q, qd, qdd

    def sample(self, grid: GridSpec) -> SpacetimeField:
        """u* at every node, boundary slices included."""
        S, _, _ = self._spatial_parts(grid)
        t, q, _, _ = self._time_parts(grid)
        tt = t.reshape((-1,) + (1,) * grid.n)
        qq = q.reshape((-1,) + (1,) * grid.n)
        values = self.a2 * tt**2 + self.a1 * tt + self.a0 + self.amp * S * qq
        return SpacetimeField(grid, values)

    def boundary(self, grid: GridSpec):
        field = self.sample(grid)
        return field.values[0].copy(), field.values[-1].copy()

    def analytic_jets(self, grid: GridSpec):
        """Exact jets at every node, stacked with leading axis = time level."""
        S, gradS, hessS = self._spatial_parts(grid)
        t, q, qd, qdd = self._time_parts(grid)
        sh = (-1,) + (1,) * grid.n
        tt, qq, qqd, qqdd = (a.reshape(sh) for a in (t, q, qd, qdd))
        u = self.a2 * tt**2 + self.a1 * tt + self.a0 + self.amp * S * qq
        ut = 2 * self.a2 * tt + self.a1 + self.amp * S * qqd
        utt = 2 * self.a2 + self.amp * S * qqdd
        grad = self.amp * gradS[None, ...] * qq[..., None]
        grad_t = self.amp * gradS[None, ...] * qqd[..., None]
        hess = self.amp * hessS[None, ...] * qq[..., None, None]
        return {"u": u, "ut": ut, "utt": utt, "grad_u": grad,
                "grad_ut": grad_t, "hess_u": np.broadcast_to(
                    hess, (grid.nt + 2,) + grid.spatial_shape + (grid.n, grid.n)).copy()}

    def analytic_psi(self, p: ProblemParams, grid: GridSpec, A=None):
        """psi := F_k of the analytic jets of u*, sampled at every node."""
        jets = self.analytic_jets(grid)
        A = A if A is not None else p.A_field
        W = conformal.W_core(jets["hess_u"], jets["grad_u"],
                             np.broadcast_to(A, jets["hess_u"].shape), p.s, p.r, p.gamma)
        flat = lambda arr: arr.reshape((-1,) + arr.shape[grid.n + 1:])
        quad = np.einsum("mi,mij,mj->m", flat(jets["grad_ut"]),
                         symfunc.sigma_grad(flat(W), p.k, check=False),
                         flat(jets["grad_ut"]))
        F = flat(jets["utt"]).reshape(-1) * symfunc.sigma_of_matrix(
            flat(W), p.k, check=False) - quad
        return F.reshape(grid.shape)


def manufactured_problem(grid: GridSpec, k: int, gamma: float, s: float, r: float,
                         A_const: float = 2.0, ms: ManufacturedSolution = None):
    """(ProblemParams, u* field, ms) with psi := analytic F_k of u*."""
    ms = ms or ManufacturedSolution(modes=(1,) * grid.n, phases=tuple(
        0.3 + 0.4 * a for a in range(grid.n)))
    A = constant_diagonal_A(grid, A_const)
    u0, u1 = ms.boundary(grid)
    p = ProblemParams(n=grid.n, k=k, gamma=gamma, s=s, r=r, A_field=A,
                      psi=None, u0=u0, u1=u1)
    p.psi = ms.analytic_psi(p, grid, A)
    return p, ms.sample(grid), ms


def constant_geodesic_problem(grid: GridSpec, k: int, gamma: float, s: float,
                              r: float, A_const: float = 1.5, c: float = 1.0):
    """Constant boundary data u0 = u1 = c with psi identically zero."""
    A = constant_diagonal_A(grid, A_const)
    u0 = np.full(grid.spatial_shape, float(c))
    return ProblemParams(n=grid.n, k=k, gamma=gamma, s=s, r=r, A_field=A,
                         psi=np.zeros(grid.shape), u0=u0, u1=u0.copy())
