import math

import numpy as np
import pytest

from gsge import fields as fl
from gsge.conformal import ProblemParams
from gsge.errors import ConfigError, DomainError, ParameterError
from gsge.grid import (GridSpec, SpacetimeField, jet_at, jet_stack, sup_norms,
                       validate_problem)

from util import independent_norms


def base_params(grid, k=1, **kw):
    return ProblemParams(n=grid.n, k=k, A_field=fl.constant_diagonal_A(grid, 1.0), **kw)


def test_grid_spec_validation():
    with pytest.raises(ParameterError):
        GridSpec(n=2, nx=3, nt=4)
    with pytest.raises(ParameterError):
        GridSpec(n=2, nx=8, nt=0)
    g = GridSpec(n=2, nx=8, nt=3)
    assert g.h == 0.125 and g.tau_h == 0.25 and g.shape == (5, 8, 8)


def test_constant_field_jets():
    g = GridSpec(n=2, nx=8, nt=3)
    p = base_params(g)
    f = SpacetimeField(g, np.full(g.shape, 2.5))
    jet = jet_at(f, (2, (3, 4)), p)
    assert jet.u == 2.5 and jet.ut == 0 and jet.utt == 0
    assert not jet.grad_u.any() and not jet.hess_u.any() and not jet.grad_ut.any()


def test_quadratic_time_field_exact():
    g = GridSpec(n=2, nx=8, nt=5)
    p = base_params(g)
    t = g.t_levels.reshape(-1, 1, 1)
    f = SpacetimeField(g, np.broadcast_to(t**2, g.shape).copy())
    for m in range(1, g.nt + 1):
        jet = jet_at(f, (m, (1, 2)), p)
        assert abs(jet.utt - 2.0) < 1e-12
        assert abs(jet.ut - 2 * g.t_levels[m]) < 1e-12


def test_boundary_time_level_rejected():
    g = GridSpec(n=2, nx=8, nt=3)
    f = SpacetimeField(g, np.zeros(g.shape))
    p = base_params(g)
    with pytest.raises(DomainError):
        jet_at(f, (0, (0, 0)), p)
    with pytest.raises(DomainError):
        jet_at(f, (g.nt + 1, (0, 0)), p)


def _sine_field(g, axis=0):
    xs = np.arange(g.nx) / g.nx
    shape = [1] * (g.n + 1)
    shape[axis + 1] = g.nx
    vals = np.sin(2 * np.pi * xs).reshape(shape)
    return SpacetimeField(g, np.broadcast_to(vals, g.shape).copy())


def _max_grad_error(nx):
    g = GridSpec(n=2, nx=nx, nt=3)
    p = base_params(g)
    f = _sine_field(g)
    xs = np.arange(nx) / nx
    err = 0.0
    for i in range(nx):
        jet = jet_at(f, (1, (i, 0)), p)
        err = max(err, abs(jet.grad_u[0] - 2 * np.pi * np.cos(2 * np.pi * xs[i])))
    return err


def test_gradient_order_two():
    e1, e2 = _max_grad_error(16), _max_grad_error(32)
    order = math.log2(e1 / e2)
    assert 1.8 <= order <= 2.2


def test_stencil_richardson_orders_all_derivatives():
    """Richardson ratio in [1.7, 2.3] for every jet component on a smooth field."""
    ms = fl.ManufacturedSolution(amp=0.05, tamp=0.4)

    def errs(nx, nt):
        g = GridSpec(n=2, nx=nx, nt=nt)
        p = base_params(g)
        field = ms.sample(g)
        exact = ms.analytic_jets(g)
        js = jet_stack(field, p)
        N = g.n_interior
        return {
            "ut": np.abs(js.ut - exact["ut"][1:-1].reshape(N)).max(),
            "utt": np.abs(js.utt - exact["utt"][1:-1].reshape(N)).max(),
            "grad": np.abs(js.grad_u - exact["grad_u"][1:-1].reshape(N, 2)).max(),
            "hess": np.abs(js.hess_u - exact["hess_u"][1:-1].reshape(N, 2, 2)).max(),
            "gradt": np.abs(js.grad_ut - exact["grad_ut"][1:-1].reshape(N, 2)).max(),
        }

    coarse, fine = errs(12, 5), errs(24, 11)
    for key in coarse:
        order = math.log2(coarse[key] / fine[key])
        assert 1.7 <= order <= 2.3, (key, order)


def test_periodicity_bitwise():
    g = GridSpec(n=2, nx=8, nt=3)
    p = base_params(g)
    rng = np.random.default_rng(8)
    f = SpacetimeField(g, rng.normal(size=g.shape))
    a = jet_at(f, (2, (3, 5)), p)
    b = jet_at(f, (2, (3 + g.nx, 5 - g.nx)), p)
    assert a.u == b.u and a.ut == b.ut and a.utt == b.utt
    np.testing.assert_array_equal(a.grad_u, b.grad_u)
    np.testing.assert_array_equal(a.hess_u, b.hess_u)
    np.testing.assert_array_equal(a.grad_ut, b.grad_ut)


def test_jet_stack_matches_jet_at_bitwise():
    g = GridSpec(n=3, nx=4, nt=2)
    rng = np.random.default_rng(9)
    p = ProblemParams(n=3, k=1, A_field=fl.constant_diagonal_A(g, 1.0),
                      psi=rng.random(g.shape) + 0.5)
    f = SpacetimeField(g, rng.normal(size=g.shape))
    js = jet_stack(f, p)
    for row in range(0, g.n_interior, 7):
        m, idx = g.node_of_row(row)
        jet = jet_at(f, (m, idx), p)
        assert jet.utt == js.utt[row] and jet.ut == js.ut[row] and jet.u == js.u[row]
        np.testing.assert_array_equal(jet.grad_u, js.grad_u[row])
        np.testing.assert_array_equal(jet.grad_ut, js.grad_ut[row])
        np.testing.assert_array_equal(jet.hess_u, js.hess_u[row])
        assert jet.psi_here == js.psi[row]


def test_hessian_exactly_symmetric():
    g = GridSpec(n=3, nx=4, nt=2)
    p = ProblemParams(n=3, k=1, A_field=fl.constant_diagonal_A(g, 1.0))
    f = SpacetimeField(g, np.random.default_rng(10).normal(size=g.shape))
    js = jet_stack(f, p)
    np.testing.assert_array_equal(js.hess_u, js.hess_u.swapaxes(-1, -2))


def test_sup_norms_trivial_and_linear_time():
    g = GridSpec(n=2, nx=8, nt=3)
    p = base_params(g)
    zero = SpacetimeField(g, np.zeros(g.shape))
    rep = sup_norms(zero, p)
    assert all(v == 0 for v in rep.as_dict().values())
    t = g.t_levels.reshape(-1, 1, 1)
    lin = SpacetimeField(g, np.broadcast_to(t, g.shape).copy())
    rep = sup_norms(lin, p)
    assert abs(rep.ut_abs - 1.0) < 1e-12
    assert rep.grad_u == 0 and rep.hess_u == 0 and rep.grad_ut == 0
    assert abs(rep.utt_max) < 1e-11
    # |u| attains the largest interior time level, not zero
    assert abs(rep.u_abs - g.t_levels[g.nt]) < 1e-12


def test_sup_norms_against_independent_implementation():
    g = GridSpec(n=2, nx=8, nt=3)
    p = base_params(g)
    field = fl.ManufacturedSolution(amp=0.05).sample(g)
    rep = sup_norms(field, p).as_dict()
    ref = independent_norms(field, p)
    for key, val in ref.items():
        assert abs(rep[key] - val) < 1e-12 * max(1.0, abs(val)), key


def test_boundary_slices_pinned_by_with_interior():
    g = GridSpec(n=2, nx=8, nt=3)
    rng = np.random.default_rng(11)
    f = SpacetimeField(g, rng.normal(size=g.shape))
    before0, before1 = f.values[0].copy(), f.values[-1].copy()
    f2 = f.with_interior(rng.normal(size=g.n_interior))
    np.testing.assert_array_equal(f2.values[0], before0)
    np.testing.assert_array_equal(f2.values[-1], before1)


def test_validate_problem_names_offending_field():
    g = GridSpec(n=2, nx=8, nt=3)
    p = base_params(g)
    p.psi = np.full(g.shape, 1.0)
    p.u0 = np.zeros(g.spatial_shape)
    p.u1 = np.zeros(g.spatial_shape)
    validate_problem(p, g)
    p.psi = -p.psi
    with pytest.raises(ConfigError, match="psi"):
        validate_problem(p, g)
    p.psi = np.abs(p.psi)
    p.A_field = fl.constant_diagonal_A(g, -1.0)
    with pytest.raises(ConfigError, match="A"):
        validate_problem(p, g)
    p.A_field = fl.constant_diagonal_A(g, 1.0)
    p.u1 = None
    with pytest.raises(ConfigError, match="u1"):
        validate_problem(p, g)
