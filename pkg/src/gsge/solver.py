"""Damped Newton on the discrete log-residual plus the continuation drivers.

The continuity process follows

    rhs_tau = (1 - tau) F_k(w) + tau psi,   tau: 0 -> 1,

starting from an admissible initializer w that solves the tau = 0 problem by
construction.  Degenerate (psi possibly vanishing) problems are reached as
limits of strictly positive regularizations, either by adding epsilon to the
right side or by adding epsilon lap(u) g to the tensor (gamma bump) together
with the right-side bump.
"""

import time
from dataclasses import dataclass, replace

import numpy as np

from . import conformal, symfunc
from .conformal import ProblemParams, validate_theorem_regime
from .errors import AdmissibilityError, InitializationError, ParameterError, SolveError
from .grid import GridSpec, SpacetimeField, jet_stack, spatial_jets, spatial_W, sup_norms
from .linearize import assemble_jacobian, solve_linear

__all__ = [
    "SolverOptions",
    "SolveTrace",
    "DegenerateResult",
    "build_initializer",
    "slice_initializer",
    "slice_stack_solve",
    "elliptic_slice_solve",
    "newton_solve",
    "homotopy_solve",
    "degenerate_solve",
    "choose_initializer",
]


@dataclass
class SolverOptions:
    newton_tol: float = 1e-9
    max_newton: int = 50
    damping_factor: float = 0.5
    damping_floor: float = 2.0**-20
    admissibility_margin: float = 1e-10
    tau_step: float = 0.1
    tau_step_min: float = 1e-4
    tau_step_max: float = 0.5
    epsilon_schedule: tuple = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5)
    linear_solver: str = "krylov"
    linear_rtol: float = 1e-8
    linear_maxiter: int = 80
    direct_limit: int = 20_000
    initializer_a_limit: float = 2.0**64
    deterministic: bool = False

    def __post_init__(self):
        if not 0 < self.damping_floor < 1 or not 0 < self.damping_factor < 1:
            raise ParameterError("damping factor and floor must lie in (0,1)")
        if self.newton_tol <= 0 or self.tau_step <= 0 or self.tau_step_min <= 0:
            raise ParameterError("tolerances and steps must be positive")


class SolveTrace:
    """Per-iteration records of every Newton/continuation step."""

    FIELDS = ("phase", "tau_or_epsilon", "iter", "residual_sup", "min_margin",
              "step_scale", "wall_ms")

    def __init__(self, deterministic=False):
        self.rows = []
        self.deterministic = deterministic
        self._t0 = time.perf_counter()

    def record(self, phase, tau_or_epsilon, iteration, residual_sup, min_margin,
               step_scale):
        wall = 0.0 if self.deterministic else (time.perf_counter() - self._t0) * 1e3
        self.rows.append({
            "phase": phase,
            "tau_or_epsilon": float(tau_or_epsilon),
            "iter": int(iteration),
            "residual_sup": float(residual_sup),
            "min_margin": float(min_margin),
            "step_scale": float(step_scale),
            "wall_ms": float(wall),
        })

    def lines(self):
        import json

        return [json.dumps(row, sort_keys=True) for row in self.rows]


@dataclass
class DegenerateResult:
    """Output of an epsilon-regularization run (possibly partial)."""

    mode: str
    eps: tuple
    fields: list
    extrapolated: object
    trace: SolveTrace
    sup_diffs: list
    monotone_ok: object
    monotone_worst: float
    norm_table: list
    failed: bool = False
    failure: str = ""


def _strict_stack(field, p, margin):
    """(strict mask, margins triple, logF) over interior nodes."""
    js = jet_stack(field, p)
    W = conformal.W_core(js.hess_u, js.grad_u, js.A, p.s, p.r, p.gamma)
    wm, utt, sigE = conformal.strict_margins(js.utt, W, js.grad_ut, p.k)
    strict = (wm > margin) & (utt > margin) & (sigE > margin)
    with np.errstate(all="ignore"):
        logF = (1 - p.k) * np.log(utt) + np.log(sigE)
    return strict, (wm, utt, sigE), logF


def _min_margin(margins):
    return float(min(m.min() for m in margins))


def _direct_F_stack(field, p):
    """F_k = u_tt sigma_k(W) - sigma_k^{ij}(W) u_ti u_tj over interior nodes."""
    js = jet_stack(field, p)
    W = conformal.W_core(js.hess_u, js.grad_u, js.A, p.s, p.r, p.gamma)
    quad = np.einsum(
        "ni,nij,nj->n", js.grad_ut, symfunc.sigma_grad(W, p.k, check=False), js.grad_ut
    )
    return js.utt * symfunc.sigma_of_matrix(W, p.k, check=False) - quad


def _interior_rhs(rhs, grid):
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape == grid.shape:
        rhs = rhs[1:-1]
    return rhs.reshape(grid.n_interior)


def _newton_core(field0, log_rhs, p, grid, opts, trace, phase, label):
    """Damped Newton keeping strict admissibility; returns (field, iters)."""
    margin = opts.admissibility_margin
    u = field0
    strict, margins, logF = _strict_stack(u, p, margin)
    if not strict.all():
        raise AdmissibilityError(
            f"start field not strictly admissible (min margin {_min_margin(margins):.3e})"
        )
    # The discrete u_tt is a second difference of O(|u|) values, so the log
    # residual cannot be resolved below its float quantization; the target
    # tolerance saturates at that floor (only relevant deep in the
    # epsilon-regularization path where u_tt is tiny).
    umax = max(1.0, float(np.abs(u.values).max()))
    utt_floor = max(float(margins[1].min()), 1e-300)
    noise_floor = 8.0 * np.finfo(float).eps * umax / (grid.tau_h**2 * utt_floor)
    tol = max(opts.newton_tol, noise_floor)
    res = logF - log_rhs
    res_sup = float(np.abs(res).max())
    trace.record(phase, label, 0, res_sup, _min_margin(margins), 1.0)
    if res_sup <= tol:
        return u, 0
    for it in range(1, opts.max_newton + 1):
        J = assemble_jacobian(u, p, grid, margin=0.0)
        delta = solve_linear(J, -res, opts)
        base = u.interior_flat()
        beta = 1.0
        accepted = False
        while beta >= opts.damping_floor:
            trial = u.with_interior(base + beta * delta)
            strict_t, margins_t, logF_t = _strict_stack(trial, p, margin)
            if strict_t.all():
                res_t = logF_t - log_rhs
                res_t_sup = float(np.abs(res_t).max())
                if res_t_sup < res_sup:
                    accepted = True
                    break
            beta *= opts.damping_factor
        if not accepted:
            raise SolveError(
                f"{phase}: damping floor reached at iteration {it} "
                f"(residual {res_sup:.3e})", trace=trace)
        u, res, res_sup = trial, res_t, res_t_sup
        trace.record(phase, label, it, res_sup, _min_margin(margins_t), beta)
        if res_sup <= tol:
            return u, it
    raise SolveError(f"{phase}: max_newton={opts.max_newton} exceeded "
                     f"(residual {res_sup:.3e})", trace=trace)


def newton_solve(field0, rhs, p, grid=None, opts=None, trace=None):
    """Solve the discrete log-residual G(R[u]) = ln(rhs) from a strict start.

    ``rhs`` is a positive spacetime field (full grid shape or interior
    block).  Boundary slices of field0 are never touched.
    """
    opts = opts or SolverOptions()
    grid = grid or field0.grid
    trace = trace or SolveTrace(opts.deterministic)
    rhs_int = _interior_rhs(rhs, grid)
    if not np.all(rhs_int > 0):
        raise SolveError("newton_solve requires rhs > 0 on the interior")
    u, _ = _newton_core(field0, np.log(rhs_int), p, grid, opts, trace, "newton", 0.0)
    return u, trace


def _convexify(v_field, p, grid, opts):
    """Add a t(t-1) bump, doubling its size until strictly admissible.

    The bump is spatially constant, so W is unchanged; doubling only has to
    buy u_tt > margin and sigma_k(E) > margin.
    """
    margin = opts.admissibility_margin
    strict, margins, _ = _strict_stack(v_field, p, margin)
    if margins[0].min() <= margin:
        worst = int(np.argmin(margins[0]))
        raise InitializationError(
            f"W of the initializer path leaves Gamma_{p.k} at node "
            f"{grid.node_of_row(worst)} (margin {margins[0].min():.3e})",
            node=grid.node_of_row(worst))
    t = grid.t_levels.reshape((-1,) + (1,) * grid.n)
    bump = t * (t - 1.0)
    a = 1.0
    while a <= opts.initializer_a_limit:
        w = SpacetimeField(grid, v_field.values + a * bump)
        strict, margins, _ = _strict_stack(w, p, margin)
        if strict.all():
            return w
        a *= 2.0
    worst = int(np.argmin(np.minimum(margins[1], margins[2])))
    raise InitializationError(
        f"initializer convexification failed: a exceeded {opts.initializer_a_limit:g} "
        f"with worst node {grid.node_of_row(worst)}", node=grid.node_of_row(worst))


def build_initializer(p: ProblemParams, grid: GridSpec, opts=None) -> SpacetimeField:
    """Closed-form admissible initializer (guaranteed for r > 0).

    v = (1-t) u0 + t u1 when s = 0, else ln((1-t)e^{s u0} + t e^{s u1})/s,
    then w = v + a t(t-1) with a doubled from 1 until strictly admissible.
    """
    opts = opts or SolverOptions()
    t = grid.t_levels.reshape((-1,) + (1,) * grid.n)
    u0 = np.broadcast_to(np.asarray(p.u0, dtype=float), grid.spatial_shape)
    u1 = np.broadcast_to(np.asarray(p.u1, dtype=float), grid.spatial_shape)
    if p.s == 0:
        v = (1 - t) * u0 + t * u1
    else:
        v = np.log((1 - t) * np.exp(p.s * u0) + t * np.exp(p.s * u1)) / p.s
    v[0], v[-1] = u0, u1
    return _convexify(SpacetimeField(grid, v), p, grid, opts)


def elliptic_slice_solve(p, grid, t_level, rhs_slice, opts=None, u_start=None,
                         trace=None):
    """Newton solve of the per-slice equation e^{-2ku} sigma_k(W[u]) = rhs.

    Requires gamma > 0 and rhs > 0.  The Newton direction comes from the
    linearization of ln sigma_k(W[u]) - 2ku, whose zeroth-order term -2k v
    carries the sign that keeps the operator invertible.  Convergence is
    measured on the raw residual sup-norm.
    """
    opts = opts or SolverOptions()
    trace = trace or SolveTrace(opts.deterministic)
    if not p.gamma > 0:
        raise ParameterError("elliptic_slice_solve requires gamma > 0")
    rhs = np.asarray(rhs_slice, dtype=float)
    if rhs.shape != grid.spatial_shape or not np.all(rhs > 0):
        raise SolveError("rhs_slice must be positive with the spatial shape")
    margin = opts.admissibility_margin
    A = p.A_field
    if A is None:
        raise ParameterError("elliptic_slice_solve needs the gridded A field")
    if u_start is None:
        u_start = np.zeros(grid.spatial_shape)
    u = np.array(u_start, dtype=float)
    log_rhs = np.log(rhs)

    def evaluate(uu):
        grad, hess = spatial_jets(uu, grid)
        W = conformal.W_core(hess, grad, A, p.s, p.r, p.gamma)
        flatW = W.reshape(-1, p.n, p.n)
        wm = symfunc.gamma_margin_matrix(flatW, p.k, check=False)
        with np.errstate(all="ignore"):
            sigW = symfunc.sigma_of_matrix(flatW, p.k, check=False)
            log_res = np.log(sigW) - 2 * p.k * uu.reshape(-1) - log_rhs.reshape(-1)
        raw = np.exp(-2 * p.k * uu.reshape(-1)) * sigW - rhs.reshape(-1)
        return grad, flatW, wm, sigW, log_res, raw

    grad, flatW, wm, sigW, log_res, raw = evaluate(u)
    if wm.min() <= margin:
        raise AdmissibilityError(f"slice start leaves Gamma_{p.k} "
                                 f"(margin {wm.min():.3e})")
    raw_sup = float(np.abs(raw).max())
    log_sup = float(np.abs(log_res).max())
    trace.record("slice", t_level, 0, raw_sup, float(wm.min()), 1.0)
    it = 0
    while raw_sup > opts.newton_tol:
        it += 1
        if it > opts.max_newton:
            raise SolveError(f"slice t={t_level}: max_newton exceeded "
                             f"(residual {raw_sup:.3e})", trace=trace)
        J = _spatial_jacobian(u, grad, flatW, sigW, p, grid)
        delta = solve_linear(J, -log_res, opts)
        beta, accepted = 1.0, False
        while beta >= opts.damping_floor:
            trial = u.reshape(-1) + beta * delta
            trial = trial.reshape(grid.spatial_shape)
            out = evaluate(trial)
            if out[2].min() > margin and float(np.abs(out[4]).max()) < log_sup:
                accepted = True
                break
            beta *= opts.damping_factor
        if not accepted:
            raise SolveError(f"slice t={t_level}: damping floor reached", trace=trace)
        u = trial
        grad, flatW, wm, sigW, log_res, raw = out
        raw_sup = float(np.abs(raw).max())
        log_sup = float(np.abs(log_res).max())
        trace.record("slice", t_level, it, raw_sup, float(wm.min()), beta)
    return u


def _spatial_jacobian(u, grad, flatW, sigW, p, grid):
    """Sparse Jacobian of the slice log-residual over spatial unknowns."""
    import scipy.sparse as sp

    n, h, S = grid.n, grid.h, grid.n_space
    sgW = symfunc.sigma_grad(flatW, p.k, check=False)
    geff = sgW / sigW[:, None, None]
    trg = np.trace(geff, axis1=-2, axis2=-1)
    gradf = grad.reshape(S, n)
    b = 2 * p.s * np.einsum("nij,nj->ni", geff, gradf) - p.r * trg[:, None] * gradf
    ghat_diag = np.einsum("naa->na", geff) + p.gamma * trg[:, None]

    zero = (0,) * n
    e = lambda a, d: tuple(d if i == a else 0 for i in range(n))
    offsets = {zero}
    for a in range(n):
        offsets.update({e(a, 1), e(a, -1)})
        for bb in range(a + 1, n):
            for sa in (1, -1):
                for sb in (1, -1):
                    off = list(zero)
                    off[a], off[bb] = sa, sb
                    offsets.add(tuple(off))
    base = np.arange(S).reshape(grid.spatial_shape)
    maps = {}
    for off in offsets:
        arr = base
        for a, d in enumerate(off):
            if d:
                arr = np.roll(arr, -d, axis=a)
        maps[off] = arr.reshape(-1)

    rows, cols, data = [], [], []

    def add(off, coef):
        rows.append(np.arange(S))
        cols.append(maps[off])
        data.append(np.asarray(coef, dtype=float))

    add(zero, -2 * ghat_diag.sum(axis=1) / h**2 - 2.0 * p.k * np.ones(S))
    for a in range(n):
        for d in (1, -1):
            add(e(a, d), ghat_diag[:, a] / h**2 + d * b[:, a] / (2 * h))
    for a in range(n):
        for bb in range(a + 1, n):
            for sa in (1, -1):
                for sb in (1, -1):
                    off = list(zero)
                    off[a], off[bb] = sa, sb
                    add(tuple(off), sa * sb * geff[:, a, bb] / (2 * h**2))
    return sp.coo_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(S, S)).tocsr()


def slice_stack_solve(p: ProblemParams, grid: GridSpec, opts=None, rhs=None,
                      trace=None) -> SpacetimeField:
    """Per-slice elliptic solves of e^{-2ku} sigma_k(W[u]) = rhs(x, t_m).

    ``rhs`` defaults to psi and may be a full (nt+2,)+spatial array; slices
    are solved level by level with warm starts from the previous level and
    stacked between the exact boundary slices u0, u1.  Requires gamma > 0.
    """
    opts = opts or SolverOptions()
    if not p.gamma > 0:
        raise ParameterError("slice_stack_solve requires gamma > 0")
    rhs = np.asarray(rhs if rhs is not None else p.psi, dtype=float)
    u0 = np.broadcast_to(np.asarray(p.u0, dtype=float), grid.spatial_shape)
    u1 = np.broadcast_to(np.asarray(p.u1, dtype=float), grid.spatial_shape)
    values = np.empty(grid.shape)
    values[0], values[-1] = u0, u1
    prev = u0
    for m in range(1, grid.nt + 1):
        t_m = grid.t_levels[m]
        try:
            prev = elliptic_slice_solve(p, grid, t_m, rhs[m], opts, u_start=prev,
                                        trace=trace)
        except (SolveError, AdmissibilityError) as exc:
            raise InitializationError(f"slice solve failed at t={t_m}: {exc}") from exc
        values[m] = prev
    return SpacetimeField(grid, values)


def slice_initializer(p: ProblemParams, grid: GridSpec, opts=None) -> SpacetimeField:
    """Initializer from per-slice elliptic solves (gamma > 0 route).

    Each interior time level solves e^{-2ku} sigma_k(W[u]) equal to the
    linear-in-t blend of the boundary values of that quantity; the stacked
    slices are then convexified with a t(t-1) bump.
    """
    opts = opts or SolverOptions()
    if not p.gamma > 0:
        raise ParameterError("slice_initializer requires gamma > 0")
    u0 = np.broadcast_to(np.asarray(p.u0, dtype=float), grid.spatial_shape)
    u1 = np.broadcast_to(np.asarray(p.u1, dtype=float), grid.spatial_shape)
    W0 = spatial_W(u0, p, grid).reshape(-1, p.n, p.n)
    W1 = spatial_W(u1, p, grid).reshape(-1, p.n, p.n)
    s0 = (np.exp(-2 * p.k * u0.reshape(-1))
          * symfunc.sigma_of_matrix(W0, p.k, check=False)).reshape(grid.spatial_shape)
    s1 = (np.exp(-2 * p.k * u1.reshape(-1))
          * symfunc.sigma_of_matrix(W1, p.k, check=False)).reshape(grid.spatial_shape)
    t = grid.t_levels.reshape((-1,) + (1,) * grid.n)
    blend = (1 - t) * s0 + t * s1
    return _convexify(slice_stack_solve(p, grid, opts, rhs=blend), p, grid, opts)


def choose_initializer(p, grid, opts=None):
    """r > 0: closed form; else gamma > 0: slice route; else refuse."""
    if p.r > 0:
        return build_initializer(p, grid, opts)
    if p.gamma > 0:
        return slice_initializer(p, grid, opts)
    raise InitializationError(
        "no admissible initializer construction outside r > 0 or gamma > 0")


def homotopy_solve(p: ProblemParams, grid: GridSpec, opts=None, target_rhs=None,
                   w=None, trace=None, phase="homotopy"):
    """Continuity process from F_k(w) to the target right side.

    Residual at tau = 0 is zero by construction.  The step doubles after two
    consecutive single-iteration Newton solves and halves on failure, with
    floor opts.tau_step_min.
    """
    opts = opts or SolverOptions()
    trace = trace or SolveTrace(opts.deterministic)
    target = _interior_rhs(target_rhs if target_rhs is not None else p.psi, grid)
    if not np.all(target > 0):
        raise SolveError(
            "homotopy_solve requires a positive target right side "
            "(use degenerate_solve for psi that vanishes)")
    u = w if w is not None else choose_initializer(p, grid, opts)
    strict, margins, _ = _strict_stack(u, p, opts.admissibility_margin)
    if not strict.all():
        raise AdmissibilityError(
            f"homotopy start not strictly admissible "
            f"(min margin {_min_margin(margins):.3e})")
    trace.record(phase, 0.0, 0, 0.0, _min_margin(margins), 1.0)
    F0 = _direct_F_stack(u, p)
    tau, step, streak = 0.0, opts.tau_step, 0
    while tau < 1.0:
        tau_next = min(1.0, tau + step)
        rhs = (1 - tau_next) * F0 + tau_next * target
        try:
            u_next, iters = _newton_core(u, np.log(rhs), p, grid, opts, trace,
                                         phase, tau_next)
        except SolveError:
            step *= 0.5
            if step < opts.tau_step_min:
                raise SolveError(f"{phase}: tau step fell below "
                                 f"{opts.tau_step_min} at tau={tau:.6f}", trace=trace)
            continue
        u, tau = u_next, tau_next
        if iters <= 1:
            streak += 1
            if streak >= 2:
                step = min(2 * step, opts.tau_step_max)
                streak = 0
        else:
            streak = 0
    return u, trace


def degenerate_solve(p: ProblemParams, grid: GridSpec, opts=None,
                     mode="rhs-epsilon") -> DegenerateResult:
    """epsilon-regularization driver for the degenerate equation.

    mode "rhs-epsilon" solves F_k = psi + eps (requires one of the two
    estimate regimes); mode "gamma-epsilon" additionally bumps gamma by eps
    (requires r != 0).  Solutions are warm-started along the schedule; the
    result carries consecutive sup differences, the pointwise
    eps-monotonicity check (rhs mode), a single indicative Richardson
    extrapolation of the last two fields, and a norm table per eps.
    """
    opts = opts or SolverOptions()
    if mode == "rhs-epsilon":
        regime = validate_theorem_regime(p)
        if not regime.satisfied:
            raise SolveError(f"rhs-epsilon mode outside both regimes: {regime.message}")
    elif mode == "gamma-epsilon":
        if p.r == 0:
            raise ParameterError("gamma-epsilon mode requires r != 0")
    else:
        raise ParameterError(f"unknown mode {mode!r}")
    schedule = tuple(sorted(opts.epsilon_schedule, reverse=True))
    psi_int = (_interior_rhs(p.psi, grid) if p.psi is not None
               else np.zeros(grid.n_interior))
    trace = SolveTrace(opts.deterministic)
    fields, failed, failure = [], False, ""
    prev = None
    for eps in schedule:
        p_eps = p if mode == "rhs-epsilon" else p.with_gamma(p.gamma + eps)
        target = psi_int + eps
        # sigma_k(E) scales like eps^k along the path, so the strictness
        # floor must shrink with eps or it blocks the deep stages.
        opts_eps = replace(opts, admissibility_margin=min(
            opts.admissibility_margin, 1e-4 * eps**p.k))
        try:
            if prev is None:
                u, _ = homotopy_solve(p_eps, grid, opts_eps, target_rhs=target,
                                      trace=trace, phase=f"eps={eps:g}")
            else:
                try:
                    u, _ = _newton_core(prev, np.log(target), p_eps, grid, opts_eps,
                                        trace, f"eps={eps:g}", eps)
                except (SolveError, AdmissibilityError):
                    u, _ = homotopy_solve(p_eps, grid, opts_eps, target_rhs=target,
                                          w=prev, trace=trace, phase=f"eps={eps:g}")
        except (SolveError, AdmissibilityError, InitializationError) as exc:
            failed, failure = True, f"eps={eps:g}: {exc}"
            break
        fields.append(u)
        prev = u

    eps_done = schedule[: len(fields)]
    sup_diffs = [float(np.abs(a.values - b.values).max())
                 for a, b in zip(fields, fields[1:])]
    monotone_ok, monotone_worst = None, 0.0
    if mode == "rhs-epsilon" and len(fields) >= 2:
        worst = max(float((a.values - b.values).max())
                    for a, b in zip(fields, fields[1:]))
        monotone_worst = worst
        monotone_ok = worst <= 1e-8
    extrapolated = None
    if len(fields) >= 2:
        e1, e2 = eps_done[-2], eps_done[-1]
        factor = e2 / (e1 - e2)
        extrapolated = SpacetimeField(
            grid, fields[-1].values + factor * (fields[-1].values - fields[-2].values))
    norm_table = [{"epsilon": e, **sup_norms(f, p).as_dict()}
                  for e, f in zip(eps_done, fields)]
    return DegenerateResult(mode, eps_done, fields, extrapolated, trace, sup_diffs,
                            monotone_ok, monotone_worst, norm_table, failed, failure)
