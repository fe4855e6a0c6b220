"""Numerical certification suite: property sweeps, estimate monitors,
viscosity spot checks, and the uniqueness approximation construction.

Every check is deterministic under a fixed seed; each owns an RNG stream
derived from (seed, check name).  Checks accept injected samples so the test
suite can verify its own sensitivity with corrupted inputs (injected samples
are treated as pre-filtered and only the conclusions are re-measured).
"""

import hashlib
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import conformal, symfunc
from .conformal import Jet, ProblemParams
from .errors import ParameterError
from .grid import GridSpec, SpacetimeField, jet_at, jet_stack, sup_norms
from .solver import SolverOptions, degenerate_solve, _direct_F_stack

__all__ = [
    "VerificationReport",
    "check_cone_propagation",
    "check_concavity",
    "check_maximum_principle",
    "monitor_estimates",
    "viscosity_spot_check",
    "uniqueness_approximation",
    "comparison_uniqueness_test",
    "sample_strict_jet_arrays",
    "sample_cone_matrices",
    "derive_rng",
]


@dataclass
class VerificationReport:
    name: str
    passed: bool
    worst_margin: float
    samples: int
    details: dict = dc_field(default_factory=dict)
    failures: list = dc_field(default_factory=list)
    report_only: bool = False

    def line(self):
        status = "PASS" if self.passed else ("INFO" if self.report_only else "FAIL")
        return (f"{self.name}: {status} worst_margin={self.worst_margin:.6e} "
                f"samples={self.samples}")

    def record(self):
        return {
            "name": self.name,
            "passed": bool(self.passed),
            "report_only": bool(self.report_only),
            "worst_margin": float(self.worst_margin),
            "samples": int(self.samples),
            "details": self.details,
            "failures": self.failures,
        }


def derive_rng(seed, name):
    """Independent generator for (seed, check-name), stable across runs."""
    digest = hashlib.sha256(name.encode()).digest()
    words = [int.from_bytes(digest[i:i + 4], "little") for i in range(0, 16, 4)]
    return np.random.default_rng([int(seed) & 0xFFFFFFFF, *words])


def sample_cone_matrices(rng, count, n, k, scale=1.0):
    """Symmetric matrices with spectrum in Gamma_k: cone-sampled eigenvalues
    conjugated by random orthogonal matrices."""
    out = np.empty((count, n, n))
    got = 0
    while got < count:
        m = count - got
        lam = rng.normal(0.8, 1.0, size=(2 * m + 8, n)) * scale
        keep = symfunc.gamma_margin(lam, k) > 1e-3 * scale
        lam = lam[keep][:m]
        if lam.shape[0] == 0:
            continue
        q, _ = np.linalg.qr(rng.normal(size=(lam.shape[0], n, n)))
        out[got:got + lam.shape[0]] = np.einsum("mij,mj,mkj->mik", q, lam, q)
        got += lam.shape[0]
    return out


def sample_strict_jet_arrays(rng, count, n, k, randomize_params=True):
    """Stacked strictly admissible jets plus the parameter draws.

    Returns a dict of arrays (utt, grad_u, grad_ut, hess, A, gamma, s, r,
    W, E) with all filters already applied: lambda(W) in Gamma_k, utt > 0,
    sigma_k(E) > 0.
    """
    keys = ("utt", "grad_u", "grad_ut", "hess", "A", "gamma", "s", "r", "W", "E")
    buf = {key: [] for key in keys}
    got = 0
    while got < count:
        m = 2 * (count - got) + 16
        hess = rng.normal(0.0, 0.45, size=(m, n, n))
        hess = 0.5 * (hess + np.swapaxes(hess, -1, -2))
        grad_u = rng.normal(0.0, 0.6, size=(m, n))
        grad_ut = rng.normal(0.0, 0.5, size=(m, n))
        utt = rng.uniform(0.15, 3.0, size=m)
        A = sample_cone_matrices(rng, m, n, k) + 0.4 * np.eye(n)
        if randomize_params:
            gamma = np.where(rng.random(m) < 0.5, 0.0, rng.uniform(0.0, 1.0, m))
            s = rng.uniform(-1.2, 1.2, size=m)
            r = rng.uniform(-1.2, 1.2, size=m)
        else:
            gamma = np.zeros(m)
            s = np.zeros(m)
            r = np.zeros(m)
        lap = np.trace(hess, axis1=-2, axis2=-1)
        g2 = np.einsum("mi,mi->m", grad_u, grad_u)
        scal = gamma * lap - 0.5 * r * g2
        W = (hess + s[:, None, None] * np.einsum("mi,mj->mij", grad_u, grad_u)
             + scal[:, None, None] * np.eye(n) + A)
        wm = symfunc.gamma_margin_matrix(W, k, check=False)
        E = conformal.E_core(utt, W, grad_ut)
        sigE = symfunc.sigma_of_matrix(E, k, check=False)
        keep = (wm > 1e-8) & (utt > 0) & (sigE > 1e-10)
        idx = np.nonzero(keep)[0][: count - got]
        for key, arr in (("utt", utt), ("grad_u", grad_u), ("grad_ut", grad_ut),
                         ("hess", hess), ("A", A), ("gamma", gamma), ("s", s),
                         ("r", r), ("W", W), ("E", E)):
            buf[key].append(arr[idx])
        got += idx.size
    return {key: np.concatenate(vals) for key, vals in buf.items()}


def check_cone_propagation(seed, samples=10_000, jets=None, k_range=(1, 5),
                           n_range=(2, 5)):
    """lambda(W) in Gamma_k, u_tt > 0, sigma_k(E) > 0 imply lambda(E) in
    Gamma_k: measured as the cone margin of E over filtered random jets.

    ``jets`` overrides sampling with pre-filtered (E, k) pairs so the suite
    can prove it detects violations.
    """
    failures, worst, total = [], np.inf, 0
    if jets is not None:
        for E, k in jets:
            margin = symfunc.gamma_margin_matrix(np.asarray(E, dtype=float), k)
            worst = min(worst, float(margin))
            total += 1
            if margin <= 0:
                failures.append({"E": np.asarray(E).tolist(), "k": k,
                                 "margin": float(margin)})
    else:
        rng = derive_rng(seed, "cone-propagation")
        dims = [(n, k) for n in range(n_range[0], n_range[1] + 1)
                for k in range(k_range[0], min(k_range[1], n) + 1)]
        per = max(1, samples // len(dims))
        for n, k in dims:
            data = sample_strict_jet_arrays(rng, per, n, k)
            margin = symfunc.gamma_margin_matrix(data["E"], k, check=False)
            total += per
            worst = min(worst, float(margin.min()))
            bad = np.nonzero(margin <= 0)[0]
            for i in bad[:5]:
                failures.append({"n": n, "k": k, "margin": float(margin[i])})
    return VerificationReport("cone-propagation", len(failures) == 0,
                              float(worst), total,
                              details={"tolerance": 0.0}, failures=failures)


def _sample_S_matrices(rng, count, n, k):
    """Augmented matrices sampled from the cone S (rejection on F_k > 0)."""
    out = np.empty((count, n + 1, n + 1))
    got = 0
    while got < count:
        m = 2 * (count - got) + 8
        r = sample_cone_matrices(rng, m, n, k)
        r00 = rng.uniform(0.1, 3.0, size=m)
        r0 = rng.normal(0.0, 0.6, size=(m, n))
        R = np.zeros((m, n + 1, n + 1))
        R[:, 0, 0] = r00
        R[:, 0, 1:] = r0
        R[:, 1:, 0] = r0
        R[:, 1:, 1:] = r
        F = conformal.F_k_core(R, k)
        idx = np.nonzero(F > 1e-8)[0][: count - got]
        out[got:got + idx.size] = R[idx]
        got += idx.size
    return out


def check_concavity(seed, samples=10_000, pairs=None, tol=1e-10,
                    k_range=(1, 5), n_range=(2, 5)):
    """Midpoint concavity of ln F_k and F_k^{1/(k+1)} on pairs in S, plus
    midpoint membership in S (convexity of the cone).

    ``pairs`` injects (R_a, R_b, k) triples treated as pre-filtered.
    """
    worst_ln, worst_pw, worst_mid = np.inf, np.inf, np.inf
    failures, total = [], 0

    def judge(Ra, Rb, k):
        nonlocal worst_ln, worst_pw, worst_mid, total
        M = 0.5 * (Ra + Rb)
        Fa, Fb, Fm = (conformal.F_k_core(X, k) for X in (Ra, Rb, M))
        mid_margin = np.minimum(
            symfunc.gamma_margin_matrix(M[..., 1:, 1:], k, check=False), Fm)
        with np.errstate(all="ignore"):
            ln_margin = np.log(Fm) - 0.5 * (np.log(Fa) + np.log(Fb))
            p = 1.0 / (k + 1)
            pw_margin = Fm**p - 0.5 * (Fa**p + Fb**p)
        ln_margin = np.where(np.isfinite(ln_margin), ln_margin, -np.inf)
        pw_margin = np.where(np.isfinite(pw_margin), pw_margin, -np.inf)
        total += int(np.size(Fa))
        worst_mid = min(worst_mid, float(np.min(mid_margin)))
        worst_ln = min(worst_ln, float(np.min(ln_margin)))
        worst_pw = min(worst_pw, float(np.min(pw_margin)))
        bad = np.nonzero((ln_margin < -tol) | (pw_margin < -tol) | (mid_margin <= 0))[0]
        for i in np.atleast_1d(bad)[:5]:
            failures.append({"k": int(k), "ln_margin": float(np.atleast_1d(ln_margin)[i]),
                             "pw_margin": float(np.atleast_1d(pw_margin)[i]),
                             "mid_margin": float(np.atleast_1d(mid_margin)[i])})

    if pairs is not None:
        for Ra, Rb, k in pairs:
            judge(np.asarray(Ra, dtype=float)[None], np.asarray(Rb, dtype=float)[None], k)
    else:
        rng = derive_rng(seed, "concavity")
        dims = [(n, k) for n in range(n_range[0], n_range[1] + 1)
                for k in range(k_range[0], min(k_range[1], n) + 1)]
        per = max(1, samples // len(dims))
        for n, k in dims:
            R = _sample_S_matrices(rng, 2 * per, n, k)
            judge(R[:per], R[per:2 * per], k)
    passed = len(failures) == 0
    worst = min(worst_ln, worst_pw)
    return VerificationReport("concavity", passed, float(worst), total,
                              details={"tolerance": tol,
                                       "worst_ln": float(worst_ln),
                                       "worst_power": float(worst_pw),
                                       "worst_midpoint_membership": float(worst_mid)},
                              failures=failures)


def check_maximum_principle(solution: SpacetimeField, p: ProblemParams,
                            grid: GridSpec = None, tol=1e-8):
    """u <= (1-t) u0 + t u1 + tol everywhere and discrete u_tt >= -tol."""
    grid = grid or solution.grid
    t = grid.t_levels.reshape((-1,) + (1,) * grid.n)
    chord = (1 - t) * p.u0 + t * p.u1
    excess = solution.values - chord
    js = jet_stack(solution, p)
    failures = []
    worst_excess = float(excess.max())
    worst_utt = float(js.utt.min())
    if worst_excess > tol:
        flat = int(np.argmax(excess))
        node = np.unravel_index(flat, grid.shape)
        failures.append({"check": "chord", "node": [int(i) for i in node],
                         "excess": worst_excess})
    if worst_utt < -tol:
        row = int(np.argmin(js.utt))
        m, idx = grid.node_of_row(row)
        failures.append({"check": "utt", "node": [int(m), *map(int, idx)],
                         "utt": worst_utt})
    passed = not failures
    worst = min(tol - worst_excess, worst_utt + tol)
    return VerificationReport("maximum-principle", passed, float(worst),
                              int(solution.values.size),
                              details={"tolerance": tol,
                                       "max_excess": worst_excess,
                                       "min_utt": worst_utt},
                              failures=failures)


def monitor_estimates(solution: SpacetimeField, p: ProblemParams,
                      grid: GridSpec = None, tol=1e-8, eps_table=None):
    """The six sup-norms plus the pointwise trace inequality
    |grad u_t|^2 <= u_tt tr(W[u]) + tol (Gamma_1 consequence)."""
    grid = grid or solution.grid
    norms = sup_norms(solution, p)
    js = jet_stack(solution, p)
    W = conformal.W_core(js.hess_u, js.grad_u, js.A, p.s, p.r, p.gamma)
    trW = np.trace(W, axis1=-2, axis2=-1)
    slack = js.utt * trW - np.einsum("ni,ni->n", js.grad_ut, js.grad_ut)
    worst = float(slack.min())
    failures = []
    if worst < -tol:
        row = int(np.argmin(slack))
        m, idx = grid.node_of_row(row)
        failures.append({"check": "trace-inequality",
                         "node": [int(m), *map(int, idx)], "slack": worst})
    details = {"tolerance": tol, "norms": norms.as_dict()}
    if eps_table is not None:
        details["epsilon_sweep"] = eps_table
    return VerificationReport("estimate-monitors", not failures, worst,
                              int(js.utt.size), details=details, failures=failures)


_STENCIL_CACHE = {}


def _stencil_offsets(n):
    """Second-order stencil neighborhood offsets (dm, dx tuple)."""
    if n in _STENCIL_CACHE:
        return _STENCIL_CACHE[n]
    offs = []
    zero = (0,) * n
    for dm in (-1, 1):
        offs.append((dm, zero))
    for a in range(n):
        for d in (-1, 1):
            dx = tuple(d if i == a else 0 for i in range(n))
            offs.append((0, dx))
            for dm in (-1, 1):
                offs.append((dm, dx))
    for a in range(n):
        for b in range(a + 1, n):
            for sa in (-1, 1):
                for sb in (-1, 1):
                    dx = [0] * n
                    dx[a], dx[b] = sa, sb
                    offs.append((0, tuple(dx)))
    _STENCIL_CACHE[n] = offs
    return offs


def _in_closure_S(R, k, ctol):
    r = R[1:, 1:]
    return (symfunc.gamma_margin_matrix(r, k, check=False) >= -ctol
            and R[0, 0] >= -ctol
            and conformal.F_k_of(R, k) >= -ctol)


def viscosity_spot_check(solution: SpacetimeField, p: ProblemParams,
                         grid: GridSpec = None, seed=0, trials=1000, tol=1e-6,
                         push=1.0):
    """Randomized sub/supersolution spot check with quadratic test functions.

    At random interior nodes the second-order jet of u is perturbed by a
    spacetime-NSD (resp. PSD) quadratic so that u - phi has a local minimum
    (resp. maximum) at the node over the full stencil neighborhood; the
    supersolution disjunction (R_phi outside closure(S), or F_k(R_phi) <=
    psi + tol) and the subsolution inequality F_k(R_phi) >= psi - tol are
    then evaluated.  This samples quadratics with coefficients bounded by
    10x the local jet scale; it is a spot check, not a certification.
    ``push = 0`` checks the exact second-order interpolant itself.
    """
    grid = grid or solution.grid
    rng = derive_rng(seed, "viscosity-spot-check")
    offsets = _stencil_offsets(grid.n)
    V = solution.values
    h, tau = grid.h, grid.tau_h
    violations, failures, touched = 0, [], 0
    for _ in range(trials):
        m = int(rng.integers(1, grid.nt + 1))
        idx = tuple(int(i) for i in rng.integers(0, grid.nx, size=grid.n))
        jet = jet_at(solution, (m, idx), p)
        scale = max(1.0, abs(jet.utt), float(np.abs(jet.hess_u).max()),
                    float(np.abs(jet.grad_ut).max()))
        for sign, branch in ((-1.0, "super"), (1.0, "sub")):
            if push > 0:
                c0 = rng.uniform(0.05, 0.5) * push
                v = rng.normal(0.0, 1.0, size=grid.n + 1)
                v *= np.sqrt(rng.uniform(0.0, 2.0)) / max(np.linalg.norm(v), 1e-12)
                P = sign * scale * (c0 * np.eye(grid.n + 1) + np.outer(v, v))
            else:
                P = np.zeros((grid.n + 1, grid.n + 1))
            utt_phi = jet.utt + P[0, 0]
            gut_phi = jet.grad_ut + P[0, 1:]
            hess_phi = jet.hess_u + P[1:, 1:]
            if push > 0:
                # verify the touching numerically over the stencil
                ok = True
                for dm, dx in offsets:
                    delta = np.array([dm * tau, *[d * h for d in dx]])
                    quad = (jet.u + jet.ut * delta[0] + jet.grad_u @ delta[1:]
                            + 0.5 * (delta[0] ** 2 * utt_phi
                                     + 2 * delta[0] * (gut_phi @ delta[1:])
                                     + delta[1:] @ hess_phi @ delta[1:]))
                    uval = V[((m + dm) % grid.shape[0],)
                             + tuple((idx[a] + dx[a]) % grid.nx for a in range(grid.n))]
                    if m + dm < 0 or m + dm > grid.nt + 1:
                        continue
                    gap = sign * (quad - uval)
                    if gap < -1e-10 * scale:
                        ok = False
                        break
                if not ok:
                    continue
            touched += 1
            W_phi = conformal.W_core(hess_phi, jet.grad_u, jet.A_here, p.s, p.r,
                                     p.gamma)
            R_phi = conformal.R_core(utt_phi, gut_phi, W_phi)
            F_phi = conformal.F_k_of(R_phi, p.k)
            psi_here = jet.psi_here if np.isfinite(jet.psi_here) else 0.0
            if branch == "super":
                ok = (not _in_closure_S(R_phi, p.k, 1e-10 * scale)) or (
                    F_phi <= psi_here + tol)
            else:
                ok = F_phi >= psi_here - tol
            if not ok:
                violations += 1
                if len(failures) < 5:
                    failures.append({"branch": branch, "node": [m, *idx],
                                     "F_phi": float(F_phi), "psi": float(psi_here)})
    rate = violations / max(touched, 1)
    return VerificationReport("viscosity-spot-check", violations == 0, -rate,
                              touched,
                              details={"tolerance": tol, "violation_rate": rate,
                                       "push": push}, failures=failures)


def _smooth(values, grid, beta):
    """One stencil-weighted averaging pass on the interior slices."""
    if beta == 0:
        return values.copy()
    V = values
    acc = V[2:] + V[:-2]
    count = 2 + 2 * grid.n
    for a in range(grid.n):
        acc = acc + np.roll(V, -1, axis=a + 1)[1:-1] + np.roll(V, 1, axis=a + 1)[1:-1]
    out = V.copy()
    out[1:-1] = (1 - beta) * V[1:-1] + beta * acc / count
    return out


def uniqueness_approximation(solution: SpacetimeField, p: ProblemParams,
                             grid: GridSpec = None, delta=1e-2, opts=None):
    """Admissible u_delta = (1-theta) u + theta t(t-1), smoothed, with
    0 < F_k(u_delta) <= delta and ||u - u_delta||_inf <= delta.

    The standing cone condition (r/2, ..., r/2, r/2 - s) in closure(Gamma_k)
    is checked up front; the estimate-regime hypotheses are reported, not
    enforced.  theta is found by downward halving from delta / max|u - t(t-1)|;
    the smoothing weight is halved (down to zero) whenever it would break the
    bounds.  Returns (field or None, report); theta is non-increasing in delta.
    """
    grid = grid or solution.grid
    opts = opts or SolverOptions()
    vec = np.full(p.n, p.r / 2.0)
    vec[-1] = p.r / 2.0 - p.s
    vec_margin = symfunc.gamma_margin(vec, p.k)
    if vec_margin < 0:
        raise ParameterError(
            f"(r/2,...,r/2,r/2-s) = {vec.tolist()} is outside closure(Gamma_{p.k}) "
            f"(margin {vec_margin:.3e}); approximation hypothesis fails")
    regime_i = p.gamma > 0 and p.r >= 0 and 2 * p.s * p.k <= p.r * p.n
    regime_ii = p.r > 0 and 2 * p.s * p.k <= p.r * p.n
    t = grid.t_levels.reshape((-1,) + (1,) * grid.n)
    bump = t * (t - 1.0)
    M = float(np.abs(solution.values - bump).max())
    theta = min(0.5, delta / max(M, 1e-30))
    best_fail = None
    for _ in range(80):
        base = (1 - theta) * solution.values + theta * bump
        for beta in (0.25, 0.125, 0.0625, 0.0):
            candidate = SpacetimeField(grid, _smooth(base, grid, beta))
            F = _direct_F_stack(candidate, p)
            sup_dev = float(np.abs(candidate.values - solution.values).max())
            fmin, fmax = float(F.min()), float(F.max())
            if fmin > 0 and fmax <= delta and sup_dev <= delta:
                details = {"theta": theta, "smoothing_weight": beta,
                           "F_min": fmin, "F_max": fmax, "sup_deviation": sup_dev,
                           "delta": delta, "vector_margin": float(vec_margin),
                           "regime_i": bool(regime_i), "regime_ii": bool(regime_ii)}
                report = VerificationReport("uniqueness-approximation", True,
                                            fmin, int(F.size), details=details)
                return candidate, report
            row = int(np.argmin(F)) if fmin <= 0 else int(np.argmax(F))
            best_fail = {"theta": theta, "beta": beta, "F_min": fmin,
                         "F_max": fmax, "sup_deviation": sup_dev,
                         "worst_node": [int(x) for pair in [grid.node_of_row(row)]
                                        for x in (pair[0], *pair[1])]}
        theta *= 0.5
        if theta < 1e-300:
            break
    report = VerificationReport("uniqueness-approximation", False,
                                float("-inf"), 0,
                                details={"delta": delta}, failures=[best_fail])
    return None, report


def comparison_uniqueness_test(p: ProblemParams, grid: GridSpec, delta=1e-2,
                               opts=None, run1=None, run2=None):
    """Two independent degenerate runs compared through their approximants.

    Builds u_delta approximants for both runs (the second bound is the
    minimum nodal F_k of the first approximant) and asserts
    ||u1 - u2||_inf <= 2 delta + solver slack.  Outside the uniqueness
    hypotheses the check is downgraded to report-only.
    """
    opts = opts or SolverOptions()
    regime_i = p.gamma > 0 and p.r >= 0 and 2 * p.s * p.k <= p.r * p.n
    regime_ii = p.r > 0 and 2 * p.s * p.k <= p.r * p.n
    vec = np.full(p.n, p.r / 2.0)
    vec[-1] = p.r / 2.0 - p.s
    vec_ok = symfunc.gamma_margin(vec, p.k) >= 0
    report_only = not ((regime_i or regime_ii) and vec_ok)
    if run1 is None:
        run1 = degenerate_solve(p, grid, opts, mode="rhs-epsilon")
    if run2 is None:
        if p.r != 0:
            run2 = degenerate_solve(p, grid, opts, mode="gamma-epsilon")
        else:
            half = SolverOptions(**{**opts.__dict__,
                                    "epsilon_schedule": tuple(
                                        e / 2 for e in opts.epsilon_schedule)})
            run2 = degenerate_solve(p, grid, half, mode="rhs-epsilon")
    u1 = run1.extrapolated or run1.fields[-1]
    u2 = run2.extrapolated or run2.fields[-1]
    diff = float(np.abs(u1.values - u2.values).max())
    if not vec_ok:
        # no approximation construction is available; report the raw distance
        details = {"diff_sup": diff, "delta": delta, "vector_condition": False,
                   "regime_i": bool(regime_i), "regime_ii": bool(regime_ii)}
        return VerificationReport("comparison-uniqueness", True, diff,
                                  int(u1.values.size), details=details,
                                  report_only=True)
    v1, rep1 = uniqueness_approximation(u1, p, grid, delta / 2, opts)
    if v1 is None:
        return VerificationReport("comparison-uniqueness", False, -np.inf, 0,
                                  details={"stage": "first approximant failed"},
                                  failures=rep1.failures)
    delta2 = min(rep1.details["F_min"], delta / 2)
    v2, rep2 = uniqueness_approximation(u2, p, grid, delta2, opts)
    slack = (run1.sup_diffs[-1] if run1.sup_diffs else 0.0) + \
            (run2.sup_diffs[-1] if run2.sup_diffs else 0.0) + 10 * opts.newton_tol
    bound = 2 * delta + slack
    passed = diff <= bound
    details = {"diff_sup": diff, "bound": bound, "delta": delta,
               "second_delta": delta2, "solver_slack": slack,
               "theta_1": rep1.details["theta"],
               "theta_2": rep2.details["theta"] if v2 is not None else None,
               "regime_i": bool(regime_i), "regime_ii": bool(regime_ii)}
    if report_only:
        return VerificationReport("comparison-uniqueness", True, bound - diff,
                                  int(u1.values.size), details=details,
                                  report_only=True)
    return VerificationReport("comparison-uniqueness", passed, bound - diff,
                              int(u1.values.size), details=details)
