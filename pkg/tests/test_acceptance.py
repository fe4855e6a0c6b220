"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines and timings.
"""

import math
import time

import numpy as np
import pytest

from gsge import cli
from gsge import conformal as cf
from gsge import fields as fl
from gsge import linearize as lin
from gsge import solver as sv
from gsge import symfunc as sf
from gsge import verifier as vf
from gsge.conformal import Jet, ProblemParams
from gsge.grid import GridSpec, SpacetimeField

from util import rel_err

SEED = 20260808


def report(num, ok, msg):
    status = "PASS" if ok else "FAIL"
    print(f"criterion {num:2d} {status}: {msg}")
    assert ok, f"criterion {num}: {msg}"


# ---------------------------------------------------------------- fixtures

@pytest.fixture(scope="module")
def manufactured_runs():
    """Criterion 7/8 solves: coarse+fine main problem plus a schouten run."""
    out = {}
    for tag, (nx, nt) in (("coarse", (16, 7)), ("fine", (32, 15))):
        g = GridSpec(n=2, nx=nx, nt=nt)
        p, ustar, _ = fl.manufactured_problem(g, k=2, gamma=0.5, s=0.4, r=1.0,
                                              A_const=2.0)
        t0 = time.perf_counter()
        u, trace = sv.homotopy_solve(p, g)
        out[tag] = {"grid": g, "p": p, "u": u, "trace": trace,
                    "err": float(np.abs(u.values - ustar.values).max()),
                    "seconds": time.perf_counter() - t0}
    g = GridSpec(n=2, nx=16, nt=7)
    s, r, gamma = cf.preset_params("schouten")
    p, ustar, _ = fl.manufactured_problem(g, k=1, gamma=gamma, s=s, r=r,
                                          A_const=1.5)
    u, trace = sv.homotopy_solve(p, g)
    out["schouten"] = {"grid": g, "p": p, "u": u, "trace": trace,
                       "err": float(np.abs(u.values - ustar.values).max())}
    return out


@pytest.fixture(scope="module")
def geodesic_run():
    """Criterion 9/10 epsilon-regularized constant-boundary geodesic."""
    g = GridSpec(n=2, nx=16, nt=7)
    p = fl.constant_geodesic_problem(g, k=2, gamma=0.5, s=0.4, r=1.0,
                                     A_const=1.5, c=1.0)
    t0 = time.perf_counter()
    res = sv.degenerate_solve(p, g)
    return {"grid": g, "p": p, "res": res, "seconds": time.perf_counter() - t0}


# ---------------------------------------------------------------- criteria

def test_criterion_01_sigma_algebra():
    rng = vf.derive_rng(SEED, "criterion-1")
    t0 = time.perf_counter()
    total, worst = 0, 0.0
    per_n = 2000
    for n in range(2, 7):
        A = rng.normal(size=(per_n, n, n))
        A = 0.5 * (A + A.swapaxes(-1, -2))
        X = rng.normal(size=(per_n, n))
        ev = np.linalg.eigvalsh(A)
        for k in range(1, n + 1):
            sig = sf.sigma_of_matrix(A, k, check=False)
            orc = sf.sigma_all_of_spectrum(ev, k)[:, k]
            G = sf.sigma_grad(A, k, check=False)
            s_km1 = (sf.sigma_of_matrix(A, k - 1, check=False) if k > 1
                     else np.ones(per_n))
            trace_lhs = np.einsum("mii->m", G)
            euler_lhs = np.einsum("mij,mij->m", G, A)
            l1, r1, l2, r2 = sf.rank_one_identities(A, X, k)
            # relative to the monomial magnitude: sigma_k of |lambda| and the
            # absolute-value contractions bound the terms entering each
            # identity before cancellation
            B = A - np.einsum("mi,mj->mij", X, X)
            sabs = sf.sigma_all_of_spectrum(np.abs(ev), k)[:, k]
            sabsB = sf.sigma_all_of_spectrum(np.abs(np.linalg.eigvalsh(B)), k)[:, k]
            q_abs = np.einsum("mi,mij,mj->m", np.abs(X),
                              np.abs(sf.sigma_grad(B, k, check=False)), np.abs(X))
            q_absA = np.einsum("mi,mij,mj->m", np.abs(X), np.abs(G), np.abs(X))
            scale = np.maximum.reduce([
                np.ones(per_n), sabs, sabsB, q_abs, q_absA, np.abs(sig), np.abs(orc),
                np.abs(trace_lhs), np.einsum("mij->m", np.abs(G * A)),
                np.abs(r1), np.abs(l2), np.abs(r2)])
            errs = np.maximum.reduce([
                np.abs(sig - orc),
                np.abs(trace_lhs - (n - k + 1) * s_km1),
                np.abs(euler_lhs - k * sig),
                np.abs(l1 - r1),
                np.abs(l2 - r2)]) / scale
            worst = max(worst, float(errs.max()))
        total += per_n
    dt = time.perf_counter() - t0
    report(1, worst < 1e-10 and dt < 10,
           f"{total} instances, worst identity error {worst:.2e} "
           f"(tol 1e-10), {dt:.1f}s")


def test_criterion_02_equation_equivalence():
    rng = vf.derive_rng(SEED, "criterion-2")
    t0 = time.perf_counter()
    worst, total = 0.0, 0
    dims = [(n, k) for n in (2, 3, 4, 5) for k in range(1, n + 1)]
    per = 10_000 // len(dims) + 1
    for n, k in dims:
        data = vf.sample_strict_jet_arrays(rng, per, n, k)
        for i in range(per):
            jet = Jet(0.0, 0.0, float(data["utt"][i]), data["grad_u"][i],
                      data["grad_ut"][i], data["hess"][i], data["A"][i])
            p = ProblemParams(n=n, k=k, gamma=float(data["gamma"][i]),
                              s=float(data["s"][i]), r=float(data["r"][i]))
            direct, via = cf.residual_pair(jet, p)
            scale = abs(jet.utt) * abs(
                sf.sigma_of_matrix(data["W"][i], k, check=False))
            worst = max(worst, rel_err(direct, via, scale))
            total += 1
    dt = time.perf_counter() - t0
    report(2, worst < 1e-10 and dt < 5,
           f"{total} strict jets, worst |direct - via_E| {worst:.2e} relative "
           f"(tol 1e-10), {dt:.1f}s")


def test_criterion_03_concavity():
    t0 = time.perf_counter()
    rep = vf.check_concavity(SEED, samples=10_000)
    dt = time.perf_counter() - t0
    report(3, rep.passed and rep.details["worst_midpoint_membership"] > 0
           and dt < 30,
           f"{rep.samples} pairs in S, worst ln/power margins "
           f"{rep.details['worst_ln']:.2e}/{rep.details['worst_power']:.2e} "
           f"(floor -1e-10), midpoints in S, {dt:.1f}s")


def test_criterion_04_cone_propagation():
    t0 = time.perf_counter()
    rep = vf.check_cone_propagation(SEED, samples=10_000)
    dt = time.perf_counter() - t0
    report(4, rep.passed and dt < 10,
           f"{rep.samples} filtered jets, zero violations, worst margin of E "
           f"{rep.worst_margin:.2e}, {dt:.1f}s")


def test_criterion_05_ellipticity():
    jet_ref = Jet(0.0, 0.0, 2.0, np.zeros(3), np.array([1.0, 0.0, 0.0]),
                  np.zeros((3, 3)), np.eye(3))
    p_ref = ProblemParams(n=3, k=2, gamma=0.0, s=1.0, r=1.0)
    exact = lin.ellipticity_form(jet_ref, p_ref, np.array([1.0, 0, 0, 0]))
    rng = vf.derive_rng(SEED, "criterion-5")
    t0 = time.perf_counter()
    worst_gap, min_value, total = 0.0, np.inf, 0
    dims = [(n, k) for n in (2, 3, 4) for k in range(1, n + 1)]
    per = 10_000 // len(dims) + 1
    for n, k in dims:
        data = vf.sample_strict_jet_arrays(rng, per, n, k)
        for i in range(per):
            jet = Jet(0.0, 0.0, float(data["utt"][i]), data["grad_u"][i],
                      data["grad_ut"][i], data["hess"][i], data["A"][i])
            p = ProblemParams(n=n, k=k, gamma=float(data["gamma"][i]),
                              s=float(data["s"][i]), r=float(data["r"][i]))
            xi = rng.normal(size=n + 1)
            while not xi.any():
                xi = rng.normal(size=n + 1)
            a = lin.ellipticity_form(jet, p, xi)
            b = lin.ellipticity_form_direct(jet, p, xi)
            worst_gap = max(worst_gap, rel_err(a, b))
            min_value = min(min_value, a)
            total += 1
    dt = time.perf_counter() - t0
    report(5, exact == 6.0 and min_value > 0 and worst_gap < 1e-10 and dt < 10,
           f"reference value {exact} (exact 6), {total} pairs all positive "
           f"(min {min_value:.2e}), forms agree to {worst_gap:.2e}, {dt:.1f}s")


def test_criterion_06_jacobian_fd():
    g = GridSpec(n=2, nx=16, nt=7)
    p, ustar, _ = fl.manufactured_problem(g, k=2, gamma=0.5, s=0.4, r=1.0,
                                          A_const=2.0)
    rng = vf.derive_rng(SEED, "criterion-6")
    t0 = time.perf_counter()
    worst = 0.0
    for trial in range(20):
        amp = 1e-4
        while True:
            field = ustar.with_interior(
                ustar.interior_flat() + amp * rng.normal(size=g.n_interior))
            strict, _, _ = sv._strict_stack(field, p, 1e-10)
            if strict.all():
                break
            amp *= 0.5
        J = lin.assemble_jacobian(field, p, g)
        v = rng.normal(size=g.n_interior)
        eps = 1e-6
        _, _, up = sv._strict_stack(field.with_interior(
            field.interior_flat() + eps * v), p, 0.0)
        _, _, dn = sv._strict_stack(field.with_interior(
            field.interior_flat() - eps * v), p, 0.0)
        fd = (up - dn) / (2 * eps)
        jv = J.matvec(v)
        worst = max(worst, float(np.abs(jv - fd).max() / (1 + np.abs(jv).max())))
    dt = time.perf_counter() - t0
    report(6, worst <= 1e-5 and dt < 60,
           f"20 (field, direction) pairs at n=2 nx=16 nt=7, worst directional "
           f"mismatch {worst:.2e} (tol 1e-5), {dt:.1f}s")


def test_criterion_07_manufactured_convergence(manufactured_runs):
    coarse, fine = manufactured_runs["coarse"], manufactured_runs["fine"]
    order = math.log2(coarse["err"] / fine["err"])
    seconds = coarse["seconds"] + fine["seconds"]
    report(7, 1.7 <= order <= 2.3 and seconds < 300,
           f"sup errors {coarse['err']:.3e} -> {fine['err']:.3e}, observed "
           f"order {order:.3f} (2.0 +- 0.3), {seconds:.0f}s")


def test_criterion_08_homotopy_endpoints(manufactured_runs):
    ok = True
    msgs = []
    for tag in ("coarse", "fine", "schouten"):
        trace = manufactured_runs[tag]["trace"]
        first, last = trace.rows[0], trace.rows[-1]
        ok = ok and first["residual_sup"] == 0.0 and first["tau_or_epsilon"] == 0.0
        ok = ok and last["residual_sup"] <= 1e-9 and last["tau_or_epsilon"] == 1.0
        msgs.append(f"{tag}: res(tau=0)={first['residual_sup']:.1e} "
                    f"res(tau=1)={last['residual_sup']:.1e}")
    p = manufactured_runs["schouten"]["p"]
    regime = cf.validate_theorem_regime(p)
    ok = ok and regime.growth_regime
    report(8, ok, "; ".join(msgs) + f"; schouten regime 2sk<=rn holds: "
                                    f"{regime.growth_regime}")


def test_criterion_09_degenerate_geodesic(geodesic_run):
    g, p, res = geodesic_run["grid"], geodesic_run["p"], geodesic_run["res"]
    ok = not res.failed
    sup_err = float(np.abs(res.fields[-1].values - 1.0).max())
    ok = ok and res.eps[-1] == 1e-5 and sup_err <= 1e-6
    ok = ok and res.monotone_ok and res.monotone_worst <= 1e-8
    maxp = vf.check_maximum_principle(res.fields[-1], p, g)
    ok = ok and maxp.passed
    d_first = float(np.abs(res.fields[0].values - res.fields[1].values).max())
    d_last = float(np.abs(res.fields[-2].values - res.fields[-1].values).max())
    ok = ok and d_last <= 2 * d_first
    # C1 monitor variation across the first and last decades of the schedule
    ut = [row["sup_abs_ut"] for row in res.norm_table]
    c1_first, c1_last = abs(ut[0] - ut[1]), abs(ut[-2] - ut[-1])
    ok = ok and c1_last <= 2 * c1_first
    seconds = geodesic_run["seconds"]
    ok = ok and seconds < 300
    report(9, ok,
           f"sup|u-c|={sup_err:.2e} at eps=1e-5 (tol 1e-6); monotone worst "
           f"{res.monotone_worst:.1e} (tol 1e-8); max principle "
           f"{maxp.passed}; C0 decade variation {d_first:.1e} -> {d_last:.1e}, "
           f"C1 {c1_first:.1e} -> {c1_last:.1e}; {seconds:.0f}s")


def test_criterion_10_uniqueness_approximation(geodesic_run):
    g, p, res = geodesic_run["grid"], geodesic_run["p"], geodesic_run["res"]
    u = res.extrapolated
    t0 = time.perf_counter()
    thetas, ok = [], True
    msgs = []
    for delta in (1e-2, 1e-3):
        fld, rep = vf.uniqueness_approximation(u, p, g, delta)
        ok = ok and rep.passed and fld is not None
        ok = ok and 0 < rep.details["F_min"] and rep.details["F_max"] <= delta
        ok = ok and rep.details["sup_deviation"] <= delta
        thetas.append(rep.details["theta"])
        msgs.append(f"delta={delta:g}: theta={rep.details['theta']:.2e} "
                    f"F in ({rep.details['F_min']:.1e}, {rep.details['F_max']:.1e}]")
    ok = ok and thetas[1] <= thetas[0]
    dt = time.perf_counter() - t0
    ok = ok and dt < 60
    report(10, ok, "; ".join(msgs) + f"; theta non-increasing; {dt:.1f}s")


def test_criterion_11_negative_controls(geodesic_run, manufactured_runs):
    g, p, res = geodesic_run["grid"], geodesic_run["p"], geodesic_run["res"]
    t0 = time.perf_counter()
    controls = {}
    controls["cone-propagation"] = not vf.check_cone_propagation(
        SEED, jets=[(np.diag([1.0, -2.0]), 2)]).passed
    R = np.zeros((3, 3))
    R[0, 0] = 1.0
    R[1:, 1:] = np.eye(2)
    controls["concavity"] = not vf.check_concavity(SEED, pairs=[(R, -R, 1)]).passed
    bad = res.fields[-1].copy()
    bad.values[2, 1, 1] += 0.1
    rep = vf.check_maximum_principle(bad, p, g)
    controls["maximum-principle"] = (not rep.passed
                                     and [2, 1, 1] in [f["node"] for f in rep.failures])
    flat = SpacetimeField(g, np.full(g.shape, 1.0))
    flat.values[1, 3, 3] += 0.3
    controls["estimate-monitors"] = not vf.monitor_estimates(flat, p, g).passed
    run = manufactured_runs["coarse"]
    p_zero = ProblemParams(n=2, k=2, gamma=0.5, s=0.4, r=1.0,
                           A_field=run["p"].A_field,
                           psi=np.zeros(run["grid"].shape),
                           u0=run["p"].u0, u1=run["p"].u1)
    controls["viscosity-spot-check"] = not vf.viscosity_spot_check(
        run["u"], p_zero, run["grid"], seed=SEED, trials=60).passed
    _, rep = vf.uniqueness_approximation(run["u"], run["p"], run["grid"], 1e-3)
    controls["uniqueness-approximation"] = not rep.passed
    dt = time.perf_counter() - t0
    ok = all(controls.values()) and dt < 10
    report(11, ok, "all corrupted inputs rejected: " + ", ".join(
        f"{name}={'ok' if flag else 'MISSED'}" for name, flag in controls.items())
        + f"; {dt:.1f}s")


def test_criterion_12_determinism(tmp_path):
    base = """
[problem]
n = 2
k = 2
gamma = 0.5
s = 0.4
r = 1.0
[problem.A]
kind = "constant-diagonal"
value = {A}
[problem.psi]
kind = "{PSI_KIND}"
{PSI_BODY}
[problem.u0]
kind = "file"
path = "{dir}/u0_{tag}.npy"
[problem.u1]
kind = "file"
path = "{dir}/u1_{tag}.npy"
[grid]
nx = {nx}
nt = {nt}
[run]
mode = "{MODE}"
seed = 7
deterministic = true
"""
    configs = []
    # the two manufactured grids of criterion 7
    for nx, nt in ((16, 7), (32, 15)):
        g = GridSpec(n=2, nx=nx, nt=nt)
        p, _, _ = fl.manufactured_problem(g, k=2, gamma=0.5, s=0.4, r=1.0,
                                          A_const=2.0)
        tag = f"solve{nx}"
        np.save(tmp_path / f"psi_{tag}.npy", p.psi)
        np.save(tmp_path / f"u0_{tag}.npy", p.u0)
        np.save(tmp_path / f"u1_{tag}.npy", p.u1)
        cfg = tmp_path / f"{tag}.toml"
        cfg.write_text(base.format(
            A="2.0", PSI_KIND="file",
            PSI_BODY=f'path = "{tmp_path}/psi_{tag}.npy"',
            dir=tmp_path, tag=tag, nx=nx, nt=nt, MODE="solve"))
        configs.append((cfg, tag))
    # the geodesic problem of criterion 9
    g = GridSpec(n=2, nx=16, nt=7)
    geo = fl.constant_geodesic_problem(g, k=2, gamma=0.5, s=0.4, r=1.0,
                                       A_const=1.5, c=1.0)
    np.save(tmp_path / "u0_geo.npy", geo.u0)
    np.save(tmp_path / "u1_geo.npy", geo.u1)
    cfg = tmp_path / "geo.toml"
    cfg.write_text(base.format(A="1.5", PSI_KIND="constant",
                               PSI_BODY="value = 0.0", dir=tmp_path, tag="geo",
                               nx=16, nt=7, MODE="geodesic"))
    configs.append((cfg, "geo"))

    ok = True
    compared = 0
    for cfg, tag in configs:
        out1, out2 = tmp_path / f"{tag}_run1", tmp_path / f"{tag}_run2"
        assert cli.run(cfg, out=out1, deterministic=True) == 0
        assert cli.run(cfg, out=out2, deterministic=True) == 0
        names = sorted(f.name for f in out1.iterdir())
        assert names == sorted(f.name for f in out2.iterdir())
        for name in names:
            same = (out1 / name).read_bytes() == (out2 / name).read_bytes()
            ok = ok and same
            compared += 1
    report(12, ok, f"two deterministic runs of the manufactured (both grids) "
                   f"and geodesic problems byte-identical across {compared} "
                   f"artifacts")
