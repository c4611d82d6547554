"""Acceptance suite: every release criterion at its stated tolerance.

Each test prints one PASS line on success; failures carry the measured
numbers.  The two-solution scenario (double-phase density, asymptotically
linear reaction, plateau datum at the searched amplitude) is shared
between several criteria through session fixtures.
"""

import time

import numpy as np
import pytest
from dataclasses import replace

from quasilin import DomainSpec, EnergyConfig, Field, GammaModel, Reaction, \
    SolverConfig, beta, build_grid, check_convexity, eval_K, find_endpoint, \
    first_eigenpair, global_minimize, gradient, h_smallness_search, \
    lambda1_closed_form, minimize, mu_continuation, \
    nonexistence_scan, nonexistence_threshold, norms, phi, phi_prime, \
    plateau_field, two_solution_search
from quasilin.functional import energy_value
from quasilin.gamma import beta_violation_from_convexity
from quasilin.oracle import fd_directional, semilinear_solve
from quasilin.solver import _k_norm


def report(num, text):
    print(f"\nACCEPTANCE {num}: PASS - {text}")


@pytest.fixture(scope="module")
def grid127():
    return build_grid(DomainSpec(1, 1.0, 127))


@pytest.fixture(scope="module")
def eig127(grid127):
    return first_eigenpair(grid127)


@pytest.fixture(scope="module")
def two_solution_scenario(grid127, eig127):
    """Criterion-8 setup: double-phase density, asymptotically linear
    reaction at twice the far threshold, plateau datum at the searched
    amplitude; shared by criteria 8, 9 and 11."""
    gm = GammaModel.double_phase(1.0, 1.0, 1.5)
    lam = 2.0 * gm.gamma_inf * (1.0 + eig127.lambda1)
    react = Reaction.linear_growth("asymlinear_lambda", lam=lam)
    hdir = plateau_field(grid127, 1.0, 0.2)
    s = SolverConfig(tol_residual=1e-6, max_iters=20000, seed=3)
    hs = h_smallness_search(
        EnergyConfig(grid=grid127, gamma=gm, reaction=react, h_field=hdir),
        s, eig127)
    h = Field(grid127, hs.beta_star * hdir.values / norms(hdir).l2)
    cfg = EnergyConfig(grid=grid127, gamma=gm, reaction=react, h_field=h)
    two = two_solution_search(cfg, s, eig127)
    return {"cfg": cfg, "s": s, "hs": hs, "two": two, "gm": gm, "lam": lam}


def gamma_catalogue():
    knots = np.concatenate(([0.0], np.logspace(-3, 4, 300)))
    return [GammaModel.constant(1.0),
            GammaModel.double_phase(1.0, 1.0, 1.5),
            GammaModel.rational_decay(1.0, 1.0),
            GammaModel.tabulated(knots, 1.0 + 0.75 * (1.0 + knots) ** -0.25)]


def reaction_catalogue():
    return [Reaction.sublinear("log1p", nu=2.0),
            Reaction.linear_growth("asymlinear_lambda", lam=20.0),
            Reaction.linear(5.0)]


def test_criterion_01_gradient_exactness():
    t0 = time.time()
    grid = build_grid(DomainSpec(1, 1.0, 64))
    rng = np.random.default_rng(101)
    eps = 1e-5
    worst = 0.0
    for gm in gamma_catalogue():
        for react in reaction_catalogue():
            cfg = EnergyConfig(grid=grid, gamma=gm, reaction=react)
            for _ in range(100):
                # fields bounded away from the reaction kink at u = 0
                u = rng.uniform(0.2, 1.0, grid.n_dof) * rng.choice([-1.0, 1.0], grid.n_dof)
                v = rng.uniform(-1.0, 1.0, grid.n_dof)
                dv = float(gradient(cfg, u) @ v)
                fd = fd_directional(cfg, u, v, eps)
                err = abs(fd - dv) / (1.0 + abs(dv))
                worst = max(worst, err)
                assert err <= 1e-6
    elapsed = time.time() - t0
    assert elapsed < 10.0
    report(1, f"gradient exactness: 4x3x100 directional checks, worst "
              f"normalized error {worst:.2e} (<= 1e-6), {elapsed:.1f}s")


def test_criterion_02_convexity_inequality():
    t0 = time.time()
    grid = build_grid(DomainSpec(1, 1.0, 64))
    rng = np.random.default_rng(102)
    worst = np.inf
    for gm in gamma_catalogue():
        assert check_convexity(gm).holds
        cfg = EnergyConfig(grid=grid, gamma=gm)
        for k in range(100):
            u = rng.standard_normal(grid.n_dof)
            if k % 2 == 0:
                v = rng.standard_normal(grid.n_dof)
            else:
                # nearby pair: the gap approaches zero and the slack matters
                v = u + 10.0 ** rng.uniform(-6.0, -3.0) * rng.standard_normal(grid.n_dof)
            gap = phi(cfg, u) - phi(cfg, v) - phi_prime(cfg, v, u - v)
            worst = min(worst, gap)
            assert gap >= -1e-10
    elapsed = time.time() - t0
    assert elapsed < 5.0
    report(2, f"convexity inequality: 4x100 pairs incl. near-tangent ones, "
              f"smallest gap {worst:.2e} (>= -1e-10), {elapsed:.1f}s")


def test_criterion_03_beta_strict_monotonicity():
    t0 = time.time()
    rng = np.random.default_rng(103)
    for gm in gamma_catalogue():
        assert check_convexity(gm, strict=True).holds
        for dim in (2, 3):
            xi = rng.uniform(-1e3, 1e3, (1000, dim))
            xb = rng.uniform(-1e3, 1e3, (1000, dim))
            keep = np.linalg.norm(xi - xb, axis=1) > 0.0
            inner = np.sum((beta(gm, xi) - beta(gm, xb)) * (xi - xb), axis=1)
            assert np.all(inner[keep] > 0.0)
    bad = GammaModel.rational_decay(1.0, 16.0, require_convex=False)
    witness = beta_violation_from_convexity(bad, dim=2)
    assert witness is not None
    xi, xb = witness
    viol = float((beta(bad, xi) - beta(bad, xb)) @ (xi - xb))
    assert viol < 0.0
    elapsed = time.time() - t0
    assert elapsed < 1.0
    report(3, f"beta monotonicity: 4 models x 2000 pairs all positive; "
              f"b=16a witness inner product {viol:.2e} < 0, {elapsed:.1f}s")


def test_criterion_04_semilinear_oracle_match(grid127, eig127):
    t0 = time.time()
    lam1 = eig127.lambda1
    lam = 0.5 * (1.0 + lam1)
    cfg = EnergyConfig(grid=grid127, gamma=GammaModel.constant(1.0),
                       reaction=Reaction.linear(lam), h_field=eig127.phi1)
    res = minimize(cfg, SolverConfig(tol_residual=1e-10, max_iters=2000, seed=0),
                   Field(grid127, np.zeros(grid127.n_dof)))
    assert res.converged and res.residual <= 1e-10
    exact = 2.0 * eig127.phi1.values / (1.0 + lam1)
    nodal = np.abs(res.u.values - exact).max()
    assert nodal <= 1e-8
    oracle = semilinear_solve(grid127, lam, eig127.phi1)
    assert np.abs(oracle.values - exact).max() <= 1e-10

    cfg_hi = EnergyConfig(grid=grid127, gamma=GammaModel.constant(1.0),
                          reaction=Reaction.linear(1.5 * (1.0 + lam1)),
                          h_field=eig127.phi1)
    rays = [energy_value(cfg_hi, (2.0 ** k) * eig127.phi1.values) for k in range(5, 13)]
    assert all(b < a for a, b in zip(rays, rays[1:]))
    elapsed = time.time() - t0
    assert elapsed < 10.0
    report(4, f"semilinear oracle: nodal error {nodal:.2e} (<= 1e-8), residual "
              f"{res.residual:.2e} (<= 1e-10); supercritical ray decreasing, {elapsed:.1f}s")


def test_criterion_05_eigenvalue_anchors():
    t0 = time.time()
    g1 = build_grid(DomainSpec(1, 1.0, 255))
    e1 = first_eigenpair(g1)
    closed = lambda1_closed_form(g1)
    h = g1.h[0]
    assert closed == pytest.approx((2.0 / h ** 2) * (1.0 - np.cos(np.pi * h)), rel=1e-15)
    err_closed = abs(e1.lambda1 - closed) / closed
    assert err_closed <= 1e-12
    err_pi = abs(e1.lambda1 - np.pi ** 2) / np.pi ** 2
    assert err_pi <= 1e-4

    g2 = build_grid(DomainSpec(2, (1.0, 1.0), (63, 63)))
    e2 = first_eigenpair(g2)
    err_2d = abs(e2.lambda1 - 2.0 * np.pi ** 2) / (2.0 * np.pi ** 2)
    assert err_2d <= 1e-3
    elapsed = time.time() - t0
    assert elapsed < 30.0
    report(5, f"eigenvalue anchors: 1D closed-form rel err {err_closed:.1e} (<= 1e-12), "
              f"vs pi^2 {err_pi:.1e} (<= 1e-4); 2D vs 2pi^2 {err_2d:.1e} (<= 1e-3), "
              f"{elapsed:.1f}s")


def test_criterion_06_sublinear_dichotomy(grid127):
    t0 = time.time()
    gm = GammaModel.constant(1.0)
    react = Reaction.sublinear("log1p")
    cfg = EnergyConfig(grid=grid127, gamma=gm, reaction=react)
    nu0 = nonexistence_threshold(react, gm)
    assert nu0 == pytest.approx(1.0, abs=1e-15)

    s = SolverConfig(tol_residual=1e-9, max_iters=5000, seed=106, n_starts=20)
    below = nonexistence_scan(cfg, s, nu=0.5, n_starts=20)
    assert below.verdict == "consistent-with-nonexistence"
    assert len(below.runs) == 21                      # 20 random + plateau
    assert all(r["converged"] for r in below.runs)
    worst_l2 = max(r["l2"] for r in below.runs)
    assert worst_l2 <= 1e-8

    cfg50 = EnergyConfig(grid=grid127, gamma=gm,
                         reaction=Reaction.sublinear("log1p", nu=50.0))
    res = global_minimize(cfg50, replace(s, tol_residual=1e-8))
    assert res.converged and res.residual <= 1e-8
    assert res.classification == "nontrivial"
    assert res.energy < 0.0
    assert res.u.values.min() >= -1e-10
    elapsed = time.time() - t0
    assert elapsed < 120.0
    report(6, f"sublinear dichotomy: nu0=1 certified; nu=0.5 all 21 runs trivial "
              f"(max |u|_2 {worst_l2:.1e}); nu=50 nontrivial E={res.energy:.3f}<0, "
              f"{elapsed:.1f}s")


def test_criterion_07_forced_term_existence(grid127):
    t0 = time.time()
    h = Field(grid127, 1e-2 * plateau_field(grid127, 1.0, 0.2).values)
    cfg = EnergyConfig(grid=grid127, gamma=GammaModel.constant(1.0),
                       reaction=Reaction.sublinear("log1p", nu=0.1), h_field=h)
    res = global_minimize(cfg, SolverConfig(tol_residual=1e-8, max_iters=5000,
                                            seed=107, n_starts=8))
    assert res.converged and res.residual <= 1e-8
    assert res.classification == "nontrivial"
    assert res.nonneg_violation <= 1e-10 * (1.0 + norms(res.u).l2)
    elapsed = time.time() - t0
    assert elapsed < 60.0
    report(7, f"forced-term existence: nu=0.1 < nu0 with h > 0 gives nontrivial "
              f"|u|_2={norms(res.u).l2:.2e}, residual {res.residual:.1e}, {elapsed:.1f}s")


def test_criterion_08_two_solution_scenario(two_solution_scenario, grid127, eig127):
    t0 = time.time()
    sc = two_solution_scenario
    two, hs = sc["two"], sc["hs"]
    assert hs.beta_star > 0.0
    for sol in (two.u_min, two.u_mp):
        assert sol.converged and sol.residual <= 1e-6
        assert sol.nonneg_violation <= 1e-10 * (1.0 + norms(sol.u).l2)
    dist = _k_norm(grid127, two.u_min.u.values - two.u_mp.u.values)
    assert dist > 1e-2
    assert two.mountain.mp_gap > 0.0

    # independent rerun on the refined mesh, same continuum problem
    g2 = build_grid(DomainSpec(1, 1.0, 255))
    e2 = first_eigenpair(g2)
    gm = sc["gm"]
    react2 = Reaction.linear_growth("asymlinear_lambda",
                                    lam=2.0 * gm.gamma_inf * (1.0 + e2.lambda1))
    hdir2 = plateau_field(g2, 1.0, 0.2)
    h2 = Field(g2, hs.beta_star * hdir2.values / norms(hdir2).l2)
    cfg2 = EnergyConfig(grid=g2, gamma=gm, reaction=react2, h_field=h2)
    two2 = two_solution_search(cfg2, sc["s"], e2)
    rel_min = abs(two2.u_min.energy - two.u_min.energy) / abs(two.u_min.energy)
    rel_mp = abs(two2.u_mp.energy - two.u_mp.energy) / abs(two.u_mp.energy)
    assert rel_min <= 0.01
    assert rel_mp <= 0.01
    elapsed = time.time() - t0
    assert elapsed < 600.0
    report(8, f"two solutions: beta*={hs.beta_star:g}, E_min={two.u_min.energy:.4f}, "
              f"E_mp={two.u_mp.energy:.4f}, distance {dist:.2f} (> 1e-2), "
              f"mp_gap {two.mountain.mp_gap:.3f} > 0; refinement drift "
              f"{rel_min:.1e}/{rel_mp:.1e} (<= 1%), {elapsed:.1f}s")


def test_criterion_09_endpoint_negativity(two_solution_scenario, eig127):
    t0 = time.time()
    sc = two_solution_scenario
    out = find_endpoint(sc["cfg"], eig127, T_max=1e3, e_ref=sc["two"].u_min.energy)
    assert out.T <= 1e3
    last_decade = out.profile_t >= out.profile_t[-1] / 10.0
    tail_E = out.profile_E[last_decade]
    assert np.all(np.diff(tail_E) < 0.0)
    elapsed = time.time() - t0
    assert elapsed < 30.0
    report(9, f"endpoint negativity: T={out.T:.3g} <= 1e3 with E(T phi1)="
              f"{out.energy_at_T:.3f}; final-decade profile strictly decreasing, "
              f"{elapsed:.1f}s")


def test_criterion_10_positivity_via_truncation(grid127):
    t0 = time.time()
    h = Field(grid127, 0.05 * plateau_field(grid127, 1.0, 0.2).values)
    cfg = EnergyConfig(grid=grid127, gamma=GammaModel.double_phase(1.0, 1.0, 1.5),
                       reaction=Reaction.sublinear("log1p", nu=2.0), h_field=h)
    s = SolverConfig(tol_residual=1e-11, max_iters=5000, seed=110)
    rng = np.random.default_rng(110)
    worst = 0.0
    for _ in range(20):
        raw = rng.standard_normal(grid127.n_dof)
        neg_mass = norms(Field(grid127, -np.minimum(raw, 0.0))).l2
        u0 = Field(grid127, raw * (0.6 / neg_mass))
        assert norms(Field(grid127, -np.minimum(u0.values, 0.0))).l2 >= 0.5
        res = minimize(cfg, s, u0)
        assert res.converged
        bound = 1e-10 * (1.0 + norms(res.u).l2)
        worst = max(worst, res.nonneg_violation / bound)
        assert res.nonneg_violation <= bound
    elapsed = time.time() - t0
    assert elapsed < 60.0
    report(10, f"positivity via truncation: 20 sign-changing starts, worst "
               f"|u_-|_2 at {worst:.1e} of the 1e-10(1+|u|_2) bound, {elapsed:.1f}s")


def test_criterion_11_mu_family_monotonicity(two_solution_scenario, eig127):
    t0 = time.time()
    sc = two_solution_scenario
    entries = mu_continuation(sc["cfg"], sc["s"], [0.9, 0.95, 0.99, 1.0], eig=eig127)
    assert all(e.result is not None and e.result.converged for e in entries)
    cs = [e.result.level_c for e in entries]
    for a, b in zip(cs, cs[1:]):
        assert b <= a + 1e-10
    rel = abs(cs[-1] - sc["two"].c) / abs(sc["two"].c)
    assert rel <= 1e-4
    elapsed = time.time() - t0
    assert elapsed < 900.0
    report(11, f"mu family: c_mu = {['%.4f' % c for c in cs]} nonincreasing; "
               f"mu=1 level matches direct run to {rel:.1e} (<= 1e-4), {elapsed:.1f}s")


def test_criterion_12_s3_contrast_diagnostic():
    t0 = time.time()
    gm = GammaModel.double_phase(1.0, 1.0, 1.5)
    k2, k6 = eval_K(gm, 1e2), eval_K(gm, 1e6)
    assert k6 > 10.0 * k2
    assert check_convexity(gm, strict=True).holds
    from quasilin.gamma import bounded_remainder_diagnostic
    rep = bounded_remainder_diagnostic(gm)
    assert not rep.holds                 # unbounded remainder despite convexity
    from quasilin.common import SampleSpec
    assert bounded_remainder_diagnostic(GammaModel.constant(1.0)).holds
    elapsed = time.time() - t0
    assert elapsed < 1.0
    report(12, f"bounded-remainder contrast: K(1e6)={k6:.1f} > 10 K(1e2)={k2:.1f} "
               f"and the diagnostic flags unbounded growth while strict "
               f"convexity holds, {elapsed:.1f}s")
