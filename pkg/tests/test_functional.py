import numpy as np
import pytest
from scipy import integrate

from quasilin import DomainSpec, EnergyConfig, Field, GammaModel, Reaction, \
    build_grid, energy, eval_Gamma, first_eigenpair, gradient, phi, phi_prime, \
    residual_norm, split
from quasilin.functional import energy_value, energy_value_batch
from quasilin.oracle import fd_directional


@pytest.fixture(scope="module")
def grid64():
    return build_grid(DomainSpec(1, 1.0, 64))


@pytest.fixture(scope="module")
def eig64(grid64):
    return first_eigenpair(grid64)


def kink_free_fields(grid, rng, n):
    """Random fields bounded away from the reaction kink at u = 0."""
    out = []
    for _ in range(n):
        mag = rng.uniform(0.2, 1.0, grid.n_dof)
        sgn = rng.choice([-1.0, 1.0], grid.n_dof)
        out.append(mag * sgn)
    return out


def test_energy_zero_field(grid64):
    cfg = EnergyConfig(grid=grid64, gamma=GammaModel.double_phase(1.0, 1.0, 1.5),
                       reaction=Reaction.sublinear("log1p", nu=3.0))
    rep = energy(cfg, np.zeros(grid64.n_dof))
    assert rep.value == 0.0
    assert rep.quasilinear == 0.0 and rep.reaction == 0.0 and rep.datum == 0.0


def test_energy_quadratic_identity(grid64):
    cfg = EnergyConfig(grid=grid64, gamma=GammaModel.constant(1.0))
    rng = np.random.default_rng(5)
    for _ in range(5):
        u = rng.standard_normal(grid64.n_dof)
        quad = 0.5 * (u @ (grid64.M @ u) + u @ (grid64.K @ u))
        assert energy_value(cfg, u) == pytest.approx(quad, abs=1e-11)


def test_energy_report_identity(grid64, eig64):
    cfg = EnergyConfig(grid=grid64, gamma=GammaModel.double_phase(1.0, 1.0, 1.5),
                       reaction=Reaction.linear_growth("asymlinear_lambda", lam=10.0),
                       h_field=eig64.phi1)
    rng = np.random.default_rng(6)
    u = rng.standard_normal(grid64.n_dof)
    rep = energy(cfg, u)
    assert rep.value == rep.quasilinear - rep.reaction - rep.datum


def test_energy_matches_continuum_quadrature():
    # independent oracle: resolve the continuum integrand of the first
    # eigenfunction ray by adaptive quadrature and compare at fixed h
    g = build_grid(DomainSpec(1, 1.0, 63))
    eig = first_eigenpair(g)
    gm = GammaModel.double_phase(1.0, 1.0, 1.5)
    cfg = EnergyConfig(grid=g, gamma=gm)

    def integrand(x):
        phi_c = np.sqrt(2.0) * np.sin(np.pi * x)
        dphi_c = np.sqrt(2.0) * np.pi * np.cos(np.pi * x)
        return eval_Gamma(gm, (phi_c ** 2 + dphi_c ** 2) / 2.0)

    ref, _ = integrate.quad(integrand, 0.0, 1.0, epsrel=1e-12, limit=200)
    assert energy_value(cfg, eig.phi1.values) == pytest.approx(ref, rel=1e-3)


def test_phi_quadratic_case(grid64):
    cfg = EnergyConfig(grid=grid64, gamma=GammaModel.constant(1.0))
    rng = np.random.default_rng(7)
    u = rng.standard_normal(grid64.n_dof)
    v = rng.standard_normal(grid64.n_dof)
    assert phi(cfg, u) == pytest.approx(0.5 * (u @ (grid64.M @ u) + u @ (grid64.K @ u)))
    assert phi_prime(cfg, u, v) == pytest.approx(u @ (grid64.M @ v) + u @ (grid64.K @ v))
    assert phi(cfg, np.zeros(grid64.n_dof)) == 0.0


@pytest.mark.parametrize("gm", [GammaModel.constant(1.0),
                                GammaModel.double_phase(1.0, 1.0, 1.5),
                                GammaModel.rational_decay(1.0, 1.0)])
def test_convexity_inequality(grid64, gm):
    cfg = EnergyConfig(grid=grid64, gamma=gm)
    rng = np.random.default_rng(8)
    for _ in range(100):
        u = rng.standard_normal(grid64.n_dof)
        v = rng.standard_normal(grid64.n_dof)
        gap = phi(cfg, u) - phi(cfg, v) - phi_prime(cfg, v, u - v)
        assert gap >= -1e-10


def test_gradient_semilinear_formula(grid64):
    lam = 3.0
    cfg = EnergyConfig(grid=grid64, gamma=GammaModel.constant(1.0),
                       reaction=Reaction.linear(lam))
    rng = np.random.default_rng(9)
    u = np.abs(rng.standard_normal(grid64.n_dof))      # u >= 0
    expect = (grid64.K + grid64.M) @ u - lam * (grid64.M @ u)
    assert np.allclose(gradient(cfg, u), expect, atol=1e-12)


def test_gradient_at_origin_is_datum(grid64, eig64):
    cfg = EnergyConfig(grid=grid64, gamma=GammaModel.double_phase(1.0, 1.0, 1.5),
                       reaction=Reaction.sublinear("log1p", nu=2.0),
                       h_field=eig64.phi1)
    r = gradient(cfg, np.zeros(grid64.n_dof))
    assert np.allclose(r, -(grid64.M @ eig64.phi1.values), atol=1e-14)


def test_gradient_matches_directional_fd(grid64):
    cfg = EnergyConfig(grid=grid64, gamma=GammaModel.double_phase(1.0, 1.0, 1.5),
                       reaction=Reaction.sublinear("log1p", nu=2.0))
    rng = np.random.default_rng(10)
    u = kink_free_fields(grid64, rng, 1)[0]
    r = gradient(cfg, u)
    for _ in range(10):
        v = rng.uniform(-1.0, 1.0, grid64.n_dof)
        fd = fd_directional(cfg, u, v, 1e-5)
        assert abs(fd - r @ v) <= 1e-6 * (1.0 + abs(r @ v))


def test_residual_norm(grid64, eig64):
    lam1 = eig64.lambda1
    lam = 0.5 * (1.0 + lam1)
    cfg = EnergyConfig(grid=grid64, gamma=GammaModel.constant(1.0),
                       reaction=Reaction.linear(lam), h_field=eig64.phi1)
    # the exact discrete solution has vanishing residual
    u_exact = eig64.phi1.values / (1.0 + lam1 - lam)
    assert residual_norm(cfg, u_exact) <= 1e-12
    # at the origin only the datum term remains
    assert residual_norm(cfg, np.zeros(grid64.n_dof)) == \
        pytest.approx(1.0 / np.sqrt(1.0 + lam1), rel=1e-10)
    cfg0 = EnergyConfig(grid=grid64, gamma=GammaModel.constant(1.0))
    assert residual_norm(cfg0, np.zeros(grid64.n_dof)) == 0.0


def test_split_energy_consistency_at_mu_one(grid64):
    react = Reaction.linear_growth("user",
                                   f=lambda t: 5.0 * t * t / (1.0 + t) - np.sin(t))
    sp = split(react, t_scan=50.0)
    cfg_plain = EnergyConfig(grid=grid64, gamma=GammaModel.constant(1.0), reaction=react)
    cfg_split = EnergyConfig(grid=grid64, gamma=GammaModel.constant(1.0), reaction=react,
                             mu=1.0 + 1e-16, split=sp)    # forces the split path
    rng = np.random.default_rng(12)
    for _ in range(5):
        u = rng.uniform(0.0, 5.0, grid64.n_dof)
        assert energy_value(cfg_split, u) == pytest.approx(energy_value(cfg_plain, u),
                                                           abs=1e-12)


def test_mu_monotonicity(grid64):
    react = Reaction.linear_growth("asymlinear_lambda", lam=20.0)
    rng = np.random.default_rng(13)
    u = np.abs(rng.standard_normal(grid64.n_dof))      # B(u) > 0
    values = []
    for mu in (0.9, 0.95, 1.0, 1.05):
        cfg = EnergyConfig(grid=grid64, gamma=GammaModel.constant(1.0),
                           reaction=react, mu=mu)
        values.append(energy_value(cfg, u))
    assert all(a > b for a, b in zip(values, values[1:]))


def test_coercivity_witness(grid64):
    cfg = EnergyConfig(grid=grid64, gamma=GammaModel.double_phase(1.0, 1.0, 1.5),
                       reaction=Reaction.sublinear("log1p", nu=10.0))
    rng = np.random.default_rng(14)
    for _ in range(5):
        w = rng.standard_normal(grid64.n_dof)
        w /= np.sqrt(w @ (grid64.K @ w))
        vals = [energy_value(cfg, (2.0 ** k) * w) for k in range(0, 14)]
        tail = vals[8:]
        assert all(a < b for a, b in zip(tail, tail[1:]))
        assert vals[-1] > 0.0


def test_config_validation(grid64, eig64):
    with pytest.raises(ValueError, match="nonnegative"):
        EnergyConfig(grid=grid64, gamma=GammaModel.constant(1.0),
                     h_field=Field(grid64, -eig64.phi1.values))
    with pytest.raises(ValueError, match="outside J"):
        EnergyConfig(grid=grid64, gamma=GammaModel.constant(1.0),
                     reaction=Reaction.linear(1.0), mu=1.2)
    # mu != 1 without a supplied split computes one on demand
    cfg = EnergyConfig(grid=grid64, gamma=GammaModel.constant(1.0),
                       reaction=Reaction.linear_growth("asymlinear_lambda", lam=5.0),
                       mu=0.95)
    assert cfg.split is not None and cfg.split.trivial


def test_energy_batch_matches_scalar(grid64):
    cfg = EnergyConfig(grid=grid64, gamma=GammaModel.double_phase(1.0, 1.0, 1.5),
                       reaction=Reaction.sublinear("log1p", nu=2.0))
    rng = np.random.default_rng(15)
    U = rng.standard_normal((7, grid64.n_dof))
    batch = energy_value_batch(cfg, U)
    for i in range(7):
        assert batch[i] == pytest.approx(energy_value(cfg, U[i]), abs=1e-12)


def test_energy_batch_matches_scalar_2d():
    g = build_grid(DomainSpec(2, (1.0, 1.0), (5, 4)))
    cfg = EnergyConfig(grid=g, gamma=GammaModel.double_phase(1.0, 1.0, 1.5),
                       reaction=Reaction.sublinear("log1p", nu=2.0))
    rng = np.random.default_rng(16)
    U = rng.standard_normal((4, g.n_dof))
    batch = energy_value_batch(cfg, U)
    for i in range(4):
        assert batch[i] == pytest.approx(energy_value(cfg, U[i]), abs=1e-12)


def test_gradient_matches_fd_2d():
    g = build_grid(DomainSpec(2, (1.0, 2.0), (6, 5)))
    cfg = EnergyConfig(grid=g, gamma=GammaModel.double_phase(1.0, 1.0, 1.5),
                       reaction=Reaction.linear_growth("asymlinear_lambda", lam=8.0))
    rng = np.random.default_rng(17)
    u = rng.uniform(0.2, 1.0, g.n_dof) * rng.choice([-1.0, 1.0], g.n_dof)
    r = gradient(cfg, u)
    for _ in range(5):
        v = rng.uniform(-1.0, 1.0, g.n_dof)
        fd = fd_directional(cfg, u, v, 1e-5)
        assert abs(fd - r @ v) <= 1e-6 * (1.0 + abs(r @ v))
