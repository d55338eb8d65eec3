import numpy as np
import pytest

from ergi.core import StructuralParams, omega_star, rho_coefficients
from ergi.simulate import (SimConfig, SimulationError, add_microstructure_noise,
                           estimate_log_mgf_D, noisy_obs_batch, simulate_batch,
                           simulate_ergi)
from conftest import spectral_log_mgf

STUDY_THETA = StructuralParams(-0.1, 0.3, 0.5, 2.0)


def small_cfg(**kw):
    base = dict(n_days=20, grid_steps_per_day=5850, obs_per_day=390, seed=123)
    base.update(kw)
    return SimConfig(**base)


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(n_days=10, grid_steps_per_day=100, obs_per_day=390)
    with pytest.raises(ValueError):
        SimConfig(n_days=10, grid_steps_per_day=1000, obs_per_day=390)  # not divisible
    with pytest.raises(ValueError):
        SimConfig(n_days=0)
    with pytest.raises(ValueError):
        SimConfig(n_days=10, noise_ratio=-0.1)


def test_all_drivers_off_gives_constant_variance():
    # nu=0, omega=0, beta=0: b stays 0 and sigma^2 is constant at 1
    theta = StructuralParams(0.0, 0.3, 0.0, 0.0)
    cfg = small_cfg(jump_intensity=0.0, noise_ratio=0.0, burn_in_days=2)
    path = simulate_ergi(theta, cfg)
    assert np.allclose(path.spot_var, 1.0, atol=1e-12)
    assert np.allclose(path.b_path, 0.0, atol=1e-12)
    assert np.allclose(path.true_iv, 1.0, atol=1e-12)


def test_reproducibility_bit_identical():
    p1 = simulate_ergi(STUDY_THETA, small_cfg())
    p2 = simulate_ergi(STUDY_THETA, small_cfg())
    assert np.array_equal(p1.log_prices, p2.log_prices)
    assert np.array_equal(p1.spot_var, p2.spot_var)
    assert np.array_equal(p1.true_iv, p2.true_iv)


def test_batch_replication_matches_single_path():
    cfg = small_cfg()
    single = simulate_ergi(STUDY_THETA, cfg)
    batch = simulate_batch(STUDY_THETA, cfg, n_reps=3)
    # noisy observations agree as well (same per-(rep, day) noise streams)
    y_single = add_microstructure_noise(single, cfg)
    y_batch = noisy_obs_batch(batch)
    assert np.array_equal(y_batch[0], y_single.log_prices)
    # chunked batches with rep_offset reproduce the big batch
    tail = simulate_batch(STUDY_THETA, cfg, n_reps=1, rep_offset=2)
    assert np.array_equal(tail.true_iv[0], batch.true_iv[2])
    assert np.array_equal(tail.x_obs[0], batch.x_obs[2])


def test_day_boundary_state_is_continuous():
    path = simulate_ergi(STUDY_THETA, small_cfg(n_days=6))
    # spot variance carries across the boundary exactly (continuous process)
    for d in range(5):
        assert path.spot_var[d + 1, 0] == path.spot_var[d, -1]
        assert path.b_path[d + 1, 0] == path.b_path[d, -1]


def test_within_day_identity_and_euler_order():
    # within-day identity: mean IV = day-start spot var * exp(int b)
    rels = {}
    for G in (5850, 11700):
        cfg = SimConfig(n_days=30, grid_steps_per_day=G, obs_per_day=390, seed=17)
        path = simulate_ergi(STUDY_THETA, cfg)
        int_b = np.trapezoid(path.b_path, dx=1.0 / G, axis=1)
        rhs = path.spot_var[:, 0] * np.exp(int_b)
        rels[G] = np.abs(path.true_iv - rhs) / np.abs(rhs)
        assert rels[G].max() < 5e-3, G
    # first-order scheme: residual roughly halves when the grid doubles
    ratio = rels[11700].mean() / rels[5850].mean()
    assert 0.2 < ratio < 0.85, ratio


def test_integer_time_b_recursion():
    cfg = SimConfig(n_days=40, grid_steps_per_day=11700, obs_per_day=390, seed=29)
    path = simulate_ergi(STUDY_THETA, cfg)
    b_end = path.b_path[:, -1]
    pred = (STUDY_THETA.omega + STUDY_THETA.gamma * b_end[:-1]
            + STUDY_THETA.beta * np.log(path.true_iv[1:]))
    assert np.abs(b_end[1:] - pred).max() < 1e-3


def test_jumps_enter_price_only_with_poisson_counts():
    cfg = SimConfig(n_days=200, grid_steps_per_day=1170, obs_per_day=390,
                    seed=31, jump_intensity=10.0)
    path = simulate_ergi(STUDY_THETA, cfg)
    counts = np.array([len(t) for t, _ in path.jump_times_sizes])
    # mean daily count within binomial noise of lambda = 10
    assert abs(counts.mean() - 10.0) < 3.0 * np.sqrt(10.0 / 200)
    sizes = np.concatenate([s for _, s in path.jump_times_sizes])
    assert np.all(np.abs(sizes) == cfg.jump_abs_size)
    # same seed without jumps: volatility identical, price differs
    cfg0 = SimConfig(n_days=200, grid_steps_per_day=1170, obs_per_day=390,
                     seed=31, jump_intensity=0.0)
    path0 = simulate_ergi(STUDY_THETA, cfg0)
    assert np.array_equal(path0.spot_var, path.spot_var)
    assert not np.array_equal(path0.log_prices, path.log_prices)


def test_jump_fold_into_grid_prices():
    cfg = small_cfg(n_days=5, jump_intensity=20.0)
    path = simulate_ergi(STUDY_THETA, cfg)
    G = cfg.grid_steps_per_day
    # day-end price must equal next day-start price (continuity incl. jumps)
    for d in range(4):
        t_last, _ = path.jump_times_sizes[d]
        if len(t_last) and t_last.max() >= 1.0 - 1.0 / G:
            continue  # a jump in the final step lands between samples
        assert abs(path.log_prices[d + 1, 0] - path.log_prices[d, -1]) < 1e-12


def test_noise_scaling_and_zero_noise():
    theta = StructuralParams(0.0, 0.3, 0.0, 0.0)  # sigma^2 = 1, IV = 1
    cfg = small_cfg(noise_ratio=0.0, jump_intensity=0.0, obs_per_day=1170,
                    grid_steps_per_day=5850)
    path = simulate_ergi(theta, cfg)
    obs = add_microstructure_noise(path, cfg)
    idx = np.arange(1170) * 5
    assert np.array_equal(obs.log_prices, path.log_prices[:, idx])
    assert obs.timestamps[0] == 0.0 and obs.timestamps[-1] < 1.0
    cfg2 = small_cfg(n_days=100, noise_ratio=0.01, jump_intensity=0.0,
                     obs_per_day=1170, grid_steps_per_day=5850)
    path2 = simulate_ergi(theta, cfg2)
    obs2 = add_microstructure_noise(path2, cfg2)
    eps = obs2.log_prices - path2.log_prices[:, idx]
    # true IV = 1 every day: noise sd = 0.01 within 5% over 117000 draws
    assert abs(eps.std() / 0.01 - 1.0) < 0.05


def test_martingale_decomposition_of_log_iv():
    cfg = SimConfig(n_days=600, grid_steps_per_day=5850, obs_per_day=390, seed=41)
    batch = simulate_batch(STUDY_THETA, cfg, n_reps=2)
    ws = omega_star(STUDY_THETA)
    bg = rho_coefficients(0.5, 0.3).rho * 0.5
    ds = []
    for r in range(2):
        liv = np.log(batch.true_iv[r])
        h = liv[0]
        for i in range(1, liv.size):
            h = ws + 0.3 * h + bg * liv[i - 1]
            ds.append(liv[i] - h)
    ds = np.array(ds)
    assert abs(ds.mean()) < 3.0 * ds.std() / np.sqrt(ds.size)


def test_blowup_guard_raises():
    # strongly explosive configuration: log-IV recursion on the unstable side
    theta = StructuralParams(1.0, 0.97, 0.9, 3.0)
    cfg = SimConfig(n_days=60, grid_steps_per_day=1170, obs_per_day=390,
                    seed=5, burn_in_days=0, jump_intensity=0.0)
    with pytest.raises(SimulationError):
        simulate_ergi(theta, cfg)
    out = simulate_batch(theta, cfg, n_reps=2, strict=False)
    assert out.failed.all()


def test_negative_spot_variance_is_tracked():
    # at the published simulation parameters mid-day dips below zero occur;
    # they are counted, and the reported IV stays positive
    path = simulate_ergi(STUDY_THETA, small_cfg(n_days=40))
    assert path.negative_spot_steps > 0
    frac = (path.spot_var < 0).mean()
    assert frac < 0.15
    assert (path.true_iv > 0).all()


def test_log_mgf_trivial_and_validation():
    assert estimate_log_mgf_D(StructuralParams(0.0, 0.3, 0.5, 0.0),
                              10_000, seed=1).value == 0.0
    with pytest.raises(ValueError):
        estimate_log_mgf_D(STUDY_THETA, 5000, seed=1)
    with pytest.raises(ValueError):
        estimate_log_mgf_D(STUDY_THETA, 10_000, seed=1, n_steps=100)


def test_log_mgf_matches_spectral_oracle():
    oracle, _ = spectral_log_mgf(0.5, 2.0)
    est = estimate_log_mgf_D(STUDY_THETA, 100_000, seed=202)
    assert est.n_replications == 100_000
    assert abs(est.value - oracle) < 4.0 * est.std_error + 1e-3
    # martingale-difference property of D itself
    se_d = est.std_d / np.sqrt(est.n_replications)
    assert abs(est.mean_d) < 4.0 * se_d
    # determinism
    est2 = estimate_log_mgf_D(STUDY_THETA, 100_000, seed=202)
    assert est2.value == est.value


def test_log_mgf_warns_on_large_se():
    with pytest.warns(UserWarning, match="standard error"):
        estimate_log_mgf_D(STUDY_THETA, 10_000, seed=3)


def test_log_mgf_nu_smaller_noise():
    theta = StructuralParams(-0.1, 0.3, 0.5, 0.5)
    oracle, lam = spectral_log_mgf(0.5, 0.5)
    assert lam < 0.125          # fourth moment of M finite here
    est = estimate_log_mgf_D(theta, 50_000, seed=11)
    assert abs(est.value - oracle) < 4.0 * est.std_error + 1e-3
