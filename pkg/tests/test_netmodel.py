import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cfactivity.netmodel import (
    ConfigError,
    SimParams,
    assign_powers,
    build_clusters,
    calibrate_snr_target,
    dbm_to_watts,
    generate_scenario,
    large_scale_fading,
    path_loss_db,
    sample_activity,
    sample_dominant_snr_db,
    scenario_to_text,
    substream,
    synthesize_received,
    torus_distance,
    torus_distances,
)

from conftest import handmade_scenario, small_params

coord = st.floats(0.0, 999.999, allow_nan=False)


class TestTorus:
    def test_wraps_across_edge(self):
        assert torus_distance((0, 0), (900, 0), 1000) == pytest.approx(100.0)

    def test_identity(self):
        assert torus_distance((123.4, 5.6), (123.4, 5.6), 1000) == 0.0

    def test_maximal_offset(self):
        assert torus_distance((0, 0), (500, 500), 1000) == pytest.approx(500 * np.sqrt(2))

    def test_inputs_reduced_modulo_side(self):
        assert torus_distance((1000 + 10, -5), (10, 995), 1000) == pytest.approx(0.0, abs=1e-9)

    @settings(max_examples=200, deadline=None)
    @given(st.tuples(coord, coord), st.tuples(coord, coord), st.tuples(coord, coord))
    def test_metric_axioms(self, p, q, r):
        side = 1000.0
        d_pq = torus_distance(p, q, side)
        assert d_pq == pytest.approx(torus_distance(q, p, side), abs=1e-9)
        assert d_pq <= torus_distance(p, r, side) + torus_distance(r, q, side) + 1e-9
        assert 0.0 <= d_pq <= side / np.sqrt(2) + 1e-9

    def test_pairwise_matches_scalar(self, rng):
        aps = rng.uniform(0, 700, (5, 2))
        users = rng.uniform(0, 700, (7, 2))
        D = torus_distances(aps, users, 700)
        for m in range(5):
            for k in range(7):
                assert D[m, k] == pytest.approx(torus_distance(aps[m], users[k], 700))

    def test_beta_translation_invariant(self, rng):
        aps = rng.uniform(0, 1000, (6, 2))
        users = rng.uniform(0, 1000, (9, 2))
        F = rng.normal(0, 2, (6, 9))
        base = large_scale_fading(aps, users, 1000, F)
        for _ in range(5):
            shift = rng.uniform(-3000, 3000, 2)
            moved = large_scale_fading(np.mod(aps + shift, 1000), np.mod(users + shift, 1000), 1000, F)
            np.testing.assert_allclose(moved, base, rtol=1e-9)


class TestPathLoss:
    @pytest.mark.parametrize("d, F, expected", [(1, 0, -30.5), (100, 0, -103.9), (1000, 5, -135.6)])
    def test_values(self, d, F, expected):
        assert path_loss_db(d, F) == pytest.approx(expected, abs=1e-9)

    def test_clamped_below_one_metre(self):
        assert path_loss_db(0.0) == pytest.approx(-30.5)
        assert path_loss_db(0.25) == pytest.approx(-30.5)

    def test_unclamped_rejects_non_positive(self):
        with pytest.raises(ValueError):
            path_loss_db(0.0, clamp=False)
        assert path_loss_db(0.5, clamp=False) > -30.5


class TestParams:
    @pytest.mark.parametrize(
        "kw",
        [dict(M=0), dict(N=0), dict(K=0), dict(L=0), dict(eps=1.5), dict(eps=-0.1), dict(area_side=0),
         dict(rho_max=0), dict(power_policy="loud"), dict(outage="maybe"), dict(shadow_var=-1)],
    )
    def test_invalid(self, kw):
        with pytest.raises(ConfigError):
            SimParams(**kw)

    def test_noise_in_watts(self):
        assert SimParams(noise_dbm=-109).sigma2 == pytest.approx(10 ** (-13.9))
        assert dbm_to_watts(30) == pytest.approx(1.0)

    def test_colocated_shape(self):
        p = SimParams(M=20, N=2, colocated=True)
        assert (p.n_aps, p.n_antennas) == (1, 40)


class TestScenario:
    def test_deterministic(self):
        p = small_params()
        a, b = generate_scenario(p, 7), generate_scenario(p, 7)
        for f in ("ap_positions", "user_positions", "beta", "rho", "S"):
            np.testing.assert_array_equal(getattr(a, f), getattr(b, f))

    def test_invariants(self):
        p = SimParams(M=8, N=2, K=30, L=10)
        scn = generate_scenario(p, 3)
        assert scn.beta.shape == (8, 30) and np.all(scn.beta > 0)
        assert np.all(scn.rho > 0) and np.all(scn.rho <= p.rho_max)
        assert scn.S.shape == (10, 30)
        assert np.all((scn.ap_positions >= 0) & (scn.ap_positions < p.area_side))

    def test_independent_of_eps(self):
        a = generate_scenario(small_params(eps=0.0), 5)
        b = generate_scenario(small_params(eps=0.9), 5)
        np.testing.assert_array_equal(a.beta, b.beta)
        np.testing.assert_array_equal(a.S, b.S)

    def test_sequences_not_normalised(self):
        scn = generate_scenario(SimParams(M=2, K=400, L=40, power_policy="full"), 1)
        norms = np.sum(np.abs(scn.S) ** 2, axis=0)
        assert np.mean(norms) == pytest.approx(40, rel=0.05)
        assert np.std(norms) > 1.0

    def test_no_shadowing_monotone_in_distance(self):
        for seed in range(5):
            p = SimParams(M=10, K=50, shadow_var=0.0, power_policy="full")
            scn = generate_scenario(p, seed)
            d = torus_distances(scn.ap_positions, scn.user_positions, p.area_side).ravel()
            order = np.argsort(d)
            assert np.all(np.diff(scn.beta.ravel()[order]) <= 1e-30)

    def test_colocated_single_central_ap(self):
        p = SimParams(M=20, N=2, K=10, colocated=True, power_policy="full")
        scn = generate_scenario(p, 1)
        assert scn.M == 1 and scn.n_antennas == 40
        np.testing.assert_array_equal(scn.ap_positions, [[1000.0, 1000.0]])

    def test_substreams_differ(self):
        a = substream(1, "placement").random(4)
        b = substream(1, "shadowing").random(4)
        assert not np.allclose(a, b)
        with pytest.raises(KeyError):
            substream(1, "nonsense")

    def test_text_export(self):
        scn = generate_scenario(small_params(M=2, K=3), 0)
        lines = scenario_to_text(scn).strip().splitlines()
        assert lines[0] == "kind,index,x_m,y_m,rho_dbm,beta_db"
        assert len(lines) == 1 + 2 + 3
        assert lines[1].startswith("ap,0,") and lines[3].startswith("user,0,")
        assert len(lines[-1].split(",")[-1].split()) == 2
        assert float(lines[-1].split(",")[4]) == pytest.approx(10 * np.log10(200.0), abs=1e-3)


class TestPowers:
    def test_full_power(self):
        rho, out = assign_powers(np.ones((3, 5)), "full", 0.2, 1e-14)
        np.testing.assert_array_equal(rho, 0.2)
        assert not out.any()

    def test_target_cap_inactive_and_active(self):
        sigma2, t_db = 1e-14, 10.0
        beta = np.array([[1e-8, 1e-20], [1e-9, 1e-21]])
        rho, out = assign_powers(beta, "target", 0.2, sigma2, t_db)
        assert rho[0] == pytest.approx(10.0 * sigma2 / 1e-8)
        assert rho[0] < 0.2 and not out[0]
        assert rho[1] == 0.2 and out[1]

    def test_target_needs_value(self):
        with pytest.raises(ConfigError):
            assign_powers(np.ones((1, 1)), "target", 0.2, 1e-14, None)

    def test_silent_outage_removes_devices(self):
        p = SimParams(M=2, K=60, L=8, outage="silent", target_snr_db=60.0)
        scn = generate_scenario(p, 0)
        assert scn.outage.any()
        batch = synthesize_received(scn, np.ones(60, bool), 1)
        assert not batch.activity[scn.outage].any()

    def test_max_power_outage_keeps_devices(self):
        p = SimParams(M=2, K=60, L=8, target_snr_db=60.0)
        scn = generate_scenario(p, 0)
        assert not scn.outage.any()
        assert np.any(scn.rho == p.rho_max)


class TestCalibration:
    def test_quantile_zero_is_minimum(self):
        p = SimParams(M=5, K=50)
        snr = sample_dominant_snr_db(p, 2000, 9)
        assert calibrate_snr_target(p, 2000, 0.0, 9) == pytest.approx(snr.min())

    def test_point_mass_without_randomness(self):
        # one AP per unit-side torus: every user within 1 m, so the clamp pins the SNR
        p = SimParams(M=1, K=10, area_side=1.0, shadow_var=0.0)
        expected = 10 * np.log10(p.rho_max * 10 ** (-3.05) / p.sigma2)
        assert calibrate_snr_target(p, 1000, 0.05, 0) == pytest.approx(expected)

    def test_cellfree_target_above_colocated(self):
        co = calibrate_snr_target(SimParams(M=20, colocated=True), 5000, 0.05, 1)
        cf = calibrate_snr_target(SimParams(M=100), 5000, 0.05, 1)
        assert cf > co

    def test_too_few_samples(self):
        with pytest.raises(ConfigError):
            calibrate_snr_target(SimParams(), 500)

    def test_target_met_by_95_percent(self):
        p = SimParams(M=20, K=100)
        target = calibrate_snr_target(p, 10_000, 0.05, 0)
        fresh = sample_dominant_snr_db(p, 10_000, 77)
        assert np.mean(fresh >= target) == pytest.approx(0.95, abs=0.01)


class TestActivity:
    def test_extremes(self):
        assert sample_activity(50, 0.0, 1)[1].size == 0
        assert sample_activity(50, 1.0, 1)[1].size == 50

    def test_mean_active_count(self):
        counts = [sample_activity(400, 0.1, s)[1].size for s in range(10_000)]
        assert np.mean(counts) == pytest.approx(40, abs=2)

    def test_invalid_eps(self):
        with pytest.raises(ConfigError):
            sample_activity(10, 1.2, 0)


class TestSynthesis:
    def test_hermitian_psd(self):
        p = SimParams(M=6, N=2, K=40, L=16)
        scn = generate_scenario(p, 2)
        act, _ = sample_activity(40, 0.3, 3)
        batch = synthesize_received(scn, act, 4)
        for Q in batch.sample_cov:
            np.testing.assert_allclose(Q, Q.conj().T, rtol=0, atol=1e-12 * np.abs(Q).max())
            assert np.linalg.eigvalsh(Q).min() >= -1e-10 * np.trace(Q).real
        assert batch.active_set.tolist() == np.flatnonzero(act).tolist()

    def test_raw_retention_default(self):
        p = small_params(L=8, N=4)
        scn = generate_scenario(p, 0)
        act = np.ones(p.K, bool)
        assert synthesize_received(scn, act, 0).raw_signals.shape == (p.M, 8, 4)
        assert synthesize_received(scn, act, 0, keep_raw=False).raw_signals is None
        scn_wide = generate_scenario(small_params(L=4, N=8), 0)
        assert synthesize_received(scn_wide, act, 0).raw_signals is None

    def test_no_users_vanishing_noise(self):
        scn = dataclasses.replace(generate_scenario(small_params(), 0), sigma2=1e-300)
        batch = synthesize_received(scn, np.zeros(scn.K, bool), 1)
        assert np.abs(batch.sample_cov).max() < 1e-250

    def test_single_user_noiseless_rank_one(self):
        scn = dataclasses.replace(generate_scenario(small_params(N=6), 0), sigma2=0.0)
        act = np.zeros(scn.K, bool)
        act[3] = True
        batch = synthesize_received(scn, act, 1)
        for m in range(scn.M):
            Y = batch.raw_signals[m]
            s = scn.S[:, 3] * np.sqrt(scn.rho[3])
            g = np.linalg.lstsq(s[:, None], Y, rcond=None)[0]
            np.testing.assert_allclose(s[:, None] @ g, Y, atol=1e-12 * np.abs(Y).max())
            sv = np.linalg.svd(batch.sample_cov[m], compute_uv=False)
            assert sv[1] <= 1e-10 * sv[0]

    def test_expected_covariance(self):
        L = 4
        scn = handmade_scenario(
            beta=[[1.0, 0.5, 2.0]],
            rho=[1.0, 0.8, 0.3],
            S=np.random.default_rng(0).standard_normal((L, 3)) + 1j * np.random.default_rng(1).standard_normal((L, 3)),
            sigma2=0.5,
            n_antennas=4,
        )
        act = np.array([True, False, True])
        gam = act * scn.rho * scn.beta[0]
        expected = (scn.S * gam) @ scn.S.conj().T + 0.5 * np.eye(L)
        acc = np.zeros((L, L), complex)
        n = 10_000
        for seed in range(n):
            acc += synthesize_received(scn, act, seed, keep_raw=False).sample_cov[0]
        mean = acc / n
        big = np.abs(expected) > 0.2 * np.trace(expected).real / L
        rel = np.abs(mean - expected)[big] / np.abs(expected)[big]
        assert rel.max() <= 0.05
        assert np.linalg.norm(mean - expected) <= 0.05 * np.linalg.norm(expected)

    def test_many_antennas_converge(self):
        L, K = 6, 5
        rng = np.random.default_rng(3)
        S = rng.standard_normal((L, K)) + 1j * rng.standard_normal((L, K))
        errs = []
        for N in (32, 512):
            scn = handmade_scenario(np.ones((1, K)), np.full(K, 0.5), S, 1.0, n_antennas=N)
            act = np.array([1, 1, 0, 1, 0], bool)
            expected = (S * (act * 0.5)) @ S.conj().T + np.eye(L)
            e = [np.linalg.norm(synthesize_received(scn, act, s).sample_cov[0] - expected) for s in range(20)]
            errs.append(np.mean(e) / np.linalg.norm(expected))
        assert errs[1] < 0.4 * errs[0]  # ~ 1/sqrt(16) expected
        assert errs[1] < 4 / np.sqrt(512)


class TestClusters:
    def test_example(self):
        cm = build_clusters(np.array([[0.1], [0.5], [0.3]]), 2)
        assert cm.clusters.tolist() == [[1, 2]]
        assert cm.dominant.tolist() == [1]

    def test_t1_is_argmax_and_full_is_permutation(self, rng):
        beta = rng.random((7, 30))
        np.testing.assert_array_equal(build_clusters(beta, 1).dominant, beta.argmax(axis=0))
        full = build_clusters(beta, 7).clusters
        assert all(sorted(row) == list(range(7)) for row in full.tolist())
        assert np.all(np.diff(np.take_along_axis(beta, full.T, 0), axis=0) <= 0)

    def test_ties_to_lower_index(self):
        cm = build_clusters(np.array([[0.2], [0.5], [0.5], [0.2]]), 3)
        assert cm.clusters.tolist() == [[1, 2, 0]]

    def test_user_order_and_scaling_invariant(self, rng):
        beta = rng.random((6, 25))
        perm = rng.permutation(25)
        base = build_clusters(beta, 3).clusters
        np.testing.assert_array_equal(build_clusters(beta[:, perm], 3).clusters, base[perm])
        np.testing.assert_array_equal(build_clusters(beta * 3.7e-9, 3).clusters, base)

    def test_invalid_size(self):
        with pytest.raises(ConfigError):
            build_clusters(np.ones((3, 2)), 4)
