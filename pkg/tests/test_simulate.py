import math

import numpy as np
import pytest
from scipy.stats import ks_2samp

from broxsim import (
    DrivingPath,
    HorizonExceededError,
    SimConfig,
    brox_increment_sample,
    brox_passage_local_time,
    build_time_change,
    child_rng,
    eval_scale,
    eval_w,
    gambler_ruin_no_revisit,
    local_time_at_level,
    reconstruct_x_path,
    run_replicated,
    sample_increment_pair,
    sample_values,
    sample_zero_flags,
    simulate_until_level,
)
from broxsim.simulate import write_samples_csv

from oracles import first_passage_prob

CFG = SimConfig(dt=1e-4)


class TestSimConfig:
    def test_bandwidth_defaults_to_sqrt_dt(self):
        assert SimConfig(dt=1e-4).eps == pytest.approx(0.01)
        assert SimConfig(dt=1e-4, bandwidth=0.02).eps == 0.02

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"dt": 0.0},
            {"dt": -1e-4},
            {"bandwidth": 0.0},
            {"max_steps": 0},
            {"floor_depth": 0.0},
        ],
    )
    def test_invalid_config_rejected(self, kwargs):
        with pytest.raises(ValueError):
            SimConfig(**kwargs)


class TestSimulateUntilLevel:
    def test_passage_probability_matches_reflection_principle(self):
        # P(first passage of 0.5 happens within t=1) for the continuous motion
        cfg = SimConfig(dt=1e-4, max_steps=10_000)
        n = 1000
        hits = 0
        for r in range(n):
            try:
                simulate_until_level(0.0, 0.5, cfg, child_rng(101, r))
                hits += 1
            except HorizonExceededError:
                pass
        p = first_passage_prob(0.5, 1.0)  # 0.6170750774519738
        se = math.sqrt(p * (1.0 - p) / n)
        assert abs(hits / n - p) < 3.0 * se + 0.01  # + discrete-crossing bias margin

    def test_downward_rule_mirrors_upward(self):
        # stop-time distributions for +level and -level runs should agree
        cfg = SimConfig(dt=1e-3)
        rejected = 0
        reps = 10
        n = 400
        for rep in range(reps):
            up = [
                simulate_until_level(0.0, 0.3, cfg, child_rng(7000 + rep, r), reflect_at=-1.2).stop_index
                for r in range(n)
            ]
            dn = [
                simulate_until_level(0.0, -0.3, cfg, child_rng(8000 + rep, r), reflect_at=1.2).stop_index
                for r in range(n)
            ]
            if ks_2samp(up, dn).pvalue < 0.05:
                rejected += 1
        assert rejected <= 2  # nominal false-rejection rate is 5%

    def test_horizon_error_on_small_budget(self):
        cfg = SimConfig(dt=1e-4, max_steps=10)
        with pytest.raises(HorizonExceededError):
            simulate_until_level(0.0, 50.0, cfg, child_rng(0, 0))

    def test_start_equals_target_rejected(self):
        with pytest.raises(ValueError):
            simulate_until_level(1.0, 1.0, CFG, child_rng(0, 0))

    def test_misplaced_reflector_rejected(self):
        with pytest.raises(ValueError):
            simulate_until_level(0.0, 1.0, CFG, child_rng(0, 0), reflect_at=0.5)
        with pytest.raises(ValueError):
            simulate_until_level(0.0, -1.0, CFG, child_rng(0, 0), reflect_at=-0.5)

    def test_path_shape_and_stop_position(self):
        path = simulate_until_level(0.0, 0.2, CFG, child_rng(3, 0))
        assert path.b[0] == 0.0
        assert path.b.size == path.stop_index + 1
        assert path.b[path.stop_index] >= 0.2
        assert np.all(path.b[: path.stop_index] < 0.2)

    def test_reflection_keeps_positions_above_floor(self):
        path = simulate_until_level(0.0, 1.5, CFG, child_rng(4, 1), reflect_at=-0.2)
        assert np.all(path.b >= -0.2)


class TestLocalTimeAtLevel:
    def test_never_in_band_is_structural_zero(self):
        path = DrivingPath(dt=1e-4, b=np.array([0.0, 0.5, 1.0]), stop_index=2)
        lt = local_time_at_level(path, -5.0, CFG)
        assert lt.value == 0.0 and lt.is_exact_zero

    def test_constant_path_forced_value(self):
        n = 1000
        path = DrivingPath(dt=1e-4, b=np.full(n + 1, 0.7), stop_index=n)
        lt = local_time_at_level(path, 0.7, CFG)
        assert lt.value == pytest.approx(n * 1e-4 / (2 * CFG.eps), rel=1e-12)
        assert not lt.is_exact_zero

    def test_brownian_passage_mean_short_run(self):
        # mean local time at 0 up to the passage of b is 2b
        cfg = SimConfig(dt=1e-4)
        n = 800

        def sampler(rng):
            path = simulate_until_level(0.0, 0.5, cfg, rng, reflect_at=-cfg.floor_depth)
            return local_time_at_level(path, 0.0, cfg)

        vals = sample_values(run_replicated(sampler, n, 515))
        assert abs(vals.mean() - 1.0) < 0.12


class TestBroxSamplers:
    def test_passage_mean_flat(self, flat_env, flat_sm):
        cfg = SimConfig(dt=1e-4)
        n = 1200
        vals = sample_values(
            run_replicated(
                lambda rng: brox_passage_local_time(flat_env, flat_sm, 0.4, 0.8, cfg, rng),
                n,
                99,
            )
        )
        assert abs(vals.mean() - 0.8) < 0.05 * 0.8

    def test_transfer_factor_is_algebraic(self, bm_env, bm_sm):
        # replay the same stream: sample == exp(-W(a)) * raw band estimate
        cfg = SimConfig(dt=1e-3)
        a, b = 0.5, 1.0
        sample = brox_passage_local_time(bm_env, bm_sm, a, b, cfg, child_rng(11, 0))
        s_a = eval_scale(bm_sm, bm_env, a)
        s_b = eval_scale(bm_sm, bm_env, b)
        path = simulate_until_level(
            0.0, s_b, cfg, child_rng(11, 0), reflect_at=min(0.0, s_a) - cfg.floor_depth
        )
        raw = local_time_at_level(path, s_a, cfg)
        assert sample.value == math.exp(-eval_w(bm_env, a)) * raw.value
        assert sample.is_exact_zero == raw.is_exact_zero

    def test_passage_zero_fraction_small(self, flat_env, flat_sm):
        # the walk must cross the band to reach b, so structural zeros are rare
        cfg = SimConfig(dt=1e-4)
        flags = sample_zero_flags(
            run_replicated(
                lambda rng: brox_passage_local_time(flat_env, flat_sm, 0.4, 0.8, cfg, rng),
                800,
                100,
            )
        )
        assert flags.mean() < 0.01

    def test_increment_atom_and_mean_flat(self, flat_env, flat_sm):
        cfg = SimConfig(dt=1e-4)
        law_atom = 1.0 / 3.0  # (s(1)-s(0.5))/(s(2)-s(0.5)) on the flat env
        samples = run_replicated(
            lambda rng: brox_increment_sample(flat_env, flat_sm, 0.5, 1.0, 2.0, cfg, rng),
            1000,
            7,
        )
        flags = sample_zero_flags(samples)
        vals = sample_values(samples)
        assert abs(flags.mean() - law_atom) < 0.045
        assert abs(vals.mean() - 2.0) < 0.3
        assert np.all(vals[flags] == 0.0)

    def test_pathwise_zero_iff_no_revisit(self, flat_env, flat_sm):
        cfg = SimConfig(dt=1e-4)
        a, b, c = 0.5, 1.0, 2.0
        s_a = eval_scale(flat_sm, flat_env, a)
        s_b = eval_scale(flat_sm, flat_env, b)
        s_c = eval_scale(flat_sm, flat_env, c)
        n = 400
        flags = sample_zero_flags(
            run_replicated(
                lambda rng: brox_increment_sample(flat_env, flat_sm, a, b, c, cfg, rng),
                n,
                123,
            )
        )
        ruins = run_replicated(
            lambda rng: gambler_ruin_no_revisit(s_a, s_b, s_c, cfg, rng), n, 123
        )
        assert np.array_equal(flags, np.asarray(ruins, dtype=bool))

    def test_increment_ordering_enforced(self, flat_env, flat_sm):
        with pytest.raises(ValueError):
            brox_increment_sample(flat_env, flat_sm, 1.0, 1.0, 2.0, CFG, child_rng(0, 0))


class TestGamblerRuin:
    def test_hit_probability_matches_ruin_value(self):
        cfg = SimConfig(dt=1e-4)
        n = 10_000
        wins = run_replicated(
            lambda rng: gambler_ruin_no_revisit(0.5, 1.0, 2.0, cfg, rng), n, 2024
        )
        p = np.mean(wins)
        se = math.sqrt((1 / 3) * (2 / 3) / n)
        assert abs(p - 1.0 / 3.0) < 3.0 * se

    def test_midpoint_is_half(self):
        cfg = SimConfig(dt=1e-4)
        n = 4000
        wins = run_replicated(
            lambda rng: gambler_ruin_no_revisit(0.0, 0.5, 1.0, cfg, rng), n, 2025
        )
        se = math.sqrt(0.25 / n)
        assert abs(np.mean(wins) - 0.5) < 3.0 * se

    def test_start_near_bottom_rarely_wins(self):
        cfg = SimConfig(dt=1e-4)
        offset = 0.01 * 1.5  # 1% of the interval
        wins = run_replicated(
            lambda rng: gambler_ruin_no_revisit(0.5, 0.5 + offset, 2.0, cfg, rng),
            10_000,
            2026,
        )
        assert np.mean(wins) < 0.03

    def test_bad_ordering_rejected(self):
        with pytest.raises(ValueError):
            gambler_ruin_no_revisit(1.0, 0.5, 2.0, CFG, child_rng(0, 0))


class TestEstimatorConsistency:
    def test_bias_shrinks_with_dt(self, flat_env, flat_sm):
        # coarse steps bias the band estimate upward via crossing overshoot;
        # halving dt (with eps = sqrt(dt)) must move the mean toward 2(b-a)
        a, b, n, target = 0.2, 0.4, 12_000, 0.4
        means = []
        for dt in (4e-4, 2e-4, 1e-4):
            cfg = SimConfig(dt=dt, floor_depth=1.5)
            vals = sample_values(
                run_replicated(
                    lambda rng: brox_passage_local_time(flat_env, flat_sm, a, b, cfg, rng),
                    n,
                    31,
                )
            )
            means.append(vals.mean())
        errs = [abs(m - target) for m in means]
        slack = 0.003  # ~1 standard error of a mean difference at this n
        assert errs[0] >= errs[1] - slack
        assert errs[1] >= errs[2] - slack
        assert errs[2] < 0.05 * target


class TestIncrementPairs:
    def test_pair_sampler_runs_and_marginals_are_plausible(self, flat_env, flat_sm):
        cfg = SimConfig(dt=1e-3, floor_depth=2.0)
        pairs = run_replicated(
            lambda rng: sample_increment_pair(
                flat_env, flat_sm, 0.5, 1.0, 1.4, 1.8, 2.2, cfg, rng
            ),
            300,
            88,
        )
        i1 = np.array([p[0].value for p in pairs])
        i2 = np.array([p[1].value for p in pairs])
        assert np.all(i1 >= 0.0) and np.all(i2 >= 0.0)
        # atoms of both windows are positive, so both margins carry zeros
        assert (i1 == 0).any() and (i2 == 0).any()

    def test_level_ordering_enforced(self, flat_env, flat_sm):
        with pytest.raises(ValueError):
            sample_increment_pair(flat_env, flat_sm, 0.5, 1.0, 0.9, 1.8, 2.2, CFG, child_rng(0, 0))


class TestRunReplicated:
    def test_deterministic_repeat(self, flat_env, flat_sm):
        cfg = SimConfig(dt=1e-3)
        mk = lambda rng: brox_passage_local_time(flat_env, flat_sm, 0.4, 0.8, cfg, rng)
        v1 = sample_values(run_replicated(mk, 50, 5))
        v2 = sample_values(run_replicated(mk, 50, 5))
        assert np.array_equal(v1, v2)

    def test_single_replicate_equals_direct_child_call(self, flat_env, flat_sm):
        cfg = SimConfig(dt=1e-3)
        mk = lambda rng: brox_passage_local_time(flat_env, flat_sm, 0.4, 0.8, cfg, rng)
        batch = run_replicated(mk, 1, 77)
        direct = mk(child_rng(77, 0))
        assert batch[0].value == direct.value

    def test_worker_count_does_not_change_results(self, flat_env, flat_sm):
        cfg = SimConfig(dt=1e-3)
        mk = lambda rng: brox_passage_local_time(flat_env, flat_sm, 0.4, 0.8, cfg, rng)
        v1 = sample_values(run_replicated(mk, 40, 6, workers=1))
        v4 = sample_values(run_replicated(mk, 40, 6, workers=4))
        assert np.array_equal(v1, v4)

    def test_horizon_failure_reports_replicate_and_fails_closed(self):
        cfg = SimConfig(dt=1e-4, max_steps=50)

        def sampler(rng):
            return simulate_until_level(0.0, 99.0, cfg, rng)

        with pytest.raises(HorizonExceededError) as err:
            run_replicated(sampler, 4, 9)
        assert err.value.replicate == 0
        assert "replicate 0" in str(err.value)

    def test_invalid_rep_count(self):
        with pytest.raises(ValueError):
            run_replicated(lambda rng: 0.0, 0, 1)


class TestTimeChangeAndReconstruction:
    def test_flat_time_change_is_linear(self, flat_env, flat_sm):
        path = simulate_until_level(0.0, 0.5, SimConfig(dt=1e-3), child_rng(21, 0))
        record = build_time_change(flat_env, flat_sm, path)
        expected = np.arange(path.stop_index + 1) * 1e-3
        assert np.allclose(record.t, expected, rtol=1e-12, atol=1e-15)

    def test_flat_reconstruction_tracks_driving_path(self, flat_env, flat_sm):
        # with W = 0 the time change is the identity, so X == B step for step
        cfg = SimConfig(dt=1e-3)
        path = simulate_until_level(0.0, 0.5, cfg, child_rng(22, 0))
        t_grid = np.arange(path.stop_index) * cfg.dt
        xs = reconstruct_x_path(flat_env, flat_sm, path, t_grid)
        assert np.allclose(xs, path.b[: path.stop_index], rtol=0, atol=1e-12)

    def test_reconstruction_starts_at_origin(self, bm_env, bm_sm):
        cfg = SimConfig(dt=1e-3)
        path = simulate_until_level(0.0, 0.3, cfg, child_rng(23, 0))
        assert reconstruct_x_path(bm_env, bm_sm, path, [0.0])[0] == 0.0

    def test_time_beyond_range_raises(self, flat_env, flat_sm):
        path = simulate_until_level(0.0, 0.1, SimConfig(dt=1e-3), child_rng(24, 0))
        record = build_time_change(flat_env, flat_sm, path)
        with pytest.raises(HorizonExceededError):
            reconstruct_x_path(flat_env, flat_sm, path, [record.t[-1] + 1.0])

    def test_occupation_formula_consistency(self, bm_env, bm_sm):
        # Riemann sum of f(X_t) against the binned occupation-density integral
        cfg = SimConfig(dt=1e-4)
        rng = child_rng(25, 0)
        n_steps = 20_000
        b = np.concatenate([[0.0], np.cumsum(rng.standard_normal(n_steps) * math.sqrt(cfg.dt))])
        path = DrivingPath(dt=cfg.dt, b=b, stop_index=n_steps)
        record = build_time_change(bm_env, bm_sm, path)
        t_end = record.t[-1] * 0.999
        t_grid = np.linspace(0.0, t_end, 12_000, endpoint=False)
        xs = reconstruct_x_path(bm_env, bm_sm, path, t_grid)
        dt_grid = t_grid[1] - t_grid[0]

        def bump(x):
            return np.exp(-((x - 0.1) ** 2) / (2 * 0.2**2))

        lhs = np.sum(bump(xs)) * dt_grid
        width = 4.0 * cfg.eps
        edges = np.arange(xs.min() - width, xs.max() + 2 * width, width)
        occupancy, _ = np.histogram(xs, bins=edges)
        centers = 0.5 * (edges[:-1] + edges[1:])
        rhs = np.sum(bump(centers) * occupancy * dt_grid)
        assert abs(lhs - rhs) <= 0.10 * abs(lhs)


def test_samples_csv(tmp_path, flat_env, flat_sm):
    cfg = SimConfig(dt=1e-3)
    samples = run_replicated(
        lambda rng: brox_passage_local_time(flat_env, flat_sm, 0.4, 0.8, cfg, rng), 5, 3
    )
    path = tmp_path / "samples.csv"
    write_samples_csv(samples, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "replicate,value,is_exact_zero"
    assert len(lines) == 6
    rep, value, flag = lines[1].split(",")
    assert rep == "0" and flag in ("true", "false")
    assert float(value) == samples[0].value
