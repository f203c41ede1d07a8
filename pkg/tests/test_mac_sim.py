import math

import numpy as np
import pytest
from conftest import PRESET_PARAMS

from dirtymac.lattice_core import ScalarLattice, mod_lattice
from dirtymac.mac_sim import (BLOCK, CORNER_PRESETS, PRESETS, PresetError, SchemeConfig,
                              apply_channel, break_nesting, build_preset, chi2_uniform_pvalue,
                              decode_frontend, effective_noise_power, encode, equivalence_residual,
                              equivalent_channel, generate_batch, interference_sweep,
                              nested_code_experiment, primary_alpha, role_stream, run_experiment,
                              run_pipeline, scalar_rate_bound, sweep_is_flat, validate_config)
from dirtymac.rate_regions import ChannelParams

N_FAST = 200_000


def pipeline(preset, params=None, n=N_FAST, seed=7, cfg=None):
    params = params or PRESET_PARAMS[preset]
    cfg = cfg or build_preset(preset, params)
    return cfg, run_pipeline(cfg, generate_batch(cfg, params, n, seed))


class TestBuildPreset:
    def test_t1_case1_corner(self):
        cfg = build_preset("T1-Case1", PRESET_PARAMS["T1-Case1"])
        assert cfg.alpha2 == pytest.approx(2 / 3)
        assert cfg.lattice1.second_moment == pytest.approx(9.0)
        assert cfg.lattice2.second_moment == pytest.approx(4.0)
        assert (cfg.v1_active, cfg.v2_active) == (False, True)

    def test_t2(self):
        cfg = build_preset("T2-Balanced", PRESET_PARAMS["T2-Balanced"])
        assert cfg.alpha1 == cfg.alpha2 == cfg.alpha_r == pytest.approx(0.8)
        assert cfg.lattice1.second_moment == pytest.approx(10.0)
        assert cfg.lattice2 == cfg.lattice_r == cfg.lattice1

    def test_t3_case1(self):
        cfg = build_preset("T3-Case1", PRESET_PARAMS["T3-Case1"])
        assert cfg.alpha1 == pytest.approx(0.94839, abs=1e-5)
        assert cfg.alpha1 / cfg.alpha2 == pytest.approx(math.sqrt(2))
        assert cfg.beta == cfg.kr == cfg.k1 == pytest.approx(math.sqrt(2))

    @pytest.mark.parametrize("preset", PRESETS)
    def test_examples_consistent(self, preset):
        params = PRESET_PARAMS[preset]
        cfg = build_preset(preset, params)
        assert validate_config(cfg, params) == []
        assert cfg.lattice1.second_moment <= params.p1 * (1 + 1e-9)
        assert cfg.lattice2.second_moment <= params.p2 * (1 + 1e-9)

    @pytest.mark.parametrize("a, b", [("T1-Case3", "T1-Case2"), ("T1-Case4", "T1-Case1")])
    def test_mirrors(self, a, b):
        params = PRESET_PARAMS[a]
        mirror = build_preset(a, params)
        base = build_preset(b, params.swapped())
        assert mirror.swapped(b) == base

    @pytest.mark.parametrize("preset, params, fragment", [
        ("T1-Case1", ChannelParams(5, 4, 1, 0.5, 0.5), "P1 >= P2"),
        ("T1-Case3", ChannelParams(5, 4, 1, 0.5, 0.5), "P1 >= P2"),
        ("T1-Case2", ChannelParams(4, 5, 1, 0.5, 0.5), "P2 >= P1"),
        ("T2-Balanced", ChannelParams(10, 9, 1, 2, 2), "P1 == P2"),
        ("T3-Case1", ChannelParams(100, 4, 1, 0.5, 0.5), "sqrt(P1 P2)"),
    ])
    def test_precondition_messages(self, preset, params, fragment):
        with pytest.raises(PresetError, match=fragment.replace("(", r"\(").replace(")", r"\)")):
            build_preset(preset, params)

    def test_unknown(self):
        with pytest.raises(ValueError):
            build_preset("T9", ChannelParams(1, 1, 1))

    @pytest.mark.parametrize("preset", PRESETS)
    def test_alpha_override(self, preset):
        params = PRESET_PARAMS[preset]
        cfg = build_preset(preset, params, alpha=0.5)
        assert primary_alpha(cfg) == 0.5
        assert primary_alpha(build_preset(preset, params)) < 1.0

    def test_to_dict_is_flat(self):
        d = build_preset("T2-Balanced", PRESET_PARAMS["T2-Balanced"]).to_dict()
        assert d["lattice_r"] == pytest.approx(math.sqrt(120))


class TestGenerate:
    def test_exact_estimate_without_distortion(self):
        params = ChannelParams(9, 4, 1)
        cfg = build_preset("T1-Case1", params)
        b = generate_batch(cfg, params, 1000, 1)
        assert np.array_equal(b.s1, b.s1_est) and np.array_equal(b.s2, b.s2_est)

    def test_distortion_variance(self):
        params = ChannelParams(10, 10, 1, 2.0, 0.5)
        cfg = build_preset("T2-Balanced", params)
        b = generate_batch(cfg, params, 10**6, 3)
        assert np.var(b.s1 - b.s1_est) == pytest.approx(2.0, rel=0.01)
        assert np.var(b.s2 - b.s2_est) == pytest.approx(0.5, rel=0.01)

    def test_deterministic(self):
        params = PRESET_PARAMS["T3-Case2"]
        cfg = build_preset("T3-Case2", params)
        a, b = (generate_batch(cfg, params, 3 * BLOCK + 5, 99) for _ in range(2))
        for name, arr in a.arrays().items():
            assert np.array_equal(arr, b.arrays()[name]), name

    def test_workers_do_not_change_draws(self):
        params = PRESET_PARAMS["T2-Balanced"]
        cfg = build_preset("T2-Balanced", params)
        a = generate_batch(cfg, params, 3 * BLOCK, 5, workers=1)
        b = generate_batch(cfg, params, 3 * BLOCK, 5, workers=4)
        assert all(np.array_equal(x, b.arrays()[k]) for k, x in a.arrays().items())

    def test_role_prefix_stable(self):
        draw = lambda rng, k: rng.random(k)  # noqa: E731
        long = role_stream(1, "z", BLOCK + 10, draw)
        assert np.array_equal(role_stream(1, "z", 10, draw), long[:10])
        assert not np.array_equal(role_stream(1, "s1", 10, draw), long[:10])

    def test_inactive_and_zeroed(self):
        params = PRESET_PARAMS["T1-Case2"]
        cfg = build_preset("T1-Case2", params)
        b = generate_batch(cfg, params, 100, 0)
        assert not b.v1.any() and not b.d2.any()
        assert b.v2.any() and b.d1.any()

    def test_rejects_empty(self):
        cfg = build_preset("T2-Balanced", PRESET_PARAMS["T2-Balanced"])
        with pytest.raises(ValueError):
            generate_batch(cfg, PRESET_PARAMS["T2-Balanced"], 0, 0)


class TestPipelineStages:
    def _cfg(self, **kw):
        lat = ScalarLattice(2.0)
        base = dict(preset_id="T2-Balanced", alpha1=1.0, alpha2=1.0, alpha_r=1.0, k1=1.0, k2=1.0, kr=1.0,
                    beta=0.0, gamma=0.0, lattice1=lat, lattice2=lat, lattice_r=lat,
                    v1_active=True, v2_active=True)
        base.update(kw)
        return SchemeConfig(**base)

    def _batch(self, n=64, seed=0):
        cfg = self._cfg()
        return generate_batch(cfg, ChannelParams(1 / 3, 1 / 3, 1.0), n, seed)

    def test_encode_identity(self):
        b = self._batch()
        z = np.zeros(b.n)
        b = encode(self._cfg(), b.replace(s1_est=z, s2_est=z, d1=z, d2=z))
        assert np.array_equal(b.x1, b.v1) and np.array_equal(b.x2, b.v2)

    def test_channel(self):
        b = self._batch()
        z = np.zeros(b.n)
        zero = b.replace(x1=z, x2=z, s1=z, s2=z, z=z)
        assert not apply_channel(zero).y.any()
        b = b.replace(x1=b.v1, x2=b.v2, s1=z, s2=z, z=z)
        assert np.array_equal(apply_channel(b).y, b.v1 + b.v2)

    def test_channel_linearity(self):
        b = encode(self._cfg(), self._batch())
        y = apply_channel(b).y
        scaled = b.replace(**{k: 3.0 * getattr(b, k) for k in ("x1", "x2", "s1", "s2", "z")})
        assert np.allclose(apply_channel(scaled).y, 3.0 * y, rtol=1e-14, atol=1e-12)

    def test_decode_identity(self):
        b = self._batch()
        y = mod_lattice(ScalarLattice(2.0), b.s1)
        out = decode_frontend(self._cfg(), b.replace(y=y))
        assert np.array_equal(out.y_prime, y)

    def test_decode_periodicity(self):
        cfg = self._cfg(alpha_r=0.5, gamma=1.0, beta=1.0)
        b = self._batch()
        y = np.linspace(-5, 5, b.n)
        a = decode_frontend(cfg, b.replace(y=y)).y_prime
        shifted = decode_frontend(cfg, b.replace(y=y + 3 * 2.0 / 0.5)).y_prime
        assert np.max(np.abs(mod_lattice(cfg.lattice_r, a - shifted))) < 1e-12

    def test_t1_case1_decoder_form(self):
        cfg, b = pipeline("T1-Case1", n=1000)
        a = cfg.alpha2
        expected = mod_lattice(cfg.lattice2, a * (b.y - b.d1) - b.d2)
        assert np.max(np.abs(mod_lattice(cfg.lattice2, b.y_prime - expected))) < 1e-12

    def test_t2_noiseless(self):
        params = ChannelParams(10, 10, 1)
        cfg = build_preset("T2-Balanced", params, alpha=1.0)
        b = generate_batch(cfg, params, 10_000, 4)
        b = run_pipeline(cfg, b.replace(z=np.zeros(b.n)))
        target = mod_lattice(cfg.lattice_r, b.v1 + b.v2)
        assert np.max(np.abs(mod_lattice(cfg.lattice_r, b.y_prime - target))) < 1e-9 * cfg.lattice_r.step


class TestEquivalence:
    @pytest.mark.parametrize("preset", PRESETS)
    def test_identity(self, preset):
        cfg, b = pipeline(preset)
        assert equivalence_residual(cfg, b) < 1e-9 * cfg.lattice_r.step

    @pytest.mark.parametrize("preset", ["T1-Case1", "T2-Balanced", "T3-Case1"])
    def test_broken_nesting(self, preset):
        cfg = break_nesting(build_preset(preset, PRESET_PARAMS[preset]))
        _, b = pipeline(preset, cfg=cfg, n=20_000)
        assert equivalence_residual(cfg, b) > 0.1 * cfg.lattice_r.step

    def test_prediction_in_cell(self):
        cfg, b = pipeline("T3-Case2", n=5000)
        pred = equivalent_channel(cfg, b)
        h = cfg.lattice_r.step / 2
        assert pred.min() > -h and pred.max() <= h


class TestEffectiveNoise:
    def test_t1_case1_value(self):
        cfg, b = pipeline("T1-Case1")
        m = effective_noise_power(cfg, b, PRESET_PARAMS["T1-Case1"])
        assert m.analytic == pytest.approx(4 / 3)
        assert m.analytic_sinr == pytest.approx(3.0)
        assert abs(m.measured - m.analytic) < 4 * m.stderr

    def test_t2_value(self):
        cfg, b = pipeline("T2-Balanced")
        m = effective_noise_power(cfg, b, PRESET_PARAMS["T2-Balanced"])
        assert m.analytic == pytest.approx(2 * 0.04 * 10 + 0.64 * 5)

    def test_without_params_uses_sample_variances(self):
        cfg, b = pipeline("T2-Balanced", n=50_000)
        m = effective_noise_power(cfg, b)
        assert m.analytic == pytest.approx(4.0, rel=0.02)

    @pytest.mark.parametrize("preset", PRESETS)
    def test_matches_closed_form(self, preset):
        params = PRESET_PARAMS[preset]
        cfg, b = pipeline(preset)
        m = effective_noise_power(cfg, b, params)
        assert abs(m.measured - m.analytic) < 4 * m.stderr

    def test_increases_with_distortion(self):
        values = []
        for e in (0.0, 1.0, 2.0, 4.0):
            params = ChannelParams(10, 10, 1, e / 2, e / 2)
            cfg, b = pipeline("T2-Balanced", params=params, cfg=build_preset("T2-Balanced", params, alpha=0.8))
            values.append(effective_noise_power(cfg, b, params).measured)
        assert all(np.diff(values) > 0)

    @pytest.mark.parametrize("preset", ["T1-Case1", "T2-Balanced", "T3-Case1", "T1-Case3"])
    def test_mmse_alpha_is_empirically_best(self, preset):
        params = PRESET_PARAMS[preset]
        best = build_preset(preset, params)
        a = primary_alpha(best)
        sinr = {}
        for da in (-0.05, 0.0, 0.05):
            cfg, b = pipeline(preset, cfg=build_preset(preset, params, alpha=a + da))
            sinr[da] = effective_noise_power(cfg, b, params).empirical_sinr
        assert sinr[0.0] > sinr[-0.05] and sinr[0.0] > sinr[0.05]


class TestStatistics:
    def test_chi2_accepts_uniform(self):
        lat = ScalarLattice(2.0)
        x = lat.step * (0.5 - np.random.default_rng(8).random(10**5))
        assert chi2_uniform_pvalue(x, lat) > 0.01

    def test_chi2_rejects_triangular(self):
        lat = ScalarLattice(2.0)
        rng = np.random.default_rng(8)
        x = (rng.random(10**5) - rng.random(10**5))
        assert chi2_uniform_pvalue(x, lat) < 1e-6

    def test_sweep_flatness(self):
        assert sweep_is_flat([(1, 1.0, 0.1, 0), (2, 1.1, 0.1, 0)])
        assert not sweep_is_flat([(1, 1.0, 0.01, 0), (2, 1.1, 0.01, 0)])

    def test_scalar_bound(self):
        assert scalar_rate_bound(3.0) == pytest.approx(0.5 * math.log2(3) - 0.5 * math.log2(2 * math.pi * math.e / 12))


class TestInterferenceSweep:
    def test_flat_across_q(self):
        params = PRESET_PARAMS["T1-Case1"]
        qs = [1e2 * 9, 1e4 * 9, 1e6 * 9]
        rows = interference_sweep("T1-Case1", params, qs, 100_000, 12)
        assert [r[0] for r in rows] == qs
        assert sweep_is_flat(rows)
        rates = [r[3] for r in rows]
        assert max(rates) - min(rates) < 0.01

    def test_empty(self):
        with pytest.raises(ValueError):
            interference_sweep("T1-Case1", PRESET_PARAMS["T1-Case1"], [], 10, 0)


class TestRunExperiment:
    @pytest.mark.parametrize("preset", PRESETS)
    def test_all_checks_pass(self, preset):
        report = run_experiment(preset, PRESET_PARAMS[preset], 100_000, 0xD1A7)
        assert report.passed, report.checks

    def test_deterministic(self):
        a = run_experiment("T3-Case1", PRESET_PARAMS["T3-Case1"], 20_000, 5).to_dict()
        b = run_experiment("T3-Case1", PRESET_PARAMS["T3-Case1"], 20_000, 5).to_dict()
        assert a == b

    def test_stderr_scaling(self):
        params = PRESET_PARAMS["T2-Balanced"]
        a = run_experiment("T2-Balanced", params, 100_000, 1)
        b = run_experiment("T2-Balanced", params, 200_000, 1)
        assert a.effective_noise_stderr / b.effective_noise_stderr == pytest.approx(math.sqrt(2), rel=0.2)
        assert b.equivalence_relative_residual < 1e-9

    def test_with_q_sweep(self):
        r = run_experiment("T1-Case1", PRESET_PARAMS["T1-Case1"], 50_000, 2, q_values=[900, 9e4])
        assert "interference_independence" in r.checks and r.passed

    def test_broken_nesting_fails(self):
        params = PRESET_PARAMS["T1-Case1"]
        cfg = break_nesting(build_preset("T1-Case1", params))
        r = run_experiment("T1-Case1", params, 20_000, 2, cfg=cfg)
        assert not r.checks["equivalence"]


class TestNestedCode:
    def test_noiseless_is_error_free(self):
        params = ChannelParams(9, 4, 1e-12)
        cfg = build_preset("T1-Case1", params, alpha=1.0)
        assert nested_code_experiment("T1-Case1", params, 2, 20_000, 1, cfg=cfg) == 0.0

    def test_monotone_in_m(self, corner_params):
        ser = [nested_code_experiment("T1-Case1", corner_params, m, 50_000, 3) for m in (2, 3, 4, 8, 16)]
        assert all(b >= a for a, b in zip(ser, ser[1:]))

    @pytest.mark.parametrize("preset", CORNER_PRESETS + ("T3-Case1",))
    def test_runs_for_single_user_presets(self, preset):
        ser = nested_code_experiment(preset, PRESET_PARAMS[preset], 2, 10_000, 0)
        assert 0.0 <= ser < 0.5

    def test_two_active_users_rejected(self):
        with pytest.raises(ValueError):
            nested_code_experiment("T2-Balanced", PRESET_PARAMS["T2-Balanced"], 2, 100, 0)

    def test_codebook_size(self, corner_params):
        with pytest.raises(ValueError):
            nested_code_experiment("T1-Case1", corner_params, 1, 100, 0)
