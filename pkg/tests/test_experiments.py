import numpy as np
import pytest

from stochwave.experiments import (
    ConvergenceConfig,
    TraceConfig,
    fit_slope,
    run_spatial_convergence,
    run_temporal_convergence,
    run_trace,
)
from stochwave.noise import NoiseSpec


class TestFitSlope:
    def test_identity(self):
        fit = fit_slope([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
        assert fit.slope == pytest.approx(1.0)
        assert fit.residual == pytest.approx(0.0, abs=1e-12)

    def test_half_slope_with_offset(self):
        xs = np.array([0.0, 1.0, 2.0, 3.0])
        fit = fit_slope(xs, 0.5 * xs - 2.0)
        assert fit.slope == pytest.approx(0.5)
        assert fit.intercept == pytest.approx(-2.0)

    def test_noisy_sqrt_law_recovered(self):
        # exact k^(1/2) data perturbed by 1% multiplicative noise
        rng = np.random.default_rng(5)
        levels = np.arange(4, 10, dtype=float)
        ks = 2.0**-levels
        errs = ks**0.5 * (1.0 + 0.01 * rng.normal(size=ks.size))
        fit = fit_slope(np.log2(ks), np.log2(errs))
        assert abs(fit.slope - 0.5) < 0.03

    def test_too_few_points(self):
        with pytest.raises(ValueError):
            fit_slope([1.0, 2.0], [1.0, 2.0])

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            fit_slope([1.0, 2.0, 3.0], [1.0, np.nan, 3.0])


def _tiny_temporal(seed=901, schemes=("stm",), M=8):
    return ConvergenceConfig(
        problem="sine-gordon-additive",
        mode="temporal",
        ladder=(3, 4, 5),
        h_exact_level=4,
        k_exact_level=8,
        T=0.5,
        M=M,
        seed=seed,
        schemes=schemes,
        noise=NoiseSpec(kind="white"),
    )


def _tiny_spatial(seed=902, M=8):
    return ConvergenceConfig(
        problem="anderson",
        mode="spatial",
        ladder=(2, 3, 4),
        h_exact_level=6,
        k_exact_level=7,
        T=0.25,
        M=M,
        seed=seed,
        schemes=("stm",),
        noise=NoiseSpec(kind="white"),
    )


def _tiny_trace(seed=903, schemes=("stm", "cnm"), M=12):
    return TraceConfig(
        problem="sine-gordon-additive",
        h=0.2,
        k=0.05,
        T=0.5,
        M=M,
        seed=seed,
        schemes=schemes,
        noise=NoiseSpec(kind="power", s=2.0),
    )


class TestConfigValidation:
    def test_reference_must_be_finer(self):
        with pytest.raises(ValueError, match="strictly finer"):
            ConvergenceConfig(
                problem="anderson", mode="spatial", ladder=(2, 6), h_exact_level=6,
                k_exact_level=7, T=1.0, M=4, seed=1,
            )

    def test_unknown_scheme(self):
        with pytest.raises(ValueError, match="unknown scheme"):
            _tiny_temporal(schemes=("rk4",))

    def test_trace_mesh_must_tile(self):
        with pytest.raises(ValueError):
            TraceConfig(problem="sine-gordon-additive", h=0.3, k=0.01, T=1.0, M=4, seed=1)

    def test_trace_rejects_multiplicative(self):
        cfg = TraceConfig(problem="anderson", h=0.1, k=0.01, T=0.5, M=4, seed=1)
        with pytest.raises(ValueError, match="multiplicative"):
            run_trace(cfg)


class TestTemporalConvergence:
    def test_errors_monotone_and_fitted(self):
        res = run_temporal_convergence(_tiny_temporal())
        errs = {}
        for resol, scheme, err, se in res.rows:
            errs[resol] = (err, se)
        ks = sorted(errs)
        vals = [errs[k][0] for k in ks]
        # finer k gives smaller error, up to twice the standard error
        for a, b in zip(vals[:-1], vals[1:]):
            assert a <= b + 2 * errs[ks[vals.index(b)]][1] + 2 * errs[ks[vals.index(a)]][1]
        assert res.footers[0]["slope"] == pytest.approx(
            fit_slope(np.log2(ks), np.log2(vals)).slope
        )

    def test_reproducible(self):
        a = run_temporal_convergence(_tiny_temporal())
        b = run_temporal_convergence(_tiny_temporal())
        assert a.rows == b.rows
        assert a.footers == b.footers

    def test_self_coupling_gives_zero_error(self):
        # the same scheme at the reference step driven by the same streams
        # reproduces the reference exactly
        from stochwave import DiscreteProblem, PathCoupling, SchemeConfig, build_mesh, integrate, white
        from stochwave.problems import sine_gordon_additive

        dp = DiscreteProblem(sine_gordon_additive(), build_mesh(8), white(7))
        coupling = PathCoupling(dp.noise, master_seed=11, finest_dt=0.05, n_fine=10, samples=(0, 1))
        cfg = SchemeConfig("stm", 0.05)
        s0 = dp.tiled_initial_state(2)
        a = integrate(dp, cfg, 10, coupling.increments(0.05), state0=s0)
        b = integrate(dp, cfg, 10, coupling.increments(0.05), state0=s0)
        assert np.array_equal(a.u1, b.u1)

    def test_blowup_marked_diverged(self):
        # forward Euler is violently unstable here (k sqrt(lam_max) >> 1);
        # on the finest rung the compounded growth overflows to non-finite
        # values and the entry is reported as diverged, not masked
        cfg = ConvergenceConfig(
            problem="sine-gordon-additive", mode="temporal", ladder=(1, 2, 3, 4, 5),
            h_exact_level=8, k_exact_level=9, T=8.0, M=4, seed=7,
            schemes=("em",), noise=NoiseSpec(kind="white"),
        )
        res = run_temporal_convergence(cfg)
        em_footer = res.footers[0]
        assert 5 in em_footer["diverged_levels"]
        nan_rows = [r for r in res.rows if np.isnan(r[2])]
        assert nan_rows
        finite = [r for r in res.rows if np.isfinite(r[2])]
        assert len(finite) == 3  # the survivors still get a fit
        assert np.isfinite(em_footer["slope"])


class TestSpatialConvergence:
    def test_shapes_and_slope(self):
        res = run_spatial_convergence(_tiny_spatial())
        assert res.columns == ("resolution", "scheme", "ms_error", "stderr")
        assert len(res.rows) == 3
        assert all(r[2] > 0 for r in res.rows)
        assert np.isfinite(res.footers[0]["slope"])
        # coarser meshes carry bigger errors
        errs = {r[0]: r[2] for r in res.rows}
        assert errs[0.25] > errs[0.125] > errs[0.0625]

    def test_reproducible(self):
        a = run_spatial_convergence(_tiny_spatial())
        b = run_spatial_convergence(_tiny_spatial())
        assert a.rows == b.rows


class TestTrace:
    def test_rows_and_target(self):
        res = run_trace(_tiny_trace())
        assert res.columns == ("time", "scheme", "mean_H", "stderr_H")
        n_steps = int(round(0.5 / 0.05))
        assert len(res.rows) == 2 * (n_steps + 1)
        target = res.footers[0]["target_slope"]
        assert target == pytest.approx(res.provenance["trace_projected"] / 2)
        for footer in res.footers:
            assert footer["target_slope"] == target
            assert np.isfinite(footer["slope"])

    def test_noise_off_conserves(self):
        # with f = 0 both the rotation and the Cayley map preserve H exactly,
        # so the noise-free drift slope vanishes
        from stochwave.problems import register_custom_problem

        register_custom_problem(
            {
                "name": "linear-wave-kicked",
                "f": "0",
                "g": "1",
                "V": "0",
                "u0": "sin(pi*x)",
                "u0_prime": "pi*cos(pi*x)",
                "v0": "sin(2*pi*x)",
            }
        )
        cfg = TraceConfig(
            problem="linear-wave-kicked", h=0.2, k=0.05, T=0.5, M=2, seed=3,
            schemes=("stm", "cnm"), noise=NoiseSpec(kind="off"),
        )
        res = run_trace(cfg)
        h0 = res.rows[0][2]
        assert h0 > 0.1  # nonzero initial energy makes the check meaningful
        for footer in res.footers:
            assert abs(footer["slope"]) < 1e-10 * h0
            assert footer["target_slope"] == 0.0

    def test_schemes_share_increments(self):
        # with equal seeds, a scheme's series is identical whether or not
        # other schemes run alongside it
        a = run_trace(_tiny_trace(schemes=("stm",)))
        b = run_trace(_tiny_trace(schemes=("stm", "cnm")))
        stm_a = [r for r in a.rows if r[1] == "STM"]
        stm_b = [r for r in b.rows if r[1] == "STM"]
        assert stm_a == stm_b


class TestWorkerEquivalence:
    def test_pool_matches_serial(self, monkeypatch):
        serial = run_trace(_tiny_trace())
        monkeypatch.setenv("STOCHWAVE_WORKERS", "2")
        pooled = run_trace(_tiny_trace())
        for ra, rb in zip(serial.rows, pooled.rows):
            assert ra[:2] == rb[:2]
            assert ra[2] == pytest.approx(rb[2], abs=1e-12)
            assert ra[3] == pytest.approx(rb[3], abs=1e-12)

    def test_sample_splitting_identity(self, monkeypatch):
        # merging two half batches equals one full batch: per-sample noise
        # depends only on the global sample index
        full = run_temporal_convergence(_tiny_temporal())
        monkeypatch.setenv("STOCHWAVE_WORKERS", "2")
        halves = run_temporal_convergence(_tiny_temporal())
        for ra, rb in zip(full.rows, halves.rows):
            assert ra[2] == pytest.approx(rb[2], abs=1e-12)
