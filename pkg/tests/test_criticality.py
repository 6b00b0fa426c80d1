import math

import numpy as np
import pytest

from softmps.criticality import (
    BracketError,
    DetectionResult,
    SweepPoint,
    SweepResult,
    bisect_threshold,
    build_chain,
    detect_alpha_c,
    extrapolate_alpha_c,
    fit_critical_exponent,
    polaron_alpha_c,
    sweep_alpha,
)
from softmps.energy import EnergyBreakdown
from softmps.model import (
    LOGARITHMIC,
    SbmParams,
    linear_chain_coefficients,
    log_chain_coefficients,
)
from softmps.observables import ObservableSet
from softmps.optimize import AllRestartsFailedError, OptimizerOptions

POLARON_TABLE = {
    0.1: 0.006544029707314416,
    0.2: 0.016769471731107512,
    0.3: 0.03158897716715105,
    0.4: 0.051881952341963175,
    0.5: 0.07839285959668267,
}


def synthetic_observables(m):
    return ObservableSet(
        magnetization=m,
        coherence=0.0,
        spin_entropy=0.0,
        occupations=np.zeros(1),
        site_entropies=np.zeros(1),
        energy=EnergyBreakdown(e_loc=0.0, e_int=0.0, e_chain=0.0, total=0.0, norm=1.0),
    )


class TestPolaronBenchmark:
    def test_frozen_values(self):
        for s, want in POLARON_TABLE.items():
            assert polaron_alpha_c(s, 0.1) == pytest.approx(want, rel=1e-14)

    def test_depends_on_ratio_only(self):
        assert polaron_alpha_c(0.3, 0.2, 2.0) == pytest.approx(
            polaron_alpha_c(0.3, 0.1, 1.0), rel=1e-14
        )

    def test_validation(self):
        with pytest.raises(ValueError, match="s must"):
            polaron_alpha_c(0.0, 0.1)
        with pytest.raises(ValueError, match="s must"):
            polaron_alpha_c(1.0, 0.1)
        with pytest.raises(ValueError, match="> 0"):
            polaron_alpha_c(0.3, 0.0)


class TestBuildChain:
    def test_linear_dispatch(self):
        params = SbmParams(s=0.3, alpha=0.05, delta=0.1)
        got = build_chain(params, 4)
        want = linear_chain_coefficients(params, 4)
        assert np.array_equal(got.omega, want.omega)
        assert np.array_equal(got.t, want.t)

    def test_log_dispatch(self):
        params = SbmParams(s=0.3, alpha=0.05, delta=0.1)
        got = build_chain(params, 4, scheme=LOGARITHMIC, lam=2.0)
        want = log_chain_coefficients(params, 4, 2.0)
        assert np.array_equal(got.omega, want.omega)

    def test_log_needs_lam(self):
        params = SbmParams(s=0.3, alpha=0.05, delta=0.1)
        with pytest.raises(ValueError, match="lam"):
            build_chain(params, 4, scheme=LOGARITHMIC)

    def test_unknown_scheme(self):
        params = SbmParams(s=0.3, alpha=0.05, delta=0.1)
        with pytest.raises(ValueError, match="scheme"):
            build_chain(params, 4, scheme="chebyshev")


def step_curve(crossing):
    def fn(alpha):
        if alpha <= crossing:
            return 0.0
        return math.sqrt(alpha - crossing)

    return fn


class TestBisectThreshold:
    def test_locates_crossing(self):
        fn = step_curve(0.07)
        # threshold 0.01 is crossed at 0.07 + 0.0001
        root, probes = bisect_threshold(fn, 0.01, 0.2, 0.01, 1e-6)
        assert root == pytest.approx(0.0701, abs=2e-6)
        assert probes[0][0] == 0.01
        assert probes[1][0] == 0.2
        assert all(value == fn(point) for point, value in probes)

    def test_probe_count_is_logarithmic(self):
        _, probes = bisect_threshold(step_curve(0.07), 0.01, 0.2, 0.01, 1e-4)
        # 2 endpoint probes plus ceil(log2(0.19 / 1e-4)) midpoints
        assert len(probes) == 2 + math.ceil(math.log2(0.19 / 1e-4))

    def test_bracket_errors(self):
        with pytest.raises(BracketError, match="already exceeds"):
            bisect_threshold(step_curve(0.0), 0.05, 0.2, 0.01, 1e-4)
        with pytest.raises(BracketError, match="does not exceed"):
            bisect_threshold(step_curve(0.5), 0.01, 0.2, 0.01, 1e-4)

    def test_input_validation(self):
        with pytest.raises(ValueError, match="lo < hi"):
            bisect_threshold(step_curve(0.07), 0.2, 0.1, 0.01, 1e-4)
        with pytest.raises(ValueError, match="tolerance"):
            bisect_threshold(step_curve(0.07), 0.1, 0.2, 0.01, 0.0)


class TestDetectAlphaC:
    def test_synthetic_curve(self):
        params = SbmParams(s=0.2, alpha=0.0, delta=0.1)
        result = detect_alpha_c(
            params,
            n_sites=10,
            chi=2,
            bracket=(0.01, 0.2),
            alpha_tolerance=1e-5,
            magnetization_fn=step_curve(0.0519),
        )
        assert isinstance(result, DetectionResult)
        assert result.alpha_c == pytest.approx(0.0519 + 1e-4, abs=2e-5)
        assert result.bracket == (0.01, 0.2)
        assert result.n_solves == len(result.probes)

    def test_negative_bracket_rejected(self):
        params = SbmParams(s=0.2, alpha=0.0, delta=0.1)
        with pytest.raises(ValueError, match="non-negative"):
            detect_alpha_c(
                params, n_sites=4, chi=1, bracket=(-0.1, 0.2),
                magnetization_fn=step_curve(0.05),
            )

    def test_real_solver_small_system(self):
        # N = 2 sits far from the thermodynamic transition; the crossing is
        # whatever it is, but it must be found reproducibly inside a wide
        # bracket
        params = SbmParams(s=0.2, alpha=0.0, delta=0.1)
        options = OptimizerOptions(seed=21, restarts=2)
        result = detect_alpha_c(
            params,
            n_sites=2,
            chi=1,
            bracket=(0.01, 0.8),
            options=options,
            alpha_tolerance=5e-3,
        )
        repeat = detect_alpha_c(
            params,
            n_sites=2,
            chi=1,
            bracket=(0.01, 0.8),
            options=options,
            alpha_tolerance=5e-3,
        )
        assert 0.01 < result.alpha_c < 0.8
        assert result.alpha_c == repeat.alpha_c


class TestExtrapolation:
    def test_exact_recovery(self):
        a, b = 0.0218, 8.5
        pts = [(n, a * math.exp(b / n)) for n in (6, 8, 10, 14, 20)]
        fit = extrapolate_alpha_c(pts)
        assert fit.parameters["a"] == pytest.approx(a, rel=1e-12)
        assert fit.parameters["b"] == pytest.approx(b, rel=1e-12)
        assert fit.residual < 1e-24
        assert fit.n_points == 5

    def test_noisy_recovery_within_errorbars(self, rng):
        a, b = 0.0218, 8.5
        lengths = (6, 8, 10, 14, 20, 30)
        hits = 0
        for _ in range(50):
            pts = [
                (n, a * math.exp(b / n) * math.exp(rng.normal(0.0, 0.01)))
                for n in lengths
            ]
            fit = extrapolate_alpha_c(pts)
            if abs(fit.parameters["a"] - a) <= 3 * fit.stderr["a"]:
                hits += 1
        assert hits >= 45

    def test_validation(self):
        with pytest.raises(ValueError, match="at least 3"):
            extrapolate_alpha_c([(6, 0.1), (8, 0.08)])
        with pytest.raises(ValueError, match="distinct"):
            extrapolate_alpha_c([(6, 0.1), (6, 0.09), (8, 0.08)])
        with pytest.raises(ValueError, match=">= 1"):
            extrapolate_alpha_c([(0, 0.1), (8, 0.09), (10, 0.08)])
        with pytest.raises(ValueError, match="> 0"):
            extrapolate_alpha_c([(6, 0.1), (8, -0.09), (10, 0.08)])


class TestExponentFit:
    def test_exact_recovery(self):
        alpha_c, beta, prefactor = 0.05, 0.5, 1.3
        alphas = np.linspace(0.0505, 0.065, 12)
        pairs = [
            (a, prefactor * ((a - alpha_c) / alpha_c) ** beta) for a in alphas
        ]
        fit = fit_critical_exponent(pairs, alpha_c)
        assert fit.parameters["exponent"] == pytest.approx(beta, rel=1e-12)
        assert fit.parameters["prefactor"] == pytest.approx(prefactor, rel=1e-12)
        assert fit.stderr["exponent"] == pytest.approx(0.0, abs=1e-10)

    def test_window_filters_points(self):
        alpha_c = 0.05
        inside = [(alpha_c * (1 + r), r**0.5) for r in (0.02, 0.05, 0.1, 0.2)]
        outside = [
            (alpha_c * 1.001, 0.001),  # reduced coupling below the window
            (alpha_c * 2.0, 1.0),      # above the window
            (alpha_c * 1.15, 0.0),     # zero magnetization is unusable
            (alpha_c * 0.5, 0.3),      # below the transition entirely
        ]
        fit = fit_critical_exponent(inside + outside, alpha_c)
        assert fit.n_points == 4
        assert fit.parameters["exponent"] == pytest.approx(0.5, rel=1e-12)

    def test_sweep_result_input(self):
        alpha_c = 0.05
        points = tuple(
            SweepPoint(
                alpha=alpha_c * (1 + r),
                ground=None,
                observables=synthetic_observables(2.0 * r**0.25),
                error=None,
            )
            for r in (0.02, 0.05, 0.1, 0.2)
        )
        sweep = SweepResult(points=points, provenance={})
        fit = fit_critical_exponent(sweep, alpha_c)
        assert fit.parameters["exponent"] == pytest.approx(0.25, rel=1e-12)

    def test_failed_points_are_skipped(self):
        alpha_c = 0.05
        good = [
            SweepPoint(
                alpha=alpha_c * (1 + r),
                ground=None,
                observables=synthetic_observables(r**0.5),
                error=None,
            )
            for r in (0.05, 0.1, 0.2)
        ]
        bad = SweepPoint(
            alpha=alpha_c * 1.15, ground=None, observables=None, error="boom"
        )
        sweep = SweepResult(
            points=tuple(sorted(good + [bad], key=lambda p: p.alpha)),
            provenance={},
        )
        fit = fit_critical_exponent(sweep, alpha_c)
        assert fit.n_points == 3

    def test_validation(self):
        pairs = [(0.06, 0.3), (0.07, 0.4), (0.08, 0.5)]
        with pytest.raises(ValueError, match="alpha_c"):
            fit_critical_exponent(pairs, 0.0)
        with pytest.raises(ValueError, match="window"):
            fit_critical_exponent(pairs, 0.05, window=(0.3, 0.1))
        with pytest.raises(ValueError, match="usable points"):
            fit_critical_exponent(pairs[:2], 0.05)


class TestSweep:
    def test_small_real_sweep(self):
        params = SbmParams(s=0.2, alpha=0.0, delta=0.1)
        options = OptimizerOptions(seed=17, restarts=1)
        sweep = sweep_alpha(
            params, [0.02, 0.05], n_sites=2, chi=1, options=options
        )
        assert len(sweep.points) == 2
        for point in sweep.points:
            assert point.error is None
            assert point.ground is not None
            assert point.observables is not None
            assert point.ground.converged
        energies = [p.ground.energy.total for p in sweep.points]
        # stronger coupling binds deeper
        assert energies[1] < energies[0]
        assert sweep.provenance["n_sites"] == 2
        assert sweep.provenance["chi"] == 1
        assert sweep.provenance["seed"] == 17
        assert sweep.provenance["scheme"] == "linear"
        assert sweep.provenance["warm"] is True

    def test_grid_validation(self):
        params = SbmParams(s=0.2, alpha=0.0, delta=0.1)
        with pytest.raises(ValueError, match="strictly increasing"):
            sweep_alpha(params, [0.05, 0.02], n_sites=2, chi=1)
        with pytest.raises(ValueError, match=">= 0"):
            sweep_alpha(params, [-0.01, 0.02], n_sites=2, chi=1)

    def test_failed_point_recorded_and_sweep_continues(self, monkeypatch):
        import softmps.criticality as crit

        real = crit.ground_state

        def sometimes_fail(point_params, chain, chi, options, *, field):
            if abs(point_params.alpha - 0.05) < 1e-12:
                raise AllRestartsFailedError(
                    [{"status": "line_search", "fun": math.inf}]
                )
            return real(point_params, chain, chi, options, field=field)

        monkeypatch.setattr(crit, "ground_state", sometimes_fail)
        params = SbmParams(s=0.2, alpha=0.0, delta=0.1)
        sweep = sweep_alpha(
            params,
            [0.02, 0.05, 0.08],
            n_sites=2,
            chi=1,
            options=OptimizerOptions(seed=5, restarts=1),
        )
        assert [p.error is None for p in sweep.points] == [True, False, True]
        failed = sweep.points[1]
        assert failed.ground is None
        assert failed.observables is None
        assert "AllRestartsFailedError" in failed.error

    def test_points_must_increase(self):
        point = SweepPoint(alpha=0.1, ground=None, observables=None, error="x")
        with pytest.raises(ValueError, match="strictly increasing"):
            SweepResult(points=(point, point), provenance={})
