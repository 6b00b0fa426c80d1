import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from softmps.model import (
    ChainCoefficients,
    LogChainInputs,
    SbmParams,
    impurity_coupling,
    linear_chain_coefficients,
    log_chain_coefficients,
    q_lattice_log_provider,
    spectral_density,
)

# Frozen reference values.  The chain coefficients were recomputed with a
# 60-digit Stieltjes orthogonalization of the measure x**s dx on [0, 1]
# (linear scheme) and a 60-digit Lanczos tridiagonalization of the discrete
# geometric-lattice measure (log scheme); both routes are independent of the
# closed forms implemented in the module.
LINEAR_OMEGA_S02 = [0.5454545454545454, 0.5021645021645021, 0.500768049155146, 0.5003933910306845]
LINEAR_T_S02 = [0.27835110713445205, 0.256818748395241, 0.25305307759765683]
LINEAR_OMEGA_S037 = [0.5780590717299579, 0.5066091204897218, 0.5024589663360504, 0.501283833081068]
LINEAR_T_S037 = [0.26902769281558864, 0.2549733625564503, 0.2522846554349149]

LOG_OMEGA_S02_LAM2 = [
    0.5454545454545454, 0.39237903760218173, 0.2569293559046964, 0.14959062381593427,
    0.08113014861771123, 0.04230866485034323, 0.02161237647454761,
]
LOG_T_S02_LAM2 = [
    0.25363499245782173, 0.16613229242595562, 0.10024089351372163,
    0.055670734665257376, 0.02942091226761745, 0.015134987148628735,
]
LOG_OMEGA_S05_LAM15 = [
    0.6, 0.4621055895152508, 0.3841475775302667, 0.3033681374151851,
    0.22874249071577435, 0.1663635618491978, 0.1178167103687442,
]
LOG_T_S05_LAM15 = [
    0.2510618490004956, 0.21170538696914187, 0.17147723929587566,
    0.1320612291459416, 0.09760511683586368, 0.0699356355812161,
]


class TestSbmParams:
    def test_accepts_subohmic_range(self):
        p = SbmParams(s=0.5, alpha=0.1, delta=0.2, omega_c=2.0)
        assert (p.s, p.alpha, p.delta, p.omega_c) == (0.5, 0.1, 0.2, 2.0)

    @pytest.mark.parametrize("s", [0.0, 1.0, -0.1, 1.5])
    def test_rejects_bad_exponent(self, s):
        with pytest.raises(ValueError, match="bath exponent"):
            SbmParams(s=s, alpha=0.1, delta=0.1)

    def test_rejects_negative_coupling(self):
        with pytest.raises(ValueError, match="alpha"):
            SbmParams(s=0.5, alpha=-1e-9, delta=0.1)

    @pytest.mark.parametrize("delta", [0.0, -0.5])
    def test_rejects_nonpositive_tunneling(self, delta):
        with pytest.raises(ValueError, match="delta"):
            SbmParams(s=0.5, alpha=0.1, delta=delta)

    def test_rejects_nonpositive_cutoff(self):
        with pytest.raises(ValueError, match="omega_c"):
            SbmParams(s=0.5, alpha=0.1, delta=0.1, omega_c=0.0)


class TestSpectralDensity:
    def test_power_law_value(self):
        p = SbmParams(s=0.2, alpha=0.0175, delta=0.1)
        assert spectral_density(p, 0.5) == pytest.approx(0.0957220338980346, rel=1e-15)

    def test_prefactor_at_unit_frequency(self):
        # J -> 2 pi alpha omega_c as omega -> omega_c from below
        p = SbmParams(s=0.2, alpha=0.0175, delta=0.1)
        assert spectral_density(p, 1.0 - 1e-13) == pytest.approx(
            0.10995574287564278, rel=1e-12
        )

    def test_cutoff_is_exclusive(self):
        p = SbmParams(s=0.2, alpha=0.0175, delta=0.1)
        assert spectral_density(p, 1.0) == 0.0
        assert spectral_density(p, 1.7) == 0.0
        assert spectral_density(p, 0.0) == 0.0

    def test_rejects_negative_frequency(self):
        p = SbmParams(s=0.2, alpha=0.0175, delta=0.1)
        with pytest.raises(ValueError, match="omega"):
            spectral_density(p, -0.1)

    def test_cutoff_scaling(self):
        # J(omega; omega_c) = omega_c * J(omega / omega_c; 1)
        p1 = SbmParams(s=0.3, alpha=0.08, delta=0.1, omega_c=1.0)
        p2 = SbmParams(s=0.3, alpha=0.08, delta=0.1, omega_c=2.5)
        assert spectral_density(p2, 2.5 * 0.4) == pytest.approx(
            2.5 * spectral_density(p1, 0.4), rel=1e-14
        )


class TestImpurityCoupling:
    def test_frozen_values(self):
        assert impurity_coupling(
            SbmParams(s=0.2, alpha=0.0175, delta=0.1)
        ) == pytest.approx(0.08539125638299666, rel=1e-15)
        assert impurity_coupling(
            SbmParams(s=0.2, alpha=0.05, delta=0.1)
        ) == pytest.approx(0.14433756729740646, rel=1e-15)

    def test_total_weight_identity(self):
        # c0^2 equals the integral of J over (0, omega_c) divided by 4 pi
        from scipy.integrate import quad

        p = SbmParams(s=0.63, alpha=0.11, delta=0.1, omega_c=1.8)
        integral, err = quad(lambda w: spectral_density(p, w), 0.0, p.omega_c)
        assert err < 1e-9
        assert impurity_coupling(p) ** 2 == pytest.approx(
            integral / (4 * math.pi), rel=1e-8
        )


class TestLinearChain:
    def test_frozen_coefficients_s02(self):
        chain = linear_chain_coefficients(SbmParams(s=0.2, alpha=0.05, delta=0.1), 4)
        assert chain.omega == pytest.approx(LINEAR_OMEGA_S02, rel=1e-13)
        assert chain.t == pytest.approx(LINEAR_T_S02, rel=1e-13)
        assert chain.c0 == pytest.approx(0.14433756729740646, rel=1e-15)
        assert chain.scheme == "linear"
        assert chain.lam is None

    def test_frozen_coefficients_s037(self):
        chain = linear_chain_coefficients(SbmParams(s=0.37, alpha=0.05, delta=0.1), 4)
        assert chain.omega == pytest.approx(LINEAR_OMEGA_S037, rel=1e-13)
        assert chain.t == pytest.approx(LINEAR_T_S037, rel=1e-13)

    def test_cutoff_covariance(self):
        p1 = SbmParams(s=0.44, alpha=0.07, delta=0.1, omega_c=1.0)
        p2 = SbmParams(s=0.44, alpha=0.07, delta=0.1, omega_c=3.0)
        c1 = linear_chain_coefficients(p1, 6)
        c2 = linear_chain_coefficients(p2, 6)
        assert c2.omega == pytest.approx(3.0 * c1.omega, rel=1e-14)
        assert c2.t == pytest.approx(3.0 * c1.t, rel=1e-14)
        assert c2.c0 == pytest.approx(3.0 * c1.c0, rel=1e-14)

    @settings(deadline=None, max_examples=25)
    @given(s=st.floats(0.01, 0.99))
    def test_bulk_limits(self, s):
        chain = linear_chain_coefficients(SbmParams(s=s, alpha=0.05, delta=0.1), 400)
        # site energies decrease strictly toward omega_c / 2
        assert np.all(np.diff(chain.omega) < 0)
        assert np.all(chain.omega > 0.5)
        assert chain.omega[-1] == pytest.approx(0.5, abs=1e-5)
        # hops approach omega_c / 4 (from above for small s, below for large)
        assert np.all(chain.t > 0)
        assert np.all(chain.t < 0.3)
        assert chain.t[-1] == pytest.approx(0.25, abs=1e-5)

    def test_rejects_empty_chain(self):
        with pytest.raises(ValueError, match="at least one"):
            linear_chain_coefficients(SbmParams(s=0.2, alpha=0.05, delta=0.1), 0)

    def test_single_site_has_no_hops(self):
        chain = linear_chain_coefficients(SbmParams(s=0.2, alpha=0.05, delta=0.1), 1)
        assert chain.n_sites == 1
        assert chain.t.shape == (0,)


class TestChainCoefficientsValidation:
    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="length"):
            ChainCoefficients(c0=0.1, omega=np.ones(3), t=np.ones(3))

    def test_linear_scheme_rejects_nonpositive_energies(self):
        with pytest.raises(ValueError, match="positive"):
            ChainCoefficients(c0=0.1, omega=np.array([0.5, 0.0]), t=np.array([0.2]))

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError, match="finite"):
            ChainCoefficients(c0=0.1, omega=np.array([0.5, np.inf]), t=np.array([0.2]))

    def test_unknown_scheme(self):
        with pytest.raises(ValueError, match="scheme"):
            ChainCoefficients(c0=0.1, omega=np.ones(2), t=np.ones(1), scheme="fourier")

    def test_arrays_are_locked(self):
        chain = linear_chain_coefficients(SbmParams(s=0.2, alpha=0.05, delta=0.1), 3)
        with pytest.raises(ValueError):
            chain.omega[0] = 7.0


class TestLogChain:
    def test_frozen_coefficients_s02_lam2(self):
        chain = log_chain_coefficients(SbmParams(s=0.2, alpha=0.05, delta=0.1), 7, 2.0)
        assert chain.omega == pytest.approx(LOG_OMEGA_S02_LAM2, rel=1e-12)
        assert chain.t == pytest.approx(LOG_T_S02_LAM2, rel=1e-12)
        assert chain.scheme == "log"
        assert chain.lam == 2.0

    def test_frozen_coefficients_s05_lam15(self):
        chain = log_chain_coefficients(SbmParams(s=0.5, alpha=0.05, delta=0.1), 7, 1.5)
        assert chain.omega == pytest.approx(LOG_OMEGA_S05_LAM15, rel=1e-12)
        assert chain.t == pytest.approx(LOG_T_S05_LAM15, rel=1e-12)

    def test_first_energy_is_first_moment(self):
        # both discretizations share the first moment (s+1)/(s+2) * omega_c
        for s in (0.2, 0.5, 0.8):
            p = SbmParams(s=s, alpha=0.05, delta=0.1)
            lin = linear_chain_coefficients(p, 1)
            log = log_chain_coefficients(p, 1, 2.0)
            expected = (s + 1.0) / (s + 2.0)
            assert lin.omega[0] == pytest.approx(expected, rel=1e-14)
            assert log.omega[0] == pytest.approx(expected, rel=1e-14)

    def test_same_impurity_coupling_as_linear(self):
        p = SbmParams(s=0.3, alpha=0.08, delta=0.1)
        assert log_chain_coefficients(p, 5, 2.0).c0 == linear_chain_coefficients(p, 5).c0

    def test_hoppings_positive_energies_decay(self):
        chain = log_chain_coefficients(SbmParams(s=0.4, alpha=0.05, delta=0.1), 30, 2.0)
        assert np.all(chain.t > 0)
        assert np.all(chain.omega > 0)
        # site energies fall geometrically with ratio 1/lam far down the chain
        ratio = chain.omega[-1] / chain.omega[-2]
        assert ratio == pytest.approx(0.5, abs=0.01)

    def test_rejects_lam_at_or_below_one(self):
        p = SbmParams(s=0.2, alpha=0.05, delta=0.1)
        with pytest.raises(ValueError, match="lam"):
            log_chain_coefficients(p, 4, 1.0)
        with pytest.raises(ValueError, match="lam"):
            q_lattice_log_provider(p, 0.5, 4)

    def test_provider_contract_enforced(self):
        # a provider that returns too little recurrence data is rejected
        def short_provider(params, lam, n_max):
            return q_lattice_log_provider(params, lam, max(n_max - 2, 0))

        p = SbmParams(s=0.2, alpha=0.05, delta=0.1)
        with pytest.raises(ValueError, match="recurrence data"):
            log_chain_coefficients(p, 6, 2.0, provider=short_provider)

    def test_assembly_against_disguised_linear_provider(self):
        # Feed the assembly a provider built from the linear-chain closed
        # forms with alternating-sign norms; the assembled chain must then
        # reproduce the linear chain exactly, validating the omega/t assembly
        # independently of the q-lattice forms.
        p = SbmParams(s=0.31, alpha=0.05, delta=0.1)
        n_sites = 6
        lin = linear_chain_coefficients(p, n_sites + 2)

        def disguised(params, lam, n_max):
            a = lin.t[: n_max + 1]
            c = lin.omega[: n_max + 1] - a
            norms = (-1.0) ** np.arange(n_max + 1)
            return LogChainInputs(scale=1.0, recur_a=a, recur_c=c, norms=norms)

        chain = log_chain_coefficients(p, n_sites, 2.0, provider=disguised)
        assert chain.omega == pytest.approx(lin.omega[:n_sites], rel=1e-15)
        assert chain.t == pytest.approx(lin.t[: n_sites - 1], rel=1e-15)


class TestLogChainInputs:
    def test_shape_validation(self):
        with pytest.raises(ValueError, match="equal length"):
            LogChainInputs(
                scale=1.0, recur_a=np.ones(3), recur_c=np.ones(2), norms=np.ones(3)
            )

    def test_n_max(self):
        inputs = q_lattice_log_provider(SbmParams(s=0.2, alpha=0.05, delta=0.1), 2.0, 5)
        assert inputs.n_max == 5
