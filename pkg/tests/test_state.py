import math

import numpy as np
import pytest

from conftest import random_bounded_state
from softmps.state import (
    COMPLEX,
    DISPLACEMENT,
    HOP_LEFT,
    HOP_RIGHT,
    OCCUPATION,
    REAL,
    MpsState,
    NormUnderflowError,
    ScaleOverflowError,
    SiteInsertion,
    StateFormatError,
    SPIN_SIGMA_X,
    SPIN_SIGMA_Z,
    Transfers,
    coefficient,
    fock_pair,
    matrix_element,
    norm_sq,
    scaled_powers,
    site_transfer,
    spin_transfer,
    transfer_product,
)


def scalar_state(a, b, xs):
    """chi = 1 state with spin entries a, b and one mode entry per element of xs."""
    return MpsState(
        spin=np.array([[[a]], [[b]]], dtype=float),
        modes=np.array([[[x]] for x in xs], dtype=float),
    )


class TestMpsState:
    def test_shape_and_properties(self, rng):
        state = MpsState.random(3, 5, 0.2, rng)
        assert state.chi == 3
        assert state.n_sites == 5
        assert state.spin.shape == (2, 3, 3)
        assert state.modes.shape == (5, 3, 3)
        assert state.field == REAL

    def test_arrays_are_locked(self, rng):
        state = MpsState.random(2, 2, 0.2, rng)
        with pytest.raises(ValueError):
            state.spin[0, 0, 0] = 1.0
        with pytest.raises(ValueError):
            state.modes[0, 0, 0] = 1.0

    def test_rejects_bad_shapes(self):
        with pytest.raises(ValueError, match="spin"):
            MpsState(spin=np.ones((3, 2, 2)), modes=np.ones((1, 2, 2)))
        with pytest.raises(ValueError, match="modes"):
            MpsState(spin=np.ones((2, 2, 2)), modes=np.ones((1, 3, 3)))
        with pytest.raises(ValueError, match="modes"):
            MpsState(spin=np.ones((2, 2, 2)), modes=np.ones((0, 2, 2)))

    def test_rejects_nonfinite_and_zero_spin(self):
        with pytest.raises(ValueError, match="finite"):
            MpsState(spin=np.full((2, 1, 1), np.nan), modes=np.ones((1, 1, 1)))
        with pytest.raises(ValueError, match="nonzero"):
            MpsState(spin=np.zeros((2, 1, 1)), modes=np.ones((1, 1, 1)))

    def test_rejects_unknown_field(self):
        with pytest.raises(ValueError, match="field"):
            MpsState(spin=np.ones((2, 1, 1)), modes=np.ones((1, 1, 1)), field="rational")

    def test_complex_random_has_both_parts(self, rng):
        state = MpsState.random(2, 3, 0.2, rng, field=COMPLEX)
        assert state.spin.dtype == np.complex128
        assert np.any(state.spin.imag != 0)
        assert np.any(state.modes.imag != 0)


class TestSerialization:
    def test_real_round_trip(self, rng):
        state = MpsState.random(2, 3, 0.3, rng)
        copy = MpsState.from_document(state.to_document())
        assert np.array_equal(copy.spin, state.spin)
        assert np.array_equal(copy.modes, state.modes)
        assert copy.field == state.field

    def test_complex_round_trip(self, rng):
        state = MpsState.random(2, 2, 0.3, rng, field=COMPLEX)
        copy = MpsState.from_document(state.to_document())
        assert np.array_equal(copy.spin, state.spin)
        assert np.array_equal(copy.modes, state.modes)

    def test_document_is_json_serializable(self, rng):
        import json

        state = MpsState.random(2, 2, 0.3, rng, field=COMPLEX)
        text = json.dumps(state.to_document())
        copy = MpsState.from_document(json.loads(text))
        assert np.array_equal(copy.modes, state.modes)

    def test_rejects_unknown_version(self, rng):
        doc = MpsState.random(1, 1, 0.3, rng).to_document()
        doc["version"] = 99
        with pytest.raises(StateFormatError, match="version"):
            MpsState.from_document(doc)

    def test_rejects_dimension_mismatch(self, rng):
        doc = MpsState.random(2, 2, 0.3, rng).to_document()
        doc["chi"] = 3
        with pytest.raises(StateFormatError, match="dimensions"):
            MpsState.from_document(doc)

    def test_rejects_non_mapping(self):
        with pytest.raises(StateFormatError):
            MpsState.from_document([1, 2, 3])


class TestTransferScalars:
    """chi = 1 values reduce to elementary functions; all hand-checkable."""

    def test_site_transfer_value(self):
        state = scalar_state(1.0, 0.0, [0.3])
        assert site_transfer(state, 1)[0, 0] == pytest.approx(
            1.0941742837052104, rel=1e-15
        )

    def test_norm_value(self):
        state = scalar_state(0.8, 0.6, [0.3])
        assert norm_sq(state) == pytest.approx(1.0941742837052104, rel=1e-14)

    def test_occupation_insertion(self):
        state = scalar_state(1.0, 0.0, [0.3])
        value = matrix_element(state, insertions={1: OCCUPATION})
        assert value == pytest.approx(0.09847568553346893, rel=1e-14)

    def test_displacement_insertion(self):
        state = scalar_state(1.0, 0.0, [0.3])
        value = matrix_element(state, insertions={1: DISPLACEMENT})
        assert value == pytest.approx(0.6565045702231262, rel=1e-14)

    def test_hop_insertion(self):
        state = scalar_state(1.0, 0.0, [0.3, 0.5])
        # conj(x2) * x1 * exp(x1^2 + x2^2) = 0.15 e^0.34, same for both hops
        assert matrix_element(state, insertions={1: HOP_LEFT}) == pytest.approx(
            0.21074213858453905, rel=1e-14
        )
        assert matrix_element(state, insertions={1: HOP_RIGHT}) == pytest.approx(
            0.21074213858453905, rel=1e-14
        )

    def test_spin_weights(self):
        state = scalar_state(0.8, 0.6, [0.3])
        e = 1.0941742837052104
        assert matrix_element(state, SPIN_SIGMA_X) == pytest.approx(
            2 * 0.8 * 0.6 * e, rel=1e-14
        )
        assert matrix_element(state, SPIN_SIGMA_Z) == pytest.approx(
            (0.8**2 - 0.6**2) * e, rel=1e-14
        )

    def test_coefficient_values(self):
        state = scalar_state(0.8, 0.6, [0.3])
        assert coefficient(state, 0, [2]) == pytest.approx(
            0.050911688245431415, rel=1e-15
        )
        assert coefficient(state, 1, [0]) == pytest.approx(0.6, rel=1e-15)

    def test_fock_pair_replaces_factor(self):
        state = scalar_state(1.0, 0.0, [0.3])
        # <2| and |2> amplitudes without the transfer exponential
        value = matrix_element(state, insertions={1: fock_pair(2, 2)})
        assert value == pytest.approx((0.09 / math.sqrt(2)) ** 2, rel=1e-14)


class TestTransferProducts:
    def test_empty_range_is_identity(self, rng):
        state = MpsState.random(2, 3, 0.3, rng)
        assert np.array_equal(transfer_product(state, 3, 2), np.eye(4))

    def test_full_product_matches_factor_chain(self, rng):
        state = random_bounded_state(rng, 2, 4)
        expected = np.eye(4)
        for m in range(1, 5):
            expected = expected @ site_transfer(state, m)
        assert transfer_product(state, 1, 4) == pytest.approx(expected, rel=1e-14)

    def test_range_validation(self, rng):
        state = MpsState.random(2, 3, 0.3, rng)
        with pytest.raises(ValueError, match="start"):
            transfer_product(state, 0, 2)
        with pytest.raises(ValueError, match="end"):
            transfer_product(state, 1, 4)

    def test_site_validation(self, rng):
        state = MpsState.random(2, 3, 0.3, rng)
        with pytest.raises(ValueError, match="site"):
            site_transfer(state, 4)

    def test_spin_transfer_weights_shape(self, rng):
        state = MpsState.random(2, 2, 0.3, rng)
        with pytest.raises(ValueError, match="2x2"):
            spin_transfer(state, np.eye(3))

    def test_overflow_names_site(self):
        state = scalar_state(1.0, 0.0, [0.1, 30.0, 0.1])
        with pytest.raises(ScaleOverflowError) as info:
            transfer_product(state, 1, 3)
        assert info.value.site == 2

    def test_norm_underflow(self):
        state = scalar_state(1e-160, 0.0, [0.1])
        with pytest.raises(NormUnderflowError):
            norm_sq(state)


class TestScaling:
    def test_spin_scaling_is_quadratic(self, rng):
        state = random_bounded_state(rng, 2, 3)
        scaled = MpsState(spin=2.5 * state.spin, modes=state.modes)
        assert norm_sq(scaled) == pytest.approx(2.5**2 * norm_sq(state), rel=1e-13)

    def test_complex_spin_phase_invariance(self, rng):
        state = random_bounded_state(rng, 2, 2, field=COMPLEX)
        rotated = MpsState(
            spin=np.exp(0.7j) * state.spin, modes=state.modes, field=COMPLEX
        )
        assert norm_sq(rotated) == pytest.approx(norm_sq(state), rel=1e-13)
        assert matrix_element(rotated, SPIN_SIGMA_X) == pytest.approx(
            matrix_element(state, SPIN_SIGMA_X), rel=1e-12
        )


class TestCoefficients:
    def test_against_brute_force_sum(self, rng):
        # the squared norm equals the sum of squared amplitudes over all
        # occupation tuples (converged well below cutoff 25 for small X)
        state = random_bounded_state(rng, 2, 2, spectral_cap=0.4)
        total = 0.0
        for k in (0, 1):
            for i in range(25):
                for j in range(25):
                    total += abs(coefficient(state, k, [i, j])) ** 2
        assert norm_sq(state) == pytest.approx(total, rel=1e-10)

    def test_matches_fock_pair_diagonal(self, rng):
        state = random_bounded_state(rng, 2, 1)
        amp_sq = sum(
            abs(coefficient(state, k, [3])) ** 2 for k in (0, 1)
        )
        value = matrix_element(state, insertions={1: fock_pair(3, 3)})
        assert value == pytest.approx(amp_sq, rel=1e-12)

    def test_validation(self, rng):
        state = MpsState.random(2, 2, 0.3, rng)
        with pytest.raises(ValueError, match="spin_index"):
            coefficient(state, 2, [0, 0])
        with pytest.raises(ValueError, match="one occupation per site"):
            coefficient(state, 0, [0])
        with pytest.raises(ValueError, match=">= 0"):
            coefficient(state, 0, [0, -1])


class TestInsertionValidation:
    def test_unknown_kind(self):
        with pytest.raises(ValueError, match="kind"):
            SiteInsertion("teleport")

    def test_negative_powers(self):
        with pytest.raises(ValueError, match=">= 0"):
            fock_pair(-1, 0)

    def test_hop_needs_right_neighbour(self, rng):
        state = MpsState.random(2, 2, 0.3, rng)
        with pytest.raises(ValueError, match="right neighbour"):
            matrix_element(state, insertions={2: HOP_LEFT})

    def test_conflicting_insertions(self, rng):
        state = MpsState.random(2, 3, 0.3, rng)
        with pytest.raises(ValueError, match="conflicting"):
            matrix_element(state, insertions={1: HOP_LEFT, 2: OCCUPATION})

    def test_site_out_of_range(self, rng):
        state = MpsState.random(2, 2, 0.3, rng)
        with pytest.raises(ValueError, match="site"):
            matrix_element(state, insertions={3: OCCUPATION})

    def test_wrong_type(self, rng):
        state = MpsState.random(2, 2, 0.3, rng)
        with pytest.raises(TypeError):
            matrix_element(state, insertions={1: "occupation"})

    def test_disjoint_insertions_allowed(self, rng):
        state = random_bounded_state(rng, 2, 4)
        value = matrix_element(state, insertions={1: OCCUPATION, 3: OCCUPATION})
        assert math.isfinite(value)


class TestScaledPowers:
    def test_values(self):
        x = np.array([[0.0, 1.0], [0.5, 0.3]])
        powers = scaled_powers(x, 3)
        assert np.array_equal(powers[0], np.eye(2))
        assert powers[1] == pytest.approx(x)
        assert powers[2] == pytest.approx(x @ x / math.sqrt(2))
        assert powers[3] == pytest.approx(x @ x @ x / math.sqrt(6))


class TestTransfers:
    def test_prefix_suffix_consistency(self, rng):
        state = random_bounded_state(rng, 2, 5)
        tr = Transfers.build(state)
        for m in range(6):
            assert tr.prefix[m] == pytest.approx(
                transfer_product(state, 1, m), rel=1e-13, abs=1e-13
            )
            assert tr.suffix[m + 1] == pytest.approx(
                transfer_product(state, m + 1, 5), rel=1e-13, abs=1e-13
            )

    def test_norm_value_matches(self, rng):
        state = random_bounded_state(rng, 3, 4)
        assert Transfers.build(state).norm_value() == pytest.approx(
            norm_sq(state), rel=1e-13
        )

    def test_complex_build(self, rng):
        state = random_bounded_state(rng, 2, 3, field=COMPLEX)
        tr = Transfers.build(state)
        assert tr.norm_value() == pytest.approx(norm_sq(state), rel=1e-13)
