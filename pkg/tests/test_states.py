"""State construction, truncation, and detected-statistics tests."""
import math

import numpy as np
import pytest
from scipy.constants import c as SPEED_OF_LIGHT
from scipy.special import gammaln

from photonsub import (
    DetectorModel,
    DomainError,
    TruncationError,
    build_subtracted_state,
    detected_joint_pnd,
    detector_povm,
    ideal_joint_pnd,
    joint_factorial_moment,
    mean_pair_number,
    pad_joint,
    squeezing_from_pump,
    state_mean_photons,
)


class TestConstruction:

    def test_symmetric_single_pair_weights(self):
        # z = 0.5, one photon off each arm: exact rationals from the
        # infinite-sum normalization sum_j j^2 (1/4)^j = 20/27
        st = build_subtracted_state(0.5, 1, 1, tail_tol=1e-13)
        assert st.j_min == 1
        w = st.weights
        assert abs(w[0] - 27.0 / 80.0) < 1e-11
        assert abs(w[1] - 27.0 / 80.0) < 1e-11
        assert abs(w[2] - 243.0 / 1280.0) < 1e-11

    def test_asymmetric_weights_and_counts(self):
        st = build_subtracted_state(0.5, 0, 1, tail_tol=1e-13)
        assert st.j_min == 1
        assert abs(st.weights[0] - 0.5625) < 1e-11
        # signal keeps all j photons, idler loses one
        assert st.signal_counts[0] == 1
        assert st.idler_counts[0] == 0
        np.testing.assert_array_equal(st.signal_counts - st.idler_counts, 1)

    @pytest.mark.parametrize("z", [0.1, 0.5, 0.9])
    @pytest.mark.parametrize("l", [0, 1, 3])
    def test_normalized_with_small_tail(self, z, l):
        st = build_subtracted_state(z, l)
        assert abs(st.weights.sum() - 1.0) < 1e-12
        assert 0.0 <= st.tail_mass < 1e-6
        tight = build_subtracted_state(z, l, tail_tol=1e-12)
        assert tight.tail_mass <= st.tail_mass

    def test_truncation_stops_at_first_crossing(self):
        tol = 1e-6
        st = build_subtracted_state(0.6, 2, 1, tail_tol=tol)
        # rebuild the raw weight sequence and check the stated stopping rule:
        # cut at the first J where the next weight drops below tol * cumsum
        j = np.arange(st.j_min, st.j_max + 2)
        logw = (2.0 * j * math.log(0.6) + 2.0 * gammaln(j + 1)
                - gammaln(j - 2 + 1) - gammaln(j - 1 + 1))
        w = np.exp(logw - logw.max())
        csum = np.cumsum(w)
        kept = st.j_max - st.j_min + 1
        assert w[kept] < tol * csum[kept - 1]
        ratios = w[1:kept] / csum[:kept - 1]
        assert np.all(ratios >= tol)

    def test_forced_j_max_overrides_tail_rule(self):
        st = build_subtracted_state(0.5, 0, tail_tol=1e-13, j_max=5)
        assert st.j_max == 5
        assert st.tail_mass > 0.0
        assert abs(st.weights.sum() - 1.0) < 1e-12

    def test_strict_tail_raises_at_cap(self):
        with pytest.raises(TruncationError):
            build_subtracted_state(0.99, 0, j_cap=50)

    def test_clamped_tail_mass_is_geometric(self):
        st = build_subtracted_state(0.99, 0, j_cap=50, strict_tail=False)
        assert st.j_max == 50
        # l = 0 weights are geometric, so the discarded fraction is exact
        assert np.isclose(st.tail_mass, 0.99 ** (2 * 51), rtol=1e-9)

    def test_z_zero_collapses_to_single_pair(self):
        st = build_subtracted_state(0.0, 0)
        assert st.j_min == st.j_max == 0
        assert not st.degenerate
        np.testing.assert_array_equal(st.amplitudes, [1.0])

        st = build_subtracted_state(0.0, 1, 2)
        assert st.j_min == st.j_max == 2
        assert st.degenerate
        pnd = ideal_joint_pnd(st)
        assert pnd.probs[1, 0] == 1.0

    @pytest.mark.parametrize("bad", [-0.1, 1.0, 1.5, float("nan"), float("inf")])
    def test_rejects_bad_z(self, bad):
        with pytest.raises(DomainError):
            build_subtracted_state(bad)

    def test_rejects_complex_z(self):
        with pytest.raises(DomainError):
            build_subtracted_state(0.3 + 0.1j)

    @pytest.mark.parametrize("bad_l", [-1, 0.5, 1.0])
    def test_rejects_bad_subtraction(self, bad_l):
        with pytest.raises(DomainError):
            build_subtracted_state(0.5, bad_l)

    @pytest.mark.parametrize("bad_tol", [0.0, -1e-9, 0.01, 1.0])
    def test_rejects_bad_tail_tol(self, bad_tol):
        with pytest.raises(DomainError):
            build_subtracted_state(0.5, tail_tol=bad_tol)

    def test_rejects_cap_below_j_min(self):
        with pytest.raises(DomainError):
            build_subtracted_state(0.5, 3, 3, j_max=2)


class TestMoments:

    def test_mean_pair_number_geometric(self):
        st = build_subtracted_state(0.66, 0, tail_tol=1e-13)
        assert abs(mean_pair_number(st) - 0.77179305457122608) < 1e-10

    def test_mean_photons_subtracted(self):
        st = build_subtracted_state(0.66, 2, tail_tol=1e-13)
        s, i = state_mean_photons(st)
        assert abs(s - 4.5826310575116472) < 1e-10
        assert abs(i - s) < 1e-14  # symmetric subtraction
        assert abs(mean_pair_number(st) - (s + 2.0)) < 1e-12

    def test_brightness_grows_with_subtraction(self):
        means = [mean_pair_number(build_subtracted_state(0.4, l)) for l in range(5)]
        assert all(b > a for a, b in zip(means, means[1:]))
        sig = [state_mean_photons(build_subtracted_state(0.4, l))[0] for l in range(5)]
        assert all(b > a for a, b in zip(sig, sig[1:]))

    def test_state_mean_photons_arms(self):
        st = build_subtracted_state(0.5, 0, 1, tail_tol=1e-13)
        s, i = state_mean_photons(st)
        assert abs((s - i) - 1.0) < 1e-12  # arm difference fixed by subtraction


FROZEN_CELLS = [
    # z, l1, l2, eta_s, nu_s, eta_i, nu_i, n, m, value (50-digit reference sums)
    (0.3, 1, 2, 0.7, 0.05, 0.7, 0.05, 0, 0, 0.18476719460932884),
    (0.3, 1, 2, 0.7, 0.05, 0.7, 0.05, 1, 0, 0.45618328873204059),
    (0.3, 1, 2, 0.7, 0.05, 0.7, 0.05, 2, 1, 0.10053963184160663),
    (0.5, 1, 1, 0.9, 0.001, 0.9, 0.001, 1, 1, 0.27909091496556166),
    (0.66, 0, 0, 0.1625, 0.0, 0.1625, 0.0, 0, 0, 0.81270909120199028),
    (0.66, 2, 2, 0.1625, 0.001, 0.1625, 0.001, 1, 2, 0.04725606560714774),
    (0.4, 0, 1, 0.8, 0.01, 0.5, 0.02, 1, 1, 0.049452045908241817),
]


class TestDetectedDistribution:

    @pytest.mark.parametrize("z,l1,l2,es,vs,ei,vi,n,m,ref", FROZEN_CELLS)
    def test_frozen_reference_cells(self, z, l1, l2, es, vs, ei, vi, n, m, ref):
        st = build_subtracted_state(z, l1, l2, tail_tol=1e-13)
        pnd = detected_joint_pnd(st, DetectorModel(es, vs), DetectorModel(ei, vi),
                                 n_max=12, tail_tol=1e-13)
        assert abs(pnd.probs[n, m] - ref) <= 1e-11

    def test_povm_columns_are_distributions(self):
        pm = detector_povm(DetectorModel(0.7, 0.05), n_max=60, k_max=10)
        assert pm.shape == (61, 11)
        np.testing.assert_allclose(pm.sum(axis=0), 1.0, atol=1e-12)
        assert np.all(pm >= 0.0)

    def test_povm_spot_values(self):
        pm = detector_povm(DetectorModel(0.9, 0.0), n_max=3, k_max=1)
        assert abs(pm[0, 1] - 0.1) < 1e-15
        assert abs(pm[1, 1] - 0.9) < 1e-15
        pm = detector_povm(DetectorModel(0.5, 0.01), n_max=3, k_max=1)
        assert abs(pm[1, 0] - 0.01 * math.exp(-0.01)) < 1e-15

    def test_detected_mean_is_eta_nbar_plus_nu(self):
        st = build_subtracted_state(0.66, 2, tail_tol=1e-13)
        pnd = detected_joint_pnd(st, DetectorModel(0.1625, 0.001), tail_tol=1e-13)
        sig, _ = pnd.marginals()
        mean = float(np.dot(np.arange(sig.size), sig))
        assert abs(mean - 0.74567754684564266) < 1e-10
        assert abs(mean - (0.1625 * state_mean_photons(st)[0] + 0.001)) < 1e-10

    @pytest.mark.parametrize("u", [0, 1, 2])
    @pytest.mark.parametrize("v", [0, 1, 2])
    def test_loss_scales_factorial_moments(self, u, v):
        # without dark counts, F_detected(u, v) = eta_s^u eta_i^v F_ideal(u, v)
        st = build_subtracted_state(0.5, 1, 0, tail_tol=1e-13)
        ideal = ideal_joint_pnd(st)
        lossy = detected_joint_pnd(st, DetectorModel(0.7, 0.0),
                                   DetectorModel(0.4, 0.0), tail_tol=1e-13)
        want = 0.7 ** u * 0.4 ** v * joint_factorial_moment(ideal, u, v)
        assert abs(joint_factorial_moment(lossy, u, v) - want) < 1e-9

    def test_ideal_is_unit_eta_detected(self):
        st = build_subtracted_state(0.45, 1, tail_tol=1e-13)
        a = ideal_joint_pnd(st)
        b = detected_joint_pnd(st, DetectorModel(1.0, 0.0), n_max=a.n_max,
                               tail_tol=1e-13)
        np.testing.assert_allclose(a.probs, b.probs, atol=1e-14)

    def test_grid_total_and_marginals(self):
        st = build_subtracted_state(0.6, 1)
        pnd = detected_joint_pnd(st, DetectorModel(0.8, 0.02))
        assert pnd.total >= 1.0 - 1e-9
        assert abs(pnd.probs.sum() - pnd.total) < 1e-14
        sig, idl = pnd.marginals()
        assert abs(sig.sum() - pnd.total) < 1e-14
        assert abs(idl.sum() - pnd.total) < 1e-14

    def test_detector_validation(self):
        with pytest.raises(DomainError):
            DetectorModel(0.0, 0.0)
        with pytest.raises(DomainError):
            DetectorModel(1.2, 0.0)
        with pytest.raises(DomainError):
            DetectorModel(0.5, -0.01)


class TestPadJoint:

    def test_pad_preserves_block(self):
        st = build_subtracted_state(0.5, 0)
        pnd = detected_joint_pnd(st, DetectorModel(0.9, 0.0), n_max=3)
        big = pad_joint(pnd, 6)
        assert big.probs.shape == (7, 7)
        np.testing.assert_array_equal(big.probs[:4, :4], pnd.probs)
        assert big.probs[4:, :].sum() == 0.0
        assert big.total == pnd.total

    def test_pad_same_size_is_identity(self):
        st = build_subtracted_state(0.5, 0)
        pnd = detected_joint_pnd(st, DetectorModel(0.9, 0.0), n_max=3)
        assert pad_joint(pnd, 3) is pnd

    def test_pad_down_refused(self):
        st = build_subtracted_state(0.5, 0)
        pnd = detected_joint_pnd(st, DetectorModel(0.9, 0.0), n_max=3)
        with pytest.raises(DomainError):
            pad_joint(pnd, 2)


class TestPumpMap:

    def test_unit_interaction_strength(self):
        z = squeezing_from_pump(2.0 * SPEED_OF_LIGHT, 1.0, 1.0, 1.0, 1.0)
        assert abs(z - math.tanh(1.0)) < 1e-15
        assert abs(z - 0.7615941559557649) < 1e-15

    def test_zero_pump_gives_vacuum(self):
        assert squeezing_from_pump(1e-12, 1e15, 0.01, 0.0, 2.2) == 0.0

    def test_result_in_domain(self):
        z = squeezing_from_pump(1e-10, 1e15, 0.05, 1e10, 1.8)
        assert 0.0 <= z < 1.0

    def test_rejects_bad_inputs(self):
        with pytest.raises(DomainError):
            squeezing_from_pump(-1.0, 1.0, 1.0, 1.0, 1.0)
        with pytest.raises(DomainError):
            squeezing_from_pump(1.0, 1.0, 1.0, 1.0, 0.0)
        with pytest.raises(DomainError):
            squeezing_from_pump(float("nan"), 1.0, 1.0, 1.0, 1.0)
