import math

import numpy as np
import pytest
from conftest import two_level_state

from geoentangle import geoent, imps, models
from geoentangle.errors import CriticalDegeneracy, InvalidInput, InvariantViolation


def ghz_state():
    """Cat state (|00...> + |11...>)/sqrt 2 as a canonical chi=2 iMPS; |nu_2| = 1."""
    gamma = np.zeros((2, 2, 2))
    gamma[0, 0, 0] = gamma[1, 1, 1] = math.sqrt(2)
    return imps.InfiniteMPS(gamma, np.full(2, 1 / math.sqrt(2)))


def block_matrix(mps, L, phi):
    s = np.sqrt(mps.lam)
    return s[:, None] * geoent.overlap_matrix(mps, L, phi) * s[None, :]


class TestTransferMatrix:
    def test_product(self):
        A = geoent.transfer_matrix(imps.product_imps([0.6, 0.8]))
        np.testing.assert_allclose(A.mat, [[1.0]])

    @pytest.mark.parametrize("seed,chi", [(0, 2), (1, 3), (2, 5)])
    def test_dominant_eigenpair(self, seed, chi):
        A = geoent.transfer_matrix(imps.random_imps(seed, 2, chi))
        eigs = geoent.transfer_spectrum(A)
        assert abs(eigs.values[0] - 1) < 1e-8
        assert geoent.dominant_overlap(A, eigs) > 1 - 1e-8
        assert np.all(np.abs(eigs.values[1:]) < 1)

    def test_hermiticity_symmetry(self):
        chi = 3
        A = geoent.transfer_matrix(imps.random_imps(4, 2, chi)).as_tensor()
        np.testing.assert_allclose(A, A.transpose(1, 0, 3, 2).conj(), atol=1e-14)

    def test_block_l1(self):
        mps = imps.random_imps(4, 2, 3)
        np.testing.assert_array_equal(geoent.transfer_block(mps, 1).mat, geoent.transfer_matrix(mps).mat)

    @pytest.mark.parametrize("k", [2, 3, 4])
    @pytest.mark.parametrize("L", [1, 2, 3])
    def test_power_law(self, k, L):
        mps = imps.random_imps(6, 2, 3)
        AL = geoent.transfer_block(mps, L).mat
        AkL = geoent.transfer_block(mps, k * L).mat
        assert np.max(np.abs(AkL - np.linalg.matrix_power(AL, k))) < 1e-12

    def test_overlap_route_matches_power(self):
        mps = imps.random_imps(6, 2, 3)
        a = geoent.transfer_block(mps, 5).mat
        b = geoent.transfer_block_from_overlap(mps, 5).mat
        assert np.max(np.abs(a - b)) < 1e-12

    def test_trace_tends_to_one(self, tfim_states):
        mps = tfim_states(2.0, 16)
        dev = [abs(np.trace(geoent.transfer_block(mps, L).mat) - 1) for L in (1, 4, 16, 64)]
        assert all(b < a for a, b in zip(dev, dev[1:]))
        assert dev[-1] < 1e-10

    def test_mismatched_base(self):
        mps = imps.random_imps(0, 2, 2)
        with pytest.raises(InvalidInput):
            geoent.transfer_block(mps, 5, base=geoent.transfer_block(mps, 2))


class TestCorrelationLength:
    def test_from_modulus(self):
        assert geoent.correlation_length(imps.random_imps(0, 2, 2), math.exp(-1)) == pytest.approx(1.0)

    def test_product(self):
        assert geoent.correlation_length(imps.product_imps([1, 0])) == 0.0

    def test_random_gapped(self):
        assert geoent.second_eigenvalue_modulus(imps.random_imps(1, 2, 2)) < 1

    def test_cat_state_refused(self):
        with pytest.raises(CriticalDegeneracy):
            geoent.correlation_length(ghz_state())

    @pytest.mark.parametrize("h", [1.5, 2.0])
    def test_tfim(self, tfim_states, h):
        xi = geoent.correlation_length(tfim_states(h, 32))
        assert abs(xi / models.tfim_exact(h)[1] - 1) < 0.05


class TestAsymptotic:
    def test_product(self):
        assert geoent.geoent_asymptotic(imps.product_imps([1, 1])) == 0.0

    def test_formula(self):
        assert geoent.geoent_asymptotic(two_level_state(0.9)) == pytest.approx(-math.log(0.9), abs=1e-12)

    def test_cat_state_refused(self):
        with pytest.raises(CriticalDegeneracy):
            geoent.geoent_asymptotic(ghz_state())

    def test_degenerate_lambda(self):
        assert geoent.geoent_asymptotic(two_level_state(0.5)) == pytest.approx(math.log(2))


class TestOptimalBlockState:
    def test_product(self):
        mps = imps.product_imps([0.6, 0.8j])
        phi, norm_sq = geoent.optimal_block_state(mps, 2, np.ones(1))
        assert norm_sq == pytest.approx(1.0)
        assert abs(np.vdot(phi, imps.block_tensor(mps, 2)[:, 0, 0])) == pytest.approx(1.0)

    def test_e1_long_block(self, tfim_states):
        mps = tfim_states(3.0, 16)
        _, norm_sq = geoent.optimal_block_state(mps, 10, np.eye(mps.chi)[0])
        assert norm_sq == pytest.approx(mps.lam[0] ** 2, abs=1e-8)

    def test_matches_transfer_route(self, rng):
        mps = imps.random_imps(8, 2, 2)
        r = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        r /= np.linalg.norm(r)
        _, norm_sq = geoent.optimal_block_state(mps, 3, r)
        assert norm_sq == pytest.approx(geoent.psi_norm_sq(geoent.transfer_block(mps, 3), r), abs=1e-10)

    def test_rejects_non_unit(self):
        with pytest.raises(InvalidInput):
            geoent.optimal_block_state(imps.random_imps(0, 2, 2), 1, np.ones(2))


class TestGeoentFinite:
    def test_product(self):
        assert geoent.geoent_finite(imps.product_imps([1, 2]), 3).E == pytest.approx(0.0, abs=1e-14)

    def test_history_non_decreasing(self):
        res = geoent.geoent_finite(imps.random_imps(5, 2, 4), 2)
        hist = np.array(res.history)
        assert np.all(np.diff(hist) >= -1e-13 * hist[:-1])
        assert res.converged

    def test_deterministic(self):
        mps = imps.random_imps(5, 2, 3)
        a = geoent.geoent_finite(mps, 2, seed=4)
        b = geoent.geoent_finite(mps, 2, seed=4)
        assert a.E == b.E and a.r.tobytes() == b.r.tobytes()

    def test_more_starts_never_worse(self):
        mps = imps.random_imps(12, 2, 4)
        assert geoent.geoent_finite(mps, 1, starts=16).E <= geoent.geoent_finite(mps, 1, starts=1).E + 1e-14

    def test_converges_to_asymptotic(self, tfim_states):
        mps = tfim_states(2.0, 16)
        xi = geoent.correlation_length(mps)
        E_inf = geoent.geoent_asymptotic(mps)
        L0 = max(2, int(math.ceil(2 * xi)))
        gaps = [abs(geoent.geoent_finite(mps, L).E - E_inf) for L in (L0, 2 * L0, 4 * L0)]
        assert gaps[1] <= gaps[0] and gaps[2] <= gaps[1]

    @pytest.mark.parametrize("seed", range(4))
    @pytest.mark.parametrize("L", [1, 2, 4])
    def test_below_single_copy(self, seed, L):
        mps = imps.random_imps(seed, 2, 3)
        assert geoent.geoent_finite(mps, L).E <= geoent.single_copy(mps, L) + 1e-8

    def test_wrong_transfer(self):
        mps = imps.random_imps(0, 2, 2)
        with pytest.raises(InvalidInput):
            geoent.geoent_finite(mps, 3, transfer=geoent.transfer_block(mps, 2))


class TestWeylBounds:
    def test_product(self):
        wb = geoent.weyl_bounds(imps.product_imps([1, 0]), 2)
        assert (wb.upper, wb.lower, wb.lambda1) == (1.0, 0.0, 1.0)

    @pytest.mark.parametrize("p", [0.6, 0.9])
    def test_two_level_tight_on_top(self, p):
        wb = geoent.weyl_bounds(two_level_state(p), 3, check=False)
        assert wb.upper == pytest.approx(math.sqrt(p), abs=1e-12)
        assert wb.upper == pytest.approx(wb.lambda1, abs=1e-12)

    @pytest.mark.parametrize("L", [2, 4, 8])
    def test_tfim_margins(self, tfim_states, L):
        wb = geoent.weyl_bounds(tfim_states(1.5, 16), L)
        assert wb.upper > wb.lambda1 > wb.lower

    def test_lower_side_fails_for_flat_schmidt_spectrum(self):
        # exact orthonormal blocks: probs (p², pq, pq, q²) and pq + q² = q > p² here
        wb = geoent.weyl_bounds(two_level_state(0.6), 3, check=False)
        assert wb.lower > wb.lambda1

    def test_violation_reported(self):
        from geoentangle import harness

        # a corpus member whose one-site block states are far from orthonormal
        mps = harness.random_corpus(0, 4)[3]
        assert not geoent.weyl_bounds(mps, 1, check=False).holds()
        with pytest.raises(InvariantViolation):
            geoent.weyl_bounds(mps, 1)


class TestSingleCopy:
    def test_product(self):
        assert geoent.single_copy(imps.product_imps([1, 0]), 4) == 0.0

    def test_two_level(self):
        assert geoent.single_copy(two_level_state(0.7), 5) == pytest.approx(-2 * math.log(0.7), abs=1e-12)


class TestFidelity:
    def test_product(self):
        mps = imps.product_imps([0.6, 0.8])
        phi = imps.block_tensor(mps, 2)[:, 0, 0]
        for M in (2, 3, 7):
            assert geoent.fidelity_finite_M(mps, 2, M, phi) == pytest.approx(1.0)

    def test_two_blocks_dense(self, rng):
        mps = imps.random_imps(2, 2, 2)
        L, chi, D = 2, 2, 4
        phi = rng.standard_normal(D) + 1j * rng.standard_normal(D)
        phi /= np.linalg.norm(phi)
        tau = imps.block_tensor(mps, 2 * L).reshape(D, D, chi, chi)
        amp = np.einsum("m,n,mnab->ab", phi.conj(), phi.conj(), tau)
        dense = np.sum((mps.lam[:, None] * mps.lam[None, :]) ** 2 * np.abs(amp) ** 2)
        assert geoent.fidelity_finite_M(mps, L, 2, phi) == pytest.approx(dense, abs=1e-10)

    def test_large_m_rate_is_spectral_radius(self):
        mps = imps.random_imps(3, 2, 2)
        res = geoent.geoent_finite(mps, 2)
        phi, _ = geoent.optimal_block_state(mps, 2, res.r)
        B = block_matrix(mps, 2, phi)
        M = 1000
        rate = geoent.log_fidelity_from_overlap(B, mps.lam, 2 * M) - geoent.log_fidelity_from_overlap(B, mps.lam, M)
        assert rate / M == pytest.approx(2 * math.log(res.spectral_radius), abs=1e-8)

    def test_large_m_matches_dmax_for_tfim(self, tfim_states):
        mps = tfim_states(3.0, 16)
        res = geoent.geoent_finite(mps, 2)
        phi, _ = geoent.optimal_block_state(mps, 2, res.r)
        B = block_matrix(mps, 2, phi)
        M = 1000
        rate = geoent.log_fidelity_from_overlap(B, mps.lam, 2 * M) - geoent.log_fidelity_from_overlap(B, mps.lam, M)
        assert math.exp(rate / M) == pytest.approx(res.d_max_abs**2, abs=1e-6)
        assert not res.radius_mismatch

    def test_log_matches_direct(self):
        mps = imps.random_imps(3, 2, 3)
        phi, _ = geoent.optimal_block_state(mps, 1, np.eye(3)[0])
        B = block_matrix(mps, 1, phi)
        for M in (2, 5, 12):
            assert geoent.log_fidelity_from_overlap(B, mps.lam, M) == pytest.approx(
                math.log(geoent.fidelity_from_overlap(B, mps.lam, M)), abs=1e-10
            )

    def test_needs_two_blocks(self):
        with pytest.raises(InvalidInput):
            geoent.fidelity_from_overlap(np.eye(2), np.ones(2) / math.sqrt(2), 1)
