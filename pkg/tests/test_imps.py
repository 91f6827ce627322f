import json
import math

import numpy as np
import pytest
from conftest import two_level_state

from geoentangle import geoent, imps, models
from geoentangle.errors import BlockTooLarge, InvalidInput, IoError


def raw_expectation(gamma, op):
    """<O> of the state generated by an unnormalised, non-canonical site tensor."""
    d, chi, _ = gamma.shape
    E = np.einsum("sab,scd->acbd", gamma, gamma.conj()).reshape(chi * chi, chi * chi)
    EO = np.einsum("st,sab,tcd->acbd", op.T, gamma, gamma.conj()).reshape(chi * chi, chi * chi)
    w, V = np.linalg.eig(E)
    wl, U = np.linalg.eig(E.T)
    r = V[:, np.argmax(np.abs(w))]
    l = U[:, np.argmax(np.abs(wl))]
    return (l @ EO @ r) / (l @ E @ r)


class TestRandomImps:
    def test_chi_one_is_product(self):
        mps = imps.random_imps(0, 2, 1)
        np.testing.assert_allclose(mps.lam, [1.0])

    def test_determinism(self):
        a = imps.random_imps(11, 2, 3)
        b = imps.random_imps(11, 2, 3)
        assert a.gamma.tobytes() == b.gamma.tobytes()
        assert a.lam.tobytes() == b.lam.tobytes()

    @pytest.mark.parametrize("seed,d,chi", [(7, 2, 3), (1, 3, 4), (2, 2, 8)])
    def test_canonical(self, seed, d, chi):
        mps = imps.random_imps(seed, d, chi)
        assert max(imps.canonical_residuals(mps)) < 1e-8
        assert np.all(np.diff(mps.lam) <= 0)
        assert np.linalg.norm(mps.lam) == pytest.approx(1.0, abs=1e-14)

    def test_rejects_bad_sizes(self):
        with pytest.raises(InvalidInput):
            imps.random_imps(0, 1, 2)


class TestCanonicalize:
    def test_canonical_input_unchanged_up_to_phases(self):
        mps = imps.random_imps(5, 2, 3)
        again = imps.canonicalize(mps.gamma, mps.lam)
        np.testing.assert_allclose(again.lam, mps.lam, atol=1e-10)
        np.testing.assert_allclose(np.abs(again.gamma), np.abs(mps.gamma), atol=1e-8)

    def test_chi_one(self):
        mps = imps.canonicalize(np.array([0.6, 0.8j]).reshape(2, 1, 1))
        np.testing.assert_allclose(mps.lam, [1.0])
        assert max(imps.canonical_residuals(mps)) < 1e-12

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_preserves_expectations(self, seed):
        g = np.random.default_rng(seed).standard_normal((2, 3, 3)) * (1 + 0.5j)
        before = raw_expectation(g, models.SZ)
        mps = imps.canonicalize(g)
        after = imps.local_expectation(mps, models.SZ)
        assert abs(before - after) < 1e-9

    def test_real_input_stays_real(self):
        g = np.random.default_rng(4).standard_normal((2, 4, 4))
        assert imps.canonicalize(g).is_real()

    def test_rejects_nonpositive_lambda(self):
        with pytest.raises(InvalidInput):
            imps.canonicalize(np.ones((2, 2, 2)), np.array([1.0, 0.0]))


class TestBlockTensor:
    def test_l1_is_gamma(self):
        mps = imps.random_imps(2, 2, 3)
        np.testing.assert_array_equal(imps.block_tensor(mps, 1), mps.gamma)

    def test_l2_definition(self):
        mps = imps.random_imps(2, 2, 3)
        expect = np.einsum("sab,b,tbc->stac", mps.gamma, mps.lam, mps.gamma).reshape(4, 3, 3)
        np.testing.assert_allclose(imps.block_tensor(mps, 2), expect, atol=1e-14)

    @pytest.mark.parametrize("method", ["squaring", "sequential"])
    def test_gram_diagonal_matches_transfer_route(self, method):
        mps = imps.random_imps(9, 2, 2)
        tau = imps.block_tensor(mps, 3)
        diag = np.einsum("nab,nab->ab", tau, tau.conj()).real
        O = imps.block_overlap(mps, 3, method=method).reshape(2, 2, 2, 2)
        np.testing.assert_allclose(np.einsum("aabb->ab", O).real, diag, atol=1e-12)

    def test_cap(self):
        mps = imps.random_imps(0, 2, 2)
        with pytest.raises(BlockTooLarge):
            imps.block_tensor(mps, 30)


class TestReducedDensitySpectrum:
    def test_product(self):
        eigs = imps.reduced_density_spectrum(imps.product_imps([1, 1j]), 3)
        np.testing.assert_allclose(eigs.probs, [1.0])

    @pytest.mark.parametrize("p", [0.5, 0.8, 0.95])
    def test_two_level_limit(self, p):
        q = 1 - p
        eigs = imps.reduced_density_spectrum(two_level_state(p), 4)
        np.testing.assert_allclose(np.sort(eigs.nonzero)[::-1], sorted([p * p, p * q, p * q, q * q], reverse=True), atol=1e-14)

    def test_transfer_route_matches_dense(self, tfim_states):
        mps = tfim_states(2.0, 16)
        L = 4
        A = geoent.transfer_block(mps, L)
        fast = imps.block_spectrum_from_transfer(A.mat, mps.lam, L)
        rho = imps.dense_block_density(mps, L)
        dense = np.sort(np.linalg.eigvalsh(rho / np.trace(rho).real))[::-1]
        np.testing.assert_allclose(fast.probs[: len(dense)], np.where(dense < imps.ZERO_PROB, 0, dense), atol=1e-10)

    @pytest.mark.parametrize("L", [1, 2, 5])
    def test_probabilities(self, L):
        eigs = imps.reduced_density_spectrum(imps.random_imps(3, 2, 4), L)
        assert eigs.probs.sum() == pytest.approx(1.0, abs=1e-10)
        assert np.all(eigs.probs >= 0)

    @pytest.mark.parametrize("L", [1, 3, 8, 24])
    def test_raw_trace_is_one(self, tfim_states, L):
        # canonical conditions fix the trace at every L; only the block
        # states' orthonormality is asymptotic
        eigs = imps.reduced_density_spectrum(tfim_states(1.5, 16), L)
        assert abs(eigs.raw_trace - 1) < 1e-12

    def test_top_eigenvalue_tends_to_lambda1_fourth(self, tfim_states):
        mps = tfim_states(1.5, 16)
        L = int(math.ceil(10 * geoent.correlation_length(mps)))
        eigs = imps.reduced_density_spectrum(mps, L)
        assert abs(mps.lam[0] ** 4 / eigs.nu1 - 1) < 1e-4


class TestSchmidtEntropy:
    def test_product(self):
        assert imps.schmidt_entropy(imps.product_imps([1, 0])) == 0.0

    def test_maximal_two_level(self):
        assert imps.schmidt_entropy(two_level_state(0.5)) == pytest.approx(math.log(2))

    def test_grows_towards_criticality(self, tfim_states):
        S = [imps.schmidt_entropy(tfim_states(h, 32)) for h in (1.5, 1.2, 1.1, 1.05, 1.02)]
        assert all(b > a for a, b in zip(S, S[1:]))


class TestObservables:
    def test_product_expectation(self):
        mps = imps.product_imps([1, 0])
        assert imps.local_expectation(mps, models.SZ) == pytest.approx(1.0)
        assert imps.bond_expectation(mps, np.kron(models.SZ, models.SZ)) == pytest.approx(1.0)


class TestPersistence:
    def test_roundtrip(self, tmp_path):
        mps = imps.random_imps(1, 2, 3)
        path = imps.save_imps(mps, tmp_path / "s.json")
        back = imps.load_imps(path)
        assert back.gamma.tobytes() == mps.gamma.tobytes()
        assert back.lam.tobytes() == mps.lam.tobytes()

    def test_schema_version(self, tmp_path):
        doc = imps.to_json_dict(imps.random_imps(1, 2, 2))
        doc["version"] = 99
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(doc))
        with pytest.raises(InvalidInput):
            imps.load_imps(path)

    def test_shape_mismatch(self):
        doc = imps.to_json_dict(imps.random_imps(1, 2, 2))
        doc["chi"] = 3
        with pytest.raises(InvalidInput):
            imps.from_json_dict(doc)

    def test_missing_file(self, tmp_path):
        with pytest.raises(IoError):
            imps.load_imps(tmp_path / "nope.json")


def test_inconsistent_shapes_rejected():
    with pytest.raises(InvalidInput):
        imps.InfiniteMPS(np.zeros((2, 2, 3)), np.ones(2))
