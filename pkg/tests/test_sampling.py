"""Unit tests for the seeded random-ensemble generators."""

import numpy as np
import pytest
from scipy import stats

from qstkit import qcore, sampling


class TestStreams:
    def test_same_key_is_identical(self):
        a = sampling.stream(7, 3).standard_normal(16)
        b = sampling.stream(7, 3).standard_normal(16)
        np.testing.assert_array_equal(a, b)

    def test_distinct_indices_differ(self):
        a = sampling.stream(7, 0).standard_normal(16)
        b = sampling.stream(7, 1).standard_normal(16)
        assert not np.array_equal(a, b)

    def test_sub_seed_is_deterministic_and_label_sensitive(self):
        assert sampling.sub_seed(11, "train") == sampling.sub_seed(11, "train")
        assert sampling.sub_seed(11, "train") != sampling.sub_seed(11, "test")
        assert sampling.sub_seed(11, "a", "b") != sampling.sub_seed(11, "ab")


class TestGinibre:
    def test_shape_and_dtype(self):
        g = sampling.ginibre(4, sampling.stream(1))
        assert g.shape == (4, 4) and np.iscomplexobj(g)

    def test_deterministic(self):
        np.testing.assert_array_equal(
            sampling.ginibre(3, sampling.stream(5)), sampling.ginibre(3, sampling.stream(5))
        )

    def test_entry_statistics(self):
        """Real parts have mean 0 and variance 1/2, within 3 sigma at 1e5 entries."""
        rng = sampling.stream(2)
        entries = np.concatenate([sampling.ginibre(100, rng).real.ravel() for _ in range(10)])
        n = entries.size
        assert abs(entries.mean()) <= 3 * np.sqrt(0.5 / n)
        assert abs(entries.var() - 0.5) <= 3 * np.sqrt(2.0 / n) * 0.5


class TestHilbertSchmidt:
    def test_construction_invariants(self):
        rng = sampling.stream(3)
        for m in (1, 2, 3):
            rho = sampling.sample_hs(m, rng)
            assert abs(np.trace(rho) - 1.0) <= 1e-12
            assert np.linalg.eigvalsh(rho)[0] >= -1e-12
            assert qcore.is_physical(rho)

    def test_deterministic(self):
        np.testing.assert_array_equal(
            sampling.sample_hs(2, sampling.stream(9)), sampling.sample_hs(2, sampling.stream(9))
        )

    def test_mean_pair_fidelity_single_qubit(self):
        """10^4 independent pairs reproduce the 0.67 reference value."""
        fids = np.empty(10000)
        for i in range(10000):
            rng = sampling.stream(200, i)
            fids[i] = qcore.fidelity(sampling.sample_hs(1, rng), sampling.sample_hs(1, rng))
        assert fids.mean() == pytest.approx(0.67, abs=0.01)

    def test_mean_pair_fidelity_two_qubits(self):
        """10^4 independent pairs reproduce the 0.59 reference value."""
        fids = np.empty(10000)
        for i in range(10000):
            rng = sampling.stream(201, i)
            fids[i] = qcore.fidelity(sampling.sample_hs(2, rng), sampling.sample_hs(2, rng))
        assert fids.mean() == pytest.approx(0.59, abs=0.01)

    def test_purity_matches_moment_oracle(self):
        """Single-qubit HS purity converges to E[Tr rho^2] = 2N/(N^2+1) = 0.8.

        The oracle value follows from Wishart moments: the trace of GG† is
        independent of its normalized spectrum, so E[Tr W^2 / (Tr W)^2] =
        E[Tr W^2] / E[(Tr W)^2] = 2N^3 / (N^2 (N^2+1)).
        """
        rng = sampling.stream(4)
        purities = np.empty(100000)
        for i in range(purities.size):
            rho = sampling.sample_hs(1, rng)
            purities[i] = np.trace(rho @ rho).real
        stderr = purities.std(ddof=1) / np.sqrt(purities.size)
        assert abs(purities.mean() - 0.8) <= 3 * stderr


class TestHaarUnitary:
    def test_unitarity(self):
        rng = sampling.stream(6)
        for d in (2, 4, 8):
            u = sampling.haar_unitary(d, rng)
            assert np.abs(u @ u.conj().T - np.eye(d)).max() <= 1e-12

    def test_deterministic(self):
        np.testing.assert_array_equal(
            sampling.haar_unitary(4, sampling.stream(8)), sampling.haar_unitary(4, sampling.stream(8))
        )

    def test_eigenphase_uniformity(self):
        """Eigenvalue phases of 10^4 Haar draws are uniform on the circle."""
        rng = sampling.stream(7)
        phases = np.concatenate(
            [np.angle(np.linalg.eigvals(sampling.haar_unitary(2, rng))) for _ in range(10000)]
        )
        counts, _ = np.histogram(phases, bins=12, range=(-np.pi, np.pi))
        assert stats.chisquare(counts).pvalue > 0.001


class TestBures:
    def test_construction_invariants(self):
        rng = sampling.stream(10)
        for m in (1, 2, 3):
            assert qcore.is_physical(sampling.sample_bures(m, rng))

    def test_deterministic(self):
        np.testing.assert_array_equal(
            sampling.sample_bures(2, sampling.stream(12)),
            sampling.sample_bures(2, sampling.stream(12)),
        )

    def test_mean_pair_fidelity_single_qubit(self):
        """10^4 independent pairs reproduce the 0.590 reference value."""
        fids = np.empty(10000)
        for i in range(10000):
            rng = sampling.stream(202, i)
            fids[i] = qcore.fidelity(sampling.sample_bures(1, rng), sampling.sample_bures(1, rng))
        assert fids.mean() == pytest.approx(0.590, abs=0.01)


class TestEnsembles:
    def test_spec_validation(self):
        with pytest.raises(ValueError, match="num_qubits"):
            sampling.EnsembleSpec(5, sampling.MEASURE_HS, 10)
        with pytest.raises(ValueError, match="measure"):
            sampling.EnsembleSpec(2, "uniform", 10)
        with pytest.raises(ValueError, match="count"):
            sampling.EnsembleSpec(2, sampling.MEASURE_HS, 0)

    def test_bit_identical_across_runs(self):
        spec = sampling.EnsembleSpec(2, sampling.MEASURE_BURES, 20)
        a = sampling.sample_ensemble(spec, 42)
        b = sampling.sample_ensemble(spec, 42)
        np.testing.assert_array_equal(a, b)

    def test_states_independent_of_chunking(self):
        """State i depends only on (seed, i), not on how the range is split."""
        spec = sampling.EnsembleSpec(1, sampling.MEASURE_HS, 10)
        full = sampling.sample_ensemble(spec, 3)
        lo = sampling._sample_range(spec, 3, 0, 4)
        hi = sampling._sample_range(spec, 3, 4, 10)
        np.testing.assert_array_equal(full, np.concatenate([lo, hi]))

    def test_worker_count_does_not_change_output(self):
        spec = sampling.EnsembleSpec(2, sampling.MEASURE_HS, 24)
        serial = sampling.sample_ensemble(spec, 5, workers=1)
        parallel = sampling.sample_ensemble(spec, 5, workers=2)
        np.testing.assert_array_equal(serial, parallel)
