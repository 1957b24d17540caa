import json

import numpy as np
import pytest

from wsmalink import seqdesign as sd


def naive_gram(entries):
    # independent double loop over columns
    K = entries.shape[1]
    G = np.zeros((K, K), dtype=complex)
    for i in range(K):
        for j in range(K):
            G[i, j] = np.vdot(entries[:, i], entries[:, j])
    return G


def naive_tsc(entries):
    # direct summation of |s_i^H s_j|^2 including i=j
    total = 0.0
    K = entries.shape[1]
    for i in range(K):
        for j in range(K):
            total += abs(np.vdot(entries[:, i], entries[:, j])) ** 2
    return total


def random_signature(K, L, seed):
    rng = np.random.default_rng(seed)
    ent = rng.standard_normal((L, K)) + 1j * rng.standard_normal((L, K))
    ent /= np.linalg.norm(ent, axis=0)
    return sd.SignatureMatrix(spread_length=L, user_count=K, entries=ent)


def identity_signature(n):
    return sd.SignatureMatrix(
        spread_length=n, user_count=n, entries=np.eye(n, dtype=complex)
    )


class TestGram:
    def test_identity(self):
        S = identity_signature(4)
        assert np.allclose(sd.gram(S), np.eye(4))

    def test_unit_diagonal_any_valid(self):
        S = random_signature(6, 3, seed=0)
        G = sd.gram(S)
        assert np.allclose(np.diag(G), 1.0, atol=1e-9)

    def test_matches_naive_double_loop(self):
        S = sd.generate(4, 2, sd.PiKind.TSC)
        G = sd.gram(S)
        assert np.allclose(G, naive_gram(S.entries), atol=1e-12)

    def test_hermitian(self):
        S = random_signature(5, 4, seed=3)
        G = sd.gram(S)
        assert np.allclose(G, G.conj().T)


class TestTsc:
    def test_identity_is_k(self):
        assert sd.tsc(identity_signature(4)) == pytest.approx(4.0)

    def test_wbe_set_meets_bound(self):
        S = sd.generate(4, 2, sd.PiKind.TSC)
        assert sd.tsc(S) == pytest.approx(8.0, abs=1e-9)
        assert sd.tsc(S) == pytest.approx(naive_tsc(S.entries), abs=1e-9)

    def test_single_column(self):
        S = sd.SignatureMatrix(1, 1, np.array([[1.0 + 0j]]))
        assert sd.tsc(S) == pytest.approx(1.0)


class TestWelchBound:
    @pytest.mark.parametrize("K,L,expected", [(4, 2, 8.0), (12, 6, 24.0), (7, 7, 7.0)])
    def test_values(self, K, L, expected):
        assert sd.welch_bound(K, L) == pytest.approx(expected)

    @pytest.mark.parametrize("K,L", [(0, 2), (2, 0), (-1, 3)])
    def test_rejects_nonpositive(self, K, L):
        with pytest.raises(sd.SeqDesignError):
            sd.welch_bound(K, L)


def _minimize_coherence_descent(K, L, seed, steps=4000, lr=0.05):
    # independent cross-check: projected gradient descent on sum of
    # softmax-weighted squared correlations, no shared code with generate()
    rng = np.random.default_rng(seed)
    S = rng.standard_normal((L, K)) + 1j * rng.standard_normal((L, K))
    S /= np.linalg.norm(S, axis=0)
    beta = 40.0
    for _ in range(steps):
        G = S.conj().T @ S
        R = np.abs(G) ** 2
        np.fill_diagonal(R, 0.0)
        w = np.exp(beta * (R - R.max()))
        np.fill_diagonal(w, 0.0)
        w /= w.sum()
        grad = 2 * S @ (w * G.conj()).T
        S = S - lr * grad
        S /= np.linalg.norm(S, axis=0)
    rho = np.abs(S.conj().T @ S)
    np.fill_diagonal(rho, 0.0)
    return rho.max()


class TestCoherence:
    def test_identity_zero(self):
        assert sd.coherence(identity_signature(3)) == 0.0

    def test_single_column_zero(self):
        S = sd.SignatureMatrix(2, 1, np.array([[1.0], [0.0]], dtype=complex))
        assert sd.coherence(S) == 0.0

    def test_equiangular_set_all_offdiagonals_equal_mu(self):
        # exact simplex frame: last 3 rows of the 4-point DFT, rescaled;
        # every off-diagonal correlation is 1/3 by construction
        k = np.arange(4)
        F = np.exp(-2j * np.pi * np.outer(np.arange(1, 4), k) / 4) / np.sqrt(3)
        S = sd.SignatureMatrix(3, 4, F)
        rho = np.abs(sd.gram(S))
        off = rho[~np.eye(4, dtype=bool)]
        assert np.all(np.abs(off - sd.coherence(S)) < 1e-6)

    def test_packed_set_nearly_equiangular(self):
        S = sd.generate(4, 3, sd.PiKind.COHERENCE, seed=0, iters=4000, tol=1e-3)
        rho = np.abs(sd.gram(S))
        off = rho[~np.eye(4, dtype=bool)]
        assert np.all(np.abs(off - sd.coherence(S)) < 1e-3)

    def test_grassmann_4_3_meets_lower_bound(self):
        S = sd.generate(4, 3, sd.PiKind.COHERENCE, seed=0, iters=4000, tol=1e-3)
        bound = np.sqrt((4 - 3) / (3 * (4 - 1)))
        assert sd.coherence(S) == pytest.approx(1 / 3, abs=1e-3)
        assert sd.coherence(S) >= bound - 1e-9
        # second, independent minimizer lands at the same packing value
        independent = _minimize_coherence_descent(4, 3, seed=7)
        assert independent == pytest.approx(sd.coherence(S), abs=5e-3)


class TestMinChordalDistance:
    def test_orthogonal_lines(self):
        S = identity_signature(2)
        assert sd.min_chordal_distance(S, [[0], [1]]) == pytest.approx(1.0)

    def test_identical_subspaces(self):
        ent = np.array([[1.0, 1.0], [0.0, 0.0]], dtype=complex)
        S = sd.SignatureMatrix(2, 2, ent)
        assert sd.min_chordal_distance(S, [[0], [1]]) == pytest.approx(0.0, abs=1e-9)

    def test_zero_correlated_pairs_are_farthest(self):
        # columns 0 and 1 orthogonal, 2 and 3 orthogonal, cross terms correlated
        e1 = np.array([1, 0, 0], dtype=complex)
        e2 = np.array([0, 1, 0], dtype=complex)
        c3 = np.array([1, 1, 1], dtype=complex) / np.sqrt(3)
        c4 = np.array([1, 1, -2], dtype=complex) / np.sqrt(6)
        S = sd.SignatureMatrix(3, 4, np.stack([e1, e2, c3, c4], axis=1))
        rho = np.abs(sd.gram(S))
        assert rho[0, 1] < 1e-12 and rho[2, 3] < 1e-12
        dist = {}
        for i in range(4):
            for j in range(i + 1, 4):
                dist[(i, j)] = sd.min_chordal_distance(S, [[i], [j]])
                # oracle: for lines, chordal distance is sin of the angle
                assert dist[(i, j)] == pytest.approx(
                    np.sqrt(1 - rho[i, j] ** 2), abs=1e-9
                )
        top = max(dist.values())
        assert dist[(0, 1)] == pytest.approx(top)
        assert dist[(2, 3)] == pytest.approx(top)

    def test_rejects_overlap_and_oversize(self):
        S = random_signature(4, 2, seed=1)
        with pytest.raises(sd.SeqDesignError):
            sd.min_chordal_distance(S, [[0, 1], [1, 2]])
        with pytest.raises(sd.SeqDesignError):
            sd.min_chordal_distance(S, [[0, 1, 2], [3]])


class TestGenerate:
    @pytest.mark.parametrize("K,L", [(4, 2), (6, 4), (8, 4), (12, 6)])
    def test_tsc_sets_meet_welch_bound_exactly(self, K, L):
        S = sd.generate(K, L, sd.PiKind.TSC)
        assert naive_tsc(S.entries) == pytest.approx(K * K / L, abs=1e-6)

    def test_square_case_orthonormal(self):
        S = sd.generate(5, 5, sd.PiKind.COHERENCE)
        assert sd.tsc(S) == pytest.approx(5.0, abs=1e-9)
        assert sd.coherence(S) == pytest.approx(0.0, abs=1e-9)

    def test_underloaded_warns(self):
        with pytest.warns(UserWarning, match="underloaded"):
            S = sd.generate(2, 4, sd.PiKind.TSC)
        assert sd.coherence(S) == pytest.approx(0.0, abs=1e-9)

    def test_deterministic_bitwise(self):
        a = sd.generate(6, 4, sd.PiKind.COHERENCE, seed=11, iters=500)
        b = sd.generate(6, 4, sd.PiKind.COHERENCE, seed=11, iters=500)
        assert np.array_equal(a.entries, b.entries)

    def test_chordal_pairs_have_zero_intra_correlation(self):
        S = sd.generate(6, 4, sd.PiKind.CHORDAL, seed=0, iters=200)
        rho = np.abs(sd.gram(S))
        for g in sd.chordal_partition(6, 2):
            assert rho[g[0], g[1]] < 1e-8


class TestInvariants:
    @pytest.mark.parametrize("seed", range(5))
    def test_tsc_never_below_welch_bound(self, seed):
        rng = np.random.default_rng(seed)
        K, L = int(rng.integers(2, 9)), int(rng.integers(1, 5))
        S = random_signature(K, L, seed + 100)
        assert sd.tsc(S) >= sd.welch_bound(K, L) - 1e-9

    @pytest.mark.parametrize("seed", range(3))
    def test_unitary_rotation_invariance(self, seed):
        S = sd.generate(6, 4, sd.PiKind.TSC)
        rng = np.random.default_rng(seed)
        Z = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        U, _ = np.linalg.qr(Z)
        rotated = sd.SignatureMatrix(4, 6, U @ S.entries)
        assert sd.tsc(rotated) == pytest.approx(sd.tsc(S), abs=1e-9)
        assert sd.coherence(rotated) == pytest.approx(sd.coherence(S), abs=1e-9)


class TestVerifyAndJson:
    def test_identity_report(self):
        r = sd.verify(identity_signature(4))
        assert r.tsc == pytest.approx(4.0)
        assert r.welch_bound == pytest.approx(4.0)
        assert r.wbe_gap == pytest.approx(0.0, abs=1e-9)
        assert r.mu == 0.0

    def test_wbe_gap_within_tol(self):
        r = sd.verify(sd.generate(4, 2, sd.PiKind.TSC))
        assert r.wbe_gap <= 1e-6
        assert r.wbe_gap >= -1e-9

    def test_report_consistent_with_direct_calls(self):
        S = random_signature(5, 3, seed=9)
        r = sd.verify(S)
        assert r.mu == sd.coherence(S)
        assert r.tsc == sd.tsc(S)
        assert np.allclose(np.diag(r.pairwise_rho), 1.0, atol=1e-9)
        assert np.allclose(r.pairwise_rho, r.pairwise_rho.T)

    def test_json_roundtrip_exact(self, tmp_path):
        S = sd.generate(6, 4, sd.PiKind.COHERENCE, seed=3, iters=300)
        path = tmp_path / "sig.json"
        sd.save(S, path)
        loaded = sd.load(path)
        assert np.array_equal(loaded.entries, S.entries)
        assert loaded.spread_length == S.spread_length
        assert loaded.user_count == S.user_count
        assert loaded.pi == S.pi
        # and the file itself is valid JSON with the documented fields
        d = json.loads(path.read_text())
        assert set(d) == {"L", "K", "pi", "seed", "entries"}
        assert len(d["entries"]) == 24

    def test_rejects_bad_norm(self):
        with pytest.raises(sd.SeqDesignError, match="norm"):
            sd.SignatureMatrix(2, 2, np.array([[2.0, 0], [0, 1.0]], dtype=complex))

    def test_rejects_malformed_entries(self):
        with pytest.raises(sd.SeqDesignError, match="entries"):
            sd.from_json_dict({"L": 2, "K": 2, "entries": [[1, 0]]})
