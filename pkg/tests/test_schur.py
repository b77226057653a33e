"""Arrowhead Schur solver against dense oracles and hand eliminations."""

import numpy as np
import pytest
import scipy.sparse as sp

from gridipm import linalg, schur


def random_sym(rng, n, spread=(0.5, 2.0), signs=True):
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    vals = rng.uniform(*spread, n)
    if signs:
        vals *= rng.choice([-1.0, 1.0], n)
    return q @ np.diag(vals) @ q.T


def random_arrowhead(rng, dims, n_c, shuffle=True):
    """Dense arrowhead matrix in a scrambled ordering plus its labels."""
    n = sum(dims) + n_c
    m = np.zeros((n, n))
    labels = np.empty(n, dtype=int)
    off = 0
    for b, d in enumerate(dims):
        m[off:off + d, off:off + d] = random_sym(rng, d)
        border = rng.standard_normal((n_c, d))
        m[n - n_c:, off:off + d] = border
        m[off:off + d, n - n_c:] = border.T
        labels[off:off + d] = b
        off += d
    if n_c:
        m[n - n_c:, n - n_c:] = random_sym(rng, n_c)
    labels[n - n_c:] = schur.COUPLING
    if shuffle:
        perm = rng.permutation(n)
        m = m[np.ix_(perm, perm)]
        labels = labels[perm]
    rhs = rng.standard_normal(n)
    return m, labels, rhs


class TestPermute:
    def test_single_block_empty_coupling(self):
        rng = np.random.default_rng(0)
        m = random_sym(rng, 6)
        sys_ = schur.permute_to_arrowhead(sp.csc_matrix(m), np.zeros(6, dtype=int))
        assert sys_.n_blocks == 1
        assert sys_.n_coupling == 0
        assert np.allclose(sys_.a_blocks[0].toarray(), m)

    def test_cross_block_entry_rejected(self):
        m = np.eye(4)
        m[0, 2] = m[2, 0] = 1.0   # links block 0 and block 1
        labels = np.array([0, 0, 1, 1])
        with pytest.raises(schur.StructureViolation) as exc:
            schur.permute_to_arrowhead(sp.csc_matrix(m), labels)
        assert "block 0" in str(exc.value) and "block 1" in str(exc.value)

    def test_blocks_reassemble_exactly(self):
        rng = np.random.default_rng(1)
        m, labels, _ = random_arrowhead(rng, [3, 4, 2], 3)
        sys_ = schur.permute_to_arrowhead(sp.csc_matrix(m), labels)
        rebuilt = np.zeros_like(m)
        for idx, a, b in zip(sys_.block_indices, sys_.a_blocks, sys_.borders):
            rebuilt[np.ix_(idx, idx)] = a.toarray()
            rebuilt[np.ix_(sys_.coupling_indices, idx)] = b.toarray()
            rebuilt[np.ix_(idx, sys_.coupling_indices)] = b.toarray().T
        cp = sys_.coupling_indices
        rebuilt[np.ix_(cp, cp)] = sys_.c_block.toarray()
        assert np.array_equal(rebuilt, m)


class TestLocalContribution:
    def test_zero_border(self):
        a = np.diag([2.0, 3.0])
        s = schur.local_contribution(a, np.zeros((2, 2)))
        assert np.array_equal(s, np.zeros((2, 2)))

    def test_identity(self):
        s = schur.local_contribution(np.eye(3), np.eye(3))
        assert np.allclose(s, np.eye(3))

    def test_modes_agree(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            a = random_sym(rng, 7)
            b = rng.standard_normal((4, 7))
            b[rng.integers(0, 4)] = 0.0   # a zero border row must be skipped
            s1 = schur.local_contribution(a, b, "backsolve")
            s2 = schur.local_contribution(a, b, "augmented")
            assert np.abs(s1 - s2).max() < 1e-10


class TestSolve:
    def test_scalar_hand_example(self):
        m = sp.csc_matrix(np.array([[2.0, 1.0], [1.0, 3.0]]))
        labels = np.array([0, schur.COUPLING])
        sys_ = schur.permute_to_arrowhead(m, labels, rhs=np.array([2.0, 3.0]))
        fac = schur.factorize_arrowhead(sys_)
        assert fac.s_dense.shape == (1, 1)
        assert fac.s_dense[0, 0] == 2.5
        du = fac.solve()
        assert np.allclose(du, [0.6, 0.8])
        assert fac.inertia == (2, 0, 0)

    def test_zero_borders_decouple(self):
        rng = np.random.default_rng(3)
        a = random_sym(rng, 4, signs=False)
        c = random_sym(rng, 2, signs=False)
        m = np.zeros((6, 6))
        m[:4, :4] = a
        m[4:, 4:] = c
        labels = np.array([0, 0, 0, 0, -1, -1])
        rhs = rng.standard_normal(6)
        sys_ = schur.permute_to_arrowhead(sp.csc_matrix(m), labels, rhs=rhs)
        fac = schur.factorize_arrowhead(sys_)
        du = fac.solve()
        assert np.allclose(du[4:], np.linalg.solve(c, rhs[4:]), atol=1e-12)
        assert np.allclose(du[:4], np.linalg.solve(a, rhs[:4]), atol=1e-12)

    def test_random_four_blocks_match_dense(self):
        rng = np.random.default_rng(4)
        m, labels, rhs = random_arrowhead(rng, [12, 12, 12, 12], 5)
        sys_ = schur.permute_to_arrowhead(sp.csc_matrix(m), labels, rhs=rhs)
        du = schur.solve(sys_)
        ref = np.linalg.solve(m, rhs)
        assert np.abs(du - ref).max() / np.abs(ref).max() < 1e-9

    def test_residual_reported_small(self):
        rng = np.random.default_rng(5)
        m, labels, rhs = random_arrowhead(rng, [6, 7], 3)
        sys_ = schur.permute_to_arrowhead(sp.csc_matrix(m), labels, rhs=rhs)
        fac = schur.factorize_arrowhead(sys_)
        fac.solve()
        assert fac.last_residual <= 1e-9 * (1.0 + np.abs(rhs).max())

    def test_worker_count_bitwise_independence(self):
        rng = np.random.default_rng(6)
        m, labels, rhs = random_arrowhead(rng, [9, 8, 10, 7, 9, 8, 11, 6], 6)
        m_sp = sp.csc_matrix(m)
        baseline_s = None
        baseline_du = None
        for p in (1, 2, 4, 8):
            sys_ = schur.permute_to_arrowhead(m_sp, labels, rhs=rhs)
            part = schur.Partition.default(sys_.n_blocks, p)
            fac = schur.factorize_arrowhead(sys_, part)
            du = fac.solve()
            if baseline_s is None:
                baseline_s = fac.s_dense.tobytes()
                baseline_du = du.tobytes()
                checksum = fac.s_checksum
            else:
                assert fac.s_dense.tobytes() == baseline_s
                assert du.tobytes() == baseline_du
                assert fac.s_checksum == checksum

    def test_mem_save_matches_default(self):
        rng = np.random.default_rng(7)
        m, labels, rhs = random_arrowhead(rng, [8, 9, 7], 4)
        sys_ = schur.permute_to_arrowhead(sp.csc_matrix(m), labels, rhs=rhs)
        du_keep = schur.factorize_arrowhead(sys_, mem_save=False).solve()
        fac_mem = schur.factorize_arrowhead(sys_, mem_save=True)
        assert fac_mem.block_factors is None
        du_mem = fac_mem.solve()
        assert du_mem.tobytes() == du_keep.tobytes()

    def test_augmented_mode_matches_backsolve(self):
        rng = np.random.default_rng(8)
        m, labels, rhs = random_arrowhead(rng, [10, 9, 8], 5)
        sys_ = schur.permute_to_arrowhead(sp.csc_matrix(m), labels, rhs=rhs)
        f1 = schur.factorize_arrowhead(sys_, sc_mode="backsolve")
        f2 = schur.factorize_arrowhead(sys_, sc_mode="augmented")
        assert np.abs(f1.s_dense - f2.s_dense).max() < 1e-10
        ref = np.linalg.solve(m, rhs)
        assert np.abs(f2.solve() - ref).max() / np.abs(ref).max() < 1e-9

    def test_coupling_size_independence(self):
        rng = np.random.default_rng(9)
        for n_blocks in (2, 7, 23, 64):
            dims = [3] * n_blocks
            m, labels, rhs = random_arrowhead(rng, dims, 4, shuffle=False)
            sys_ = schur.permute_to_arrowhead(sp.csc_matrix(m), labels)
            fac = schur.factorize_arrowhead(sys_)
            assert fac.s_dense.shape == (4, 4)

    def test_singular_block_named(self):
        m = np.zeros((3, 3))
        m[0, 0] = 1.0
        # block 1 (index 1) is exactly singular
        m[2, 2] = 2.0
        labels = np.array([0, 1, schur.COUPLING])
        m[2, 0] = m[0, 2] = 0.5
        m[2, 1] = m[1, 2] = 0.5
        sys_ = schur.permute_to_arrowhead(sp.csc_matrix(m), labels)
        with pytest.raises(schur.SingularBlockError) as exc:
            schur.factorize_arrowhead(sys_)
        assert exc.value.block == 1

    def test_singular_schur_complement(self):
        m = np.array([[1.0, 1.0], [1.0, 1.0]])
        labels = np.array([0, schur.COUPLING])
        sys_ = schur.permute_to_arrowhead(sp.csc_matrix(m), labels)
        with pytest.raises(schur.SingularScError):
            schur.factorize_arrowhead(sys_)

    def test_timing_phases_present(self):
        rng = np.random.default_rng(10)
        m, labels, rhs = random_arrowhead(rng, [5, 5], 2)
        sys_ = schur.permute_to_arrowhead(sp.csc_matrix(m), labels, rhs=rhs)
        fac = schur.factorize_arrowhead(sys_)
        fac.solve()
        assert set(fac.timings) == set(schur.PHASES)
        assert all(v >= 0.0 for v in fac.timings.values())


class TestInertia:
    def test_identity_blocks(self):
        n = 6
        m = np.eye(n)
        labels = np.array([0, 0, 1, 1, -1, -1])
        sys_ = schur.permute_to_arrowhead(sp.csc_matrix(m), labels)
        fac = schur.factorize_arrowhead(sys_)
        assert schur.inertia_of(sys_, fac.block_inertias, fac.s_factor) == (n, 0, 0)

    def test_matches_eigenvalue_oracle(self):
        rng = np.random.default_rng(11)
        for trial in range(10):
            m, labels, _ = random_arrowhead(rng, [4, 5, 3], 3)
            sys_ = schur.permute_to_arrowhead(sp.csc_matrix(m), labels)
            fac = schur.factorize_arrowhead(sys_)
            vals = np.linalg.eigvalsh(m)
            tol = 1e-10 * max(1.0, np.abs(vals).max())
            ref = (int((vals > tol).sum()), int((vals < -tol).sum()),
                   int((np.abs(vals) <= tol).sum()))
            assert fac.inertia == ref, f"trial {trial}"


class TestPartition:
    def test_default_balanced(self):
        part = schur.Partition.default(10, 4)
        sizes = [len(a) for a in part.assignment]
        assert max(sizes) - min(sizes) <= 1
        part.validate(10)

    def test_bad_cover_rejected(self):
        part = schur.Partition(2, [[0, 1], [1, 2]])
        with pytest.raises(ValueError):
            part.validate(3)


class TestBlockMap:
    def _reduced(self, kept):
        class R:
            pass
        r = R()
        r.kept = np.asarray(kept, dtype=int)
        return r

    def test_slacks_inherit_row_labels(self):
        bm = schur.BlockMap(x_labels=[0, 0, 1, 1], eq_labels=[0, 1],
                            ineq_labels=[0, 1, 1], n_blocks=2)
        labels = bm.reduced_labels(self._reduced([0, 2]))
        assert labels.tolist() == [0, 0, 1, 1, 0, 1, 0, 1, 1, 0, 1]

    def test_slack_labels_override(self):
        # A row whose multiplier couples the blocks can still own a
        # slack that belongs to one block only.
        bm = schur.BlockMap(x_labels=[0, 1], eq_labels=[],
                            ineq_labels=[schur.COUPLING, schur.COUPLING],
                            n_blocks=2, slack_labels=[0, 1])
        labels = bm.reduced_labels(self._reduced([0, 1]))
        assert labels.tolist() == [0, 1, -1, -1, 0, 1]

    def test_slack_labels_length_checked(self):
        with pytest.raises(ValueError):
            schur.BlockMap(x_labels=[0], eq_labels=[], ineq_labels=[0, 1],
                           n_blocks=2, slack_labels=[0])
