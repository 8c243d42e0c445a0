
import numpy as np
import pytest

from momext import linalg
from momext.errors import MissingMoment, OrderTooSmall, ParseError
from momext.moment import (
    HermitianPoly,
    MomentSequence,
    classify_structure,
    enumerate_indices,
    hankel_matrix,
    hyponormality_block,
    localizing_matrix,
    moment_matrix,
    read_sequence,
    sequence_to_text,
    write_sequence,
)

import paperdata as pd


class TestEnumerateIndices:
    def test_univariate(self):
        assert enumerate_indices(1, 2) == [(0,), (1,), (2,)]

    def test_bivariate_matches_table_headers(self):
        # 1, z1, z2, z1^2, z1 z2, z2^2
        assert enumerate_indices(2, 2) == [
            (0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)
        ]

    def test_count(self):
        assert len(enumerate_indices(3, 2)) == 10


class TestMomentMatrix:
    def test_example5_entry(self):
        m = moment_matrix(pd.ex5_seq(3), 3)
        assert m.matrix.shape == (4, 4)
        # row conj(z), column z^2
        assert abs(m.matrix[1, 2] - pd.EX5_M3_ENTRY_ZBAR_Z2) < 1e-4

    def test_dirac_at_one(self):
        seq = pd.brute_moments_paired([(1.0,)], [1.0], n=1, d=2)
        m = moment_matrix(seq, 2).matrix
        np.testing.assert_allclose(m, np.ones((3, 3)), atol=1e-14)

    def test_matches_gram_oracle(self):
        # oracle: V^* diag(w) V with V the monomial Vandermonde of the atoms
        rng = np.random.default_rng(8)
        atoms = [tuple(rng.standard_normal(2) + 1j * rng.standard_normal(2))
                 for _ in range(3)]
        weights = rng.uniform(0.2, 1.0, 3)
        seq = pd.brute_moments_paired(atoms, weights, n=2, d=2)
        labels = enumerate_indices(2, 2)
        v = np.array([[np.prod(np.asarray(z) ** np.asarray(a)) for a in labels]
                      for z in atoms])
        gram = v.conj().T * 0
        gram = v.T.conj() @ np.diag(weights) @ v
        gram = (v.T * weights) @ v.conj()
        # direct double-check path: entry = sum w conj(z)^a z^b
        m = moment_matrix(seq, 2).matrix
        ref = np.array([[sum(w * np.prod(np.conj(np.asarray(z)) ** np.asarray(a))
                             * np.prod(np.asarray(z) ** np.asarray(b))
                             for z, w in zip(atoms, weights))
                         for b in labels] for a in labels])
        np.testing.assert_allclose(m, ref, atol=1e-12)

    def test_missing_moment(self):
        seq = MomentSequence(n=1, d=2, mode="paired", values={((0,), (0,)): 1.0})
        with pytest.raises(MissingMoment):
            moment_matrix(seq, 1)


class TestLocalizingMatrix:
    def test_constant_one_gives_moment_matrix(self):
        seq = pd.ex5_seq(3)
        one = HermitianPoly(1, {((0,), (0,)): 1.0})
        loc = localizing_matrix(seq, one, 2)
        np.testing.assert_allclose(loc.matrix, moment_matrix(seq, 2).matrix)

    def test_example1_ball_localizer_negative(self):
        # M_1[(R^2-|z|^2) y] for the rank-one fixture with R^2 = 4:
        # [[3, 2], [2, 0]], eigenvalues {-1, 4}; one is negative for every R
        seq = pd.ex1_seq()
        g = HermitianPoly(1, {((0,), (0,)): 4.0, ((1,), (1,)): -1.0})
        loc = localizing_matrix(seq, g, 2)
        np.testing.assert_allclose(loc.matrix.real, [[3.0, 2.0], [2.0, 0.0]], atol=1e-12)
        vals, _ = linalg.hermitian_eig(loc.matrix)
        np.testing.assert_allclose(vals, [-1.0, 4.0], atol=1e-12)

    def test_positive_on_atoms_is_psd(self):
        # Theorem direction: g(atom) > 0 for all atoms makes the localizer PSD
        rng = np.random.default_rng(4)
        atoms = [tuple(0.5 * (rng.standard_normal(2) + 1j * rng.standard_normal(2)))
                 for _ in range(3)]
        weights = rng.uniform(0.2, 1.0, 3)
        seq = pd.brute_moments_paired(atoms, weights, n=2, d=2)
        # g = 9 - |z1|^2 - |z2|^2 is positive on the unit-ball-ish atoms
        g = HermitianPoly(2, {((0, 0), (0, 0)): 9.0,
                              ((1, 0), (1, 0)): -1.0,
                              ((0, 1), (0, 1)): -1.0})
        loc = localizing_matrix(seq, g, 2)
        vals, _ = linalg.hermitian_eig(loc.matrix, tol=1e-8)
        assert vals[0] >= -1e-9 * max(1.0, vals[-1])

    def test_order_too_small(self):
        seq = pd.ex1_seq()
        g = HermitianPoly(1, {((3,), (0,)): 0.5, ((0,), (3,)): 0.5})
        with pytest.raises(OrderTooSmall):
            localizing_matrix(seq, g, 2)


class TestHankelMatrix:
    def test_example7_corner(self):
        from momext.interp import sample_grid

        h = hankel_matrix(sample_grid(pd.ex7_model(), 2), 2)
        assert abs(h.matrix[1, 1] - pd.EX7_H2_ENTRY_00 * 0 - h.matrix[0, 3]) < 1e-12
        assert abs(h.matrix[0, 0] - pd.EX7_H2_ENTRY_00) < 1e-4

    def test_constant_signal(self):
        seq = MomentSequence(n=1, d=1, mode="hankel",
                             values={(0,): 1.0, (1,): 1.0, (2,): 1.0})
        h = hankel_matrix(seq, 1).matrix
        np.testing.assert_allclose(h, np.ones((2, 2)))
        assert np.linalg.matrix_rank(h) == 1

    def test_vandermonde_gram_oracle(self):
        # oracle: H_d(y) = V^T diag(w) V with V the node Vandermonde
        rng = np.random.default_rng(9)
        nodes = [tuple(np.exp(rng.standard_normal(2) * 0.2
                              + 1j * rng.uniform(-2, 2, 2))) for _ in range(2)]
        w = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        seq = pd.brute_moments_hankel(nodes, w, n=2, d=2)
        labels = enumerate_indices(2, 2)
        v = np.array([[np.prod(np.asarray(z) ** np.asarray(a)) for a in labels]
                      for z in nodes])
        np.testing.assert_allclose(hankel_matrix(seq, 2).matrix,
                                   v.T @ np.diag(w) @ v, atol=1e-12)
        assert np.linalg.norm(hankel_matrix(seq, 2).matrix
                              - hankel_matrix(seq, 2).matrix.T) == 0.0


class TestClassifyStructure:
    def test_example5_toeplitz(self):
        flags = classify_structure(moment_matrix(pd.ex5_seq(3), 3))
        assert flags.hermitian and flags.toeplitz and not flags.hankel

    def test_example6_hankel(self):
        flags = classify_structure(moment_matrix(pd.ex6_seq(), 2))
        assert flags.hermitian and flags.hankel and not flags.toeplitz

    def test_example2_neither(self):
        flags = classify_structure(moment_matrix(pd.ex2_seq(), 2), tol=1e-3)
        assert flags.hermitian and not flags.hankel and not flags.toeplitz

    def test_toeplitz_hermitian_diagonal_constant_real(self):
        m = moment_matrix(pd.ex5_seq(3), 3).matrix
        d = np.diag(m)
        assert np.allclose(d, d[0]) and np.allclose(d.imag, 0.0)


class TestHyponormalityBlock:
    def test_example3_spectrum(self):
        blk = hyponormality_block(pd.ex3_seq(), dk=2, i=1, j=2)
        assert blk.matrix.shape == (9, 9)
        vals, _ = linalg.hermitian_eig((blk.matrix + blk.matrix.conj().T) / 2,
                                       tol=np.inf)
        assert vals[0] > -5e-4
        np.testing.assert_allclose(vals[-2:], pd.EX3_DATA_SPECTRUM_TOP, atol=1e-3)

    def test_example2_spectrum(self):
        blk = hyponormality_block(pd.ex2_seq(), dk=1, i=1, j=2)
        vals, _ = linalg.hermitian_eig((blk.matrix + blk.matrix.conj().T) / 2,
                                       tol=np.inf)
        np.testing.assert_allclose(vals, pd.EX2_DATA_SPECTRUM, atol=1e-3)

    def test_univariate_dirac_rank_one_psd(self):
        c = 0.7 - 0.3j
        seq = pd.brute_moments_paired([(c,)], [1.3], n=1, d=2)
        blk = hyponormality_block(seq, dk=1, i=1, j=1)
        vals, _ = linalg.hermitian_eig(blk.matrix, tol=1e-8)
        assert vals[0] >= -1e-12
        assert linalg.numeric_rank(vals, 1e-10) == 1

    def test_measure_data_always_psd(self):
        rng = np.random.default_rng(12)
        for n in (2, 3):
            atoms = [tuple(rng.standard_normal(n) + 1j * rng.standard_normal(n))
                     for _ in range(3)]
            weights = rng.uniform(0.1, 1.0, 3)
            seq = pd.brute_moments_paired(atoms, weights, n=n, d=2)
            for i in range(1, n + 1):
                for j in range(i + 1, n + 1):
                    blk = hyponormality_block(seq, 1, i, j).matrix
                    vals, _ = linalg.hermitian_eig((blk + blk.conj().T) / 2,
                                                   tol=1e-8)
                    assert vals[0] >= -1e-9 * max(1.0, abs(vals).max())

    def test_gap_too_large(self):
        with pytest.raises(OrderTooSmall):
            hyponormality_block(pd.ex1_seq(), dk=3, i=1, j=1)


class TestSequenceIO:
    def test_round_trip_bit_faithful(self):
        seq = pd.ex3_seq()
        text = sequence_to_text(seq)
        back = read_sequence(text)
        assert back.n == seq.n and back.d == seq.d and back.mode == seq.mode
        assert set(back.values) == set(seq.values)
        for k, v in seq.values.items():
            assert complex(back.values[k]) == complex(v)
        # writer is deterministic
        assert sequence_to_text(back) == text

    def test_hankel_round_trip(self):
        from momext.interp import sample_grid

        seq = sample_grid(pd.ex7_model(), 2)
        back = read_sequence(sequence_to_text(seq))
        for k, v in seq.values.items():
            assert complex(back.values[k]) == complex(v)

    def test_file_round_trip(self, tmp_path):
        path = str(tmp_path / "seq.momseq")
        write_sequence(pd.ex1_seq(), path)
        back = read_sequence(path)
        assert complex(back.values[((2,), (2,))]) == 4.0

    def test_parse_errors(self):
        with pytest.raises(ParseError):
            read_sequence("mode paired\nn 1\nd 1\ny 0 0 1 0\n")  # missing header
        with pytest.raises(ParseError):
            read_sequence("momseq 1\nmode paired\nn 1\nd 1\ny 0 0 xx 0\n")
        with pytest.raises(ParseError):
            read_sequence("momseq 2\nmode paired\nn 1\nd 0\n")

    def test_parse_rejects_degenerate_headers_and_values(self):
        for text in (
            "momseq 1\nmode\nn 1\nd 0\n",                      # truncated field
            "momseq 1\nmode sideways\nn 1\nd 0\n",             # unknown mode
            "momseq 1\nmode paired\nn 0\nd 0\n",               # n < 1
            "momseq 1\nmode paired\nn 1\nd 0\ny 0 0 nan 0\n",  # non-finite
            "momseq 1\nmode paired\nn 1\nd 0\ny 0 0 1 inf\n",
        ):
            with pytest.raises(ParseError):
                read_sequence(text)

    def test_hermitian_check(self):
        assert pd.ex3_seq().is_hermitian(1e-9)
        bad = MomentSequence(n=1, d=0, mode="paired",
                             values={((0,), (0,)): 1.0 + 0.5j})
        assert not bad.is_hermitian(1e-9)
