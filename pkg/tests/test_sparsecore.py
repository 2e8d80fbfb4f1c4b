import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_m_matrix, random_symmetric_pattern
from icbyblocks.sparsecore import (CsrMatrix, MatrixMarketError, Permutation, StructuralZeroError,
                                   extract_upper, grid_laplacian, load_matrix_market,
                                   permute_symmetric, write_matrix_market)


def write_text(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_symmetric_file_is_mirrored(tmp_path):
    p = write_text(tmp_path, "s.mtx", "%%MatrixMarket matrix coordinate real symmetric\n"
                                      "2 2 3\n1 1 4\n2 1 2\n2 2 3\n")
    m = load_matrix_market(p)
    assert m.nnz == 4
    np.testing.assert_array_equal(m.todense(), [[4, 2], [2, 3]])


def test_empty_pattern_file(tmp_path):
    p = write_text(tmp_path, "e.mtx", "%%MatrixMarket matrix coordinate pattern symmetric\n3 3 0\n")
    m = load_matrix_market(p)
    assert m.nrows == 3
    assert m.row_ptr.tolist() == [0, 0, 0, 0]


def test_pattern_values_and_duplicates(tmp_path):
    p = write_text(tmp_path, "d.mtx", "%%MatrixMarket matrix coordinate real general\n"
                                      "2 2 3\n1 1 1.5\n1 1 2.5\n2 2 1\n")
    m = load_matrix_market(p)
    np.testing.assert_array_equal(m.todense(), [[4.0, 0], [0, 1.0]])
    p = write_text(tmp_path, "p.mtx", "%%MatrixMarket matrix coordinate pattern general\n"
                                      "2 2 2\n1 2\n2 1\n")
    np.testing.assert_array_equal(load_matrix_market(p).todense(), [[0, 1], [1, 0]])


@pytest.mark.parametrize("text", [
    "%%MatrixMarket matrix coordinate complex general\n1 1 1\n1 1 1 0\n",
    "%%MatrixMarket matrix coordinate real general\n2 3 0\n",
    "this is not a matrix market file\n",
])
def test_bad_files_raise(tmp_path, text):
    with pytest.raises(MatrixMarketError):
        load_matrix_market(write_text(tmp_path, "bad.mtx", text))


def test_identity_round_trip(tmp_path):
    p = tmp_path / "i.mtx"
    write_matrix_market(CsrMatrix.identity(3), p)
    back = load_matrix_market(p)
    np.testing.assert_array_equal(back.todense(), np.eye(3))


def test_round_trip_is_exact(tmp_path, rng):
    a = random_m_matrix(40, 0.1, rng)
    a.values *= rng.uniform(0.3, 3.0, size=a.nnz) / 7.0  # awkward binary fractions
    p = tmp_path / "a.mtx"
    write_matrix_market(a, p)
    b = load_matrix_market(p)
    assert b.same_pattern(a)
    np.testing.assert_array_equal(b.values, a.values)


def test_round_trip_keeps_explicit_zeros(tmp_path):
    a = CsrMatrix(2, 2, [0, 2, 3], [0, 1, 1], [1.0, 0.0, 2.0])
    p = tmp_path / "z.mtx"
    write_matrix_market(a, p)
    assert load_matrix_market(p).nnz == 3


def test_write_factor_of_two_by_two(tmp_path):
    # dense Cholesky oracle: [[4,2],[2,3]] = U^T U with U = [[2,1],[0,sqrt 2]]
    ref = np.linalg.cholesky(np.array([[4.0, 2.0], [2.0, 3.0]])).T
    u = CsrMatrix(2, 2, [0, 2, 3], [0, 1, 1], [ref[0, 0], ref[0, 1], ref[1, 1]])
    p = tmp_path / "u.mtx"
    write_matrix_market(u, p)
    back = load_matrix_market(p).todense()
    np.testing.assert_allclose(back, [[2.0, 1.0], [0.0, np.sqrt(2.0)]], rtol=1e-15)


def test_permute_identity_and_reverse():
    a = grid_laplacian(3)
    same = permute_symmetric(a, Permutation.identity(9))
    assert same.same_pattern(a) and np.array_equal(same.values, a.values)
    d = CsrMatrix.from_dense(np.diag([1.0, 2.0, 3.0]))
    r = permute_symmetric(d, Permutation.from_perm([2, 1, 0]))
    np.testing.assert_array_equal(r.todense(), np.diag([3.0, 2.0, 1.0]))


def test_permute_matches_dense(rng):
    a = random_m_matrix(30, 0.15, rng)
    p = Permutation.from_perm(rng.permutation(30))
    b = permute_symmetric(a, p).validate()
    dense = a.todense()
    np.testing.assert_array_equal(b.todense(), dense[np.ix_(p.iperm, p.iperm)])


def test_permute_size_mismatch():
    with pytest.raises(ValueError):
        permute_symmetric(grid_laplacian(2), Permutation.identity(3))


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 40), seed=st.integers(0, 2**32 - 1))
def test_permute_inverse_round_trip(n, seed):
    rng = np.random.default_rng(seed)
    a = random_m_matrix(n, 0.2, rng)
    p = Permutation.from_perm(rng.permutation(n))
    b = permute_symmetric(a, p)
    assert b.nnz == a.nnz
    np.testing.assert_array_equal(np.sort(b.values), np.sort(a.values))
    back = permute_symmetric(b, p.inverse())
    assert back.same_pattern(a)
    np.testing.assert_array_equal(back.values, a.values)


def test_extract_upper_tridiagonal():
    t = CsrMatrix.from_dense(2 * np.eye(4) - np.eye(4, k=1) - np.eye(4, k=-1))
    u = extract_upper(t)
    assert u.nnz == 7
    assert np.all(u.col_idx >= u.row_indices())


def test_extract_upper_diagonal_unchanged():
    d = CsrMatrix.from_dense(np.diag([1.0, 5.0, 2.0]))
    u = extract_upper(d)
    assert u.same_pattern(d) and np.array_equal(u.values, d.values)


def test_extract_upper_missing_diagonal():
    a = CsrMatrix(3, 3, [0, 1, 3, 4], [0, 0, 2, 2], [1.0, 1.0, 1.0, 1.0])
    with pytest.raises(StructuralZeroError) as err:
        extract_upper(a)
    assert err.value.row == 1


@settings(max_examples=30, deadline=None)
@given(n=st.integers(1, 50), seed=st.integers(0, 2**32 - 1))
def test_upper_pattern_union_transpose(n, seed):
    a = random_symmetric_pattern(n, 0.1, np.random.default_rng(seed))
    u = extract_upper(a).pattern_set()
    assert u | {(j, i) for i, j in u} == a.pattern_set()


def test_validate_rejects_unsorted_rows():
    with pytest.raises(ValueError):
        CsrMatrix(2, 2, [0, 2, 2], [1, 0], [1.0, 1.0]).validate()
    with pytest.raises(ValueError):
        CsrMatrix(2, 2, [0, 1, 2], [0, 2], [1.0, 1.0]).validate()


def test_permutation_rejects_duplicates():
    with pytest.raises(ValueError, match="bijection"):
        Permutation.from_perm([0, 0, 1])
