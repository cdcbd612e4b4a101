import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gmimo.errors import NotPositiveDefinite
from gmimo.matrix_core import (
    RngStream,
    extreme_eigs,
    format_complex,
    generalized_eigvalsh,
    gram,
    hermitian,
    logdet_hpd,
    parse_complex,
    read_cmat,
    sample_standard_complex_gaussian,
    solve_hpd,
    trace_prod,
    write_cmat,
)

from conftest import random_hpd

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


@st.composite
def complex_matrices(draw, max_rows=5, max_cols=6):
    r = draw(st.integers(1, max_rows))
    c = draw(st.integers(1, max_cols))
    re = draw(arrays(np.float64, (r, c), elements=finite))
    im = draw(arrays(np.float64, (r, c), elements=finite))
    return re + 1j * im


def test_gram_identity_and_row():
    np.testing.assert_array_equal(gram(np.eye(2)), np.eye(2))
    np.testing.assert_allclose(gram([[1 + 1j, 0]]), [[2]])


def test_gram_matches_triple_loop(rng):
    A = rng.standard_normal((3, 5)) + 1j * rng.standard_normal((3, 5))
    expected = np.zeros((3, 3), dtype=complex)
    for i in range(3):
        for j in range(3):
            for k in range(5):
                expected[i, j] += A[i, k] * np.conj(A[j, k])
    np.testing.assert_allclose(gram(A), expected, atol=1e-13)


@given(complex_matrices())
def test_gram_is_hermitian(A):
    S = gram(A)
    np.testing.assert_array_equal(S, S.conj().T)
    hermitian(S)


@given(complex_matrices())
def test_logdet_of_gram_plus_identity_nonnegative(A):
    assert logdet_hpd(gram(A) + np.eye(A.shape[0])) >= -1e-12


def test_logdet_simple_cases():
    assert logdet_hpd(np.eye(4)) == 0.0
    assert logdet_hpd(np.diag([2.0, 3.0])) == pytest.approx(math.log(6), abs=1e-15)


def test_logdet_matches_eigendecomposition(rng):
    for _ in range(10):
        S = random_hpd(rng, 6, shift=1.0)
        w = np.linalg.eigvalsh(S)
        assert abs(logdet_hpd(S) - np.sum(np.log(w))) <= 1e-10


@settings(max_examples=50)
@given(st.floats(1e-3, 1e3), st.integers(0, 2**32 - 1))
def test_logdet_scaling(c, seed):
    S = random_hpd(np.random.default_rng(seed), 4, shift=0.5)
    assert logdet_hpd(c * S) == pytest.approx(4 * math.log(c) + logdet_hpd(S), abs=1e-10)


def test_logdet_rejects_singular():
    with pytest.raises(NotPositiveDefinite):
        logdet_hpd(np.diag([1.0, 0.0]))
    # rank-deficient sample covariance (M < N)
    Y = np.random.default_rng(0).standard_normal((4, 2))
    with pytest.raises(NotPositiveDefinite):
        logdet_hpd(gram(Y) / 2)


def test_solve_hpd():
    B = np.array([[1 + 2j, 3], [4, 5j]])
    np.testing.assert_array_equal(solve_hpd(np.eye(2), B), B)
    np.testing.assert_allclose(solve_hpd(np.diag([2.0, 4.0]), [[2], [4]]), [[1], [1]])


def test_solve_hpd_residual(rng):
    for _ in range(10):
        S = random_hpd(rng, 7)
        B = rng.standard_normal((7, 3)) + 1j * rng.standard_normal((7, 3))
        X = solve_hpd(S, B)
        assert np.linalg.norm(S @ X - B) <= 1e-9 * np.linalg.norm(B)
    with pytest.raises(ValueError):
        solve_hpd(np.eye(2), np.ones((3, 1)))


def test_trace_prod_cases(rng):
    assert trace_prod(np.eye(3), np.eye(3)) == 3
    assert trace_prod([[0, 1], [0, 0]], [[0, 0], [1, 0]]) == 1
    A = rng.standard_normal((4, 6)) + 1j * rng.standard_normal((4, 6))
    B = rng.standard_normal((6, 4)) + 1j * rng.standard_normal((6, 4))
    tol = 1e-12 * np.linalg.norm(A) * np.linalg.norm(B)
    assert abs(trace_prod(A, B) - np.trace(A @ B)) <= tol
    assert abs(trace_prod(A, B) - trace_prod(B, A)) <= tol
    with pytest.raises(ValueError):
        trace_prod(A, A)


def test_extreme_eigs(rng):
    assert extreme_eigs(np.eye(5)) == pytest.approx((1, 1))
    assert extreme_eigs(np.diag([0.5, 2, 7])) == pytest.approx((0.5, 7), rel=1e-8)
    S = random_hpd(rng, 6)
    lo, hi = extreme_eigs(S)
    for _ in range(100):
        v = rng.standard_normal(6) + 1j * rng.standard_normal(6)
        q = (v.conj() @ S @ v).real / (v.conj() @ v).real
        assert lo - 1e-12 <= q <= hi + 1e-12


def test_hermitian_rejects_asymmetric():
    with pytest.raises(ValueError):
        hermitian([[1, 2], [0, 1]])
    with pytest.raises(ValueError):
        hermitian([[1, 0], [0, np.nan]])


def test_generalized_eigvalsh_matches_dense(rng):
    S = random_hpd(rng, 5)
    A = gram(rng.standard_normal((5, 3)) + 0j)
    mu, ld = generalized_eigvalsh(A, S)
    ref = np.sort(np.linalg.eigvals(A @ np.linalg.inv(S)).real)
    np.testing.assert_allclose(mu, ref, atol=1e-10)
    assert ld == pytest.approx(logdet_hpd(S), abs=1e-12)


def test_complex_gaussian_moments():
    Z = sample_standard_complex_gaussian(1000, 1000, RngStream(7, 0))
    assert np.mean(np.abs(Z) ** 2) == pytest.approx(1.0, abs=0.005)
    assert abs(Z.real.mean()) < 0.005 and abs(Z.imag.mean()) < 0.005
    assert np.var(Z.real) == pytest.approx(0.5, abs=0.005)


def test_rng_stream_determinism():
    a = sample_standard_complex_gaussian(3, 4, RngStream(11, 5))
    b = sample_standard_complex_gaussian(3, 4, RngStream(11, 5))
    c = sample_standard_complex_gaussian(3, 4, RngStream(11, 6))
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)
    s = RngStream(11, 5)
    first = sample_standard_complex_gaussian(3, 4, s)
    second = sample_standard_complex_gaussian(3, 4, s)
    assert not np.array_equal(first, second)


def test_complex_format_roundtrip():
    for z in [1.5 - 0.25j, complex(-0.0, -0.0), 1e-300 + 3e300j, complex(math.pi, -math.e)]:
        s = format_complex(z)
        back = parse_complex(s)
        assert back == z
        assert math.copysign(1, back.imag) == math.copysign(1, z.imag)
    assert format_complex(1.5 - 0.25j) == "1.5-0.25i"
    assert parse_complex("1.5e-3+2E2i") == 0.0015 + 200j
    with pytest.raises(ValueError):
        parse_complex("1.5+2j")


def test_cmat_file_roundtrip(tmp_path, rng):
    A = rng.standard_normal((3, 4)) + 1j * rng.standard_normal((3, 4))
    write_cmat(tmp_path / "a.cmat", A)
    text = (tmp_path / "a.cmat").read_text()
    assert text.splitlines()[0] == "3 4 complex"
    np.testing.assert_array_equal(read_cmat(tmp_path / "a.cmat"), A)
    (tmp_path / "bad.cmat").write_text("2 2 complex\n1+0i 2+0i\n")
    with pytest.raises(ValueError):
        read_cmat(tmp_path / "bad.cmat")
