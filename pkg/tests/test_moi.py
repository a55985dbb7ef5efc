import math

import numpy as np
import pytest
import scipy.linalg

from frechet_moi.errors import BudgetExceededError, DimensionMismatchError, OrderExceededError
from frechet_moi.moi import (
    DividedDifferenceCache,
    MoiRequest,
    moi_evaluate,
    moi_symmetrized,
    taylor_remainder,
)
from frechet_moi.scalar_fn import builtin, sup_norm
from frechet_moi.spectral import apply_function, decompose, random_hermitian, schatten_norm

from conftest import ordered_word_sum, rel_fro


def evaluate(f, n, A, Xs, bases=None):
    S = decompose(A)
    return moi_evaluate(MoiRequest(f, n, bases or [S] * (n + 1), Xs))


class TestMoiEvaluate:
    def test_square_first_order(self):
        A = random_hermitian(1, 5)
        X = random_hermitian(2, 5)
        out = evaluate(builtin("monomial", degree=2), 1, A, [X]).value
        assert rel_fro(out, A @ X + X @ A) < 1e-10

    def test_exp_two_by_two(self):
        A = np.diag([0.0, math.log(2)])
        X = np.array([[0.0, 1.0], [1.0, 0.0]])
        res = evaluate(builtin("exp"), 1, A, [X])
        assert res.value[0, 1] == pytest.approx(1 / math.log(2), rel=1e-12)
        assert res.value[1, 0] == pytest.approx(1 / math.log(2), rel=1e-12)
        assert res.value[0, 0] == 0 and res.value[1, 1] == 0
        # finite-difference oracle on the matrix exponential
        h = 1e-5
        fd = (scipy.linalg.expm(A + h * X) - scipy.linalg.expm(A - h * X)) / (2 * h)
        np.testing.assert_allclose(res.value, fd, atol=1e-9)
        assert res.tuple_count == 4

    def test_commuting(self):
        U = scipy.linalg.qr(np.random.default_rng(3).standard_normal((5, 5)))[0]
        A = U @ np.diag([0.1, -0.7, 1.3, 2.0, -2.2]) @ U.T
        X = U @ np.diag([1.0, 2.0, -1.0, 0.5, 0.0]) @ U.T
        for name in ("sin", "lorentzian", "exp"):
            f = builtin(name)
            out = evaluate(f, 1, A, [X]).value
            fprime = U @ np.diag(f.eval(1, np.array([0.1, -0.7, 1.3, 2.0, -2.2]))) @ U.T
            assert rel_fro(out, fprime @ X) < 1e-9

    @pytest.mark.parametrize("m,n", [(2, 1), (3, 1), (3, 2), (4, 2), (4, 3), (5, 4)])
    def test_ordered_polynomial_expansion(self, m, n):
        A = random_hermitian(10 + m, 4)
        Xs = [random_hermitian(20 + j, 4) for j in range(n)]
        out = evaluate(builtin("monomial", degree=m), n, A, Xs).value
        assert rel_fro(out, ordered_word_sum(A, Xs, m)) < 1e-10

    def test_polynomial_collapse(self):
        A = random_hermitian(4, 5)
        Xs = [random_hermitian(5 + j, 5) for j in range(3)]
        out = evaluate(builtin("monomial", degree=3), 3, A, Xs).value
        assert np.max(np.abs(out - Xs[0] @ Xs[1] @ Xs[2])) < 1e-12
        zero = evaluate(builtin("monomial", degree=2), 3, A, Xs).value
        assert np.max(np.abs(zero)) < 1e-12

    def test_tuple_count_and_cache(self):
        A = np.diag([1.0, 1.0, 2.0, 3.0])
        S = decompose(A)
        X = random_hermitian(1, 4)
        res = moi_evaluate(MoiRequest(builtin("sin"), 2, [S] * 3, [X, X]))
        assert res.tuple_count == 27
        # 27 tuples but only C(3 + 2, 3) = 10 multisets of cluster values
        assert res.diagnostics["dd_evaluations"] == 10
        assert res.dd_cache_hits == 17

    def test_distinct_bases(self):
        A = random_hermitian(1, 4)
        B = random_hermitian(2, 4)
        f = builtin("lorentzian")
        res = moi_evaluate(MoiRequest(f, 1, [decompose(B), decompose(A)], [B - A]))
        assert rel_fro(res.value, apply_function(f, B) - apply_function(f, A)) < 1e-10

    def test_errors(self):
        S = decompose(np.eye(3))
        X = np.eye(3)
        with pytest.raises(DimensionMismatchError):
            moi_evaluate(MoiRequest(builtin("sin"), 1, [S, S], [np.eye(2)]))
        with pytest.raises(DimensionMismatchError):
            moi_evaluate(MoiRequest(builtin("sin"), 2, [S, S], [X, X]))
        with pytest.raises(DimensionMismatchError):
            moi_evaluate(MoiRequest(builtin("sin"), 1, [S, decompose(np.eye(2))], [X]))
        with pytest.raises(OrderExceededError):
            moi_evaluate(MoiRequest(builtin("fresnel"), 3, [S] * 4, [X] * 3))


class TestSymmetrized:
    def test_first_order_equals_evaluate(self):
        A = random_hermitian(1, 5)
        X = random_hermitian(2, 5)
        f = builtin("sin")
        np.testing.assert_array_equal(moi_symmetrized(f, 1, A, [X]), evaluate(f, 1, A, [X]).value)

    def test_cube_second_order(self):
        A = random_hermitian(3, 5)
        X = random_hermitian(4, 5)
        out = moi_symmetrized(builtin("monomial", degree=3), 2, A, [X, X])
        assert rel_fro(out, 2 * (A @ X @ X + X @ A @ X + X @ X @ A)) < 1e-10

    def test_square_second_order(self):
        A = random_hermitian(5, 4)
        X1, X2 = random_hermitian(6, 4), random_hermitian(7, 4)
        out = moi_symmetrized(builtin("monomial", degree=2), 2, A, [X1, X2])
        assert rel_fro(out, X1 @ X2 + X2 @ X1) < 1e-10

    def test_symmetric_in_arguments(self):
        A = random_hermitian(8, 4)
        Xs = [random_hermitian(9 + j, 4) for j in range(3)]
        f = builtin("lorentzian")
        a = moi_symmetrized(f, 3, A, Xs)
        b = moi_symmetrized(f, 3, A, [Xs[2], Xs[0], Xs[1]])
        assert rel_fro(b, a) < 1e-10

    def test_hermitian_on_diagonal_arguments(self):
        A = random_hermitian(10, 5)
        X = random_hermitian(11, 5)
        for n in (1, 2, 3):
            G = moi_symmetrized(builtin("sin"), n, A, [X] * n)
            assert np.max(np.abs(G - G.conj().T)) < 1e-10

    def test_budget(self):
        A = random_hermitian(1, 10)
        with pytest.raises(BudgetExceededError):
            moi_symmetrized(builtin("sin"), 3, A, [A] * 3, budget=1e4)

    def test_schur_bound_p2(self):
        f = builtin("sin")
        grid = np.linspace(-3, 3, 6001)
        bound = sup_norm(f, 1, grid)
        for seed in range(10):
            A = random_hermitian(seed, 6)
            X = random_hermitian(100 + seed, 6)
            T = moi_symmetrized(f, 1, A, [X])
            assert schatten_norm(T, 2) <= bound * schatten_norm(X, 2) * (1 + 1e-12)


class TestTaylorRemainder:
    def test_cube(self):
        A = random_hermitian(1, 4)
        X = random_hermitian(2, 4)
        assert rel_fro(taylor_remainder(builtin("monomial", degree=3), 3, A, X), X @ X @ X) < 1e-10

    def test_zero_perturbation(self):
        A = random_hermitian(3, 4)
        R = taylor_remainder(builtin("sin"), 2, A, np.zeros((4, 4)))
        assert np.max(np.abs(R)) == 0

    def test_sin_second_order(self):
        A = np.diag([0.0, 1.0])
        X = 0.1 * random_hermitian(5, 2)
        f = builtin("sin")
        expected = apply_function(f, A + X) - apply_function(f, A) - moi_symmetrized(f, 1, A, [X])
        assert np.max(np.abs(taylor_remainder(f, 2, A, X) - expected)) < 1e-8


def test_multilinearity(rng):
    f = builtin("lorentzian")
    A = random_hermitian(1, 5)
    S = decompose(A)
    for n in (1, 2, 3):
        Xs = [random_hermitian(10 + j, 5) for j in range(n)]
        Y, Z = random_hermitian(30, 5), random_hermitian(31, 5)
        a, b = rng.standard_normal(2)
        slot = n - 1
        def at(M):
            ys = list(Xs)
            ys[slot] = M
            return moi_evaluate(MoiRequest(f, n, [S] * (n + 1), ys)).value
        lhs = at(a * Y + b * Z)
        assert rel_fro(lhs, a * at(Y) + b * at(Z)) < 1e-9


def test_shared_cache_reused():
    f = builtin("sin")
    A = random_hermitian(2, 4)
    cache = DividedDifferenceCache(f)
    moi_symmetrized(f, 2, A, [A, A], cache=cache)
    before = len(cache)
    moi_symmetrized(f, 2, A, [np.eye(4), A], cache=cache)
    assert len(cache) == before
