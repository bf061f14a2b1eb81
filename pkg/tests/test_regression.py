import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from symtree import Dataset, Expression, Term, design_matrix, fit, mae, make_linear_terms, score
from symtree.benchmarks import benchmark, sample
from symtree.errors import EmptyDataError, IndeterminateTermError, InvalidArgumentError


def gauss_full_pivot(M, b):
    """Solve ``M z = b`` by Gaussian elimination with full pivoting."""
    M = np.array(M, dtype=float)
    b = np.array(b, dtype=float)
    n = len(b)
    cols = list(range(n))
    for k in range(n):
        sub = np.abs(M[k:, k:])
        i, j = np.unravel_index(np.argmax(sub), sub.shape)
        i += k
        j += k
        M[[k, i]] = M[[i, k]]
        b[[k, i]] = b[[i, k]]
        M[:, [k, j]] = M[:, [j, k]]
        cols[k], cols[j] = cols[j], cols[k]
        for r in range(k + 1, n):
            f = M[r, k] / M[k, k]
            M[r, k:] -= f * M[k, k:]
            b[r] -= f * b[k]
    z = np.zeros(n)
    for k in range(n - 1, -1, -1):
        z[k] = (b[k] - M[k, k + 1:] @ z[k + 1:]) / M[k, k]
    out = np.zeros(n)
    out[cols] = z
    return out


def normal_equations(A, y):
    return gauss_full_pivot(A.T @ A, A.T @ y)


class TestDesignMatrix:
    def test_identity_terms_copy_x(self):
        A, finite = design_matrix(make_linear_terms(2), np.array([[1.0, 2.0], [3.0, 4.0]]))
        np.testing.assert_array_equal(A, [[1, 2, 1], [3, 4, 1]])
        assert finite

    def test_division_by_zero_flagged(self):
        _, finite = design_matrix([Term((0, -1))], np.array([[1.0, 2.0], [3.0, 0.0]]))
        assert not finite

    def test_intercept_only(self):
        A, finite = design_matrix([], np.random.default_rng(0).normal(size=(5, 3)))
        np.testing.assert_array_equal(A, np.ones((5, 1)))
        assert finite

    def test_dimension_mismatch(self):
        with pytest.raises(InvalidArgumentError):
            design_matrix([Term((1, 0, 0))], np.zeros((3, 2)))


class TestFit:
    def test_exact_linear(self):
        x = np.linspace(-2, 3, 40)[:, None]
        res = fit([Term((1,))], Dataset(x, 3 * x[:, 0]))
        assert res.expression.weights[0] == pytest.approx(3.0, abs=1e-12)
        assert res.expression.intercept == pytest.approx(0.0, abs=1e-12)
        assert res.train_mae < 1e-10
        assert res.score == 1.0 / (1.0 + res.train_mae)

    def test_duplicate_column_min_norm(self):
        # on x > 0, x and sqrt(|x^2|) are the same column
        x = np.linspace(0.5, 4.0, 30)[:, None]
        data = Dataset(x, x[:, 0])
        terms = [Term((1,)), Term((2,), "sqrtabs")]
        A, _ = design_matrix(terms, x)
        np.testing.assert_allclose(A[:, 0], A[:, 1], rtol=1e-15)
        oracle = np.linalg.pinv(A) @ data.y
        np.testing.assert_allclose(oracle, [0.5, 0.5, 0.0], atol=1e-12)
        res = fit(terms, data)
        np.testing.assert_allclose(res.expression.weights, [0.5, 0.5], atol=1e-10)
        assert abs(res.expression.intercept) < 1e-10
        assert res.rank == 2

    def test_f1_cubic(self):
        train, _ = sample(benchmark("F1"), 7)
        res = fit([Term((1,)), Term((2,)), Term((3,))], train)
        np.testing.assert_allclose(res.expression.weights, [5, 1, 1], atol=1e-9)
        assert abs(res.expression.intercept) < 1e-9
        assert res.train_mae < 1e-8

    def test_non_finite_design(self):
        data = Dataset(np.array([[1.0], [0.0]]), np.array([1.0, 2.0]))
        with pytest.raises(IndeterminateTermError):
            fit([Term((-1,))], data)

    def test_empty_data(self):
        with pytest.raises(EmptyDataError):
            fit([], Dataset(np.zeros((0, 1)), np.zeros(0)))

    @pytest.mark.parametrize("seed", range(100))
    def test_matches_normal_equations(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(12, 51))
        m = int(rng.integers(1, 9))
        d = int(rng.integers(1, 4))
        X = rng.uniform(0.5, 2.0, size=(n, d))
        pool = [Term(e) for e in itertools.product(range(-1, 3), repeat=d) if any(e)]
        pick = rng.permutation(len(pool))[:m]
        terms = [pool[i] for i in sorted(pick)]
        A, _ = design_matrix(terms, X)
        while np.linalg.cond(A) > 1e4 and len(terms) > 1:
            # keep the oracle's squared conditioning harmless
            terms = terms[:-1]
            A, _ = design_matrix(terms, X)
        y = rng.normal(size=n)
        res = fit(terms, Dataset(X, y))
        w = normal_equations(A, y)
        np.testing.assert_allclose(res.expression.weights, w[:-1], atol=1e-8)
        assert res.expression.intercept == pytest.approx(w[-1], abs=1e-8)

    def test_deterministic(self):
        rng = np.random.default_rng(3)
        X = rng.uniform(-1, 1, (40, 2))
        y = rng.normal(size=40)
        terms = [Term((1, 0)), Term((0, 2)), Term((1, 1), "cos")]
        a = fit(terms, Dataset(X, y)).expression.weights
        b = fit(terms, Dataset(X.copy(), y.copy())).expression.weights
        assert a.tobytes() == b.tobytes()

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 10_000), st.integers(1, 6))
    def test_nested_sse_monotone(self, seed, extra):
        rng = np.random.default_rng(seed)
        X = rng.uniform(-2, 2, (30, 2))
        y = np.sin(X[:, 0]) * X[:, 1] + rng.normal(scale=0.1, size=30)
        pool = [Term((1, 0)), Term((0, 1)), Term((2, 0)), Term((1, 1)), Term((0, 2), "sin"),
                Term((1, 0), "cos"), Term((3, 1)), Term((1, 2), "sqrtabs")]
        perm = rng.permutation(len(pool))
        small = [pool[i] for i in perm[:2]]
        big = small + [pool[i] for i in perm[2:2 + extra]]
        data = Dataset(X, y)

        def sse(terms):
            r = fit(terms, data)
            return float(np.sum((r.expression(X) - y) ** 2))

        assert sse(big) <= sse(small) + 1e-9

    def test_rank_bound(self):
        X = np.linspace(-1, 1, 3)[:, None]
        res = fit([Term((1,)), Term((2,)), Term((3,)), Term((4,))], Dataset(X, X[:, 0] ** 5))
        assert res.rank <= 3


class TestMaeScore:
    def test_perfect(self):
        e = Expression((Term((1,)),), np.array([2.0]), 1.0, 1)
        X = np.array([[0.0], [1.0], [2.5]])
        assert mae(e, Dataset(X, 2 * X[:, 0] + 1)) == 0.0
        assert score(e, Dataset(X, 2 * X[:, 0] + 1)) == 1.0

    def test_constant_models(self):
        assert mae(Expression.constant(0.0, 1), Dataset(np.zeros((2, 1)), np.array([1.0, -1.0]))) == 1.0
        assert mae(Expression.constant(2.0, 1), Dataset(np.zeros((3, 1)), np.zeros(3))) == 2.0
        assert score(Expression.constant(0.0, 1), Dataset(np.zeros((2, 1)), np.array([1.0, -1.0]))) == 0.5

    def test_non_finite(self):
        e = Expression((Term((-1,)),), np.array([1.0]), 0.0, 1)
        data = Dataset(np.array([[0.0], [1.0]]), np.zeros(2))
        assert math.isnan(mae(e, data))
        assert score(e, data) == 0.0

    def test_dimension_mismatch(self):
        with pytest.raises(InvalidArgumentError):
            mae(Expression.constant(1.0, 2), Dataset(np.zeros((2, 1)), np.zeros(2)))

    @given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=20), st.floats(-1e6, 1e6))
    def test_score_range(self, ys, c):
        data = Dataset(np.zeros((len(ys), 1)), np.array(ys))
        s = score(Expression.constant(c, 1), data)
        assert 0.0 <= s <= 1.0
        err = mae(Expression.constant(c, 1), data)
        if err == 0.0:
            assert s == 1.0
        # 1 / (1 + e) rounds to 1.0 once e is below half an ulp of 1
        assert (s == 1.0) == (err <= np.finfo(float).eps / 2)
