"""Ordinary least-squares fitting of term weights and the MAE-based score."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg

from .errors import EmptyDataError, IndeterminateTermError, InvalidArgumentError
from .it import Dataset, Expression, Term, eval_expression, eval_term

# Singular values below RANK_RTOL * largest are treated as zero.
RANK_RTOL = 1e-10


@dataclass(frozen=True, eq=False)
class FitResult:
    expression: Expression
    train_mae: float
    score: float
    rank: int

    @property
    def terms(self) -> tuple[Term, ...]:
        return self.expression.terms


def design_matrix(terms: Sequence[Term], X: np.ndarray) -> tuple[np.ndarray, bool]:
    """Columns of term values followed by an all-ones intercept column.

    Returns the ``n x (m + 1)`` matrix and whether every entry is finite.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise InvalidArgumentError(f"X must be 2-D, got shape {X.shape}")
    A = np.empty((X.shape[0], len(terms) + 1))
    for j, term in enumerate(terms):
        if term.dim != X.shape[1]:
            raise InvalidArgumentError(f"term {term} has dimension {term.dim}, data has {X.shape[1]}")
        A[:, j] = eval_term(term, X)
    A[:, -1] = 1.0
    return A, bool(np.all(np.isfinite(A)))


def solve_least_squares(A: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, int]:
    """Minimum-norm least-squares solution of ``A w ~ y``.

    Uses a complete orthogonal factorization built on QR with column
    pivoting (LAPACK ``gelsy``).  Columns are equilibrated to unit 2-norm
    first, so the rank cut-off is insensitive to the wildly different
    magnitudes of high-order monomials; the minimum-norm choice is made in
    the equilibrated coordinates.
    """
    norms = np.sqrt(np.einsum("ij,ij->j", A, A))
    norms[norms == 0.0] = 1.0
    z, _, rank, _ = scipy.linalg.lstsq(A / norms, y, cond=RANK_RTOL, lapack_driver="gelsy",
                                       check_finite=False)
    return z / norms, int(rank)


def _mae_from_residual(residual: np.ndarray) -> float:
    return float(np.mean(np.abs(residual)))


def score_from_mae(value: float) -> float:
    if not np.isfinite(value):
        return 0.0
    return 1.0 / (1.0 + value)


def fit_design(terms: Sequence[Term], A: np.ndarray, y: np.ndarray, dim: int) -> FitResult:
    """Fit on a precomputed (finite) design matrix whose last column is ones."""
    w, rank = solve_least_squares(A, y)
    with np.errstate(all="ignore"):
        residual = A @ w - y
    err = _mae_from_residual(residual)
    expr = Expression(tuple(terms), w[:-1], float(w[-1]), dim)
    return FitResult(expr, err, score_from_mae(err), rank)


def fit(terms: Sequence[Term], data: Dataset) -> FitResult:
    """Least-squares weights and intercept for ``terms`` on ``data``."""
    if data.n == 0:
        raise EmptyDataError("cannot fit on an empty dataset")
    A, finite = design_matrix(terms, data.X)
    if not finite:
        raise IndeterminateTermError("design matrix has non-finite entries; filter the terms first")
    return fit_design(terms, A, data.y, data.d)


def mae(expr: Expression, data: Dataset) -> float:
    """Mean absolute error of ``expr`` on ``data`` (``nan`` if any prediction is)."""
    if expr.dim != data.d:
        raise InvalidArgumentError(f"expression has dimension {expr.dim}, data has {data.d}")
    pred = eval_expression(expr, data.X)
    if not np.all(np.isfinite(pred)):
        return float("nan")
    return _mae_from_residual(pred - data.y)


def score(expr: Expression, data: Dataset) -> float:
    """``1 / (1 + MAE)``; 0 when the MAE is not finite."""
    return score_from_mae(mae(expr, data))
