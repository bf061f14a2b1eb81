"""Analytic benchmark targets, seeded sampling and random polynomial recovery."""

from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass
from typing import Callable, TextIO

import numpy as np

from .errors import InvalidArgumentError
from .it import Dataset, Expression, Term, Transform
from .rng import XorShift64Star


@dataclass(frozen=True)
class BenchmarkSpec:
    id: str
    dim: int
    target: Callable[[np.ndarray], np.ndarray]
    formula: str
    sample_range: tuple[float, float] = (-5.0, 5.0)
    n_samples: int = 600
    expressible: bool = False

    def __call__(self, x) -> np.ndarray | float:
        arr = np.asarray(x, dtype=np.float64)
        if arr.ndim == 1:
            return float(self.target(arr[None, :])[0])
        return self.target(arr)


def _f1(X):
    x = X[:, 0]
    return x**3 + x**2 + 5 * x


def _f2(X):
    x = X[:, 0]
    return x**4 + x**3 + x**2 + x


def _f3(X):
    x = X[:, 0]
    return x**5 + x**4 + x**3 + x**2 + x


def _f4(X):
    x = X[:, 0]
    return x**6 + x**5 + x**4 + x**3 + x**2 + x


def _f5(X):
    x = X[:, 0]
    return np.sin(x**2) * np.cos(x) - 1


def _f6(X):
    x = X[:, 0]
    return np.sin(x) + np.sin(x + x**2)


def _f7(X):
    x = X[:, 0]
    return np.log(x + 1) + np.log(x**2 + 1)


def _f8(X):
    return 5 * np.sqrt(np.abs(X[:, 0]))


def _f9(X):
    return np.sin(X[:, 0]) + np.sin(X[:, 1] ** 2)


def _f10(X):
    return 6 * np.sin(X[:, 0]) * np.cos(X[:, 1])


def _f11(X):
    return 2 - 2.1 * np.cos(9.8 * X[:, 0]) * np.sin(1.3 * X[:, 1])


def _f12(X):
    return np.exp(-((X[:, 0] - 1) ** 2)) / (1.2 + (X[:, 1] - 2.5) ** 2)


def _f13(X):
    return 10 / (5 + np.sum((X - 3) ** 2, axis=1))


def _f14(X):
    return np.prod(X, axis=1)


def _f15(X):
    x = X[:, 0]
    return x**6 / (x**3 + x**2 + 1)


def _f16(X):
    x = X[:, 0]
    return x / (1 - np.log(x**2 + x + 1))


def _f17(X):
    x = X[:, 0]
    return 100 + np.log(x**2) + 5 * np.sqrt(np.abs(x))


BENCHMARKS: dict[str, BenchmarkSpec] = {
    spec.id: spec
    for spec in [
        BenchmarkSpec("F1", 1, _f1, "x^3 + x^2 + 5x", expressible=True),
        BenchmarkSpec("F2", 1, _f2, "x^4 + x^3 + x^2 + x", expressible=True),
        BenchmarkSpec("F3", 1, _f3, "x^5 + x^4 + x^3 + x^2 + x", expressible=True),
        BenchmarkSpec("F4", 1, _f4, "x^6 + x^5 + x^4 + x^3 + x^2 + x", expressible=True),
        BenchmarkSpec("F5", 1, _f5, "sin(x^2)cos(x) - 1"),
        BenchmarkSpec("F6", 1, _f6, "sin(x) + sin(x + x^2)"),
        BenchmarkSpec("F7", 1, _f7, "log(x+1) + log(x^2+1)", sample_range=(0.0, 2.0), expressible=True),
        BenchmarkSpec("F8", 1, _f8, "5 sqrt(|x|)", expressible=True),
        BenchmarkSpec("F9", 2, _f9, "sin(x) + sin(y^2)", expressible=True),
        BenchmarkSpec("F10", 2, _f10, "6 sin(x) cos(y)"),
        BenchmarkSpec("F11", 2, _f11, "2 - 2.1 cos(9.8x) sin(1.3w)"),
        BenchmarkSpec("F12", 2, _f12, "exp(-(x-1)^2) / (1.2 + (y-2.5)^2)"),
        BenchmarkSpec("F13", 5, _f13, "10 / (5 + sum_i (x_i - 3)^2)"),
        BenchmarkSpec("F14", 5, _f14, "x1 x2 x3 x4 x5", expressible=True),
        BenchmarkSpec("F15", 1, _f15, "x^6 / (x^3 + x^2 + 1)"),
        BenchmarkSpec("F16", 1, _f16, "x / (1 - log(x^2 + x + 1))"),
        BenchmarkSpec("F17", 1, _f17, "100 + log(x^2) + 5 sqrt(|x|)", expressible=True),
    ]
}

BENCHMARK_IDS: tuple[str, ...] = tuple(BENCHMARKS)


def benchmark(id: str) -> BenchmarkSpec:
    key = id.strip().upper()
    if key not in BENCHMARKS:
        raise InvalidArgumentError(f"unknown benchmark {id!r}; valid ids: {', '.join(BENCHMARK_IDS)}")
    return BENCHMARKS[key]


def sample(spec: BenchmarkSpec, seed: int) -> tuple[Dataset, Dataset]:
    """Uniform samples over the spec's box; first half train, second half test.

    Coordinates are drawn row by row from :class:`XorShift64Star`.
    """
    rng = XorShift64Star(seed)
    lo, hi = spec.sample_range
    X = rng.uniform(lo, hi, (spec.n_samples, spec.dim))
    y = spec.target(X)
    half = spec.n_samples // 2
    return Dataset(X[:half], y[:half]), Dataset(X[half:], y[half:])


def _poly(d: int, entries: dict[tuple[int, ...], float], intercept: float = 0.0,
          transform: Transform = Transform.IDENTITY) -> Expression:
    terms = tuple(Term(k, transform) for k in entries)
    return Expression(terms, np.array(list(entries.values())), intercept, d)


def witness(id: str) -> Expression | None:
    """A hand-written IT expression equal to an expressible benchmark.

    Returns ``None`` for the non-expressible ones. F7 needs ``log1p`` on both
    ``x`` and ``x^2``.
    """
    key = benchmark(id).id
    if key in ("F1", "F2", "F3", "F4"):
        coeffs = {"F1": [5, 1, 1], "F2": [1] * 4, "F3": [1] * 5, "F4": [1] * 6}[key]
        return _poly(1, {(i + 1,): float(c) for i, c in enumerate(coeffs)})
    if key == "F7":
        return Expression((Term((1,), Transform.LOG1P), Term((2,), Transform.LOG1P)), np.array([1.0, 1.0]), 0.0, 1)
    if key == "F8":
        return Expression((Term((1,), Transform.SQRTABS),), np.array([5.0]), 0.0, 1)
    if key == "F9":
        return Expression((Term((1, 0), Transform.SIN), Term((0, 2), Transform.SIN)), np.array([1.0, 1.0]), 0.0, 2)
    if key == "F14":
        return _poly(5, {(1, 1, 1, 1, 1): 1.0})
    if key == "F17":
        return Expression((Term((2,), Transform.LOG), Term((1,), Transform.SQRTABS)), np.array([1.0, 5.0]), 100.0, 1)
    return None


# ---------------------------------------------------------------------------
# Random polynomials
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PolySpec:
    dim: int
    order: int
    n_base_terms: int
    seed: int = 0
    n_train: int = 2500
    n_test: int = 1500
    sample_range: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self) -> None:
        if self.dim not in (1, 2, 3):
            raise InvalidArgumentError(f"dim must be in {{1, 2, 3}}, got {self.dim}")
        if self.order not in (1, 2, 3, 4):
            raise InvalidArgumentError(f"order must be in {{1, 2, 3, 4}}, got {self.order}")
        if self.n_base_terms not in (1, 2, 3, 4):
            raise InvalidArgumentError(f"n_base_terms must be in {{1, 2, 3, 4}}, got {self.n_base_terms}")
        if self.n_base_terms > len(_monomials(self.dim, self.order)):
            raise InvalidArgumentError(
                f"cannot draw {self.n_base_terms} distinct monomials of degree <= {self.order} in {self.dim}D")


def poly_cell_valid(dim: int, order: int, bases: int) -> bool:
    """Cells shown in the recovery table: at most ``order`` terms."""
    return 1 <= bases <= order


def _monomials(dim: int, order: int) -> list[tuple[int, ...]]:
    out = [e for e in itertools.product(range(order + 1), repeat=dim) if 1 <= sum(e) <= order]
    return sorted(out, key=lambda e: (sum(e), tuple(-k for k in e)))


def random_polynomial(spec: PolySpec) -> tuple[Expression, Dataset, Dataset]:
    """A random polynomial target with its train and test samples.

    One monomial of total degree exactly ``order`` is drawn first, the rest
    uniformly (without replacement) among monomials of total degree 1 to
    ``order``.  Coefficients are uniform in [-5, -0.5] U [0.5, 5] and there
    is no constant term.
    """
    rng = XorShift64Star(spec.seed)
    pool = _monomials(spec.dim, spec.order)
    top = [e for e in pool if sum(e) == spec.order]
    chosen = [top[rng.randbelow(len(top))]]
    rest = [e for e in pool if e != chosen[0]]
    for _ in range(spec.n_base_terms - 1):
        chosen.append(rest.pop(rng.randbelow(len(rest))))
    coeffs = []
    for _ in chosen:
        mag = rng.uniform(0.5, 5.0)
        coeffs.append(mag if rng.next_u64() >> 63 else -mag)
    target = Expression(tuple(Term(e) for e in chosen), np.array(coeffs), 0.0, spec.dim)
    lo, hi = spec.sample_range
    Xtr = rng.uniform(lo, hi, (spec.n_train, spec.dim))
    Xte = rng.uniform(lo, hi, (spec.n_test, spec.dim))
    return target, Dataset(Xtr, target(Xtr)), Dataset(Xte, target(Xte))


def recovered(found: Expression, target: Expression, coeff_tol: float = 1e-4) -> bool:
    """Whether ``found`` matches ``target`` term-for-term within ``coeff_tol``.

    Found terms with ``|weight| < coeff_tol`` are ignored.
    """
    if found.dim != target.dim:
        return False
    got = {t.key: w for t, w in zip(found.terms, found.weights) if abs(w) >= coeff_tol}
    want = {t.key: w for t, w in zip(target.terms, target.weights)}
    if got.keys() != want.keys():
        return False
    if any(abs(got[k] - want[k]) > coeff_tol for k in want):
        return False
    return abs(found.intercept - target.intercept) < coeff_tol


# ---------------------------------------------------------------------------
# CSV datasets
# ---------------------------------------------------------------------------


def dataset_header(d: int) -> list[str]:
    return [f"x{i}" for i in range(d)] + ["y"]


def write_dataset_csv(data: Dataset, fh: TextIO) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(dataset_header(data.d))
    for row, target in zip(data.X, data.y):
        writer.writerow([f"{v:.17g}" for v in row] + [f"{target:.17g}"])


def dataset_to_csv(data: Dataset) -> str:
    buf = io.StringIO()
    write_dataset_csv(data, buf)
    return buf.getvalue()
