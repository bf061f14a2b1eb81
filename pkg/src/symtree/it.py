"""Interaction-Transformation expressions.

An expression is an intercept plus a weighted sum of terms, where each term
applies a one-dimensional transform to an integer-exponent monomial of the
input variables::

    f(x) = b + sum_i w_i * t_i(prod_j x_j ** k_ij)

Evaluation never raises on domain violations (``log`` of a negative number,
``0 ** -1``...).  It returns a non-finite value instead and leaves it to the
caller to discard the offending term.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np

from .errors import EmptyDataError, InvalidArgumentError, InvalidDimensionError, InvalidTermError

MAX_ABS_EXPONENT = 64


class Transform(enum.Enum):
    """One-dimensional transformation functions, keyed by canonical name."""

    IDENTITY = "id"
    SIN = "sin"
    COS = "cos"
    TAN = "tan"
    SQRTABS = "sqrtabs"
    LOG = "log"
    LOG1P = "log1p"

    @classmethod
    def parse(cls, name: str | "Transform") -> "Transform":
        if isinstance(name, Transform):
            return name
        try:
            return cls(name.strip().lower())
        except ValueError:
            valid = ", ".join(t.value for t in cls)
            raise InvalidArgumentError(f"unknown transform {name!r} (expected one of {valid})") from None

    def __call__(self, z):
        return _apply_transform(self, z)


_TRANSFORM_FUNCS = {
    Transform.IDENTITY: lambda z: z,
    Transform.SIN: np.sin,
    Transform.COS: np.cos,
    Transform.TAN: np.tan,
    Transform.SQRTABS: lambda z: np.sqrt(np.abs(z)),
    # np.log gives -inf at 0 and nan below; both count as undefined.
    Transform.LOG: np.log,
    Transform.LOG1P: np.log1p,
}

# The transformation set used by the benchmark protocol.
DEFAULT_TRANSFORMS: tuple[Transform, ...] = (
    Transform.SIN,
    Transform.COS,
    Transform.TAN,
    Transform.SQRTABS,
    Transform.LOG,
    Transform.LOG1P,
)


def _apply_transform(transform: Transform, z):
    with np.errstate(all="ignore"):
        return _TRANSFORM_FUNCS[transform](z)


def _ipow(x: np.ndarray, k: int) -> np.ndarray:
    """``x ** k`` for integer ``k`` by repeated squaring."""
    if k == 0:
        return np.ones_like(x)
    n = abs(k)
    result = None
    base = x
    with np.errstate(all="ignore"):
        while True:
            if n & 1:
                result = base if result is None else result * base
            n >>= 1
            if not n:
                break
            base = base * base
        if k < 0:
            result = 1.0 / result
    return result


@dataclass(frozen=True)
class Term:
    """A single ``transform(prod x_i ** exponents[i])`` term.

    Terms compare and hash by ``(exponents, transform)``.
    """

    exponents: tuple[int, ...]
    transform: Transform = Transform.IDENTITY
    key: tuple = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self) -> None:
        exps = tuple(int(k) for k in self.exponents)
        if not exps:
            raise InvalidDimensionError("a term needs at least one variable")
        for k in exps:
            if abs(k) > MAX_ABS_EXPONENT:
                raise InvalidTermError(f"exponent {k} outside [-{MAX_ABS_EXPONENT}, {MAX_ABS_EXPONENT}]")
        object.__setattr__(self, "exponents", exps)
        object.__setattr__(self, "transform", Transform.parse(self.transform))
        object.__setattr__(self, "key", (exps, self.transform.value))

    @classmethod
    def _unchecked(cls, exponents: tuple[int, ...], transform: Transform = Transform.IDENTITY) -> "Term":
        # hot path for the search operators, which bound exponents themselves
        term = object.__new__(cls)
        object.__setattr__(term, "exponents", exponents)
        object.__setattr__(term, "transform", transform)
        object.__setattr__(term, "key", (exponents, transform.value))
        return term

    @property
    def dim(self) -> int:
        return len(self.exponents)

    def with_transform(self, transform: Transform) -> "Term":
        return Term(self.exponents, transform)

    def __str__(self) -> str:
        return render_term(self)


def make_linear_terms(d: int) -> list[Term]:
    """One identity term per variable: ``x_0, ..., x_{d-1}``."""
    if int(d) < 1:
        raise InvalidDimensionError(f"dimension must be >= 1, got {d}")
    return [Term(tuple(1 if j == i else 0 for j in range(d))) for i in range(d)]


def _term_values(term: Term, X: np.ndarray) -> np.ndarray:
    prod = None
    for j, k in enumerate(term.exponents):
        if k == 0:
            continue
        factor = _ipow(X[:, j], k)
        prod = factor if prod is None else prod * factor
    if prod is None:
        prod = np.ones(X.shape[0])
    return _apply_transform(term.transform, prod)


def _as_2d(x, dim: int) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        if arr.shape[0] != dim:
            raise InvalidArgumentError(f"expected a vector of length {dim}, got {arr.shape[0]}")
        return arr[None, :], True
    if arr.ndim == 2:
        if arr.shape[1] != dim:
            raise InvalidArgumentError(f"expected {dim} columns, got {arr.shape[1]}")
        return arr, False
    raise InvalidArgumentError(f"expected a vector or matrix, got array of shape {arr.shape}")


def eval_term(term: Term, x):
    """Evaluate a term at one point (1-D ``x``) or at every row of a matrix.

    Undefined values come back as ``nan`` or ``inf``.
    """
    X, single = _as_2d(x, term.dim)
    values = _term_values(term, X)
    return float(values[0]) if single else values


@dataclass(frozen=True, eq=False)
class Expression:
    """Ordered, de-duplicated terms with their fitted weights and intercept."""

    terms: tuple[Term, ...]
    weights: np.ndarray
    intercept: float = 0.0
    dim: int = field(default=0)

    def __post_init__(self) -> None:
        terms = tuple(self.terms)
        weights = np.array(self.weights, dtype=np.float64).reshape(-1)
        dim = int(self.dim) if self.dim else (terms[0].dim if terms else 0)
        if dim < 1:
            raise InvalidDimensionError("expression dimension must be >= 1")
        if weights.shape[0] != len(terms):
            raise InvalidArgumentError(f"{len(terms)} terms but {weights.shape[0]} weights")
        seen = set()
        for t in terms:
            if t.dim != dim:
                raise InvalidDimensionError(f"term {t} has dimension {t.dim}, expression has {dim}")
            if t.key in seen:
                raise InvalidArgumentError(f"duplicate term {t}")
            seen.add(t.key)
        intercept = float(self.intercept)
        if not (np.all(np.isfinite(weights)) and np.isfinite(intercept)):
            raise InvalidArgumentError("weights and intercept must be finite")
        weights.setflags(write=False)
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "intercept", intercept)
        object.__setattr__(self, "dim", dim)

    @classmethod
    def constant(cls, value: float, dim: int) -> "Expression":
        return cls((), np.zeros(0), value, dim)

    def __len__(self) -> int:
        return len(self.terms)

    def __call__(self, x):
        return eval_expression(self, x)

    def __str__(self) -> str:
        return render(self)

    def to_dict(self) -> dict[str, Any]:
        return {
            "dim": self.dim,
            "intercept": self.intercept,
            "terms": [
                {"exponents": list(t.exponents), "transform": t.transform.value, "weight": float(w)}
                for t, w in zip(self.terms, self.weights)
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "Expression":
        try:
            dim = int(doc["dim"])
            terms = [Term(tuple(t["exponents"]), Transform.parse(t["transform"])) for t in doc["terms"]]
            weights = [float(t["weight"]) for t in doc["terms"]]
            intercept = float(doc.get("intercept", 0.0))
        except (KeyError, TypeError) as exc:
            raise InvalidArgumentError(f"malformed expression document: {exc}") from exc
        return cls(tuple(terms), np.asarray(weights), intercept, dim)

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_json(cls, text: str) -> "Expression":
        return cls.from_dict(json.loads(text))


def eval_expression(expr: Expression, x):
    """Evaluate ``intercept + sum(w_i * term_i(x))``.

    Accepts one point or a matrix of points; non-finite term values
    propagate to the output.
    """
    X, single = _as_2d(x, expr.dim)
    out = np.full(X.shape[0], expr.intercept)
    with np.errstate(all="ignore"):
        for term, w in zip(expr.terms, expr.weights):
            out = out + w * _term_values(term, X)
    return float(out[0]) if single else out


def _term_size(term: Term) -> int:
    nonzero = [k for k in term.exponents if k != 0]
    if nonzero:
        product = sum(1 if abs(k) == 1 else 3 for k in nonzero) + len(nonzero) - 1
    else:
        product = 1
    transform = 0 if term.transform is Transform.IDENTITY else 1
    # weight leaf + multiply node
    return 2 + transform + product


def expression_size(expr: Expression) -> int:
    """Node count of the expression's canonical tree.

    Each term contributes a weight leaf, a multiply node, a transform node
    (unless identity) and its monomial, where every variable with a non-unit
    exponent adds a power node and an exponent leaf.  Items are joined by
    ``n - 1`` addition nodes; a non-zero intercept counts as one more item.
    """
    items = [_term_size(t) for t in expr.terms]
    if expr.intercept != 0.0:
        items.append(1)
    if not items:
        return 1
    return sum(items) + len(items) - 1


def _fmt(value: float) -> str:
    return f"{value:#.6g}"


def render_term(term: Term) -> str:
    factors = []
    for j, k in enumerate(term.exponents):
        if k == 0:
            continue
        factors.append(f"x{j}" if k == 1 else f"x{j}^{k}")
    inner = "*".join(factors) if factors else "1"
    if term.transform is Transform.IDENTITY:
        return inner
    return f"{term.transform.value}({inner})"


def render(expr: Expression) -> str:
    """Infix rendering with weights to 6 significant digits."""
    if not expr.terms:
        return _fmt(expr.intercept)
    parts: list[str] = []
    for i, (term, w) in enumerate(zip(expr.terms, expr.weights)):
        body = f"{_fmt(abs(w))}*{render_term(term)}"
        if i == 0:
            parts.append(body if w >= 0 else f"-{body}")
        else:
            parts.append(f" + {body}" if w >= 0 else f" - {body}")
    if expr.intercept != 0.0:
        c = expr.intercept
        parts.append(f" + {_fmt(c)}" if c >= 0 else f" - {_fmt(-c)}")
    return "".join(parts)


@dataclass(frozen=True, eq=False)
class Dataset:
    """An ``n x d`` design with its targets.  Entries must be finite."""

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self) -> None:
        X = np.array(self.X, dtype=np.float64)
        y = np.array(self.y, dtype=np.float64).reshape(-1)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2:
            raise InvalidArgumentError(f"X must be 2-D, got shape {X.shape}")
        if X.shape[0] != y.shape[0]:
            raise InvalidArgumentError(f"X has {X.shape[0]} rows but y has {y.shape[0]} entries")
        if X.shape[0] == 0:
            raise EmptyDataError("dataset has no rows")
        if X.shape[1] == 0:
            raise InvalidDimensionError("dataset has no variables")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise InvalidArgumentError("dataset contains non-finite values")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def subset(self, rows: Sequence[int] | np.ndarray) -> "Dataset":
        rows = np.asarray(rows, dtype=np.intp)
        return Dataset(self.X[rows], self.y[rows])


def dedupe_terms(terms: Iterable[Term]) -> list[Term]:
    seen: set = set()
    out = []
    for t in terms:
        if t.key not in seen:
            seen.add(t.key)
            out.append(t)
    return out
