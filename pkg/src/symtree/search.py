"""Breadth-first greedy search over Interaction-Transformation expressions.

The search starts from the linear model in the original variables.  Every
iteration expands each current leaf: candidate terms are generated by the
interaction, inverse-interaction and transformation operators, candidates
that are undefined on the data or do not improve the leaf are dropped, and
the survivors are packed greedily into one or more children.  Children are
simplified by dropping terms whose weight magnitude falls below ``tau``.

Candidate screening and the greedy packing score "node + term" through an
orthonormal basis of the node's design matrix: adding a column to a least
squares model moves the residual by its projection on the component of the
column orthogonal to the current span.  That is the same residual a full
refit produces, at O(n * m) per candidate instead of O(n * m**2).  Every
node that is actually created is refit from scratch.
"""

from __future__ import annotations

import itertools
import weakref
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import IndeterminateTermError, InvalidArgumentError
from .it import (
    DEFAULT_TRANSFORMS,
    MAX_ABS_EXPONENT,
    Dataset,
    Expression,
    Term,
    Transform,
    eval_term,
    make_linear_terms,
)
from .regression import RANK_RTOL, FitResult, fit_design, score_from_mae

TermKey = tuple


@dataclass(frozen=True)
class SearchConfig:
    """Search hyper-parameters.

    The search runs ``min_i + min_t + extra_iters`` iterations; the inverse
    operator is active in iterations ``> min_i`` and the transformation
    operator in iterations ``> min_t`` (iterations count from 1).
    """

    tau: float = 1e-6
    min_i: int = 1
    min_t: int = 5
    extra_iters: int = 0
    transforms: tuple[Transform, ...] = DEFAULT_TRANSFORMS
    max_terms_per_node: int | None = None
    max_leaves: int | None = None

    def __post_init__(self) -> None:
        if not self.tau > 0:
            raise InvalidArgumentError(f"tau must be positive, got {self.tau}")
        for name in ("min_i", "min_t", "extra_iters"):
            if int(getattr(self, name)) < 0:
                raise InvalidArgumentError(f"{name} must be >= 0")
            object.__setattr__(self, name, int(getattr(self, name)))
        transforms = tuple(Transform.parse(t) for t in self.transforms)
        if Transform.IDENTITY in transforms:
            raise InvalidArgumentError("the transformation set must not contain the identity")
        object.__setattr__(self, "transforms", transforms)
        for name in ("max_terms_per_node", "max_leaves"):
            cap = getattr(self, name)
            if cap is not None and int(cap) < 1:
                raise InvalidArgumentError(f"{name} must be >= 1 when set")

    @property
    def total_iterations(self) -> int:
        return self.min_i + self.min_t + self.extra_iters


@dataclass(frozen=True, eq=False)
class SearchNode:
    """A fitted expression inside the search tree.

    ``mae_floor`` is the training-MAE resolution: a node at or below it is
    treated as an exact fit, which is what :attr:`search_score` reports.
    """

    fit: FitResult
    depth: int = 0
    order: int = 0
    mae_floor: float = 0.0

    @property
    def terms(self) -> tuple[Term, ...]:
        return self.fit.expression.terms

    @property
    def expression(self) -> Expression:
        return self.fit.expression

    @property
    def score(self) -> float:
        return self.fit.score

    @property
    def exact(self) -> bool:
        return self.fit.train_mae <= self.mae_floor

    @property
    def search_score(self) -> float:
        return 1.0 if self.exact else self.fit.score

    def __repr__(self) -> str:
        return f"SearchNode(depth={self.depth}, score={self.score:.12g}, terms={len(self.terms)})"


@dataclass
class ExpansionRecord:
    parent_score: float
    child_scores: list[float]
    filtered: list[TermKey]
    # new terms of each child before simplification, in greedy-pass order
    groups: list[list[TermKey]]
    raw_child_scores: list[float]


@dataclass
class SearchTrace:
    """Optional observer collecting per-expansion and per-iteration data."""

    expansions: list[ExpansionRecord] = field(default_factory=list)
    best_scores: list[float] = field(default_factory=list)
    leaf_counts: list[int] = field(default_factory=list)


# ---------------------------------------------------------------------------
# Candidate operators
# ---------------------------------------------------------------------------


def _combine(terms: Sequence[Term], left: np.ndarray, right: np.ndarray, sign: int) -> list[Term]:
    P = np.array([t.exponents for t in terms], dtype=np.int64).reshape(len(terms), -1)
    S = P[left] + sign * P[right]
    # pairs beyond the exponent bound are not representable; skip them
    S = S[np.abs(S).max(axis=1, initial=0) <= MAX_ABS_EXPONENT]
    return [Term._unchecked(tuple(row)) for row in S.tolist()]


def interaction(terms: Sequence[Term]) -> list[Term]:
    """``(P_i + P_j, id)`` for every unordered pair ``i <= j``."""
    if not terms:
        return []
    i, j = np.triu_indices(len(terms))
    return _combine(terms, i, j, 1)


def inverse_interaction(terms: Sequence[Term]) -> list[Term]:
    """``(P_i - P_j, id)`` for every ordered pair ``i != j``."""
    if not terms:
        return []
    i, j = np.nonzero(~np.eye(len(terms), dtype=bool))
    return _combine(terms, i, j, -1)


def transformation(terms: Sequence[Term], transforms: Sequence[Transform]) -> list[Term]:
    """Each term's monomial under every transform, skipping unchanged terms."""
    return [Term._unchecked(t.exponents, f) for t in terms for f in transforms if f is not t.transform]


# ---------------------------------------------------------------------------
# Per-dataset workspace (column, fit and expansion caches)
# ---------------------------------------------------------------------------

_SCREEN_BLOCK = 4_000_000

# Improvements in training MAE smaller than this fraction of mean |y| are
# round-off, not signal.
MAE_RESOLUTION = 1e-11


class _Workspace:
    def __init__(self, data: Dataset) -> None:
        self.data = data
        self.y = data.y
        self.n = data.n
        self._columns: dict[TermKey, np.ndarray | None] = {}
        self._units: dict[TermKey, np.ndarray | None] = {}
        self._fits: dict[tuple, FitResult] = {}
        self._bases: dict[tuple, tuple[np.ndarray, np.ndarray]] = {}
        self.expansions: dict[tuple, tuple] = {}
        self._ones = np.ones(self.n)
        self.floor = MAE_RESOLUTION * float(np.mean(np.abs(self.y)))

    def node(self, terms: Sequence[Term], depth: int, order: int = 0) -> SearchNode:
        return SearchNode(self.fit(terms), depth, order, self.floor)

    def column(self, term: Term) -> np.ndarray | None:
        key = term.key
        if key not in self._columns:
            col = eval_term(term, self.data.X)
            self._columns[key] = col if np.all(np.isfinite(col)) else None
        return self._columns[key]

    def unit(self, term: Term) -> np.ndarray | None:
        key = term.key
        if key not in self._units:
            col = self.column(term)
            unit = None
            if col is not None:
                with np.errstate(over="ignore"):
                    nrm = float(np.sqrt(col @ col))
                if nrm > 0.0 and np.isfinite(nrm):
                    unit = col / nrm
            self._units[key] = unit
        return self._units[key]

    def fit(self, terms: Sequence[Term]) -> FitResult:
        key = tuple(t.key for t in terms)
        res = self._fits.get(key)
        if res is None:
            A = np.empty((self.n, len(terms) + 1))
            for j, t in enumerate(terms):
                col = self.column(t)
                if col is None:
                    raise IndeterminateTermError(f"term {t} is undefined on the training data")
                A[:, j] = col
            A[:, -1] = 1.0
            res = fit_design(terms, A, self.y, self.data.d)
            self._fits[key] = res
        return res

    def basis(self, terms: Sequence[Term]) -> tuple[np.ndarray, np.ndarray]:
        """Orthonormal basis of the (equilibrated) design and its OLS residual."""
        key = tuple(t.key for t in terms)
        hit = self._bases.get(key)
        if hit is not None:
            return hit
        cols = [self.unit(t) for t in terms]
        cols = [c for c in cols if c is not None]
        cols.append(self._ones / np.sqrt(self.n))
        A = np.column_stack(cols)
        U, s, _ = np.linalg.svd(A, full_matrices=False)
        Q = np.ascontiguousarray(U[:, s > RANK_RTOL * s[0]])
        r = self.y - Q @ (Q.T @ self.y)
        if len(self._bases) > 4096:
            self._bases.clear()
        self._bases[key] = (Q, r)
        return Q, r


_WORKSPACES: "weakref.WeakKeyDictionary[Dataset, _Workspace]" = weakref.WeakKeyDictionary()


def _workspace(data: Dataset) -> _Workspace:
    ws = _WORKSPACES.get(data)
    if ws is None:
        ws = _Workspace(data)
        _WORKSPACES[data] = ws
    return ws


def clear_caches() -> None:
    _WORKSPACES.clear()


def _independence_tol(ncols: int) -> float:
    return RANK_RTOL * np.sqrt(ncols + 1)


def _screen(Q: np.ndarray, r: np.ndarray, units: list[np.ndarray]) -> np.ndarray:
    """Training MAE of the model after adding each column in ``units`` alone."""
    n = Q.shape[0]
    tol = _independence_tol(Q.shape[1])
    out = np.empty(len(units))
    block = max(1, _SCREEN_BLOCK // max(n, 1))
    for start in range(0, len(units), block):
        C = np.column_stack(units[start:start + block])
        C = C - Q @ (Q.T @ C)
        C = C - Q @ (Q.T @ C)
        nrm = np.sqrt(np.einsum("ij,ij->j", C, C))
        ok = nrm > tol
        safe = np.where(ok, nrm, 1.0)
        C = C / safe
        alpha = C.T @ r
        R = r[:, None] - C * alpha
        maes = np.mean(np.abs(R), axis=0)
        base = float(np.mean(np.abs(r)))
        maes = np.where(ok, maes, base)
        out[start:start + len(maes)] = maes
    return out


# ---------------------------------------------------------------------------
# Search steps
# ---------------------------------------------------------------------------


def _filter(ws: _Workspace, node: SearchNode, candidates: Sequence[Term]) -> tuple[list[Term], np.ndarray]:
    seen = {t.key for t in node.terms}
    unique: list[Term] = []
    for c in candidates:
        if c.key in seen:
            continue
        seen.add(c.key)
        unique.append(c)
    defined = [c for c in unique if ws.column(c) is not None]
    if not defined:
        return [], np.empty(0)
    Q, r = ws.basis(node.terms)
    bar = float(np.mean(np.abs(r))) - ws.floor
    units = [ws.unit(c) for c in defined]
    usable = [i for i, u in enumerate(units) if u is not None]
    maes = np.full(len(defined), np.inf)
    if usable:
        maes[usable] = _screen(Q, r, [units[i] for i in usable])
    keep = [i for i in range(len(defined)) if maes[i] < bar]
    return [defined[i] for i in keep], np.array([score_from_mae(maes[i]) for i in keep])


def filter_candidates(node: SearchNode, candidates: Sequence[Term], train: Dataset) -> list[Term]:
    """Drop duplicate, undefined, and non-improving candidates (order kept).

    A candidate is a duplicate when its key matches a term of ``node`` or an
    earlier candidate.  It is undefined when its column over ``train`` holds
    any non-finite value.  It survives only when adding it alone to the node
    strictly raises the score.
    """
    kept, _ = _filter(_workspace(train), node, candidates)
    return kept


def _greedy(ws: _Workspace, node: SearchNode,
            candidates: Sequence[Term]) -> tuple[list[Term], list[Term], list[Term]]:
    """Accepted terms, rejects before the first acceptance, and later rejects.

    The first group was rejected against the unchanged parent, so none of
    them improves it alone.
    """
    # Candidates are scored a block at a time against the current model.  A
    # rejection leaves the model unchanged, so everything before the first
    # improving candidate of a block is rejected exactly as in a one-by-one
    # pass; after an acceptance scoring resumes right behind it.  A screened
    # hit is confirmed with a real refit, since the solver's rank cut-off can
    # disagree with the projection on nearly dependent columns.
    Q0, r = ws.basis(node.terms)
    n, k0 = Q0.shape
    live = [i for i, c in enumerate(candidates) if ws.unit(c) is not None]
    if not live:
        return [], list(candidates), []
    U = np.column_stack([ws.unit(candidates[i]) for i in live])
    Q = np.empty((n, k0 + len(live)))
    Q[:, :k0] = Q0
    k = k0
    current = float(np.mean(np.abs(r)))
    fitted = node.fit.train_mae
    base = list(node.terms)
    taken: list[int] = []
    pos, block = 0, 4
    while pos < len(live):
        stop = min(pos + block, len(live))
        Qk = Q[:, :k]
        C = U[:, pos:stop]
        C = C - Qk @ (Qk.T @ C)
        C = C - Qk @ (Qk.T @ C)
        nrm = np.sqrt(np.einsum("ij,ij->j", C, C))
        ok = nrm > _independence_tol(k)
        C = C / np.where(ok, nrm, 1.0)
        alpha = C.T @ r
        maes = np.mean(np.abs(r[:, None] - C * alpha), axis=0)
        better = np.flatnonzero(ok & (maes < current - ws.floor))
        if not better.size:
            pos = stop
            block = min(block * 2, 256)
            continue
        hit = int(better[0])
        pos += hit + 1
        block = 4
        trial = ws.fit(base + [candidates[live[i]] for i in taken] + [candidates[live[pos - 1]]])
        if not trial.train_mae < fitted - ws.floor:
            continue
        fitted = trial.train_mae
        Q[:, k] = C[:, hit]
        k += 1
        r = r - alpha[hit] * C[:, hit]
        current = float(np.mean(np.abs(r)))
        taken.append(pos - 1)
    if not taken:
        return [], list(candidates), []
    chosen = {live[i] for i in taken}
    first = live[taken[0]]
    accepted = [candidates[i] for i in sorted(chosen)]
    unused = [c for i, c in enumerate(candidates) if i > first and i not in chosen]
    return accepted, list(candidates[:first]), unused


def greedy_search(node: SearchNode, candidates: Sequence[Term], train: Dataset) -> tuple[SearchNode, list[Term]]:
    """Append candidates one by one, keeping those that raise the score.

    Returns the expanded child and the rejected candidates, in order.
    """
    ws = _workspace(train)
    accepted, before, after = _greedy(ws, node, candidates)
    if not accepted:
        return node, before
    child = ws.node(list(node.terms) + accepted, node.depth + 1)
    return child, before + after


def _simplify(ws: _Workspace, node: SearchNode, tau: float) -> SearchNode:
    while True:
        keep = np.abs(node.expression.weights) >= tau
        if keep.all():
            return node
        terms = [t for t, k in zip(node.terms, keep) if k]
        node = ws.node(terms, node.depth, node.order)


def simplify(node: SearchNode, tau: float, train: Dataset) -> SearchNode:
    """Remove every term with ``|weight| < tau`` and refit the rest.

    Refitting can push other weights under ``tau``; removal repeats until
    every remaining weight clears the threshold.
    """
    return _simplify(_workspace(train), node, tau)


def _candidates(terms: Sequence[Term], cfg: SearchConfig, iteration: int) -> list[Term]:
    cands = interaction(terms)
    if iteration > cfg.min_i:
        cands += inverse_interaction(terms)
    if iteration > cfg.min_t:
        cands += transformation(terms, cfg.transforms)
    return cands


def _expand(ws: _Workspace, node: SearchNode, cfg: SearchConfig, iteration: int,
            trace: SearchTrace | None) -> list[SearchNode]:
    inv = iteration > cfg.min_i
    trans = iteration > cfg.min_t
    node_key = tuple(t.key for t in node.terms)
    memo_key = (node_key, inv, trans, cfg.tau, cfg.transforms, cfg.max_terms_per_node)
    hit = ws.expansions.get(memo_key)
    if hit is None:
        cands = _candidates(node.terms, cfg, iteration)
        terms, scores = _filter(ws, node, cands)
        cap = cfg.max_terms_per_node
        if cap is not None and len(terms) > cap:
            best = np.argsort(-scores, kind="stable")[:cap]
            terms = [terms[i] for i in sorted(best)]
        groups: list[list[Term]] = []
        raw: list[SearchNode] = []
        remaining = terms
        dropped: set = set()
        while remaining:
            accepted, before, remaining = _greedy(ws, node, remaining)
            # terms rejected against the bare parent fail the filter test
            # after all (the screen and the solver can disagree on nearly
            # dependent columns)
            dropped.update(t.key for t in before)
            if not accepted:
                break
            groups.append(accepted)
            raw.append(ws.node(list(node.terms) + accepted, node.depth + 1))
        children = [_simplify(ws, c, cfg.tau) for c in raw]
        child_terms = [tuple(c.terms) for c in children]
        record = ExpansionRecord(
            parent_score=node.score,
            child_scores=[c.score for c in children] or [node.score],
            filtered=[t.key for t in terms if t.key not in dropped],
            groups=[[t.key for t in g] for g in groups],
            raw_child_scores=[c.score for c in raw],
        )
        ws.expansions[memo_key] = (child_terms, record)
    else:
        child_terms, record = hit
        children = [ws.node(t, node.depth + 1) for t in child_terms]
    if trace is not None:
        trace.expansions.append(record)
    return children if children else [node]


def expand(node: SearchNode, cfg: SearchConfig, train: Dataset, iteration: int,
           trace: SearchTrace | None = None) -> list[SearchNode]:
    """Children of ``node`` at ``iteration``; ``[node]`` when none improve it."""
    return _expand(_workspace(train), node, cfg, iteration, trace)


def _rank_key(node: SearchNode) -> tuple:
    return (-node.search_score, len(node.terms), node.order)


def best_leaf(leaves: Sequence[SearchNode]) -> SearchNode:
    return min(leaves, key=_rank_key)


def root_node(train: Dataset) -> SearchNode:
    return _workspace(train).node(make_linear_terms(train.d), 0, 0)


def run(train: Dataset, cfg: SearchConfig, trace: SearchTrace | None = None) -> SearchNode:
    """Run the search and return the best-scoring leaf.

    Ties go to the leaf with fewer terms, then to the one created first.
    Leaves whose term sets coincide are merged (their subtrees would be
    identical).  The loop stops early once a leaf reaches score 1.
    """
    ws = _workspace(train)
    root = root_node(train)
    leaves = [root]
    counter = itertools.count(1)
    if trace is not None:
        trace.best_scores.append(root.search_score)
        trace.leaf_counts.append(1)
    for iteration in range(1, cfg.total_iterations + 1):
        if best_leaf(leaves).search_score >= 1.0:
            break
        nodes: list[SearchNode] = []
        seen: set = set()
        for leaf in leaves:
            for child in _expand(ws, leaf, cfg, iteration, trace):
                key = frozenset(t.key for t in child.terms)
                if key in seen:
                    continue
                seen.add(key)
                if child is not leaf:
                    child = replace(child, order=next(counter))
                nodes.append(child)
        if cfg.max_leaves is not None and len(nodes) > cfg.max_leaves:
            keep = set(id(n) for n in sorted(nodes, key=_rank_key)[:cfg.max_leaves])
            nodes = [n for n in nodes if id(n) in keep]
        leaves = nodes
        if trace is not None:
            trace.best_scores.append(best_leaf(leaves).search_score)
            trace.leaf_counts.append(len(leaves))
    return best_leaf(leaves)


def grid_search(train: Dataset, grid: Sequence[SearchConfig],
                trace_factory: Callable[[SearchConfig], SearchTrace | None] | None = None,
                ) -> tuple[SearchConfig, SearchNode]:
    """Best configuration by training score; ties keep the earliest entry."""
    if not grid:
        raise InvalidArgumentError("grid must contain at least one configuration")
    best_cfg, best = None, None
    for cfg in grid:
        trace = trace_factory(cfg) if trace_factory else None
        node = run(train, cfg, trace)
        if best is None or node.search_score > best.search_score:
            best_cfg, best = cfg, node
        if best.search_score >= 1.0:
            # an exact fit cannot be beaten by a later entry
            break
    return best_cfg, best


def make_grid(taus: Iterable[float], min_is: Iterable[int], min_ts: Iterable[int], its: Iterable[int],
              **common) -> list[SearchConfig]:
    return [
        SearchConfig(tau=tau, min_i=mi, min_t=mt, extra_iters=it, **common)
        for tau, mi, mt, it in itertools.product(list(taus), list(min_is), list(min_ts), list(its))
    ]


def desk_grid(**common) -> list[SearchConfig]:
    """24-configuration grid small enough for interactive runs."""
    return make_grid((1e-6, 1e-3), (1, 3, 5), (5, 7), (0, 2), **common)


def full_grid(**common) -> list[SearchConfig]:
    """Full 5 x 9 x 5 x 6 grid of the benchmark protocol."""
    return make_grid((1e-6, 1e-5, 1e-4, 1e-3, 1e-2), range(1, 10), range(5, 10), range(0, 6), **common)
