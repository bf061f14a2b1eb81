"""Symbolic regression with Interaction-Transformation expressions."""

from .errors import (
    EmptyDataError,
    IndeterminateTermError,
    InvalidArgumentError,
    InvalidDimensionError,
    InvalidTermError,
    SymTreeError,
)
from .it import (
    DEFAULT_TRANSFORMS,
    Dataset,
    Expression,
    Term,
    Transform,
    eval_expression,
    eval_term,
    expression_size,
    make_linear_terms,
    render,
)
from .regression import FitResult, design_matrix, fit, mae, score
from .search import (
    SearchConfig,
    SearchNode,
    SearchTrace,
    desk_grid,
    expand,
    filter_candidates,
    full_grid,
    greedy_search,
    grid_search,
    interaction,
    inverse_interaction,
    run,
    simplify,
    transformation,
)

__version__ = "0.1.0"
