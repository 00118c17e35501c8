import numpy as np
import pytest

from nlns import (
    Constraint,
    ConstraintKind,
    CspInstance,
    Graph,
    ModelHyper,
    ProblemKind,
    build_instance,
    init_model,
    parse_sudoku,
)

# Classic solved 9x9 grid (widely published example).
SOLVED_9 = (
    "534678912672195348198342567"
    "859761423426853791713924856"
    "961537284287419635345286179"
)
PUZZLE_9 = (
    "53..7....6..195....98....6."
    "8...6...34..8.3..17...2...6"
    ".6....28....419..5....8..79"
)

SOLVED_4 = "1234341221434321"


@pytest.fixture
def empty_sudoku9():
    return parse_sudoku("." * 81)


@pytest.fixture
def empty_sudoku4():
    return parse_sudoku("." * 16)


@pytest.fixture
def triangle3():
    """Triangle graph, 3 colors: feasible."""
    return build_instance(Graph(3, ((0, 1), (0, 2), (1, 2))), ProblemKind.GRAPH_COLORING, 3)


@pytest.fixture
def triangle2():
    """Triangle graph, 2 colors: odd cycle, infeasible."""
    return build_instance(Graph(3, ((0, 1), (0, 2), (1, 2))), ProblemKind.GRAPH_COLORING, 2)


@pytest.fixture
def edge_maxcut():
    return build_instance(Graph(2, ((0, 1),)), ProblemKind.MAXCUT, 2)


@pytest.fixture
def pair_noteq():
    """Two free variables, one NotEqual, 2 values."""
    return build_instance(Graph(2, ((0, 1),)), ProblemKind.GRAPH_COLORING, 2)


def make_coloring(n, edges, k, fixed=None, given=None):
    cons = tuple(Constraint(ConstraintKind.NOT_EQUAL, e) for e in edges)
    fx = np.zeros(n, dtype=bool) if fixed is None else np.asarray(fixed, bool)
    gv = np.full(n, -1, dtype=np.int64)
    if given is not None:
        gv = np.asarray(given, np.int64)
    return CspInstance(ProblemKind.GRAPH_COLORING, tuple(range(k)), cons, fx, gv)


def tiny_model(instance, seed=0, **overrides):
    kw = dict(domain_size=instance.domain_size, kind=instance.problem_kind,
              n_layers=1, width=8, n_heads=2, n_max=max(16, instance.n),
              use_conflict=instance.problem_kind is not ProblemKind.SUDOKU)
    kw.update(overrides)
    return init_model(ModelHyper(**kw), seed=seed)


def random_instance(rng, kind="coloring"):
    """Small random instance for fuzzing: random graph or random-given sudoku."""
    if kind == "sudoku":
        size = 4
        n_givens = int(rng.integers(0, 9))
        from nlns import gen_sudoku
        return gen_sudoku(size, n_givens, rng)
    n = int(rng.integers(3, 12))
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(iu.size) < 0.4
    edges = tuple(zip(iu[keep].tolist(), ju[keep].tolist()))
    if not edges:
        edges = ((0, 1),)
    k = int(rng.integers(2, 5))
    kind_enum = ProblemKind.MAXCUT if (k == 2 and rng.random() < 0.5) else ProblemKind.GRAPH_COLORING
    return build_instance(Graph(n, edges), kind_enum, k)
