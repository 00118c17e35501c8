"""Instance parsing, generation, and dataset handling.

Three text formats are supported:

* Sudoku lines: 16 or 81 characters, digits for givens and '0' or '.' for
  blanks, optionally followed by ',' and a fully solved reference grid.
* DIMACS coloring files: "p edge n m" header and 1-indexed "e u v" lines.
* GSET files: "n m" header and 1-indexed "u v w" edge lines; only unit
  weights are accepted.

Datasets are directories with a ``manifest.json`` (the generator's
parameters) plus the instance files written by :func:`gen_dataset`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from .csp import Constraint, ConstraintKind, CspInstance, ProblemKind, eval_hard
from .errors import ConfigError, ParseError, UnsupportedFeatureError


# ---------------------------------------------------------------------------
# Sudoku


def sudoku_constraints(size: int) -> list[Constraint]:
    """Row, column, and box AllDifferent constraints for a size x size grid."""
    box = int(math.isqrt(size))
    if box * box != size:
        raise ConfigError(f"sudoku size must be a perfect square, got {size}")
    grid = np.arange(size * size).reshape(size, size)
    cons = []
    for r in range(size):
        cons.append(Constraint(ConstraintKind.ALL_DIFFERENT, tuple(grid[r])))
    for c in range(size):
        cons.append(Constraint(ConstraintKind.ALL_DIFFERENT, tuple(grid[:, c])))
    for br in range(box):
        for bc in range(box):
            cells = grid[br * box:(br + 1) * box, bc * box:(bc + 1) * box].reshape(-1)
            cons.append(Constraint(ConstraintKind.ALL_DIFFERENT, tuple(cells)))
    return cons


def _sudoku_scope_name(size: int, k: int) -> str:
    if k < size:
        return f"row {k + 1}"
    if k < 2 * size:
        return f"column {k - size + 1}"
    return f"box {k - 2 * size + 1}"


def parse_sudoku(line: str, name: str = "") -> CspInstance:
    """Build a Sudoku instance from one puzzle line, optionally with solution."""
    parts = line.strip().replace(",", " ").split()
    if not parts:
        raise ParseError("empty sudoku line")
    puzzle = parts[0]
    if len(puzzle) == 16:
        size = 4
    elif len(puzzle) == 81:
        size = 9
    else:
        raise ParseError(f"sudoku line must have 16 or 81 cells, got {len(puzzle)}")
    digits = "123456789"[:size]
    values = np.full(size * size, -1, dtype=np.int64)
    fixed = np.zeros(size * size, dtype=bool)
    for i, ch in enumerate(puzzle):
        if ch in (".", "0"):
            continue
        if ch not in digits:
            raise ParseError(f"invalid cell character {ch!r}", position=f"cell {i + 1}")
        values[i] = digits.index(ch)
        fixed[i] = True
    given_values = np.where(fixed, values, -1)

    ground_truth = None
    if len(parts) > 1:
        sol = parts[1]
        if len(sol) != size * size:
            raise ParseError(f"solution length {len(sol)} does not match puzzle size")
        try:
            ground_truth = np.array([digits.index(ch) for ch in sol], dtype=np.int64)
        except ValueError:
            raise ParseError("solution contains a non-digit cell") from None
        mism = np.flatnonzero(fixed & (ground_truth != given_values))
        if mism.size:
            raise ParseError("solution contradicts a given", position=f"cell {mism[0] + 1}")

    cons = sudoku_constraints(size)
    # Reject givens that already clash so downstream search is well-posed.
    for k, c in enumerate(cons):
        scope = np.array(c.scope)
        vals = given_values[scope][fixed[scope]]
        if np.unique(vals).size != vals.size:
            dup = int(np.bincount(vals, minlength=size).argmax())
            raise ParseError(
                f"duplicate given digit {digits[dup]}", position=_sudoku_scope_name(size, k))

    inst = CspInstance(
        problem_kind=ProblemKind.SUDOKU,
        domain=tuple(int(d) for d in digits),
        constraints=tuple(cons),
        fixed=fixed,
        given_values=given_values,
        ground_truth=ground_truth,
        name=name,
    )
    if ground_truth is not None and eval_hard(inst, ground_truth)[0] != 0:
        raise ParseError("solution field is not a valid grid")
    return inst


def serialize_sudoku(instance: CspInstance) -> str:
    size = int(math.isqrt(instance.n))
    digits = "123456789"[:size]
    cells = [
        digits[instance.given_values[i]] if instance.fixed[i] else "."
        for i in range(instance.n)
    ]
    line = "".join(cells)
    if instance.ground_truth is not None:
        line += "," + "".join(digits[v] for v in instance.ground_truth)
    return line


# ---------------------------------------------------------------------------
# graphs


@dataclass(frozen=True)
class Graph:
    """Undirected simple graph; edges stored deduplicated as (u, v), u < v."""

    n: int
    edges: tuple[tuple[int, int], ...]


def _add_edge(edges: set, u: int, v: int, n: int, lineno: int):
    if not (1 <= u <= n and 1 <= v <= n):
        raise ParseError(f"edge endpoint out of range 1..{n}", position=f"line {lineno}")
    if u == v:
        raise ParseError(f"self-loop on vertex {u}", position=f"line {lineno}")
    edges.add((min(u, v) - 1, max(u, v) - 1))


def parse_dimacs_col(text: str) -> Graph:
    """Parse a DIMACS coloring file: 'p edge n m' then 'e u v' lines."""
    n = None
    edges: set[tuple[int, int]] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("c"):
            continue
        fields = line.split()
        if fields[0] == "p":
            if len(fields) != 4 or fields[1] != "edge":
                raise ParseError("malformed problem line, expected 'p edge n m'",
                                 position=f"line {lineno}")
            n = int(fields[2])
        elif fields[0] == "e":
            if n is None:
                raise ParseError("edge before problem line", position=f"line {lineno}")
            if len(fields) != 3:
                raise ParseError("malformed edge line, expected 'e u v'",
                                 position=f"line {lineno}")
            _add_edge(edges, int(fields[1]), int(fields[2]), n, lineno)
        else:
            raise ParseError(f"unknown line type {fields[0]!r}", position=f"line {lineno}")
    if n is None:
        raise ParseError("missing 'p edge n m' header")
    return Graph(n=n, edges=tuple(sorted(edges)))


def serialize_dimacs_col(graph: Graph) -> str:
    lines = [f"p edge {graph.n} {len(graph.edges)}"]
    lines += [f"e {u + 1} {v + 1}" for u, v in graph.edges]
    return "\n".join(lines) + "\n"


def parse_gset(text: str) -> Graph:
    """Parse a GSET file: 'n m' header then 'u v w' lines with w = 1."""
    lines = [ln.strip() for ln in text.splitlines()]
    rows = [(i + 1, ln) for i, ln in enumerate(lines) if ln]
    if not rows:
        raise ParseError("empty gset file")
    header = rows[0][1].split()
    if len(header) != 2:
        raise ParseError("malformed header, expected 'n m'", position="line 1")
    n = int(header[0])
    edges: set[tuple[int, int]] = set()
    for lineno, line in rows[1:]:
        fields = line.split()
        if len(fields) != 3:
            raise ParseError("malformed edge line, expected 'u v w'",
                             position=f"line {lineno}")
        u, v, w = int(fields[0]), int(fields[1]), int(fields[2])
        if w != 1:
            raise UnsupportedFeatureError(
                f"edge weight {w} unsupported, only unweighted graphs are handled",
                position=f"line {lineno}")
        _add_edge(edges, u, v, n, lineno)
    return Graph(n=n, edges=tuple(sorted(edges)))


def serialize_gset(graph: Graph) -> str:
    lines = [f"{graph.n} {len(graph.edges)}"]
    lines += [f"{u + 1} {v + 1} 1" for u, v in graph.edges]
    return "\n".join(lines) + "\n"


def build_instance(graph: Graph, kind: ProblemKind, k: int, name: str = "") -> CspInstance:
    """One NotEqual constraint per edge over a k-value domain (k = 2 for MaxCut)."""
    if kind is ProblemKind.MAXCUT:
        if k != 2:
            raise ConfigError("MaxCut instances must have a 2-value domain")
    elif kind is ProblemKind.GRAPH_COLORING:
        if k < 2:
            raise ConfigError("coloring needs at least 2 colors")
    else:
        raise ConfigError(f"cannot build a {kind.value} instance from a graph")
    cons = tuple(Constraint(ConstraintKind.NOT_EQUAL, e) for e in graph.edges)
    return CspInstance(
        problem_kind=kind,
        domain=tuple(range(k)),
        constraints=cons,
        fixed=np.zeros(graph.n, dtype=bool),
        given_values=np.full(graph.n, -1, dtype=np.int64),
        name=name,
    )


def gen_random_graph(n: int, p: float, rng: np.random.Generator) -> Graph:
    """Erdos-Renyi G(n, p) without self-loops."""
    if not 0 <= p <= 1:
        raise ConfigError(f"edge probability must be in [0, 1], got {p}")
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(iu.size) < p
    edges = tuple(zip(iu[keep].tolist(), ju[keep].tolist()))
    return Graph(n=n, edges=edges)


# ---------------------------------------------------------------------------
# Sudoku generation: fill a grid by randomized backtracking, then dig holes.


def _fill_grid(size: int, rng: np.random.Generator) -> np.ndarray | None:
    box = int(math.isqrt(size))
    grid = np.full((size, size), -1, dtype=np.int64)

    def ok(r, c, v):
        if v in grid[r] or v in grid[:, c]:
            return False
        br, bc = (r // box) * box, (c // box) * box
        return v not in grid[br:br + box, bc:bc + box]

    def solve(cell):
        if cell == size * size:
            return True
        r, c = divmod(cell, size)
        for v in rng.permutation(size):
            if ok(r, c, v):
                grid[r, c] = v
                if solve(cell + 1):
                    return True
                grid[r, c] = -1
        return False

    return grid.reshape(-1) if solve(0) else None


def gen_sudoku(size: int, givens: int, rng: np.random.Generator,
               name: str = "") -> CspInstance:
    """Random Sudoku: complete a grid, then remove cells down to `givens`.

    The completed grid is stored as the ground truth. Uniqueness of the
    solution is not enforced.
    """
    if not 0 <= givens <= size * size:
        raise ConfigError(f"givens must be in [0, {size * size}], got {givens}")
    solution = _fill_grid(size, rng)
    assert solution is not None  # backtracking over a full grid always succeeds
    keep = rng.permutation(size * size)[:givens]
    fixed = np.zeros(size * size, dtype=bool)
    fixed[keep] = True
    return CspInstance(
        problem_kind=ProblemKind.SUDOKU,
        domain=tuple(range(1, size + 1)),
        constraints=tuple(sudoku_constraints(size)),
        fixed=fixed,
        given_values=np.where(fixed, solution, -1),
        ground_truth=solution,
        name=name,
    )


# ---------------------------------------------------------------------------
# datasets


@dataclass
class DatasetSpec:
    """Generator parameters for a dataset directory."""

    kind: str                 # sudoku4 | sudoku9 | graph
    count: int = 1
    seed: int = 0
    n: int = 50               # graph: vertex count
    p: float = 0.1            # graph: edge probability
    k: int = 2                # graph: suggested color count
    givens: int = 8           # sudoku: given cells per instance
    givens_max: int | None = None  # sudoku: upper bound for mixed difficulty

    def __post_init__(self):
        if self.kind not in ("sudoku4", "sudoku9", "graph"):
            raise ConfigError(f"unknown dataset kind {self.kind!r}")
        if not 0 <= self.p <= 1:
            raise ConfigError("edge probability must be in [0, 1]")
        if self.k < 2:
            raise ConfigError("color count must be >= 2")
        if self.count < 0:
            raise ConfigError("count must be >= 0")
        if self.givens_max is not None and self.givens_max < self.givens:
            raise ConfigError("givens_max must be >= givens")


MANIFEST_NAME = "manifest.json"


def gen_dataset(spec: DatasetSpec, out_dir) -> list[Path]:
    """Write instance files plus a manifest; returns the files written."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(spec.seed)
    written = []
    if spec.kind in ("sudoku4", "sudoku9"):
        size = 4 if spec.kind == "sudoku4" else 9
        hi = spec.givens if spec.givens_max is None else spec.givens_max
        lines = []
        for i in range(spec.count):
            g = int(rng.integers(spec.givens, hi + 1))
            inst = gen_sudoku(size, g, rng, name=f"{spec.kind}_{i:04d}")
            lines.append(serialize_sudoku(inst))
        path = out / "instances.txt"
        path.write_text("".join(line + "\n" for line in lines))
        written.append(path)
    else:
        for i in range(spec.count):
            graph = gen_random_graph(spec.n, spec.p, rng)
            path = out / f"graph_{i:04d}.col"
            path.write_text(serialize_dimacs_col(graph))
            written.append(path)
    (out / MANIFEST_NAME).write_text(json.dumps(asdict(spec), indent=2) + "\n")
    return written


def read_manifest(data_dir) -> DatasetSpec:
    path = Path(data_dir) / MANIFEST_NAME
    if not path.exists():
        raise ParseError(f"no {MANIFEST_NAME} in {data_dir}")
    return DatasetSpec(**json.loads(path.read_text()))


def load_dataset(data_dir, problem: ProblemKind | None = None,
                 k: int | None = None) -> list[CspInstance]:
    """Load a dataset directory as CSP instances.

    Sudoku datasets ignore ``problem``/``k``. Graph datasets are interpreted
    as coloring or MaxCut according to ``problem`` (default coloring) with
    ``k`` colors (default from the manifest).
    """
    data_dir = Path(data_dir)
    spec = read_manifest(data_dir)
    if spec.kind in ("sudoku4", "sudoku9"):
        text = (data_dir / "instances.txt").read_text()
        return [
            parse_sudoku(line, name=f"{spec.kind}_{i:04d}")
            for i, line in enumerate(text.splitlines())
            if line.strip()
        ]
    problem = problem or ProblemKind.GRAPH_COLORING
    k = spec.k if k is None else k
    if problem is ProblemKind.MAXCUT:
        k = 2
    instances = []
    for path in sorted(data_dir.glob("graph_*.col")):
        graph = parse_dimacs_col(path.read_text())
        instances.append(build_instance(graph, problem, k, name=path.stem))
    return instances


def load_instance_file(path, problem: ProblemKind | None = None,
                       k: int | None = None) -> CspInstance:
    """Load a single instance file, sniffing the format.

    A line of 16/81 grid characters is Sudoku; a 'p edge' header is DIMACS;
    an 'n m' header is GSET.
    """
    path = Path(path)
    text = path.read_text()
    first = next((ln.strip() for ln in text.splitlines() if ln.strip()), "")
    token = first.split()[0] if first.split() else ""
    if token == "p" or token == "c":
        graph = parse_dimacs_col(text)
    elif len(first.split()) == 2 and all(f.isdigit() for f in first.split()):
        graph = parse_gset(text)
    else:
        return parse_sudoku(first, name=path.stem)
    problem = problem or ProblemKind.GRAPH_COLORING
    if k is None:
        k = 2 if problem is ProblemKind.MAXCUT else 5
    return build_instance(graph, problem, k, name=path.stem)
