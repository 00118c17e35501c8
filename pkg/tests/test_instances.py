"""Parsers, generators, serialization round trips, and dataset handling."""

import numpy as np
import pytest

from nlns import (
    ConfigError,
    DatasetSpec,
    Graph,
    ParseError,
    ProblemKind,
    UnsupportedFeatureError,
    build_instance,
    cost,
    cut_size,
    eval_hard,
    gen_dataset,
    gen_random_graph,
    gen_sudoku,
    load_dataset,
    parse_dimacs_col,
    parse_gset,
    parse_sudoku,
    serialize_dimacs_col,
    serialize_gset,
    serialize_sudoku,
)
from conftest import PUZZLE_9, SOLVED_9


class TestParseSudoku:
    def test_empty_grid_structure(self):
        inst = parse_sudoku("." * 81)
        assert inst.n == 81
        assert inst.n_constraints == 27
        assert inst.fixed.sum() == 0

    def test_solved_grid_feasible(self):
        inst = parse_sudoku(SOLVED_9)
        assert inst.fixed.all()
        assert eval_hard(inst, inst.given_values)[0] == 0

    def test_puzzle_with_solution_field(self):
        inst = parse_sudoku(PUZZLE_9 + "," + SOLVED_9)
        assert inst.ground_truth is not None
        assert eval_hard(inst, inst.ground_truth)[0] == 0
        assert np.array_equal(inst.ground_truth[inst.fixed],
                              inst.given_values[inst.fixed])

    def test_duplicate_given_names_row(self):
        with pytest.raises(ParseError, match="row 1"):
            parse_sudoku("11.." + "." * 12)

    def test_duplicate_given_names_column(self):
        with pytest.raises(ParseError, match="column 1"):
            parse_sudoku("1..." + "...." + "1..." + "....")

    def test_bad_length(self):
        with pytest.raises(ParseError, match="16 or 81"):
            parse_sudoku("." * 20)

    def test_bad_character(self):
        with pytest.raises(ParseError, match="cell 3"):
            parse_sudoku("..x." + "." * 12)

    def test_out_of_range_digit_for_4x4(self):
        with pytest.raises(ParseError):
            parse_sudoku("5..." + "." * 12)

    def test_solution_contradicting_given(self):
        bad = "2" + SOLVED_9[1:]
        with pytest.raises(ParseError, match="contradicts"):
            parse_sudoku(SOLVED_9[0] + "." * 80 + "," + bad)

    def test_zero_and_dot_blanks_equivalent(self):
        a = parse_sudoku("12.." + "." * 12)
        b = parse_sudoku("1200" + "0" * 12)
        assert a.structurally_equal(b)

    def test_round_trip(self):
        for line in ("." * 16, "12.." + "." * 12, PUZZLE_9 + "," + SOLVED_9):
            inst = parse_sudoku(line)
            again = parse_sudoku(serialize_sudoku(inst))
            assert inst.structurally_equal(again)


class TestParseGraphs:
    TRIANGLE_COL = "c a comment\np edge 3 3\ne 1 2\ne 2 3\ne 1 3\n"

    def test_dimacs_triangle(self):
        g = parse_dimacs_col(self.TRIANGLE_COL)
        assert g.n == 3
        assert g.edges == ((0, 1), (0, 2), (1, 2))

    def test_dimacs_duplicate_edges_dedup(self):
        g = parse_dimacs_col("p edge 2 3\ne 1 2\ne 2 1\ne 1 2\n")
        assert g.edges == ((0, 1),)

    def test_dimacs_self_loop_rejected(self):
        with pytest.raises(ParseError, match="self-loop"):
            parse_dimacs_col("p edge 2 1\ne 1 1\n")

    def test_dimacs_out_of_range(self):
        with pytest.raises(ParseError, match="out of range"):
            parse_dimacs_col("p edge 2 1\ne 1 5\n")

    def test_dimacs_missing_header(self):
        with pytest.raises(ParseError, match="header|problem line"):
            parse_dimacs_col("e 1 2\n")

    def test_gset_triangle(self):
        g = parse_gset("3 3\n1 2 1\n2 3 1\n1 3 1\n")
        assert g.n == 3 and len(g.edges) == 3

    def test_gset_header_sets_vertex_count(self):
        # G1-family files declare 800 vertices in the header.
        g = parse_gset("800 2\n1 2 1\n799 800 1\n")
        assert g.n == 800
        assert g.edges == ((0, 1), (798, 799))

    def test_gset_nonunit_weight_unsupported(self):
        with pytest.raises(UnsupportedFeatureError):
            parse_gset("2 1\n1 2 -1\n")

    def test_graph_round_trips(self):
        rng = np.random.default_rng(70)
        g = gen_random_graph(12, 0.4, rng)
        assert parse_dimacs_col(serialize_dimacs_col(g)) == g
        assert parse_gset(serialize_gset(g)) == g


class TestBuildInstance:
    def test_triangle_three_colorable(self):
        g = parse_dimacs_col(TestParseGraphs.TRIANGLE_COL)
        inst = build_instance(g, ProblemKind.GRAPH_COLORING, 3)
        assert eval_hard(inst, np.array([0, 1, 2]))[0] == 0

    def test_triangle_two_colors_always_violated(self):
        g = parse_dimacs_col(TestParseGraphs.TRIANGLE_COL)
        inst = build_instance(g, ProblemKind.GRAPH_COLORING, 2)
        for bits in range(8):
            x = np.array([(bits >> i) & 1 for i in range(3)])
            assert eval_hard(inst, x)[0] >= 1  # odd cycle

    def test_path_maxcut_optimum_two(self):
        inst = build_instance(Graph(3, ((0, 1), (1, 2))), ProblemKind.MAXCUT, 2)
        best = max(cut_size(inst, np.array([(b >> i) & 1 for i in range(3)]))
                   for b in range(8))
        assert best == 2
        assert cut_size(inst, np.array([0, 1, 0])) == 2

    def test_maxcut_requires_two_values(self):
        with pytest.raises(ConfigError):
            build_instance(Graph(2, ((0, 1),)), ProblemKind.MAXCUT, 3)


class TestGenerators:
    def test_edge_probability_extremes(self):
        rng = np.random.default_rng(71)
        assert gen_random_graph(10, 0.0, rng).edges == ()
        assert len(gen_random_graph(10, 1.0, rng).edges) == 45

    def test_edge_count_statistics(self):
        rng = np.random.default_rng(72)
        n, p, reps = 20, 0.3, 200
        pairs = n * (n - 1) // 2
        counts = [len(gen_random_graph(n, p, rng).edges) for _ in range(reps)]
        sigma_mean = np.sqrt(pairs * p * (1 - p) / reps)
        assert abs(np.mean(counts) - pairs * p) <= 3 * sigma_mean

    def test_gen_sudoku_ground_truth_feasible(self):
        rng = np.random.default_rng(73)
        for size in (4, 9):
            inst = gen_sudoku(size, givens=max(1, size * size // 3), rng=rng)
            assert eval_hard(inst, inst.ground_truth)[0] == 0
            assert np.array_equal(inst.ground_truth[inst.fixed],
                                  inst.given_values[inst.fixed])
            assert inst.fixed.sum() == max(1, size * size // 3)

    def test_gen_sudoku_round_trip(self):
        rng = np.random.default_rng(74)
        inst = gen_sudoku(4, 8, rng)
        assert inst.structurally_equal(parse_sudoku(serialize_sudoku(inst)))


class TestLoadInstanceFile:
    def test_sniffs_all_three_formats(self, tmp_path):
        from nlns import load_instance_file
        sudoku = tmp_path / "p.txt"
        sudoku.write_text("12.." + "." * 12 + "\n")
        assert load_instance_file(sudoku).problem_kind is ProblemKind.SUDOKU

        col = tmp_path / "g.col"
        col.write_text(TestParseGraphs.TRIANGLE_COL)
        inst = load_instance_file(col, problem=ProblemKind.GRAPH_COLORING, k=3)
        assert inst.domain_size == 3 and inst.n_constraints == 3

        gset = tmp_path / "g.gset"
        gset.write_text("3 2\n1 2 1\n2 3 1\n")
        inst = load_instance_file(gset, problem=ProblemKind.MAXCUT)
        assert inst.problem_kind is ProblemKind.MAXCUT and inst.domain_size == 2


class TestDatasets:
    def test_sudoku_dataset_round_trip(self, tmp_path):
        spec = DatasetSpec(kind="sudoku4", count=5, seed=3, givens=9)
        gen_dataset(spec, tmp_path / "ds")
        loaded = load_dataset(tmp_path / "ds")
        assert len(loaded) == 5
        for inst in loaded:
            assert inst.fixed.sum() == 9
            assert inst.ground_truth is not None

    def test_graph_dataset_as_coloring_and_maxcut(self, tmp_path):
        spec = DatasetSpec(kind="graph", count=3, seed=4, n=10, p=0.3, k=3)
        gen_dataset(spec, tmp_path / "g")
        coloring = load_dataset(tmp_path / "g", problem=ProblemKind.GRAPH_COLORING)
        maxcut = load_dataset(tmp_path / "g", problem=ProblemKind.MAXCUT)
        assert len(coloring) == len(maxcut) == 3
        assert coloring[0].domain_size == 3
        assert maxcut[0].domain_size == 2

    def test_generation_is_seed_deterministic(self, tmp_path):
        spec = DatasetSpec(kind="sudoku4", count=4, seed=9, givens=8)
        gen_dataset(spec, tmp_path / "a")
        gen_dataset(spec, tmp_path / "b")
        assert (tmp_path / "a" / "instances.txt").read_text() == \
            (tmp_path / "b" / "instances.txt").read_text()

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(ParseError):
            load_dataset(tmp_path)
