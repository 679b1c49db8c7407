import itertools
import math

import numpy as np
import pytest

import cmnlearn as cm
from helpers import (all_structures, brute_force_partition, four_node_structure,
                     six_node_graph, six_node_structure)


class TestNeighborsGraphs:
    def test_empty_graph_d3(self):
        graphs = cm.neighbors_graphs(cm.UndirectedGraph.empty(3))
        assert len(graphs) == 3
        assert all(len(g.edges) == 1 for g in graphs)

    def test_complete_graph_d3(self):
        graphs = cm.neighbors_graphs(cm.UndirectedGraph.complete(3))
        assert len(graphs) == 3
        assert all(len(g.edges) == 2 for g in graphs)

    def test_path_graph_d6(self):
        path = cm.UndirectedGraph.from_edges(6, [(i, i + 1) for i in range(5)])
        graphs = cm.neighbors_graphs(path)
        assert len(graphs) == 15
        pairs = list(itertools.combinations(range(6), 2))
        for pair, g in zip(pairs, graphs):
            assert g.edges ^ path.edges == {pair}


class TestCommonNeighbors:
    def test_six_node_graph(self):
        assert cm.common_neighbors(six_node_graph(), 1, 4) == (2,)

    def test_four_node_complete(self):
        graph = cm.UndirectedGraph.complete(4)
        assert cm.common_neighbors(graph, 0, 2) == (1, 3)

    def test_no_triangle(self):
        graph = cm.UndirectedGraph.from_edges(3, [(0, 1), (1, 2)])
        assert cm.common_neighbors(graph, 0, 1) == ()


class TestBlanketPartition:
    def test_final_partition_of_node_four(self):
        """Ternary node with blanket (1,2,3), contexts on edges (1,4) and (2,4):
        three classes of size 7 (one per value of coordinate 3) plus six
        singletons with first coordinate 0 and middle coordinate nonzero."""
        part = cm.build_blanket_partition(six_node_structure(), (3,) * 6, 4)
        assert part.blanket == (1, 2, 3)
        assert part.q == 9
        assert sorted(part.class_sizes().tolist()) == [1] * 6 + [7] * 3
        configs = list(itertools.product(range(3), repeat=3))
        mapping = {c: part.classes[i] for i, c in enumerate(configs)}
        for v in range(3):
            big = {(0, 0, v), (1, 0, v), (1, 1, v), (1, 2, v),
                   (2, 0, v), (2, 1, v), (2, 2, v)}
            ids = {mapping[c] for c in big}
            assert len(ids) == 1
            assert mapping[(0, 0, v)] == v  # lexicographic id assignment
        singles = [(0, 1, 0), (0, 1, 1), (0, 1, 2), (0, 2, 0), (0, 2, 1), (0, 2, 2)]
        assert [mapping[c] for c in singles] == [3, 4, 5, 6, 7, 8]

    def test_all_contexts_empty_gives_singletons(self):
        s = cm.ContextualStructure.empty(six_node_graph())
        part = cm.build_blanket_partition(s, (3,) * 6, 4)
        assert part.q == 27
        assert part.class_sizes().max() == 1

    def test_two_node_blanket_merge(self):
        graph = cm.UndirectedGraph.complete(3)
        s = cm.ContextualStructure(graph, {(0, 2): [(0,)]})
        part = cm.build_blanket_partition(s, (2, 2, 2), 2)
        assert part.blanket == (0, 1)
        # classes over (x0, x1): {(0,0),(1,0)} then {(0,1)} then {(1,1)}
        assert part.classes.tolist() == [0, 1, 0, 2]
        assert part.q == 3

    def test_empty_blanket(self):
        s = cm.ContextualStructure.empty(cm.UndirectedGraph.empty(2))
        part = cm.build_blanket_partition(s, (2, 2), 0)
        assert part.blanket == ()
        assert part.q == 1

    def test_guard_on_huge_blankets(self):
        star = cm.UndirectedGraph.from_edges(19, [(i, 18) for i in range(18)])
        s = cm.ContextualStructure.empty(star)
        with pytest.raises(cm.CapacityError):
            cm.build_blanket_partition(s, (2,) * 19, 18)


class TestPartitionProperties:
    @pytest.mark.parametrize("cards", [(2, 2, 2), (3, 2, 2), (2, 3, 3)])
    def test_matches_brute_force_exhaustively(self, cards):
        for s in all_structures(3, cards):
            for j in range(3):
                part = cm.build_blanket_partition(s, cards, j)
                oracle = brute_force_partition(s, cards, j)
                configs = list(itertools.product(
                    *(range(cards[i]) for i in part.blanket)))
                got = {c: int(part.classes[i]) for i, c in enumerate(configs)}
                assert got == oracle

    def test_merge_order_independence(self):
        s = six_node_structure()
        cards = (3,) * 6
        part = cm.build_blanket_partition(s, cards, 4)
        configs = list(itertools.product(range(3), repeat=3))
        reference = {c: int(part.classes[i]) for i, c in enumerate(configs)}
        for seed in range(5):
            assert brute_force_partition(s, cards, 4, rule_order_seed=seed) == reference

    def test_class_sizes_sum_to_blanket_space(self):
        cards = (3, 3, 4, 2, 3, 2)
        s = six_node_structure()
        for j in range(6):
            part = cm.build_blanket_partition(s, cards, j)
            assert part.class_sizes().sum() == math.prod(
                cards[i] for i in part.blanket)

    def test_adding_element_never_increases_q(self):
        cards = (3,) * 6
        base = cm.ContextualStructure.empty(six_node_graph())
        grown = [base,
                 base.with_context_element((1, 4), (0,)),
                 base.with_context_element((1, 4), (0,)).with_context_element((2, 4), (1,))]
        qs = [cm.build_blanket_partition(s, cards, 4).q for s in grown]
        assert qs[0] >= qs[1] >= qs[2]

    def test_context_affects_only_its_edge_nodes(self):
        cards = (3,) * 6
        empty = cm.ContextualStructure.empty(six_node_graph())
        with_ctx = empty.with_context_element((2, 4), (1,))
        for j in range(6):
            before = cm.build_blanket_partition(empty, cards, j)
            after = cm.build_blanket_partition(with_ctx, cards, j)
            if j in (2, 4):
                assert after.q < before.q
            else:
                np.testing.assert_array_equal(before.classes, after.classes)


class TestValidateStructure:
    def test_four_node_structure_valid(self):
        report = cm.validate_structure(four_node_structure(), (2,) * 4)
        assert report.ok

    def test_full_outcome_space_is_irregular(self):
        graph = cm.UndirectedGraph.complete(3)
        s = cm.ContextualStructure(graph, {(0, 1): [(0,), (1,)]})
        report = cm.validate_structure(s, (2, 2, 2))
        assert not report.ok
        assert any("regularity" in v for v in report.violations)

    def test_context_without_common_neighbors(self):
        graph = cm.UndirectedGraph.from_edges(3, [(0, 1)])
        with pytest.raises(cm.StructureError):
            cm.ContextualStructure(graph, {(0, 1): [(0,)]})

    def test_stale_arity_rejected(self):
        graph = cm.UndirectedGraph.complete(4)
        with pytest.raises(cm.StructureError, match="arity"):
            cm.ContextualStructure(graph, {(0, 2): [(0,)]})

    def test_out_of_range_coordinate(self):
        graph = cm.UndirectedGraph.complete(3)
        s = cm.ContextualStructure(graph, {(0, 1): [(5,)]})
        report = cm.validate_structure(s, (2, 2, 2))
        assert not report.ok


class TestRenderLabeledGraph:
    def test_star_compression(self):
        graph = cm.UndirectedGraph.complete(4)
        s = cm.ContextualStructure(graph, {(1, 3): [(1, 0), (1, 1)]})
        assert cm.render_labeled_graph(s, (2,) * 4) == "1–3: {1*}"

    def test_plain_configurations(self):
        graph = cm.UndirectedGraph.complete(4)
        s = cm.ContextualStructure(graph, {(0, 2): [(0, 1), (1, 0)]})
        assert cm.render_labeled_graph(s, (2,) * 4) == "0–2: {01,10}"

    def test_empty_context_omitted(self):
        s = cm.ContextualStructure.empty(cm.UndirectedGraph.complete(3))
        assert cm.render_labeled_graph(s, (2,) * 3) == ""


class TestStructureJson:
    def test_round_trip(self):
        s = four_node_structure()
        obj = cm.structure_to_json_dict(s, (2,) * 4)
        again, cards = cm.structure_from_json_dict(obj)
        assert again == s
        assert cards == (2, 2, 2, 2)

    def test_stale_cn_rejected(self):
        s = four_node_structure()
        obj = cm.structure_to_json_dict(s, (2,) * 4)
        obj["edges"] = [e for e in obj["edges"] if e != [1, 2]]
        with pytest.raises(cm.StructureError):
            cm.structure_from_json_dict(obj)

    def test_irregular_rejected(self):
        graph = cm.UndirectedGraph.complete(3)
        s = cm.ContextualStructure(graph, {(0, 1): [(0,), (1,)]})
        obj = cm.structure_to_json_dict(s, (2, 2, 2))
        with pytest.raises(cm.StructureError, match="regularity"):
            cm.structure_from_json_dict(obj)
