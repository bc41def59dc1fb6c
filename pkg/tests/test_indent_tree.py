import pytest

from conftest import NESTED_SNIPPET
from sumsearch.indent_tree import (
    IndentTreeError,
    build_tree,
    format_tree,
    postorder_schedule,
    pretty_print,
)


class TestBuildTree:
    def test_nested_fixture_shape(self):
        tree = build_tree(NESTED_SNIPPET)
        root = tree.root
        assert root.parent is None
        assert root.statement_text.startswith("def deepdependencytargets")
        children = [tree.node(c).statement_text for c in root.children]
        assert children == [
            "dependencies = set()",
            "pending = set(roots)",
            "while pending:",
            "return list(dependencies)",
        ]
        while_node = tree.node(root.children[2])
        assert len(while_node.children) == 1
        if_node = tree.node(while_node.children[0])
        assert if_node.statement_text == "if (r in dependencies):"
        assert [tree.node(c).statement_text for c in if_node.children] == ["continue"]

    def test_single_line(self):
        tree = build_tree("def f():")
        assert len(tree) == 1
        assert tree.root.children == ()

    def test_two_space_variant_same_shape(self):
        two_space = NESTED_SNIPPET.replace("    ", "  ")
        a = build_tree(NESTED_SNIPPET)
        b = build_tree(two_space)
        assert [(n.statement_text, n.parent, n.children) for n in a.nodes] == [
            (n.statement_text, n.parent, n.children) for n in b.nodes
        ]

    def test_tab_indentation(self):
        tabbed = "def f():\n\tx = 1\n\ty = 2"
        tree = build_tree(tabbed)
        assert len(tree.root.children) == 2

    def test_blank_and_comment_lines_dropped(self):
        src = "def f():\n\n    # setup\n    x = 1\n"
        tree = build_tree(src)
        assert len(tree) == 2

    def test_bracket_continuation_merged(self):
        src = "def f():\n    return list(\n        sorted(items),\n    )\n"
        tree = build_tree(src)
        assert len(tree) == 2
        assert tree.node(1).statement_text == "return list( sorted(items), )"

    def test_dedent_to_unseen_level_rejected(self):
        src = "def f():\n    if x:\n            y = 1\n        z = 2\n"
        with pytest.raises(IndentTreeError, match="line 4"):
            build_tree(src)

    def test_empty_input_rejected(self):
        with pytest.raises(IndentTreeError, match="empty"):
            build_tree("\n\n# only a comment\n")

    def test_second_top_level_statement_rejected(self):
        with pytest.raises(IndentTreeError, match="line 2"):
            build_tree("def f():\ndef g():\n")

    def test_indent_index_increments(self):
        tree = build_tree(NESTED_SNIPPET)
        for node in tree.nodes:
            if node.parent is not None:
                assert node.indent_index == tree.node(node.parent).indent_index + 1
        assert tree.root.indent_index == 0

    def test_sibling_order_matches_source(self):
        tree = build_tree("def f():\n    a = 1\n    b = 2\n    c = 3\n")
        assert [tree.node(c).statement_text for c in tree.root.children] == ["a = 1", "b = 2", "c = 3"]

    def test_pretty_print_round_trip(self):
        tree = build_tree(NESTED_SNIPPET)
        rebuilt = build_tree(pretty_print(tree))
        assert [(n.statement_text, n.parent, n.children) for n in tree.nodes] == [
            (n.statement_text, n.parent, n.children) for n in rebuilt.nodes
        ]

    def test_format_tree_contains_ids(self):
        text = format_tree(build_tree("def f():\n    x = 1"))
        assert "0" in text and "x = 1" in text


class TestPostorderSchedule:
    def test_root_with_two_leaves(self):
        tree = build_tree("def f():\n    a = 1\n    b = 2\n")
        plan = postorder_schedule(tree)
        assert len(plan) == 1
        step = plan.steps[0]
        assert step.output_node == tree.root.node_id
        assert step.input_node_ids == (0, 1, 2)

    def test_nested_fixture_three_steps(self):
        tree = build_tree(NESTED_SNIPPET)
        plan = postorder_schedule(tree)
        assert len(plan) == 3
        texts = [tree.node(s.output_node).statement_text for s in plan]
        assert texts[0] == "if (r in dependencies):"
        assert texts[1] == "while pending:"
        assert texts[2].startswith("def deepdependencytargets")
        first = plan.steps[0]
        assert [tree.node(i).statement_text for i in first.input_node_ids] == [
            "if (r in dependencies):",
            "continue",
        ]

    def test_chain(self):
        tree = build_tree("a:\n    b:\n        c\n")
        plan = postorder_schedule(tree)
        assert [(s.output_node, s.input_node_ids) for s in plan] == [(1, (1, 2)), (0, (0, 1))]

    def test_leaves_have_no_steps(self):
        tree = build_tree("def f():\n    x = 1\n")
        plan = postorder_schedule(tree)
        outputs = {s.output_node for s in plan}
        assert 1 not in outputs

    def test_step_count_equals_internal_nodes(self):
        for src in [
            NESTED_SNIPPET,
            "def f():",
            "def f():\n    if a:\n        b\n    if c:\n        d\n",
            "def f():\n    x\n    y\n    z\n",
        ]:
            tree = build_tree(src)
            internal = sum(1 for n in tree.nodes if n.children)
            assert len(postorder_schedule(tree)) == internal

    def test_children_resolved_before_parent(self):
        tree = build_tree(NESTED_SNIPPET)
        plan = postorder_schedule(tree)
        done = set()
        for step in plan:
            for node_id in step.input_node_ids[1:]:
                node = tree.node(node_id)
                if node.children:
                    assert node_id in done
            done.add(step.output_node)
