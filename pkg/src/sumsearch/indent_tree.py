"""Ordered statement trees built from indentation, plus their encoding schedule.

One node per logical source line; a statement's parent is the nearest
preceding statement indented one level less. Lines continued inside open
brackets are merged into their opening line first, comment-only and blank
lines are removed, and tabs advance to the next multiple of 8 columns.
"""

from __future__ import annotations

from dataclasses import dataclass

_TAB_STOP = 8
_OPEN = "([{"
_CLOSE = ")]}"
DEFAULT_INDENT_UNIT = 4


class IndentTreeError(ValueError):
    """Raised for source that cannot form a single-rooted statement tree."""


@dataclass(frozen=True)
class TreeNode:
    node_id: int
    statement_text: str
    indent_index: int
    parent: int | None
    children: tuple[int, ...]


@dataclass(frozen=True)
class IndentTree:
    nodes: tuple[TreeNode, ...]
    indent_unit: int

    @property
    def root(self) -> TreeNode:
        return self.nodes[0]

    def node(self, node_id: int) -> TreeNode:
        return self.nodes[node_id]

    def __len__(self) -> int:
        return len(self.nodes)


@dataclass(frozen=True)
class EncodeStep:
    """Encode ``input_node_ids`` as one list; the result becomes ``output_node``'s vector."""

    output_node: int
    input_node_ids: tuple[int, ...]


@dataclass(frozen=True)
class EncodePlan:
    steps: tuple[EncodeStep, ...]

    def __len__(self) -> int:
        return len(self.steps)

    def __iter__(self):
        return iter(self.steps)


def _indent_width(line: str) -> int:
    col = 0
    for ch in line:
        if ch == " ":
            col += 1
        elif ch == "\t":
            col += _TAB_STOP - (col % _TAB_STOP)
        else:
            break
    return col


def _bracket_delta(text: str) -> int:
    return sum(text.count(c) for c in _OPEN) - sum(text.count(c) for c in _CLOSE)


def _logical_lines(code_text: str) -> list[tuple[int, int, str]]:
    """(line number, indent width, statement text) with continuations merged."""
    logical: list[tuple[int, int, str]] = []
    depth = 0
    for lineno, raw in enumerate(code_text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if depth > 0 and logical:
            start, width, text = logical[-1]
            logical[-1] = (start, width, text + " " + stripped)
        else:
            logical.append((lineno, _indent_width(raw), stripped))
        depth = max(0, depth + _bracket_delta(stripped))
    return logical


def _infer_unit(widths: list[int]) -> int:
    deltas = [abs(b - a) for a, b in zip(widths, widths[1:]) if b != a]
    return min(deltas) if deltas else DEFAULT_INDENT_UNIT


def build_tree(code_text: str) -> IndentTree:
    """Build the statement tree of one snippet.

    The first statement is the root (normally the function definition); every
    deeper statement hangs off the closest shallower one above it.
    """
    lines = _logical_lines(code_text)
    if not lines:
        raise IndentTreeError("empty input: no statements found")
    unit = _infer_unit([w for _, w, _ in lines])

    nodes: list[dict] = []
    # stack of (indent width, node id) for the current path from the root
    stack: list[tuple[int, int]] = []
    root_width = lines[0][1]
    for lineno, width, text in lines:
        if not stack:
            nodes.append({"text": text, "index": 0, "parent": None, "children": []})
            stack.append((width, 0))
            continue
        if width < root_width:
            raise IndentTreeError(f"line {lineno}: indent below the first statement")
        if width == root_width:
            raise IndentTreeError(f"line {lineno}: second top-level statement (exactly one root allowed)")
        popped = False
        while width < stack[-1][0]:
            stack.pop()
            popped = True
        if width == stack[-1][0]:
            parent_id = stack[-2][1]
            stack.pop()
        elif popped:
            raise IndentTreeError(f"line {lineno}: dedent to an indent level never seen before")
        else:
            parent_id = stack[-1][1]
        node_id = len(nodes)
        nodes.append(
            {"text": text, "index": nodes[parent_id]["index"] + 1, "parent": parent_id, "children": []}
        )
        nodes[parent_id]["children"].append(node_id)
        stack.append((width, node_id))

    built = tuple(
        TreeNode(
            node_id=i,
            statement_text=n["text"],
            indent_index=n["index"],
            parent=n["parent"],
            children=tuple(n["children"]),
        )
        for i, n in enumerate(nodes)
    )
    return IndentTree(nodes=built, indent_unit=unit)


def postorder_schedule(tree: IndentTree) -> EncodePlan:
    """One step per internal node, children resolved before their parent.

    Each step's inputs start with the node's own statement vector followed by
    its children's resolved vectors in source order. Leaves need no step:
    their statement encoding is already their vector.
    """
    steps: list[EncodeStep] = []
    stack: list[tuple[int, bool]] = [(tree.root.node_id, False)]
    while stack:
        node_id, expanded = stack.pop()
        node = tree.node(node_id)
        if not node.children:
            continue
        if expanded:
            steps.append(EncodeStep(output_node=node_id, input_node_ids=(node_id,) + node.children))
        else:
            stack.append((node_id, True))
            for child in reversed(node.children):
                stack.append((child, False))
    return EncodePlan(tuple(steps))


def pretty_print(tree: IndentTree, indent: int = DEFAULT_INDENT_UNIT) -> str:
    """Render the tree as indented statements, one node per line."""
    lines = [
        " " * (indent * node.indent_index) + node.statement_text
        for node in tree.nodes
    ]
    return "\n".join(lines)


def format_tree(tree: IndentTree) -> str:
    """Debug rendering: node ids alongside indented statements."""
    lines = [
        f"{node.node_id:>4}  " + "    " * node.indent_index + node.statement_text
        for node in tree.nodes
    ]
    return "\n".join(lines)
