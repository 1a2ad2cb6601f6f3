"""Unrooted binary phylogenetic trees and the Newick wire format.

Trees are stored rooted at an arbitrary internal node with three
children (the usual trifurcating serialization of an unrooted tree);
every other internal node has exactly two children. A deterministic
canonical form exists: re-root at the internal node adjacent to the
lexicographically smallest taxon, then sort children everywhere by their
smallest descendant label. Canonical Newick strings are therefore equal
iff the unrooted trees are equal.
"""

from __future__ import annotations

import re

import numpy as np

from ..errors import PhyloflowError

_LABEL_RE = re.compile(r"[A-Za-z0-9_.]+$")


class NewickError(PhyloflowError):
    code = "newick_error"


class TreeShapeError(PhyloflowError):
    code = "tree_shape_error"


class Node:
    __slots__ = ("name", "length", "children")

    def __init__(self, name=None, length=None, children=None):
        self.name = name
        self.length = length
        self.children = children if children is not None else []

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def clone(self) -> "Node":
        return Node(self.name, self.length, [c.clone() for c in self.children])


class PhyloTree:
    """Unrooted binary tree over labeled taxa with optional branch lengths."""

    def __init__(self, root: Node, validate: bool = True,
                 require_lengths: bool = True):
        self.root = root
        if validate:
            self.validate(require_lengths=require_lengths)

    # -- structure ---------------------------------------------------------

    def postorder(self):
        stack = [(self.root, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded or node.is_leaf:
                yield node
            else:
                stack.append((node, True))
                for c in reversed(node.children):
                    stack.append((c, False))

    def leaves(self) -> list[Node]:
        return [n for n in self.postorder() if n.is_leaf]

    @property
    def taxa(self) -> tuple[str, ...]:
        return tuple(sorted(n.name for n in self.leaves()))

    @property
    def n_taxa(self) -> int:
        return len(self.leaves())

    def branch_nodes(self) -> list[Node]:
        """Every non-root node; each carries one of the 2n-3 edges."""
        return [n for n in self.postorder() if n is not self.root]

    def internal_branch_nodes(self) -> list[Node]:
        return [n for n in self.branch_nodes() if not n.is_leaf]

    def parent_map(self) -> dict[int, Node]:
        parents = {}
        for node in self.postorder():
            for c in node.children:
                parents[id(c)] = node
        return parents

    def copy(self) -> "PhyloTree":
        return PhyloTree(self.root.clone(), validate=False)

    def total_branch_length(self) -> float:
        return sum(n.length for n in self.branch_nodes())

    def validate(self, require_lengths: bool = True) -> None:
        names = []
        for node in self.postorder():
            if node.is_leaf:
                if not node.name or not _LABEL_RE.match(node.name):
                    raise TreeShapeError(f"bad leaf label {node.name!r}")
                names.append(node.name)
            else:
                expected = 3 if node is self.root else 2
                if len(node.children) != expected:
                    raise TreeShapeError(
                        f"internal node has {len(node.children)} children, "
                        f"expected {expected} (unrooted binary tree)"
                    )
            if node is not self.root and require_lengths:
                if node.length is None:
                    raise TreeShapeError("missing branch length")
                if not np.isfinite(node.length) or node.length <= 0:
                    raise TreeShapeError(f"branch length {node.length!r} not positive")
        if len(names) != len(set(names)):
            raise TreeShapeError("duplicate taxon labels")
        if len(names) < 3:
            raise TreeShapeError("need at least 3 taxa")

    # -- canonical form ----------------------------------------------------

    def canonical(self) -> "PhyloTree":
        root = self.root.clone()
        min_taxon = min(self.taxa)
        tree = PhyloTree(root, validate=False)
        parents = tree.parent_map()
        leaf = next(n for n in tree.postorder() if n.name == min_taxon)
        target = parents[id(leaf)]
        if target is not root:
            _reroot_at(tree, target, parents)
        _sort_children(tree.root)
        return tree

    def newick(self, lengths: bool = True) -> str:
        return _serialize(self.canonical().root, lengths) + ";"

    def topology_id(self) -> str:
        """Canonical topology string (branch lengths ignored)."""
        return self.newick(lengths=False)

    def __eq__(self, other):
        if not isinstance(other, PhyloTree):
            return NotImplemented
        return self.newick() == other.newick()

    def __hash__(self):
        return hash(self.newick())

    def __repr__(self):
        return f"PhyloTree({self.n_taxa} taxa)"


def _reroot_at(tree: PhyloTree, target: Node, parents: dict[int, Node]) -> None:
    """Re-hang the tree so `target` (an internal node) becomes the root."""
    path = [target]
    while path[-1] is not tree.root:
        path.append(parents[id(path[-1])])
    # reverse parent/child along the path; edge lengths move to the new child
    old_lengths = [node.length for node in path]
    for (child, parent), length in zip(zip(path, path[1:]), old_lengths):
        parent.children.remove(child)
        child.children.append(parent)
        parent.length = length
    target.length = None
    tree.root = target


def _min_label(node: Node) -> str:
    if node.is_leaf:
        return node.name
    return min(_min_label(c) for c in node.children)


def _sort_children(node: Node) -> str:
    if node.is_leaf:
        return node.name
    keyed = sorted((_sort_children(c), c) for c in node.children)
    node.children = [c for _, c in keyed]
    return keyed[0][0]


def _fmt_len(x: float) -> str:
    return repr(float(x))


def _serialize(node: Node, lengths: bool) -> str:
    if node.is_leaf:
        text = node.name
    else:
        text = "(" + ",".join(_serialize(c, lengths) for c in node.children) + ")"
    if lengths and node.length is not None:
        text += f":{_fmt_len(node.length)}"
    return text


# ---------------------------------------------------------------------------
# Topology counting and enumeration


def count_topologies(n: int) -> int:
    """Number of distinct unrooted binary topologies: (2n-5)!!, exact."""
    if n < 3:
        raise PhyloflowError(f"need at least 3 taxa, got {n}")
    result = 1
    for k in range(3, 2 * n - 4, 2):
        result *= k
    return result


def _star(taxa: list[str]) -> Node:
    return Node(children=[Node(name=t) for t in taxa[:3]])


def _insertion_points(root: Node) -> list[tuple[Node, int]]:
    """Every edge as (parent, child_index), in deterministic preorder."""
    points = []

    def walk(node):
        for i, child in enumerate(node.children):
            points.append((node, i))
            walk(child)

    walk(root)
    return points


def _insert_leaf(parent: Node, index: int, label: str) -> None:
    child = parent.children[index]
    parent.children[index] = Node(children=[child, Node(name=label)])


def enumerate_topologies(taxa) -> list[PhyloTree]:
    """All unrooted topologies over the taxa (branch lengths unset); n <= 7."""
    taxa = sorted(taxa)
    n = len(taxa)
    if not 3 <= n <= 7:
        raise PhyloflowError(f"enumeration supported for 3..7 taxa, got {n}")
    roots = [_star(taxa)]
    for label in taxa[3:]:
        grown = []
        for root in roots:
            for k in range(len(_insertion_points(root))):
                fresh = root.clone()
                parent, idx = _insertion_points(fresh)[k]
                _insert_leaf(parent, idx, label)
                grown.append(fresh)
        roots = grown
    return [PhyloTree(r, require_lengths=False) for r in roots]


def random_tree(taxa, rng: np.random.Generator, brlen_mean: float = 0.1) -> PhyloTree:
    """Uniform topology draw with Exponential(mean=brlen_mean) branch lengths.

    Taxa are attached in sorted order onto a uniformly chosen edge at each
    step, which makes every topology equally likely.
    """
    taxa = sorted(taxa)
    if len(taxa) < 3:
        raise PhyloflowError("need at least 3 taxa")
    root = _star(taxa)
    for label in taxa[3:]:
        points = _insertion_points(root)
        parent, idx = points[int(rng.integers(len(points)))]
        _insert_leaf(parent, idx, label)
    tree = PhyloTree(root, validate=False)
    for node in tree.branch_nodes():
        length = float(rng.exponential(brlen_mean))
        node.length = max(length, 1e-9)
    tree.validate()
    return tree


def with_branch_lengths(tree: PhyloTree, length: float) -> PhyloTree:
    """Copy of a (possibly length-free) topology with every edge set to length."""
    out = PhyloTree(tree.root.clone(), validate=False)
    for node in out.branch_nodes():
        node.length = float(length)
    return out


def tree_splits(tree: PhyloTree) -> set[tuple[str, ...]]:
    """Bipartitions induced by internal edges.

    Each split is keyed by the side containing the lexicographically
    smallest taxon, as a sorted tuple.
    """
    all_taxa = set(tree.taxa)
    anchor = min(all_taxa)
    splits = set()
    below: dict[int, set[str]] = {}
    for node in tree.postorder():
        if node.is_leaf:
            below[id(node)] = {node.name}
        else:
            below[id(node)] = set().union(*(below[id(c)] for c in node.children))
    for node in tree.internal_branch_nodes():
        side = below[id(node)]
        if anchor not in side:
            side = all_taxa - side
        splits.add(tuple(sorted(side)))
    return splits


# ---------------------------------------------------------------------------
# Newick parsing


class _NewickParser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def error(self, message: str):
        raise NewickError(f"position {self.pos}: {message}")

    def peek(self):
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def parse(self) -> Node:
        self.skip_ws()
        node = self.subtree()
        self.skip_ws()
        if self.peek() != ";":
            self.error("expected ';' at end of tree")
        self.pos += 1
        self.skip_ws()
        if self.pos != len(self.text):
            self.error("trailing text after ';'")
        return node

    def subtree(self) -> Node:
        self.skip_ws()
        if self.peek() == "(":
            self.pos += 1
            children = [self.subtree()]
            self.skip_ws()
            while self.peek() == ",":
                self.pos += 1
                children.append(self.subtree())
                self.skip_ws()
            if self.peek() != ")":
                self.error("expected ')' or ','")
            self.pos += 1
            node = Node(children=children)
            self.maybe_label(node, internal=True)
        else:
            node = Node()
            self.maybe_label(node, internal=False)
            if node.name is None:
                self.error("expected a taxon label")
        self.maybe_length(node)
        return node

    def maybe_label(self, node: Node, internal: bool):
        self.skip_ws()
        start = self.pos
        label_chars = []
        while self.peek() and self.peek() not in ":,();":
            label_chars.append(self.text[self.pos])
            self.pos += 1
        label = "".join(label_chars).strip()
        if not label:
            return
        if not _LABEL_RE.match(label):
            self.pos = start
            self.error(f"bad label {label!r}")
        if internal:
            # internal labels are not part of the format we emit; reject
            self.pos = start
            self.error("internal node labels are not supported")
        node.name = label

    def maybe_length(self, node: Node):
        self.skip_ws()
        if self.peek() != ":":
            return
        self.pos += 1
        self.skip_ws()
        start = self.pos
        while self.peek() and self.peek() not in ",();":
            self.pos += 1
        raw = self.text[start:self.pos].strip()
        try:
            node.length = float(raw)
        except ValueError:
            self.pos = start
            self.error(f"bad branch length {raw!r}")


def parse_newick(text: str) -> PhyloTree:
    """Parse Newick with branch lengths into a validated unrooted tree."""
    if not text or not text.strip():
        raise NewickError("empty tree text")
    root = _NewickParser(text).parse()
    if root.length is not None:
        raise NewickError("root must not carry a branch length")
    tree = PhyloTree(root, validate=False)
    tree.validate(require_lengths=True)
    return tree


def write_newick(tree: PhyloTree) -> str:
    """Canonical Newick with branch lengths; parse(write(t)) == t."""
    return tree.newick(lengths=True)
