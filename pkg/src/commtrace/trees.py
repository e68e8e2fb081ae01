"""Double binary tree construction for tree-based allreduce.

Two spanning trees are built over the ranks, each carrying half the payload.
The first tree is the in-order binary tree over positions 0..N-1 (the root of
a range is the position that completes the largest perfect left subtree); the
second tree reuses the same shape with every rank shifted by one position.
For even N this makes each rank a leaf in exactly one tree, which is what
keeps per-rank traffic balanced.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache


@dataclass(frozen=True)
class Tree:
    """A rooted tree over ranks: parent/children maps plus the root rank."""

    root: int
    parent: dict[int, int | None]
    children: dict[int, tuple[int, ...]]

    @property
    def ranks(self) -> frozenset[int]:
        return frozenset(self.parent)

    def leaves(self) -> frozenset[int]:
        return frozenset(r for r, ch in self.children.items() if not ch)

    def depth_of(self, rank: int) -> int:
        d = 0
        while self.parent[rank] is not None:
            rank = self.parent[rank]
            d += 1
        return d


@dataclass(frozen=True)
class DoubleBinaryTree:
    """The pair of spanning trees used by tree allreduce."""

    n_ranks: int
    t1: Tree
    t2: Tree

    @property
    def trees(self) -> tuple[Tree, Tree]:
        return (self.t1, self.t2)

    def spans(self, n_ranks: int) -> bool:
        want = frozenset(range(n_ranks))
        return self.t1.ranks == want and self.t2.ranks == want


def _inorder_shape(n: int) -> tuple[int, dict[int, int | None], dict[int, list[int]]]:
    """In-order binary tree over positions [0, n): returns (root, parent, children)."""
    parent: dict[int, int | None] = {}
    children: dict[int, list[int]] = {p: [] for p in range(n)}

    def build(lo: int, hi: int) -> int | None:
        if lo >= hi:
            return None
        size = hi - lo
        k = 0
        while (1 << (k + 1)) - 1 <= size - 1:
            k += 1
        root = lo + (1 << k) - 1  # left subtree is perfect with 2^k - 1 nodes
        for sub in (build(lo, root), build(root + 1, hi)):
            if sub is not None:
                parent[sub] = root
                children[root].append(sub)
        return root

    root = build(0, n)
    parent[root] = None
    return root, parent, children


@lru_cache(maxsize=None)
def build_double_binary_tree(n_ranks: int) -> DoubleBinaryTree:
    """Build the two spanning trees for a communicator of n_ranks ranks.

    Tree 1 places rank p at position p; tree 2 places rank (p+1) mod N at
    position p.  For even N the leaf sets of the two trees partition the
    ranks; for odd N >= 3 that cannot hold and only conservation of bytes is
    guaranteed downstream.
    """
    if n_ranks < 1:
        raise ValueError("n_ranks must be >= 1")
    root_pos, parent_pos, children_pos = _inorder_shape(n_ranks)

    def relabel(shift: int) -> Tree:
        rank_at = lambda p: (p + shift) % n_ranks
        parent = {
            rank_at(p): (None if q is None else rank_at(q))
            for p, q in parent_pos.items()
        }
        children = {
            rank_at(p): tuple(rank_at(c) for c in ch)
            for p, ch in children_pos.items()
        }
        return Tree(root=rank_at(root_pos), parent=parent, children=children)

    return DoubleBinaryTree(n_ranks=n_ranks, t1=relabel(0), t2=relabel(1))
