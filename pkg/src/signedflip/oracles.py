"""Exhaustive reference answers for small graphs.

These deliberately share no code with :mod:`signedflip.graph`; they work on
dense boolean matrices and enumerate everything.
"""

from __future__ import annotations

from itertools import product

import numpy as np

from .graph import Sign, SignedDigraph


def adjacency(g: SignedDigraph, sign=None) -> np.ndarray:
    A = np.zeros((g.n, g.n), dtype=bool)
    for t, h, s in g:
        if sign is None or s == sign:
            A[t, h] = True
    return A


def reachability(A: np.ndarray) -> np.ndarray:
    """Reflexive transitive closure (Warshall)."""
    R = A.copy() | np.eye(len(A), dtype=bool)
    for k in range(len(A)):
        R |= R[:, k : k + 1] & R[k : k + 1, :]
    return R


def brute_strongly_connected(g: SignedDigraph) -> bool:
    return bool(reachability(adjacency(g)).all())


def brute_components(A: np.ndarray) -> set[frozenset[int]]:
    """Weak components: closure of the symmetrised relation, grouped by row."""
    R = reachability(A | A.T)
    return {frozenset(np.flatnonzero(R[i]).tolist()) for i in range(len(A))}


def brute_positive_clusters(g: SignedDigraph) -> set[frozenset[int]]:
    return brute_components(adjacency(g, Sign.POSITIVE))


def bipartition_ok(g: SignedDigraph, side_one: frozenset, mode: str = "literal") -> bool:
    for t, h, s in g:
        across = (t in side_one) != (h in side_one)
        if s == Sign.NEGATIVE and not across:
            return False
        if s == Sign.POSITIVE and mode == "classical" and across:
            return False
    return True


def brute_balance_bipartitions(g: SignedDigraph, mode: str = "literal") -> list[frozenset[int]]:
    """Every valid side containing node 0 (one representative per unordered split)."""
    found = []
    for bits in product((0, 1), repeat=g.n - 1):
        one = frozenset([0] + [i + 1 for i, b in enumerate(bits) if b == 0])
        if len(one) == g.n:
            continue
        if bipartition_ok(g, one, mode):
            found.append(one)
    return found
