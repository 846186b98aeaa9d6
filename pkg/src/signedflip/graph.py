"""Signed directed graphs and the structural algorithms run on them.

A :class:`SignedDigraph` is immutable once built. Both orientations of a node
pair may be present with different signs; the only restriction is one sign
per ordered pair.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple, Optional, Sequence


class GraphError(ValueError):
    """Raised for malformed graphs or graph text."""


class SignConflict(GraphError):
    """The same ordered pair was given both signs."""


class Sign(enum.IntEnum):
    POSITIVE = 1
    NEGATIVE = -1

    @property
    def symbol(self) -> str:
        return "+" if self is Sign.POSITIVE else "-"

    @classmethod
    def parse(cls, token) -> "Sign":
        if isinstance(token, Sign):
            return token
        if token in ("+", 1, "1", "+1", "pos", "positive"):
            return cls.POSITIVE
        if token in ("-", -1, "-1", "neg", "negative"):
            return cls.NEGATIVE
        raise GraphError(f"unrecognised sign {token!r}")


class SignedArc(NamedTuple):
    tail: int
    head: int
    sign: Sign

    @property
    def pair(self) -> tuple[int, int]:
        return (self.tail, self.head)


def arc(tail: int, head: int, sign="+") -> SignedArc:
    return SignedArc(int(tail), int(head), Sign.parse(sign))


class SignedDigraph:
    """Simple signed digraph on nodes ``0..n-1``.

    Arcs are stored per ordered pair, with in- and out-adjacency built once so
    that in-neighbour queries cost O(indegree).
    """

    __slots__ = ("n", "_sign", "_in", "_out", "_arcs")

    def __init__(self, n: int, arcs: Iterable = (), *, min_nodes: int = 3):
        n = int(n)
        if n < min_nodes:
            raise GraphError(f"need at least {min_nodes} nodes, got {n}")
        sign: dict[tuple[int, int], Sign] = {}
        for a in arcs:
            a = a if isinstance(a, SignedArc) else arc(*a)
            if not (0 <= a.tail < n and 0 <= a.head < n):
                raise GraphError(f"arc {a.tail}->{a.head} outside node range 0..{n - 1}")
            if a.tail == a.head:
                raise GraphError(f"self-loop at node {a.tail}")
            prev = sign.get(a.pair)
            if prev is not None and prev != a.sign:
                raise SignConflict(f"arc {a.tail}->{a.head} carries both signs")
            sign[a.pair] = a.sign
        self.n = n
        self._sign = sign
        self._arcs = tuple(sorted(SignedArc(t, h, s) for (t, h), s in sign.items()))
        ins: list[list[int]] = [[] for _ in range(n)]
        outs: list[list[int]] = [[] for _ in range(n)]
        for t, h, _ in self._arcs:
            outs[t].append(h)
            ins[h].append(t)
        self._in = tuple(tuple(sorted(x)) for x in ins)
        self._out = tuple(tuple(x) for x in outs)

    # -- basic queries -------------------------------------------------------

    @property
    def arcs(self) -> tuple[SignedArc, ...]:
        """All arcs, sorted by (tail, head)."""
        return self._arcs

    def __len__(self) -> int:
        return len(self._arcs)

    def __iter__(self) -> Iterator[SignedArc]:
        return iter(self._arcs)

    def __contains__(self, item) -> bool:
        if isinstance(item, SignedArc):
            return self._sign.get(item.pair) == item.sign
        return tuple(item) in self._sign

    def __eq__(self, other) -> bool:
        if not isinstance(other, SignedDigraph):
            return NotImplemented
        return self.n == other.n and self._sign == other._sign

    def __hash__(self) -> int:
        return hash((self.n, self._arcs))

    def __repr__(self) -> str:
        body = ", ".join(f"{t}{s.symbol}{h}" for t, h, s in self._arcs)
        return f"SignedDigraph(n={self.n}, [{body}])"

    def sign_of(self, tail: int, head: int) -> Optional[Sign]:
        return self._sign.get((tail, head))

    def in_neighbors(self, i: int) -> tuple[int, ...]:
        return self._in[i]

    def out_neighbors(self, i: int) -> tuple[int, ...]:
        return self._out[i]

    def pairs(self) -> frozenset[tuple[int, int]]:
        return frozenset(self._sign)

    def with_arcs(self, arcs: Iterable) -> "SignedDigraph":
        return SignedDigraph(self.n, arcs)

    @property
    def positive_arcs(self) -> tuple[SignedArc, ...]:
        return tuple(a for a in self._arcs if a.sign is Sign.POSITIVE)

    @property
    def negative_arcs(self) -> tuple[SignedArc, ...]:
        return tuple(a for a in self._arcs if a.sign is Sign.NEGATIVE)


@dataclass(frozen=True)
class PositiveClusterPartition:
    clusters: tuple[frozenset[int], ...]

    @property
    def count(self) -> int:
        return len(self.clusters)

    def cluster_of(self, i: int) -> frozenset[int]:
        for c in self.clusters:
            if i in c:
                return c
        raise KeyError(i)


@dataclass(frozen=True)
class BalanceBipartition:
    side_one: frozenset[int]
    side_two: frozenset[int]

    def same_as(self, a: Iterable[int], b: Iterable[int]) -> bool:
        """Equality up to swapping the two sides."""
        a, b = frozenset(a), frozenset(b)
        return {a, b} == {self.side_one, self.side_two}


# -- subgraphs and unions -----------------------------------------------------


def positive_subgraph(g: SignedDigraph) -> SignedDigraph:
    return SignedDigraph(g.n, g.positive_arcs)


def negative_subgraph(g: SignedDigraph) -> SignedDigraph:
    return SignedDigraph(g.n, g.negative_arcs)


def union_graph(graphs: Sequence[SignedDigraph], *, erase_signs: bool = False) -> SignedDigraph:
    """Union of arc sets over graphs sharing one node count.

    With ``erase_signs`` every arc of the result is positive, which is what the
    connectivity checks want; otherwise a pair carrying both signs across the
    inputs raises :class:`SignConflict`.
    """
    graphs = list(graphs)
    if not graphs:
        raise GraphError("union of zero graphs")
    n = graphs[0].n
    if any(g.n != n for g in graphs):
        raise GraphError("graphs in a union must share the node count")
    if erase_signs:
        pairs = set()
        for g in graphs:
            pairs.update(g.pairs())
        return SignedDigraph(n, (SignedArc(t, h, Sign.POSITIVE) for t, h in pairs))
    return SignedDigraph(n, (a for g in graphs for a in g))


# -- connectivity ---------------------------------------------------------------


def weakly_connected_components(g: SignedDigraph) -> list[frozenset[int]]:
    """Components of the graph with directions erased, ordered by smallest member."""
    seen = [False] * g.n
    comps = []
    for start in range(g.n):
        if seen[start]:
            continue
        seen[start] = True
        comp = [start]
        queue = deque([start])
        while queue:
            v = queue.popleft()
            for w in g.out_neighbors(v) + g.in_neighbors(v):
                if not seen[w]:
                    seen[w] = True
                    comp.append(w)
                    queue.append(w)
        comps.append(frozenset(comp))
    return comps


def positive_cluster_partition(g: SignedDigraph) -> PositiveClusterPartition:
    return PositiveClusterPartition(tuple(weakly_connected_components(positive_subgraph(g))))


def strongly_connected_components(g: SignedDigraph) -> list[frozenset[int]]:
    """Tarjan's algorithm, iterative; components ordered by smallest member."""
    index: dict[int, int] = {}
    low: dict[int, int] = {}
    on_stack = [False] * g.n
    stack: list[int] = []
    comps = []
    counter = 0
    for root in range(g.n):
        if root in index:
            continue
        work = [(root, 0)]
        while work:
            v, pos = work.pop()
            if pos == 0:
                index[v] = low[v] = counter
                counter += 1
                stack.append(v)
                on_stack[v] = True
            succ = g.out_neighbors(v)
            recurse = False
            while pos < len(succ):
                w = succ[pos]
                pos += 1
                if w not in index:
                    work.append((v, pos))
                    work.append((w, 0))
                    recurse = True
                    break
                if on_stack[w]:
                    low[v] = min(low[v], index[w])
            if recurse:
                continue
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp.append(w)
                    if w == v:
                        break
                comps.append(frozenset(comp))
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
    return sorted(comps, key=min)


def is_strongly_connected(g: SignedDigraph) -> bool:
    return len(strongly_connected_components(g)) == 1


# -- structural balance ----------------------------------------------------------


def strong_balance_bipartition(g: SignedDigraph, mode: str = "literal") -> Optional[BalanceBipartition]:
    """Split the nodes into two nonempty sides with negative arcs only across.

    ``mode="literal"`` constrains negative arcs only. ``mode="classical"``
    additionally keeps every positive arc inside a side (Harary balance).
    Components are 2-coloured in ascending order of their smallest node, which
    is put on ``side_one``. If that leaves ``side_two`` empty, every component
    other than the first is moved across; for a graph with no negative arcs in
    literal mode this yields ``{0}`` against the rest.
    """
    if mode not in ("literal", "classical"):
        raise ValueError(f"unknown balance mode {mode!r}")
    # (neighbour, parity): parity 1 means the endpoints must differ
    adj: list[list[tuple[int, int]]] = [[] for _ in range(g.n)]
    for t, h, s in g:
        if s is Sign.NEGATIVE:
            parity = 1
        elif mode == "classical":
            parity = 0
        else:
            continue
        adj[t].append((h, parity))
        adj[h].append((t, parity))

    color = [-1] * g.n
    comps: list[list[int]] = []
    for start in range(g.n):
        if color[start] >= 0:
            continue
        color[start] = 0
        comp = [start]
        queue = deque([start])
        while queue:
            v = queue.popleft()
            for w, parity in adj[v]:
                want = color[v] ^ parity
                if color[w] < 0:
                    color[w] = want
                    comp.append(w)
                    queue.append(w)
                elif color[w] != want:
                    return None
        comps.append(comp)

    if all(c == 0 for c in color):
        if len(comps) < 2:
            return None
        for comp in comps[1:]:
            for v in comp:
                color[v] ^= 1
    one = frozenset(i for i in range(g.n) if color[i] == 0)
    two = frozenset(i for i in range(g.n) if color[i] == 1)
    return BalanceBipartition(one, two)


def is_strongly_balanced(g: SignedDigraph, mode: str = "literal") -> bool:
    return strong_balance_bipartition(g, mode) is not None


def crosses_correctly(g: SignedDigraph, side_one: Iterable[int], mode: str = "literal") -> bool:
    """Whether the split (side_one, rest) satisfies the balance constraint."""
    one = frozenset(side_one)
    for t, h, s in g:
        across = (t in one) != (h in one)
        if s is Sign.NEGATIVE and not across:
            return False
        if s is Sign.POSITIVE and mode == "classical" and across:
            return False
    return True


# -- text format -----------------------------------------------------------------


def format_graph(g: SignedDigraph) -> str:
    lines = [f"n {g.n}"]
    lines.extend(f"{t} {h} {s.symbol}" for t, h, s in g)
    return "\n".join(lines) + "\n"


def parse_graph(text: str) -> SignedDigraph:
    """Parse ``n <count>`` followed by ``<tail> <head> <+|->`` lines."""
    n = None
    arcs = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if n is None:
            if len(parts) != 2 or parts[0] != "n":
                raise GraphError(f"line {lineno}: expected header 'n <count>'")
            try:
                n = int(parts[1])
            except ValueError:
                raise GraphError(f"line {lineno}: bad node count {parts[1]!r}") from None
            continue
        if len(parts) != 3 or parts[2] not in ("+", "-"):
            raise GraphError(f"line {lineno}: expected '<tail> <head> <+|->'")
        try:
            arcs.append(arc(int(parts[0]), int(parts[1]), parts[2]))
        except ValueError:
            raise GraphError(f"line {lineno}: bad node index") from None
    if n is None:
        raise GraphError("missing 'n <count>' header")
    return SignedDigraph(n, arcs)


def read_graph(path) -> SignedDigraph:
    return parse_graph(Path(path).read_text())


def write_graph(g: SignedDigraph, path) -> None:
    Path(path).write_text(format_graph(g))
