"""Periodic deterministic environments {G_t} and the connectivity checks on them."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from .graph import (
    GraphError,
    Sign,
    SignConflict,
    SignedArc,
    SignedDigraph,
    is_strongly_connected,
    read_graph,
    union_graph,
    write_graph,
)

WINDOW_MODES = ("all", "positive", "negative")


@dataclass(frozen=True)
class GraphSchedule:
    """Frames repeated with period ``len(frames)``: G_t = frames[t mod period]."""

    frames: tuple[SignedDigraph, ...]

    def __post_init__(self):
        frames = tuple(self.frames)
        if not frames:
            raise GraphError("a schedule needs at least one frame")
        if len({g.n for g in frames}) != 1:
            raise GraphError("all frames of a schedule must share the node count")
        object.__setattr__(self, "frames", frames)

    @classmethod
    def constant(cls, g: SignedDigraph) -> "GraphSchedule":
        return cls((g,))

    @property
    def period(self) -> int:
        return len(self.frames)

    @property
    def n(self) -> int:
        return self.frames[0].n

    def graph_at(self, t: int) -> SignedDigraph:
        if t < 0:
            raise ValueError("time index must be nonnegative")
        return self.frames[t % self.period]

    @property
    def max_arcs(self) -> int:
        return max(len(g) for g in self.frames)


def graph_at(sched: GraphSchedule, t: int) -> SignedDigraph:
    return sched.graph_at(t)


def sign_conflicts(sched: GraphSchedule) -> list[tuple[int, int]]:
    """Ordered pairs that appear with both signs somewhere in the period."""
    seen: dict[tuple[int, int], Sign] = {}
    bad = set()
    for g in sched.frames:
        for t, h, s in g:
            prev = seen.setdefault((t, h), s)
            if prev != s:
                bad.add((t, h))
    return sorted(bad)


def is_sign_consistent(sched: GraphSchedule) -> bool:
    return not sign_conflicts(sched)


@dataclass(frozen=True)
class TotalGraph:
    graph: SignedDigraph
    frame_hits: dict = field(default_factory=dict)  # (tail, head) -> frozenset of frame indices

    def recurrent(self, a: SignedArc) -> bool:
        """An arc appears infinitely often iff it appears in some frame of the period."""
        return bool(self.frame_hits.get(a.pair))


def total_graph(sched: GraphSchedule) -> TotalGraph:
    bad = sign_conflicts(sched)
    if bad:
        raise SignConflict(f"schedule is not sign consistent: {bad}")
    hits: dict[tuple[int, int], set[int]] = {}
    for k, g in enumerate(sched.frames):
        for a in g:
            hits.setdefault(a.pair, set()).add(k)
    return TotalGraph(
        union_graph(sched.frames),
        {pair: frozenset(ks) for pair, ks in sorted(hits.items())},
    )


def window_union(sched: GraphSchedule, start: int, K: int, mode: str = "all") -> SignedDigraph:
    """Sign-erased union of frames start..start+K-1, optionally one sign only."""
    if mode not in WINDOW_MODES:
        raise ValueError(f"mode must be one of {WINDOW_MODES}")
    frames = [sched.graph_at(start + k) for k in range(K)]
    if mode == "positive":
        frames = [SignedDigraph(g.n, g.positive_arcs) for g in frames]
    elif mode == "negative":
        frames = [SignedDigraph(g.n, g.negative_arcs) for g in frames]
    return union_graph(frames, erase_signs=True)


def check_window_connectivity(sched: GraphSchedule, K: int, mode: str = "all") -> bool:
    """Strong connectivity of every K-frame window union.

    One period of start offsets covers every window of a periodic schedule.
    """
    if K < 1:
        raise ValueError("window length must be at least 1")
    return all(is_strongly_connected(window_union(sched, t, K, mode)) for t in range(sched.period))


def minimal_window(sched: GraphSchedule, mode: str = "all", limit: Optional[int] = None) -> Optional[int]:
    """Smallest K with connected windows, or None.

    Beyond K = period every window already contains all frames, so the search
    never needs to go further than that.
    """
    bound = sched.period if limit is None else min(limit, sched.period)
    for K in range(1, bound + 1):
        if check_window_connectivity(sched, K, mode):
            return K
    return None


# -- manifest files -----------------------------------------------------------


def parse_manifest(text: str, base: Path) -> GraphSchedule:
    """``period <p>`` plus one ``frame <path>`` line per frame, in order."""
    period = None
    paths = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, _, value = line.partition(" ")
        value = value.strip()
        if key == "period":
            try:
                period = int(value)
            except ValueError:
                raise GraphError(f"line {lineno}: bad period {value!r}") from None
        elif key == "frame" and value:
            paths.append(value)
        else:
            raise GraphError(f"line {lineno}: expected 'period <p>' or 'frame <path>'")
    if period is None:
        raise GraphError("manifest lacks a 'period' line")
    if period != len(paths):
        raise GraphError(f"manifest period {period} does not match {len(paths)} frame(s)")
    return GraphSchedule(tuple(read_graph(base / p) for p in paths))


def is_manifest_text(text: str) -> bool:
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            return line.split()[0] in ("period", "frame")
    return False


def read_schedule(path) -> GraphSchedule:
    """Load a manifest, or a single graph file as a period-1 schedule."""
    path = Path(path)
    text = path.read_text()
    if is_manifest_text(text):
        return parse_manifest(text, path.parent)
    return GraphSchedule.constant(read_graph(path))


def write_schedule(sched: GraphSchedule, directory, stem: str = "frame") -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    lines = [f"period {sched.period}"]
    for k, g in enumerate(sched.frames):
        name = f"{stem}{k}.graph"
        write_graph(g, directory / name)
        lines.append(f"frame {name}")
    manifest = directory / "schedule.txt"
    manifest.write_text("\n".join(lines) + "\n")
    return manifest
