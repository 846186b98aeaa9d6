"""Random ingredients of the model: interacting arcs E_t and attention (B_t, D_t).

Every draw comes from a Philox stream keyed by ``(seed, run, purpose)``. The
time index selects a fixed-width block inside that stream, so any step of any
run can be reproduced on its own, and chunked bulk draws give the same numbers
as step-by-step ones.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Optional, Union

import numpy as np

from .graph import Sign, SignedArc, SignedDigraph

_U53 = 2.0**-53


class Purpose(enum.IntEnum):
    ARCS = 0
    ATTENTION = 1
    INIT = 2


def _padded(width: int) -> int:
    # Philox emits 4 words per counter increment; whole blocks keep advance() exact
    return max(4, -(-int(width) // 4) * 4)


class RngStream:
    """Uniform [0, 1) draws for one (seed, run, purpose) triple."""

    def __init__(self, seed: int, run: int, purpose: Purpose, width: int):
        seed, run = int(seed), int(run)
        if not 0 <= seed < 2**64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")
        if run < 0:
            raise ValueError("run index must be nonnegative")
        self.seed = seed
        self.run = run
        self.purpose = Purpose(purpose)
        self.width = int(width)
        self._stride = _padded(width)
        ss = np.random.SeedSequence(seed, spawn_key=(run, int(self.purpose)))
        self._key = ss.generate_state(2, np.uint64)

    def _bitgen(self, t: int) -> np.random.Philox:
        bg = np.random.Philox(key=self._key)
        if t:
            bg.advance(t * self._stride // 4)
        return bg

    def blocks(self, t0: int, count: int) -> np.ndarray:
        """Draws for steps t0..t0+count-1 as a (count, width) array."""
        raw = self._bitgen(t0).random_raw(count * self._stride)
        u = (raw >> np.uint64(11)).astype(np.float64) * _U53
        return u.reshape(count, self._stride)[:, : self.width]

    def block(self, t: int) -> np.ndarray:
        return self.blocks(t, 1)[0]


# -- interaction models ---------------------------------------------------------


def sampling_order(g: SignedDigraph) -> tuple[SignedArc, ...]:
    """Arc order used to pair arcs with uniforms: by head, then tail."""
    return tuple(sorted(g.arcs, key=lambda a: (a.head, a.tail)))


@dataclass(frozen=True)
class PerArcBernoulli:
    """Each arc of G_t joins E_t independently with its own probability."""

    p: float
    per_arc: tuple = ()  # ((tail, head), probability) overrides

    kind = "bernoulli"

    def __post_init__(self):
        if isinstance(self.per_arc, dict):
            object.__setattr__(self, "per_arc", tuple(sorted(self.per_arc.items())))
        for q in [self.p, *(q for _, q in self.per_arc)]:
            if not 0.0 < q <= 1.0:
                raise ValueError(f"arc probability {q} outside (0, 1]")

    def draw_width(self, max_arcs: int) -> int:
        return max_arcs

    def probability(self, tail: int, head: int) -> float:
        return dict(self.per_arc).get((tail, head), self.p)

    def probabilities(self, g: SignedDigraph) -> np.ndarray:
        table = dict(self.per_arc)
        return np.array([table.get(a.pair, self.p) for a in sampling_order(g)], dtype=float)


@dataclass(frozen=True)
class GossipSingleArc:
    """Exactly one arc of G_t, uniformly at random."""

    kind = "gossip"

    def draw_width(self, max_arcs: int) -> int:
        return 1


@dataclass(frozen=True)
class FullActivation:
    """Every arc of G_t interacts at every step."""

    kind = "full"

    def draw_width(self, max_arcs: int) -> int:
        return 0


InteractionModel = Union[PerArcBernoulli, GossipSingleArc, FullActivation]


def make_model(kind: str, p: Optional[float] = None, per_arc=None) -> InteractionModel:
    if kind == "bernoulli":
        if p is None:
            raise ValueError("bernoulli interaction needs p")
        return PerArcBernoulli(float(p), tuple(sorted((per_arc or {}).items())))
    if kind == "gossip":
        return GossipSingleArc()
    if kind == "full":
        return FullActivation()
    raise ValueError(f"unknown interaction kind {kind!r}")


def model_echo(model: InteractionModel) -> dict:
    out = {"kind": model.kind}
    if isinstance(model, PerArcBernoulli):
        out["p"] = model.p
        if model.per_arc:
            out["per_arc"] = [[t, h, q] for (t, h), q in model.per_arc]
    return out


def mask_from_uniforms(model: InteractionModel, g: SignedDigraph, u: np.ndarray) -> np.ndarray:
    """Inclusion mask over ``sampling_order(g)``; leading axes of ``u`` broadcast."""
    m = len(g)
    lead = u.shape[:-1]
    if isinstance(model, FullActivation):
        return np.ones(lead + (m,), dtype=bool)
    if isinstance(model, PerArcBernoulli):
        return u[..., :m] < model.probabilities(g)
    if isinstance(model, GossipSingleArc):
        if m == 0:
            return np.zeros(lead + (0,), dtype=bool)
        pick = np.minimum((u[..., 0] * m).astype(np.int64), m - 1)
        return np.arange(m) == pick[..., None]
    raise TypeError(f"unsupported interaction model {model!r}")


def arc_stream(seed: int, run: int, model: InteractionModel, max_arcs: int) -> RngStream:
    return RngStream(seed, run, Purpose.ARCS, model.draw_width(max_arcs))


def sample_arcs(g: SignedDigraph, model: InteractionModel, rng: RngStream, t: int = 0) -> frozenset[SignedArc]:
    """E_t for the graph active at step t."""
    if rng.width < model.draw_width(len(g)):
        raise ValueError("stream is too narrow for this graph")
    u = rng.block(t) if rng.width else np.empty(0)
    mask = mask_from_uniforms(model, g, u)
    return frozenset(a for a, keep in zip(sampling_order(g), mask) if keep)


# -- attention --------------------------------------------------------------------


@dataclass(frozen=True)
class AttentionProcess:
    """Constant means of the shared Bernoulli attention variables B_t and D_t."""

    b: float
    d: float

    def __post_init__(self):
        for name, v in (("b", self.b), ("d", self.d)):
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name}={v} must lie strictly between 0 and 1")


def attention_stream(seed: int, run: int) -> RngStream:
    return RngStream(seed, run, Purpose.ATTENTION, 2)


def attention_from_uniforms(proc: AttentionProcess, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return (u[..., 0] < proc.b).astype(np.int8), (u[..., 1] < proc.d).astype(np.int8)


def sample_attention(proc: AttentionProcess, rng: RngStream, t: int = 0) -> tuple[int, int]:
    B, D = attention_from_uniforms(proc, rng.block(t))
    return int(B), int(D)


# -- neighbour sets -----------------------------------------------------------------


def neighbor_sets(sampled: Iterable[SignedArc], i: int) -> tuple[frozenset[int], frozenset[int]]:
    """In-neighbours of ``i`` along sampled positive and negative arcs."""
    plus, minus = set(), set()
    for a in sampled:
        if a.head == i:
            (plus if a.sign is Sign.POSITIVE else minus).add(a.tail)
    return frozenset(plus), frozenset(minus)


# -- assumption checks ----------------------------------------------------------------


@dataclass(frozen=True)
class AssumptionStatus:
    holds: bool
    constant: Optional[float] = None
    note: str = ""

    def to_dict(self) -> dict:
        return {"holds": self.holds, "constant": self.constant, "note": self.note}


def verify_selection_assumptions(model: InteractionModel, sched) -> dict[str, AssumptionStatus]:
    """Static check of the arc-selection lower bound (A1) and independence/upper bound (A6)."""
    if isinstance(model, PerArcBernoulli):
        probs = [model.probability(t, h) for g in sched.frames for t, h, _ in g] or [model.p]
        lo, hi = min(probs), max(probs)
        if lo < 1.0:
            a1 = AssumptionStatus(True, lo)
        else:
            a1 = AssumptionStatus(True, 1.0, "every arc is always selected; any p_lower < 1 works")
        if hi < 1.0:
            a6 = AssumptionStatus(True, hi)
        else:
            a6 = AssumptionStatus(False, 1.0, "some arc has selection probability 1; the upper bound must be < 1")
        return {"A1": a1, "A6": a6}
    if isinstance(model, GossipSingleArc):
        if any(len(g) == 0 for g in sched.frames):
            a1 = AssumptionStatus(True, None, "a frame has no arcs; bound is vacuous there")
        else:
            a1 = AssumptionStatus(True, 1.0 / sched.max_arcs)
        a6 = AssumptionStatus(False, None, "a single arc per step couples the arc events")
        return {"A1": a1, "A6": a6}
    if isinstance(model, FullActivation):
        return {
            "A1": AssumptionStatus(True, 1.0, "every arc is always selected; any p_lower < 1 works"),
            "A6": AssumptionStatus(False, 1.0, "boundary: selection probability 1 is not < 1"),
        }
    raise TypeError(f"unsupported interaction model {model!r}")
