"""State-flipping update rule, trajectory engine, and per-step invariant checks."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .environment import GraphSchedule
from .graph import Sign, SignedArc, SignedDigraph
from .sampler import (
    AttentionProcess,
    FullActivation,
    InteractionModel,
    Purpose,
    RngStream,
    attention_from_uniforms,
    attention_stream,
    mask_from_uniforms,
    model_echo,
    neighbor_sets,
    sampling_order,
)

REL_SLACK = 1e-12
DEFAULT_CEILING = 1e30


class NonFiniteState(ArithmeticError):
    """A step produced a NaN or infinite node state."""


class RegimeViolation(ValueError):
    """Parameters fall outside the regime a check is valid for."""


@dataclass(frozen=True)
class UpdateParams:
    alpha: float
    beta: float
    attention: AttentionProcess

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError("alpha and beta must be positive")

    @property
    def b(self) -> float:
        return self.attention.b

    @property
    def d(self) -> float:
        return self.attention.d

    def gamma_star(self, n: int) -> float:
        return 1.0 - (self.alpha + self.beta) * (n - 1)

    def is_contractive(self, n: int) -> bool:
        """alpha + beta < 1/(n-1): the convergence regime."""
        return (self.alpha + self.beta) * (n - 1) < 1.0

    def is_nonexpansive(self, n: int) -> bool:
        """alpha + beta <= 1/(n-1), with rounding slack at the boundary."""
        return (self.alpha + self.beta) * (n - 1) <= 1.0 + REL_SLACK

    def is_divergence_candidate(self, n: int) -> bool:
        return self.alpha <= 1.0 / (4 * n)

    def in_floor_regime(self, n: int) -> bool:
        """alpha < 1/(4n) and beta > 16 n^(n+1)."""
        return self.alpha < 1.0 / (4 * n) and self.beta > 16.0 * n ** (n + 1)

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "beta": self.beta, "b": self.b, "d": self.d}


# -- the update rule -------------------------------------------------------------


def positive_recommendation(i: int, s, nplus: Iterable[int]) -> float:
    acc = 0.0
    for j in sorted(nplus):
        acc += s[i] - s[j]
    return -acc


def negative_recommendation(i: int, s, nminus: Iterable[int]) -> float:
    acc = 0.0
    for j in sorted(nminus):
        acc += s[i] + s[j]
    return -acc


def max_abs(s) -> float:
    s = np.asarray(s, dtype=float)
    return float(np.max(np.abs(s))) if s.size else 0.0


def step(s, sampled: Iterable[SignedArc], B: int, D: int, params: UpdateParams) -> np.ndarray:
    """One synchronous update of every node from time-t values."""
    s = np.asarray(s, dtype=float)
    n = len(s)
    sampled = list(sampled)
    for a in sampled:
        if not (0 <= a.tail < n and 0 <= a.head < n):
            raise ValueError(f"sampled arc {a} references a node outside 0..{n - 1}")
    plus: list[list[int]] = [[] for _ in range(n)]
    minus: list[list[int]] = [[] for _ in range(n)]
    for a in sampled:
        (plus if a.sign is Sign.POSITIVE else minus)[a.head].append(a.tail)
    vals = s.tolist()
    out = np.empty(n)
    for i in range(n):
        hp = positive_recommendation(i, vals, set(plus[i]))
        hm = negative_recommendation(i, vals, set(minus[i]))
        out[i] = vals[i] + params.alpha * B * hp + params.beta * D * hm
    if not np.all(np.isfinite(out)):
        raise NonFiniteState("update produced a non-finite state")
    return out


# -- invariant checks -------------------------------------------------------------


def check_lemma1(before, after, params: UpdateParams) -> bool:
    """M does not grow across one step (nonexpansive regime only)."""
    n = len(before)
    if not params.is_nonexpansive(n):
        raise RegimeViolation(f"alpha+beta={params.alpha + params.beta} exceeds 1/(n-1) for n={n}")
    return max_abs(after) <= max_abs(before) * (1.0 + REL_SLACK)


def check_lemma2_contraction(states: Sequence, i: int, zeta0: float, params: UpdateParams) -> bool:
    """A node starting at most zeta0*M(t) stays below (1 - (1-zeta0) gamma^k) M(t).

    ``states[k]`` is s(t+k); every k in the sequence is checked.
    """
    states = [np.asarray(x, dtype=float) for x in states]
    n = len(states[0])
    if not params.is_nonexpansive(n):
        raise RegimeViolation(f"alpha+beta={params.alpha + params.beta} exceeds 1/(n-1) for n={n}")
    if not 0.0 <= zeta0 < 1.0:
        raise ValueError("zeta0 must lie in [0, 1)")
    m0 = max_abs(states[0])
    if abs(states[0][i]) > zeta0 * m0 * (1.0 + REL_SLACK):
        raise ValueError(f"|s_{i}(t)| exceeds zeta0 * M(t)")
    gamma = params.gamma_star(n)
    for k, s in enumerate(states):
        bound = (1.0 - (1.0 - zeta0) * gamma**k) * m0
        if abs(s[i]) > bound + REL_SLACK * m0:
            return False
    return True


def check_lemma3_pull(before, after, sampled: Iterable[SignedArc], i: int, j: int,
                      B: int, D: int, zeta0: float, params: UpdateParams) -> bool:
    """An active arc i->j from a node below zeta0*M pulls j below (1-(1-zeta0)min(alpha,beta)) M."""
    before = np.asarray(before, dtype=float)
    after = np.asarray(after, dtype=float)
    n = len(before)
    if not params.is_nonexpansive(n):
        raise RegimeViolation(f"alpha+beta={params.alpha + params.beta} exceeds 1/(n-1) for n={n}")
    link = [a for a in sampled if a.tail == i and a.head == j]
    if not link:
        raise ValueError(f"arc {i}->{j} was not sampled")
    if (link[0].sign is Sign.POSITIVE and B != 1) or (link[0].sign is Sign.NEGATIVE and D != 1):
        raise ValueError("attention bit for the arc's sign is not set")
    m0 = max_abs(before)
    if abs(before[i]) > zeta0 * m0 * (1.0 + REL_SLACK):
        raise ValueError(f"|s_{i}(t)| exceeds zeta0 * M(t)")
    bound = (1.0 - (1.0 - zeta0) * min(params.alpha, params.beta)) * m0
    return abs(after[j]) <= bound + REL_SLACK * m0


def check_lemma5_floor(before, after, params: UpdateParams) -> bool:
    """M(t+1) >= M(t)/(2n) whenever alpha < 1/(4n) and beta > 16 n^(n+1)."""
    n = len(before)
    if not params.in_floor_regime(n):
        raise RegimeViolation(
            f"need alpha < {1 / (4 * n):.6g} and beta > {16 * n ** (n + 1)} for n={n}"
        )
    m0 = max_abs(before)
    return max_abs(after) >= m0 / (2 * n) - REL_SLACK * m0


# -- trajectories ------------------------------------------------------------------


@dataclass(frozen=True)
class ProbeSpec:
    """Full states are kept every ``stride`` steps and at every step of the last ``tail``."""

    stride: int = 1000
    tail: int = 1000

    def times(self, horizon: int) -> np.ndarray:
        stride = max(1, int(self.stride))
        ts = set(range(0, horizon + 1, stride))
        ts.update(range(max(0, horizon - int(self.tail)), horizon + 1))
        return np.array(sorted(ts), dtype=np.int64)


@dataclass
class StepRecord:
    t: int
    sampled: tuple
    B: int
    D: int
    M: float


@dataclass
class TrajectoryRecord:
    seed: int
    run: int
    params: dict
    s0: np.ndarray
    horizon: int
    steps: int
    probe_times: np.ndarray
    probe_states: np.ndarray
    m_series: np.ndarray
    node_peaks: np.ndarray
    diverged: bool = False
    ceiling: float = DEFAULT_CEILING
    non_finite: bool = False
    step_records: list = field(default_factory=list)

    @property
    def n(self) -> int:
        return len(self.s0)

    @property
    def final_state(self) -> np.ndarray:
        return self.probe_states[-1]

    @property
    def verdict_hint(self) -> str:
        return "diverged" if self.diverged else "completed"

    def summary(self) -> dict:
        return {
            "seed": self.seed,
            "run": self.run,
            "params": self.params,
            "horizon": self.horizon,
            "steps": self.steps,
            "verdict_hint": self.verdict_hint,
            "diverged_step": self.steps if self.diverged else None,
            "non_finite": self.non_finite,
            "s0": self.s0.tolist(),
            "final_state": self.final_state.tolist(),
            "final_M": float(self.m_series[-1]),
        }


class _Frame:
    """Index arrays for one graph, grouped by head to match the reference step."""

    def __init__(self, g: SignedDigraph):
        self.graph = g
        order = sampling_order(g)
        self.m = len(order)
        self.pos = self._group([k for k, a in enumerate(order) if a.sign is Sign.POSITIVE], order)
        self.neg = self._group([k for k, a in enumerate(order) if a.sign is Sign.NEGATIVE], order)
        self.order = order

    @staticmethod
    def _group(idx, order):
        if not idx:
            return None
        heads = np.array([order[k].head for k in idx], dtype=np.int64)
        tails = np.array([order[k].tail for k in idx], dtype=np.int64)
        starts = np.flatnonzero(np.r_[True, heads[1:] != heads[:-1]])
        return np.array(idx, dtype=np.int64), heads, tails, starts, heads[starts]


def _recommendations(s: np.ndarray, mask: np.ndarray, group, flip: bool) -> np.ndarray:
    out = np.zeros_like(s)
    if group is None:
        return out
    idx, heads, tails, starts, uheads = group
    if flip:
        terms = s[:, heads] + s[:, tails]
    else:
        terms = s[:, heads] - s[:, tails]
    terms *= mask[:, idx]
    out[:, uheads] = -np.add.reduceat(terms, starts, axis=1)
    return out


def _forced_series(value, horizon: int) -> np.ndarray:
    arr = np.asarray(value, dtype=np.int8)
    if arr.ndim == 0:
        return np.full(horizon, int(arr), dtype=np.int8)
    if len(arr) < horizon:
        raise ValueError("forced attention sequence shorter than the horizon")
    if not np.isin(arr, (0, 1)).all():
        raise ValueError("forced attention values must be 0 or 1")
    return arr[:horizon]


def simulate_batch(
    sched: GraphSchedule,
    model: InteractionModel,
    params: UpdateParams,
    s0: np.ndarray,
    horizon: int,
    *,
    seed: int,
    runs: Sequence[int],
    probes: ProbeSpec = ProbeSpec(),
    ceiling: float = DEFAULT_CEILING,
    forced_attention: Optional[tuple] = None,
    record_steps: int = 0,
    chunk: int = 1024,
) -> list[TrajectoryRecord]:
    """Run several independent trajectories in lock-step.

    Row r of ``s0`` is run ``runs[r]``; its draws come only from the streams of
    that run index, so the batch composition never changes a trajectory.
    """
    s = np.array(s0, dtype=float, ndmin=2)
    R, n = s.shape
    if len(runs) != R:
        raise ValueError("need one run index per initial state")
    if n != sched.n:
        raise ValueError(f"state length {n} does not match schedule node count {sched.n}")
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    if not np.all(np.isfinite(s)):
        raise ValueError("initial state must be finite")

    frames = [_Frame(g) for g in sched.frames]
    period = len(frames)
    width = model.draw_width(sched.max_arcs)
    arc_streams = [RngStream(seed, r, Purpose.ARCS, width) for r in runs] if width else []
    att_streams = [attention_stream(seed, r) for r in runs]
    if forced_attention is not None:
        forced_B = _forced_series(forced_attention[0], horizon)
        forced_D = _forced_series(forced_attention[1], horizon)

    times = probes.times(horizon)
    slot = {int(t): k for k, t in enumerate(times)}
    P = np.empty((R, len(times), n))
    P[:, 0] = s
    M = np.empty((R, horizon + 1))
    absval = np.abs(s)
    M[:, 0] = absval.max(axis=1)
    peaks = absval.copy()
    active = np.ones(R, dtype=bool)
    steps = np.full(R, horizon, dtype=np.int64)
    bad_rows = np.zeros(R, dtype=bool)
    final = s.copy()
    logs: list[list[StepRecord]] = [[] for _ in range(R)]
    alpha, beta = params.alpha, params.beta
    rows = np.arange(R)

    for t0 in range(0, horizon, chunk):
        C = min(chunk, horizon - t0)
        if forced_attention is None:
            ua = np.stack([st.blocks(t0, C) for st in att_streams])
            Bc, Dc = attention_from_uniforms(params.attention, ua)
        else:
            Bc = np.broadcast_to(forced_B[t0:t0 + C], (R, C))
            Dc = np.broadcast_to(forced_D[t0:t0 + C], (R, C))
        aB = alpha * Bc.astype(float)
        bD = beta * Dc.astype(float)

        # masks per frame for the steps of this chunk that use it
        cols = [np.arange(C)[(t0 + np.arange(C)) % period == k] for k in range(period)]
        if arc_streams:
            ue = np.stack([st.blocks(t0, C) for st in arc_streams])
            masks = [mask_from_uniforms(model, f.graph, ue[:, cols[k], :]).astype(float)
                     for k, f in enumerate(frames)]
        else:
            fill = np.ones if isinstance(model, FullActivation) else np.zeros
            masks = [fill((R, len(cols[k]), f.m)) for k, f in enumerate(frames)]
        local = np.empty(C, dtype=np.int64)
        for k in range(period):
            local[cols[k]] = np.arange(len(cols[k]))

        for c in range(C):
            t = t0 + c
            k = t % period
            f = frames[k]
            mask = masks[k][:, local[c], :]
            with np.errstate(all="ignore"):
                hp = _recommendations(s, mask, f.pos, flip=False)
                hm = _recommendations(s, mask, f.neg, flip=True)
                new = s + aB[:, c, None] * hp + bD[:, c, None] * hm
            frozen = ~active
            if frozen.any():
                new[frozen] = s[frozen]
            finite = np.isfinite(new).all(axis=1)
            if not finite.all():
                new[~finite] = s[~finite]
                bad_rows |= ~finite & active
            absval = np.abs(new)
            m = absval.max(axis=1)
            m[~finite] = np.inf
            M[active, t + 1] = m[active]
            np.maximum(peaks, absval, out=peaks)

            if record_steps:
                for r in rows[active]:
                    if len(logs[r]) < record_steps:
                        picked = tuple(a for a, keep in zip(f.order, mask[r]) if keep)
                        logs[r].append(StepRecord(t, picked, int(Bc[r, c]), int(Dc[r, c]), float(m[r])))

            hit = active & ~(m <= ceiling)
            if hit.any():
                steps[hit] = t + 1
                final[hit] = new[hit]
                active &= ~hit
            slot_k = slot.get(t + 1)
            if slot_k is not None:
                P[:, slot_k] = new
            s = new
            if not active.any():
                break
        if not active.any():
            break
    final[active] = s[active]

    snapshot = {**params.to_dict(), "interaction": model_echo(model), "horizon": horizon, "ceiling": ceiling}
    if forced_attention is not None:
        snapshot["forced_attention"] = True
    out = []
    for r in range(R):
        T_r = int(steps[r])
        keep = times <= T_r
        pt, ps = times[keep], P[r, keep]
        if pt[-1] != T_r:
            pt = np.r_[pt, T_r]
            ps = np.vstack([ps, final[r]])
        out.append(TrajectoryRecord(
            seed=int(seed),
            run=int(runs[r]),
            params=snapshot,
            s0=np.array(s0, dtype=float, ndmin=2)[r].copy(),
            horizon=horizon,
            steps=T_r,
            probe_times=pt,
            probe_states=ps,
            m_series=M[r, : T_r + 1].copy(),
            node_peaks=peaks[r].copy(),
            diverged=not bool(active[r]),
            ceiling=ceiling,
            non_finite=bool(bad_rows[r]),
            step_records=logs[r],
        ))
    return out


def run_trajectory(
    sched: GraphSchedule,
    model: InteractionModel,
    params: UpdateParams,
    s0,
    horizon: int,
    seed: int,
    *,
    run: int = 0,
    probes: ProbeSpec = ProbeSpec(),
    ceiling: float = DEFAULT_CEILING,
    forced_attention: Optional[tuple] = None,
    record_steps: int = 0,
) -> TrajectoryRecord:
    """One seeded trajectory; identical to run ``run`` of any batch with this seed."""
    return simulate_batch(
        sched, model, params, np.asarray(s0, dtype=float)[None, :], horizon,
        seed=seed, runs=[run], probes=probes, ceiling=ceiling,
        forced_attention=forced_attention, record_steps=record_steps,
    )[0]


def initial_states(n: int, seed: int, runs: Sequence[int]) -> np.ndarray:
    """Uniform draws on [-1, 1]^n from each run's own INIT stream."""
    return np.stack([2.0 * RngStream(seed, r, Purpose.INIT, n).block(0) - 1.0 for r in runs])


# -- output files -------------------------------------------------------------------


def write_trajectory(traj: TrajectoryRecord, out_dir, stem: str = "trajectory",
                     extra: Optional[dict] = None) -> dict[str, Path]:
    """Probe CSV, full-resolution M CSV and a JSON summary (merged with ``extra``)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    probe_path = out_dir / f"{stem}_probes.csv"
    series_path = out_dir / f"{stem}_M.csv"
    summary_path = out_dir / f"{stem}.json"
    with probe_path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "M"] + [f"s_{i}" for i in range(traj.n)])
        for t, state in zip(traj.probe_times, traj.probe_states):
            w.writerow([int(t), repr(float(traj.m_series[t]))] + [repr(float(x)) for x in state])
    with series_path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "M"])
        for t, m in enumerate(traj.m_series):
            w.writerow([t, repr(float(m))])
    summary = {**traj.summary(), **(extra or {})}
    summary_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return {"probes": probe_path, "series": series_path, "summary": summary_path}
