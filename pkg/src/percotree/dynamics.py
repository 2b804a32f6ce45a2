"""Event-driven simulation of edges flipping on and off in continuous time.

Every edge runs an independent stationary two-state Markov chain: it turns
on at rate p and off at rate 1-p (mean holding times 1/p off, 1/(1-p) on),
started from the stationary law P[on] = p.  The simulator tracks whether
the root reaches the level-n boundary through open edges, updating only
the ancestor path of the flipped edge, and records the switch times of
that indicator.

Everything is a pure function of (truncation, p, T, seed): edge streams
come from one spawned child generator per edge, so results are bit-exact
reproducible and independent of processing order.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass

import numpy as np

from .trees import TreeTruncation

__all__ = [
    "CrosscheckReport",
    "MarginalReport",
    "SwitchStats",
    "Timeline",
    "connectivity_crosscheck",
    "edge_marginal_check",
    "occupation_fraction",
    "simulate",
    "switch_statistics",
]


def _check_params(p: float, T: float) -> None:
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie in (0, 1)")
    if not T > 0.0:
        raise ValueError("horizon T must be positive")


def _edge_stream(rng: np.random.Generator, p: float, T: float) -> tuple[int, np.ndarray]:
    """Initial state and the sorted flip times in (0, T] for one edge."""
    s0 = int(rng.random() < p)
    chunks = []
    t = 0.0
    state = s0
    mean_rate = 2.0 * p * (1.0 - p)
    n_guess = max(64, int(mean_rate * T * 1.25) + 64)
    while t <= T:
        u = rng.exponential(size=n_guess)
        scale = np.empty(n_guess)
        if state == 0:
            scale[0::2] = 1.0 / p
            scale[1::2] = 1.0 / (1.0 - p)
        else:
            scale[0::2] = 1.0 / (1.0 - p)
            scale[1::2] = 1.0 / p
        times = t + np.cumsum(u * scale)
        chunks.append(times)
        t = float(times[-1])
        if n_guess % 2 == 1:
            state = 1 - state
    flips = np.concatenate(chunks) if len(chunks) > 1 else chunks[0]
    return s0, flips[flips <= T]


def _all_streams(num_edges: int, p: float, T: float, seed: int):
    kids = np.random.SeedSequence(seed).spawn(num_edges)
    init = np.empty(num_edges, dtype=np.int8)
    flips = []
    for e in range(num_edges):
        rng = np.random.Generator(np.random.PCG64(kids[e]))
        s0, ts = _edge_stream(rng, p, T)
        init[e] = s0
        flips.append(ts)
    return init, flips


def _initial_connectivity(trunc: TreeTruncation, open_: np.ndarray):
    """Bottom-up pass: per-vertex boundary-connected flag and the count of
    children contributing through an open edge."""
    V = trunc.num_vertices
    n = trunc.depth
    conn = [False] * V
    cnt = [0] * V
    parent = trunc.parent.tolist()
    level = trunc.level_of.tolist()
    for v in range(V - 1, -1, -1):
        conn[v] = True if level[v] == n else cnt[v] > 0
        if v > 0 and open_[v - 1] and conn[v]:
            cnt[parent[v]] += 1
    return conn, cnt


@dataclass
class Timeline:
    """Piecewise-constant root-to-boundary indicator over [0, T]."""

    horizon: float
    initial: bool
    times: np.ndarray   # strictly increasing switch times in (0, T]
    states: np.ndarray  # indicator value right after each switch

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.float64)
        self.states = np.asarray(self.states, dtype=bool)
        if self.times.shape != self.states.shape:
            raise ValueError("times and states must align")
        if self.times.size:
            if not np.all(np.diff(self.times) > 0):
                raise ValueError("switch times must be strictly increasing")
            if self.times[0] <= 0.0 or self.times[-1] > self.horizon:
                raise ValueError("switch times must lie in (0, T]")
            expected = np.empty(self.times.size, dtype=bool)
            expected[0] = not self.initial
            expected[1:] = ~self.states[:-1]
            if not np.array_equal(self.states, expected):
                raise ValueError("indicator values must alternate")

    def value_at(self, t: float) -> bool:
        if not 0.0 <= t <= self.horizon:
            raise ValueError("time outside the horizon")
        i = bisect_right(self.times.tolist(), t)
        return bool(self.initial) if i == 0 else bool(self.states[i - 1])


def simulate(trunc: TreeTruncation, p: float, T: float, seed: int) -> Timeline:
    """Exact event-driven trajectory of the root-boundary indicator."""
    _check_params(p, T)
    if trunc.depth == 0 or trunc.num_edges == 0:
        return Timeline(T, True, np.empty(0), np.empty(0, dtype=bool))
    init, flips = _all_streams(trunc.num_edges, p, T, seed)

    all_t = np.concatenate(flips)
    all_e = np.concatenate([np.full(len(ts), e, dtype=np.int64) for e, ts in enumerate(flips)])
    order = np.lexsort((all_e, all_t))
    ev_t = all_t[order].tolist()
    ev_e = all_e[order].tolist()

    state = init.astype(np.int64).tolist()
    conn, cnt = _initial_connectivity(trunc, state)
    parent = trunc.parent.tolist()
    level = trunc.level_of.tolist()
    n = trunc.depth

    out_t: list[float] = []
    out_s: list[bool] = []
    for t, e in zip(ev_t, ev_e):
        child = e + 1
        now_open = state[e] = 1 - state[e]
        if not conn[child]:
            continue
        u = parent[child]
        cnt[u] += 1 if now_open else -1
        x = u
        while True:
            new = True if level[x] == n else cnt[x] > 0
            if new == conn[x]:
                break
            conn[x] = new
            if x == 0:
                out_t.append(t)
                out_s.append(new)
                break
            ex = x - 1
            if not state[ex]:
                break
            px = parent[x]
            cnt[px] += 1 if new else -1
            x = px
    # conn[0] is the final state; the value before any switch is the
    # negation of the first recorded one.
    initial = (not out_s[0]) if out_s else bool(conn[0])
    return Timeline(T, initial, np.asarray(out_t), np.asarray(out_s, dtype=bool))


def occupation_fraction(tl: Timeline) -> float:
    """Fraction of [0, T] during which the indicator is on, exactly."""
    if tl.times.size == 0:
        return 1.0 if tl.initial else 0.0
    edges = np.concatenate([[0.0], tl.times, [tl.horizon]])
    lengths = np.diff(edges)
    values = np.concatenate([[tl.initial], tl.states]).astype(np.float64)
    return float(np.dot(lengths, values) / tl.horizon)


@dataclass(frozen=True)
class SwitchStats:
    count: int
    mean_on: float | None
    mean_off: float | None


def switch_statistics(tl: Timeline) -> SwitchStats:
    """Counts and mean lengths of the completed on/off intervals."""
    if tl.times.size < 2:
        return SwitchStats(int(tl.times.size), None, None)
    durations = np.diff(tl.times)
    # interval i (between switch i and i+1) carries value states[i]
    vals = tl.states[:-1]
    on = durations[vals]
    off = durations[~vals]
    return SwitchStats(
        int(tl.times.size),
        float(on.mean()) if on.size else None,
        float(off.mean()) if off.size else None,
    )


@dataclass
class MarginalReport:
    p: float
    horizon: float
    tolerance: float
    fractions: np.ndarray
    passes: np.ndarray
    pass_rate: float
    horizon_sufficient: bool


def edge_marginal_check(trunc: TreeTruncation, p: float, T: float, seed: int) -> MarginalReport:
    """Per-edge occupation of the on state against the stationary value p.

    The tolerance is 4 * sqrt(p (1-p) * 2 / (lambda T)) with lambda = p +
    (1-p) the chain's relaxation rate; when that tolerance is no sharper
    than the probability itself the horizon is flagged as insufficient.
    """
    _check_params(p, T)
    init, flips = _all_streams(trunc.num_edges, p, T, seed)
    fractions = np.empty(trunc.num_edges)
    for e, ts in enumerate(flips):
        edges = np.concatenate([[0.0], ts, [T]])
        lengths = np.diff(edges)
        vals = np.empty(len(lengths))
        vals[0::2] = init[e]
        vals[1::2] = 1 - init[e]
        fractions[e] = np.dot(lengths, vals) / T
    lam = p + (1.0 - p)
    tol = 4.0 * math.sqrt(p * (1.0 - p) * 2.0 / (lam * T))
    passes = np.abs(fractions - p) <= tol
    return MarginalReport(
        p, T, tol, fractions, passes,
        float(passes.mean()) if trunc.num_edges else 1.0,
        horizon_sufficient=tol < max(p, 1.0 - p),
    )


@dataclass
class CrosscheckReport:
    sample_times: np.ndarray
    agreements: np.ndarray

    def all_equal(self) -> bool:
        return bool(self.agreements.all())


def connectivity_crosscheck(
    trunc: TreeTruncation, p: float, T: float, seed: int,
    samples: int = 100, sample_seed: int = 0,
) -> CrosscheckReport:
    """At uniformly sampled times, compare the incremental indicator with a
    from-scratch bottom-up recomputation on the frozen edge configuration."""
    _check_params(p, T)
    tl = simulate(trunc, p, T, seed)
    init, flips = _all_streams(trunc.num_edges, p, T, seed)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(sample_seed)))
    ts = np.sort(rng.uniform(0.0, T, size=samples))
    agree = np.empty(samples, dtype=bool)
    for i, t in enumerate(ts):
        open_ = np.empty(trunc.num_edges, dtype=np.int64)
        for e, fl in enumerate(flips):
            n_flips = int(np.searchsorted(fl, t, side="right"))
            open_[e] = init[e] ^ (n_flips & 1)
        conn, _ = _initial_connectivity(trunc, open_.tolist())
        agree[i] = (bool(conn[0]) == tl.value_at(float(t)))
    return CrosscheckReport(ts, agree)
