"""Percolation probabilities on truncations and their limits.

``theta_truncated`` is the exact probability that the root reaches the
depth-n boundary when every edge is kept independently with probability p.
On spherically symmetric trees it collapses to a scalar per-level
recursion; spine trees get a structured recursion; anything else runs the
generic bottom-up pass over an explicit truncation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import networks
from .networks import Bracket, NORM_LYONS, NORM_PLAIN, KIND_PERCOLATION
from .trees import ChildSequence, GeneralTree, SpineTree, TreeTruncation, truncate

__all__ = [
    "MCEstimate",
    "PcEstimate",
    "SandwichReport",
    "ThetaBracket",
    "ThetaCurve",
    "branching_pc",
    "lyons_sandwich",
    "spine_theta_lower",
    "theta_curve",
    "theta_limit",
    "theta_mc",
    "theta_truncated",
]

DEPTH_BUDGET_SYMMETRIC = 2 ** 14
DEPTH_BUDGET_GENERAL = 20


def _check_prob(p) -> None:
    arr = np.asarray(p, dtype=np.float64)
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ValueError("retention probability must lie in [0, 1]")


def _step(p, g, c):
    """One level of the recursion: 1 - (1 - p*g)**c, stably."""
    if isinstance(p, np.ndarray) or isinstance(g, np.ndarray):
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            return -np.expm1(c * np.log1p(-np.asarray(p) * g))
    x = p * g
    if x >= 1.0:
        return 1.0
    return -math.expm1(c * math.log1p(-x))


def _theta_symmetric(tree: ChildSequence, p, n: int):
    if isinstance(p, np.ndarray):
        g = np.ones_like(p, dtype=np.float64)
        for k in range(n - 1, -1, -1):
            g = _step(p, g, tree.children(k))
        return g
    if p == 0.0:
        return 0.0 if n >= 1 else 1.0
    if p == 1.0:
        return 1.0
    g = 1.0
    for k in range(n - 1, -1, -1):
        g = _step(p, g, tree.children(k))
    return g


def _attachment_theta(att, p, levels: int):
    """P[spine vertex reaches down `levels` levels inside its attachment]."""
    if levels < 1:
        return np.zeros_like(p) if isinstance(p, np.ndarray) else 0.0
    g = np.ones_like(p) if isinstance(p, np.ndarray) else 1.0
    for m in range(levels - 1, 0, -1):
        g = _step(p, g, att.base.children(m))
    return _step(p, g, att.copies * att.base.children(0))


def _theta_spine(tree: SpineTree, p, n: int):
    h = np.ones_like(p) if isinstance(p, np.ndarray) else 1.0
    for i in range(n - 1, -1, -1):
        att = tree.attachment_at(i)
        through = p * h
        if att is not None:
            t = _attachment_theta(att, p, n - i)
            h = through + t - through * t
        else:
            h = through
    return h


def _theta_explicit(trunc: TreeTruncation, p: float) -> float:
    if trunc.depth == 0:
        return 1.0
    g = np.ones(int(trunc.level_offsets[trunc.depth + 1] - trunc.level_offsets[trunc.depth]))
    for k in range(trunc.depth - 1, -1, -1):
        lo, hi = int(trunc.level_offsets[k]), int(trunc.level_offsets[k + 1])
        clo, chi = int(trunc.level_offsets[k + 1]), int(trunc.level_offsets[k + 2])
        fac = 1.0 - p * g
        zero = fac <= 0.0
        with np.errstate(divide="ignore"):
            logs = np.where(zero, 0.0, np.log(np.where(zero, 1.0, fac)))
        cs_log = np.concatenate([[0.0], np.cumsum(logs)])
        cs_zero = np.concatenate([[0], np.cumsum(zero.astype(np.int64))])
        starts = trunc.child_start[lo:hi] - clo
        ends = starts + trunc.child_count[lo:hi]
        prod = np.where(cs_zero[ends] > cs_zero[starts], 0.0, np.exp(cs_log[ends] - cs_log[starts]))
        # vertices with no children never reach the boundary
        prod = np.where(trunc.child_count[lo:hi] == 0, 1.0, prod)
        g = 1.0 - prod
    return float(g[0])


def theta_truncated(tree, p, n: int):
    """Exact probability that the root connects to level n at retention p.

    Accepts a float or an ndarray of p values on symmetric and spine trees.
    """
    _check_prob(p)
    if n < 0:
        raise ValueError("depth must be >= 0")
    if n == 0:
        return np.ones_like(p) if isinstance(p, np.ndarray) else 1.0
    if isinstance(tree, ChildSequence):
        return _theta_symmetric(tree, p, n)
    if isinstance(tree, SpineTree):
        return _theta_spine(tree, p, n)
    if isinstance(tree, TreeTruncation):
        trunc = tree if tree.depth == n else truncate(tree, n)
        if isinstance(p, np.ndarray):
            return np.array([_theta_explicit(trunc, float(q)) for q in p])
        return _theta_explicit(trunc, float(p))
    if isinstance(tree, GeneralTree):
        trunc = truncate(tree, n)
        if isinstance(p, np.ndarray):
            return np.array([_theta_explicit(trunc, float(q)) for q in p])
        return _theta_explicit(trunc, float(p))
    raise TypeError(f"cannot compute theta on {type(tree).__name__}")


# ---------------------------------------------------------------------------
# Monte Carlo


@dataclass(frozen=True)
class MCEstimate:
    mean: float
    stderr: float
    replicas: int
    successes: int
    seed: int


def theta_mc(tree, p: float, n: int, replicas: int, seed: int,
             block_size: int = 4096) -> MCEstimate:
    """Unbiased Monte Carlo estimate of ``theta_truncated(tree, p, n)``.

    Replicas are drawn in fixed-size blocks, one child generator per block,
    so the result depends only on (seed, replicas, block_size).
    """
    _check_prob(p)
    if replicas < 1:
        raise ValueError("need at least one replica")
    trunc = truncate(tree, n)
    if trunc.depth == 0:
        return MCEstimate(1.0, 0.0, replicas, replicas, seed)
    n_blocks = (replicas + block_size - 1) // block_size
    children = np.random.SeedSequence(seed).spawn(n_blocks)
    successes = 0
    off = trunc.level_offsets
    for b in range(n_blocks):
        B = min(block_size, replicas - b * block_size)
        rng = np.random.Generator(np.random.PCG64(children[b]))
        open_ = rng.random((B, trunc.num_edges)) < p
        conn = np.ones((B, int(off[n + 1] - off[n])), dtype=np.int64)
        for k in range(trunc.depth - 1, -1, -1):
            lo, hi = int(off[k]), int(off[k + 1])
            clo, chi = int(off[k + 1]), int(off[k + 2])
            contrib = (open_[:, clo - 1:chi - 1] & (conn > 0)).astype(np.int64)
            cs = np.concatenate([np.zeros((B, 1), dtype=np.int64), np.cumsum(contrib, axis=1)], axis=1)
            starts = trunc.child_start[lo:hi] - clo
            ends = starts + trunc.child_count[lo:hi]
            conn = cs[:, ends] - cs[:, starts]
        successes += int((conn[:, 0] > 0).sum())
    mean = successes / replicas
    stderr = math.sqrt(mean * (1.0 - mean) / replicas)
    return MCEstimate(mean, stderr, replicas, successes, seed)


# ---------------------------------------------------------------------------
# Limits, brackets, critical values


@dataclass(frozen=True)
class ThetaBracket:
    lo: float
    hi: float
    estimate: float
    rigorous_lower: bool
    depth: int
    converged: bool


def spine_theta_lower(tree: SpineTree, p: float, series_depth: int = 4000) -> float:
    """Rigorous lower bound on theta for a spine tree.

    Walking up the spine, the event "reach infinity through this vertex's
    attachment" and the event "spine edge open and the next spine vertex
    reaches infinity" use disjoint edge sets, hence are independent; each
    attachment's own lower bound comes from its conductance bracket.
    """
    _check_prob(p)
    if p <= 0.0:
        return 0.0
    h = 0.0
    for i in range(len(tree.attachments), 0, -1):
        att = tree.attachment_at(i)
        t_lo = 0.0
        if att is not None and att.p <= p < 1.0:
            # strictly subcritical attachments contribute no lower bound
            br = networks.conductance_bracket(att.base, p, series_depth,
                                              KIND_PERCOLATION, NORM_LYONS)
            if br.rigorous and br.lo > 0.0:
                c = att.copies * br.lo  # glued copies act in parallel
                t_lo = c / (1.0 + c)
        h = 1.0 - (1.0 - t_lo) * (1.0 - p * h)
    return p * h


def _aitken(x0: float, x1: float, x2: float) -> float:
    denom = x2 - 2.0 * x1 + x0
    if abs(denom) < 1e-300:
        return x2
    return x2 - (x2 - x1) ** 2 / denom


def theta_limit(tree, p: float, tol: float = 1e-6, max_depth: int | None = None) -> ThetaBracket:
    """Bracket for the infinite-depth percolation probability.

    ``hi`` is the final truncation value (always a valid upper bound).
    ``lo`` is the conductance-based lower bound when a rigorous bracket is
    available, else 0; the Aitken-extrapolated point estimate is reported
    but is not part of the contract.
    """
    _check_prob(p)
    if tol <= 0:
        raise ValueError("tol must be positive")
    structured = isinstance(tree, (ChildSequence, SpineTree))
    if max_depth is None:
        max_depth = DEPTH_BUDGET_SYMMETRIC if structured else DEPTH_BUDGET_GENERAL
    if p in (0.0, 1.0):
        v = float(p)
        return ThetaBracket(v, v, v, True, 0, True)

    n = min(16, max_depth)
    converged = False
    hi = est = 1.0
    while True:
        t2 = theta_truncated(tree, p, n)
        t1 = theta_truncated(tree, p, n - 1)
        t0 = theta_truncated(tree, p, n - 2)
        hi = float(t2)
        est = min(hi, max(0.0, _aitken(float(t0), float(t1), float(t2))))
        if hi - est <= tol:
            converged = True
            break
        if n >= max_depth:
            break
        n = min(2 * n, max_depth)

    lo, rigorous = 0.0, False
    if isinstance(tree, ChildSequence):
        br = networks.conductance_bracket(tree, p, max(n, 512), KIND_PERCOLATION, NORM_LYONS)
        if br.rigorous:
            lo, rigorous = br.lo / (1.0 + br.lo), True
    elif isinstance(tree, SpineTree):
        lo = spine_theta_lower(tree, p)
        rigorous = lo > 0.0
    lo = min(lo, hi)
    return ThetaBracket(lo, hi, est, rigorous, n, converged)


@dataclass(frozen=True)
class PcEstimate:
    estimate: float
    lo: float
    hi: float
    method: str
    depth: int
    at_boundary: bool = False


def _series_increment_divergent(tree: ChildSequence, p: float, K: int, delta: float = 0.05) -> bool:
    s_half = 1.0 / networks.effective_conductance_ss(tree, p, K // 2)
    s_full = 1.0 / networks.effective_conductance_ss(tree, p, K)
    return (s_full - s_half) >= delta


def branching_pc(tree, K: int = 200) -> PcEstimate:
    """Critical retention probability via level growth.

    For spherically symmetric trees p_c is the reciprocal of the liminf of
    |G_k|^(1/k); a declared growth envelope pins that limit exactly.
    Otherwise the trailing-window minimum plus a bisection refinement on
    the conductance series gives a point estimate with a heuristic bracket.
    """
    if K < 10:
        raise ValueError("K must be >= 10")
    if isinstance(tree, SpineTree):
        realized = [a.p for a in tree.attachments]
        hi = min(realized) if realized else 1.0
        lo = tree.pi_limit
        return PcEstimate(lo, lo, hi, "spine-rule", len(realized),
                          at_boundary=not 0.0 < lo < 1.0)
    if isinstance(tree, ChildSequence):
        if tree.envelope is not None:
            pc = 1.0 / tree.envelope.base
            return PcEstimate(pc, pc, pc, "growth-envelope", K,
                              at_boundary=not 0.0 < pc < 1.0)
        rates = [math.exp(tree.log_level_size(k) / k) for k in range(1, K + 1)]
        window = rates[K // 2:]
        point = 1.0 / min(window)
        plo, phi = max(point * 0.5, 1e-9), min(point * 1.5, 1.0 - 1e-9)
        if _series_increment_divergent(tree, plo, 4 * K) and not _series_increment_divergent(tree, phi, 4 * K):
            for _ in range(40):
                mid = 0.5 * (plo + phi)
                if _series_increment_divergent(tree, mid, 4 * K):
                    plo = mid
                else:
                    phi = mid
            point = 0.5 * (plo + phi)
        lo = min(plo, 1.0 / max(window))
        hi = max(phi, 1.0 / min(window))
        return PcEstimate(point, lo, hi, "window+bisection", K,
                          at_boundary=not 1e-9 < point < 1.0 - 1e-9)
    # explicit / generic: use realised level sizes at a modest depth
    depth = min(K, DEPTH_BUDGET_GENERAL)
    trunc = truncate(tree, depth) if not isinstance(tree, TreeTruncation) else tree
    sizes = trunc.level_sizes()
    rates = [sizes[k] ** (1.0 / k) for k in range(1, len(sizes))]
    window = rates[len(rates) // 2:]
    point = 1.0 / min(window)
    return PcEstimate(point, 1.0 / max(window), 1.0 / min(window), "window",
                      trunc.depth, at_boundary=not 1e-9 < point < 1.0 - 1e-9)


# ---------------------------------------------------------------------------
# Sandwich between theta and the conductance


@dataclass(frozen=True)
class SandwichReport:
    p: float
    n: int
    normalization: str
    c: Bracket
    lower: float
    upper: float
    theta: float
    theta_gap: float
    verdict: str  # "inside" | "outside" | "inconclusive"


def lyons_sandwich(tree, p: float, n: int | None = None,
                   normalization: str = NORM_LYONS) -> SandwichReport:
    """Check C/(1+C) <= theta <= 2C/(1+C) against the truncation values.

    The check runs with the requested conductance normalisation; under the
    plain weighting the upper bound demonstrably fails on the binary tree,
    which the suite pins as a regression.
    """
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie in (0, 1)")
    if n is None:
        n = DEPTH_BUDGET_SYMMETRIC if isinstance(tree, (ChildSequence, SpineTree)) else DEPTH_BUDGET_GENERAL
    if isinstance(tree, ChildSequence):
        c = networks.conductance_bracket(tree, p, n, KIND_PERCOLATION, normalization)
    else:
        hi = networks.effective_conductance_reduce(
            networks.network(tree, p, KIND_PERCOLATION, normalization, depth=n)
        )
        c = Bracket(0.0, hi, False)
    theta_n = float(theta_truncated(tree, p, n))
    theta_half = float(theta_truncated(tree, p, max(1, n // 2)))
    gap = max(0.0, theta_half - theta_n)
    lower = c.lo / (1.0 + c.lo)
    upper = min(1.0, 2.0 * c.hi / (1.0 + c.hi))
    slack = gap + 1e-12
    if not c.rigorous:
        verdict = "inconclusive"
    elif lower - slack <= theta_n <= upper + slack:
        verdict = "inside"
    else:
        verdict = "outside"
    if c.rigorous is False and theta_n > upper + slack:
        # the upper violation does not need the lower bracket
        verdict = "outside"
    return SandwichReport(p, n, normalization, c, lower, upper, theta_n, gap, verdict)


# ---------------------------------------------------------------------------
# Curves


@dataclass
class ThetaCurve:
    tree_id: str
    rows: list = field(default_factory=list)  # (p, n, theta_n, lo, hi, method)


def theta_curve(tree, ps: Sequence[float], tol: float = 1e-6,
                max_depth: int | None = None) -> ThetaCurve:
    curve = ThetaCurve(getattr(tree, "name", "") or "tree")
    structured = isinstance(tree, (ChildSequence, SpineTree))
    method = "scalar" if structured else "general"
    for p in ps:
        br = theta_limit(tree, float(p), tol=tol, max_depth=max_depth)
        curve.rows.append((float(p), br.depth, br.hi, br.lo, br.hi, method))
    return curve
