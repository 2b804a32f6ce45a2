"""Electrical networks on tree truncations.

A weighted network assigns a positive conductance to every edge of a
truncation.  Two stock weightings are supported, both decaying with the
edge's level k:

* ``percolation``: conductance ``p**k``
* ``dynamical``:  conductance ``k * p**k``

and two normalisations: ``plain`` uses the values above, ``lyons`` divides
them by ``(1 - p)``, which is the scaling under which the conductance /
percolation-probability sandwich holds with constants 1 and 2 (the plain
scaling demonstrably violates it; see the regression tests).

Effective conductance is root to wired level-n boundary.  It is computed
two independent ways: a closed-form series for spherically symmetric
trees and a bottom-up series/parallel reduction, which agree to ~1e-15
relative and are cross-checked in the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .trees import (
    ChildSequence,
    GeneralTree,
    GrowthEnvelope,
    SpineTree,
    TreeTruncation,
    truncate,
)

__all__ = [
    "KIND_PERCOLATION",
    "KIND_DYNAMICAL",
    "KIND_CUSTOM",
    "NORM_PLAIN",
    "NORM_LYONS",
    "Bracket",
    "EffectiveConductanceSeq",
    "SpineBase",
    "SymmetricBase",
    "UnitFlow",
    "WeightedNetwork",
    "conductance_bracket",
    "conductance_sequence",
    "custom_network",
    "effective_conductance_reduce",
    "effective_conductance_ss",
    "energy_by_level",
    "energy_by_level_ss",
    "flow_energy",
    "level_conductance",
    "min_energy_unit_flow",
    "network",
    "series_tail_upper",
]

KIND_PERCOLATION = "percolation"
KIND_DYNAMICAL = "dynamical"
KIND_CUSTOM = "custom"
NORM_PLAIN = "plain"
NORM_LYONS = "lyons"

_KINDS = (KIND_PERCOLATION, KIND_DYNAMICAL)
_NORMS = (NORM_PLAIN, NORM_LYONS)


def _check_p(p: float) -> None:
    if not 0.0 < p < 1.0:
        raise ValueError(f"retention probability must lie in (0, 1), got {p}")


def level_conductance(kind: str, normalization: str, p: float, k: int) -> float:
    """Conductance of an edge between levels k-1 and k."""
    _check_p(p)
    if k < 1:
        raise ValueError("edge level must be >= 1")
    if kind == KIND_PERCOLATION:
        c = p ** k
    elif kind == KIND_DYNAMICAL:
        c = k * p ** k
    else:
        raise ValueError(f"unknown kind {kind!r}")
    if normalization == NORM_LYONS:
        c /= 1.0 - p
    elif normalization != NORM_PLAIN:
        raise ValueError(f"unknown normalization {normalization!r}")
    return c


def _log_resistance_term(kind, normalization, p, k, log_size) -> float:
    # log of p^{-k}/|G_k| (percolation) or p^{-k}/(k |G_k|) (dynamical),
    # normalisation factored in.
    t = -k * math.log(p) - log_size
    if kind == KIND_DYNAMICAL:
        t -= math.log(k)
    if normalization == NORM_LYONS:
        t += math.log1p(-p)
    return t


def log_level_conductance(kind: str, normalization: str, p: float, k: int) -> float:
    """log of ``level_conductance``; safe at depths where p**k underflows."""
    _check_p(p)
    if k < 1:
        raise ValueError("edge level must be >= 1")
    t = k * math.log(p)
    if kind == KIND_DYNAMICAL:
        t += math.log(k)
    elif kind != KIND_PERCOLATION:
        raise ValueError(f"unknown kind {kind!r}")
    if normalization == NORM_LYONS:
        t -= math.log1p(-p)
    elif normalization != NORM_PLAIN:
        raise ValueError(f"unknown normalization {normalization!r}")
    return t


@dataclass(frozen=True)
class SymmetricBase:
    """A spherically symmetric tree viewed to a given depth, kept implicit."""

    tree: ChildSequence
    depth: int


@dataclass(frozen=True)
class SpineBase:
    """A spine tree viewed to a given depth, kept implicit."""

    tree: SpineTree
    depth: int


class WeightedNetwork:
    """A conductance assignment over a (possibly implicit) truncation."""

    def __init__(self, base, kind, normalization, p=None, conductances=None):
        self.base = base
        self.kind = kind
        self.normalization = normalization
        self.p = p
        self._conductances = conductances
        if kind != KIND_CUSTOM:
            _check_p(p)
            if kind not in _KINDS:
                raise ValueError(f"unknown kind {kind!r}")
            if normalization not in _NORMS:
                raise ValueError(f"unknown normalization {normalization!r}")
        else:
            if conductances is None:
                raise ValueError("custom networks need explicit conductances")

    @property
    def depth(self) -> int:
        if isinstance(self.base, TreeTruncation):
            return self.base.depth
        return self.base.depth

    @property
    def truncation(self) -> TreeTruncation:
        if not isinstance(self.base, TreeTruncation):
            raise TypeError(
                "operation needs an explicit truncation; build the network from one"
            )
        return self.base

    @property
    def conductances(self) -> np.ndarray:
        """Per-edge conductances (edge e joins parent[e+1] -> e+1)."""
        if self._conductances is None:
            trunc = self.truncation
            levels = trunc.edge_level.astype(np.float64)
            if self.kind == KIND_PERCOLATION:
                c = self.p ** levels
            else:
                c = levels * self.p ** levels
            if self.normalization == NORM_LYONS:
                c = c / (1.0 - self.p)
            self._conductances = c
        return self._conductances


def network(tree, p, kind=KIND_PERCOLATION, normalization=NORM_PLAIN, depth=None):
    """Build the level-weighted network over ``tree`` at depth ``depth``."""
    if isinstance(tree, TreeTruncation):
        return WeightedNetwork(tree, kind, normalization, p)
    if depth is None:
        raise ValueError("depth is required for implicit tree bases")
    if isinstance(tree, ChildSequence):
        return WeightedNetwork(SymmetricBase(tree, depth), kind, normalization, p)
    if isinstance(tree, SpineTree):
        return WeightedNetwork(SpineBase(tree, depth), kind, normalization, p)
    if isinstance(tree, GeneralTree):
        return WeightedNetwork(truncate(tree, depth), kind, normalization, p)
    raise TypeError(f"cannot build a network over {type(tree).__name__}")


def custom_network(trunc: TreeTruncation, conductances) -> WeightedNetwork:
    c = np.asarray(conductances, dtype=np.float64)
    if c.shape != (trunc.num_edges,):
        raise ValueError("need one conductance per edge")
    if np.any(c <= 0):
        raise ValueError("conductances must be strictly positive")
    return WeightedNetwork(trunc, KIND_CUSTOM, NORM_PLAIN, conductances=c)


# ---------------------------------------------------------------------------
# Effective conductance


def effective_conductance_ss(
    levels, p: float, n: int, kind: str = KIND_PERCOLATION,
    normalization: str = NORM_PLAIN,
) -> float:
    """Closed-form conductance of a spherically symmetric network.

    Equals ``(sum_{k=1..n} p^{-k} / |G_k|)^{-1}`` for the percolation
    weighting, with an extra ``1/k`` inside the sum for the dynamical one,
    and the ``1/(1-p)`` adjustment under the lyons normalisation.
    """
    _check_p(p)
    if n < 1:
        raise ValueError("depth must be >= 1")
    tree = levels if isinstance(levels, ChildSequence) else None
    log_size = (tree.log_level_size if tree is not None else levels.log_size)
    terms = []
    for k in range(1, n + 1):
        lt = _log_resistance_term(kind, normalization, p, k, log_size(k))
        if lt > 700.0:
            return 0.0  # a single resistance term exceeds float range
        terms.append(math.exp(lt))
    return 1.0 / math.fsum(terms)


def _series_combine(gamma: float, sub: float) -> float:
    """Conductance of an edge in series with a subtree (inf = boundary)."""
    if math.isinf(sub):
        return gamma
    if gamma <= 0.0 or sub <= 0.0:
        return 0.0
    return gamma * sub / (gamma + sub)


def _reduce_explicit(trunc: TreeTruncation, cond: np.ndarray) -> float:
    D = np.zeros(trunc.num_vertices)
    D[trunc.boundary] = np.inf
    for k in range(trunc.depth - 1, -1, -1):
        lo, hi = int(trunc.level_offsets[k]), int(trunc.level_offsets[k + 1])
        clo, chi = int(trunc.level_offsets[k + 1]), int(trunc.level_offsets[k + 2])
        gamma = cond[clo - 1:chi - 1]
        sub = D[clo:chi]
        denom = gamma + sub
        with np.errstate(invalid="ignore"):
            branch = np.where(
                np.isinf(sub), gamma,
                np.where(denom > 0.0, gamma * sub / np.where(denom > 0.0, denom, 1.0), 0.0),
            )
        cs = np.concatenate([[0.0], np.cumsum(branch)])
        starts = trunc.child_start[lo:hi] - clo
        ends = starts + trunc.child_count[lo:hi]
        D[lo:hi] = cs[ends] - cs[starts]
    return float(D[0])


def _reduce_symmetric(tree: ChildSequence, depth, p, kind, normalization) -> float:
    D = math.inf
    for k in range(depth, 0, -1):
        gamma = level_conductance(kind, normalization, p, k)
        D = tree.children(k - 1) * _series_combine(gamma, D)
    return D


def _subtree_conductance_with_offset(att, offset, depth, p, kind, normalization) -> float:
    """Conductance from a spine vertex through its glued attachment to the
    boundary at total depth ``depth``; attachment level m sits at tree level
    offset + m.  Resistance terms are formed in log space: level sizes and
    conductances individually overflow/underflow floats long before their
    ratio does."""
    m_max = depth - offset
    if m_max < 1:
        return 0.0
    log_copies = math.log(att.copies)
    terms = []
    for m in range(1, m_max + 1):
        lt = -(
            log_copies
            + att.base.log_level_size(m)
            + log_level_conductance(kind, normalization, p, offset + m)
        )
        if lt > 700.0:  # resistance beyond float range: the branch is dead
            return 0.0
        terms.append(math.exp(lt))
    return 1.0 / math.fsum(terms)


def _reduce_spine(tree: SpineTree, depth, p, kind, normalization) -> float:
    A = math.inf  # conductance from v_depth onward: it is the boundary
    for i in range(depth - 1, -1, -1):
        gamma = level_conductance(kind, normalization, p, i + 1)
        through = _series_combine(gamma, A)
        att = tree.attachment_at(i)
        side = (
            _subtree_conductance_with_offset(att, i, depth, p, kind, normalization)
            if att is not None
            else 0.0
        )
        A = side + through
    return A


def effective_conductance_reduce(net: WeightedNetwork) -> float:
    """Root-to-boundary conductance by bottom-up series/parallel reduction.

    Children are folded in index order; on spherically symmetric and spine
    bases the reduction collapses to per-level scalar recursions (one
    representative vertex per symmetric class), which is the same
    arithmetic without materialising the truncation.
    """
    if net.depth < 1:
        raise ValueError("reduction needs depth >= 1")
    if isinstance(net.base, TreeTruncation):
        return _reduce_explicit(net.base, net.conductances)
    if isinstance(net.base, SymmetricBase):
        return _reduce_symmetric(net.base.tree, net.base.depth, net.p, net.kind, net.normalization)
    if isinstance(net.base, SpineBase):
        return _reduce_spine(net.base.tree, net.base.depth, net.p, net.kind, net.normalization)
    raise TypeError("unsupported network base")


# ---------------------------------------------------------------------------
# Series tails and brackets


def series_tail_upper(envelope: GrowthEnvelope | None, p: float, k_shift: int, K: int):
    """Upper bound on ``sum_{k>K} p^{-k} / (k^{k_shift} |G_k|)`` from the
    tree's declared growth envelope, or None when no finite bound follows.

    ``k_shift`` is 0 for the percolation series and 1 for the dynamical one.
    """
    if envelope is None or K < max(2, envelope.k_min):
        return None
    lo, b = envelope.lo, envelope.base
    alpha = envelope.poly + k_shift
    beta = envelope.log_pow
    if alpha < 0 or beta < 0:
        return None
    q = 1.0 / (b * p)
    bounds = []
    if q < 1.0 - 1e-12:
        # geometric tail; polynomial and log factors only help (>= 1)
        bounds.append((1.0 / lo) * q ** (K + 1) / (1.0 - q))
    if q <= 1.0 + 1e-12:
        # the geometric part is <= 1, so the power/log factors alone bound
        # the tail; essential near criticality where q^k barely decays
        if alpha > 1.0:
            bounds.append((1.0 / lo) * K ** (1.0 - alpha) / (alpha - 1.0))
        elif abs(alpha - 1.0) < 1e-12 and beta > 1.0:
            bounds.append(
                (1.0 / lo) * math.log(2.0) ** beta * math.log(K) ** (1.0 - beta) / (beta - 1.0)
            )
    return min(bounds) if bounds else None


def series_divergence_certificate(envelope: GrowthEnvelope | None, p: float,
                                  k_shift: int) -> bool:
    """True when the envelope's upper side proves the series divergent.

    Terms are bounded below by ``(1/hi) q^k / (k^(poly+k_shift) L(k)^beta)``
    with ``q = 1/(base p)``; that minorant diverges when q > 1, and at
    q = 1 exactly when the polynomial power is < 1, or equals 1 with a log
    power <= 1.
    """
    if envelope is None:
        return False
    alpha = envelope.poly + k_shift
    beta = envelope.log_pow
    q = 1.0 / (envelope.base * p)
    if q > 1.0 + 1e-12:
        return True
    if q >= 1.0 - 1e-12:
        if alpha < 1.0 - 1e-12:
            return True
        if abs(alpha - 1.0) <= 1e-12 and beta <= 1.0 + 1e-12:
            return True
    return False


@dataclass(frozen=True)
class Bracket:
    lo: float
    hi: float
    rigorous: bool

    def width(self) -> float:
        return self.hi - self.lo


def conductance_bracket(
    tree: ChildSequence, p, n, kind=KIND_PERCOLATION, normalization=NORM_PLAIN,
) -> Bracket:
    """Bracket for the infinite-depth conductance from a depth-n partial sum.

    ``hi`` is the depth-n value (extending a network can only add
    resistance); ``lo`` comes from the envelope tail bound when one exists,
    otherwise 0 with ``rigorous=False``.
    """
    _check_p(p)
    hi = effective_conductance_ss(tree, p, n, kind, normalization)
    if hi == 0.0:
        # partial resistance already exceeds float range
        return Bracket(0.0, 0.0, True)
    k_shift = 1 if kind == KIND_DYNAMICAL else 0
    tail = series_tail_upper(tree.envelope, p, k_shift, n)
    if tail is None:
        return Bracket(0.0, hi, False)
    if normalization == NORM_LYONS:
        tail *= 1.0 - p
    return Bracket(1.0 / (1.0 / hi + tail), hi, True)


@dataclass
class EffectiveConductanceSeq:
    """Conductances over a schedule of truncation depths, with brackets."""

    tree_id: str
    kind: str
    normalization: str
    p: float
    rows: list = field(default_factory=list)  # (n, C_n, lo, hi)

    def values(self) -> list[float]:
        return [r[1] for r in self.rows]


def conductance_sequence(tree, p, depths: Iterable[int], kind=KIND_PERCOLATION,
                         normalization=NORM_PLAIN) -> EffectiveConductanceSeq:
    seq = EffectiveConductanceSeq(getattr(tree, "name", "") or "tree", kind, normalization, p)
    for n in depths:
        if isinstance(tree, ChildSequence):
            br = conductance_bracket(tree, p, n, kind, normalization)
            c = br.hi
            seq.rows.append((n, c, br.lo, br.hi))
        else:
            c = effective_conductance_reduce(network(tree, p, kind, normalization, depth=n))
            seq.rows.append((n, c, 0.0, c))
    return seq


# ---------------------------------------------------------------------------
# Unit flows and energies


class UnitFlow:
    """Nonnegative per-edge flow: unit outflow at the root, conserved at
    every internal vertex, absorbed at the boundary."""

    def __init__(self, trunc: TreeTruncation, values):
        self.trunc = trunc
        self.values = np.asarray(values, dtype=np.float64)
        if self.values.shape != (trunc.num_edges,):
            raise ValueError("need one flow value per edge")

    def root_outflow(self) -> float:
        t = self.trunc
        return float(math.fsum(self.values[0:int(t.child_count[0])]))

    def conservation_residuals(self) -> np.ndarray:
        """Per-vertex |inflow - outflow| over internal non-root vertices."""
        t = self.trunc
        res = []
        for v in range(1, int(t.level_offsets[t.depth])):
            inflow = self.values[v - 1]
            s, c = int(t.child_start[v]), int(t.child_count[v])
            outflow = math.fsum(self.values[s - 1:s - 1 + c]) if c else 0.0
            res.append(abs(inflow - outflow))
        return np.asarray(res)

    def validate(self, atol: float = 1e-12) -> None:
        if np.any(self.values < -atol):
            raise ValueError("flow values must be nonnegative")
        if abs(self.root_outflow() - 1.0) > atol:
            raise ValueError("root outflow must equal 1")
        res = self.conservation_residuals()
        if res.size and float(res.max()) > atol:
            raise ValueError(f"flow not conserved; max residual {res.max():.3e}")


def min_energy_unit_flow(net: WeightedNetwork) -> UnitFlow:
    """The unique energy-minimising unit flow: at every vertex the incoming
    flow splits among the child branches proportionally to each branch's
    effective conductance."""
    trunc = net.truncation
    cond = net.conductances
    V = trunc.num_vertices
    D = np.zeros(V)
    D[trunc.boundary] = np.inf
    branch = np.zeros(trunc.num_edges)
    for k in range(trunc.depth - 1, -1, -1):
        lo, hi = int(trunc.level_offsets[k]), int(trunc.level_offsets[k + 1])
        clo, chi = int(trunc.level_offsets[k + 1]), int(trunc.level_offsets[k + 2])
        gamma = cond[clo - 1:chi - 1]
        sub = D[clo:chi]
        denom = gamma + sub
        with np.errstate(invalid="ignore"):
            b = np.where(
                np.isinf(sub), gamma,
                np.where(denom > 0.0, gamma * sub / np.where(denom > 0.0, denom, 1.0), 0.0),
            )
        branch[clo - 1:chi - 1] = b
        cs = np.concatenate([[0.0], np.cumsum(b)])
        starts = trunc.child_start[lo:hi] - clo
        ends = starts + trunc.child_count[lo:hi]
        D[lo:hi] = cs[ends] - cs[starts]
    if D[0] <= 0.0:
        raise ValueError("network has zero root conductance; no unit flow exists")

    flow = np.zeros(trunc.num_edges)
    vertex_in = np.zeros(V)
    vertex_in[0] = 1.0
    for k in range(trunc.depth):
        lo, hi = int(trunc.level_offsets[k]), int(trunc.level_offsets[k + 1])
        clo, chi = int(trunc.level_offsets[k + 1]), int(trunc.level_offsets[k + 2])
        parents = trunc.parent[clo:chi]
        with np.errstate(invalid="ignore", divide="ignore"):
            share = np.where(D[parents] > 0.0, vertex_in[parents] / D[parents], 0.0)
        f = share * branch[clo - 1:chi - 1]
        flow[clo - 1:chi - 1] = f
        vertex_in[clo:chi] = f
    return UnitFlow(trunc, flow)


def _require_shared_truncation(flow: UnitFlow, net: WeightedNetwork) -> None:
    if flow.trunc is not net.truncation:
        raise ValueError("flow and network live on different truncations")


def flow_energy(flow: UnitFlow, net: WeightedNetwork) -> float:
    """Energy sum of flow(e)^2 / conductance(e)."""
    _require_shared_truncation(flow, net)
    return float(math.fsum(flow.values * flow.values / net.conductances))


def energy_by_level(flow: UnitFlow, net: WeightedNetwork) -> dict[int, float]:
    """Energy split by the level of the edge; values sum to the energy."""
    _require_shared_truncation(flow, net)
    contrib = flow.values * flow.values / net.conductances
    levels = flow.trunc.edge_level
    out = {}
    for k in range(1, flow.trunc.depth + 1):
        out[k] = float(math.fsum(contrib[levels == k]))
    return out


def energy_by_level_ss(tree: ChildSequence, p, n, kind=KIND_PERCOLATION,
                       normalization=NORM_PLAIN) -> dict[int, float]:
    """Per-level energy of the symmetric minimal flow (equal split: each
    level-k edge carries 1/|G_k|), in closed form."""
    _check_p(p)
    return {
        k: math.exp(_log_resistance_term(kind, normalization, p, k, tree.log_level_size(k)))
        for k in range(1, n + 1)
    }
