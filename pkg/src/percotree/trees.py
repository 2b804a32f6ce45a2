"""Rooted tree models and finite truncations.

Three tree representations share the same vocabulary of levels:

* :class:`ChildSequence` -- spherically symmetric trees, one children count
  per level.  Level sizes are exact (arbitrary-precision) integers.
* :class:`GeneralTree` -- trees given by a deterministic rule mapping a
  root-to-vertex path of child indices to a children count.
* :class:`SpineTree` -- a single infinite branch with a spherically
  symmetric subtree glued onto each branch vertex.  A structured subclass
  of :class:`GeneralTree` so that deep scalar computations stay cheap.

``truncate`` materialises any of them as an explicit
:class:`TreeTruncation` down to a requested depth, with the vertices of
level ``n`` acting as the boundary.
"""

from __future__ import annotations

import json
import math
import threading
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "ChildSequence",
    "GeneralTree",
    "GrowthEnvelope",
    "LevelSizes",
    "SpineAttachment",
    "SpineTree",
    "TreeTruncation",
    "from_spec",
    "glue_at_root",
    "glue_symmetric_copies",
    "level_size",
    "load_tree",
    "save_tree",
    "truncate",
]

# Explicit truncations refuse to materialise more vertices than this unless
# the caller raises the limit; rule-based trees can grow doubly fast.
DEFAULT_MAX_VERTICES = 4_000_000


def _smooth_log2(k: int | float) -> float:
    return max(1.0, math.log2(k)) if k >= 1 else 1.0


@dataclass(frozen=True)
class GrowthEnvelope:
    """Two-sided analytic bound on level sizes.

    Guarantees ``lo * shape(k) <= |level k| <= hi * shape(k)`` for all
    ``k >= k_min`` where ``shape(k) = k**poly * max(1, log2 k)**log_pow *
    base**k``.  Everything downstream that claims rigour (series tails,
    conductance brackets, critical-value brackets) keys off this.
    """

    lo: float
    hi: float
    poly: float
    log_pow: float
    base: float
    k_min: int = 1

    def log_shape(self, k: int) -> float:
        return (
            self.poly * math.log(k)
            + self.log_pow * math.log(_smooth_log2(k))
            + k * math.log(self.base)
        )

    def log_lo(self, k: int) -> float:
        return math.log(self.lo) + self.log_shape(k)

    def log_hi(self, k: int) -> float:
        return math.log(self.hi) + self.log_shape(k)

    def scaled(self, factor: float) -> "GrowthEnvelope":
        return GrowthEnvelope(
            self.lo * factor, self.hi * factor, self.poly, self.log_pow,
            self.base, self.k_min,
        )


class LevelSizes:
    """Memoised level sizes |level k| of a spherically symmetric tree.

    Sizes are exact Python integers (they overflow any fixed width long
    before the depths the divergence diagnostics need); float logarithms
    are maintained alongside for deep series work.
    """

    def __init__(self, children: Callable[[int], int]):
        self._children = children
        self._sizes: list[int] = [1]
        self._logs: list[float] = [0.0]
        self._exact_upto = 20_000  # beyond this only the log track is kept
        self._lock = threading.Lock()

    def _grow(self, k: int) -> None:
        with self._lock:
            while len(self._logs) <= k:
                j = len(self._logs) - 1
                c = self._children(j)
                self._logs.append(self._logs[-1] + math.log(c))
                if len(self._sizes) == len(self._logs) - 1 and j + 1 <= self._exact_upto:
                    self._sizes.append(self._sizes[-1] * c)

    def size(self, k: int) -> int:
        if k < 0:
            raise ValueError("level index must be >= 0")
        self._grow(k)
        if k >= len(self._sizes):
            raise ValueError(
                f"exact level size kept only up to k={self._exact_upto}; "
                f"use log_size for k={k}"
            )
        return self._sizes[k]

    def log_size(self, k: int) -> float:
        if k < 0:
            raise ValueError("level index must be >= 0")
        self._grow(k)
        return self._logs[k]

    def __getitem__(self, k: int) -> int:
        return self.size(k)


class ChildSequence:
    """Spherically symmetric tree: every level-k vertex has ``rule(k)`` children."""

    spherically_symmetric = True

    def __init__(
        self,
        rule: Callable[[int], int],
        *,
        name: str = "",
        envelope: GrowthEnvelope | None = None,
        spec: dict | None = None,
    ):
        self._rule = rule
        self._memo: list[int] = []
        self._lock = threading.Lock()
        self.name = name
        self.envelope = envelope
        self.spec = spec
        self.levels = LevelSizes(self.children)

    def children(self, k: int) -> int:
        if k < 0:
            raise ValueError("level index must be >= 0")
        if k < len(self._memo):
            return self._memo[k]
        with self._lock:
            while len(self._memo) <= k:
                j = len(self._memo)
                c = self._rule(j)
                if not isinstance(c, (int, np.integer)) or c < 1:
                    raise ValueError(f"children count at level {j} must be a positive integer, got {c!r}")
                self._memo.append(int(c))
        return self._memo[k]

    def level_size(self, k: int) -> int:
        return self.levels.size(k)

    def log_level_size(self, k: int) -> float:
        return self.levels.log_size(k)

    def __repr__(self) -> str:
        return f"ChildSequence(name={self.name!r})"


class GeneralTree:
    """Tree defined by a pure rule: path of child indices -> children count.

    The root has the empty path.  ``depth_bound`` caps how deep the rule may
    be evaluated; ``truncate`` refuses to go past it.
    """

    spherically_symmetric = False

    def __init__(
        self,
        rule: Callable[[tuple[int, ...]], int],
        *,
        depth_bound: int | None = None,
        name: str = "",
        spec: dict | None = None,
    ):
        self._rule = rule
        self.depth_bound = depth_bound
        self.name = name
        self.spec = spec

    def children_of(self, path: tuple[int, ...]) -> int:
        if self.depth_bound is not None and len(path) > self.depth_bound:
            raise ValueError(
                f"path length {len(path)} exceeds the tree's depth bound {self.depth_bound}"
            )
        c = self._rule(tuple(path))
        if not isinstance(c, (int, np.integer)) or c < 0:
            raise ValueError(f"children count at {path!r} must be a nonnegative integer, got {c!r}")
        return int(c)

    def __repr__(self) -> str:
        return f"GeneralTree(name={self.name!r})"


@dataclass(frozen=True)
class SpineAttachment:
    """A glued spherically symmetric subtree sharing a spine vertex as its root."""

    p: float              # the attachment's own critical retention value
    copies: int           # identical copies glued at the spine vertex
    base: ChildSequence   # one copy
    theta_floor: float = 0.0   # guaranteed theta lower bound at p, if any

    def children(self, m: int) -> int:
        # Children count at attachment level m; level 0 is the spine vertex.
        if m == 0:
            return self.copies * self.base.children(0)
        return self.base.children(m)

    def level_size(self, m: int) -> int:
        # Vertices the attachment contributes at its level m >= 1.
        if m < 1:
            raise ValueError("attachment level sizes are defined for m >= 1")
        return self.copies * self.base.level_size(m)


class SpineTree(GeneralTree):
    """An infinite branch (v_0 = root, v_1, v_2, ...) with ``attachments[i]``
    glued onto v_{i+1}.  Nothing is attached at the root.

    Spine vertices keep child index 0 for the next spine vertex; the
    attachment's root children follow.  Only finitely many attachments are
    materialised; beyond them the spine continues bare, which matters only
    at depths where the intended attachments would be numerically
    indistinguishable from critical anyway.
    """

    def __init__(
        self,
        attachments: Sequence[SpineAttachment],
        *,
        pi_limit: float,
        name: str = "",
        spec: dict | None = None,
    ):
        self.attachments = list(attachments)
        self.pi_limit = pi_limit
        super().__init__(self._spine_rule, depth_bound=None, name=name, spec=spec)

    def attachment_at(self, i: int) -> SpineAttachment | None:
        """Attachment glued at spine vertex v_i (i >= 1), if materialised."""
        if 1 <= i <= len(self.attachments):
            return self.attachments[i - 1]
        return None

    def _spine_rule(self, path: tuple[int, ...]) -> int:
        i = 0
        while i < len(path) and path[i] == 0:
            i += 1
        if i == len(path):  # spine vertex v_i
            att = self.attachment_at(i)
            return 1 + (att.children(0) if att is not None else 0)
        att = self.attachment_at(i)
        if att is None or path[i] < 1:
            raise ValueError(f"invalid path {path!r}")
        # inside the attachment at v_i; attachment level of this vertex:
        m = len(path) - i
        first = path[i] - 1
        if first >= att.children(0):
            raise ValueError(f"invalid path {path!r}")
        return att.base.children(m)

    def level_size(self, k: int) -> int:
        if k < 0:
            raise ValueError("level index must be >= 0")
        total = 1  # the spine vertex v_k
        for i in range(1, k):
            att = self.attachment_at(i)
            if att is not None:
                total += att.level_size(k - i)
        return total


class TreeTruncation:
    """Explicit tree of levels 0..depth in breadth-first vertex order.

    Vertex 0 is the root.  Children of any vertex are contiguous and
    ``parent`` is nondecreasing, so per-level passes can use segment
    arithmetic.  Edge ``e`` (0-based) joins ``parent[e+1] -> e+1``; its
    level is the child's level.
    """

    def __init__(
        self,
        depth: int,
        parent: np.ndarray,
        level_offsets: np.ndarray,
        child_start: np.ndarray,
        child_count: np.ndarray,
        source=None,
    ):
        self.depth = depth
        self.parent = parent
        self.level_offsets = level_offsets      # level k occupies [off[k], off[k+1])
        self.child_start = child_start
        self.child_count = child_count
        self.source = source
        self.num_vertices = int(parent.shape[0])
        self.num_edges = self.num_vertices - 1
        lev = np.empty(self.num_vertices, dtype=np.int32)
        for k in range(depth + 1):
            lev[level_offsets[k]:level_offsets[k + 1]] = k
        self.level_of = lev

    def level_vertices(self, k: int) -> np.ndarray:
        return np.arange(self.level_offsets[k], self.level_offsets[k + 1])

    def level_sizes(self) -> list[int]:
        return [int(self.level_offsets[k + 1] - self.level_offsets[k]) for k in range(self.depth + 1)]

    @property
    def boundary(self) -> np.ndarray:
        return self.level_vertices(self.depth)

    @property
    def edge_level(self) -> np.ndarray:
        """Level of each edge = level of its child vertex."""
        return self.level_of[1:]

    def path_of(self, v: int) -> tuple[int, ...]:
        rev = []
        while v != 0:
            u = int(self.parent[v])
            rev.append(v - int(self.child_start[u]))
            v = u
        return tuple(reversed(rev))

    def restricted(self, m: int) -> "TreeTruncation":
        """The truncation of the same tree at a shallower depth m."""
        if not 0 <= m <= self.depth:
            raise ValueError("restriction depth out of range")
        end = int(self.level_offsets[m + 1])
        ends_at_m = self.level_of[:end] == m
        cs = self.child_start[:end].copy()
        cc = self.child_count[:end].copy()
        cs[ends_at_m] = 0
        cc[ends_at_m] = 0
        return TreeTruncation(
            m,
            self.parent[:end].copy(),
            self.level_offsets[: m + 2].copy(),
            cs,
            cc,
            source=self.source,
        )

    def validate(self) -> None:
        assert self.num_edges == self.num_vertices - 1
        for k in range(1, self.depth + 1):
            vs = self.level_vertices(k)
            pars = self.parent[vs]
            assert np.all(self.level_of[pars] == k - 1), f"parent off by one at level {k}"
        internal = self.level_of < self.depth
        assert int(self.child_count[internal].sum() + 0) == self.num_vertices - 1


def _truncation_from_level_counts(depth, per_vertex_children, source):
    """Build a truncation from a list (per level) of per-vertex child-count arrays."""
    offsets = [0, 1]
    for k in range(depth):
        offsets.append(offsets[-1] + int(per_vertex_children[k].sum()))
    V = offsets[-1]
    parent = np.full(V, -1, dtype=np.int64)
    child_start = np.zeros(V, dtype=np.int64)
    child_count = np.zeros(V, dtype=np.int64)
    for k in range(depth):
        counts = per_vertex_children[k]
        vs_start = offsets[k]
        starts = offsets[k + 1] + np.concatenate([[0], np.cumsum(counts[:-1])]) if len(counts) else np.empty(0, dtype=np.int64)
        child_start[vs_start:vs_start + len(counts)] = starts
        child_count[vs_start:vs_start + len(counts)] = counts
        parent[offsets[k + 1]:offsets[k + 2]] = np.repeat(
            np.arange(vs_start, vs_start + len(counts)), counts
        )
    return TreeTruncation(
        depth,
        parent,
        np.asarray(offsets, dtype=np.int64),
        child_start,
        child_count,
        source=source,
    )


def truncate(tree, n: int, *, max_vertices: int = DEFAULT_MAX_VERTICES) -> TreeTruncation:
    """Materialise levels 0..n of ``tree`` as an explicit truncation.

    Idempotent on :class:`TreeTruncation` inputs (restricting if shallower).
    Refuses to expand past a general tree's ``depth_bound`` or past
    ``max_vertices`` total vertices.
    """
    if n < 0:
        raise ValueError("truncation depth must be >= 0")
    if isinstance(tree, TreeTruncation):
        if n > tree.depth:
            raise ValueError(f"truncation of depth {tree.depth} cannot be deepened to {n}")
        return tree if n == tree.depth else tree.restricted(n)

    if isinstance(tree, ChildSequence):
        per_level = []
        total = 1
        for k in range(n):
            sz = tree.level_size(k)
            total += sz * tree.children(k)
            if total > max_vertices:
                raise ValueError(
                    f"truncation to depth {n} needs more than {max_vertices} vertices; "
                    f"pass max_vertices=... to override"
                )
            per_level.append(np.full(sz, tree.children(k), dtype=np.int64))
        return _truncation_from_level_counts(n, per_level, tree)

    if isinstance(tree, SpineTree):
        per_level = []
        total = 1
        for k in range(n):
            # level-k order: spine vertex, then attachments by descending index
            counts = [np.asarray([1 + (tree.attachment_at(k).children(0) if tree.attachment_at(k) else 0)], dtype=np.int64)]
            for i in range(k - 1, 0, -1):
                att = tree.attachment_at(i)
                if att is None:
                    continue
                m = k - i
                counts.append(np.full(att.level_size(m), att.base.children(m), dtype=np.int64))
            arr = np.concatenate(counts)
            total += int(arr.sum())
            if total > max_vertices:
                raise ValueError(
                    f"truncation to depth {n} needs more than {max_vertices} vertices; "
                    f"pass max_vertices=... to override"
                )
            per_level.append(arr)
        return _truncation_from_level_counts(n, per_level, tree)

    if isinstance(tree, GeneralTree):
        if tree.depth_bound is not None and n > tree.depth_bound:
            raise ValueError(
                f"requested depth {n} exceeds the tree's depth bound {tree.depth_bound}"
            )
        per_level = []
        paths: list[tuple[int, ...]] = [()]
        total = 1
        for k in range(n):
            counts = np.fromiter(
                (tree.children_of(path) for path in paths), dtype=np.int64, count=len(paths)
            )
            total += int(counts.sum())
            if total > max_vertices:
                raise ValueError(
                    f"truncation to depth {n} needs more than {max_vertices} vertices; "
                    f"pass max_vertices=... to override"
                )
            per_level.append(counts)
            nxt = []
            for path, c in zip(paths, counts):
                nxt.extend(path + (j,) for j in range(c))
            paths = nxt
        return _truncation_from_level_counts(n, per_level, tree)

    raise TypeError(f"cannot truncate object of type {type(tree).__name__}")


def level_size(tree, k: int) -> int:
    """Number of vertices at distance k from the root."""
    if k < 0:
        raise ValueError("level index must be >= 0")
    if isinstance(tree, ChildSequence):
        return tree.level_size(k)
    if isinstance(tree, SpineTree):
        return tree.level_size(k)
    if isinstance(tree, TreeTruncation):
        if k > tree.depth:
            raise ValueError("level beyond truncation depth")
        return int(tree.level_offsets[k + 1] - tree.level_offsets[k])
    trunc = truncate(tree, k)
    return int(trunc.level_offsets[k + 1] - trunc.level_offsets[k])


def _rule_of(tree) -> Callable[[tuple[int, ...]], int]:
    if isinstance(tree, ChildSequence):
        return lambda path: tree.children(len(path))
    if isinstance(tree, GeneralTree):
        return tree.children_of
    raise TypeError(f"not a rule-based tree: {type(tree).__name__}")


def glue_at_root(trees: Sequence) -> GeneralTree:
    """Join several trees at a shared root.

    The glued root's children are the components' root children laid side
    by side, each subtree preserved verbatim.
    """
    if not trees:
        raise ValueError("glue_at_root needs at least one tree")
    rules = [_rule_of(t) for t in trees]
    root_counts = [r(()) for r in rules]
    boundaries = np.cumsum([0] + root_counts)
    bounds = [t.depth_bound if isinstance(t, GeneralTree) else None for t in trees]
    known = [b for b in bounds if b is not None]
    depth_bound = min(known) if known else None

    def rule(path: tuple[int, ...]) -> int:
        if not path:
            return int(boundaries[-1])
        a = path[0]
        t = int(np.searchsorted(boundaries, a, side="right")) - 1
        if t < 0 or t >= len(rules):
            raise ValueError(f"invalid root child index {a}")
        return rules[t]((a - int(boundaries[t]),) + path[1:])

    name = "+".join(getattr(t, "name", "") or "tree" for t in trees)
    return GeneralTree(rule, depth_bound=depth_bound, name=f"glued({name})")


def glue_symmetric_copies(tree: ChildSequence, copies: int) -> ChildSequence:
    """Glue ``copies`` identical spherically symmetric trees at one root.

    The result is again spherically symmetric: only the root's children
    count is multiplied.
    """
    if copies < 1:
        raise ValueError("need at least one copy")
    if copies == 1:
        return tree

    def rule(k: int) -> int:
        return copies * tree.children(0) if k == 0 else tree.children(k)

    env = tree.envelope.scaled(copies) if tree.envelope is not None else None
    spec = None
    if tree.spec is not None:
        spec = {"kind": "spherical", "rule": {"name": "glued", "copies": copies, "base": tree.spec.get("rule")}}
    return ChildSequence(rule, name=f"{tree.name or 'tree'}x{copies}", envelope=env, spec=spec)


# ---------------------------------------------------------------------------
# Tree specification files


def from_spec(spec: dict):
    """Build a tree from its JSON-able specification dictionary."""
    kind = spec.get("kind")
    if kind == "spherical":
        rule = spec.get("rule", {})
        rname = rule.get("name")
        if rname == "constant":
            c = int(rule["c"])
            if c < 1:
                raise ValueError("constant rule needs c >= 1")
            env = GrowthEnvelope(1.0, 1.0, 0.0, 0.0, float(c))
            return ChildSequence(lambda k: c, name=spec.get("name", f"constant{c}"),
                                 envelope=env, spec=spec)
        if rname == "table":
            values = [int(v) for v in rule["values"]]
            then = int(rule.get("then", values[-1] if values else 1))
            if any(v < 1 for v in values) or then < 1:
                raise ValueError("table rule entries must be >= 1")
            return ChildSequence(
                lambda k: values[k] if k < len(values) else then,
                name=spec.get("name", "table"), spec=spec,
            )
        if rname == "growth":
            from . import constructions
            return constructions.growth_tree(
                scale=rule.get("scale", 1),
                poly=rule.get("poly", 0),
                log_pow=rule.get("log_pow", 0),
                base=rule.get("base", 2),
                name=spec.get("name", ""),
            )
        if rname == "glued":
            base = from_spec({"kind": "spherical", "rule": rule["base"]})
            return glue_symmetric_copies(base, int(rule["copies"]))
        raise ValueError(f"unknown spherical rule {rname!r}")
    if kind == "general":
        rule = spec.get("rule", {})
        rname = rule.get("name")
        if rname == "spine":
            atts = []
            for a in rule["attachments"]:
                base = from_spec({"kind": "spherical", "rule": a["base"]})
                atts.append(SpineAttachment(float(a["p"]), int(a["copies"]), base,
                                            float(a.get("theta_floor", 0.0))))
            return SpineTree(atts, pi_limit=float(rule["pi_limit"]),
                             name=spec.get("name", "spine"), spec=spec)
        if rname == "explicit":
            table = {tuple(map(int, key.split("."))) if key else (): int(v)
                     for key, v in rule["children"].items()}
            depth_bound = int(rule.get("depth_bound", max((len(p) for p in table), default=0)))

            def lookup(path: tuple[int, ...]) -> int:
                try:
                    return table[path]
                except KeyError:
                    raise ValueError(f"path {path!r} not present in explicit tree table")

            return GeneralTree(lookup, depth_bound=depth_bound,
                               name=spec.get("name", "explicit"), spec=spec)
        raise ValueError(f"unknown general rule {rname!r}")
    if kind == "construction":
        from . import constructions
        return constructions.build_named(spec.get("name"), spec.get("params", {}))
    raise ValueError(f"unknown tree kind {kind!r}")


def to_spec(tree) -> dict:
    spec = getattr(tree, "spec", None)
    if spec is None:
        raise ValueError(
            f"tree {getattr(tree, 'name', '')!r} carries no serialisable specification"
        )
    return spec


def save_tree(tree, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(to_spec(tree), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_tree(path: str):
    with open(path) as fh:
        return from_spec(json.load(fh))
