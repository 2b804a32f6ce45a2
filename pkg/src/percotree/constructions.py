"""Named tree constructions with verified growth and percolation properties.

``ss_tree_with_growth`` realises a target level-size profile f by giving
every level-(k-1) vertex the minimal children count i with
``i * |G_{k-1}| >= f(k)``, which sandwiches ``f(k) <= |G_k| < f(k) +
|G_{k-1}|``.  On top of it:

* ``theta_floor_tree(p, q)`` -- a spherically symmetric tree with critical
  value p whose percolation probability at p is provably at least q
  (profile k^2 p^{-k}, glued copies as needed).
* ``fast_takeoff_spine`` -- an infinite branch with a theta-floor tree
  glued onto each branch vertex at parameters sliding down to the limit,
  giving a tree whose percolation probability takes off steeply at
  criticality even though the critical dynamical process a.s. never
  percolates.
* ``contrast_pair`` -- a tuned pair of trees ordered opposite ways by
  "takes off faster at criticality" and "percolates at exceptional times".
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from . import criteria, networks, percolation
from .networks import KIND_PERCOLATION, NORM_LYONS
from .trees import (
    ChildSequence,
    GrowthEnvelope,
    SpineAttachment,
    SpineTree,
    glue_symmetric_copies,
)

__all__ = [
    "ContrastPairResult",
    "GrowthTarget",
    "ThetaFloorResult",
    "binary_tree",
    "build_named",
    "constant_tree",
    "contrast_pair",
    "fast_takeoff_spine",
    "growth_tree",
    "n_two_n_tree",
    "ss_tree_with_growth",
    "theta_floor_tree",
    "two_n_log_n_tree",
]


def _ceil_log2(k: int) -> int:
    return max(1, math.ceil(math.log2(k))) if k >= 2 else 1


@dataclass(frozen=True)
class GrowthTarget:
    """Level-size target f(k) = scale * k^poly * max(1, ceil(log2 k))^log_pow * base^k."""

    scale: Fraction
    poly: int
    log_pow: int
    base: Fraction

    def exact(self, k: int) -> Fraction:
        return self.scale * Fraction(k) ** self.poly * Fraction(_ceil_log2(k)) ** self.log_pow * self.base ** k

    def log(self, k: int) -> float:
        return (
            math.log(float(self.scale))
            + self.poly * math.log(k)
            + self.log_pow * math.log(_ceil_log2(k))
            + k * math.log(self.base)
        )

    def envelope(self) -> GrowthEnvelope:
        # f(k) <= |G_k| and the recursion |G_k| < f(k) + |G_{k-1}| with
        # f(k-1)/f(k) <= 1/base give |G_k| <= f(k) * 2 base/(base-1); the
        # ceil'd log2 exceeds the smooth one by at most a factor 2 per power.
        b = float(self.base)
        lo = float(self.scale)
        hi = float(self.scale) * (2.0 ** self.log_pow) * 2.0 * b / (b - 1.0)
        return GrowthEnvelope(lo, hi, float(self.poly), float(self.log_pow), b)


def ss_tree_with_growth(target, *, name: str = "", spec: dict | None = None,
                        exact_limit: int = 600) -> ChildSequence:
    """Spherically symmetric tree realising the growth target by the minimal
    children rule.

    The rule is evaluated in exact rational arithmetic as long as that is
    cheap (always, for integer bases; up to ``exact_limit`` levels
    otherwise), then switches to guarded log-space arithmetic whose ceiling
    is biased upward so the lower sandwich bound survives rounding.
    """
    if callable(target) and not isinstance(target, GrowthTarget):
        raise TypeError("pass a GrowthTarget; ad-hoc callables lose the envelope")
    exact_forever = target.base.denominator == 1 and target.scale.denominator == 1
    state = {"size": Fraction(1), "log_size": 0.0, "exact": True, "memo": []}

    def rule(k: int) -> int:
        memo = state["memo"]
        while len(memo) <= k:
            j = len(memo)  # c(j) sends level j to level j+1
            if state["exact"] and (exact_forever or j + 1 <= exact_limit):
                f = target.exact(j + 1)
                c = max(1, math.ceil(f / state["size"]))
                state["size"] = state["size"] * c
                state["log_size"] = state["log_size"] + math.log(c)
            else:
                if state["exact"]:
                    state["exact"] = False
                ratio = target.log(j + 1) - state["log_size"]
                c = max(1, math.ceil(math.exp(ratio) - 1e-9))
                state["log_size"] = state["log_size"] + math.log(c)
            memo.append(int(c))
        return memo[k]

    return ChildSequence(rule, name=name or "growth", envelope=target.envelope(), spec=spec)


def growth_tree(scale=1, poly=0, log_pow=0, base=2, name: str = "") -> ChildSequence:
    """Convenience wrapper building the min-rule tree for the given profile.

    ``base`` may be a number or ``{"reciprocal": p}`` meaning 1/p in exact
    rational arithmetic (so the same tree is rebuilt bit-for-bit from its
    saved specification).
    """
    if isinstance(base, dict):
        base_frac = 1 / Fraction(float(base["reciprocal"]))
        base_spec = {"reciprocal": float(base["reciprocal"])}
    else:
        base_frac = Fraction(base)
        base_spec = base if isinstance(base, (int, float)) else float(base_frac)
    target = GrowthTarget(Fraction(scale), int(poly), int(log_pow), base_frac)
    if float(base_frac) <= 1.0:
        raise ValueError("growth base must exceed 1")
    spec = {
        "kind": "spherical",
        "name": name,
        "rule": {"name": "growth", "scale": scale, "poly": int(poly),
                 "log_pow": int(log_pow), "base": base_spec},
    }
    default = f"growth(poly={poly},log={log_pow},base={float(base_frac):g})"
    return ss_tree_with_growth(target, name=name or default, spec=spec)


def constant_tree(c: int, name: str = "") -> ChildSequence:
    spec = {"kind": "spherical", "name": name or f"constant{c}", "rule": {"name": "constant", "c": int(c)}}
    env = GrowthEnvelope(1.0, 1.0, 0.0, 0.0, float(c))
    return ChildSequence(lambda k: int(c), name=name or f"constant{c}", envelope=env, spec=spec)


def binary_tree() -> ChildSequence:
    return constant_tree(2, name="binary")


def two_n_log_n_tree() -> ChildSequence:
    """Level sizes of order 2^k log k: divergent series, steep takeoff."""
    return growth_tree(poly=0, log_pow=1, base=2, name="two_n_log_n")


def n_two_n_tree() -> ChildSequence:
    """Level sizes of order k 2^k: convergent series, percolating times exist."""
    return growth_tree(poly=1, log_pow=0, base=2, name="n_two_n")


# ---------------------------------------------------------------------------
# Theta-floor trees


@dataclass
class ThetaFloorResult:
    tree: ChildSequence
    base: ChildSequence
    copies: int
    theta_lower: float
    pc: percolation.PcEstimate
    ok: bool
    report: dict = field(default_factory=dict)


def theta_floor_tree(p: float, q: float, *, series_depth: int = 4000) -> ThetaFloorResult:
    """Spherically symmetric tree with critical value p and theta(p) >= q.

    The base profile is k^2 p^{-k}; its conductance at p stays positive, so
    the sandwich gives a rigorous floor theta' >= C/(1+C).  If that floor
    already reaches q the base is returned; otherwise the minimal number of
    copies j with (1 - theta'_lower)^j <= 1 - q is glued at the root.
    """
    if not 0.0 < p < 1.0 or not 0.0 < q < 1.0:
        raise ValueError("p and q must lie in (0, 1)")
    base = growth_tree(poly=2, log_pow=0, base={"reciprocal": p},
                       name=f"theta_floor_base(p={p:g})")
    br = networks.conductance_bracket(base, p, series_depth, KIND_PERCOLATION, NORM_LYONS)
    if not br.rigorous or br.lo <= 0.0:
        pc = percolation.branching_pc(base)
        return ThetaFloorResult(base, base, 1, 0.0, pc, False,
                                {"reason": "no rigorous positive theta floor"})
    t_lo = br.lo / (1.0 + br.lo)
    if t_lo >= q:
        copies = 1
    else:
        copies = max(1, math.ceil(math.log(1.0 - q) / math.log(1.0 - t_lo)))
    tree = glue_symmetric_copies(base, copies)
    floor = 1.0 - (1.0 - t_lo) ** copies
    c_glued = copies * br.lo
    floor = max(floor, c_glued / (1.0 + c_glued))
    pc = percolation.branching_pc(tree)
    report = {
        "p": p, "q": q, "copies": copies,
        "base_theta_lower": t_lo, "theta_lower": floor,
        "pc_bracket": (pc.lo, pc.hi),
        "conductance_bracket": (br.lo, br.hi),
    }
    return ThetaFloorResult(tree, base, copies, floor, pc, floor >= q, report)


# ---------------------------------------------------------------------------
# The fast-takeoff spine tree


def fast_takeoff_spine(
    pi_rule: Callable[[int], float] | None = None,
    *,
    q: float = 0.5,
    max_attachments: int = 40,
    series_depth: int = 2000,
    name: str = "fast_takeoff_spine",
) -> SpineTree:
    """Spine with a theta-floor tree glued at each branch vertex.

    ``pi_rule(i)`` gives the i-th attachment's critical value; the default
    is 1/2 + 3^-i.  The rule must decrease strictly to its limit (1/2 for
    the default).  Attachments whose margin over the limit falls below
    float resolution are not materialised: beyond them the spine continues
    bare, which only matters at depths where those subtrees would be
    numerically critical anyway.
    """
    limit = 0.5
    if pi_rule is None:
        pi_rule = lambda i: 0.5 + 3.0 ** (-i)
    attachments = []
    prev = 1.0
    for i in range(1, max_attachments + 1):
        p_i = float(pi_rule(i))
        if p_i - limit <= 4.0 * np.spacing(limit):
            break  # below float resolution: not materialised
        if not limit < p_i < 1.0:
            raise ValueError(f"pi_rule({i}) = {p_i} outside ({limit}, 1)")
        if p_i >= prev:
            raise ValueError("pi_rule must be strictly decreasing")
        prev = p_i
        res = theta_floor_tree(p_i, q, series_depth=series_depth)
        if not res.ok:
            raise ValueError(f"could not build a theta floor at p = {p_i}")
        attachments.append(SpineAttachment(p_i, res.copies, res.base, res.theta_lower))
    if not attachments:
        raise ValueError("pi_rule produced no representable attachments")
    spec = {
        "kind": "general",
        "name": name,
        "rule": {
            "name": "spine",
            "pi_limit": limit,
            "attachments": [
                {"p": a.p, "copies": a.copies, "theta_floor": a.theta_floor,
                 "base": a.base.spec["rule"]}
                for a in attachments
            ],
        },
    }
    return SpineTree(attachments, pi_limit=limit, name=name, spec=spec)


def spine_floor_claims(tree: SpineTree, max_i: int = 4) -> list[dict]:
    """Lower brackets for theta at each attachment's own critical value,
    against the 2^-(i+1) floor that the construction promises."""
    rows = []
    for i in range(1, min(max_i, len(tree.attachments)) + 1):
        p_i = tree.attachments[i - 1].p
        lo = percolation.spine_theta_lower(tree, p_i)
        rows.append({"i": i, "p_i": p_i, "theta_lower": lo,
                     "floor": 2.0 ** (-(i + 1)), "ok": lo >= 2.0 ** (-(i + 1))})
    return rows


# ---------------------------------------------------------------------------
# The contrast pair


@dataclass
class ContrastPairResult:
    gamma: ChildSequence
    gamma_prime: SpineTree
    p_star: float
    ok: bool
    report: dict = field(default_factory=dict)


def _theta_upper_grid(tree: ChildSequence, ps: np.ndarray, depth: int) -> np.ndarray:
    cs = [tree.children(k) for k in range(depth)]
    g = np.ones_like(ps)
    with np.errstate(divide="ignore", invalid="ignore"):
        for k in range(depth - 1, -1, -1):
            g = -np.expm1(cs[k] * np.log1p(-ps * g))
    return g


def _conductance_upper_grid(tree: ChildSequence, ps: np.ndarray, K: int) -> np.ndarray:
    """Depth-K conductance under the lyons normalisation, per grid point.

    An under-summed series overestimates the conductance, so the induced
    theta bound 2C/(1+C) stays a valid upper bound.
    """
    logs = np.asarray([tree.log_level_size(k) for k in range(K + 1)])
    ks = np.arange(1, K + 1, dtype=np.float64)
    out = np.empty_like(ps)
    for idx, p in enumerate(ps):
        terms = np.exp(-ks * math.log(p) - logs[1:])
        out[idx] = 1.0 / ((1.0 - p) * float(terms.sum()))
    return out


def contrast_pair(
    depth_budget: int = 2 ** 19,
    retry_budget: int = 5,
    grid_points: int = 20,
    margin: float = 0.02,
    series_K: int = 2_000_000,
) -> ContrastPairResult:
    """Build the ordered pair: a k 2^k tree and a tuned spine tree.

    The spine's attachment parameters start at 1/2 + 3^-i and the decay
    exponent is squared per retry until, on a 20-point grid inside
    (1/2, p*), the spine tree's rigorous theta lower bound strictly
    exceeds the symmetric tree's upper bound.  p* is scanned downward in
    powers of two.  Failure after the retry budget returns ok=False.
    """
    gamma = n_two_n_tree()
    attempts = []
    for r in range(retry_budget + 1):
        exponent = 2 ** r
        rule = lambda i, e=exponent: 0.5 + 3.0 ** (-e * i)
        p1_delta = 3.0 ** (-exponent)
        candidates = [2.0 ** (-m) for m in range(8, 27)
                      if 2.0 ** (-m) / (grid_points + 1) > 2.0 * p1_delta]
        if not candidates:
            attempts.append({"exponent": exponent, "reason": "first attachment too far from 1/2"})
            continue
        gamma_prime = fast_takeoff_spine(rule, q=0.5, name=f"contrast_spine(e={exponent})")
        for d_star in sorted(candidates):  # smallest interval first: weakest takeoff of gamma
            deltas = d_star * np.arange(1, grid_points + 1) / (grid_points + 1)
            ps = 0.5 + deltas
            upper = _theta_upper_grid(gamma, ps, depth_budget)
            upper = np.minimum(upper, _conductance_grid_theta(gamma, ps, series_K))
            lower = np.asarray([percolation.spine_theta_lower(gamma_prime, float(p)) for p in ps])
            ok = bool(np.all(lower > (1.0 + margin) * upper))
            attempts.append({
                "exponent": exponent, "p_star": 0.5 + d_star, "pass": ok,
                "min_gap": float(np.min(lower - upper)),
            })
            if ok:
                grid_rows = [
                    {"p": float(p), "theta_gamma_upper": float(u), "theta_spine_lower": float(l)}
                    for p, u, l in zip(ps, upper, lower)
                ]
                report = _contrast_report(gamma, gamma_prime, 0.5 + d_star, grid_rows,
                                          exponent, depth_budget)
                report["attempts"] = attempts
                return ContrastPairResult(gamma, gamma_prime, 0.5 + d_star, True, report)
    return ContrastPairResult(gamma, fast_takeoff_spine(), 0.5, False,
                              {"attempts": attempts, "reason": "retry budget exhausted"})


def _conductance_grid_theta(tree: ChildSequence, ps: np.ndarray, K: int) -> np.ndarray:
    c = _conductance_upper_grid(tree, ps, K)
    return 2.0 * c / (1.0 + c)


def _contrast_report(gamma, gamma_prime, p_star, grid_rows, exponent, depth_budget) -> dict:
    pc_g = percolation.branching_pc(gamma)
    pc_s = percolation.branching_pc(gamma_prime)
    decay_g = [(n, float(percolation.theta_truncated(gamma, 0.5, n)))
               for n in [2 ** j for j in range(10, 20) if 2 ** j <= depth_budget]]
    decay_s = [(n, float(percolation.theta_truncated(gamma_prime, 0.5, n)))
               for n in [2 ** j for j in range(2, 10)]]
    verdict_g = criteria.exceptional_times_verdict(gamma, 0.5)
    verdict_s = criteria.exceptional_times_verdict(gamma_prime, 0.5)
    return {
        "decay_exponent": exponent,
        "p_star": p_star,
        "pc_gamma": (pc_g.lo, pc_g.hi),
        "pc_gamma_prime": (pc_s.lo, pc_s.hi),
        "theta_half_decay_gamma": decay_g,
        "theta_half_decay_gamma_prime": decay_s,
        "verdict_gamma": verdict_g.verdict,
        "verdict_gamma_prime": verdict_s.verdict,
        "grid": grid_rows,
        "depth_budget": depth_budget,
    }


# ---------------------------------------------------------------------------
# Named dispatch for tree specification files


def build_named(name: str, params: dict):
    params = dict(params or {})
    if name == "binary":
        return binary_tree()
    if name == "constant":
        return constant_tree(int(params["c"]))
    if name == "growth":
        return growth_tree(
            scale=params.get("scale", 1), poly=params.get("poly", 0),
            log_pow=params.get("log_pow", 0), base=params.get("base", 2),
            name=params.get("name", ""),
        )
    if name == "two_n_log_n":
        return two_n_log_n_tree()
    if name == "n_two_n":
        return n_two_n_tree()
    if name == "theta_floor":
        res = theta_floor_tree(float(params["p"]), float(params["q"]))
        if not res.ok:
            raise ValueError(f"theta floor construction failed: {res.report}")
        return res.tree
    if name == "fast_takeoff_spine":
        exponent = int(params.get("decay_exponent", 1))
        rule = lambda i: 0.5 + 3.0 ** (-exponent * i)
        return fast_takeoff_spine(rule, q=float(params.get("q", 0.5)))
    if name == "contrast_pair":
        raise ValueError(
            "contrast_pair builds two trees; use `percotree construct --name contrast_pair` "
            "or constructions.contrast_pair() directly"
        )
    raise ValueError(f"unknown construction {name!r}")
