"""Divergence diagnostics that decide the dynamical-percolation verdict.

Three routes are computed independently and must not contradict each other
on spherically symmetric trees:

* the series  sum_k p_c^{-k} / (k |G_k|),
* the integral of 1/theta(p) over (p_c, 1),
* the vanishing (or not) of the dynamical-kind conductance at p_c.

Numerics cannot prove divergence, so every verdict records whether it is
backed by an analytic tail bound (``rigorous``) or by the explicit
heuristics below.  ``divergent`` always refers to the resistance-side
quantity: a divergent series / integral / resistance means the root almost
surely never percolates along the whole time axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import mpmath
import numpy as np
from scipy import integrate

from . import networks, percolation
from .networks import KIND_DYNAMICAL, KIND_PERCOLATION, NORM_LYONS, NORM_PLAIN
from .trees import ChildSequence, GeneralTree, SpineTree, TreeTruncation, truncate

__all__ = [
    "CONVERGENT",
    "DIVERGENT",
    "INCONCLUSIVE",
    "VERDICT_EXCEPTIONAL",
    "VERDICT_INCONCLUSIVE",
    "VERDICT_NONE",
    "DivergenceDiagnosis",
    "EnergyBoundReport",
    "ExceptionalTimesVerdict",
    "InapplicableError",
    "cstar_zero_test",
    "energy_bound_chain",
    "exceptional_times_verdict",
    "fubini_closed_form",
    "fubini_identity_check",
    "integral_reciprocal_theta",
    "series_criterion_ss",
]

DIVERGENT = "divergent"
CONVERGENT = "convergent"
INCONCLUSIVE = "inconclusive"

VERDICT_NONE = "no_exceptional_times"
VERDICT_EXCEPTIONAL = "exceptional_times"
VERDICT_INCONCLUSIVE = "inconclusive"

# Heuristic decision constants (see the module docstring: these are the
# explicit, tested knobs that stand in for unprovable limits).
INCREMENT_DELTA = 0.05          # per-doubling partial-sum growth => divergent
INCREMENT_WINDOW = 3
INTEGRAL_RATIO_MAX = 0.80       # geometric decay of increments => convergent
INTEGRAL_SLOPE_MIN = 0.005      # per-halving integral growth => divergent
INTEGRAL_WINDOW = 3
RESOLVED_REL_GAP = 0.05         # depth-doubling stability filter for nodes


class InapplicableError(RuntimeError):
    """Raised when a diagnostic's precondition fails (e.g. a vanishing
    conductance where a positive one is required)."""


@dataclass
class DivergenceDiagnosis:
    verdict: str
    rigorous: bool
    evidence: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)

    def conclusive(self) -> bool:
        return self.verdict != INCONCLUSIVE


# ---------------------------------------------------------------------------
# Series criterion


def series_criterion_ss(tree: ChildSequence, p_c: float, K: int = 10_000) -> DivergenceDiagnosis:
    """Classify  sum_k p_c^{-k} / (k |G_k|)  by partial sums.

    Convergent only when the tree's growth envelope yields an analytic tail
    bound; divergent when the per-doubling increments persistently exceed
    ``INCREMENT_DELTA``; inconclusive otherwise.  Terms are evaluated in
    log space, so astronomically large level sizes cost nothing.
    """
    if not 0.0 < p_c < 1.0:
        raise ValueError("p_c must lie in (0, 1)")
    if K < 10:
        raise ValueError("K must be >= 10")
    checkpoints = sorted({max(1, K >> j) for j in range(INCREMENT_WINDOW + 1)} | {K})
    log_p = math.log(p_c)
    sums = []
    acc = []
    nxt = 0
    for k in range(1, K + 1):
        acc.append(math.exp(-k * log_p - math.log(k) - tree.log_level_size(k)))
        if k == checkpoints[nxt]:
            sums.append((k, math.fsum(acc)))
            nxt += 1
            if nxt == len(checkpoints):
                break
    s_K = sums[-1][1]
    increments = [b[1] - a[1] for a, b in zip(sums, sums[1:])]
    # evidence: growth exponent of S against ln K over the checkpoints
    if len(sums) >= 2:
        xs = [math.log(k) for k, _ in sums]
        ys = [s for _, s in sums]
        slope = np.polyfit(xs, ys, 1)[0]
    else:
        slope = 0.0
    evidence = {
        "partial_sums": sums,
        "increments": increments,
        "fitted_log_slope": float(slope),
    }
    params = {"p_c": p_c, "K": K, "delta": INCREMENT_DELTA}
    tail = networks.series_tail_upper(tree.envelope, p_c, 1, K)
    if tail is not None:
        evidence["tail_bound"] = tail
        evidence["sum_bracket"] = (s_K, s_K + tail)
        return DivergenceDiagnosis(CONVERGENT, True, evidence, params)
    if networks.series_divergence_certificate(tree.envelope, p_c, 1):
        evidence["divergence_certificate"] = "envelope minorant"
        return DivergenceDiagnosis(DIVERGENT, True, evidence, params)
    if increments and all(d >= INCREMENT_DELTA for d in increments[-INCREMENT_WINDOW:]):
        return DivergenceDiagnosis(DIVERGENT, False, evidence, params)
    return DivergenceDiagnosis(INCONCLUSIVE, False, evidence, params)


# ---------------------------------------------------------------------------
# C* at criticality


def _spine_cstar_certificate(tree: SpineTree, p_c: float) -> dict | None:
    """Structural certificate that the dynamical conductance vanishes.

    Every materialised attachment must be strictly subcritical at p_c
    (its own critical value exceeds p_c); each attachment's resistance
    series then diverges geometrically, so in the limit the network is the
    bare spine, whose resistance sum_i p_c^{-i}/i diverges.  Finite-depth
    values can plateau far above 0 long before that shows.
    """
    margins = [att.p - p_c for att in tree.attachments]
    if not margins or min(margins) < 2.0 * np.spacing(p_c):
        return None
    if tree.pi_limit < p_c - 1e-15:
        return None
    return {
        "attachment_margins": margins,
        "min_margin": min(margins),
        "spine_resistance_divergent": True,
    }


def cstar_zero_test(tree, p_c: float, K: int | None = None) -> DivergenceDiagnosis:
    """Does the dynamical-kind conductance vanish as the depth grows?

    Verdict ``divergent`` means the resistance 1/C*_n grows without bound
    (C* -> 0, no percolating times); ``convergent`` means C* stays
    bracketed away from 0.
    """
    if not 0.0 < p_c < 1.0:
        raise ValueError("p_c must lie in (0, 1)")
    if isinstance(tree, ChildSequence):
        K = K or 2 ** 14
        depths = sorted({max(1, K >> j) for j in range(INCREMENT_WINDOW + 1)} | {K})
        values = [(n, networks.effective_conductance_ss(tree, p_c, n, KIND_DYNAMICAL, NORM_PLAIN))
                  for n in depths]
        resist = [(n, 1.0 / c) for n, c in values]
        increments = [b[1] - a[1] for a, b in zip(resist, resist[1:])]
        evidence = {"cstar": values, "resistance": resist, "increments": increments}
        params = {"p_c": p_c, "K": K}
        tail = networks.series_tail_upper(tree.envelope, p_c, 1, K)
        if tail is not None:
            lo = 1.0 / (resist[-1][1] + tail)
            evidence["cstar_bracket"] = (lo, values[-1][1])
            if lo > 0.0:
                return DivergenceDiagnosis(CONVERGENT, True, evidence, params)
        if networks.series_divergence_certificate(tree.envelope, p_c, 1):
            evidence["divergence_certificate"] = "envelope minorant"
            return DivergenceDiagnosis(DIVERGENT, True, evidence, params)
        if increments and all(d >= INCREMENT_DELTA for d in increments[-INCREMENT_WINDOW:]):
            return DivergenceDiagnosis(DIVERGENT, False, evidence, params)
        return DivergenceDiagnosis(INCONCLUSIVE, False, evidence, params)

    if isinstance(tree, SpineTree):
        K = K or 2 ** 14
        depths = sorted({max(2, K >> j) for j in range(6)} | {K})
        values = [
            (n, networks.effective_conductance_reduce(
                networks.network(tree, p_c, KIND_DYNAMICAL, NORM_PLAIN, depth=n)))
            for n in depths
        ]
        resist = [(n, 1.0 / c) for n, c in values]
        increments = [b[1] - a[1] for a, b in zip(resist, resist[1:])]
        evidence = {"cstar": values, "resistance": resist, "increments": increments}
        params = {"p_c": p_c, "K": K}
        cert = _spine_cstar_certificate(tree, p_c)
        if cert is not None:
            evidence["certificate"] = cert
            return DivergenceDiagnosis(DIVERGENT, True, evidence, params)
        if increments and all(d >= INCREMENT_DELTA for d in increments[-INCREMENT_WINDOW:]):
            return DivergenceDiagnosis(DIVERGENT, False, evidence, params)
        return DivergenceDiagnosis(INCONCLUSIVE, False, evidence, params)

    # explicit general tree: reduce on growing truncations under the budget
    K = K or percolation.DEPTH_BUDGET_GENERAL
    depths = sorted({max(2, K >> j) for j in range(INCREMENT_WINDOW + 1)} | {K})
    values = []
    for n in depths:
        net = networks.network(tree, p_c, KIND_DYNAMICAL, NORM_PLAIN, depth=n)
        values.append((n, networks.effective_conductance_reduce(net)))
    resist = [(n, 1.0 / c) for n, c in values]
    increments = [b[1] - a[1] for a, b in zip(resist, resist[1:])]
    evidence = {"cstar": values, "resistance": resist, "increments": increments}
    if increments and all(d >= INCREMENT_DELTA for d in increments[-INCREMENT_WINDOW:]):
        return DivergenceDiagnosis(DIVERGENT, False, evidence, {"p_c": p_c, "K": K})
    return DivergenceDiagnosis(INCONCLUSIVE, False, evidence, {"p_c": p_c, "K": K})


# ---------------------------------------------------------------------------
# Integral criterion


def _default_eps_schedule(p_c: float, count: int = 16) -> list[float]:
    return [(1.0 - p_c) * 2.0 ** (-j) for j in range(1, count + 1)]


def _spine_integral_bound(tree: SpineTree, p_c: float):
    """Stepwise upper bound for the integral of 1/theta over (p_c + w, 1).

    theta is nondecreasing in p, so on [p_{i+1}, p_i] it is at least the
    rigorous lower bound evaluated at p_{i+1}.  Returns (bound, w) where w
    is the width of the sliver (p_c, p_I) below the deepest materialised
    attachment, or None when no attachment chain is available.
    """
    ps = [att.p for att in tree.attachments]
    if not ps or min(ps) <= p_c:
        return None
    floors = [percolation.spine_theta_lower(tree, p, series_depth=1500) for p in ps]
    if any(f <= 0.0 for f in floors):
        return None
    total = (1.0 - ps[0]) / floors[0]
    for i in range(len(ps) - 1):
        total += (ps[i] - ps[i + 1]) / floors[i + 1]
    return total, ps[-1] - p_c


def integral_reciprocal_theta(
    tree,
    p_c: float,
    eps_schedule: list[float] | None = None,
    depth: int | None = None,
    quad_points: int = 8,
    theta_fn=None,
) -> DivergenceDiagnosis:
    """Classify the integral of 1/theta over (p_c, 1) by its growth.

    Evaluates I(eps) = integral over (p_c + eps, 1) of 1/theta_n by the
    trapezoid rule in u = ln(p - p_c) on a geometric grid clustered at p_c.
    theta_n overestimates theta, so I(eps) is a lower bound of the true
    integral and divergence findings are conservative.  Grid nodes whose
    theta moves by more than ``RESOLVED_REL_GAP`` when the depth halves are
    treated as unresolved and dropped.  ``theta_fn(p_array, depth)`` can
    replace the truncation recursion (degenerate-curve testing).
    """
    if not 0.0 < p_c < 1.0:
        raise ValueError("p_c must lie in (0, 1)")
    if eps_schedule is None:
        eps_schedule = _default_eps_schedule(p_c)
    eps_schedule = sorted(set(eps_schedule), reverse=True)
    if any(not 0.0 < e < 1.0 - p_c for e in eps_schedule):
        raise ValueError("eps values must lie in (0, 1 - p_c)")
    if depth is None:
        depth = 4096 if isinstance(tree, (ChildSequence, SpineTree)) else percolation.DEPTH_BUDGET_GENERAL

    # node grid: geometric anchors p_c + eps_j refined uniformly in log scale
    log_eps = [math.log(e) for e in eps_schedule]
    us = [math.log(1.0 - p_c)]
    for a, b in zip([math.log(1.0 - p_c)] + log_eps, log_eps):
        us.extend(np.linspace(a, b, quad_points + 1)[1:])
    us = np.asarray(sorted(set(us)))
    ps = p_c + np.exp(us)

    if theta_fn is None:
        th = np.asarray(percolation.theta_truncated(tree, ps, depth), dtype=np.float64)
        th_half = np.asarray(percolation.theta_truncated(tree, ps, max(1, depth // 2)), dtype=np.float64)
    else:
        th = np.asarray(theta_fn(ps, depth), dtype=np.float64)
        th_half = np.asarray(theta_fn(ps, max(1, depth // 2)), dtype=np.float64)
    if np.any(th <= 0.0):
        bad = ps[th <= 0.0]
        return DivergenceDiagnosis(
            INCONCLUSIVE, False,
            {"rejected_nodes": bad.tolist(), "reason": "theta vanished at a quadrature node"},
            {"p_c": p_c, "depth": depth},
        )
    resolved = np.abs(th - th_half) <= RESOLVED_REL_GAP * th

    # trapezoid on u: integral over [u_a, u_b] of e^u / theta(p_c + e^u) du
    integrand = np.exp(us) / th
    seg = 0.5 * (integrand[1:] + integrand[:-1]) * np.diff(us)
    # I(eps_j): integral from u_j = ln eps_j to the right end
    anchor_idx = []
    for e in eps_schedule:
        u = math.log(e)
        anchor_idx.append(int(np.argmax(us >= u - 1e-12)))
    I = [float(seg[idx:].sum()) for idx in anchor_idx]
    rows = [(e, v) for e, v in zip(eps_schedule, I)]
    # increment j covers (p_c + eps_{j+1}, p_c + eps_j); it is usable when
    # every node in that span is depth-stable, independently of the rest
    incs_all = [I[j + 1] - I[j] for j in range(len(I) - 1)]
    seg_ok = [
        bool(resolved[anchor_idx[j + 1]: anchor_idx[j] + 1].all())
        for j in range(len(I) - 1)
    ]
    evidence = {"refinement": rows, "segment_resolved": seg_ok,
                "depth": depth, "lower_bound_of_true_integral": True}
    params = {"p_c": p_c, "quad_points": quad_points, "depth": depth}

    # rigorous shortcut: theta(p_c) bounded away from 0 makes the integral finite
    if isinstance(tree, ChildSequence):
        br = networks.conductance_bracket(tree, p_c, max(depth, 2048), KIND_PERCOLATION, NORM_LYONS)
        if br.rigorous and br.lo > 0.0:
            theta_floor = br.lo / (1.0 + br.lo)
            evidence["theta_pc_lower"] = theta_floor
            evidence["integral_upper"] = (1.0 - p_c) / theta_floor
            return DivergenceDiagnosis(CONVERGENT, True, evidence, params)
    if isinstance(tree, SpineTree):
        floor = percolation.spine_theta_lower(tree, p_c)
        if floor > 0.0:
            evidence["theta_pc_lower"] = floor
            evidence["integral_upper"] = (1.0 - p_c) / floor
            return DivergenceDiagnosis(CONVERGENT, True, evidence, params)
        step = _spine_integral_bound(tree, p_c)
        if step is not None:
            bound, sliver = step
            evidence["integral_upper"] = bound
            evidence["uncovered_sliver_width"] = sliver
            return DivergenceDiagnosis(CONVERGENT, True, evidence, params)

    # classify on the deepest consecutive run of usable increments
    end = len(seg_ok)
    while end > 0 and not seg_ok[end - 1]:
        end -= 1
    start = end
    while start > 0 and seg_ok[start - 1]:
        start -= 1
    incs = [max(x, 0.0) for x in incs_all[start:end]]
    ratios = [b / a if a > 0 else math.inf for a, b in zip(incs, incs[1:])]
    slopes = [d / math.log(2.0) for d in incs]
    evidence["increments"] = incs
    evidence["ratios"] = ratios
    evidence["slopes_per_halving"] = slopes
    if len(incs) < INTEGRAL_WINDOW + 1:
        return DivergenceDiagnosis(INCONCLUSIVE, False, evidence, params)
    if len(ratios) >= INTEGRAL_WINDOW and all(r <= INTEGRAL_RATIO_MAX for r in ratios[-INTEGRAL_WINDOW:]):
        return DivergenceDiagnosis(CONVERGENT, False, evidence, params)
    if all(s >= INTEGRAL_SLOPE_MIN for s in slopes[-INTEGRAL_WINDOW:]):
        return DivergenceDiagnosis(DIVERGENT, False, evidence, params)
    return DivergenceDiagnosis(INCONCLUSIVE, False, evidence, params)


# ---------------------------------------------------------------------------
# The swap-of-order identity and the energy bound


def fubini_closed_form(k: int, p_c: float) -> float:
    """Closed form of the integral of p^{-k} over (p_c, 1)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not 0.0 < p_c <= 1.0:
        raise ValueError("p_c must lie in (0, 1]")
    if k == 1:
        return math.log(1.0 / p_c)
    return (p_c ** (-(k - 1)) - 1.0) / (k - 1)


def fubini_identity_check(k: int, p_c: float) -> float:
    """|numeric integral of p^{-k} over (p_c, 1) - closed form|.

    Quadrature runs at 40 significant digits so the residual reflects the
    identity itself rather than float64 headroom (at k = 50, p_c = 0.3 the
    value is ~1e24 and float64 could never certify an absolute 1e-12).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if not 0.0 < p_c <= 1.0:
        raise ValueError("p_c must lie in (0, 1]")
    with mpmath.workdps(40):
        pc = mpmath.mpf(p_c)
        numeric = mpmath.quad(lambda q: q ** (-k), [pc, mpmath.mpf(1)])
        if k == 1:
            closed = mpmath.log(1 / pc)
        else:
            closed = (pc ** (-(k - 1)) - 1) / (k - 1)
        return float(abs(numeric - closed))


@dataclass
class EnergyBoundReport:
    p_c: float
    K: int
    w_star: dict
    bound: float
    rows: list            # dicts: n, integral, margin (= bound - integral), slack
    cstar_bracket: tuple

    def holds(self) -> bool:
        """Inequality at every depth, allowing quadrature slack."""
        return all(r["margin"] + r["slack"] >= 0.0 for r in self.rows)

    def strict(self) -> bool:
        """Strictly positive margin beyond slack at every depth below K."""
        return all(r["margin"] - r["slack"] > 0.0 for r in self.rows if r["n"] < self.K)


def energy_bound_chain(tree, p_c: float, p_grid=None, K: int = 40,
                       depths=None) -> EnergyBoundReport:
    """Bound the integral of 1/C_n by the level energies of the minimal
    dynamical-kind flow at p_c.

    Requires a positive bracket for the dynamical conductance at p_c
    (raises :class:`InapplicableError` otherwise).  For each truncation
    depth n the report records the quadrature value of
    integral over (p_c, 1) of 1/C_n(p) dp and its margin below
    ``p_c * sum_k k (1 - p_c^{k-1})/(k-1) W*(k)`` (k = 1 term taken as the
    ln(1/p_c) limit).
    """
    if not 0.0 < p_c < 1.0:
        raise ValueError("p_c must lie in (0, 1)")
    if not isinstance(tree, ChildSequence):
        raise TypeError("the energy bound chain is implemented for spherically symmetric trees")
    cbr = networks.conductance_bracket(tree, p_c, K, KIND_DYNAMICAL, NORM_PLAIN)
    if not cbr.rigorous or cbr.lo <= 0.0:
        raise InapplicableError(
            "dynamical conductance bracket includes 0; the finite-energy bound does not apply"
        )
    w_star = networks.energy_by_level_ss(tree, p_c, K, KIND_DYNAMICAL, NORM_PLAIN)
    terms = []
    for k, w in sorted(w_star.items()):
        if k == 1:
            terms.append(p_c * math.log(1.0 / p_c) * w)
        else:
            terms.append(p_c * k * (1.0 - p_c ** (k - 1)) / (k - 1) * w)
    bound = math.fsum(terms)

    if depths is None:
        depths = sorted({max(1, K >> j) for j in range(3)} | {K})
    log_sizes = [0.0] + [tree.log_level_size(k) for k in range(1, K + 1)]

    def inv_c_n(p: float, n: int) -> float:
        return math.fsum(math.exp(-k * math.log(p) - log_sizes[k]) for k in range(1, n + 1))

    rows = []
    for n in depths:
        val, err = integrate.quad(lambda q: inv_c_n(q, n), p_c, 1.0, limit=200)
        slack = 10.0 * err + 1e-12 * max(1.0, bound)
        rows.append({"n": n, "integral": val, "margin": bound - val, "slack": slack})
    return EnergyBoundReport(p_c, K, w_star, bound, rows, (cbr.lo, cbr.hi))


# ---------------------------------------------------------------------------
# Combined verdict


@dataclass
class ExceptionalTimesVerdict:
    verdict: str
    sub: dict
    flags: dict
    justification: str
    notes: list = field(default_factory=list)


def _theta_zero_evidence(tree, p_c: float) -> bool | None:
    """True/False when the evidence is clear, None when it is not.

    A rigorous positive conductance bracket at p_c forces theta(p_c) > 0
    (False).  A vanishing conductance upper bound forces theta(p_c) = 0
    (True).  Otherwise fall back on the decay trend of theta_n(p_c).
    """
    if isinstance(tree, ChildSequence):
        br = networks.conductance_bracket(tree, p_c, 4096, KIND_PERCOLATION, NORM_LYONS)
        if br.rigorous and br.lo > 0.0:
            return False
        if networks.series_divergence_certificate(tree.envelope, p_c, 0):
            return True  # conductance vanishes, so theta(p_c) <= 2C/(1+C) = 0
        if 2.0 * br.hi / (1.0 + br.hi) < 1e-3:
            return True
    ns = [64, 256, 1024] if isinstance(tree, (ChildSequence, SpineTree)) else [4, 8, 16]
    try:
        vals = [float(percolation.theta_truncated(tree, p_c, n)) for n in ns]
    except ValueError:
        return None
    if vals[-1] < 1e-3:
        return True
    if all(b < a for a, b in zip(vals, vals[1:])) and vals[-1] < 0.5 * vals[0]:
        return True
    return None


def exceptional_times_verdict(tree, p_c: float, opts: dict | None = None) -> ExceptionalTimesVerdict:
    """Combine the sub-criteria into one verdict at criticality.

    On spherically symmetric trees the three diagnostics are equivalent in
    the limit, so any contradiction among conclusive sub-verdicts yields
    ``inconclusive`` with a diagnostic dump.  On general trees the
    conductance criterion decides both directions; a divergent integral
    alone still implies no percolating times.
    """
    opts = opts or {}
    ss = isinstance(tree, ChildSequence)
    sub: dict[str, DivergenceDiagnosis] = {}
    if ss:
        sub["series"] = series_criterion_ss(tree, p_c, opts.get("series_K", 10_000))
    sub["integral"] = integral_reciprocal_theta(
        tree, p_c, depth=opts.get("integral_depth"), quad_points=opts.get("quad_points", 8)
    )
    sub["cstar"] = cstar_zero_test(tree, p_c, opts.get("cstar_K"))

    pc_est = percolation.branching_pc(tree, opts.get("pc_K", 200))
    flags = {
        "spherically_symmetric": ss,
        "pc_in_unit_interval": (not pc_est.at_boundary) and 0.0 < p_c < 1.0,
        "pc_bracket": (pc_est.lo, pc_est.hi),
        "theta_pc_zero_evidence": _theta_zero_evidence(tree, p_c),
    }
    notes = [
        "verdict is conditional on theta(p_c) = 0 and p_c in (0,1); "
        "flags record the numerical evidence, not a certificate",
    ]

    conclusive = {name: d for name, d in sub.items() if d.conclusive()}
    if ss:
        verdicts = {d.verdict for d in conclusive.values()}
        if len(verdicts) > 1:
            notes.append(f"contradictory sub-verdicts: { {k: d.verdict for k, d in conclusive.items()} }")
            return ExceptionalTimesVerdict(VERDICT_INCONCLUSIVE, sub, flags,
                                           "equivalence-criterion-contradiction", notes)
        if not verdicts:
            return ExceptionalTimesVerdict(VERDICT_INCONCLUSIVE, sub, flags,
                                           "all-subcriteria-inconclusive", notes)
        v = verdicts.pop()
        verdict = VERDICT_NONE if v == DIVERGENT else VERDICT_EXCEPTIONAL
        return ExceptionalTimesVerdict(verdict, sub, flags, "symmetric-equivalence", notes)

    cstar = sub["cstar"]
    if cstar.conclusive():
        verdict = VERDICT_NONE if cstar.verdict == DIVERGENT else VERDICT_EXCEPTIONAL
        return ExceptionalTimesVerdict(verdict, sub, flags, "conductance-criterion", notes)
    if sub["integral"].verdict == DIVERGENT:
        return ExceptionalTimesVerdict(VERDICT_NONE, sub, flags, "divergent-integral-implication", notes)
    return ExceptionalTimesVerdict(VERDICT_INCONCLUSIVE, sub, flags, "insufficient-evidence", notes)
