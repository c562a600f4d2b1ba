"""Coverage-constraint extraction.

Replaces the per-resource allocation variables by linear constraints on
the coverage probabilities alone: for a resource subset L, the targets
auditable only inside L can take at most |L| units of total coverage.
Two extractors are provided — the naive enumeration over all resource
subsets, and the target-side algorithm that merges equal-audit-set
targets, builds their intersection graph, and walks its connected
induced subgraphs.  Both define the same polytope; the equivalence
oracle below checks that via pairwise LP implication.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import EnumerationCapExceeded, ResourceCapExceeded
from .lp import IMPLIES_TOL, implies, solve_feasibility
from .model import AuditGame, audit_sets

NAIVE_RESOURCE_CAP = 22
DEFAULT_SUBGRAPH_CAP = 10 ** 6


@dataclass(frozen=True)
class CoverageConstraint:
    """sum of p over ``target_indices``  <=  ``bound`` resources."""

    target_indices: tuple  # sorted target indices
    bound: int
    source: str  # "naive:L..." or "merged:V..."

    def coeff_row(self, n: int) -> np.ndarray:
        row = np.zeros(n)
        row[list(self.target_indices)] = 1.0
        return row


@dataclass(frozen=True)
class ConstraintSet:
    """The set C plus the implied unit box; pinned targets have p = 0."""

    n_targets: int
    constraints: tuple
    pinned: tuple = ()  # unauditable targets
    includes_box: bool = True

    def lp_rows(self) -> list:
        rows = [(c.coeff_row(self.n_targets), "<=", float(c.bound))
                for c in self.constraints]
        for i in self.pinned:
            row = np.zeros(self.n_targets)
            row[i] = 1.0
            rows.append((row, "<=", 0.0))
        return rows

    def contains(self, p, tol: float = 1e-7) -> bool:
        p = np.asarray(p, dtype=float)
        if np.any(p < -tol) or np.any(p > 1 + tol):
            return False
        if any(p[i] > tol for i in self.pinned):
            return False
        return all(
            p[list(c.target_indices)].sum() <= c.bound + tol
            for c in self.constraints
        )


@dataclass(frozen=True)
class MergedTargets:
    """Auditable targets grouped by identical audit sets."""

    audit_signatures: tuple  # per class: frozenset of resources
    members: tuple           # per class: tuple of target indices
    n_targets: int

    @property
    def weights(self) -> tuple:
        return tuple(len(m) for m in self.members)


@dataclass(frozen=True)
class IntersectionGraph:
    """One node per merged class; edges where audit sets intersect."""

    merged: MergedTargets
    adjacency: tuple  # per node: frozenset of neighbour indices

    @property
    def n_nodes(self) -> int:
        return len(self.adjacency)

    def degree(self, v: int) -> int:
        return len(self.adjacency[v])


def only_audited_by(game: AuditGame, resource_subset) -> frozenset:
    """Targets whose (nonempty) audit set lies inside the given resources."""
    subset = frozenset(resource_subset)
    fmap = audit_sets(game)
    return frozenset(
        i for i in range(game.n_targets)
        if fmap[i] and fmap[i] <= subset
    )


def extract_constraints_naive(
    game: AuditGame,
    resource_cap: int = NAIVE_RESOURCE_CAP,
    prune: bool = False,
) -> ConstraintSet:
    """All constraints c_{M,L} over the 2^k resource subsets, deduplicated."""
    k = game.n_resources
    if k > resource_cap:
        raise ResourceCapExceeded(
            f"naive extraction over 2^{k} subsets exceeds cap 2^{resource_cap}")
    fmap = audit_sets(game)
    masks = [sum(1 << j for j in fmap[i]) for i in range(game.n_targets)]
    seen = {}
    for lmask in range(1 << k):
        m_targets = [
            i for i in range(game.n_targets)
            if masks[i] and masks[i] & ~lmask == 0
        ]
        size_l = bin(lmask).count("1")
        if size_l < len(m_targets):
            key = (tuple(m_targets), size_l)
            if key not in seen:
                seen[key] = CoverageConstraint(
                    target_indices=tuple(m_targets),
                    bound=size_l,
                    source=f"naive:{lmask:b}",
                )
    cset = ConstraintSet(
        n_targets=game.n_targets,
        constraints=tuple(seen[k] for k in sorted(seen)),
        pinned=tuple(i for i in range(game.n_targets) if game.unauditable[i]),
    )
    return prune_implied(cset) if prune else cset


def merge_targets(game: AuditGame) -> MergedTargets:
    """Group auditable targets by audit-set signature (class order follows
    the smallest member index)."""
    fmap = audit_sets(game)
    by_signature = {}
    for i in range(game.n_targets):
        if game.unauditable[i]:
            continue
        by_signature.setdefault(fmap[i], []).append(i)
    classes = sorted(by_signature.items(), key=lambda kv: kv[1][0])
    return MergedTargets(
        audit_signatures=tuple(sig for sig, _ in classes),
        members=tuple(tuple(m) for _, m in classes),
        n_targets=game.n_targets,
    )


def build_intersection_graph(merged: MergedTargets) -> IntersectionGraph:
    n = len(merged.audit_signatures)
    adjacency = []
    for u in range(n):
        adjacency.append(frozenset(
            v for v in range(n)
            if v != u and merged.audit_signatures[u] & merged.audit_signatures[v]
        ))
    return IntersectionGraph(merged=merged, adjacency=tuple(adjacency))


def enumerate_connected_subgraphs(graph, cap: int = DEFAULT_SUBGRAPH_CAP):
    """Yield every nonempty connected vertex subset exactly once.

    Anchored expansion: a subset is grown only from its smallest vertex and
    only by larger-indexed vertices, so each set appears once.  ``graph``
    may be an :class:`IntersectionGraph` or a plain adjacency sequence.
    Raises :class:`EnumerationCapExceeded` when the yield count would pass
    ``cap``.
    """
    adjacency = graph.adjacency if hasattr(graph, "adjacency") else tuple(
        frozenset(nbrs) for nbrs in graph)
    count = 0
    for anchor in range(len(adjacency)):
        start = frozenset((anchor,))
        seen = {start}
        queue = deque([start])
        while queue:
            subset = queue.popleft()
            count += 1
            if count > cap:
                raise EnumerationCapExceeded(cap, count - 1)
            yield subset
            frontier = set()
            for v in subset:
                frontier |= adjacency[v]
            for w in sorted(frontier - subset):
                if w > anchor:
                    grown = subset | {w}
                    if grown not in seen:
                        seen.add(grown)
                        queue.append(grown)


def constraint_find(
    game: AuditGame,
    cap: int = DEFAULT_SUBGRAPH_CAP,
    prune: bool = False,
) -> ConstraintSet:
    """Target-side extraction via connected induced subgraphs.

    For a connected class subset V the constraint sums the member
    probabilities of V against the number of distinct resources that can
    audit V; it is kept only when the member count exceeds that bound.
    """
    merged = merge_targets(game)
    graph = build_intersection_graph(merged)
    seen = {}
    for subset in enumerate_connected_subgraphs(graph, cap):
        members = []
        resources = set()
        for v in subset:
            members.extend(merged.members[v])
            resources |= merged.audit_signatures[v]
        bound = len(resources)
        if len(members) > bound:
            key = (tuple(sorted(members)), bound)
            if key not in seen:
                seen[key] = CoverageConstraint(
                    target_indices=key[0],
                    bound=bound,
                    source="merged:" + ",".join(map(str, sorted(subset))),
                )
    cset = ConstraintSet(
        n_targets=game.n_targets,
        constraints=tuple(seen[k] for k in sorted(seen)),
        pinned=tuple(i for i in range(game.n_targets) if game.unauditable[i]),
    )
    return prune_implied(cset) if prune else cset


def prune_implied(cset: ConstraintSet) -> ConstraintSet:
    """Drop constraints already implied by the rest of the set (LP test)."""
    kept = list(cset.constraints)
    pin_rows = ConstraintSet(
        cset.n_targets, (), cset.pinned).lp_rows()
    i = 0
    while i < len(kept):
        others = kept[:i] + kept[i + 1:]
        rows = [(c.coeff_row(cset.n_targets), "<=", float(c.bound)) for c in others]
        target = (kept[i].coeff_row(cset.n_targets), "<=", float(kept[i].bound))
        if implies(rows + pin_rows, target, cset.n_targets):
            kept.pop(i)
        else:
            i += 1
    return ConstraintSet(
        n_targets=cset.n_targets,
        constraints=tuple(kept),
        pinned=cset.pinned,
        includes_box=cset.includes_box,
    )


def polytopes_equivalent(a: ConstraintSet, b: ConstraintSet, n: int) -> bool:
    """True iff each set's constraints are implied by the other plus the box."""
    rows_a = a.lp_rows()
    rows_b = b.lp_rows()
    for c in a.constraints:
        if not implies(rows_b, (c.coeff_row(n), "<=", float(c.bound)), n):
            return False
    for c in b.constraints:
        if not implies(rows_a, (c.coeff_row(n), "<=", float(c.bound)), n):
            return False
    # pinned coordinates must agree as well
    for i in set(a.pinned) | set(b.pinned):
        row = np.zeros(n)
        row[i] = 1.0
        if not implies(rows_b, (row, "<=", 0.0), n):
            return False
        if not implies(rows_a, (row, "<=", 0.0), n):
            return False
    return True


@dataclass(frozen=True)
class TractabilityReport:
    n_nodes: int
    max_degree: int
    high_degree_nodes: int  # nodes with degree >= 3
    subgraph_bound: float   # may be math.inf when not representable
    log2_bound: float
    condition_small_graph: bool
    condition_bounded_degree: bool

    @property
    def tractable(self) -> bool:
        return self.condition_small_graph or self.condition_bounded_degree

    def to_dict(self) -> dict:
        return {
            "n_nodes": self.n_nodes,
            "max_degree": self.max_degree,
            "high_degree_nodes": self.high_degree_nodes,
            "subgraph_bound": self.subgraph_bound,
            "log2_bound": self.log2_bound,
            "condition_small_graph": self.condition_small_graph,
            "condition_bounded_degree": self.condition_bounded_degree,
            "tractable": self.tractable,
        }


def tractability_check(
    graph: IntersectionGraph,
    max_degree_threshold: int = 3,
    high_degree_threshold: int = 2,
    small_graph_slack: float = 1.0,
) -> TractabilityReport:
    """Report which sufficient condition (if either) holds for the graph.

    Condition 1: node count at most log2(targets) + slack.  Condition 2:
    max degree and the number of degree>=3 nodes under their thresholds;
    for such graphs the connected-subgraph count obeys the bound
    ``2**((2(d+1))**(t+1)) * N**((d+1)**(t+1))`` with N the node count.
    """
    nn = graph.n_nodes
    degrees = [graph.degree(v) for v in range(nn)]
    d = max(degrees, default=0)
    t = sum(1 for deg in degrees if deg >= 3)
    if nn == 0:
        log2_bound = 0.0
    else:
        log2_bound = (2.0 * (d + 1)) ** (t + 1) + ((d + 1) ** (t + 1)) * np.log2(max(nn, 2))
    bound = float(2.0 ** log2_bound) if log2_bound < 1000 else float("inf")
    cond1 = nn <= np.log2(max(graph.merged.n_targets, 2)) + small_graph_slack
    cond2 = d <= max_degree_threshold and t <= high_degree_threshold
    return TractabilityReport(
        n_nodes=nn,
        max_degree=d,
        high_degree_nodes=t,
        subgraph_bound=bound,
        log2_bound=float(log2_bound),
        condition_small_graph=bool(cond1),
        condition_bounded_degree=bool(cond2),
    )


def lift_to_allocation_rows(game: AuditGame, p):
    """LP rows/bounds for the allocation-feasibility system at marginals p.

    Variables are the k*n allocation entries (resource-major); restricted
    pairs are fixed to zero through their bounds.
    """
    n, k = game.n_targets, game.n_resources
    nv = k * n
    rows = []
    for i in range(n):
        a = np.zeros(nv)
        a[i::n] = 1.0
        rows.append((a, "=", float(p[i])))
    for j in range(k):
        a = np.zeros(nv)
        a[j * n:(j + 1) * n] = 1.0
        rows.append((a, "<=", 1.0))
    bounds = [
        (0.0, 0.0) if (j, i) in game.restrictions else (0.0, 1.0)
        for j in range(k) for i in range(n)
    ]
    return rows, bounds


def liftable_to_grid(game: AuditGame, p, tol: float = IMPLIES_TOL) -> bool:
    """Feasibility-LP check that marginals p extend to a full allocation."""
    p = np.asarray(p, dtype=float)
    if np.any(p < -tol) or np.any(p > 1 + tol):
        return False
    rows, bounds = lift_to_allocation_rows(game, np.clip(p, 0.0, 1.0))
    return solve_feasibility(rows, bounds).status == "optimal"
