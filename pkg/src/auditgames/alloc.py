"""Lifting coverage marginals to allocations and mixing into pure audits.

``recover_allocation`` solves the linear feasibility problem that turns a
coverage vector into a resource-by-target probability matrix.  The
decomposition then writes that (doubly sub-stochastic) matrix as a convex
combination of 0/1 assignment matrices: the matrix is padded to a square
doubly stochastic one with slack blocks, perfect matchings are peeled off
one at a time, and the slack part of each matching is stripped away.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constraints import lift_to_allocation_rows
from .errors import Infeasible, NumericalResidual
from .lp import solve_feasibility
from .model import AuditGame

RESIDUAL_TOL = 1e-9
WEIGHT_FLOOR = 1e-12   # weights below this are absorbed, not emitted
ENTRY_FLOOR = 1e-14    # matrix entries below this count as zero


@dataclass(frozen=True)
class AllocationMatrix:
    """k x n matrix; entry (j, i) is the probability resource j audits i."""

    entries: np.ndarray

    @property
    def column_marginals(self) -> np.ndarray:
        return self.entries.sum(axis=0)


@dataclass(frozen=True)
class PureStrategyMixture:
    """Weighted 0/1 assignments reconstructing an allocation matrix."""

    weights: tuple
    assignments: tuple  # of k x n 0/1 ndarrays

    def reconstruct(self) -> np.ndarray:
        total = np.zeros_like(self.assignments[0], dtype=float)
        for w, mat in zip(self.weights, self.assignments):
            total += w * mat
        return total

    @property
    def column_marginals(self) -> np.ndarray:
        return self.reconstruct().sum(axis=0)


def recover_allocation(game: AuditGame, p) -> AllocationMatrix:
    """Feasible allocation with column sums p; raises Infeasible outside
    the lifted polytope (a bug sentinel when p came from a solver)."""
    p = np.asarray(p, dtype=float)
    rows, bounds = lift_to_allocation_rows(game, np.clip(p, 0.0, 1.0))
    out = solve_feasibility(rows, bounds)
    if out.status != "optimal":
        raise Infeasible("coverage vector is not liftable to an allocation")
    entries = out.solution.reshape(game.n_resources, game.n_targets)
    entries = np.where(np.abs(entries) < 1e-13, 0.0, entries)
    return AllocationMatrix(entries=entries)


def _pad_doubly_stochastic(m: np.ndarray) -> np.ndarray:
    """Embed a k x n sub-stochastic matrix into a (k+n) square doubly
    stochastic one: [[M, diag(row slack)], [diag(col slack), M.T]]."""
    k, n = m.shape
    row_slack = 1.0 - m.sum(axis=1)
    col_slack = 1.0 - m.sum(axis=0)
    top = np.hstack([m, np.diag(row_slack)])
    bottom = np.hstack([np.diag(col_slack), m.T])
    return np.vstack([top, bottom])


def _perfect_matching(support: np.ndarray, prefer=None):
    """Kuhn's augmenting-path perfect matching on a square boolean support.

    ``prefer`` optionally forces one (row, col) edge into the matching.
    Returns an array match_col[row] or None when no perfect matching exists.
    """
    size = support.shape[0]
    match_of_col = np.full(size, -1, dtype=int)
    cols_for_row = [np.flatnonzero(support[r]) for r in range(size)]

    def try_assign(r, visited):
        for c in cols_for_row[r]:
            if not visited[c]:
                visited[c] = True
                if match_of_col[c] < 0 or try_assign(match_of_col[c], visited):
                    match_of_col[c] = r
                    return True
        return False

    order = list(range(size))
    if prefer is not None:
        pr, pc = prefer
        match_of_col[pc] = pr
        order.remove(pr)
    for r in order:
        visited = np.zeros(size, dtype=bool)
        if prefer is not None:
            visited[prefer[1]] = True
        if not try_assign(r, visited):
            return None
    match_col = np.empty(size, dtype=int)
    for c, r in enumerate(match_of_col):
        if r < 0:
            return None
        match_col[r] = c
    return match_col


def bvn_decompose(alloc: AllocationMatrix) -> PureStrategyMixture:
    """Deterministic Birkhoff-style peeling of the padded matrix.

    Each round forces the currently smallest positive entry into a perfect
    matching, so at least one entry is zeroed per extraction and the
    component count stays below the padded nonzero count plus one.
    Identical stripped assignments are merged.
    """
    m = np.asarray(alloc.entries, dtype=float)
    if np.any(m < -RESIDUAL_TOL):
        raise NumericalResidual("allocation matrix has negative entries")
    k, n = m.shape
    if np.any(m.sum(axis=1) > 1 + RESIDUAL_TOL) or np.any(m.sum(axis=0) > 1 + RESIDUAL_TOL):
        raise NumericalResidual("allocation matrix is not sub-stochastic")

    d = _pad_doubly_stochastic(np.clip(m, 0.0, 1.0))
    size = k + n
    collected = {}
    remaining = 1.0
    for _ in range(size * size + 1):
        if remaining <= RESIDUAL_TOL:
            break
        support = d > ENTRY_FLOOR
        if not support.any():
            break
        # force the smallest positive entry so it is zeroed this round
        prefer = np.unravel_index(
            int(np.argmin(np.where(support, d, np.inf))), d.shape)
        match = _perfect_matching(support, prefer=prefer)
        if match is None:
            # tolerance starvation: relax the forced edge and retry
            match = _perfect_matching(support)
            if match is None:
                raise NumericalResidual("no perfect matching on padded support")
        weight = float(d[np.arange(size), match].min())
        weight = min(weight, remaining)
        if weight <= WEIGHT_FLOOR:
            # absorb a vanishing weight by zeroing its smallest entry
            d[prefer] = 0.0
            continue
        d[np.arange(size), match] -= weight
        d[d < ENTRY_FLOOR] = 0.0
        remaining -= weight
        # strip slack-touching edges: keep only the real k x n block
        key = tuple(
            (r, match[r]) for r in range(k) if match[r] < n
        )
        collected[key] = collected.get(key, 0.0) + weight
    if remaining > RESIDUAL_TOL:
        raise NumericalResidual(
            f"decomposition left residual mass {remaining:.2e}")
    if remaining > 0:
        collected[()] = collected.get((), 0.0) + remaining

    weights = []
    assignments = []
    for key in sorted(collected):
        mat = np.zeros((k, n))
        for r, c in key:
            mat[r, c] = 1.0
        weights.append(collected[key])
        assignments.append(mat)
    mixture = PureStrategyMixture(weights=tuple(weights),
                                  assignments=tuple(assignments))
    err = float(np.abs(mixture.reconstruct() - m).max())
    if err > RESIDUAL_TOL:
        raise NumericalResidual(f"reconstruction error {err:.2e}")
    return mixture
