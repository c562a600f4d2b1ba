"""Punishment-grid solver: one LP per (best-response target, grid x).

For a fixed punishment rate x each best-response program is a linear
program, in either the allocation-variable ("grid") formulation or the
coverage-variable ("transformed") formulation backed by the extracted
constraint set.  The returned solution is the best over every target and
every grid value; the objective is the full defender utility including
the constant term of the assumed attacked target.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import constraints as cx
from .errors import (
    AllProgramsInfeasible,
    EnumerationCapExceeded,
    VerificationFailed,
)
from .lp import LinearProgram, solve_lp
from .model import AuditGame, compute_deltas

VERIFY_TOL = 1e-7


@dataclass(frozen=True)
class SolveConfig:
    epsilon: float = 0.005
    formulation: str = "auto"  # grid | transformed | auto
    enumeration_cap: int = cx.DEFAULT_SUBGRAPH_CAP
    root_bits: int = 20
    a1_enabled: bool = True
    verify: bool = True
    screen: bool = True  # cheap per-(star, x) infeasibility pre-check

    def __post_init__(self):
        if not 0.0 < self.epsilon <= 0.5:
            raise ValueError("epsilon must be in (0, 0.5]")
        if self.formulation not in ("grid", "transformed", "auto"):
            raise ValueError(f"unknown formulation {self.formulation!r}")


@dataclass
class CoverageSolution:
    p: np.ndarray
    x: float | np.ndarray
    objective: float
    star: int
    formulation: str
    method: str
    details: dict = field(default_factory=dict)


def x_grid(epsilon: float) -> list:
    """Grid {0, eps, 2 eps, ...} with both endpoints 0 and 1 included."""
    count = int(math.floor(1.0 / epsilon + 1e-12))
    values = [i * epsilon for i in range(count + 1)]
    if values[-1] < 1.0 - 1e-12:
        values.append(1.0)
    else:
        values[-1] = 1.0
    return values


def full_objective(game: AuditGame, star: int, p_star: float, x: float,
                   a1: float | None = None) -> float:
    """Defender utility when `star` is attacked, constant term included."""
    ud_a, ud_u = game.utilities[star][0], game.utilities[star][1]
    if a1 is None:
        a1 = game.cost_a1
    return ud_u + p_star * ((ud_a - ud_u) - a1 * x) - game.cost_a * x


def infeasibility_screen(game: AuditGame, deltas, star: int, x: float) -> bool:
    """True when the program is provably infeasible: some other target pays
    the attacker more when fully covered than star ever can."""
    u = np.asarray(game.utilities)
    ua_a = u[:, 2]
    ua_u_star = u[star, 3]
    others = np.delete(ua_a, star)
    return others.size > 0 and float(others.max()) - x > ua_u_star + 1e-9


class _ProgramCache:
    """Per-game static LP pieces reused across the (star, x) loop.

    The solver loops work on a reduced grid formulation with restricted
    allocation variables dropped; the public program builder exposes the
    full n*k-variable form.
    """

    def __init__(self, game: AuditGame, cset=None):
        self.game = game
        self.deltas = compute_deltas(game)
        self.cset = cset
        n, k = game.n_targets, game.n_resources
        nv = n * k
        self.grid_bounds = [
            (0.0, 0.0) if (j, i) in game.restrictions else (0.0, math.inf)
            for j in range(k) for i in range(n)
        ]
        self.allowed = np.array(
            [bounds[1] != 0.0 for bounds in self.grid_bounds])
        self.allowed_idx = np.flatnonzero(self.allowed)
        # column index of each reduced variable's target
        self.reduced_target = self.allowed_idx % n
        static = np.zeros((n + k, nv))
        for i in range(n):
            static[i, i::n] = 1.0  # coverage of target i <= 1
        for j in range(k):
            static[n + j, j * n:(j + 1) * n] = 1.0  # resource budget
        self.grid_static = static
        self.grid_static_rhs = np.ones(n + k)
        self.grid_static_reduced = np.ascontiguousarray(
            static[:, self.allowed_idx])
        self._br_cache_star = None
        self._br_base = None
        self._br_xcoef = None

    def transformed_bounds(self):
        return [
            (0.0, 0.0) if self.game.unauditable[i] else (0.0, 1.0)
            for i in range(self.game.n_targets)
        ]

    def br_rows_transformed(self, star: int, x: float):
        n = self.game.n_targets
        d = self.deltas
        others = [i for i in range(n) if i != star]
        mat = np.zeros((len(others), n))
        rhs = np.empty(len(others))
        for r, i in enumerate(others):
            mat[r, star] = x + d.delta[star]
            mat[r, i] = -(x + d.delta[i])
            rhs[r] = -d.delta_pair[i, star]
        return mat, rhs

    def _grid_br_parts(self, star: int):
        """Reduced-column best-response row pieces: rows = base + x * xcoef."""
        if self._br_cache_star == star:
            return self._br_base, self._br_xcoef
        game, d = self.game, self.deltas
        n = game.n_targets
        others = [i for i in range(n) if i != star]
        nr = self.allowed_idx.size
        base = np.zeros((len(others), nr))
        xcoef = np.zeros((len(others), nr))
        star_cols = self.reduced_target == star
        for r, i in enumerate(others):
            cols = self.reduced_target == i
            base[r, star_cols] = d.delta[star]
            base[r, cols] = -d.delta[i]
            xcoef[r, star_cols] = 1.0
            xcoef[r, cols] = -1.0
        self._br_cache_star = star
        self._br_base, self._br_xcoef = base, xcoef
        return base, xcoef

    def build(self, star: int, x: float, formulation: str,
              reduced: bool = True) -> LinearProgram:
        game, d = self.game, self.deltas
        n, k = game.n_targets, game.n_resources
        a1 = game.cost_a1
        p_star_coeff = d.delta_d[star] - a1 * x
        if formulation == "transformed":
            mat_br, rhs_br = self.br_rows_transformed(star, x)
            rows = [mat_br]
            rhs = [rhs_br]
            if self.cset.constraints:
                rows.append(np.vstack([
                    c.coeff_row(n) for c in self.cset.constraints]))
                rhs.append(np.array([float(c.bound)
                                     for c in self.cset.constraints]))
            mat = np.vstack(rows)
            allrhs = np.concatenate(rhs)
            obj = np.zeros(n)
            obj[star] = p_star_coeff
            return LinearProgram(
                obj, (mat, ["<="] * mat.shape[0], allrhs),
                self.transformed_bounds())
        base, xcoef = self._grid_br_parts(star)
        br_rhs = np.array([-d.delta_pair[i, star]
                           for i in range(n) if i != star])
        allrhs = np.concatenate([self.grid_static_rhs, br_rhs])
        if reduced:
            mat = np.vstack([self.grid_static_reduced, base + x * xcoef])
            obj = np.where(self.reduced_target == star, p_star_coeff, 0.0)
            bounds = [(0.0, math.inf)] * self.allowed_idx.size
        else:
            nv = n * k
            mat = np.zeros((allrhs.size, nv))
            mat[:n + k] = self.grid_static
            mat[n + k:, self.allowed_idx] = base + x * xcoef
            obj = np.zeros(nv)
            obj[star::n] = p_star_coeff
            bounds = self.grid_bounds
        return LinearProgram(
            obj, (mat, ["<="] * mat.shape[0], allrhs), bounds)

    def coverage_from_solution(self, formulation: str, solution: np.ndarray):
        if formulation == "transformed":
            return np.clip(solution, 0.0, 1.0)
        n, k = self.game.n_targets, self.game.n_resources
        if solution.size == self.allowed_idx.size:
            p = np.zeros(n)
            np.add.at(p, self.reduced_target, solution)
            return np.clip(p, 0.0, 1.0)
        return np.clip(solution.reshape(k, n).sum(axis=0), 0.0, 1.0)


def build_program(game: AuditGame, star: int, x: float, formulation: str,
                  cset=None) -> LinearProgram:
    """One best-response LP with the punishment rate held constant.

    The grid form carries the full n*k allocation variables (restricted
    pairs are fixed through their bounds); the solver loops internally use
    an equivalent reduced form with those columns dropped.
    """
    if formulation == "transformed" and cset is None:
        cset = cx.constraint_find(game, prune=True)
    cache = _ProgramCache(game, cset)
    return cache.build(star, x, formulation, reduced=False)


def resolve_formulation(game: AuditGame, cfg: SolveConfig):
    """Pick grid/transformed per config, with automatic grid fallback when
    enumeration blows the cap.  Returns (name, cset_or_None, info)."""
    info = {}
    if cfg.formulation == "grid":
        return "grid", None, info
    try:
        if cfg.formulation == "auto":
            graph = cx.build_intersection_graph(cx.merge_targets(game))
            report = cx.tractability_check(graph)
            info["tractability"] = report.to_dict()
        cset = cx.constraint_find(game, cap=cfg.enumeration_cap, prune=True)
        return "transformed", cset, info
    except EnumerationCapExceeded as exc:
        info["fallback"] = str(exc)
        return "grid", None, info


def verify_solution(game: AuditGame, star: int, p, x: float,
                    cset=None, tol: float = VERIFY_TOL) -> dict:
    """Residuals of the original program at (p, x); raises on violation."""
    d = compute_deltas(game)
    p = np.asarray(p, dtype=float)
    br = 0.0
    for i in range(game.n_targets):
        if i == star:
            continue
        lhs = (p[i] * (-x - d.delta[i]) + p[star] * (x + d.delta[star])
               + d.delta_pair[i, star])
        br = max(br, lhs)
    box = max(0.0, float((-p).max()), float((p - 1).max()))
    pin = max((p[i] for i in range(game.n_targets) if game.unauditable[i]),
              default=0.0)
    residuals = {"best_response": br, "box": box, "pinned": pin,
                 "x_box": max(0.0, -x, x - 1.0)}
    if cset is not None:
        cvio = 0.0
        for c in cset.constraints:
            cvio = max(cvio, float(p[list(c.target_indices)].sum() - c.bound))
        residuals["coverage_set"] = cvio
    residuals["grid_liftable"] = 0.0 if cx.liftable_to_grid(game, p) else 1.0
    worst = max(residuals.values())
    if worst > tol:
        raise VerificationFailed(f"solution residuals {residuals}")
    return residuals


def solve_fpt(game: AuditGame, cfg: SolveConfig | None = None) -> CoverageSolution:
    """Best solution over every target and every grid punishment value.

    Infeasible (target, x) pairs are expected and skipped; ties break
    toward smaller x, then smaller target index.
    """
    cfg = cfg or SolveConfig()
    formulation, cset, info = resolve_formulation(game, cfg)
    cache = _ProgramCache(game, cset)
    grid = x_grid(cfg.epsilon)
    best = None
    counts = {"solved": 0, "screened": 0, "lp_infeasible": 0}
    for star in range(game.n_targets):
        # walk x downward: feasibility is monotone in the punishment rate,
        # so the first infeasible grid point settles all smaller ones
        for x in reversed(grid):
            if cfg.screen and infeasibility_screen(game, cache.deltas, star, x):
                counts["screened"] += 1
                continue
            out = solve_lp(cache.build(star, x, formulation))
            if out.status != "optimal":
                counts["lp_infeasible"] += 1
                if cfg.screen:
                    break
                continue
            counts["solved"] += 1
            p = cache.coverage_from_solution(formulation, out.solution)
            a1 = game.cost_a1 if cfg.a1_enabled else 0.0
            obj = full_objective(game, star, float(p[star]), x, a1=a1)
            key = (obj, -x, -star)
            if best is None or key > best[0]:
                best = (key, p, x, star)
    if best is None:
        raise AllProgramsInfeasible("no (target, x) pair admits a solution")
    _, p, x, star = best
    delta_star = cache.deltas.delta[star]
    sol = CoverageSolution(
        p=p, x=x, objective=best[0][0], star=star,
        formulation=formulation, method="fpt",
        details={
            **info,
            **counts,
            "epsilon": cfg.epsilon,
            "grid_size": len(grid),
            "guarantee_condition_met": bool(
                x > 0.01 or delta_star > 2.0 ** -game.input_bits),
        },
    )
    if cfg.verify:
        sol.details["residuals"] = verify_solution(game, star, p, x, cset)
    return sol


def per_pair_objectives(game: AuditGame, cfg: SolveConfig, formulation: str,
                        cset=None):
    """LP value for every (star, x) pair; None marks infeasible pairs.

    Used by the formulation comparison; runs strictly serially.
    """
    cache = _ProgramCache(game, cset)
    grid = x_grid(cfg.epsilon)
    results = {}
    for star in range(game.n_targets):
        cut = False
        for x in reversed(grid):
            if cut or (cfg.screen and
                       infeasibility_screen(game, cache.deltas, star, x)):
                results[(star, x)] = None
                continue
            out = solve_lp(cache.build(star, x, formulation))
            if out.status != "optimal":
                results[(star, x)] = None
                # feasibility is monotone in x: everything below is out too
                if cfg.screen:
                    cut = True
                continue
            p = cache.coverage_from_solution(formulation, out.solution)
            a1 = game.cost_a1 if cfg.a1_enabled else 0.0
            results[(star, x)] = full_objective(
                game, star, float(p[star]), x, a1=a1)
    return results


def compare_formulations(game: AuditGame, cfg: SolveConfig | None = None,
                         include_extraction: bool = False) -> dict:
    """Single-threaded wall-clock comparison of the two formulations.

    Extraction time is reported separately and excluded from the
    transformed column unless ``include_extraction`` is set.
    """
    cfg = cfg or SolveConfig()
    t0 = time.perf_counter()
    cset = cx.constraint_find(game, cap=cfg.enumeration_cap, prune=True)
    t_extract = time.perf_counter() - t0

    t0 = time.perf_counter()
    res_t = per_pair_objectives(game, cfg, "transformed", cset)
    t_transformed = time.perf_counter() - t0
    if include_extraction:
        t_transformed += t_extract

    t0 = time.perf_counter()
    res_g = per_pair_objectives(game, cfg, "grid")
    t_grid = time.perf_counter() - t0

    max_diff = 0.0
    mismatches = []
    for key in res_g:
        a, b = res_g[key], res_t[key]
        if (a is None) != (b is None):
            mismatches.append(key)
        elif a is not None:
            max_diff = max(max_diff, abs(a - b))
    feasible = [(v, -k[1], -k[0]) for k, v in res_g.items() if v is not None]
    return {
        "time_grid": t_grid,
        "time_transformed": t_transformed,
        "time_extraction": t_extract,
        "include_extraction": include_extraction,
        "speedup": t_grid / t_transformed if t_transformed > 0 else math.inf,
        "pairs": len(res_g),
        "objective_max_diff": max_diff,
        "feasibility_mismatches": mismatches,
        "best_objective": max(feasible)[0] if feasible else None,
        "n_constraints": len(cset.constraints),
    }
