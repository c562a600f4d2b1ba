"""Shared instance builders and brute-force oracles for the test suite."""

import numpy as np

from auditgames.model import validate_game, compute_deltas


def rand_game(n, k, density=0.0, seed=0, cost_a=0.01, a_vec=False,
              snap_bits=None):
    """Random valid instance; orderings enforced by sorting each pair."""
    rng = np.random.default_rng(seed)
    utilities = []
    for _ in range(n):
        vals = rng.random(4)
        if snap_bits:
            vals = np.round(vals * 2.0 ** snap_bits) / 2.0 ** snap_bits
        ud = sorted(vals[:2], reverse=True)
        ua = sorted(vals[2:])
        utilities.append((ud[0], ud[1], ua[0], ua[1]))
    restrictions = [(j, i) for j in range(k) for i in range(n)
                    if rng.random() < density]
    costs = list(rng.uniform(0.005, 0.05, n)) if a_vec else None
    return validate_game(n, k, utilities, restrictions, cost_a=cost_a,
                         per_target_costs=costs)


def explosion_game(k):
    """The constraint-explosion family: 2k targets; resource j (0-based)
    audits targets {0, 1, 2j, 2j+1}."""
    n = 2 * k
    allowed = [set() for _ in range(n)]
    for j in range(k):
        for t in (0, 1, 2 * j, 2 * j + 1):
            allowed[t].add(j)
    restrictions = [(j, t) for t in range(n) for j in range(k)
                    if j not in allowed[t]]
    utilities = [(0.625, 0.5, 0.25, 0.375)] * n
    return validate_game(n, k, utilities, restrictions, cost_a=0.01)


def grouped_game(n, k, group_size, seed=0):
    from auditgames.cli import BenchConfig, generate_instance
    return generate_instance(BenchConfig(n, k, group_size, seed=seed))


def brute_force_connected_subsets(adjacency):
    """All nonempty vertex subsets inducing a connected subgraph."""
    nv = len(adjacency)
    found = set()
    for mask in range(1, 1 << nv):
        verts = [v for v in range(nv) if mask >> v & 1]
        seen = {verts[0]}
        stack = [verts[0]]
        vset = set(verts)
        while stack:
            u = stack.pop()
            for w in adjacency[u]:
                if w in vset and w not in seen:
                    seen.add(w)
                    stack.append(w)
        if seen == vset:
            found.add(frozenset(verts))
    return found


def single_resource_grid_oracle(game, step=1e-3):
    """Dense 2-D search over (star coverage, punishment) for k = 1 games,
    using the tight-constraint normalization for the other coverages."""
    d = compute_deltas(game)
    n = game.n_targets
    ps = np.arange(0.0, 1.0 + step / 2, step)
    xs = np.arange(0.0, 1.0 + step / 2, step)
    P, X = np.meshgrid(ps, xs, indexing="ij")
    best = -np.inf
    for star in range(n):
        if game.unauditable[star]:
            continue
        V = P * (X + d.delta[star])
        total = P.copy()
        ok = np.ones_like(P, dtype=bool)
        for i in range(n):
            if i == star:
                continue
            num = V + d.delta_pair[i, star]
            den = np.maximum(X + d.delta[i], 1e-15)
            req = np.where(num > 0, num / den, 0.0)
            if game.unauditable[i]:
                ok &= num <= 1e-12
                continue
            ok &= (num <= 0) | (req <= 1 + 1e-12)
            total += np.maximum(req, 0.0)
        ok &= total <= 1 + 1e-12
        ud_a, ud_u = game.utilities[star][0], game.utilities[star][1]
        obj = np.where(ok, ud_u + P * (ud_a - ud_u) - game.cost_a * X, -np.inf)
        best = max(best, float(obj.max()))
    return best
