"""Branch-and-bound over binary variables.

Best-bound node selection (ties: deeper node, then insertion order) and
most-fractional branching (ties: lowest variable id). Node LPs are solved by
the bounded-variable simplex with the branching decisions applied as bounds.

One exact shortcut is applied: when flipping the branched binary inside the
parent's optimal point keeps every row feasible and does not increase the
objective, that point is optimal for the child (the child is a restriction of
the parent, so its optimum can only be higher). Such children are enqueued
already solved. This collapses the up-branch cascades caused by cost-free
big-M indicator binaries.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass

import numpy as np

from .model import (
    INFEASIBLE,
    ITERATION_LIMIT,
    OPTIMAL,
    UNBOUNDED,
    MILPModel,
    MILPSolution,
    ModelError,
)
from .simplex import DEFAULT_LP_ITERATION_LIMIT, FEAS_TOL, CompiledLP, solve_compiled


@dataclass(frozen=True)
class MilpOptions:
    integrality_tol: float = 1e-6
    gap_tol: float = 1e-9
    node_limit: int = 1_000_000
    lp_iteration_limit: int = DEFAULT_LP_ITERATION_LIMIT
    branch_rule: str = "most-fractional"
    node_order: str = "best-bound"


@dataclass(eq=False)
class _Node:
    lower: np.ndarray
    upper: np.ndarray
    depth: int
    solved_x: np.ndarray | None = None   # set when inherited from the parent
    solved_obj: float = math.nan


def _most_fractional(values: np.ndarray, binary_ids: np.ndarray, tol: float) -> int:
    """Id of the binary farthest from integrality, or -1 if all integral."""
    v = values[binary_ids]
    dist = np.minimum(np.abs(v), np.abs(1.0 - v))
    j = int(np.argmax(dist))
    if dist[j] <= tol:
        return -1
    return int(binary_ids[j])


def _dive_for_incumbent(
    core: CompiledLP,
    lower: np.ndarray,
    upper: np.ndarray,
    binary_ids: np.ndarray,
    x0: np.ndarray,
    int_tol: float,
    lp_iteration_limit: int,
    max_lps: int = 80,
) -> tuple[float, np.ndarray, int] | None:
    """Greedy rounding dive: returns (objective, point, lp iterations) or None.

    Each round flips fractional binaries onto an integer side, accepting a
    flip only when the cumulatively flipped point stays row-feasible (so the
    re-solve after fixing is guaranteed feasible). Binaries whose flips both
    break a row (e.g. one-of-n choice groups) are fixed one per round to
    their most decided side, where infeasibility can end the dive. This only
    seeds the incumbent: optimality is still proven by the search.
    """
    lo = lower.copy()
    hi = upper.copy()
    x = x0
    lps = 0
    iters = 0
    while lps < max_lps:
        v = x[binary_ids]
        dist = np.minimum(np.abs(v), np.abs(1.0 - v))
        free = lo[binary_ids] < hi[binary_ids]
        frac_idx = np.where(free & (dist > int_tol))[0]
        if frac_idx.size == 0:
            return float(core.cost @ x), x, iters
        xt = x.copy()
        fixed_any = False
        for j in frac_idx:
            vid = int(binary_ids[j])
            rounded = round(float(v[j]))
            for val in (rounded, 1 - rounded):
                old = xt[vid]
                xt[vid] = float(val)
                if core.rows_feasible(xt):
                    lo[vid] = hi[vid] = float(val)
                    fixed_any = True
                    break
                xt[vid] = old
        if not fixed_any:
            # Choice-group variables: commit the most decided one and let the
            # re-solve redistribute its group.
            j = frac_idx[int(np.argmin(dist[frac_idx]))]
            vid = int(binary_ids[j])
            lo[vid] = hi[vid] = round(float(v[j]))
        res = solve_compiled(core, lo, hi, lp_iteration_limit)
        lps += 1
        iters += res.iterations
        if res.status != OPTIMAL:
            return None
        x = res.x
    return None


def solve_milp(model: MILPModel, options: MilpOptions | None = None) -> MILPSolution:
    """Minimize the model over its binary variables.

    Returns status "optimal" with the incumbent proven within `gap_tol`,
    "infeasible"/"unbounded" from the root relaxation, or "iteration_limit"
    with the best incumbent found when a node or LP budget runs out.
    """
    opts = options or MilpOptions()
    if opts.branch_rule != "most-fractional":
        raise ModelError(f"unsupported branch rule {opts.branch_rule!r}")
    if opts.node_order != "best-bound":
        raise ModelError(f"unsupported node order {opts.node_order!r}")

    core = CompiledLP(model)
    lo, hi = model.bounds_arrays()
    binary_ids = np.array(model.binary_ids(), dtype=int)
    n = model.num_variables

    nodes_explored = 0
    lp_iterations = 0
    incumbent: np.ndarray | None = None
    best_obj = math.inf
    seq = itertools.count()

    # Heap entries: (quantized bound, -depth, seq, bound, node). The bound of
    # an unsolved node is its parent's LP objective, a valid lower bound since
    # children are restrictions of the parent. Quantizing the key makes bounds
    # that differ only by solver noise compare equal, so the deeper-first
    # tie-break can dive towards an incumbent instead of sweeping a plateau of
    # alternate optima breadth-first. The grain is set from the root objective
    # scale once known; pruning always uses the exact bounds and gap_tol.
    grain = max(opts.gap_tol, 1e-12)

    def key(bound: float) -> int:
        return -(2**62) if bound == -math.inf else int(round(bound / grain))

    heap: list[tuple[int, int, int, float, _Node]] = []
    heapq.heappush(heap, (key(-math.inf), 0, next(seq), -math.inf, _Node(lo, hi, 0)))

    limit_hit = False
    while heap:
        _, _, _, bound, node = heapq.heappop(heap)
        if incumbent is not None and bound >= best_obj - opts.gap_tol:
            continue
        if nodes_explored >= opts.node_limit:
            limit_hit = True
            break
        nodes_explored += 1

        if node.solved_x is not None:
            x, obj = node.solved_x, node.solved_obj
        else:
            res = solve_compiled(core, node.lower, node.upper, opts.lp_iteration_limit)
            lp_iterations += res.iterations
            if res.status == INFEASIBLE:
                continue
            if res.status == UNBOUNDED:
                if node.depth > 0:
                    raise RuntimeError("bounded parent produced an unbounded child")
                return MILPSolution(UNBOUNDED, res.x, -math.inf, nodes_explored, lp_iterations)
            if res.status == ITERATION_LIMIT:
                limit_hit = True
                break
            x, obj = res.x, res.objective
            if node.depth == 0:
                grain = max(opts.gap_tol, 1e-7 * (1.0 + abs(obj)))
                # Diving pays off on wide trees; small models finish faster
                # without the extra LPs.
                if binary_ids.size > 16 and _most_fractional(x, binary_ids, opts.integrality_tol) >= 0:
                    dive = _dive_for_incumbent(
                        core, node.lower, node.upper, binary_ids, x,
                        opts.integrality_tol, opts.lp_iteration_limit,
                    )
                    if dive is not None:
                        dive_obj, dive_x, dive_iters = dive
                        lp_iterations += dive_iters
                        if dive_obj < best_obj:
                            best_obj = dive_obj
                            incumbent = dive_x

        if obj >= best_obj - opts.gap_tol:
            continue

        if node.depth > 0 and nodes_explored % 40 == 0 and binary_ids.size > 16:
            # Periodic re-dive from the current node keeps the incumbent
            # honest on plateaus where the root dive landed poorly.
            dive = _dive_for_incumbent(
                core, node.lower, node.upper, binary_ids, x,
                opts.integrality_tol, opts.lp_iteration_limit,
            )
            if dive is not None:
                dive_obj, dive_x, dive_iters = dive
                lp_iterations += dive_iters
                if dive_obj < best_obj:
                    best_obj = dive_obj
                    incumbent = dive_x
                    if obj >= best_obj - opts.gap_tol:
                        continue

        j = _most_fractional(x, binary_ids, opts.integrality_tol) if binary_ids.size else -1
        if j < 0:
            # Integral: new incumbent (strict improvement keeps the first
            # solution found among ties, deterministically).
            if obj < best_obj:
                best_obj = obj
                incumbent = x
            continue

        for val in (0.0, 1.0):
            clo = node.lower if val == 0.0 else node.lower.copy()
            chi = node.upper if val == 1.0 else node.upper.copy()
            if val == 0.0:
                chi[j] = 0.0
            else:
                clo[j] = 1.0
            child = _Node(clo, chi, node.depth + 1)
            # Exact inheritance test: flip x_j in the parent point.
            delta_cost = core.cost[j] * (val - x[j])
            if delta_cost <= 1e-12 * (1.0 + abs(obj)):
                xt = x.copy()
                xt[j] = val
                if core.rows_feasible(xt, FEAS_TOL):
                    child.solved_x = xt
                    child.solved_obj = obj + delta_cost
            heapq.heappush(heap, (key(obj), -child.depth, next(seq), obj, child))

    if incumbent is not None:
        status = ITERATION_LIMIT if limit_hit else OPTIMAL
        return MILPSolution(status, incumbent, best_obj, nodes_explored, lp_iterations)
    if limit_hit:
        return MILPSolution(
            ITERATION_LIMIT, np.zeros(n), math.nan, nodes_explored, lp_iterations
        )
    return MILPSolution(INFEASIBLE, np.zeros(n), math.nan, nodes_explored, lp_iterations)
