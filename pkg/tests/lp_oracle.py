"""Independent LP oracle: exhaustive enumeration of candidate vertices.

A vertex of {rows, box bounds} is determined by an active set: k tight rows
plus n-k variables pinned at a bound. Enumerating every such combination and
keeping the best feasible candidate gives the exact optimum for boxed LPs,
with no simplex machinery involved.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from hems.milp import INFEASIBLE, MILPModel, OPTIMAL

FEAS_EPS = 1e-8


def enumerate_lp_optimum(model: MILPModel) -> tuple[str, float]:
    """(status, objective) by brute force. Requires finite variable bounds."""
    n = model.num_variables
    lo, hi = model.bounds_arrays()
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise ValueError("oracle needs finite bounds")
    c = model.objective_vector()
    m = model.num_constraints
    A = np.zeros((m, n))
    b = np.zeros(m)
    senses = []
    for i, con in enumerate(model.constraints):
        for vid, coef in con.terms:
            A[i, vid] = coef
        b[i] = con.rhs
        senses.append(con.sense)

    def feasible(x: np.ndarray) -> bool:
        if np.any(x < lo - FEAS_EPS) or np.any(x > hi + FEAS_EPS):
            return False
        act = A @ x if m else np.zeros(0)
        for i, sense in enumerate(senses):
            tol = FEAS_EPS * (1.0 + abs(b[i]))
            if sense == "<=" and act[i] > b[i] + tol:
                return False
            if sense == ">=" and act[i] < b[i] - tol:
                return False
            if sense == "=" and abs(act[i] - b[i]) > tol:
                return False
        return True

    best = math.inf
    found = False
    rows = list(range(m))
    cols = list(range(n))
    for k in range(0, min(m, n) + 1):
        for active_rows in itertools.combinations(rows, k):
            for free_vars in itertools.combinations(cols, k):
                pinned = [j for j in cols if j not in free_vars]
                for bound_pick in itertools.product((0, 1), repeat=len(pinned)):
                    x = np.empty(n)
                    for j, side in zip(pinned, bound_pick):
                        x[j] = lo[j] if side == 0 else hi[j]
                    if k:
                        sub = A[np.ix_(active_rows, free_vars)]
                        rhs = b[list(active_rows)] - A[np.ix_(active_rows, pinned)] @ x[pinned]
                        try:
                            sol = np.linalg.solve(sub, rhs)
                        except np.linalg.LinAlgError:
                            continue
                        x[list(free_vars)] = sol
                    if feasible(x):
                        found = True
                        obj = float(c @ x)
                        if obj < best:
                            best = obj
    if not found:
        return INFEASIBLE, math.nan
    return OPTIMAL, best


def random_boxed_lp(rng: np.random.Generator, max_vars: int = 7, max_rows: int = 5) -> MILPModel:
    """Random LP with finite boxes and small integer-ish data; occasionally
    infeasible by construction."""
    n = int(rng.integers(2, max_vars + 1))
    m = int(rng.integers(1, max_rows + 1))
    model = MILPModel("random_lp")
    for j in range(n):
        lo = float(rng.integers(-4, 3))
        hi = lo + float(rng.integers(0, 7))
        model.add_variable("continuous", lo, hi, f"v{j}")
    lo, hi = model.bounds_arrays()
    for i in range(m):
        k = int(rng.integers(1, n + 1))
        vids = rng.choice(n, size=k, replace=False)
        terms = []
        for vid in vids:
            coef = 0.0
            while coef == 0.0:
                coef = float(rng.integers(-5, 6))
            terms.append((int(vid), coef))
        sense = ("<=", "<=", ">=", ">=", "=")[int(rng.integers(0, 5))]
        # Bias the rhs towards the row's reachable activity range so a good
        # share of instances is feasible; leave some unreachable on purpose.
        reach_lo = sum(c * (lo[v] if c > 0 else hi[v]) for v, c in terms)
        reach_hi = sum(c * (hi[v] if c > 0 else lo[v]) for v, c in terms)
        if rng.random() < 0.85:
            rhs = float(np.round(rng.uniform(reach_lo, reach_hi)))
        else:
            rhs = float(rng.integers(-20, 21))
        model.add_constraint(terms, sense, rhs, f"r{i}")
    obj = []
    for j in range(n):
        coef = float(rng.integers(-9, 10))
        if coef:
            obj.append((j, coef))
    if not obj:
        obj = [(0, 1.0)]
    model.set_objective(obj)
    return model
