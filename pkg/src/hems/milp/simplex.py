"""Bounded-variable two-phase primal simplex.

Simple bounds are handled implicitly (nonbasic variables rest at a bound and
may flip between bounds without a basis change); only the linear rows enter
the basis matrix. Rows are equilibrated to unit max-|coefficient| before
solving. Anti-cycling: Bland's rule is engaged after a run of degenerate
pivots and released on the next improving step.

Columns are [structural | slacks | artificials]. The slack and artificial
blocks are identity matrices and are never materialized; pricing and column
fetches special-case them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg.blas import dger

from .model import (
    INFEASIBLE,
    ITERATION_LIMIT,
    OPTIMAL,
    UNBOUNDED,
    MILPModel,
    MILPSolution,
)

FEAS_TOL = 1e-7          # primal feasibility, relative to (1 + |rhs|)
DUAL_TOL_BASE = 1e-9     # reduced-cost threshold, scaled by max(1, |c|_inf)
DEGEN_TOL = 1e-10        # step length below which a pivot counts as degenerate
PIVOT_TOL = 1e-11        # smallest acceptable pivot magnitude
BLAND_AFTER = 100        # degenerate pivots in a row before Bland's rule
REFRESH_EVERY = 100      # recompute basic values from the factorization
REFACTOR_EVERY = 1000    # rebuild the basis inverse from scratch

# Nonbasic rest states.
_BASIC = 0
_AT_LOWER = 1
_AT_UPPER = 2
_AT_ZERO_FREE = 3

DEFAULT_LP_ITERATION_LIMIT = 50_000


class CompiledLP:
    """Row-scaled standard form of a model: A x = b with box bounds.

    Slack bounds encode the row sense; artificials exist only to build a
    feasible starting basis in phase 1.
    """

    __slots__ = ("n", "m", "A0", "b", "slack_lower", "slack_upper", "cost")

    def __init__(self, model: MILPModel):
        n = model.num_variables
        m = model.num_constraints
        A0 = np.zeros((m, n))
        b = np.zeros(m)
        slack_lo = np.zeros(m)
        slack_hi = np.zeros(m)
        for i, con in enumerate(model.constraints):
            for vid, coef in con.terms:
                A0[i, vid] = coef
            b[i] = con.rhs
            if con.sense == "<=":
                slack_lo[i], slack_hi[i] = 0.0, np.inf
            elif con.sense == ">=":
                slack_lo[i], slack_hi[i] = -np.inf, 0.0
            else:
                slack_lo[i] = slack_hi[i] = 0.0
        # Row equilibration on the structural part; slacks keep coefficient 1.
        if m:
            scale = np.abs(A0).max(axis=1)
            scale[scale == 0.0] = 1.0
            A0 /= scale[:, None]
            b /= scale
        self.n = n
        self.m = m
        self.A0 = np.asfortranarray(A0)  # fast column access and fast A0.T @ y
        self.b = b
        self.slack_lower = slack_lo
        self.slack_upper = slack_hi
        self.cost = model.objective_vector()

    def column(self, j: int) -> np.ndarray:
        if j < self.n:
            return self.A0[:, j]
        e = np.zeros(self.m)
        e[(j - self.n) % self.m] = 1.0
        return e

    def rows_feasible(self, x_struct: np.ndarray, tol: float = FEAS_TOL) -> bool:
        """Whether a structural point satisfies every row (bounds not checked)."""
        if self.m == 0:
            return True
        resid = self.b - self.A0 @ x_struct
        slack_tol = tol * (1.0 + np.abs(self.b))
        return bool(
            np.all(resid >= self.slack_lower - slack_tol)
            and np.all(resid <= self.slack_upper + slack_tol)
        )


@dataclass(eq=False)
class SimplexResult:
    status: str
    x: np.ndarray          # structural values
    objective: float
    iterations: int


def solve_compiled(
    core: CompiledLP,
    lower: np.ndarray,
    upper: np.ndarray,
    iteration_limit: int = DEFAULT_LP_ITERATION_LIMIT,
) -> SimplexResult:
    """Solve the LP over the compiled rows with the given structural bounds."""
    n, m = core.n, core.m
    ntot = n + 2 * m
    A0 = core.A0
    b = core.b

    lo = np.empty(ntot)
    hi = np.empty(ntot)
    lo[:n], hi[:n] = lower, upper
    lo[n : n + m], hi[n : n + m] = core.slack_lower, core.slack_upper

    # Start: structural variables rest at their nearest finite bound, slacks
    # at zero; each row is carried by its slack when the initial residual fits
    # the slack range, otherwise by an artificial holding the residual.
    x = np.zeros(ntot)
    state = np.full(ntot, _AT_ZERO_FREE, dtype=np.int8)
    finite_lo = np.isfinite(lo[:n])
    finite_hi = np.isfinite(hi[:n])
    x[:n] = np.where(finite_lo, lo[:n], np.where(finite_hi, hi[:n], 0.0))
    state[:n] = np.where(finite_lo, _AT_LOWER, np.where(finite_hi, _AT_UPPER, _AT_ZERO_FREE))
    state[n : n + m] = np.where(np.isfinite(core.slack_lower), _AT_LOWER, _AT_UPPER)

    if m == 0:
        # Pure bound minimization: pick the cheapest bound per variable.
        c = core.cost
        if np.any((c > 0) & ~np.isfinite(lo[:n])) or np.any((c < 0) & ~np.isfinite(hi[:n])):
            return SimplexResult(UNBOUNDED, x[:n].copy(), -np.inf, 0)
        xs = np.where(c > 0, lo[:n], np.where(c < 0, hi[:n], x[:n]))
        return SimplexResult(OPTIMAL, xs, float(c @ xs), 0)

    resid = b - A0 @ x[:n]
    slack_ok = (resid >= lo[n : n + m]) & (resid <= hi[n : n + m])
    basis = np.where(slack_ok, np.arange(n, n + m), np.arange(n + m, ntot))
    # Artificial bounds: one-sided around the residual they carry; unused ones
    # are pinned at zero so they can never enter.
    art = np.arange(n + m, ntot)
    lo[art] = 0.0
    hi[art] = 0.0
    need_art = ~slack_ok
    neg = need_art & (resid < 0.0)
    pos = need_art & (resid >= 0.0)
    lo[art[neg]] = -np.inf
    hi[art[pos]] = np.inf
    x[basis] = resid
    state[basis] = _BASIC

    phase1_cost = np.zeros(ntot)
    phase1_cost[art[pos]] = 1.0
    phase1_cost[art[neg]] = -1.0

    phase2_cost = np.zeros(ntot)
    phase2_cost[:n] = core.cost

    Binv = np.eye(m)
    iters = 0
    pivots_since_refactor = 0
    feas_eps = FEAS_TOL * (1.0 + float(np.abs(b).max(initial=0.0)))

    def refresh_basics() -> None:
        xn = x.copy()
        xn[basis] = 0.0
        rhs_eff = b - A0 @ xn[:n] - xn[n : n + m] - xn[n + m :]
        x[basis] = Binv @ rhs_eff

    def refactor() -> None:
        nonlocal Binv, pivots_since_refactor
        B = np.empty((m, m))
        for r, j in enumerate(basis):
            B[:, r] = core.column(int(j))
        Binv = np.linalg.inv(B)
        pivots_since_refactor = 0
        refresh_basics()

    def residual_ok() -> bool:
        resid = np.abs(b - A0 @ x[:n] - x[n : n + m] - x[n + m :])
        return bool(np.all(resid <= FEAS_TOL * (1.0 + np.abs(b))))

    def run_phase(cost: np.ndarray, phase: int) -> str:
        nonlocal iters, Binv, pivots_since_refactor
        dual_tol = DUAL_TOL_BASE * max(1.0, float(np.abs(cost).max(initial=0.0)))
        bland = False
        degen_run = 0
        verify_rounds = 0
        ray_rounds = 0
        fixed = lo == hi
        cost_sl = cost[n : n + m]
        cost_art = cost[n + m :]
        viol = np.empty(ntot)
        d = np.empty(ntot)
        # Direction sign per nonbasic state: at-lower wants d < 0, at-upper
        # d > 0, free either; movable marks eligible (nonbasic, not fixed).
        sign = np.zeros(ntot)
        movable = np.zeros(ntot, dtype=bool)

        def sync_flags(j: int) -> None:
            s = state[j]
            movable[j] = s != _BASIC and not fixed[j]
            sign[j] = -1.0 if s == _AT_LOWER else (1.0 if s == _AT_UPPER else 0.0)

        for j0 in range(ntot):
            sync_flags(j0)

        def price() -> np.ndarray:
            y = Binv.T @ cost[basis]
            d[:n] = cost[:n] - A0.T @ y
            d[n : n + m] = cost_sl - y
            d[n + m :] = cost_art - y
            # violation = how far the reduced cost crosses into improvement
            np.multiply(d, sign, out=viol)
            fr = movable & (sign == 0.0)
            if fr.any():
                viol[fr] = np.abs(d[fr])
            np.subtract(viol, dual_tol, out=viol)
            np.maximum(viol, 0.0, out=viol)
            viol[~movable] = 0.0
            return d

        while True:
            if iters >= iteration_limit:
                return ITERATION_LIMIT
            if iters and iters % REFACTOR_EVERY == 0:
                refactor()
            elif iters and iters % REFRESH_EVERY == 0:
                refresh_basics()

            d = price()
            if not np.any(viol > 0.0):
                # Claimed optimal: the row residual check is cheap and always
                # runs; the expensive refactor + re-price only when enough
                # pivots have accumulated on the factorization for drift to be
                # a plausible concern (or the residuals say it already is).
                if pivots_since_refactor == 0 or verify_rounds >= 2:
                    return OPTIMAL
                if pivots_since_refactor <= 300 and residual_ok():
                    return OPTIMAL
                verify_rounds += 1
                refactor()
                d = price()
                if not np.any(viol > 0.0):
                    return OPTIMAL

            q = int(np.argmax(viol > 0.0)) if bland else int(np.argmax(viol))
            sigma = 1.0
            if state[q] == _AT_UPPER or (state[q] == _AT_ZERO_FREE and d[q] > 0):
                sigma = -1.0

            w = Binv @ core.column(q)
            delta = sigma * w
            xb = x[basis]

            # Ratio test: first blocking basic bound, or the entering
            # variable's own opposite bound.
            t_best = np.inf
            r_best = -1
            hit_upper = False
            idx = np.nonzero(np.abs(delta) > PIVOT_TOL)[0]
            if idx.size:
                dlt = delta[idx]
                lob = lo[basis[idx]]
                hib = hi[basis[idx]]
                ts = np.full(idx.size, np.inf)
                down = dlt > 0
                okd = down & np.isfinite(lob)
                ts[okd] = (xb[idx[okd]] - lob[okd]) / dlt[okd]
                oku = ~down & np.isfinite(hib)
                ts[oku] = (xb[idx[oku]] - hib[oku]) / dlt[oku]
                np.maximum(ts, 0.0, out=ts)
                tmin = ts.min()
                if np.isfinite(tmin):
                    tie = idx[np.abs(ts - tmin) <= 1e-12 * (1.0 + tmin)]
                    if bland:
                        r_best = int(tie[np.argmin(basis[tie])])
                    else:
                        piv = np.abs(delta[tie])
                        near = tie[piv >= piv.max() - 1e-12]
                        r_best = int(near[np.argmin(basis[near])])
                    t_best = float(tmin)
                    hit_upper = delta[r_best] < 0

            t_own = hi[q] - lo[q]  # inf when one side is open
            if t_own <= t_best:
                t = t_own
                if not np.isfinite(t):
                    # Confirm the ray against an exact factorization before
                    # declaring unboundedness; drift can fake an open column.
                    if ray_rounds < 1:
                        ray_rounds += 1
                        refactor()
                        continue
                    if phase == 1:
                        raise RuntimeError("phase-1 objective cannot be unbounded")
                    return UNBOUNDED
                x[basis] = xb - t * delta
                x[q] = hi[q] if state[q] == _AT_LOWER else lo[q]
                state[q] = _AT_UPPER if state[q] == _AT_LOWER else _AT_LOWER
                sync_flags(q)
            else:
                t = t_best
                leave = int(basis[r_best])
                start = lo[q] if state[q] == _AT_LOWER else (hi[q] if state[q] == _AT_UPPER else 0.0)
                x[basis] = xb - t * delta
                x[q] = start + sigma * t
                x[leave] = hi[leave] if hit_upper else lo[leave]
                state[leave] = _AT_UPPER if hit_upper else _AT_LOWER
                state[q] = _BASIC
                basis[r_best] = q
                # In-place rank-1 update of the basis inverse (BLAS ger on the
                # transposed view avoids a temporary m*m array per pivot).
                # Rebinding through the returned view stays correct even if
                # the BLAS call had to fall back to a copy.
                br = Binv[r_best] / w[r_best]
                Binv = dger(-1.0, br, w, a=Binv.T, overwrite_a=1).T
                Binv[r_best] = br
                pivots_since_refactor += 1
                if phase == 1 and leave >= n + m:
                    # An artificial that left the basis is retired for good.
                    lo[leave] = hi[leave] = 0.0
                    x[leave] = 0.0
                    fixed[leave] = True
                sync_flags(q)
                sync_flags(leave)

            iters += 1
            if t <= DEGEN_TOL:
                degen_run += 1
                if degen_run >= BLAND_AFTER:
                    bland = True
            else:
                degen_run = 0
                bland = False
                verify_rounds = 0

    # Phase 1 only if some row needed an artificial.
    if bool(np.any(need_art)):
        status = run_phase(phase1_cost, phase=1)
        if status == ITERATION_LIMIT:
            return SimplexResult(ITERATION_LIMIT, x[:n].copy(), float("nan"), iters)
        infeas = float(np.abs(x[art]).sum())
        if infeas > feas_eps:
            return SimplexResult(INFEASIBLE, x[:n].copy(), float("nan"), iters)
        # Pin every artificial at zero for phase 2.
        lo[art] = 0.0
        hi[art] = 0.0
        x[art] = np.where(np.abs(x[art]) <= feas_eps, 0.0, x[art])

    status = run_phase(phase2_cost, phase=2)
    if status == ITERATION_LIMIT:
        return SimplexResult(ITERATION_LIMIT, x[:n].copy(), float("nan"), iters)
    if status == UNBOUNDED:
        return SimplexResult(UNBOUNDED, x[:n].copy(), -np.inf, iters)

    xs = x[:n].copy()
    return SimplexResult(OPTIMAL, xs, float(core.cost @ xs), iters)


def solve_lp(
    model: MILPModel,
    iteration_limit: int = DEFAULT_LP_ITERATION_LIMIT,
    lower: np.ndarray | None = None,
    upper: np.ndarray | None = None,
) -> MILPSolution:
    """Solve the LP relaxation of a model (integrality ignored).

    `lower`/`upper` override the structural variable bounds when given; this
    is how callers fix binaries without rebuilding the model.
    """
    core = CompiledLP(model)
    lo, hi = model.bounds_arrays()
    if lower is not None:
        lo = np.asarray(lower, dtype=float)
    if upper is not None:
        hi = np.asarray(upper, dtype=float)
    res = solve_compiled(core, lo, hi, iteration_limit)
    return MILPSolution(
        status=res.status,
        values=res.x,
        objective=res.objective,
        nodes_explored=0,
        lp_iterations=res.iterations,
    )
