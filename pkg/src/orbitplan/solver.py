"""Max-min design solver.

The nonsmooth objective ``max min_k y_k(p)`` is solved exactly through its
epigraph: maximize ``t`` subject to ``y_k(p) - t >= 0``. Each local solve is
a Powell-Hestenes-Rockafellar augmented Lagrangian over the scaled box, with
a bound-constrained quasi-Newton inner minimizer and central finite
differences for derivatives. A closing Gauss-Newton pass restores feasibility
of equalities to tight tolerances. ``solve_maxmin`` fans local solves out
over deterministic starts.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import minimize

from .constraints import Bounds, ConstraintSet, apply_collision_policy, unscale

log = logging.getLogger(__name__)


class NoFeasibleSolutionError(RuntimeError):
    def __init__(self, message: str, report: "SolveReport"):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class Evaluation:
    """Raw objective components plus collision distances for one parameter vector."""

    values: np.ndarray
    d_min: Optional[float] = None
    d_smooth: Optional[float] = None


@dataclass
class Problem:
    """Maximize ``min(evaluate(p).values)`` over ``bounds`` subject to ``constraints``.

    ``evaluate`` may return an :class:`Evaluation` or a bare array of
    components. ``objective_scale`` divides the components inside the solver
    only; reports stay in physical units.
    """

    evaluate: Callable[[np.ndarray], object]
    bounds: Bounds
    constraints: Optional[ConstraintSet] = None
    objective_scale: float = 1.0
    scaled: bool = True
    shape: Optional[tuple[int, ...]] = None

    def __post_init__(self):
        if self.constraints is None:
            self.constraints = ConstraintSet(len(self.bounds))
        if self.constraints.n_params != len(self.bounds):
            raise ValueError("constraint set and bounds disagree on the parameter count")
        if not self.objective_scale > 0:
            raise ValueError("objective_scale must be positive")

    @property
    def collision_mode(self) -> Optional[str]:
        col = self.constraints.collision
        return None if col is None else col.mode

    def evaluation(self, p) -> Evaluation:
        out = self.evaluate(np.asarray(p, dtype=float))
        if not isinstance(out, Evaluation):
            out = Evaluation(np.atleast_1d(np.asarray(out, dtype=float)))
        return out

    def components(self, ev: Evaluation) -> np.ndarray:
        """Objective components after the collision policy."""
        values = np.asarray(ev.values, dtype=float).ravel()
        col = self.constraints.collision
        if col is not None and ev.d_min is not None:
            values = apply_collision_policy(values, ev.d_min, col.tr_km, col.mode)
        return values

    def objective(self, p) -> float:
        return float(np.min(self.components(self.evaluation(p))))

    def max_violation(self, p, ev: Optional[Evaluation] = None) -> float:
        ev = ev or self.evaluation(p)
        return self.constraints.max_violation(p, ev.d_min)


@dataclass(frozen=True)
class EpigraphProblem:
    """``maximize t`` over ``(p, t)`` with ``y_k(p) - t >= 0`` for every component."""

    base: Problem

    def residuals(self, p, t: float) -> np.ndarray:
        return self.base.components(self.base.evaluation(p)) - t

    def t_star(self, p) -> float:
        """Largest feasible ``t`` at ``p``, equal to ``min y(p)``."""
        return self.base.objective(p)


def epigraph_reformulate(prob: Problem) -> EpigraphProblem:
    return EpigraphProblem(prob)


@dataclass(frozen=True)
class SolverOptions:
    tol_kkt: float = 1e-6
    tol_feas: float = 1e-8
    max_iter: int = 500          # inner quasi-Newton iterations, summed over outer loops
    max_outer: int = 200         # multiplier / penalty updates
    inner_iter: int = 100
    fd_step: float = 1e-6
    rho0: float = 10.0
    rho_growth: float = 10.0
    rho_max: float = 1e10
    restore_iter: int = 30


@dataclass
class LocalResult:
    p_final: np.ndarray
    x_final: np.ndarray
    objective_final: float
    max_violation: float
    feasible: bool
    termination: str
    iterations: int
    n_evaluations: int
    start_objective: float
    history: list = field(default_factory=list)   # (iteration, objective, max_violation)
    start_index: int = 0


@dataclass
class SolveReport:
    best: Optional[LocalResult]
    results: list
    seed: int
    n_starts: int
    wall_time: float = 0.0

    @property
    def n_evaluations(self) -> int:
        return sum(r.n_evaluations for r in self.results)

    @property
    def feasible_results(self) -> list:
        return [r for r in self.results if r.feasible]


class _Model:
    """Scaled, normalized view of a Problem for one local solve.

    Works on the free coordinates ``x`` of the (optionally scaled) vector;
    steep residuals are divided by their gradient norms at the start point.
    """

    def __init__(self, prob: Problem, opts: SolverOptions, x0_full: np.ndarray):
        self.prob = prob
        self.opts = opts
        b = prob.bounds
        self.free = np.flatnonzero(b.free)
        if prob.scaled:
            self.c0 = b.lower.copy()
            self.c1 = np.where(b.fixed, 0.0, b.width)
            self.lo = np.zeros(len(b))
            self.hi = np.ones(len(b))
        else:
            self.c0 = np.zeros(len(b))
            self.c1 = np.ones(len(b))
            self.lo = b.lower.copy()
            self.hi = b.upper.copy()
        self.x_full = np.clip(np.asarray(x0_full, dtype=float), self.lo, self.hi)
        self.xlo = self.lo[self.free]
        self.xhi = self.hi[self.free]
        cons = prob.constraints
        self.cons = cons
        self.A_eq = cons.linear_eq.A[:, self.free] * self.c1[self.free]
        self.A_in = cons.linear_ineq.A[:, self.free] * self.c1[self.free]
        self.collide = cons.collision is not None and cons.collision.mode == "constraint"
        self.n_eval = 0
        self._cache: dict[bytes, dict] = {}
        x0 = self.x_full[self.free]
        self.s_eq = np.ones(len(cons.linear_eq) + sum(len(c) for c in cons.nonlinear_eq))
        self.s_in = np.ones(len(cons.linear_ineq) + sum(len(c) for c in cons.nonlinear_ineq)
                            + int(self.collide))
        self._set_scales(x0)

    # -- mapping --
    def p_of(self, x: np.ndarray) -> np.ndarray:
        full = self.x_full.copy()
        full[self.free] = x
        return self.c0 + self.c1 * full

    def full_of(self, x: np.ndarray) -> np.ndarray:
        full = self.x_full.copy()
        full[self.free] = x
        return full

    # -- evaluation --
    def point(self, x: np.ndarray) -> dict:
        key = x.tobytes()
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        p = self.p_of(x)
        ev = self.prob.evaluation(p)
        self.n_eval += 1
        comps = self.prob.components(ev)
        cons = self.cons
        eq = [cons.linear_eq.residual(p)] + [c.residual(p) for c in cons.nonlinear_eq]
        ineq = [cons.linear_ineq.residual(p)] + [c.residual(p) for c in cons.nonlinear_ineq]
        if self.collide:
            if ev.d_min is None:
                raise ValueError("constraint-mode collision needs distances from the evaluator")
            d = ev.d_smooth if ev.d_smooth is not None else ev.d_min
            tr = cons.collision.tr_km
            ineq.append(np.array([(tr - d) / tr]))
        out = {
            "p": p,
            "ev": ev,
            "components": comps,
            "y": comps / self.prob.objective_scale,
            "eq_raw": np.concatenate(eq),
            "in_raw": np.concatenate(ineq),
        }
        if len(self._cache) > 4096:
            self._cache.clear()
        self._cache[key] = out
        return out

    def residuals(self, x):
        pt = self.point(x)
        return pt["y"], pt["eq_raw"] * self.s_eq, pt["in_raw"] * self.s_in

    def jacobians(self, x):
        """Central-difference Jacobians of (y, eq, ineq); one-sided at the box faces."""
        y0, e0, i0 = self.residuals(x)
        n = x.size
        Jy = np.empty((y0.size, n))
        Je = np.empty((e0.size, n))
        Ji = np.empty((i0.size, n))
        h = self.opts.fd_step * np.maximum(1.0, np.abs(x))
        for k in range(n):
            up = x[k] + h[k] <= self.xhi[k]
            dn = x[k] - h[k] >= self.xlo[k]
            xp = x.copy()
            xm = x.copy()
            if up and dn:
                xp[k] += h[k]
                xm[k] -= h[k]
                denom = 2.0 * h[k]
            elif up:
                xp[k] += h[k]
                denom = h[k]
            else:
                xm[k] -= h[k]
                denom = h[k]
            yp, ep, ip = self.residuals(xp)
            ym, em, im = self.residuals(xm)
            Jy[:, k] = (yp - ym) / denom
            Je[:, k] = (ep - em) / denom
            Ji[:, k] = (ip - im) / denom
        # linear rows are exact
        n_le, n_li = len(self.cons.linear_eq), len(self.cons.linear_ineq)
        Je[:n_le] = self.A_eq * self.s_eq[:n_le, None]
        Ji[:n_li] = self.A_in * self.s_in[:n_li, None]
        return y0, e0, i0, Jy, Je, Ji

    def _set_scales(self, x0):
        _, _, _, _, Je, Ji = self.jacobians(x0)
        # only steep rows are scaled down; flat rows are never amplified
        self.s_eq = 1.0 / np.maximum(np.linalg.norm(Je, axis=1), 1.0)
        s_in = 1.0 / np.maximum(np.linalg.norm(Ji, axis=1), 1.0)
        if self.collide:
            s_in[-1] = 1.0
        self.s_in = s_in

    def violation(self, x) -> float:
        """Constraint violation in original units, collision judged on the exact distance."""
        pt = self.point(x)
        return self.cons.max_violation(pt["p"], pt["ev"].d_min)

    def objective(self, x) -> float:
        return float(np.min(self.point(x)["components"]))


def _projected_grad_norm(z, g, lo, hi) -> float:
    return float(np.max(np.abs(z - np.clip(z - g, lo, hi)))) if z.size else 0.0


def solve_local(prob: Problem, x0, opts: Optional[SolverOptions] = None,
                start_index: int = 0) -> LocalResult:
    """Local augmented-Lagrangian solve of the epigraph problem from a scaled start ``x0``."""
    opts = opts or SolverOptions()
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (len(prob.bounds),):
        raise ValueError(f"start must have length {len(prob.bounds)}")
    model = _Model(prob, opts, x0)
    x = model.x_full[model.free].copy()
    pt0 = model.point(x)
    start_obj = model.objective(x)
    if not np.isfinite(start_obj):
        raise ValueError("objective evaluation failed at the start point")

    best = {"x": None, "obj": -np.inf, "viol": np.inf}
    history: list = []

    def consider(xc, it):
        obj = model.objective(xc)
        viol = model.violation(xc)
        if viol < opts.tol_feas and obj > best["obj"]:
            best.update(x=xc.copy(), obj=obj, viol=viol)
        if best["x"] is not None:
            history.append((it, best["obj"], best["viol"]))
        else:
            history.append((it, obj, viol))

    consider(x, 0)

    K = pt0["y"].size
    n_eq = model.s_eq.size
    n_in = model.s_in.size
    lam = np.zeros(n_eq)
    mu_epi = np.full(K, 1.0 / K)
    mu_in = np.zeros(n_in)
    rho = opts.rho0
    t = float(np.min(pt0["y"]))
    z = np.append(x, t)
    zlo = np.append(model.xlo, -np.inf)
    zhi = np.append(model.xhi, np.inf)
    lb = [(lo, hi) for lo, hi in zip(model.xlo, model.xhi)] + [(None, None)]

    def aug(zv):
        xv, tv = zv[:-1], zv[-1]
        y, ce, ci, Jy, Je, Ji = model.jacobians(xv)
        g_epi = tv - y
        s_epi = np.maximum(0.0, mu_epi + rho * g_epi)
        s_in = np.maximum(0.0, mu_in + rho * ci)
        val = (-tv + lam @ ce + 0.5 * rho * ce @ ce
               + (s_epi @ s_epi - mu_epi @ mu_epi) / (2.0 * rho)
               + (s_in @ s_in - mu_in @ mu_in) / (2.0 * rho))
        gx = (lam + rho * ce) @ Je - s_epi @ Jy + s_in @ Ji
        gt = -1.0 + s_epi.sum()
        return val, np.append(gx, gt)

    iters = 0
    termination = "max_outer"
    prev_viol = np.inf
    for outer in range(opts.max_outer):
        budget = opts.max_iter - iters
        if budget <= 0:
            termination = "max_iter"
            break
        inner = min(opts.inner_iter, budget)
        res = minimize(aug, z, jac=True, method="L-BFGS-B", bounds=lb,
                       options={"maxiter": inner, "maxfun": 2 * inner + 20,
                                "gtol": 0.1 * opts.tol_kkt, "ftol": 1e-15})
        iters += max(1, int(res.nit))
        z_new = res.x
        step = float(np.max(np.abs(z_new - z))) if z.size else 0.0
        z = z_new
        xv, tv = z[:-1], z[-1]
        y, ce, ci = model.residuals(xv)
        g_epi = tv - y
        kkt = _projected_grad_norm(z, res.jac, zlo, zhi)
        lam = lam + rho * ce
        mu_epi = np.maximum(0.0, mu_epi + rho * g_epi)
        mu_in = np.maximum(0.0, mu_in + rho * ci)
        internal = max([0.0, float(np.max(np.abs(ce), initial=0.0)),
                        float(np.max(g_epi, initial=0.0)), float(np.max(ci, initial=0.0))])
        consider(xv, iters)
        viol = model.violation(xv)
        log.debug("start %d outer %d: t=%.6g viol=%.3g kkt=%.3g rho=%.3g",
                  start_index, outer, tv, viol, kkt, rho)
        if viol < opts.tol_feas and internal < opts.tol_feas and kkt < opts.tol_kkt:
            termination = "converged"
            break
        if internal > 0.25 * prev_viol:
            rho = min(rho * opts.rho_growth, opts.rho_max)
        prev_viol = internal
        if step < 1e-14 and internal < opts.tol_feas:
            termination = "stalled"
            break

    x_fin = _restore(model, z[:-1], opts)
    consider(x_fin, iters)
    if best["x"] is not None:
        x_out, feasible = best["x"], True
    else:
        x_out, feasible = x_fin, False
        if termination == "converged":
            termination = "infeasible"
    obj = model.objective(x_out)
    viol = model.violation(x_out)
    return LocalResult(
        p_final=model.p_of(x_out),
        x_final=model.full_of(x_out),
        objective_final=obj,
        max_violation=viol,
        feasible=feasible,
        termination=termination if feasible else f"{termination}/infeasible",
        iterations=iters,
        n_evaluations=model.n_eval,
        start_objective=start_obj,
        history=history,
        start_index=start_index,
    )


def _restore(model: _Model, x: np.ndarray, opts: SolverOptions) -> np.ndarray:
    """Gauss-Newton min-norm corrections onto equalities and violated inequalities."""
    x = x.copy()
    viol = model.violation(x)
    for _ in range(opts.restore_iter):
        if viol < 1e-2 * opts.tol_feas:
            break
        _, ce, ci, _, Je, Ji = model.jacobians(x)
        active = ci > -1e-12
        r = np.concatenate([ce, ci[active]])
        J = np.vstack([Je, Ji[active]])
        if r.size == 0:
            break
        dx = np.linalg.lstsq(J, -r, rcond=None)[0]
        shrink = 1.0
        for _ in range(8):
            trial = np.clip(x + shrink * dx, model.xlo, model.xhi)
            v_trial = model.violation(trial)
            if v_trial < viol:
                break
            shrink *= 0.5
        else:
            break
        x, viol = trial, v_trial
    return x


# --- starts and multi-start ---

def start_rng(seed: int, start_index: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(start_index)])


def sample_feasible_start(bounds: Bounds, constraints: Optional[ConstraintSet],
                          rng: np.random.Generator) -> np.ndarray:
    """Uniform draw in the scaled box, projected onto the linear equalities, clipped."""
    free = np.flatnonzero(bounds.free)
    x = np.zeros(len(bounds))
    x[free] = rng.uniform(0.0, 1.0, size=free.size)
    if constraints is not None and len(constraints.linear_eq):
        rows = constraints.linear_eq
        A_x = rows.A[:, free] * bounds.width[free]
        p = unscale(x, bounds)
        r = rows.residual(p)
        corr, *_ = np.linalg.lstsq(A_x, r, rcond=None)
        x_proj = x.copy()
        x_proj[free] -= corr
        resid = rows.residual(unscale(x_proj, bounds))
        tol = 1e-8 * max(1.0, float(np.max(np.abs(rows.b), initial=0.0)))
        if np.max(np.abs(resid)) > tol:
            raise ValueError("linear equalities are inconsistent; no start can satisfy them")
        x = x_proj
    x[free] = np.clip(x[free], 0.0, 1.0)
    return x


def _rank_key(r: LocalResult):
    return (-r.objective_final, r.max_violation, r.start_index)


def solve_maxmin(prob: Problem, n_starts: int, seed: int = 0,
                 opts: Optional[SolverOptions] = None, workers: int = 1,
                 initial_points: Sequence = ()) -> SolveReport:
    """Best feasible local solution over sampled starts plus any supplied physical points.

    Sampled starts take indices ``0..n_starts-1``; ``initial_points`` follow.
    Results do not depend on ``workers``.
    """
    if n_starts < 1 and not initial_points:
        raise ValueError("n_starts must be at least 1")
    opts = opts or SolverOptions()
    starts = [sample_feasible_start(prob.bounds, prob.constraints, start_rng(seed, i))
              for i in range(n_starts)]
    for p in initial_points:
        p = np.asarray(p, dtype=float)
        if prob.scaled:
            width = np.where(prob.bounds.fixed, 1.0, prob.bounds.width)
            starts.append(np.where(prob.bounds.fixed, 0.0, (p - prob.bounds.lower) / width))
        else:
            starts.append(p)

    def run(i):
        return solve_local(prob, starts[i], opts, start_index=i)

    t0 = time.perf_counter()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, range(len(starts))))
    else:
        results = [run(i) for i in range(len(starts))]
    wall = time.perf_counter() - t0
    feasible = [r for r in results if r.feasible]
    best = min(feasible, key=_rank_key) if feasible else None
    report = SolveReport(best, results, int(seed), n_starts, wall)
    if best is None:
        raise NoFeasibleSolutionError(f"none of {len(starts)} starts reached a feasible point", report)
    return report


def finite_diff_check(fun: Callable[[np.ndarray], float], p, registered_gradient,
                      step: float = 1e-6) -> np.ndarray:
    """Per-component relative discrepancy between a supplied gradient and central differences."""
    p = np.asarray(p, dtype=float)
    g = np.asarray(registered_gradient, dtype=float)
    fd = np.empty_like(p)
    for k in range(p.size):
        h = step * max(1.0, abs(p[k]))
        e = np.zeros_like(p)
        e[k] = h
        fd[k] = (fun(p + e) - fun(p - e)) / (2.0 * h)
    return np.abs(g - fd) / np.maximum(np.abs(fd), np.finfo(float).tiny)
