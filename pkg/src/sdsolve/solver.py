"""Two-phase dual-scaling solver.

Phase A runs an infeasible-start dual method on the simplified homogeneous
self-dual embedding: iterates (y, tau, kappa, S) carry an explicit dual
residual R = C*tau - A*(y) - S that is driven to zero while staying in the
cone, with infeasibility certified through the homogenizing pair
(tau, kappa).  Once the residual is negligible the iterate is rescaled by
tau and Phase B applies feasible dual scaling guided by a potential
function until the duality gap closes.

Each outer iteration assembles the Schur complement once and reuses its
factorization for several corrector rounds; every round recomputes the
auxiliary right-hand sides at the fresh iterate, takes a damped Newton
step, updates the best primal bound from the recovered candidates and
re-targets the barrier parameter.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import kkt, linalg, presolve as presolve_mod, recovery
from .model import SdpProblem

MU_FLOOR = 1e-18
MIN_STEP = 1e-10


class Status(Enum):
    CONTINUE = "Continue"
    SWITCH_PHASE_B = "SwitchPhaseB"
    OPTIMAL = "Optimal"
    DUAL_INFEASIBLE = "PrimalUnboundedDualInfeasible"
    PRIMAL_INFEASIBLE = "PrimalInfeasibleDualUnbounded"
    STALLED = "Stalled"
    ITER_LIMIT = "IterLimit"
    TIME_LIMIT = "TimeLimit"
    FAILED = "Failed"


INFEASIBLE_STATUSES = (Status.DUAL_INFEASIBLE, Status.PRIMAL_INFEASIBLE)


class StepTooSmall(RuntimeError):
    """Ratio test returned a numerically vanishing step."""


@dataclass
class Params:
    """Solver configuration.

    rho divides the gap when re-targeting the barrier parameter; theta
    weights the dual residual in that update.  eps_opt/eps_feas are the
    optimality and feasibility tolerances, eps_inf the infeasibility
    threshold.  init_exponent p sets the initial slack S = C + 10^p ||C|| I.
    """

    rho: float = 4.0
    theta: float = 1e8
    eps_opt: float = 5e-6
    eps_feas: float = 5e-6
    eps_inf: float = 1e-8
    step_fraction: float = 0.95
    init_exponent: int = 3
    corrector_rounds: int = 4
    max_iters: int = 500
    time_limit_seconds: float = 3600.0
    kappa_mem: float = 3.0
    kkt_mode: str = "direct"  # "direct" | "pcg"
    mu_switch_factor: float = 1e-3
    skip_phase_b: bool = False
    presolve: bool = True
    initial_primal_bound: float | None = None
    y_bound: float = 1e7
    use_y_bound: bool = False

    def __post_init__(self):
        if not 0.0 < self.step_fraction < 1.0:
            raise ValueError("step_fraction must lie in (0, 1)")
        if self.rho <= 1.0:
            raise ValueError("rho must exceed 1")
        for name in ("eps_opt", "eps_feas", "eps_inf"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")


@dataclass
class DualIterate:
    """Dual point of the embedding with factored slack blocks."""

    y: np.ndarray
    tau: float
    kappa: float
    mu: float
    mu0: float
    S_blocks: list
    S_factors: list
    R_blocks: list | None  # None encodes an exactly feasible iterate
    z: float = np.inf  # best certified primal objective bound
    best: recovery.PrimalCandidate | None = None

    def r_norm(self) -> float:
        if self.R_blocks is None:
            return 0.0
        total = 0.0
        for R in self.R_blocks:
            total += float(np.sum(np.square(R)))
        return float(np.sqrt(total))

    def logdet(self) -> float:
        total = 0.0
        for f in self.S_factors:
            if isinstance(f, np.ndarray):
                total += float(np.sum(np.log(f)))
            else:
                total += linalg.logdet(f)
        return total


@dataclass
class NewtonDirections:
    """Directions of the damped embedding Newton system.

    dy1..dy4 are the four normal-equation solves (against b, A S^{-1},
    A S^{-1} R S^{-1} and A S^{-1} C S^{-1}); ``at_gamma`` assembles the
    (dy, dtau) pair for any damping factor from the cached scalar
    elimination coefficients.
    """

    dy1: np.ndarray
    dy2: np.ndarray
    dy3: np.ndarray
    dy4: np.ndarray
    h0: np.ndarray  # (tau/mu) dy1 - dy2
    w: np.ndarray  # dy1/mu + dy4
    g: np.ndarray  # -b + mu * asinv_csinv
    denom: float
    rhs2_base: float
    c3: float
    mu: float
    tau: float
    gamma: float = 1.0
    alpha: float = np.nan
    alpha_c: float = np.nan
    dy: np.ndarray | None = None
    dtau: float = 0.0
    dkappa: float = 0.0
    dS: list | None = None

    def at_gamma(self, gamma: float):
        h = self.h0 + gamma * self.dy3
        dtau = (self.rhs2_base + gamma * self.mu * self.c3
                - float(self.g @ h)) / self.denom
        dy = h + dtau * self.w
        return dy, dtau


@dataclass
class SolveResult:
    name: str
    status: Status
    primal_obj: float
    dual_obj: float
    X: list | None
    y: np.ndarray
    S: list
    dimacs: np.ndarray
    iterations: int
    phase_a_iterations: int
    phase_b_iterations: int
    time_seconds: float
    mu: float
    notes: tuple = ()


# ---------------------------------------------------------------------------
# block utilities


def factor_blocks(problem: SdpProblem, S_blocks) -> list:
    """Cholesky per dense block; diagonal blocks are their own factor after
    a positivity check."""
    factors = []
    for k in range(problem.nblocks):
        if problem.is_diag(k):
            s = S_blocks[k]
            bad = np.nonzero(s <= 0.0)[0]
            if bad.size:
                raise linalg.NotPositiveDefinite(int(bad[0]) + 1)
            factors.append(s)
        else:
            factors.append(linalg.cholesky(S_blocks[k]))
    return factors


def max_step_blocks(problem: SdpProblem, S_factors, dS_blocks) -> float:
    alpha = np.inf
    for k in range(problem.nblocks):
        if problem.is_diag(k):
            alpha = min(alpha, linalg.max_step_diag(S_factors[k], dS_blocks[k]))
        else:
            alpha = min(alpha, linalg.max_step_lanczos(S_factors[k], dS_blocks[k]))
    return alpha


def _combine(problem: SdpProblem, parts) -> list:
    """Sum per-block lists of (coefficient, blocks) pairs."""
    out = []
    for k in range(problem.nblocks):
        acc = None
        for coef, blocks in parts:
            if coef == 0.0 or blocks is None:
                continue
            term = coef * blocks[k]
            acc = term if acc is None else acc + term
        if acc is None:
            dim = abs(problem.blocks[k])
            acc = np.zeros(dim) if problem.is_diag(k) else np.zeros((dim, dim))
        out.append(acc)
    return out


def _c_blocks(problem: SdpProblem) -> list:
    return problem.objective_blocks()


def _ds_blocks(problem: SdpProblem, R_blocks, adj_dy, c_blocks, dtau: float,
               gamma: float) -> list:
    return _combine(problem, [(gamma, R_blocks), (-1.0, adj_dy), (dtau, c_blocks)])


# ---------------------------------------------------------------------------
# operations


def initialize(problem: SdpProblem, params: Params) -> DualIterate:
    """Start from y = 0, tau = kappa = 1 and S = C + 10^p ||C|| I, which
    leaves the dual residual a negative multiple of the identity."""
    cnorm = problem.c_norm()
    shift = 10.0 ** params.init_exponent * (cnorm if cnorm > 0 else 1.0)
    c_blocks = _c_blocks(problem)
    S_blocks, R_blocks = [], []
    for k in range(problem.nblocks):
        if problem.is_diag(k):
            S_blocks.append(c_blocks[k] + shift)
            R_blocks.append(np.full(abs(problem.blocks[k]), -shift))
        else:
            n = abs(problem.blocks[k])
            S_blocks.append(c_blocks[k] + shift * np.eye(n))
            R_blocks.append(-shift * np.eye(n))
    factors = factor_blocks(problem, S_blocks)
    n_total = problem.total_dim
    r_norm = shift * np.sqrt(n_total)
    mu0 = (n_total * 10.0 ** params.init_exponent + params.theta * r_norm) \
        / (params.rho * n_total)
    z = params.initial_primal_bound if params.initial_primal_bound is not None \
        else np.inf
    return DualIterate(y=np.zeros(problem.m), tau=1.0, kappa=1.0, mu=mu0,
                       mu0=mu0, S_blocks=S_blocks, S_factors=factors,
                       R_blocks=R_blocks, z=z)


def newton_embedding(problem: SdpProblem, iterate: DualIterate,
                     schur: kkt.SchurSystem, gamma: float,
                     params: Params | None = None) -> NewtonDirections:
    """Solve the four normal systems and eliminate dy to get the scalar
    equation for dtau; assemble the directions at the requested damping."""
    params = params or Params()
    aux = schur.aux
    mu, tau = iterate.mu, iterate.tau
    b = problem.b
    mode = params.kkt_mode
    dy1 = kkt.solve_normal(schur, b, mode)
    dy2 = kkt.solve_normal(schur, aux.asinv, mode)
    if iterate.R_blocks is not None and aux.rsinv_rsinv != 0.0:
        dy3 = kkt.solve_normal(schur, aux.asinv_rsinv, mode)
    else:
        dy3 = np.zeros(problem.m)
    dy4 = kkt.solve_normal(schur, aux.asinv_csinv, mode)
    g = -b + mu * aux.asinv_csinv
    w = dy1 / mu + dy4
    h0 = (tau / mu) * dy1 - dy2
    denom = float(g @ w) - mu * (aux.csinvcsinv + tau ** -2)
    if abs(denom) < 1e-300:
        denom = -1e-300
    bty = float(b @ iterate.y)
    rhs2_base = bty - mu / tau - mu * aux.csinv
    dirs = NewtonDirections(dy1=dy1, dy2=dy2, dy3=dy3, dy4=dy4, h0=h0, w=w,
                            g=g, denom=denom, rhs2_base=rhs2_base,
                            c3=aux.csinv_rsinv, mu=mu, tau=tau, gamma=gamma)
    dy, dtau = dirs.at_gamma(gamma)
    dirs.dy, dirs.dtau = dy, dtau
    dirs.dkappa = mu / tau - iterate.kappa - mu / tau ** 2 * dtau
    c_blocks = _c_blocks(problem)
    dirs.dS = _ds_blocks(problem, iterate.R_blocks, problem.adjoint_map(dy),
                         c_blocks, dtau, gamma)
    return dirs


def choose_step(problem: SdpProblem, iterate: DualIterate,
                schur: kkt.SchurSystem, directions: NewtonDirections,
                params: Params):
    """Three-stage step selection: a line search on the damping-independent
    centering direction, the largest damping factor that keeps the cone,
    then the ratio test on the full direction.  Returns (gamma, alpha_c,
    alpha) with the undamped alpha; the caller applies step_fraction."""
    c_blocks = _c_blocks(problem)
    adj2 = problem.adjoint_map(directions.dy2)
    dS_c = _combine(problem, [(1.0, adj2)])
    alpha_cap = max_step_blocks(problem, iterate.S_factors, dS_c)
    alpha_c = 1.0 if np.isinf(alpha_cap) else min(1.0, 0.95 * alpha_cap)
    base_logdet = iterate.logdet()
    trial_factors = None
    for _ in range(20):
        trial = _combine(problem, [(1.0, iterate.S_blocks), (alpha_c, dS_c)])
        try:
            trial_factors = factor_blocks(problem, trial)
        except linalg.NotPositiveDefinite:
            alpha_c *= 0.5
            continue
        ld = sum(float(np.sum(np.log(f))) if isinstance(f, np.ndarray)
                 else linalg.logdet(f) for f in trial_factors)
        if ld >= base_logdet:
            break
        alpha_c *= 0.5
    if trial_factors is None:
        raise StepTooSmall("centering direction never factorizable")

    if iterate.R_blocks is None:
        gamma = 1.0
    else:
        adj3 = problem.adjoint_map(directions.dy3)
        dS_r = _combine(problem, [(1.0, iterate.R_blocks), (-1.0, adj3)])
        step_r = _combine(problem, [(alpha_c, dS_r)])
        gamma_cap = max_step_blocks(problem, trial_factors, step_r)
        gamma = min(1.0, gamma_cap)

    dy, dtau = directions.at_gamma(gamma)
    adj = problem.adjoint_map(dy)
    dS = _ds_blocks(problem, iterate.R_blocks, adj, c_blocks, dtau, gamma)
    alpha = max_step_blocks(problem, iterate.S_factors, dS)
    if dtau < 0:
        alpha = min(alpha, iterate.tau / -dtau)
    dkappa = directions.mu / iterate.tau - iterate.kappa \
        - directions.mu / iterate.tau ** 2 * dtau
    if dkappa < 0:
        alpha = min(alpha, iterate.kappa / -dkappa)
    alpha = min(1.0, alpha)
    if alpha < MIN_STEP:
        raise StepTooSmall(f"ratio test returned alpha={alpha:.2e}")
    directions.gamma = gamma
    directions.alpha = alpha
    directions.alpha_c = alpha_c
    directions.dy, directions.dtau, directions.dS = dy, dtau, dS
    directions.dkappa = dkappa
    return gamma, alpha_c, alpha


def update_iterate(problem: SdpProblem, iterate: DualIterate,
                   directions: NewtonDirections, params: Params) -> DualIterate:
    """Apply the damped step; the residual is transported exactly and the
    slack recomputed from its definition, then refactored."""
    c_blocks = _c_blocks(problem)
    alpha = directions.alpha
    for _ in range(10):
        s = params.step_fraction * alpha
        y_new = iterate.y + s * directions.dy
        tau_new = iterate.tau + s * directions.dtau
        if iterate.R_blocks is None:
            R_new = None
        else:
            fade = 1.0 - s * directions.gamma
            R_new = [fade * R for R in iterate.R_blocks]
        adj = problem.adjoint_map(y_new)
        S_new = _combine(problem, [(tau_new, c_blocks), (-1.0, adj),
                                   (-1.0, R_new)])
        try:
            factors = factor_blocks(problem, S_new)
        except linalg.NotPositiveDefinite:
            alpha *= 0.5
            if alpha < MIN_STEP:
                break
            continue
        kappa_new = max(iterate.kappa + s * directions.dkappa, 1e-30)
        return DualIterate(y=y_new, tau=tau_new, kappa=kappa_new,
                           mu=iterate.mu, mu0=iterate.mu0, S_blocks=S_new,
                           S_factors=factors, R_blocks=R_new, z=iterate.z,
                           best=iterate.best)
    raise StepTooSmall("step rejected by slack factorization")


def update_mu(iterate: DualIterate, params: Params, n_total: int,
              bty: float, alpha: float | None = None,
              gamma: float | None = None) -> float:
    """Barrier re-targeting from the gap and the residual weight, with the
    step-quality heuristics."""
    if np.isfinite(iterate.z):
        gap = iterate.z * iterate.tau - bty
    else:
        gap = params.rho * n_total * iterate.mu
    mu_new = (gap + params.theta * iterate.r_norm()) / (params.rho * n_total)
    if alpha is not None and gamma is not None:
        if alpha >= 0.6 and gamma >= 0.9:
            mu_new /= params.rho
        if alpha < 0.1:
            mu_new = max(mu_new, iterate.mu)
    return max(mu_new, MU_FLOOR)


def check_status(problem: SdpProblem, iterate: DualIterate, params: Params,
                 directions: NewtonDirections | None = None) -> Status:
    """Phase A classification: switch to the feasible phase, certify an
    infeasibility direction, or continue."""
    r_norm = iterate.r_norm()
    cnorm = problem.c_norm()
    eps_f = params.eps_inf
    bty = float(problem.b @ iterate.y)
    if (r_norm > eps_f * iterate.tau
            and iterate.tau / iterate.kappa < eps_f
            and iterate.mu / iterate.mu0 <= eps_f ** 2):
        return Status.DUAL_INFEASIBLE
    if bty > 1.0 / eps_f and directions is not None and directions.dy is not None:
        if recovery.verify_dual_ray(problem, directions.dy):
            return Status.PRIMAL_INFEASIBLE
        if recovery.verify_dual_ray(problem, iterate.y):
            return Status.PRIMAL_INFEASIBLE
    if (r_norm <= params.eps_feas * iterate.tau * (1.0 + cnorm)
            and iterate.mu <= iterate.mu0 * params.mu_switch_factor):
        return Status.SWITCH_PHASE_B
    return Status.CONTINUE


def _potential(iterate: DualIterate, rho_pot: float, bty: float) -> float:
    gap = max(iterate.z * iterate.tau - bty, 1e-300)
    return rho_pot * np.log(gap) - iterate.logdet()


def phase_b_step(problem: SdpProblem, iterate: DualIterate, params: Params,
                 plan: kkt.RowPlan, c_blocks, n_total: int):
    """One feasible dual-scaling outer iteration (with corrector rounds):
    M dy = b/mu - A S^{-1}, ratio test, potential-guarded damped step,
    primal bound update, barrier update."""
    schur = kkt.assemble_schur(problem, iterate.S_factors, None, plan=plan)
    rho_pot = n_total + np.sqrt(n_total)
    rounds = 0
    for rnd in range(max(params.corrector_rounds, 1)):
        aux = schur.aux if rnd == 0 else kkt.compute_aux(
            problem, iterate.S_factors, None)
        mu = iterate.mu
        dy1 = kkt.solve_normal(schur, problem.b, params.kkt_mode)
        dy2 = kkt.solve_normal(schur, aux.asinv, params.kkt_mode)
        dy = dy1 / mu - dy2
        adj_dy = problem.adjoint_map(dy)
        # primal candidate at the current point, before stepping
        W = _combine(problem, [(1.0, iterate.S_blocks), (1.0, adj_dy)])
        cand_ok = True
        try:
            wf = factor_blocks(problem, W)
        except linalg.NotPositiveDefinite:
            cand_ok = False
        if cand_ok:
            zbar = float(problem.b @ iterate.y) + n_total * mu \
                + mu * float(aux.asinv @ dy)
            if zbar < iterate.z:
                X = []
                for k in range(problem.nblocks):
                    if problem.is_diag(k):
                        X.append(mu * W[k] / np.square(iterate.S_factors[k]))
                    else:
                        T = linalg.factor_solve(iterate.S_factors[k], W[k])
                        Xk = linalg.factor_solve(iterate.S_factors[k], T.T).T
                        X.append(mu * 0.5 * (Xk + Xk.T))
                iterate.z = zbar
                iterate.best = recovery.PrimalCandidate(
                    X=X, source="backward_newton", psd_certified=True,
                    obj=zbar, scale=1.0)
                del wf
        dS = _combine(problem, [(-1.0, adj_dy)])
        alpha = min(1.0, max_step_blocks(problem, iterate.S_factors, dS))
        if alpha < MIN_STEP:
            raise StepTooSmall("phase B ratio test vanished")
        bty = float(problem.b @ iterate.y)
        pot0 = _potential(iterate, rho_pot, bty) if np.isfinite(iterate.z) else None
        stepped = None
        s = params.step_fraction * alpha
        for _ in range(10):
            y_new = iterate.y + s * dy
            adj = problem.adjoint_map(y_new)
            S_new = _combine(problem, [(1.0, c_blocks), (-1.0, adj)])
            try:
                factors = factor_blocks(problem, S_new)
            except linalg.NotPositiveDefinite:
                s *= 0.5
                continue
            cand = DualIterate(y=y_new, tau=1.0, kappa=iterate.kappa,
                               mu=iterate.mu, mu0=iterate.mu0,
                               S_blocks=S_new, S_factors=factors,
                               R_blocks=None, z=iterate.z, best=iterate.best)
            if pot0 is not None:
                pot1 = _potential(cand, rho_pot, float(problem.b @ y_new))
                if pot1 > pot0 + 1e-12:
                    s *= 0.5
                    continue
            stepped = cand
            break
        if stepped is None:
            raise StepTooSmall("phase B potential backtracking failed")
        iterate = stepped
        rounds += 1
        bty = float(problem.b @ iterate.y)
        iterate.mu = update_mu(iterate, params, n_total, bty,
                               alpha=alpha, gamma=1.0)
        gap = iterate.z - bty
        if np.isfinite(iterate.z) and gap <= params.eps_opt * (
                1.0 + abs(iterate.z) + abs(bty)):
            return iterate, Status.OPTIMAL, rounds
    return iterate, Status.CONTINUE, rounds


def _rescale_to_feasible(problem: SdpProblem, iterate: DualIterate,
                         c_blocks) -> DualIterate | None:
    """Drop the residual and renormalize by tau; None if the rescaled slack
    loses positive definiteness."""
    tau = iterate.tau
    y_new = iterate.y / tau
    adj = problem.adjoint_map(y_new)
    S_new = _combine(problem, [(1.0, c_blocks), (-1.0, adj)])
    try:
        factors = factor_blocks(problem, S_new)
    except linalg.NotPositiveDefinite:
        return None
    return DualIterate(y=y_new, tau=1.0, kappa=iterate.kappa, mu=iterate.mu,
                       mu0=iterate.mu0, S_blocks=S_new, S_factors=factors,
                       R_blocks=None, z=iterate.z, best=iterate.best)


def solve(problem: SdpProblem, params: Params | None = None) -> SolveResult:
    """Presolve, Phase A to feasibility or an infeasibility certificate,
    Phase B to optimality, then primal recovery and the quality report."""
    params = params or Params()
    t0 = time.perf_counter()
    original = problem
    notes: list[str] = []
    scale = 1.0
    if params.presolve:
        problem, info = presolve_mod.presolve(problem)
        scale = info.objective_scale
        lmax_c = None
        if info.flags.implied_trace is not None:
            lmax_c = max(
                (linalg.min_eigenvalue(-cb) * -1.0 if not problem.is_diag(k)
                 else float(np.max(cb, initial=0.0))
                 for k, cb in enumerate(_c_blocks(problem))),
                default=0.0)
        params, adj_notes = presolve_mod.apply_structure_params(
            info.flags, params, lmax_c)
        notes.extend(adj_notes)
    n_total = problem.total_dim
    c_blocks = _c_blocks(problem)
    plan = kkt.plan_for_problem(problem, params.kappa_mem)
    iterate = initialize(problem, params)
    status = Status.CONTINUE
    iters_a = iters_b = 0
    stalls = 0

    def out_of_budget():
        if time.perf_counter() - t0 > params.time_limit_seconds:
            return Status.TIME_LIMIT
        if iters_a + iters_b >= params.max_iters:
            return Status.ITER_LIMIT
        return None

    # Phase A
    while status is Status.CONTINUE:
        limit = out_of_budget()
        if limit is not None:
            status = limit
            break
        schur = kkt.assemble_schur(problem, iterate.S_factors,
                                   iterate.R_blocks, plan=plan)
        directions = None
        for rnd in range(max(params.corrector_rounds, 1)):
            if rnd > 0:
                schur.aux = kkt.compute_aux(problem, iterate.S_factors,
                                            iterate.R_blocks)
            try:
                directions = newton_embedding(problem, iterate, schur, 1.0,
                                              params)
                choose_step(problem, iterate, schur, directions, params)
            except (StepTooSmall, linalg.Singular):
                stalls += 1
                directions = None
                break
            cand = recovery.recover_backward(problem, iterate, directions,
                                             iterate.mu)
            if cand.psd_certified and cand.obj < iterate.z:
                iterate.z = cand.obj
                iterate.best = cand
            try:
                iterate = update_iterate(problem, iterate, directions, params)
            except StepTooSmall:
                stalls += 1
                break
            stalls = 0
            bty = float(problem.b @ iterate.y)
            iterate.mu = update_mu(iterate, params, n_total, bty,
                                   alpha=directions.alpha,
                                   gamma=directions.gamma)
            status = check_status(problem, iterate, params, directions)
            if status is not Status.CONTINUE:
                break
        iters_a += 1
        if stalls >= 2:
            status = Status.STALLED
        if status is Status.SWITCH_PHASE_B:
            rescaled = _rescale_to_feasible(problem, iterate, c_blocks)
            if rescaled is None:
                # residual still matters; tighten and keep embedding
                params = params.__class__(**{**params.__dict__,
                                             "eps_feas": params.eps_feas * 0.1})
                status = Status.CONTINUE
                continue
            iterate = rescaled
            break

    # Phase B
    if status is Status.SWITCH_PHASE_B:
        if params.skip_phase_b:
            status = Status.OPTIMAL
        else:
            status = Status.CONTINUE
            while status is Status.CONTINUE:
                limit = out_of_budget()
                if limit is not None:
                    status = limit
                    break
                try:
                    iterate, status, rounds = phase_b_step(
                        problem, iterate, params, plan, c_blocks, n_total)
                except (StepTooSmall, linalg.Singular):
                    status = Status.STALLED
                    break
                iters_b += 1

    return _finalize(original, problem, iterate, status, scale, t0,
                     iters_a, iters_b, tuple(notes), params)


def _finalize(original: SdpProblem, solved: SdpProblem, iterate: DualIterate,
              status: Status, scale: float, t0: float, iters_a: int,
              iters_b: int, notes, params: Params) -> SolveResult:
    elapsed = time.perf_counter() - t0
    tau = iterate.tau
    y = scale * iterate.y / tau
    S = [scale * s / tau for s in iterate.S_blocks]
    X = iterate.best.X if iterate.best is not None else None
    if status in INFEASIBLE_STATUSES:
        dimacs = np.ones(6)
        primal_obj = np.nan
        dual_obj = scale * float(solved.b @ iterate.y)
        X = None
    else:
        dimacs = recovery.dimacs_errors(original, X, y, S)
        primal_obj = scale * iterate.best.obj if iterate.best is not None else np.nan
        dual_obj = float(original.b @ y)
        if status is Status.OPTIMAL and np.any(np.abs(dimacs) > 1e-2):
            status = Status.FAILED
    return SolveResult(name=original.name, status=status,
                       primal_obj=primal_obj, dual_obj=dual_obj, X=X, y=y,
                       S=S, dimacs=dimacs, iterations=iters_a + iters_b,
                       phase_a_iterations=iters_a, phase_b_iterations=iters_b,
                       time_seconds=elapsed, mu=iterate.mu, notes=notes)
