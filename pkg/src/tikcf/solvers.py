"""Alternating-minimization optimizers over ``(w, u, v)``.

``run_online_optimizer`` cycles a GSVD-based w-update, a weighted-average
u-update, a multiplier-style v-update and an adaptive penalty increase.
``run_aux_optimizer`` performs exact block-coordinate descent on the
auxiliary objective. Both accept a :class:`ProblemInstance` (dense
operators); the online optimizer also accepts a :class:`DiagonalProblem`,
the elementwise form used per frequency bin by the tracker.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DimensionMismatch, InputError, ZeroDenominator
from .linalg import gsvd, tikhonov_solve_gsvd
from .objective import (
    ProblemInstance,
    SolverState,
    WeightConfig,
    auxiliary_objective,
    evaluate_loss,
    stack_operators,
)

MODES = ("online", "auxiliary")


@dataclass(frozen=True)
class SolverConfig:
    max_iter: int = 200
    tol_rel: float = 1e-6
    tol_coupling: float = 1e-6
    mode: str = "online"
    record_history: bool = True
    refine: bool = False

    def __post_init__(self):
        if int(self.max_iter) < 1:
            raise InputError("max_iter must be >= 1")
        if not (self.tol_rel > 0 and self.tol_coupling > 0):
            raise InputError("tolerances must be positive")
        if self.mode not in MODES:
            raise InputError(f"mode must be one of {MODES}, got {self.mode!r}")
        object.__setattr__(self, "max_iter", int(self.max_iter))


@dataclass
class SolveReport:
    final_state: SolverState
    iterations: int
    converged: bool
    loss_history: list = field(default_factory=list)
    coupling_history: list = field(default_factory=list)
    rho_history: list = field(default_factory=list)
    objective_history: list = field(default_factory=list)


@dataclass(frozen=True)
class DiagonalProblem:
    """Elementwise problem: every entry of ``a`` is an independent 1x1 operator.

    Per element the w-update minimizes::

        dw/2 |a g - b|^2 + spatial/2 * reg |l (g - w0)|^2
            + temporal/2 * sum(psi) |g - w0|^2 + mu/2 |g - u|^2 + nu |g|^2

    ``data_weight`` and ``reg_weight`` broadcast against ``a`` (e.g. one
    value per feature channel). Arrays may be complex.
    """

    a: np.ndarray
    b: np.ndarray
    w0: np.ndarray
    u0: Optional[np.ndarray] = None
    v0: Optional[np.ndarray] = None
    weights: WeightConfig = field(default_factory=WeightConfig)
    data_weight: object = 1.0
    l: Optional[np.ndarray] = None
    reg_weight: object = 1.0

    def __post_init__(self):
        a = np.asarray(self.a)
        shape = a.shape
        for name in ("b", "w0", "u0", "v0", "l"):
            val = getattr(self, name)
            if val is None:
                if name in ("u0", "v0"):
                    object.__setattr__(self, name, np.array(self.w0, copy=True))
                continue
            val = np.asarray(val)
            if val.shape != shape:
                raise DimensionMismatch(f"{name} has shape {val.shape}, expected {shape}")
            object.__setattr__(self, name, val)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "data_weight", np.asarray(self.data_weight, dtype=float))
        object.__setattr__(self, "reg_weight", np.asarray(self.reg_weight, dtype=float))


def _norm(x) -> float:
    return float(np.sqrt(np.vdot(x, x).real))


# ---------------------------------------------------------------- online

def _online_system(p: ProblemInstance):
    """GSVD factors and fixed right-hand pieces of the w-update.

    Scaled by two, the w-update is one Tikhonov problem with data block
    ``[A_s; sqrt(mu) I]`` against ``[b_s; sqrt(mu) u]`` and penalty block
    ``[L_s; sqrt(2 nu) I]`` against ``[L_s w0; 0]``. Only ``u`` changes
    between iterations, so the factorization is reused.
    """
    wc = p.weights
    A_s, b_s, L_s = stack_operators(p)
    A_rows = [A_s]
    if wc.relaxation_mu > 0:
        A_rows.append(math.sqrt(wc.relaxation_mu) * np.eye(p.n))
    L_rows, d_rows = [L_s], [L_s @ p.w0]
    if wc.ridge_nu > 0:
        L_rows.append(math.sqrt(2.0 * wc.ridge_nu) * np.eye(p.n))
        d_rows.append(np.zeros(p.n))
    L_full = np.vstack(L_rows)
    f = gsvd(np.vstack(A_rows), L_full)
    return f, A_s, b_s, L_full, np.concatenate(d_rows)


def _solve_from(f, base, b_res, d_res):
    # solve for the step away from ``base``; zero residuals give ``base`` exactly
    return base + tikhonov_solve_gsvd(f, b_res, 1.0, d_res)


def subproblem_a_update(p, st: SolverState, system=None) -> np.ndarray:
    """w-update with ``u`` and ``v`` fixed.

    Minimizes half the weighted data misfit, half the spatially weighted
    operator penalties around ``w0`` (plus the temporal pull), the proximal
    coupling ``mu/2 ||w - u||^2`` and the ridge ``nu ||w||^2``.
    """
    if isinstance(p, DiagonalProblem):
        return _diag_a_update(p, st.u)
    if np.shape(st.u) != (p.n,):
        raise DimensionMismatch(f"u has shape {np.shape(st.u)}, expected ({p.n},)")
    f, A_s, b_s, L_full, d = system if system is not None else _online_system(p)
    u = np.asarray(st.u, dtype=float)
    b_res = b_s - A_s @ u
    if p.weights.relaxation_mu > 0:
        b_res = np.concatenate([b_res, np.zeros(p.n)])
    return _solve_from(f, u, b_res, d - L_full @ u)


def subproblem_b_update(p, w_sources: Sequence, v_sources: Sequence,
                        chi: Optional[Sequence[float]] = None,
                        kappa: Optional[Sequence[float]] = None) -> np.ndarray:
    """u-update: weighted average of ``w`` sources, ``v`` sources and ``u0``.

    ``chi``/``kappa`` are per-source confidences (default 1). The prior gets
    ``temporal_weight * sum(psi)``.
    """
    wc = p.weights
    chi = [1.0] * len(w_sources) if chi is None else list(chi)
    kappa = [1.0] * len(v_sources) if kappa is None else list(kappa)
    if len(chi) != len(w_sources) or len(kappa) != len(v_sources):
        raise DimensionMismatch("one confidence weight per source is required")
    g, be = wc.data_side_gamma, wc.data_side_beta
    xi = wc.temporal_weight * wc.psi_sum
    num = xi * np.asarray(p.u0)
    for c, ws in zip(chi, w_sources):
        num = num + g * c * np.asarray(ws)
    for c, vs in zip(kappa, v_sources):
        num = num + be * c * np.asarray(vs)
    den = g * sum(chi) + be * sum(kappa) + xi
    if den <= 0:
        raise ZeroDenominator("all u-update weights are zero")
    if np.shape(num) != np.shape(p.u0):
        raise DimensionMismatch(f"sources have shape {np.shape(num)}, expected {np.shape(p.u0)}")
    return num / den


def subproblem_c_update(p, st: SolverState, w_next, u_next) -> np.ndarray:
    """v-update: step along the coupling gap, shrink toward ``v0``."""
    wc = p.weights
    if not np.shape(w_next) == np.shape(u_next) == np.shape(st.v):
        raise DimensionMismatch("w, u and v must share a shape")
    gap = np.asarray(w_next) - np.asarray(u_next)
    return st.v + st.rho * wc.tau_sum * gap + wc.multiplier_eta * wc.psi_sum * (p.v0 - st.v)


def penalty_update(cfg: WeightConfig, rho, w_next, u_next):
    """Grow the penalty by ``delta * sum(tau) * ||w - u||``, capped at the max."""
    gap = _norm(np.asarray(w_next) - np.asarray(u_next))
    return min(cfg.penalty_rho_max, rho + cfg.penalty_delta * cfg.tau_sum * gap)


def convergence_check(prev: SolverState, nxt: SolverState, cfg: SolverConfig) -> bool:
    """Strict test on the relative w-change and the ``||w - u||`` gap."""
    rel = _norm(nxt.w - prev.w) / max(1.0, _norm(prev.w))
    return rel < cfg.tol_rel and _norm(nxt.w - nxt.u) < cfg.tol_coupling


def _diag_a_update(p: DiagonalProblem, u):
    wc = p.weights
    dw = p.data_weight
    temporal = wc.temporal_weight * wc.psi_sum
    num = dw * np.conj(p.a) * p.b + temporal * p.w0 + wc.relaxation_mu * u
    den = dw * np.abs(p.a) ** 2 + temporal + wc.relaxation_mu + 2.0 * wc.ridge_nu
    if p.l is not None:
        reg = wc.spatial_weight * p.reg_weight * np.abs(p.l) ** 2
        num = num + reg * p.w0
        den = den + reg
    if np.any(den <= 0):
        raise ZeroDenominator("w-update denominator vanishes for some element")
    return num / den


def _diag_loss(p: DiagonalProblem, w, u, v) -> float:
    wc = p.weights
    total = float(np.sum(p.data_weight * np.abs(p.a * w - p.b) ** 2))
    if p.l is not None:
        total += float(np.sum(p.reg_weight * np.abs(p.l * (w - p.w0)) ** 2))
    total += float(np.sum(np.abs(w - u) ** 2) + np.sum(np.abs(u - v) ** 2))
    total += wc.zeta * wc.psi_sum * float(np.sum(np.abs(v - p.v0) ** 2))
    return total


def run_online_optimizer(p, cfg: SolverConfig = SolverConfig(),
                         project: Optional[Callable] = None) -> SolveReport:
    """Online alternating minimization with a growing penalty.

    Starts from ``w = u = w0``, ``v = v0``, ``rho = penalty_rho_init`` and
    repeats the w/u/v/penalty updates until :func:`convergence_check`
    passes or ``max_iter`` sweeps have run. ``project`` (diagonal problems
    only) maps each new ``u`` onto a constraint set.

    For a :class:`DiagonalProblem` the penalty is kept per element.
    """
    wc = p.weights
    diagonal = isinstance(p, DiagonalProblem)
    if project is not None and not diagonal:
        raise InputError("projection is only supported on diagonal problems")
    w0 = np.array(p.w0, copy=True)
    rho0 = np.full(np.shape(w0), wc.penalty_rho_init) if diagonal else wc.penalty_rho_init
    st = SolverState(w=w0, u=w0.copy(), v=np.array(p.v0, copy=True), rho=rho0)
    system = None if diagonal else _online_system(p)
    report = SolveReport(final_state=st, iterations=0, converged=False)

    for _ in range(cfg.max_iter):
        w = subproblem_a_update(p, st, system)
        u = subproblem_b_update(p, [w], [st.v])
        if project is not None:
            u = project(u)
        v = subproblem_c_update(p, st, w, u)
        if diagonal:
            gap = np.abs(w - u)
            rho = np.minimum(wc.penalty_rho_max, st.rho + wc.penalty_delta * wc.tau_sum * gap)
            loss = _diag_loss(p, w, u, v)
        else:
            rho = penalty_update(wc, st.rho, w, u)
        nxt = SolverState(w=w, u=u, v=v, rho=rho, k=st.k + 1,
                          loss_history=st.loss_history)
        if not diagonal:
            loss = evaluate_loss(p, nxt)
        nxt.loss_history = st.loss_history + [loss]
        done = convergence_check(st, nxt, cfg)
        if cfg.record_history:
            report.loss_history.append(loss)
            report.coupling_history.append(_norm(w - u))
            report.rho_history.append(float(np.max(st.rho)))
        st = nxt
        report.iterations = st.k
        if done:
            report.converged = True
            break
    report.final_state = st
    return report


# ------------------------------------------------------------- auxiliary

def assemble_P(p: ProblemInstance) -> np.ndarray:
    """Weighted Gram sum of all data and operator matrices."""
    P = np.zeros((p.n, p.n))
    for t in p.data_terms:
        P += p.data_weight(t) * (t.A.T @ t.A)
    for r in p.reg_terms:
        P += p.reg_weight(r) * (r.L.T @ r.L)
    return P


def _aux_system(p: ProblemInstance):
    """GSVD factors for ``(P + I) w = rhs``: data block ``[A_s; I]``, penalty
    block ``L_s`` centered at ``w0``."""
    A_rows, b_rows = [], []
    for t in p.data_terms:
        sw = math.sqrt(p.data_weight(t))
        A_rows.append(sw * t.A)
        b_rows.append(sw * t.b)
    A_rows.append(np.eye(p.n))
    L_rows = [math.sqrt(p.reg_weight(r)) * r.L for r in p.reg_terms]
    L_s = np.vstack(L_rows) if L_rows else np.zeros((0, p.n))
    A_s = np.vstack(A_rows[:-1])
    return gsvd(np.vstack(A_rows), L_s), A_s, np.concatenate(b_rows), L_s, L_s @ p.w0


def aux_w_update(p: ProblemInstance, u, system=None) -> np.ndarray:
    """Exact w-minimizer of half the data misfit, half ``||w - u||^2`` and
    half the operator penalties around ``w0``.

    Solves ``(P + I) w = sum(rho A^T b) + u + sum(tau mu L^T L) w0``; with
    ``w0 = 0`` this is the plain ``(P + I) w = sum(rho A^T b) + u``.
    """
    u = np.asarray(u, dtype=float)
    if u.shape != (p.n,):
        raise DimensionMismatch(f"u has shape {u.shape}, expected ({p.n},)")
    f, A_s, b_s, L_s, d = system if system is not None else _aux_system(p)
    return _solve_from(f, u, np.concatenate([b_s - A_s @ u, np.zeros(p.n)]), d - L_s @ u)


def aux_u_update(p: ProblemInstance, w_sources, v_sources, chi=None, kappa=None) -> np.ndarray:
    return subproblem_b_update(p, w_sources, v_sources, chi, kappa)


def aux_v_update(u, v0, zeta: float) -> np.ndarray:
    """Minimizer of ``1/2 ||v - u||^2 + zeta/2 ||v - v0||^2``."""
    if zeta < 0:
        raise InputError("zeta must be >= 0")
    return (np.asarray(u) + zeta * np.asarray(v0)) / (1.0 + zeta)


def aux_v_refine(p, st: SolverState, w_next, u_next) -> np.ndarray:
    """Optional multiplier-style refinement of ``v``; same step as the online v-update."""
    return subproblem_c_update(p, st, w_next, u_next)


def run_aux_optimizer(p: ProblemInstance, cfg: SolverConfig = SolverConfig(mode="auxiliary")) -> SolveReport:
    """Block-coordinate descent on :func:`~tikcf.objective.auxiliary_objective`.

    Starts from ``(w0, u0, v0)``. The penalty stays at ``penalty_rho_init``
    (it only enters through the optional refinement). Stops when the
    relative change of the objective is below ``tol_rel`` and
    :func:`convergence_check` passes.
    """
    wc = p.weights
    st = SolverState(w=p.w0.copy(), u=p.u0.copy(), v=p.v0.copy(), rho=wc.penalty_rho_init)
    system = _aux_system(p)
    zeta_eff = wc.zeta * wc.psi_sum
    obj = auxiliary_objective(p, st.w, st.u, st.v)
    report = SolveReport(final_state=st, iterations=0, converged=False)

    for _ in range(cfg.max_iter):
        w = aux_w_update(p, st.u, system)
        u = aux_u_update(p, [w], [st.v])
        v = aux_v_update(u, p.v0, zeta_eff)
        if cfg.refine:
            v = aux_v_refine(p, SolverState(w=st.w, u=st.u, v=v, rho=st.rho), w, u)
        nxt = SolverState(w=w, u=u, v=v, rho=st.rho, k=st.k + 1)
        loss = evaluate_loss(p, nxt)
        nxt.loss_history = st.loss_history + [loss]
        new_obj = auxiliary_objective(p, w, u, v)
        done = (abs(obj - new_obj) <= cfg.tol_rel * max(1.0, abs(obj))
                and convergence_check(st, nxt, cfg))
        if cfg.record_history:
            report.loss_history.append(loss)
            report.coupling_history.append(_norm(w - u))
            report.rho_history.append(float(st.rho))
            report.objective_history.append(new_obj)
        st, obj = nxt, new_obj
        report.iterations = st.k
        if done:
            report.converged = True
            break
    report.final_state = st
    return report


def run(p: ProblemInstance, cfg: SolverConfig) -> SolveReport:
    """Dispatch on ``cfg.mode``."""
    if cfg.mode == "online":
        return run_online_optimizer(p, cfg)
    return run_aux_optimizer(p, cfg)


def joint_minimizer(p: ProblemInstance):
    """Dense solve of the stationarity system of the auxiliary objective over
    the concatenated ``(w, u, v)``; used as a reference solution."""
    n, wc = p.n, p.weights
    I = np.eye(n)
    temporal = wc.temporal_weight * wc.psi_sum
    zeta = wc.zeta * wc.psi_sum
    Hw = assemble_P(p) + (1.0 + temporal) * I
    gw = sum(p.data_weight(t) * t.A.T @ t.b for t in p.data_terms)
    gw = gw + sum((p.reg_weight(r) * r.L.T @ r.L @ p.w0 for r in p.reg_terms), np.zeros(n))
    gw = gw + temporal * p.w0
    K = np.block([[Hw, -I, 0 * I], [-I, 2 * I, -I], [0 * I, -I, (1.0 + zeta) * I]])
    rhs = np.concatenate([gw, np.zeros(n), zeta * p.v0])
    sol = np.linalg.solve(K, rhs)
    return sol[:n], sol[n:2 * n], sol[2 * n:]
