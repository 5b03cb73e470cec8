import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tikcf.errors import DimensionMismatch, InputError, ZeroDenominator
from tikcf.linalg import dense_normal_solve
from tikcf.objective import (DataTerm, ProblemInstance, RegTerm, SolverState, WeightConfig,
                             auxiliary_objective, random_problem)
from tikcf.solvers import (DiagonalProblem, SolverConfig, assemble_P, aux_u_update, aux_v_refine,
                           aux_v_update, aux_w_update, convergence_check, joint_minimizer,
                           penalty_update, run, run_aux_optimizer, run_online_optimizer,
                           subproblem_a_update, subproblem_b_update, subproblem_c_update)


def rel(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300)


def st_(w, u, v, rho=0.1):
    return SolverState(np.asarray(w, float), np.asarray(u, float), np.asarray(v, float), rho)


def general_instance(seed, n=12):
    rng = np.random.default_rng(seed)
    wc = WeightConfig(channel_weights=(0.8, 1.5), reg_group_weights=(0.7, 2.0), temporal_weight=0.3,
                      temporal_component_weights=(1.0, 0.5))
    data = [DataTerm(rng.standard_normal((n + 2, n)), rng.standard_normal(n + 2), c) for c in range(2)]
    regs = [RegTerm(np.diff(np.eye(n), axis=0), 0), RegTerm(rng.standard_normal((n, n)), 1)]
    p = ProblemInstance(n, data, regs, rng.standard_normal(n), rng.standard_normal(n),
                        rng.standard_normal(n), wc)
    return p, rng


def a_update_oracle(p, u):
    wc = p.weights
    terms = [(t.A, t.b, p.data_weight(t)) for t in p.data_terms] + [(np.eye(p.n), u, wc.relaxation_mu)]
    regs = [(r.L, wc.spatial_weight * p.reg_weight(r), p.w0) for r in p.reg_terms]
    regs.append((np.eye(p.n), wc.temporal_weight * wc.psi_sum, p.w0))
    return dense_normal_solve(terms, regs, ridge=2 * wc.ridge_nu)


def aux_w_oracle(p, u):
    terms = [(t.A, t.b, p.data_weight(t)) for t in p.data_terms] + [(np.eye(p.n), u, 1.0)]
    regs = [(r.L, p.reg_weight(r), p.w0) for r in p.reg_terms]
    return dense_normal_solve(terms, regs)


def fd_grad(f, x, h=1e-6):
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


# -------------------------------------------------------------- w-updates

def test_a_update_zero():
    p = ProblemInstance(3, [DataTerm(np.eye(3), np.zeros(3))])
    assert np.allclose(subproblem_a_update(p, st_(np.zeros(3), np.zeros(3), np.zeros(3))), 0)


def test_a_update_scalar_example():
    wc = WeightConfig(spatial_weight=0.0, ridge_nu=0.0)
    p = ProblemInstance(1, [DataTerm([[1.0]], [6.0])], weights=wc)
    assert subproblem_a_update(p, st_([0.0], [1.0], [0.0]))[0] == pytest.approx(2.0, abs=1e-14)


@pytest.mark.parametrize("seed", range(10))
def test_a_update_matches_dense(seed):
    p, rng = general_instance(seed)
    u = rng.standard_normal(p.n)
    w = subproblem_a_update(p, st_(p.w0, u, p.v0))
    assert rel(w, a_update_oracle(p, u)) < 1e-8


def test_a_update_shape_check():
    p, _ = general_instance(0)
    with pytest.raises(DimensionMismatch):
        subproblem_a_update(p, st_(np.zeros(3), np.zeros(3), np.zeros(3)))


def test_aux_w_trivial():
    p = ProblemInstance(3, [DataTerm(np.zeros((1, 3)), [0.0])])
    u = np.array([1.0, -2.0, 3.0])
    assert np.allclose(aux_w_update(p, u), u, atol=1e-14)
    q = ProblemInstance(1, [DataTerm([[1.0]], [3.0])])
    assert aux_w_update(q, [1.0])[0] == pytest.approx(2.0, abs=1e-14)


@pytest.mark.parametrize("seed", range(10))
def test_aux_w_matches_dense_and_system(seed):
    p, rng = general_instance(seed)
    u = rng.standard_normal(p.n)
    w = aux_w_update(p, u)
    assert rel(w, aux_w_oracle(p, u)) < 1e-8
    P = assemble_P(p)
    rhs = sum(p.data_weight(t) * t.A.T @ t.b for t in p.data_terms) + u
    rhs = rhs + sum(p.reg_weight(r) * r.L.T @ r.L @ p.w0 for r in p.reg_terms)
    assert np.linalg.norm((P + np.eye(p.n)) @ w - rhs) <= 1e-10 * np.linalg.norm(rhs)


def test_assemble_P_examples():
    assert np.array_equal(assemble_P(ProblemInstance(2, [DataTerm(np.eye(2), [0, 0])])), np.eye(2))
    P = assemble_P(ProblemInstance(2, [DataTerm(np.diag([1.0, 2.0]), [0, 0])]))
    assert np.array_equal(P, np.diag([1.0, 4.0]))


def test_assemble_P_psd():
    p, rng = general_instance(3)
    P = assemble_P(p)
    assert np.max(np.abs(P - P.T)) < 1e-12
    for _ in range(100):
        x = rng.standard_normal(p.n)
        assert x @ P @ x >= 0


# -------------------------------------------------------------- u-updates

def test_b_update_examples():
    p = ProblemInstance(2, [DataTerm(np.eye(2), [0, 0])], weights=WeightConfig(data_side_beta=0.0))
    w = np.array([1.5, -1.0])
    assert np.allclose(subproblem_b_update(p, [w], []), w)
    q = ProblemInstance(1, [DataTerm([[1.0]], [0.0])], weights=WeightConfig(temporal_weight=1.0))
    assert subproblem_b_update(q, [[2.0]], [[0.0]])[0] == pytest.approx(2 / 3)
    assert aux_u_update(q, [[3.0]], [[0.0]])[0] == pytest.approx(1.0)


def b_objective(p, w_src, v_src, chi, kappa):
    wc = p.weights

    def f(u):
        val = 0.5 * wc.data_side_gamma * sum(c * np.sum((u - w) ** 2) for c, w in zip(chi, w_src))
        val += 0.5 * wc.data_side_beta * sum(k * np.sum((u - v) ** 2) for k, v in zip(kappa, v_src))
        val += 0.5 * wc.temporal_weight * wc.psi_sum * np.sum((u - p.u0) ** 2)
        return val
    return f


@pytest.mark.parametrize("seed", range(10))
def test_b_update_gradient_zero(seed):
    p, rng = general_instance(seed, n=8)
    p = ProblemInstance(p.n, p.data_terms, p.reg_terms, p.w0, p.u0, p.v0,
                        p.weights.with_(data_side_gamma=0.7, data_side_beta=1.3))
    ws, vs = [rng.standard_normal(8) for _ in range(3)], [rng.standard_normal(8) for _ in range(2)]
    chi, kappa = rng.uniform(0.1, 2, 3), rng.uniform(0.1, 2, 2)
    u = subproblem_b_update(p, ws, vs, chi, kappa)
    assert np.max(np.abs(fd_grad(b_objective(p, ws, vs, chi, kappa), u))) < 1e-8
    lo = np.min(ws + vs + [p.u0], axis=0)
    hi = np.max(ws + vs + [p.u0], axis=0)
    assert np.all(u >= lo - 1e-12) and np.all(u <= hi + 1e-12)


def test_b_update_errors():
    p = ProblemInstance(1, [DataTerm([[1.0]], [0.0])], weights=WeightConfig(data_side_gamma=0.0,
                                                                            data_side_beta=0.0))
    with pytest.raises(ZeroDenominator):
        subproblem_b_update(p, [[1.0]], [[1.0]])
    with pytest.raises(DimensionMismatch):
        subproblem_b_update(p, [[1.0]], [], chi=[1.0, 2.0])


# -------------------------------------------------------------- v-updates / penalty

def test_c_update_examples():
    p = ProblemInstance(2, [DataTerm(np.eye(2), [0, 0])], v0=[1.0, 2.0])
    v = np.array([1.0, 2.0])
    w = np.array([0.3, 0.4])
    assert np.array_equal(subproblem_c_update(p, st_(w, w, v), w, w), v)
    q = ProblemInstance(1, [DataTerm([[1.0]], [0.0])], weights=WeightConfig(multiplier_eta=0.0))
    assert subproblem_c_update(q, st_([0], [0], [0.5]), np.array([1.0]), np.array([0.0]))[0] == pytest.approx(0.6)
    r = ProblemInstance(1, [DataTerm([[1.0]], [0.0])])
    out = subproblem_c_update(r, st_([0], [0], [1.0], rho=0.0), np.array([1.0]), np.array([0.0]))
    assert out[0] == pytest.approx(0.8)
    assert aux_v_refine(r, st_([0], [0], [1.0], rho=0.0), np.array([1.0]), np.array([0.0]))[0] == pytest.approx(0.8)
    with pytest.raises(DimensionMismatch):
        subproblem_c_update(r, st_([0], [0], [1.0]), np.zeros(2), np.zeros(2))


def test_penalty_examples():
    wc = WeightConfig()
    z = np.zeros(3)
    assert penalty_update(wc, 0.37, z, z) == 0.37
    assert penalty_update(wc.with_(penalty_delta=0.5), 0.99, np.array([1.0]), np.array([0.0])) == 1.0
    assert penalty_update(wc, 0.1, np.array([2.0]), np.array([0.0])) == pytest.approx(0.2)


@settings(max_examples=50, deadline=None)
@given(rho=st.floats(0.0, 1.0), gap=st.floats(0.0, 100.0), delta=st.floats(0.0, 1.0))
def test_penalty_monotone_and_capped(rho, gap, delta):
    out = penalty_update(WeightConfig(penalty_delta=delta), rho, np.array([gap]), np.array([0.0]))
    assert rho <= out <= 1.0 or (rho == out)


def test_aux_v_examples():
    u = np.array([1.0, 2.0])
    assert np.array_equal(aux_v_update(u, np.zeros(2), 0.0), u)
    assert aux_v_update([2.0], [0.0], 1.0)[0] == 1.0
    assert aux_v_update([5.0], [-1.0], 1e12)[0] == pytest.approx(-1.0, abs=1e-10)
    with pytest.raises(InputError):
        aux_v_update(u, u, -1.0)


@pytest.mark.parametrize("seed", range(5))
def test_aux_v_gradient_zero(seed):
    rng = np.random.default_rng(seed)
    u, v0, zeta = rng.standard_normal(6), rng.standard_normal(6), rng.uniform(0, 3)
    v = aux_v_update(u, v0, zeta)
    g = fd_grad(lambda x: 0.5 * np.sum((x - u) ** 2) + 0.5 * zeta * np.sum((x - v0) ** 2), v)
    assert np.max(np.abs(g)) < 1e-8
    assert np.all((v >= np.minimum(u, v0) - 1e-12) & (v <= np.maximum(u, v0) + 1e-12))


# -------------------------------------------------------------- convergence check

def test_convergence_check_examples():
    cfg = SolverConfig()
    a = st_([1.0, 2.0], [1.0, 2.0], [0.0, 0.0])
    assert convergence_check(a, a.copy(), cfg)
    b = st_([1.001, 2.0], [1.001, 2.0], [0.0, 0.0])
    assert not convergence_check(a, b, cfg)
    # relative change exactly tol_rel (max(1, ||w||) = 1 here)
    c0 = st_([0.5], [0.5], [0.0])
    c1 = st_([0.5 + 0.25], [0.75], [0.0])
    assert not convergence_check(c0, c1, SolverConfig(tol_rel=0.25))


def test_solver_config_validation():
    for bad in (dict(max_iter=0), dict(tol_rel=0.0), dict(mode="fast")):
        with pytest.raises(InputError):
            SolverConfig(**bad)


# -------------------------------------------------------------- optimizers

def test_online_trivial_fixed_point():
    p = ProblemInstance(3, [DataTerm(np.eye(3), np.zeros(3))])
    rep = run_online_optimizer(p)
    assert rep.converged and rep.iterations == 1
    assert np.array_equal(rep.final_state.w, np.zeros(3))


def test_aux_trivial_fixed_point():
    p = ProblemInstance(3, [DataTerm(np.eye(3), np.zeros(3))])
    rep = run_aux_optimizer(p)
    assert rep.converged and rep.iterations == 1
    assert np.array_equal(rep.final_state.w, np.zeros(3))
    assert np.array_equal(rep.final_state.v, np.zeros(3))


def test_fixed_point_bit_for_bit():
    x = np.array([0.25, -1.5, 2.0])
    p = ProblemInstance(3, [DataTerm(np.eye(3), x)], w0=x, u0=x, v0=x, weights=WeightConfig.consistent())
    for mode in ("online", "auxiliary"):
        rep = run(p, SolverConfig(max_iter=1, mode=mode))
        s = rep.final_state
        assert np.array_equal(s.w, x) and np.array_equal(s.u, x) and np.array_equal(s.v, x)


@pytest.mark.parametrize("seed", range(5))
def test_both_optimizers_reach_joint_minimizer(seed):
    p = random_problem(8, 2, seed)
    w_ref, u_ref, v_ref = joint_minimizer(p)
    for runner in (run_online_optimizer, run_aux_optimizer):
        rep = runner(p, SolverConfig(mode="online" if runner is run_online_optimizer else "auxiliary"))
        assert rep.converged and rep.iterations <= 200
        assert rel(rep.final_state.w, w_ref) < 1e-4
        assert np.linalg.norm(rep.final_state.w - rep.final_state.u) < 1e-6


def test_report_histories():
    p = random_problem(6, 2, 4)
    for mode in ("online", "auxiliary"):
        rep = run(p, SolverConfig(mode=mode))
        k = rep.iterations
        assert len(rep.loss_history) == len(rep.coupling_history) == len(rep.rho_history) == k
        assert rep.final_state.k == len(rep.final_state.loss_history) == k
        rho = np.array(rep.rho_history)
        assert rho[0] == 0.1 and np.all(np.diff(rho) >= 0) and np.all(rho <= 1.0)
    quiet = run(p, SolverConfig(record_history=False))
    assert quiet.loss_history == [] and quiet.iterations > 0


@pytest.mark.parametrize("zeta", [0.0, 0.5, 3.0])
def test_aux_descent_with_zeta(zeta):
    p = random_problem(8, 3, 7, WeightConfig.consistent(zeta=zeta))
    rep = run_aux_optimizer(p, SolverConfig(mode="auxiliary"))
    obj = [auxiliary_objective(p, p.w0, p.u0, p.v0)] + rep.objective_history
    assert np.all(np.diff(obj) <= 1e-9)
    assert np.all(np.diff(rep.loss_history) <= 1e-9)


def test_aux_refinement_runs():
    p = random_problem(6, 2, 9)
    rep = run_aux_optimizer(p, SolverConfig(mode="auxiliary", refine=True))
    assert np.all(np.isfinite(rep.final_state.w))


def test_online_with_default_weights_stays_finite():
    p = random_problem(8, 2, 1, WeightConfig())
    rep = run_online_optimizer(p)
    rho = np.array(rep.rho_history)
    assert np.all(np.isfinite(rep.loss_history))
    assert rho[0] == 0.1 and np.all(np.diff(rho) >= 0) and rho.max() <= 1.0


# -------------------------------------------------------------- diagonal path

def test_diagonal_update_matches_scalar_dense():
    rng = np.random.default_rng(2)
    shape = (4, 5)
    a = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    b = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    w0 = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    u = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    l = rng.standard_normal(shape)
    wc = WeightConfig(temporal_weight=0.4)
    dp = DiagonalProblem(a, b, w0, weights=wc, data_weight=1.7, l=l, reg_weight=0.3)
    g = subproblem_a_update(dp, SolverState(w0, u, w0, 0.1))
    for idx in np.ndindex(shape):
        def f(x):
            z = x[0] + 1j * x[1]
            return (1.7 * abs(a[idx] * z - b[idx]) ** 2
                    + wc.spatial_weight * 0.3 * abs(l[idx] * (z - w0[idx])) ** 2
                    + wc.temporal_weight * abs(z - w0[idx]) ** 2
                    + wc.relaxation_mu * abs(z - u[idx]) ** 2 + 2 * wc.ridge_nu * abs(z) ** 2)
        x = np.array([g[idx].real, g[idx].imag])
        assert np.max(np.abs(fd_grad(f, x))) < 1e-6


def test_diagonal_online_matches_closed_form():
    rng = np.random.default_rng(4)
    a = rng.standard_normal(16) + 1j * rng.standard_normal(16)
    b = rng.standard_normal(16) + 1j * rng.standard_normal(16)
    wc = WeightConfig.consistent(relaxation_mu=0.0, ridge_nu=0.05)
    rep = run_online_optimizer(DiagonalProblem(a, b, np.zeros(16, complex), weights=wc), SolverConfig())
    assert np.allclose(rep.final_state.w, np.conj(a) * b / (np.abs(a) ** 2 + 0.1), atol=1e-12)


def test_diagonal_shape_check_and_projection_guard():
    with pytest.raises(DimensionMismatch):
        DiagonalProblem(np.ones(3), np.ones(4), np.zeros(3))
    p = random_problem(4, 1, 0)
    with pytest.raises(InputError):
        run_online_optimizer(p, project=lambda u: u)
