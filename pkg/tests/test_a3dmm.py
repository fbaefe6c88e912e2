import math

import numpy as np
import pytest

from admmkit.a3dmm import (ExtrapConfig, InnerSolver, RunResult, run_a3dmm,
                           run_inexact, run_variant, safeguard_coefficient)
from admmkit.problems import make_feasibility, make_lasso, make_qp_box
from admmkit.splitting import SolverConfig


def rows_without_ms(trace):
    return [(r.k, r.norm_v, r.cos_theta, r.dist_z, r.dist_x, r.objective,
             r.extrapolated) for r in trace.rows]


def test_safeguard_coefficient_examples():
    assert safeguard_coefficient(1, 1.0, 1.0, 1.0, 0.1) == 1.0
    assert safeguard_coefficient(10, 1.0, 1.0, 1.0, 1.0) == pytest.approx(0.01)
    assert safeguard_coefficient(7, 0.6, 1.0, 2.0, 0.0) == 0.6


def test_extrap_config_validation():
    with pytest.raises(ValueError):
        ExtrapConfig(q=0)
    with pytest.raises(ValueError):
        ExtrapConfig(s=0)
    with pytest.raises(ValueError):
        ExtrapConfig(s=2.5)
    with pytest.raises(ValueError):
        ExtrapConfig(guard_a=1.5)
    with pytest.raises(ValueError):
        ExtrapConfig(spacing=0)
    assert ExtrapConfig(q=4, spacing=3).cadence == 7
    with pytest.raises(ValueError):
        InnerSolver(max_steps=0)


def test_disabled_extrapolation_matches_plain_run():
    inst = make_lasso(m=16, n=48, sparsity=4, seed=0)
    cfg = SolverConfig(gamma=1.0, tol=1e-10, max_iter=500, z0=inst.z0)
    plain = run_a3dmm(inst.problem, cfg)
    disabled = run_a3dmm(inst.problem,
                         SolverConfig(gamma=1.0, tol=1e-10, max_iter=500, z0=inst.z0),
                         extrap=ExtrapConfig(enabled=False))
    assert rows_without_ms(plain.trace) == rows_without_ms(disabled.trace)
    assert not any(r.extrapolated for r in disabled.trace.rows)


def test_traces_are_deterministic():
    a = make_lasso(m=16, n=48, sparsity=4, seed=9)
    b = make_lasso(m=16, n=48, sparsity=4, seed=9)
    ext = ExtrapConfig(q=4, s=math.inf)
    ra = run_a3dmm(a.problem, SolverConfig(gamma=0.8, tol=1e-10, max_iter=400), extrap=ext)
    rb = run_a3dmm(b.problem, SolverConfig(gamma=0.8, tol=1e-10, max_iter=400),
                   extrap=ExtrapConfig(q=4, s=math.inf))
    assert rows_without_ms(ra.trace) == rows_without_ms(rb.trace)


def test_guard_flag_only_on_clean_cadence_points():
    inst = make_lasso(m=24, n=72, sparsity=6, seed=3)
    ext = ExtrapConfig(q=5, s=math.inf)
    cfg = SolverConfig(gamma=1.0, tol=1e-11, max_iter=1000, z0=inst.z0)
    res = run_a3dmm(inst.problem, cfg, extrap=ext)
    flagged = [r.k for r in res.trace.rows if r.extrapolated]
    assert flagged, "extrapolation never fired"
    assert all(k % ext.cadence == 0 for k in flagged)
    assert len(res.trace.applied_increments) == len(flagged)


def test_acceleration_on_lasso():
    inst = make_lasso(m=32, n=96, sparsity=6, seed=1)
    gamma = inst.norm_K ** 2 / 10

    def iters(extrap):
        cfg = SolverConfig(gamma=gamma, tol=1e-10, max_iter=4000, z0=inst.z0)
        res = run_a3dmm(inst.problem, cfg, extrap=extrap)
        assert res.converged
        return res.state.k

    assert iters(ExtrapConfig(q=6, s=math.inf)) < iters(None)


def test_perturbation_sums_stay_below_zeta_bound():
    inst = make_lasso(m=16, n=48, sparsity=4, seed=5)
    ext = ExtrapConfig(q=4, s=100, guard_b_rel=1.0, guard_delta=1.0)
    cfg = SolverConfig(gamma=1.0, tol=1e-11, max_iter=3000, z0=inst.z0)
    res = run_a3dmm(inst.problem, cfg, extrap=ext)
    assert res.converged
    b = float(res.trace.meta["guard_b"])
    zeta2 = math.pi ** 2 / 6
    partial = 0.0
    for eps in res.trace.applied_increments:
        partial += eps
        assert partial <= b * zeta2 + 1e-12


def test_difference_scaled_safeguard_variant():
    # the alternative online rule scales by ||z_k - z_{k-1}|| instead of the
    # increment norm (only the latter bounds the applied perturbations by
    # construction, which is why it is the default); the literal rule must
    # still run, fire and converge
    inst = make_lasso(m=16, n=48, sparsity=4, seed=5)
    ext = ExtrapConfig(q=4, s=100, guard_b_rel=1.0, guard_delta=1.0,
                       guard_on_increment=False)
    cfg = SolverConfig(gamma=1.0, tol=1e-11, max_iter=3000, z0=inst.z0)
    res = run_a3dmm(inst.problem, cfg, extrap=ext)
    assert res.converged
    assert any(r.extrapolated for r in res.trace.rows)


def test_run_variant_standard_identical_to_run_a3dmm():
    inst = make_qp_box(n=12, seed=2)
    ext = ExtrapConfig(q=3, s=50)
    ra = run_a3dmm(inst.problem, SolverConfig(gamma=1.0, tol=1e-10, max_iter=300),
                   extrap=ext)
    rv = run_variant(inst.problem, SolverConfig(gamma=1.0, tol=1e-10, max_iter=300),
                     extrap=ExtrapConfig(q=3, s=50))
    assert rows_without_ms(ra.trace) == rows_without_ms(rv.trace)


def test_run_variant_relaxed_at_phi_one_matches_standard():
    inst = make_qp_box(n=12, seed=2)
    rs = run_variant(inst.problem,
                     SolverConfig(gamma=1.0, tol=1e-10, max_iter=300, variant="standard"))
    rr = run_variant(inst.problem,
                     SolverConfig(gamma=1.0, phi=1.0, tol=1e-10, max_iter=300,
                                  variant="relaxed"))
    assert rows_without_ms(rs.trace) == rows_without_ms(rr.trace)


def test_run_variant_symmetric_faster_on_qp():
    inst = make_qp_box(n=24, seed=0)
    ks = {}
    for variant in ("standard", "symmetric"):
        cfg = SolverConfig(gamma=0.5, variant=variant, tol=1e-10, max_iter=2000)
        res = run_variant(inst.problem, cfg)
        assert res.converged
        ks[variant] = res.state.k
    assert ks["symmetric"] < ks["standard"]


def test_momentum_run_matches_manual_inertial_iteration():
    from admmkit.splitting import IterateState, admm_step, inertial_predict
    inst = make_feasibility(np.pi / 4, seed=0)
    res = run_a3dmm(inst.problem, SolverConfig(gamma=1.0, tol=0.0, max_iter=30,
                                               z0=inst.z0), momentum=(0.4, -0.2))
    state = IterateState.initial(inst.problem, inst.z0)
    zs = [state.z.copy(), state.z.copy()]
    for k, row in enumerate(res.trace.rows, start=1):
        state = admm_step(inst.problem, state, 1.0)
        np.testing.assert_allclose(np.linalg.norm(state.v), row.norm_v, atol=1e-14)
        state.z_bar = inertial_predict(state.z, zs[-1], zs[-2], 0.4, -0.2)
        zs.append(state.z.copy())


def test_run_inexact_requires_iterative_oracle():
    inst = make_lasso(m=16, n=48, sparsity=4, seed=0)
    with pytest.raises(ValueError):
        run_inexact(inst.problem, InnerSolver(), SolverConfig(gamma=1.0, max_iter=10))


def test_run_inexact_near_exact_inner_matches_closed_form():
    # quadratic data term on the x-block, solved either exactly or by 500
    # accelerated-gradient steps: the z-trajectories agree
    exact = make_lasso(m=16, n=48, sparsity=4, mu=0.3, seed=4, data_block="x")
    inex = make_lasso(m=16, n=48, sparsity=4, mu=0.3, seed=4, data_block="x",
                      iterative=True)
    from admmkit.splitting import IterateState, admm_step
    state = IterateState.initial(exact.problem)
    cfg = SolverConfig(gamma=1.0, tol=0.0, max_iter=50)
    res = run_inexact(inex.problem, InnerSolver(max_steps=500), cfg)
    for _ in range(50):
        state = admm_step(exact.problem, state, 1.0)
    zdiff = np.linalg.norm(res.state.z - state.z)
    assert zdiff <= 1e-6 * (1 + np.linalg.norm(state.z))


def test_run_inexact_single_inner_step_stays_bounded():
    inst = make_lasso(m=16, n=48, sparsity=4, mu=0.3, seed=4, data_block="x",
                      iterative=True)
    ref = make_lasso(m=16, n=48, sparsity=4, mu=0.3, seed=4, data_block="x")
    cfg = SolverConfig(gamma=1.0, tol=1e-12, max_iter=4000)
    z_star = run_a3dmm(ref.problem, cfg).state.z
    res = run_inexact(inst.problem, InnerSolver(max_steps=1),
                      SolverConfig(gamma=1.0, tol=0.0, max_iter=600))
    state_dist = np.linalg.norm(res.state.z - z_star)
    assert state_dist <= 10 * (1 + np.linalg.norm(z_star))


def test_max_iter_reached_is_soft():
    inst = make_lasso(m=16, n=48, sparsity=4, seed=0)
    res = run_a3dmm(inst.problem, SolverConfig(gamma=1.0, tol=1e-16, max_iter=5))
    assert not res.converged
    assert res.trace.meta["converged"] == "0"
    assert res.state.k == 5


def test_reference_distances_recorded():
    inst = make_lasso(m=16, n=48, sparsity=4, seed=0)
    long = run_a3dmm(inst.problem, SolverConfig(gamma=1.0, tol=1e-13, max_iter=5000))

    class Ref:
        z = long.state.z
        x = long.state.x

    res = run_a3dmm(inst.problem, SolverConfig(gamma=1.0, tol=1e-9, max_iter=500),
                    reference=Ref)
    assert res.trace.rows[-1].dist_z <= 1e-7
    assert all(r.dist_z is not None and r.dist_x is not None for r in res.trace.rows)
    # first iteration has no previous difference: the angle cell is absent
    assert res.trace.rows[0].cos_theta is None


def test_concurrent_solves_share_problem_data():
    # the problem (oracles, caches) is read-only during solves: concurrent
    # runs must produce the same traces as sequential ones
    import concurrent.futures
    inst = make_lasso(m=24, n=72, sparsity=5, seed=8)

    def solve(gamma):
        cfg = SolverConfig(gamma=gamma, tol=1e-10, max_iter=600, z0=inst.z0)
        return rows_without_ms(run_a3dmm(inst.problem, cfg,
                                         extrap=ExtrapConfig(q=4, s=50)).trace)

    gammas = [0.5, 0.8, 1.0, 1.3]
    sequential = [solve(g) for g in gammas]
    with concurrent.futures.ThreadPoolExecutor(max_workers=4) as pool:
        concurrent_rows = list(pool.map(solve, gammas))
    assert concurrent_rows == sequential


def test_result_unpacks_like_a_pair():
    inst = make_feasibility(np.pi / 3, seed=0)
    state, trace = run_a3dmm(inst.problem, SolverConfig(gamma=1.0, tol=1e-10,
                                                        max_iter=200, z0=inst.z0))
    assert state.k == len(trace.rows)
