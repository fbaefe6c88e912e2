import numpy as np
import pytest

from admmkit.a3dmm import InnerSolver, run_a3dmm, run_inexact
from admmkit.problems import (BadImage, BadShape, FormatError, ParseError,
                              SparseMatrix, gradient_map, load_pgm,
                              make_affine_constrained, make_feasibility, make_lasso,
                              make_lasso_from_data, make_qp_box, make_tv_inpainting,
                              operator_norm, parse_libsvm, piecewise_constant_image,
                              psnr, qp_box_instance, resolve_gamma, serialize_libsvm)
from admmkit.splitting import SolverConfig, admm_step, IterateState


def test_instances_reproducible():
    a = make_lasso(seed=11)
    b = make_lasso(seed=11)
    np.testing.assert_array_equal(a.extra["K"], b.extra["K"])
    np.testing.assert_array_equal(a.extra["f"], b.extra["f"])
    np.testing.assert_array_equal(a.x_true, b.x_true)
    c = make_lasso(seed=12)
    assert not np.array_equal(a.extra["K"], c.extra["K"])


def test_lasso_shapes_and_preconditions():
    inst = make_lasso(m=16, n=40, sparsity=5, seed=0)
    assert inst.extra["K"].shape == (16, 40)
    assert np.count_nonzero(inst.x_true) == 5
    np.testing.assert_allclose(np.linalg.norm(inst.extra["K"], axis=0), 1.0,
                               atol=1e-12)
    with pytest.raises(BadShape):
        make_lasso(m=40, n=16)
    with pytest.raises(BadShape):
        make_lasso(m=16, n=40, sparsity=20)
    with pytest.raises(ValueError):
        make_lasso(m=16, n=40, sparsity=5, mu=np.inf)


def test_paper_scale_constructors():
    # the full-size instances of the experiments are constructible (solving
    # them is out of scope for the test budget)
    inst = make_lasso(m=640, n=2048, sparsity=128, mu=1.0, seed=0)
    assert inst.extra["K"].shape == (640, 2048)
    assert np.count_nonzero(inst.x_true) == 128
    assert inst.descriptor == "lasso(m=640,n=2048,sparsity=128,mu=1.0,seed=0)"
    inst = make_affine_constrained("l1", m=512, n=2048, sparsity=128, seed=0)
    assert inst.extra["K"].shape == (512, 2048)


def test_operator_norm_matches_dense():
    rng = np.random.default_rng(3)
    K = rng.standard_normal((20, 35))
    assert operator_norm(K) == pytest.approx(np.linalg.norm(K, 2), rel=1e-7)


def test_resolve_gamma_rules():
    assert resolve_gamma(2.5) == 2.5
    assert resolve_gamma("K2/10", 3.0) == pytest.approx(0.9)
    assert resolve_gamma("K2+0.1", 3.0) == pytest.approx(9.1)
    with pytest.raises(ValueError):
        resolve_gamma("K2/10", None)


@pytest.mark.parametrize("reg", ["l1", "l12", "nuclear"])
def test_affine_constrained_truth_is_feasible(reg):
    inst = make_affine_constrained(reg, seed=1)
    K, f = inst.extra["K"], inst.extra["f"]
    np.testing.assert_allclose(K @ inst.x_true, f, atol=1e-12)
    # the y-oracle projects onto the constraint set
    y = inst.problem.prox_j.evaluate(np.zeros(K.shape[1]), 1.0)
    assert np.linalg.norm(K @ y - f) <= 1e-10 * (1 + np.linalg.norm(f))


def test_affine_constrained_shapes():
    inst = make_affine_constrained("l12", m=32, n=64, blocks=3, seed=0)
    assert np.count_nonzero(inst.x_true) == 12
    with pytest.raises(BadShape):
        make_affine_constrained("l12", m=32, n=63, seed=0)
    inst = make_affine_constrained("nuclear", matrix_shape=(8, 8), rank=2,
                                   measurements=40, seed=0)
    X = inst.x_true.reshape(8, 8)
    assert np.linalg.matrix_rank(X, tol=1e-8) == 2
    with pytest.raises(ValueError):
        make_affine_constrained("huber")


def test_qp_box_hand_oracles():
    # n=1, Q=2, q=-2: unconstrained minimizer of x^2 - 2x is 1 (interior)
    inst = qp_box_instance([[2.0]], [-2.0], [0.0], [10.0])
    res = run_a3dmm(inst.problem, SolverConfig(gamma=1.0, tol=1e-12, max_iter=2000))
    assert abs(res.state.x[0] - 1.0) <= 1e-6
    # box [2, 3]: the quadratic is increasing there, so the bound 2 is active
    inst = qp_box_instance([[2.0]], [-2.0], [2.0], [3.0])
    res = run_a3dmm(inst.problem, SolverConfig(gamma=1.0, tol=1e-12, max_iter=2000))
    assert abs(res.state.x[0] - 2.0) <= 1e-6
    # Q = 0.1 I, q = 0: solution is the projection of the origin onto the box
    lo = np.array([0.5, -2.0])
    hi = np.array([1.5, -1.0])
    inst = qp_box_instance(0.1 * np.eye(2), np.zeros(2), lo, hi)
    res = run_a3dmm(inst.problem, SolverConfig(gamma=1.0, tol=1e-12, max_iter=4000))
    np.testing.assert_allclose(res.state.x, np.clip(0.0, lo, hi), atol=1e-6)


def test_make_qp_box_seeded():
    inst = make_qp_box(n=20, seed=7)
    Q = inst.extra["Q"]
    assert np.all(np.linalg.eigvalsh(Q) >= 0.1 - 1e-12)
    assert np.all(inst.extra["lo"] < inst.extra["hi"])


def test_feasibility_orthogonal_lines_converge_fast():
    inst = make_feasibility(np.pi / 2, seed=0)
    state = IterateState.initial(inst.problem, inst.z0)
    for _ in range(2):
        state = admm_step(inst.problem, state, 1.0)
    assert np.linalg.norm(state.z) <= 1e-14


def test_feasibility_spiral_limit():
    inst = make_feasibility(np.pi / 3, seed=5)
    res = run_a3dmm(inst.problem, SolverConfig(gamma=1.0, tol=0.0, max_iter=200,
                                               z0=inst.z0))
    vals = [r.cos_theta for r in res.trace.rows if r.cos_theta is not None]
    assert max(abs(v - 0.5) for v in vals[30:]) <= 1e-6
    with pytest.raises(ValueError):
        make_feasibility(0.0)


def test_gradient_map_adjoint_and_norm():
    grad = gradient_map(9)
    rng = np.random.default_rng(2)
    for _ in range(20):
        x = rng.standard_normal(81)
        y = rng.standard_normal(162)
        lhs = float(grad.apply(x) @ y)
        rhs = float(x @ grad.apply_adjoint(y))
        assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))
    dense = np.column_stack([grad.apply(e) for e in np.eye(81)])
    assert np.linalg.norm(dense, 2) ** 2 <= 8.0 + 1e-9


def test_tv_constant_image_recovered_exactly():
    img = np.full((8, 8), 0.37)
    inst = make_tv_inpainting(image=img, mask_density=0.4, seed=3)
    res = run_inexact(inst.problem, InnerSolver(max_steps=30),
                      SolverConfig(gamma=1.0, tol=1e-11, max_iter=400))
    np.testing.assert_allclose(res.state.x, img.ravel(), atol=1e-6)


def test_tv_full_mask_pins_solution():
    img = piecewise_constant_image(size=8, seed=1)
    inst = make_tv_inpainting(image=img, mask_density=1.0, seed=0)
    res = run_inexact(inst.problem, InnerSolver(max_steps=10),
                      SolverConfig(gamma=1.0, tol=0.0, max_iter=3))
    np.testing.assert_allclose(res.state.x, img.ravel(), atol=1e-12)


def test_tv_validation():
    with pytest.raises(BadImage):
        make_tv_inpainting(image=np.full((4, 4), 1.5))
    with pytest.raises(BadShape):
        make_tv_inpainting(image=np.zeros((4, 5)))
    with pytest.raises(ValueError):
        make_tv_inpainting(image=np.zeros((4, 4)), mask_density=0.0)


def test_piecewise_image_and_psnr():
    img = piecewise_constant_image(size=32, seed=9)
    assert img.min() >= 0.0 and img.max() <= 1.0
    assert psnr(img, img) == np.inf
    noisy = np.clip(img + 0.1, 0.0, 1.0)
    assert psnr(noisy, img) < 30.0


def test_parse_libsvm_examples():
    matrix, labels = parse_libsvm("1 1:0.5 3:-2\n")
    assert matrix.shape == (1, 3)
    dense = matrix.to_dense()
    np.testing.assert_allclose(dense, [[0.5, 0.0, -2.0]])
    np.testing.assert_array_equal(labels, [1.0])

    matrix, labels = parse_libsvm("-1\n")
    assert matrix.shape[0] == 1 and matrix.vals.size == 0
    np.testing.assert_array_equal(labels, [-1.0])

    with pytest.raises(ParseError) as err:
        parse_libsvm("1 2:a\n")
    assert err.value.line == 1


def test_parse_libsvm_ordering_errors():
    with pytest.raises(ParseError):
        parse_libsvm("1 3:1 2:1\n")  # not ascending
    with pytest.raises(ParseError):
        parse_libsvm("1 0:1\n")  # not 1-based
    with pytest.raises(ParseError):
        parse_libsvm("x 1:1\n")  # bad label


def test_libsvm_round_trip():
    rng = np.random.default_rng(4)
    rows, cols, vals = [], [], []
    for r in range(6):
        for c in sorted(rng.choice(9, size=rng.integers(0, 5), replace=False)):
            rows.append(r)
            cols.append(int(c))
            vals.append(float(rng.standard_normal()))
    rows.append(5)
    cols.append(9)  # keep the last column occupied so the shape round-trips
    vals.append(0.25)
    matrix = SparseMatrix(np.array(rows), np.array(cols), np.array(vals), (6, 10))
    labels = rng.standard_normal(6)
    text = serialize_libsvm(matrix, labels)
    back, back_labels = parse_libsvm(text)
    assert back == matrix
    np.testing.assert_array_equal(back_labels, labels)


def test_sparse_matrix_validation():
    with pytest.raises(BadShape):
        SparseMatrix([0, 0], [1, 1], [1.0, 2.0], (2, 2))  # duplicate coordinate
    with pytest.raises(BadShape):
        SparseMatrix([0], [5], [1.0], (2, 2))  # out of range


def test_lasso_from_data():
    matrix, labels = parse_libsvm("1 1:2 2:-1\n-1 1:1\n0.5 2:4\n")
    inst = make_lasso_from_data(matrix.to_dense(), labels, mu=0.5)
    assert inst.problem.n == 2
    res = run_a3dmm(inst.problem, SolverConfig(gamma=1.0, tol=1e-10, max_iter=2000))
    assert res.converged


def test_load_pgm_examples():
    np.testing.assert_allclose(load_pgm(b"P2 1 1 255 \n 255"), [[1.0]])
    np.testing.assert_allclose(load_pgm(b"P2 2 1 255 \n 0 128"),
                               [[0.0, 128.0 / 255.0]])
    with pytest.raises(FormatError):
        load_pgm(b"P5 2 2 255\n\x00\x01")  # truncated raster
    with pytest.raises(FormatError):
        load_pgm(b"P3 1 1 255 \n 0")
    raster = bytes([0, 64, 128, 255])
    img = load_pgm(b"P5 2 2 255\n" + raster)
    np.testing.assert_allclose(img, np.array(
        [[0, 64], [128, 255]], dtype=float) / 255.0)
    wide = load_pgm(b"P2 1 1 65535\n65535")
    np.testing.assert_allclose(wide, [[1.0]])


def test_load_pgm_comments_and_16bit_binary():
    img = load_pgm(b"P2 # comment\n2 1 # another\n10\n5 10")
    np.testing.assert_allclose(img, [[0.5, 1.0]])
    payload = (512).to_bytes(2, "big") + (1024).to_bytes(2, "big")
    img = load_pgm(b"P5 2 1 1024\n" + payload)
    np.testing.assert_allclose(img, [[0.5, 1.0]])


@pytest.mark.parametrize("build,gamma", [
    (lambda: make_lasso(m=24, n=72, sparsity=5, seed=2), 1.0),
    (lambda: make_affine_constrained("l1", m=32, n=128, sparsity=8, seed=2), 1.0),
    (lambda: make_qp_box(n=15, seed=2), 1.0),
    (lambda: make_feasibility(np.pi / 4, seed=2), 1.0),
])
def test_reference_solution_kkt_residual(build, gamma):
    inst = build()
    cfg = SolverConfig(gamma=gamma, tol=1e-11, max_iter=30000, z0=inst.z0)
    res = run_a3dmm(inst.problem, cfg)
    assert res.converged
    # fixed-point residual of one more step plus primal feasibility
    state = admm_step(inst.problem, res.state, gamma)
    fp = np.linalg.norm(state.z - res.state.z)
    feas = np.linalg.norm(inst.problem.A.apply(state.x)
                          + inst.problem.B.apply(state.y) - inst.problem.b)
    assert fp + feas <= 1e-8
