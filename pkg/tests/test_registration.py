import numpy as np
import pytest
from scipy.optimize import minimize

from chromalign.errors import (
    NumericalUnderflowError,
    ValidationError,
)
from chromalign.registration import (
    GaussianKernelBasis,
    HybridTransform,
    RegistrationConfig,
    build_kernel,
    e_step,
    initialize,
    m_step_axis1,
    m_step_axis2,
    m_step_translation,
    objective,
    register,
    scan_noise_weight,
    update_sigma,
)


def random_instance(seed, n=10, m=8):
    rng = np.random.default_rng(seed)
    x = rng.uniform(0, 10, size=(n, 2))
    y = rng.uniform(0, 10, size=(m, 2))
    return rng, x, y


def random_posterior(rng, m, n):
    p = rng.random((m, n))
    p /= p.sum(axis=0) * rng.uniform(1.0, 2.0)  # columns sum to < 1 (noise mass)
    return p


# ---------------------------------------------------------------- kernel


def test_kernel_diagonal_is_one():
    _, _, y = random_instance(0)
    basis = build_kernel(y, beta=1.7)
    assert np.allclose(np.diag(basis.G), 1.0)


def test_kernel_two_points_as_printed():
    basis = build_kernel(np.array([[0.0, 0.0], [4.0, 0.0]]), beta=2.0)
    assert basis.G[0, 1] == pytest.approx(np.exp(-1.0), abs=1e-15)


def test_kernel_two_points_squared_form():
    basis = build_kernel(np.array([[0.0, 0.0], [4.0, 0.0]]), beta=2.0, form="squared")
    assert basis.G[0, 1] == pytest.approx(np.exp(-2.0), abs=1e-15)


def test_kernel_matches_elementwise_oracle():
    rng = np.random.default_rng(3)
    y = rng.uniform(-5, 5, size=(20, 2))
    beta = 1.3
    for form in ("as-printed", "squared"):
        basis = build_kernel(y, beta, form)
        for i in range(20):
            for j in range(20):
                d = np.hypot(*(y[i] - y[j]))
                want = (
                    np.exp(-d / (2 * beta))
                    if form == "as-printed"
                    else np.exp(-(d**2) / (2 * beta**2))
                )
                assert basis.G[i, j] == pytest.approx(want, abs=1e-15)
        assert np.abs(basis.G - basis.G.T).max() < 1e-15


def test_kernel_rejects_nonfinite():
    with pytest.raises(ValidationError):
        build_kernel(np.array([[0.0, np.nan]]), beta=1.0)


# ---------------------------------------------------------------- initialize


def test_initialize_identity_and_sigma():
    x = np.array([[0.0, 0.0]])
    y = np.array([[2.0, 0.0]])
    tr, sigma2 = initialize(x, y, RegistrationConfig(mode="rigid"))
    assert (tr.s, tr.t, tr.t2) == (1.0, 0.0, 0.0)
    assert sigma2 == pytest.approx(2.0)


def test_initialize_coincident_single_point_clamps():
    x = y = np.array([[1.0, 1.0]])
    _, sigma2 = initialize(x, y, RegistrationConfig(mode="rigid"))
    assert sigma2 > 0


def test_initialize_matches_double_loop_oracle():
    for seed in range(5):
        _, x, y = random_instance(seed, n=12, m=9)
        _, sigma2 = initialize(x, y, RegistrationConfig(mode="rigid"))
        acc = 0.0
        for xn in x:
            for ym in y:
                acc += np.sum((xn - ym) ** 2)
        assert sigma2 == pytest.approx(acc / (2 * 12 * 9), rel=1e-12)


def test_initialize_hybrid_zero_weights():
    _, x, y = random_instance(1)
    tr, _ = initialize(x, y, RegistrationConfig(mode="hybrid"))
    assert tr.w2 is not None and np.all(tr.w2 == 0)
    assert tr.w1 is None
    np.testing.assert_allclose(tr.apply(y), y)


# ---------------------------------------------------------------- e-step


def test_e_step_single_pair_no_noise():
    x = np.array([[1.0, 2.0]])
    y = np.array([[1.0, 2.0]])
    tr = HybridTransform(mode="rigid")
    post = e_step(x, y, tr, sigma2=0.5, w=0.0)
    assert post.P[0, 0] == pytest.approx(1.0)
    assert post.noise_mass[0] == 0.0


def test_e_step_noise_only_limit():
    _, x, y = random_instance(2)
    tr = HybridTransform(mode="rigid")
    post = e_step(x, y, tr, sigma2=1.0, w=1.0 - 1e-12)
    assert post.P.max() < 1e-6
    assert np.allclose(post.noise_mass, 1.0, atol=1e-6)


def test_e_step_equidistant_symmetry():
    x = np.array([[0.0, 0.0]])
    y = np.array([[1.0, 0.0], [-1.0, 0.0]])
    tr = HybridTransform(mode="rigid")
    post = e_step(x, y, tr, sigma2=0.7, w=0.0)
    assert post.P[0, 0] == pytest.approx(0.5, abs=1e-15)
    assert post.P[1, 0] == pytest.approx(0.5, abs=1e-15)


def test_e_step_columns_sum_to_one():
    for seed in range(10):
        rng, x, y = random_instance(seed)
        tr = HybridTransform(mode="rigid", s=1.1, t=0.3, t2=-0.2)
        post = e_step(x, y, tr, sigma2=0.9, w=rng.uniform(0, 0.9))
        np.testing.assert_allclose(post.column_sums(), 1.0, atol=1e-12)


def test_e_step_underflow_reported():
    x = np.array([[0.0, 0.0]])
    y = np.array([[1e6, 1e6]])
    tr = HybridTransform(mode="rigid")
    with pytest.raises(NumericalUnderflowError):
        e_step(x, y, tr, sigma2=1e-4, w=0.0)


# ---------------------------------------------------------------- m-steps


def test_m_step_axis1_exact_regression():
    rng = np.random.default_rng(4)
    y = rng.uniform(0, 10, size=(6, 2))
    x = y.copy()
    x[:, 0] = 2.0 * y[:, 0] + 1.0
    p = np.eye(6)
    s, t = m_step_axis1(x, y, p)
    assert s == pytest.approx(2.0, abs=1e-12)
    assert t == pytest.approx(1.0, abs=1e-11)


def test_m_step_axis1_identity():
    rng = np.random.default_rng(5)
    y = rng.uniform(0, 10, size=(7, 2))
    s, t = m_step_axis1(y, y, np.eye(7))
    assert s == pytest.approx(1.0, abs=1e-12)
    assert t == pytest.approx(0.0, abs=1e-11)


def test_m_step_axis1_degenerate_fallback():
    y = np.zeros((4, 2))
    y[:, 0] = 3.0  # no variance on axis 1
    x = np.zeros((4, 2))
    x[:, 0] = 5.0
    s, t = m_step_axis1(x, y, np.full((4, 4), 0.25))
    assert s == 1.0
    assert t == pytest.approx(2.0)


def test_m_step_axis1_matches_numeric_minimizer():
    for seed in range(50):
        rng, x, y = random_instance(seed, n=10, m=8)
        p = random_posterior(rng, 8, 10)
        s, t = m_step_axis1(x, y, p)

        def loss(v):
            return np.sum(p * (x[None, :, 0] - v[0] * y[:, None, 0] - v[1]) ** 2)

        res = minimize(loss, x0=[0.5, 0.5], method="Nelder-Mead",
                       options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 10000})
        assert abs(s - res.x[0]) < 1e-6
        assert abs(t - res.x[1]) < 1e-6


def test_m_step_axis2_zero_rhs_gives_zero_weights():
    rng = np.random.default_rng(6)
    y = rng.uniform(0, 10, size=(6, 2))
    x = y.copy()
    basis = build_kernel(y, 2.0)
    w = m_step_axis2(x, y, np.eye(6), basis, lam=2.0, sigma2=0.5)
    np.testing.assert_allclose(w, 0.0, atol=1e-14)


def test_m_step_axis2_huge_lambda_kills_weights():
    rng, x, y = random_instance(7)
    p = random_posterior(rng, 8, 10)
    basis = build_kernel(y, 2.0)
    w = m_step_axis2(x, y, p, basis, lam=1e12, sigma2=1.0)
    assert np.abs(w).max() < 1e-9


def test_m_step_axis2_stationarity_and_numeric_minimizer():
    for seed in range(50):
        rng, x, y = random_instance(seed, n=9, m=6)
        p = random_posterior(rng, 6, 9)
        lam, sigma2 = rng.uniform(0.5, 3.0), rng.uniform(0.3, 2.0)
        basis = build_kernel(y, 2.0)
        w = m_step_axis2(x, y, p, basis, lam, sigma2)

        g = basis.G

        def mstep_obj(wv):
            disp = y[:, 1] + g @ wv
            data = np.sum(p * (x[None, :, 1] - disp[:, None]) ** 2) / (2 * sigma2)
            return data + 0.5 * lam * wv @ g @ wv

        # Finite-difference gradient must vanish at the solve's solution.
        grad = finite_difference_gradient(mstep_obj, w)
        assert np.abs(grad).max() < 1e-8

        # Independent numeric minimizer: the objective is quadratic, so one
        # finite-difference Newton step from zero finds the optimum.
        w_star = newton_minimize_quadratic(mstep_obj, 6)
        assert np.abs(w - w_star).max() < 1e-6


def finite_difference_gradient(fn, w, h=1e-3):
    # The M-step objective is quadratic in W, so central differences carry no
    # truncation error; a generous step keeps the roundoff term negligible.
    grad = np.zeros_like(w)
    for i in range(len(w)):
        e = np.zeros_like(w)
        e[i] = h
        grad[i] = (fn(w + e) - fn(w - e)) / (2 * h)
    return grad


def newton_minimize_quadratic(fn, dim, h=1e-3):
    """Minimize a quadratic black-box function by one Newton step from zero,
    with gradient and Hessian taken by central differences."""
    zero = np.zeros(dim)
    g0 = finite_difference_gradient(fn, zero, h)
    hess = np.empty((dim, dim))
    for i in range(dim):
        for j in range(dim):
            ei = np.zeros(dim)
            ej = np.zeros(dim)
            ei[i] = h
            ej[j] = h
            hess[i, j] = (
                fn(ei + ej) - fn(ei - ej) - fn(-ei + ej) + fn(-ei - ej)
            ) / (4 * h * h)
    hess = (hess + hess.T) / 2
    return np.linalg.solve(hess, -g0)


def test_m_step_translation_mean_shift():
    rng = np.random.default_rng(8)
    y = rng.uniform(0, 10, size=(5, 2))
    x = y + np.array([0.0, 1.5])
    t2 = m_step_translation(x, y, np.eye(5), axis=1)
    assert t2 == pytest.approx(1.5, abs=1e-12)


# ---------------------------------------------------------------- sigma


def test_update_sigma_perfect_alignment_clamps():
    rng = np.random.default_rng(9)
    y = rng.uniform(0, 10, size=(5, 2))
    tr = HybridTransform(mode="rigid")
    sigma2 = update_sigma(y, y, tr, np.eye(5), sigma_floor=1e-9)
    assert sigma2 == 1e-9


def test_update_sigma_single_pair_closed_form():
    x = np.array([[3.0, 0.0]])
    y = np.array([[0.0, 0.0]])
    tr = HybridTransform(mode="rigid")
    sigma2 = update_sigma(x, y, tr, np.array([[1.0]]))
    assert sigma2 == pytest.approx(9.0 / 2.0)


def test_update_sigma_matches_double_loop():
    for seed in range(5):
        rng, x, y = random_instance(seed)
        p = random_posterior(rng, 8, 10)
        tr = HybridTransform(mode="rigid", s=1.05, t=0.5, t2=0.2)
        got = update_sigma(x, y, tr, p)
        ty = tr.apply(y)
        acc = sum(
            p[m, n] * np.sum((x[n] - ty[m]) ** 2)
            for m in range(8)
            for n in range(10)
        )
        assert got == pytest.approx(acc / (2 * p.sum()), rel=1e-12)


# ---------------------------------------------------------------- objective


def test_objective_zero_weights_equals_data_term():
    rng, x, y = random_instance(10)
    basis = build_kernel(y, 2.0)
    tr = HybridTransform(mode="hybrid", w2=np.zeros(8), basis=basis)
    e_with = objective(x, y, tr, sigma2=1.0, w=0.2, lam=5.0)
    tr_rigid = HybridTransform(mode="rigid")
    e_rigid = objective(x, y, tr_rigid, sigma2=1.0, w=0.2, lam=5.0)
    assert e_with == pytest.approx(e_rigid, rel=1e-12)


def test_objective_unit_density_zero():
    x = y = np.array([[2.0, 3.0]])
    tr = HybridTransform(mode="rigid")
    e = objective(x, y, tr, sigma2=1.0 / (2 * np.pi), w=0.0, lam=0.0)
    assert e == pytest.approx(0.0, abs=1e-12)


def test_objective_matches_two_term_oracle():
    for seed in range(5):
        rng, x, y = random_instance(seed)
        basis = build_kernel(y, 2.0)
        w2 = rng.normal(0, 0.3, 8)
        tr = HybridTransform(mode="hybrid", s=1.1, t=0.4, w2=w2, basis=basis)
        sigma2, w, lam = 0.8, 0.25, 1.7
        got = objective(x, y, tr, sigma2, w, lam)
        ty = tr.apply(y)
        e1 = 0.0
        for n in range(len(x)):
            p = w / len(x)
            for m in range(len(y)):
                d2 = np.sum((x[n] - ty[m]) ** 2)
                p += (1 - w) / (2 * np.pi * sigma2 * len(y)) * np.exp(-d2 / (2 * sigma2))
            e1 -= np.log(p)
        want = e1 + lam / 2 * (w2 @ basis.G @ w2)
        assert got == pytest.approx(want, rel=1e-12)


def test_objective_underflow_with_zero_noise():
    x = np.array([[0.0, 0.0]])
    y = np.array([[1e6, 1e6]])
    tr = HybridTransform(mode="rigid")
    with pytest.raises(NumericalUnderflowError):
        objective(x, y, tr, sigma2=1e-4, w=0.0, lam=0.0)


# ---------------------------------------------------------------- register


def test_register_identity_recovery():
    rng = np.random.default_rng(11)
    x = rng.uniform([5, 0.5], [65, 7.5], size=(100, 2))
    res = register(x, x, RegistrationConfig(w=0.1, mode="hybrid"))
    range1 = np.ptp(x[:, 0])
    range2 = np.ptp(x[:, 1])
    assert abs(res.transform.s - 1.0) <= 1e-3
    assert abs(res.transform.t) <= 1e-3 * range1
    disp = res.transform.apply(x)[:, 1] - x[:, 1]
    assert np.abs(disp).max() <= 1e-2 * range2


def test_register_recovers_axis1_shift():
    rng = np.random.default_rng(12)
    x = rng.uniform([5, 0.5], [65, 7.5], size=(80, 2))
    y = x.copy()
    y[:, 0] += 3.0  # reference shifted right; T must shift it back
    res = register(x, y, RegistrationConfig(w=0.1))
    range1 = np.ptp(x[:, 0])
    implied_shift = res.transform.apply(y)[:, 0] - y[:, 0]
    assert np.abs(implied_shift + 3.0).max() <= 1e-2 * range1


def test_register_objective_nonincreasing():
    for seed in range(20):
        rng = np.random.default_rng(seed)
        n, m = rng.integers(15, 40, 2)
        x = rng.uniform(0, 50, size=(n, 2))
        y = rng.uniform(0, 50, size=(m, 2))
        for mode in ("hybrid", "rigid", "nonrigid"):
            res = register(x, y, RegistrationConfig(w=0.3, mode=mode, max_iter=60))
            deltas = np.diff(res.objective_trajectory)
            assert (deltas <= 1e-9).all(), f"seed {seed} mode {mode}: {deltas.max()}"


def test_register_translation_equivariance():
    rng = np.random.default_rng(13)
    x = rng.uniform(0, 30, size=(25, 2))
    y = rng.uniform(0, 30, size=(20, 2))
    delta = np.array([7.3, -2.1])
    for mode in ("hybrid", "rigid", "nonrigid"):
        cfg = RegistrationConfig(w=0.2, mode=mode, max_iter=40)
        res_a = register(x, y, cfg)
        res_b = register(x + delta, y + delta, cfg)
        ra = np.linalg.norm(
            x[None, :, :] - res_a.transform.apply(y)[:, None, :], axis=2
        )
        rb = np.linalg.norm(
            (x + delta)[None, :, :] - res_b.transform.apply(y + delta)[:, None, :],
            axis=2,
        )
        np.testing.assert_allclose(ra, rb, atol=1e-9)


def test_register_hybrid_axis_separation():
    rng = np.random.default_rng(14)
    y = rng.uniform(0, 10, size=(12, 2))
    basis = build_kernel(y, 2.0)
    w2 = rng.normal(0, 0.5, 12)
    base = HybridTransform(mode="hybrid", s=1.3, t=2.0, w2=w2, basis=basis)
    out1 = base.apply(y)
    # Axis-2 output must ignore s,t; axis-1 output must ignore W.
    changed_st = HybridTransform(mode="hybrid", s=0.7, t=-1.0, w2=w2, basis=basis)
    out2 = changed_st.apply(y)
    np.testing.assert_array_equal(out1[:, 1], out2[:, 1])
    changed_w = HybridTransform(
        mode="hybrid", s=1.3, t=2.0, w2=rng.normal(0, 0.5, 12), basis=basis
    )
    out3 = changed_w.apply(y)
    np.testing.assert_array_equal(out1[:, 0], out3[:, 0])


def test_register_exact_hybrid_image_reaches_floor():
    rng = np.random.default_rng(15)
    y = rng.uniform([0, 0], [40, 8], size=(60, 2))
    basis = build_kernel(y, 5.0)
    truth = HybridTransform(
        mode="hybrid", s=1.04, t=2.0, w2=rng.normal(0, 0.05, 60), basis=basis
    )
    x = truth.apply(y)
    cfg = RegistrationConfig(w=0.0, mode="hybrid")
    res = register(x, y, cfg)
    floor = res.sigma2_trajectory.min()
    assert res.sigma2_trajectory[-1] == pytest.approx(floor)
    assert res.sigma2_trajectory[-1] < 1e-6


def test_register_swap_axes():
    rng = np.random.default_rng(16)
    y = rng.uniform([0, 0], [40, 40], size=(50, 2))
    x = y.copy()
    x[:, 1] = 1.05 * y[:, 1] + 2.0  # similarity acts on axis 2
    res = register(x, y, RegistrationConfig(w=0.05, swap_axes=True, max_iter=100))
    assert res.transform.rigid_axis == 1
    assert res.transform.s == pytest.approx(1.05, abs=5e-3)
    assert res.transform.t == pytest.approx(2.0, abs=0.2)


def test_register_needs_two_reference_points_for_basis_modes():
    x = np.array([[0.0, 0.0], [1.0, 1.0]])
    y = np.array([[0.0, 0.0]])
    with pytest.raises(ValidationError):
        register(x, y, RegistrationConfig(mode="hybrid"))
    register(x, y, RegistrationConfig(mode="rigid", max_iter=5))  # allowed


def test_register_nonconvergence_flagged():
    rng = np.random.default_rng(17)
    x = rng.uniform(0, 50, size=(30, 2))
    y = rng.uniform(0, 50, size=(25, 2))
    res = register(x, y, RegistrationConfig(w=0.3, max_iter=2))
    assert res.iterations == 2
    assert not res.converged


def test_transform_document_round_trip():
    from chromalign.registration import transform_from_dict, transform_to_dict

    rng = np.random.default_rng(19)
    pts = rng.uniform(0, 40, size=(30, 2))
    for mode, swap in (("hybrid", False), ("hybrid", True), ("rigid", False),
                       ("nonrigid", False)):
        x = pts + rng.normal(0, 0.2, pts.shape)
        res = register(
            x, pts, RegistrationConfig(w=0.2, mode=mode, swap_axes=swap, max_iter=30)
        )
        doc = transform_to_dict(res.transform)
        back = transform_from_dict(doc)
        np.testing.assert_array_equal(back.apply(pts), res.transform.apply(pts))
        assert back.mode == mode


def test_register_constant_axis2_cloud():
    # A cloud with zero spread on axis 2 must not blow up the standardization.
    rng = np.random.default_rng(20)
    y = np.stack([rng.uniform(0, 50, 25), np.full(25, 3.0)], axis=1)
    x = y.copy()
    x[:, 0] += 2.0
    res = register(x, y, RegistrationConfig(w=0.1, max_iter=80))
    ty = res.transform.apply(y)
    assert np.abs(ty - x).max() < 0.15


def test_register_single_point_rigid():
    x = np.array([[10.0, 2.0]])
    y = np.array([[7.0, 1.0]])
    res = register(x, y, RegistrationConfig(w=0.0, mode="rigid"))
    ty = res.transform.apply(y)
    np.testing.assert_allclose(ty, x, atol=1e-9)
    assert res.transform.s == 1.0  # degenerate fit falls back to translation


def test_scan_noise_weight_reports_ten_values():
    rng = np.random.default_rng(18)
    x = rng.uniform(0, 20, size=(15, 2))
    y = x + rng.normal(0, 0.1, size=x.shape)
    records = scan_noise_weight(x, y, RegistrationConfig(max_iter=25))
    assert len(records) == 10
    assert records[0]["w"] == 0.0
    assert records[-1]["w"] == pytest.approx(0.9)
    assert all("objective" in r for r in records)
