import numpy as np
import pytest

from bbgrad import burgers
from bbgrad.bb import BBConfig, DefaultInit, StepRule, run
from bbgrad.errors import NewtonFailureError
from bbgrad.linalg import wdot


def quiet_config(level=4, dt=0.125, beta=1.0, **overrides):
    base = dict(
        viscosity=0.01,
        alpha1=1.0,
        alpha2=1.0,
        beta=beta,
        level=level,
        dt=dt,
        y0=lambda x: np.zeros_like(x),
    )
    base.update(overrides)
    return burgers.BurgersConfig(**base)


@pytest.fixture(scope="module")
def bench():
    return burgers.assemble(burgers.benchmark_config(0.5, 5, 2.0**-4))


class TestGrid:
    def test_control_window_strict_interior(self):
        asm = burgers.assemble(burgers.benchmark_config(0.5, 5, 2.0**-4))
        xs = asm.x_int[asm.control_idx]
        assert np.all((xs > 0.1) & (xs < 0.4))
        # neighbours just outside the window are excluded
        assert 0.1 not in xs and 0.4 not in xs
        assert asm.control_idx.size == 9  # nodes 4..12 at h = 1/32

    def test_time_grid(self):
        asm = burgers.assemble(burgers.benchmark_config(0.5, 5, 2.0**-4))
        assert asm.n_steps == 16
        assert asm.n_steps * asm.dt == pytest.approx(1.0)


class TestConvection:
    def test_zero_state(self):
        c, jac = burgers.convection(np.zeros(9))
        assert np.all(c == 0.0)
        assert jac.nnz == 0 or np.all(jac.toarray() == 0.0)

    def test_constant_patch_has_no_transport(self):
        y = np.zeros(17)
        y[5:10] = 3.0  # flat interior patch
        c, _ = burgers.convection(y)
        # strictly inside the patch the derivative vanishes
        assert np.max(np.abs(c[6:9])) == 0.0

    def test_jacobian_matches_finite_differences(self):
        rng = np.random.default_rng(0)
        y = rng.standard_normal(17)
        _, jac = burgers.convection(y)
        t = 1e-6
        for _ in range(5):
            d = rng.standard_normal(17)
            c_plus, _ = burgers.convection(y + t * d)
            c_minus, _ = burgers.convection(y - t * d)
            fd = (c_plus - c_minus) / (2.0 * t)
            np.testing.assert_allclose(jac @ d, fd, rtol=1e-7, atol=1e-9)

    def test_quadratic_scaling(self):
        rng = np.random.default_rng(1)
        y = rng.standard_normal(9)
        c1, _ = burgers.convection(y)
        c2, _ = burgers.convection(2.0 * y)
        np.testing.assert_allclose(c2, 4.0 * c1, rtol=1e-14)


class TestState:
    def test_zero_everything_stays_zero(self):
        asm = burgers.assemble(quiet_config())
        Y, log = burgers.solve_state(
            asm, np.zeros(asm.n_steps * asm.n_control), collect_newton=True
        )
        assert np.all(Y == 0.0)
        assert all(len(residuals) == 1 for residuals in log)

    def test_uncontrolled_decay(self):
        asm = burgers.assemble(burgers.benchmark_config(0.5, 5, 2.0**-4))
        Y = burgers.solve_state(asm, np.zeros(asm.n_steps * asm.n_control))
        norms = [float(y @ (asm.M @ y)) for y in Y]
        assert all(b <= a * (1 + 1e-12) for a, b in zip(norms, norms[1:]))

    def test_newton_quadratic_convergence(self):
        asm = burgers.assemble(burgers.benchmark_config(0.5, 5, 2.0**-4))
        _, log = burgers.solve_state(
            asm, np.zeros(asm.n_steps * asm.n_control), collect_newton=True
        )
        residuals = log[0]  # first step sees the full Gaussian transient
        assert len(residuals) >= 4
        # terminal phase contracts quadratically until the rounding floor
        checked = 0
        for r_prev, r_next in zip(residuals, residuals[1:]):
            if r_prev <= 0.5 and r_next > 1e-14:
                assert r_next <= 100.0 * r_prev**2
                checked += 1
        assert checked >= 2

    def test_newton_failure_carries_step(self):
        cfg = quiet_config(
            level=4,
            dt=0.25,
            y0=lambda x: 5.0 * np.exp(-20.0 * (x - 0.5) ** 2),
            newton_max=0,
        )
        asm = burgers.assemble(cfg)
        with pytest.raises(NewtonFailureError) as err:
            burgers.solve_state(asm, np.zeros(asm.n_steps * asm.n_control))
        assert err.value.step == 1


class TestAdjoint:
    def test_zero_residual_zero_adjoint(self):
        asm = burgers.assemble(quiet_config())
        Y = burgers.solve_state(asm, np.zeros(asm.n_steps * asm.n_control))
        P = burgers.solve_adjoint(asm, Y)
        assert np.all(P == 0.0)

    def test_rest_state_reduces_to_reversed_heat_flow(self):
        # at y = 0 the adjoint is the (symmetric) discrete heat adjoint, so
        # it must equal a forward implicit-Euler heat solve run on the
        # time-reversed source sequence
        cfg = quiet_config(
            level=5, dt=0.125, y_d=lambda t, x: np.sin(np.pi * x) * (1.0 + t)
        )
        asm = burgers.assemble(cfg)
        Y = burgers.solve_state(asm, np.zeros(asm.n_steps * asm.n_control))
        assert np.all(Y == 0.0)
        P = burgers.solve_adjoint(asm, Y)

        import scipy.sparse.linalg as spla

        op = (asm.M / asm.dt + cfg.viscosity * asm.K).tocsc()
        lu = spla.splu(op)
        q = np.zeros(asm.n_interior)
        forward = []
        for step in range(asm.n_steps, 0, -1):
            rhs = asm.M @ q / asm.dt + cfg.alpha1 * asm.dt * (asm.M @ asm.yd[step - 1])
            if step == asm.n_steps:
                rhs = rhs + cfg.alpha2 * (asm.M @ asm.zd)
            q = lu.solve(rhs)
            forward.append(q.copy())
        reversed_heat = np.array(forward[::-1])
        np.testing.assert_allclose(P, reversed_heat, rtol=1e-12, atol=1e-14)

    def test_tangent_pairing_matches_adjoint(self, bench):
        cfg = bench.config
        rng = np.random.default_rng(2)
        u = 0.3 * rng.standard_normal((bench.n_steps, bench.n_control))
        du = rng.standard_normal((bench.n_steps, bench.n_control))
        Y = burgers.solve_state(bench, u)
        P = burgers.solve_adjoint(bench, Y)
        Q = burgers.solve_tangent(bench, Y, du)

        lhs = 0.0
        for step in range(1, bench.n_steps + 1):
            r = Y[step] - bench.yd[step - 1]
            lhs += cfg.alpha1 * bench.dt * float(r @ (bench.M @ Q[step]))
        rT = Y[bench.n_steps] - bench.zd
        lhs += cfg.alpha2 * float(rT @ (bench.M @ Q[bench.n_steps]))

        rhs = -sum(
            float(du[step] @ (bench.M @ P[step])[bench.control_idx])
            for step in range(bench.n_steps)
        )
        assert lhs == pytest.approx(rhs, rel=1e-9)


class TestGradientAndObjective:
    def test_gradient_reduces_to_penalty_at_rest(self):
        asm = burgers.assemble(quiet_config())
        rng = np.random.default_rng(3)
        g0 = burgers.gradient(asm, 1.0, np.zeros(asm.n_steps * asm.n_control))
        np.testing.assert_allclose(g0, np.zeros_like(g0), atol=1e-15)

    def test_directional_derivative_matches_objective(self, bench):
        beta = 0.5
        rng = np.random.default_rng(4)
        dim = bench.n_steps * bench.n_control
        space = bench.control_space()
        for base in (np.zeros(dim), 0.5 * rng.standard_normal(dim)):
            g = burgers.gradient(bench, beta, base)
            for _ in range(5):
                du = rng.standard_normal(dim)
                t = 1e-5
                fd = (
                    burgers.objective(bench, beta, base + t * du)
                    - burgers.objective(bench, beta, base - t * du)
                ) / (2.0 * t)
                assert wdot(space, g, du) == pytest.approx(fd, rel=1e-6)

    def test_objective_zero_case(self):
        asm = burgers.assemble(quiet_config())
        assert burgers.objective(asm, 1.0, np.zeros(asm.n_steps * asm.n_control)) == 0.0

    def test_penalty_term_exact(self, bench):
        rng = np.random.default_rng(5)
        u = rng.standard_normal((bench.n_steps, bench.n_control))
        expected = 0.5 * bench.dt * float(np.einsum("ni,ni->", u, u @ bench.control_mass.T))
        j_with = burgers.objective(bench, 1.0, u.ravel())
        j_without = burgers.objective(bench, 1.0, u.ravel()) - expected
        # beta scaling isolates the penalty: J(beta=2) - J(beta=1) = penalty
        j_two = burgers.objective(bench, 2.0, u.ravel())
        assert j_two - j_with == pytest.approx(expected, rel=1e-12)
        assert j_without == pytest.approx(j_with - expected, rel=1e-12)

    def test_objective_descends_over_first_iterations(self):
        asm = burgers.assemble(burgers.benchmark_config(0.5, 5, 2.0**-4))
        problem = burgers.reduced_problem(asm, 0.5)
        config = BBConfig(
            rule=StepRule.BB1,
            eps=1e-10,
            max_iter=4,
            init=DefaultInit(),
            record_objective=True,
        )
        trace = run(problem, config)
        values = [r.objective for r in trace.records]
        assert values[1] < values[0] and values[2] < values[1] and values[3] < values[2]


class TestLocalConvergence:
    def test_r_linear_envelope(self):
        asm = burgers.assemble(burgers.benchmark_config(0.5, 5, 2.0**-4))
        problem = burgers.reduced_problem(asm, 0.5)
        trace = run(problem, BBConfig(rule=StepRule.BB1, eps=1e-10, init=DefaultInit()))
        norms = trace.grad_norms()
        ks = trace.ks().astype(float)
        slope, _ = np.polyfit(ks, np.log(norms), 1)
        theta = np.exp(slope)
        assert theta < 1.0
        lam2 = np.max(norms / (norms[0] * theta**ks))
        assert np.all(norms <= lam2 * norms[0] * theta**ks * (1 + 1e-12))

    def test_steps_remain_positive(self):
        asm = burgers.assemble(burgers.benchmark_config(0.5, 5, 2.0**-4))
        problem = burgers.reduced_problem(asm, 0.5)
        trace = run(problem, BBConfig(rule=StepRule.BB2, eps=1e-8, init=DefaultInit()))
        assert np.all(trace.alphas()[:-1] > 0.0)

    def test_determinism_bitwise(self):
        asm = burgers.assemble(burgers.benchmark_config(0.05, 5, 2.0**-4))
        problem = burgers.reduced_problem(asm, 0.05)
        config = BBConfig(rule=StepRule.ABB, eps=1e-6, init=DefaultInit())
        t1 = run(problem, config)
        t2 = run(problem, config)
        assert [(r.grad_norm, r.alpha) for r in t1.records] == [
            (r.grad_norm, r.alpha) for r in t2.records
        ]
        np.testing.assert_array_equal(t1.final_iterate, t2.final_iterate)
