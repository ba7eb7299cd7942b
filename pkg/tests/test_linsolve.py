import numpy as np
import pytest

from tsfem.linsolve import (
    BlockMatrix,
    BlockTangent,
    GmresConfig,
    block_jacobi_preconditioner,
    block_to_real,
    build_graph,
    diag_to_real,
    from_real,
    gmres,
    pinned_operator,
    rhs_to_real,
    to_real,
)

RNG = np.random.default_rng(321)


def random_symmetric_block(m, rng=RNG):
    """Random complex block with the mode-plane symmetry K[-m,-n] = conj(K[m,n])."""
    r = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
    return r + np.conj(r[::-1, ::-1])


def random_symmetric_vector(m, rng=RNG):
    r = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    return r + np.conj(r[::-1])


def small_block_system(n_nodes, n_modes, rng=RNG, diag_boost=0.0):
    m = 2 * n_modes - 1
    elements = np.column_stack([np.arange(n_nodes - 1), np.arange(1, n_nodes)])
    rows, cols, _ = build_graph(elements, n_nodes)
    blocks = np.stack([random_symmetric_block(m, rng) for _ in rows])
    if diag_boost:
        blocks[rows == cols] += diag_boost * np.eye(m)
    rhs = np.stack([random_symmetric_vector(m, rng) for _ in range(n_nodes)])
    return BlockMatrix(rows, cols, blocks, n_nodes), rhs


def steady_imag_pins(n_nodes, ncomp, n_modes):
    pins = np.zeros((n_nodes, ncomp, 2 * n_modes), dtype=bool)
    pins[:, :, 1] = True
    return pins.ravel()


class TestRealMapping:
    def test_round_trip_is_identity(self):
        x = np.stack([random_symmetric_vector(7) for _ in range(5)])
        z = rhs_to_real(x)
        np.testing.assert_allclose(from_real(z), x, atol=1e-15)

    def test_n1_steady_problem(self):
        sys_c, rhs = small_block_system(3, 1, diag_boost=4.0)
        real_sys, real_rhs = to_real(sys_c, rhs)
        assert real_sys.block_size == 2
        dense = real_sys.to_dense()
        # steady imag rows/columns carry no coupling before pinning
        np.testing.assert_allclose(dense[1::2, 0::2], 0.0, atol=1e-14)

    def test_real_solve_matches_complex_dense(self):
        n_nodes, n_modes = 4, 3
        sys_c, rhs = small_block_system(n_nodes, n_modes, diag_boost=8.0)
        x_complex = np.linalg.solve(sys_c.to_dense(), rhs.ravel()).reshape(n_nodes, -1)

        real_sys, real_rhs = to_real(sys_c, rhs)
        pins = steady_imag_pins(n_nodes, 1, n_modes)
        real_rhs[pins] = 0.0
        op = pinned_operator(real_sys.matvec, pins)
        res = gmres(op, real_rhs, GmresConfig(restart=60, tol=1e-13, max_matvecs=500),
                    precond=block_jacobi_preconditioner(real_sys, pins))
        assert res.converged
        x_back = from_real(res.x.reshape(n_nodes, -1))
        np.testing.assert_allclose(x_back, x_complex, atol=1e-10)

    def test_symmetry_violation_rejected(self):
        sys_c, rhs = small_block_system(3, 2)
        sys_c.blocks[0, 0, 1] += 1.0  # break the mode-plane symmetry
        with pytest.raises(ValueError, match="symmetry"):
            to_real(sys_c, rhs)

    def test_block_to_real_matches_complex_action(self):
        # acting on a conjugate-symmetric vector commutes with the mapping
        for n_modes in (1, 2, 4):
            m = 2 * n_modes - 1
            k = random_symmetric_block(m)
            x = random_symmetric_vector(m)
            y = k @ x
            t = block_to_real(k)
            z = t @ rhs_to_real(x)
            np.testing.assert_allclose(z, rhs_to_real(y), atol=1e-12)

    def test_diag_to_real_matches_block_to_real(self):
        n_modes = 3
        d = RNG.standard_normal(n_modes) + 1j * RNG.standard_normal(n_modes)
        d[0] = d[0].real
        full = np.zeros((5, 5), dtype=complex)
        full[np.arange(5), np.arange(5)] = np.concatenate([np.conj(d[:0:-1]), d])
        np.testing.assert_allclose(diag_to_real(d), block_to_real(full), atol=1e-14)


def random_tangent(n_nodes, dim, n_modes, rng=RNG):
    elements = np.column_stack([np.arange(n_nodes - 1), np.arange(1, n_nodes)])
    rows, cols, _ = build_graph(elements, n_nodes)
    e = rows.shape[0]
    n2 = 2 * n_modes
    return BlockTangent(
        rows, cols, n_nodes, dim, n_modes,
        k_real=rng.standard_normal((e, n2, n2)),
        l_real=rng.standard_normal((e, n2, n2)),
        g_diag=rng.standard_normal((e, dim, n_modes)) + 1j * rng.standard_normal((e, dim, n_modes)),
        d_diag=rng.standard_normal((e, dim, n_modes)) + 1j * rng.standard_normal((e, dim, n_modes)),
    )


def dense_tangent_oracle(tg):
    """Plain-loop dense expansion, independent of the vectorized matvec."""
    d, n = tg.dim, tg.n_modes
    n2 = 2 * n
    b = (d + 1) * n2
    dense = np.zeros((tg.n_nodes * b, tg.n_nodes * b))
    for e in range(len(tg.rows)):
        r0, c0 = tg.rows[e] * b, tg.cols[e] * b
        for i in range(d):
            dense[r0 + i * n2:r0 + i * n2 + n2, c0 + i * n2:c0 + i * n2 + n2] += tg.k_real[e]
            for m in range(n):
                gm = tg.g_diag[e, i, m]
                dm = tg.d_diag[e, i, m]
                rr, cc = r0 + i * n2 + 2 * m, c0 + d * n2 + 2 * m
                dense[rr, cc] += gm.real
                dense[rr, cc + 1] += -gm.imag
                dense[rr + 1, cc] += gm.imag
                dense[rr + 1, cc + 1] += gm.real
                rr, cc = r0 + d * n2 + 2 * m, c0 + i * n2 + 2 * m
                dense[rr, cc] += dm.real
                dense[rr, cc + 1] += -dm.imag
                dense[rr + 1, cc] += dm.imag
                dense[rr + 1, cc + 1] += dm.real
        dense[r0 + d * n2:r0 + b, c0 + d * n2:c0 + b] += tg.l_real[e]
    return dense


class TestBlockTangent:
    def test_zero_vector(self):
        tg = random_tangent(3, 3, 2)
        np.testing.assert_array_equal(tg.matvec(np.zeros(tg.n_dof)), np.zeros(tg.n_dof))

    def test_matvec_matches_dense_oracle(self):
        for n_nodes, dim, n_modes in [(2, 3, 2), (4, 2, 3), (3, 3, 4), (2, 1, 1)]:
            tg = random_tangent(n_nodes, dim, n_modes)
            dense = dense_tangent_oracle(tg)
            x = RNG.standard_normal(tg.n_dof)
            y = tg.matvec(x)
            ref = dense @ x
            assert np.linalg.norm(y - ref) <= 1e-12 * np.linalg.norm(ref)
            np.testing.assert_allclose(tg.to_dense(), dense, atol=1e-13)

    def test_identity_momentum_pass_through(self):
        tg = random_tangent(3, 3, 2)
        n2 = 2 * tg.n_modes
        tg.k_real[:] = 0.0
        tg.k_real[tg.rows == tg.cols] = np.eye(n2)
        tg.l_real[:] = 0.0
        tg.g_diag[:] = 0.0
        tg.d_diag[:] = 0.0
        x = RNG.standard_normal(tg.n_dof)
        y = tg.matvec(x).reshape(3, 4, n2)
        xr = x.reshape(3, 4, n2)
        np.testing.assert_allclose(y[:, :3], xr[:, :3], atol=1e-14)
        np.testing.assert_allclose(y[:, 3], 0.0, atol=1e-14)

    def test_memory_accounting(self):
        for n_modes in (1, 2, 4, 7):
            tg = random_tangent(3, 3, n_modes)
            rep = tg.size_report()
            assert rep["stored_per_edge"] <= rep["budget_per_edge"] < rep["naive_per_edge"]

    def test_diag_blocks_match_dense(self):
        tg = random_tangent(3, 2, 2)
        dense = dense_tangent_oracle(tg)
        b = (tg.dim + 1) * 2 * tg.n_modes
        diag = tg.diag_blocks()
        for node in range(3):
            np.testing.assert_allclose(
                diag[node], dense[node * b:(node + 1) * b, node * b:(node + 1) * b],
                atol=1e-13)


class TestGmres:
    def test_identity_converges_immediately(self):
        b = RNG.standard_normal(10)
        res = gmres(lambda x: x, b, GmresConfig(restart=5, tol=1e-12, max_matvecs=50))
        assert res.converged and res.matvecs <= 3
        np.testing.assert_allclose(res.x, b, atol=1e-12)

    def test_spd_matches_direct_solve(self):
        a = RNG.standard_normal((50, 50))
        a = a @ a.T + 50 * np.eye(50)
        b = RNG.standard_normal(50)
        res = gmres(lambda x: a @ x, b, GmresConfig(restart=50, tol=1e-8, max_matvecs=2000))
        assert res.converged
        np.testing.assert_allclose(res.x, np.linalg.solve(a, b), atol=1e-7)

    def test_restart_two_still_converges(self):
        a = np.array([[4.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 5.0]])
        b = np.array([1.0, 2.0, 3.0])
        res = gmres(lambda x: a @ x, b, GmresConfig(restart=2, tol=1e-10, max_matvecs=500))
        assert res.converged
        np.testing.assert_allclose(res.x, np.linalg.solve(a, b), atol=1e-8)

    def test_reported_residual_is_true_residual(self):
        a = RNG.standard_normal((30, 30)) + 10 * np.eye(30)
        b = RNG.standard_normal(30)
        tol = 1e-6
        res = gmres(lambda x: a @ x, b, GmresConfig(restart=10, tol=tol, max_matvecs=1000))
        assert res.converged
        assert np.linalg.norm(a @ res.x - b) <= tol * np.linalg.norm(b) * 1.01

    def test_history_non_increasing(self):
        a = RNG.standard_normal((40, 40)) + 8 * np.eye(40)
        b = RNG.standard_normal(40)
        res = gmres(lambda x: a @ x, b, GmresConfig(restart=7, tol=1e-9, max_matvecs=2000))
        hist = np.array(res.residuals)
        assert np.all(np.diff(hist) <= 1e-9 * hist[0])

    def test_nan_aborts_with_diagnostics(self):
        def bad(x):
            return np.full_like(x, np.nan)

        with pytest.raises(RuntimeError, match="matvec"):
            gmres(bad, np.ones(4), GmresConfig(restart=3, tol=1e-8, max_matvecs=10))

    def test_zero_rhs(self):
        res = gmres(lambda x: x, np.zeros(5))
        assert res.converged and np.all(res.x == 0.0)


class TestBlockJacobi:
    def test_diagonal_system_converges_in_one_iteration(self):
        n_nodes, m = 4, 3
        rows = cols = np.arange(n_nodes)
        blocks = np.stack([np.diag(RNG.uniform(1, 3, m)) for _ in range(n_nodes)])
        sys_r = BlockMatrix(rows, cols, blocks, n_nodes)
        b = RNG.standard_normal(n_nodes * m)
        pre = block_jacobi_preconditioner(sys_r)
        res = gmres(sys_r.matvec, b, GmresConfig(restart=20, tol=1e-12, max_matvecs=50), precond=pre)
        assert res.converged and res.matvecs <= 3

    def test_linearity(self):
        tg = random_tangent(3, 2, 2)
        tg.k_real += 5 * np.eye(2 * tg.n_modes)
        tg.l_real += 5 * np.eye(2 * tg.n_modes)
        pre = block_jacobi_preconditioner(tg)
        x = RNG.standard_normal(tg.n_dof)
        y = RNG.standard_normal(tg.n_dof)
        a, bcoef = 0.7, -1.3
        lhs = pre(a * x + bcoef * y)
        rhs = a * pre(x) + bcoef * pre(y)
        np.testing.assert_allclose(lhs, rhs, atol=1e-13 * np.max(np.abs(rhs)))

    def test_singular_block_falls_back_with_warning(self):
        n_nodes, m = 2, 2
        rows = cols = np.arange(n_nodes)
        blocks = np.stack([np.eye(m), np.zeros((m, m))])
        sys_r = BlockMatrix(rows, cols, blocks, n_nodes)
        with pytest.warns(UserWarning, match="singular"):
            pre = block_jacobi_preconditioner(sys_r)
        out = pre(np.ones(n_nodes * m))
        assert np.all(np.isfinite(out))


class TestPinnedOperator:
    def test_pins_act_as_identity(self):
        a = RNG.standard_normal((6, 6)) + 6 * np.eye(6)
        pins = np.array([False, True, False, False, True, False])
        op = pinned_operator(lambda x: a @ x, pins)
        b = RNG.standard_normal(6)
        b[pins] = 0.0
        res = gmres(op, b, GmresConfig(restart=6, tol=1e-12, max_matvecs=100))
        assert res.converged
        assert np.all(res.x[pins] == 0.0)
        reduced = a[np.ix_(~pins, ~pins)]
        np.testing.assert_allclose(res.x[~pins], np.linalg.solve(reduced, b[~pins]), atol=1e-9)
