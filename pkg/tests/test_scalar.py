import numpy as np
import pytest

from tsfem.linsolve import SolverConfig
from tsfem.mesh import generate_interval, generate_rect_tri
from tsfem.scalar import (
    CoercivityReport,
    ScalarCase,
    assemble_scalar,
    coercivity_probe,
    resolve_scalar_dirichlet,
    solve_scalar,
)
from tsfem.spectral import check_conjugate_symmetry, n_coeffs
from tsfem.verification import exact_steady_advection_diffusion_1d

RNG = np.random.default_rng(99)


def uniform_velocity(n_nodes, dim, modes):
    """Nodal velocity field, spatially uniform (hence divergence-free)."""
    modes = np.asarray(modes, dtype=complex)
    return np.tile(modes, (n_nodes, 1, 1))


def steady_1d_case(u, kappa, n_modes=1, omega=0.0, g_right=1.0, n_elems=8, L=1.0):
    mesh = generate_interval(L, n_elems)
    m = n_coeffs(n_modes)
    vel = np.zeros((1, m), dtype=complex)
    vel[0, n_modes - 1] = u
    g = np.zeros(m, dtype=complex)
    g[n_modes - 1] = g_right
    case = ScalarCase(
        kappa=kappa, omega=omega, n_modes=n_modes,
        velocity=uniform_velocity(mesh.n_nodes, 1, vel),
        dirichlet={"left": np.zeros(m, dtype=complex), "right": g},
    )
    return case, mesh


class TestAssembleScalar:
    def test_pure_diffusion_matches_hand_laplacian(self):
        # N=1, omega=0, u=0 on two elements of size h: K = kappa/h * tridiag(-1, 2, -1)
        case, mesh = steady_1d_case(0.0, 0.7, n_elems=2)
        sys_c, rhs = assemble_scalar(case, mesh)
        h = 0.5
        expected = (0.7 / h) * np.array([[1, -1, 0], [-1, 2, -1], [0, -1, 1]], dtype=float)
        np.testing.assert_allclose(sys_c.to_dense().real, expected, atol=1e-13)
        np.testing.assert_allclose(sys_c.to_dense().imag, 0.0, atol=1e-15)
        np.testing.assert_allclose(rhs, 0.0, atol=1e-15)

    def test_constant_field_consistency(self):
        # spatial constant in the steady mode is annihilated for any omega
        mesh = generate_interval(1.0, 5)
        m = n_coeffs(3)
        vel = np.zeros((1, m), dtype=complex)
        const = np.zeros(m, dtype=complex)
        const[2] = 4.2
        case = ScalarCase(kappa=0.3, omega=2.0, n_modes=3,
                          velocity=uniform_velocity(mesh.n_nodes, 1, vel),
                          dirichlet={"left": const, "right": const})
        sys_c, rhs = assemble_scalar(case, mesh)
        y = np.tile(const, (mesh.n_nodes, 1))
        resid = sys_c.matvec(y.ravel()).reshape(mesh.n_nodes, m) - rhs
        assert np.max(np.abs(resid)) < 1e-13

    def test_steady_supg_stencil(self):
        # N=1, omega=0: Galerkin + u^2 tau (w', phi') with tau from the
        # doubly-asymptotic steady formula
        u, kappa, n_elems = 1.3, 0.05, 4
        case, mesh = steady_1d_case(u, kappa, n_elems=n_elems)
        sys_c, _ = assemble_scalar(case, mesh)
        h = 1.0 / n_elems
        tau = ((2 * u / h) ** 2 + (12 * kappa / h**2) ** 2) ** -0.5
        n_nodes = n_elems + 1
        expected = np.zeros((n_nodes, n_nodes))
        keff = kappa + u**2 * tau
        for e in range(n_elems):
            conv = u * np.array([[-0.5, 0.5], [-0.5, 0.5]])
            diff = keff / h * np.array([[1, -1], [-1, 1]])
            expected[e:e + 2, e:e + 2] += conv + diff
        np.testing.assert_allclose(sys_c.to_dense().real, expected, atol=1e-12)

    def test_unknown_group_rejected(self):
        case, mesh = steady_1d_case(1.0, 0.1)
        case.dirichlet["bogus"] = np.zeros(1, dtype=complex)
        with pytest.raises(ValueError, match="bogus"):
            assemble_scalar(case, mesh)

    def test_womersley_warning(self):
        mesh = generate_interval(1.0, 2)  # h = 0.5, very coarse
        m = n_coeffs(4)
        case = ScalarCase(kappa=0.01, omega=5.0, n_modes=4,
                          velocity=uniform_velocity(mesh.n_nodes, 1, np.zeros((1, m))),
                          dirichlet={"left": np.zeros(m, dtype=complex)})
        with pytest.warns(UserWarning, match="Womersley"):
            assemble_scalar(case, mesh)


class TestSolveScalar:
    def test_diffusive_limit_matches_exact(self):
        u, kappa = 0.02, 2.0  # element Peclet ~ 6e-4
        case, mesh = steady_1d_case(u, kappa, n_elems=16)
        sol = solve_scalar(case, mesh)
        exact = exact_steady_advection_diffusion_1d(u, kappa, 1.0, 1.0)
        nodal = sol[:, 0].real
        ref = exact(mesh.coords[:, 0])
        assert np.max(np.abs(nodal - ref)) / np.max(np.abs(ref)) < 1e-3

    def test_dirichlet_exact_on_boundary(self):
        case, mesh = steady_1d_case(0.8, 0.05, n_modes=2, omega=1.0)
        sol = solve_scalar(case, mesh)
        nodes, vals = resolve_scalar_dirichlet(case, mesh)
        np.testing.assert_array_equal(sol[nodes], vals)

    def test_steady_flow_decouples_modes(self):
        # steady velocity, data only in mode 0: unsteady modes stay zero
        n_modes = 3
        m = n_coeffs(n_modes)
        mesh = generate_interval(1.0, 10)
        vel = np.zeros((1, m), dtype=complex)
        vel[0, n_modes - 1] = 0.9
        g = np.zeros(m, dtype=complex)
        g[n_modes - 1] = 1.0
        case = ScalarCase(kappa=0.2, omega=3.0, n_modes=n_modes,
                          velocity=uniform_velocity(mesh.n_nodes, 1, vel),
                          dirichlet={"left": np.zeros(m, complex), "right": g})
        sol = solve_scalar(case, mesh)
        unsteady = np.delete(sol, n_modes - 1, axis=1)
        assert np.max(np.abs(unsteady)) < 1e-10

    def test_unsteady_matches_dense_complex_oracle(self):
        n_modes = 3
        m = n_coeffs(n_modes)
        mesh = generate_interval(1.0, 12)
        pos = np.array([0.8, 0.3 + 0.2j, 0.1 - 0.1j])
        vel = np.concatenate([np.conj(pos[:0:-1]), pos])[None, :]
        g = np.concatenate([np.conj(pos[:0:-1]), pos]) * 0.5
        g[n_modes - 1] = 1.0
        case = ScalarCase(kappa=0.15, omega=2.0, n_modes=n_modes,
                          velocity=uniform_velocity(mesh.n_nodes, 1, vel),
                          dirichlet={"left": np.zeros(m, complex), "right": g})
        sol = solve_scalar(case, mesh)

        # dense direct solve with Dirichlet rows replaced by identity
        sys_c, rhs = assemble_scalar(case, mesh)
        dense = sys_c.to_dense()
        b = rhs.ravel().copy()
        nodes, vals = resolve_scalar_dirichlet(case, mesh)
        for node, val in zip(nodes, vals):
            sl = slice(node * m, (node + 1) * m)
            dense[sl, :] = 0.0
            dense[sl, sl] = np.eye(m)
            b[sl] = val
        ref = np.linalg.solve(dense, b).reshape(mesh.n_nodes, m)
        assert np.max(np.abs(sol - ref)) < 1e-9

    def test_solution_conjugate_symmetric(self):
        case, mesh = steady_1d_case(0.5, 0.1, n_modes=4, omega=1.5)
        sol = solve_scalar(case, mesh)
        for row in sol:
            assert check_conjugate_symmetry(row) == 0.0

    def test_2d_plain_galerkin_flag(self):
        mesh = generate_rect_tri((1.0, 1.0), (4, 4))
        m = n_coeffs(2)
        vel = np.zeros((1, 2, m), dtype=complex)
        vel[0, 0, 1] = 1.0
        g = np.zeros(m, dtype=complex)
        g[1] = 1.0
        kwargs = dict(kappa=0.5, omega=1.0, n_modes=2,
                      velocity=np.tile(vel, (mesh.n_nodes, 1, 1)),
                      dirichlet={"xmin": np.zeros(m, complex), "xmax": g},
                      neumann={"ymin": np.zeros(m, complex), "ymax": np.zeros(m, complex)})
        gls = solve_scalar(ScalarCase(**kwargs), mesh)
        gal = solve_scalar(ScalarCase(**kwargs, galerkin_only=True), mesh)
        assert np.max(np.abs(gls - gal)) > 1e-8  # penalty term active
        # at this mild Peclet both stay close to each other
        assert np.max(np.abs(gls - gal)) < 0.2 * np.max(np.abs(gls))


class TestCoercivityProbe:
    def _channel_case(self, n_modes=2, beta=0.0):
        mesh = generate_rect_tri((1.0, 1.0), (3, 3))
        m = n_coeffs(n_modes)
        vel = np.zeros((mesh.n_nodes, 2, m), dtype=complex)
        vel[:, 0, n_modes - 1] = 1.0       # steady through-flow
        if n_modes > 1:
            vel[:, 0, n_modes] = 0.2       # mild oscillation, A_n stays PSD
            vel[:, 0, n_modes - 2] = 0.2
        case = ScalarCase(kappa=0.4, omega=1.3, n_modes=n_modes,
                          velocity=vel,
                          dirichlet={"xmin": np.zeros(m, complex),
                                     "ymin": np.zeros(m, complex),
                                     "ymax": np.zeros(m, complex)},
                          neumann={"xmax": np.zeros(m, complex)},
                          backflow_beta=beta)
        return case, mesh

    def _admissible(self, case, mesh):
        m = n_coeffs(case.n_modes)
        nodes, _ = resolve_scalar_dirichlet(case, mesh)
        w = RNG.standard_normal((mesh.n_nodes, m)) + 1j * RNG.standard_normal((mesh.n_nodes, m))
        w = 0.5 * (w + np.conj(w[:, ::-1]))
        w[nodes] = 0.0
        return w

    def test_zero_field(self):
        case, mesh = self._channel_case()
        rep = coercivity_probe(case, mesh, np.zeros((mesh.n_nodes, n_coeffs(2)), complex))
        assert rep.total == 0.0 and rep.b_form == 0.0

    def test_split_matches_bilinear_form(self):
        case, mesh = self._channel_case()
        for _ in range(5):
            w = self._admissible(case, mesh)
            rep = coercivity_probe(case, mesh, w)
            assert rep.b_form > 0.0
            assert abs(rep.total - rep.b_form) <= 1e-9 * abs(rep.b_form)

    def test_closed_domain_has_no_boundary_term(self):
        mesh = generate_rect_tri((1.0, 1.0), (3, 3))
        m = n_coeffs(2)
        vel = np.zeros((mesh.n_nodes, 2, m), dtype=complex)
        vel[:, 0, 1] = 0.7
        case = ScalarCase(kappa=0.4, omega=1.0, n_modes=2, velocity=vel,
                          dirichlet={g: np.zeros(m, complex)
                                     for g in ("xmin", "xmax", "ymin", "ymax")})
        w = self._admissible(case, mesh)
        rep = coercivity_probe(case, mesh, w)
        assert rep.boundary == 0.0
        assert abs(rep.total - rep.b_form) <= 1e-9 * abs(rep.b_form)

    def test_diffusion_only_split(self):
        case, mesh = self._channel_case()
        case.velocity = np.zeros_like(case.velocity)
        w = self._admissible(case, mesh)
        rep = coercivity_probe(case, mesh, w)
        assert rep.boundary == 0.0
        assert rep.diffusion > 0.0
        assert abs(rep.total - rep.b_form) <= 1e-9 * abs(rep.b_form)

    def test_backflow_detected(self):
        case, mesh = self._channel_case()
        case.velocity = -case.velocity  # inflow through the Neumann outlet
        w = self._admissible(case, mesh)
        with pytest.raises(ValueError, match="backflow"):
            coercivity_probe(case, mesh, w)

    def test_backflow_term_is_nonnegative_quadratic(self):
        case0, mesh = self._channel_case(beta=0.0)
        case1, _ = self._channel_case(beta=1.0)
        case0.velocity = -case0.velocity
        case1.velocity = -case1.velocity
        k0, _ = assemble_scalar(case0, mesh)
        k1, _ = assemble_scalar(case1, mesh)
        for _ in range(5):
            w = self._admissible(case0, mesh).ravel()
            added = np.vdot(w, k1.matvec(w) - k0.matvec(w)).real
            assert added >= -1e-12
