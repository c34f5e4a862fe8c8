import numpy as np
import pytest

from nlqsim import oracle
from nlqsim.evolution import SimulationError
from nlqsim.oracle import (
    FieldState,
    TwoModeState,
    bec_phase_check,
    convergence_ratios,
    coupling_potential,
    field_from_csv,
    field_to_csv,
    gpe2_solve,
    imaginary_time_ground_state,
    kernel_potential,
    split_step_solve,
)
from nlqsim.problems import (
    GridSpec,
    KernelSpec,
    gross_pitaevskii_coupling,
    hartree_coupling,
)


@pytest.fixture(scope="module")
def grid():
    return GridSpec(points=(128,), dx=20.0 / 128, x0=-10.0)


def harmonic_trap(grid):
    x = grid.coords(0)
    return 0.5 * x**2


@pytest.fixture(scope="module")
def trap_ground(grid):
    """Noninteracting harmonic ground state, shared across this module."""
    return imaginary_time_ground_state(harmonic_trap(grid), 0.0, grid, c_T=0.5)


def gaussian_field(grid, center=0.0, sigma=1.0, kappa=0.0):
    x = grid.coords(0)
    return FieldState.from_samples(
        np.exp(-((x - center) ** 2) / (4 * sigma**2) - 1j * kappa * x), grid
    )


class TestFieldState:
    def test_normalization_enforced(self, grid):
        with pytest.raises(ValueError, match="not normalized"):
            FieldState(np.ones(grid.size), grid)

    def test_from_samples_normalizes(self, grid):
        state = FieldState.from_samples(np.ones(grid.size), grid)
        assert state.norm() == pytest.approx(1.0)

    def test_amplitude_round_trip(self, grid):
        state = gaussian_field(grid)
        amps = state.to_amplitudes()
        assert np.sum(np.abs(amps) ** 2) == pytest.approx(1.0)
        back = FieldState.from_amplitudes(amps, grid)
        assert np.allclose(back.values, state.values)

    def test_csv_round_trip(self, tmp_path, grid):
        state = gaussian_field(grid, kappa=0.4)
        path = tmp_path / "field.csv"
        field_to_csv(state, path)
        back = field_from_csv(path, grid)
        assert np.max(np.abs(back.values - state.values)) < 1e-15


class TestSplitStep:
    def test_free_plane_wave_dispersion(self, grid):
        """Plane wave acquires the analytic phase exp(-i*c_T*kappa^2*t)."""
        mode = 4
        kappa = 2 * np.pi * mode / (grid.points[0] * grid.dx)
        x = grid.coords(0)
        phi0 = FieldState.from_samples(np.exp(1j * kappa * x), grid)
        zero_rule = lambda dens: np.zeros_like(dens)
        out = split_step_solve(phi0, zero_rule, c_T=1.0, t=0.7, dt=0.01)
        expected = phi0.values * np.exp(-1j * 0.7 * kappa**2)
        assert np.max(np.abs(out.values - expected)) < 1e-10

    def test_zero_time_copy(self, grid):
        phi0 = gaussian_field(grid)
        out = split_step_solve(phi0, lambda d: np.zeros_like(d), 1.0, 0.0, 0.01)
        assert np.array_equal(out.values, phi0.values)
        assert out is not phi0

    def test_contact_uniform_density_frozen(self, grid):
        """Uniform state under a contact kernel only picks up a global phase."""
        phi0 = FieldState.from_samples(np.ones(grid.size), grid)
        rule = kernel_potential(KernelSpec.contact(2.0), grid)
        out = split_step_solve(phi0, rule, c_T=1.0, t=0.5, dt=0.005)
        assert np.max(np.abs(np.abs(out.values) - np.abs(phi0.values))) < 1e-12

    def test_second_order_convergence(self, grid):
        phi0 = gaussian_field(grid, center=-1.0, sigma=1.2, kappa=0.8)
        rule = kernel_potential(KernelSpec.gaussian(1.0, 3.0), grid)
        ratios = convergence_ratios(
            phi0, rule, c_T=1.0, t=0.5, dts=[0.02, 0.01, 0.005, 0.0025]
        )
        for ratio in ratios:
            assert 3.4 <= ratio <= 4.6

    def test_kernel_and_coupling_rules_agree(self, grid):
        kernel = KernelSpec.gaussian(1.5, 2.0)
        k_rule = kernel_potential(kernel, grid)
        c_rule = coupling_potential(hartree_coupling(kernel, grid), grid)
        dens = gaussian_field(grid).density()
        assert np.max(np.abs(k_rule(dens) - c_rule(dens))) < 1e-12

    def test_contact_kernel_rule_is_g_rho(self, grid):
        rule = kernel_potential(KernelSpec.contact(1.3), grid)
        dens = gaussian_field(grid).density()
        assert np.max(np.abs(rule(dens) - 1.3 * dens)) < 1e-12

    def test_gp_coupling_rule_is_g_rho(self, grid):
        rule = coupling_potential(gross_pitaevskii_coupling(1.3, grid), grid)
        dens = gaussian_field(grid).density()
        assert np.max(np.abs(rule(dens) - 1.3 * dens)) < 1e-12

    def test_non_finite_aborts(self, grid):
        values = np.ones(grid.size, dtype=complex)
        phi0 = FieldState.from_samples(values, grid)
        bad_rule = lambda dens: np.full_like(dens, np.nan)
        with pytest.raises(SimulationError, match="reduce dt"):
            split_step_solve(phi0, bad_rule, 1.0, 1.0, 0.1, check_interval=1)


class TestImaginaryTime:
    def test_harmonic_ground_state(self, grid, trap_ground):
        """Gaussian ground state at energy omega/2 for the half-Laplacian."""
        ground = trap_ground
        assert ground.residual < 1e-8
        assert ground.mu == pytest.approx(0.5, rel=5e-3)
        x = grid.coords(0)
        exact = np.exp(-(x**2) / 2.0) / np.pi**0.25
        overlap = abs(np.sum(np.conj(ground.state.values) * exact) * grid.dx)
        assert overlap == pytest.approx(1.0, abs=1e-6)

    def test_flat_potential_uniform(self, grid):
        ground = imaginary_time_ground_state(np.zeros(grid.size), 0.0, grid, c_T=0.5)
        values = ground.state.values
        assert np.max(np.abs(values - values[0])) < 1e-8

    def test_repulsive_widening(self, grid):
        """Interaction flattens the cloud: width grows monotonically with g."""
        widths = []
        x = grid.coords(0)
        for g in (0.0, 2.0, 10.0):
            ground = imaginary_time_ground_state(harmonic_trap(grid), g, grid, c_T=0.5)
            widths.append(float(np.sqrt(np.sum(x**2 * ground.state.density()) * grid.dx)))
        assert widths[0] < widths[1] < widths[2]

    def test_mu_reported_with_interaction(self, grid):
        ground = imaginary_time_ground_state(harmonic_trap(grid), 2.0, grid, c_T=0.5)
        # chemical potential exceeds the bare trap ground-state energy
        assert ground.mu > 0.5
        assert ground.residual < 1e-8

    def test_nonconvergence_raises(self, grid):
        with pytest.raises(SimulationError, match="residual"):
            imaginary_time_ground_state(
                harmonic_trap(grid), 0.0, grid, c_T=0.5, tol=1e-15, dtau_min=0.01
            )


class TestTwoModes:
    def test_weight_validation(self, grid):
        phi = gaussian_field(grid)
        with pytest.raises(ValueError, match="alpha"):
            TwoModeState(phi, phi, 1.0, 0.5, 1.0, 1.0, 1.0, harmonic_trap(grid))

    def test_noninteracting_ground_state_stationary(self, grid, trap_ground):
        trap = harmonic_trap(grid)
        ground = trap_ground
        s = TwoModeState(
            ground.state, ground.state, complex(np.sqrt(0.5)), complex(np.sqrt(0.5)),
            0.0, 0.0, 0.0, trap,
        )
        out = gpe2_solve(s, t=0.5, dt=2e-4)
        # density unchanged up to the integrator's own O(dt^2) error
        assert np.max(np.abs(out.phi1.density() - s.phi1.density())) < 1e-6

    def test_equal_couplings_zero_relative_phase(self, grid, trap_ground):
        trap = harmonic_trap(grid)
        ground = trap_ground
        s = TwoModeState(
            ground.state, ground.state, complex(np.sqrt(0.36)), complex(np.sqrt(0.64)),
            1.0, 1.0, 1.0, trap,
        )
        check = bec_phase_check(s, t=0.1, dt=1e-4)
        assert check.predicted_relative == 0.0
        assert abs(check.measured_relative) < 1e-9

    def test_t_zero_phases_zero(self, grid):
        trap = harmonic_trap(grid)
        phi = gaussian_field(grid)
        s = TwoModeState(phi, phi, complex(np.sqrt(0.36)), complex(np.sqrt(0.64)),
                         1.0, 1.0, 0.5, trap)
        check = bec_phase_check(s, t=0.0)
        assert check.measured == (0.0, 0.0)
        assert check.predicted == (0.0, 0.0)

    def test_norm_conserved(self, grid, trap_ground):
        trap = harmonic_trap(grid)
        ground = trap_ground
        s = TwoModeState(
            ground.state, ground.state, complex(np.sqrt(0.36)), complex(np.sqrt(0.64)),
            1.0, 1.0, 0.5, trap,
        )
        out = gpe2_solve(s, t=0.3, dt=1e-3)
        assert abs(out.phi1.norm() - 1.0) < 1e-10
        assert abs(out.phi2.norm() - 1.0) < 1e-10

    def test_energy_conserved_at_second_order(self, grid, trap_ground):
        """The two-mode energy functional drifts at O(dt^2)."""
        x = grid.coords(0)
        trap = harmonic_trap(grid)
        p = 2 * np.pi * np.fft.fftfreq(grid.points[0], d=grid.dx)

        def energy(s):
            w1, w2 = abs(s.alpha) ** 2, abs(s.beta) ** 2
            total = 0.0
            for w, phi in ((w1, s.phi1.values), (w2, s.phi2.values)):
                phi_hat = np.fft.fft(phi)
                kin = np.sum(0.5 * p**2 * np.abs(phi_hat) ** 2) / grid.points[0] * grid.dx
                total += w * (kin + np.sum(trap * np.abs(phi) ** 2) * grid.dx)
            d1, d2 = s.phi1.density(), s.phi2.density()
            total += 0.5 * s.g11 * w1**2 * np.sum(d1**2) * grid.dx
            total += 0.5 * s.g22 * w2**2 * np.sum(d2**2) * grid.dx
            total += s.g12 * w1 * w2 * np.sum(d1 * d2) * grid.dx
            return total

        moving = FieldState.from_samples(np.exp(-((x - 1.0) ** 2) / 2), grid)
        s0 = TwoModeState(
            moving, trap_ground.state,
            complex(np.sqrt(0.36)), complex(np.sqrt(0.64)), 1.0, 1.0, 0.5, trap,
        )
        e0 = energy(s0)
        drifts = [abs(energy(gpe2_solve(s0, 0.3, dt)) - e0) for dt in (2e-3, 1e-3)]
        assert drifts[0] < 1e-7
        assert 3.4 <= drifts[0] / drifts[1] <= 4.6

    def test_weak_coupling_phase_map(self, grid, trap_ground):
        """Relative phase follows the frozen-profile prediction, with the
        deviation shrinking as the coupling scale drops."""
        trap = harmonic_trap(grid)
        ground = trap_ground
        deviations = []
        for scale in (1.0, 0.5, 0.25):
            s = TwoModeState(
                ground.state, ground.state,
                complex(np.sqrt(0.36)), complex(np.sqrt(0.64)),
                g11=1.0 * scale, g22=1.0 * scale, g12=0.5 * scale, V=trap,
            )
            check = bec_phase_check(s, t=0.1, dt=1e-4)
            deviations.append(check.deviation)
        assert deviations[0] < 0.01
        assert deviations[0] > deviations[1] > deviations[2]

    def test_predicted_form_matches_expected_algebra(self, grid, trap_ground):
        """With equal diagonal couplings and shared profiles the prediction
        reduces to t * I4 * (g11 - g12) * (w1 - w2)."""
        trap = harmonic_trap(grid)
        ground = trap_ground
        w1 = 0.36
        s = TwoModeState(
            ground.state, ground.state, complex(np.sqrt(w1)), complex(np.sqrt(1 - w1)),
            g11=1.0, g22=1.0, g12=0.4, V=trap,
        )
        check = bec_phase_check(s, t=0.05, dt=1e-4)
        i4 = float(np.sum(ground.state.density() ** 2) * grid.dx)
        expected = 0.05 * i4 * (1.0 - 0.4) * (w1 - (1 - w1))
        assert check.predicted_relative == pytest.approx(expected, rel=1e-12)
