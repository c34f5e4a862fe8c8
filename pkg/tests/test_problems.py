import json
import math

import numpy as np
import pytest

from nlqsim import nlcompiler, statevec
from nlqsim.problems import (
    GridSpec,
    KernelSpec,
    basis_amplitudes,
    coupling_from_triplet_csv,
    coupling_to_triplet_csv,
    gaussian_packet,
    gross_pitaevskii_coupling,
    hartree_coupling,
    madelung_fields,
    navier_stokes_coupling,
    plane_wave_amplitudes,
    uniform_amplitudes,
)


@pytest.fixture
def grid16():
    return GridSpec(points=(16,), dx=0.5, x0=-4.0)


@pytest.fixture
def grid8x8():
    return GridSpec(points=(8, 8), dx=0.5, x0=-2.0)


class TestGridSpec:
    def test_basic_properties(self, grid16):
        assert grid16.dims == 1
        assert grid16.size == 16
        assert grid16.n_qubits == 4
        assert grid16.coords(0)[0] == -4.0

    def test_2d(self, grid8x8):
        assert grid8x8.dims == 2
        assert grid8x8.size == 64
        assert grid8x8.n_qubits == 6
        assert grid8x8.cell_volume == 0.25

    def test_rejects_non_power_of_two(self):
        with pytest.raises(ValueError):
            GridSpec(points=(12,), dx=0.1)

    def test_rejects_bad_dx(self):
        with pytest.raises(ValueError):
            GridSpec(points=(8,), dx=0.0)

    def test_rejects_3d(self):
        with pytest.raises(ValueError):
            GridSpec(points=(4, 4, 4), dx=0.1)

    def test_wrapped_deltas(self):
        grid = GridSpec(points=(4,), dx=1.0)
        d = grid.wrapped_deltas(0)
        assert d[0, 3] == 1  # minimal image, not 3
        assert d[0, 2] == 2
        assert np.array_equal(d, d.T)


class TestKernelSpec:
    def test_constant(self, grid16):
        f = hartree_coupling(KernelSpec.constant(2.0), grid16)
        assert np.all(f.f == 2.0)

    def test_gaussian_even_by_distance(self, grid16):
        f = hartree_coupling(KernelSpec.gaussian(1.0, 3.0), grid16).f
        assert f[0, 1] == f[1, 0]
        assert f[0, 1] == f[0, 15]  # wrap
        assert f[0, 0] == 3.0

    def test_tabulated_lookup(self, grid16):
        samples = [5.0, 3.0, 2.0, 1.0, 0.5, 0.25, 0.1, 0.05, 0.01]
        f = hartree_coupling(KernelSpec.tabulated(samples), grid16).f
        assert f[0, 0] == 5.0
        assert f[0, 3] == 1.0
        assert f[0, 15] == 3.0  # separation 1 via wrap

    def test_tabulated_too_short(self, grid16):
        with pytest.raises(ValueError, match="covers separations"):
            hartree_coupling(KernelSpec.tabulated([1.0, 0.5]), grid16)

    def test_signed_table_not_even(self):
        with pytest.raises(ValueError, match="kernel not even"):
            KernelSpec.tabulated_signed([1.0, 2.0, 3.0, 2.5, 1.0])

    def test_signed_table_folds(self):
        k = KernelSpec.tabulated_signed([1.0, 2.0, 3.0, 2.0, 1.0])
        assert k.samples == (3.0, 2.0, 1.0)

    def test_json_round_trip(self):
        for k in (
            KernelSpec.constant(1.5),
            KernelSpec.gaussian(0.7, -2.0),
            KernelSpec.contact(3.0),
            KernelSpec.tabulated([1.0, 0.5, 0.25]),
        ):
            assert KernelSpec.from_json(json.dumps(k.to_json_dict())) == k

    def test_json_signed_samples(self):
        k = KernelSpec.from_json(
            '{"form": "tabulated", "samples_signed": [1.0, 2.0, 1.0]}'
        )
        assert k.samples == (2.0, 1.0)

    def test_unknown_form(self):
        with pytest.raises(ValueError):
            KernelSpec.from_json('{"form": "cubic"}')


class TestHartreeCoupling:
    def test_symmetric_bitwise(self, grid16):
        f = hartree_coupling(KernelSpec.gaussian(1.3, 0.8), grid16).f
        assert np.array_equal(f, f.T)

    def test_contact_equals_gp_bitwise(self, grid16):
        via_kernel = hartree_coupling(KernelSpec.contact(1.7), grid16)
        direct = gross_pitaevskii_coupling(1.7, grid16)
        assert np.array_equal(via_kernel.f, direct.f)

    def test_convolution_consistency(self, grid16):
        """Matrix route equals FFT circular convolution of the kernel."""
        rng = np.random.default_rng(5)
        kernel = KernelSpec.gaussian(1.0, 2.0)
        f = hartree_coupling(kernel, grid16).f
        a = rng.normal(size=16) + 1j * rng.normal(size=16)
        a /= np.linalg.norm(a)
        weights = np.abs(a) ** 2
        via_matrix = f @ weights

        m = grid16.points[0]
        d = np.arange(m)
        w = kernel.radial(np.minimum(d, m - d) * grid16.dx)
        via_fft = np.fft.ifft(np.fft.fft(w) * np.fft.fft(weights)).real
        assert np.max(np.abs(via_matrix - via_fft)) < 1e-12

    def test_2d_radial(self, grid8x8):
        f = hartree_coupling(KernelSpec.gaussian(1.0, 1.0), grid8x8).f
        assert np.array_equal(f, f.T)
        # neighbor along either axis sits at the same distance
        k = 0
        right = 1          # (0, 1)
        down = 8           # (1, 0)
        assert f[k, right] == f[k, down]

    def test_2d_tabulated_rejected(self, grid8x8):
        with pytest.raises(ValueError, match="1-d"):
            hartree_coupling(KernelSpec.tabulated([1.0] * 10), grid8x8)


class TestGrossPitaevskii:
    def test_zero_coupling(self, grid16):
        assert np.all(gross_pitaevskii_coupling(0.0, grid16).f == 0.0)

    def test_diagonal_value(self, grid16):
        f = gross_pitaevskii_coupling(2.0, grid16).f
        assert f[3, 3] == 2.0 / 0.5
        assert np.count_nonzero(f - np.diag(np.diag(f))) == 0

    def test_2d_diagonal_value(self, grid8x8):
        f = gross_pitaevskii_coupling(2.0, grid8x8).f
        assert f[0, 0] == 2.0 / 0.25

    def test_uniform_state_pure_global_phase(self, grid16):
        f = gross_pitaevskii_coupling(1.3, grid16)
        r = statevec.init_from_amplitudes(uniform_amplitudes(grid16))
        ref = r.copy()
        nlcompiler.apply_w_direct(r, f, 0.2)
        assert statevec.fidelity(ref, r) == pytest.approx(1.0, abs=1e-14)


class TestNavierStokes:
    def test_row_sums_exactly_zero(self, grid16, grid8x8):
        # exact summation: the stencil weights cancel identically, but a
        # fixed-order float reduction may round intermediates
        for grid in (grid16, grid8x8):
            f = navier_stokes_coupling(1.2, grid).f
            assert all(math.fsum(row) == 0.0 for row in f)

    def test_stencil_weights(self, grid16):
        f = navier_stokes_coupling(2.0, grid16).f
        w = 1.0 / (4.0 * 2.0 * grid16.dx**2 * grid16.dx)
        assert f[0, 1] == w
        assert f[0, 15] == w
        assert f[0, 0] == -2.0 * w

    def test_stencil_ratio_2d(self, grid8x8):
        # diagonal is -2*dims times one neighbor weight
        f = navier_stokes_coupling(1.0, grid8x8).f
        assert f[0, 0] == -2.0 * grid8x8.dims * f[0, 1]

    def test_symmetric_bitwise(self, grid8x8):
        f = navier_stokes_coupling(0.7, grid8x8).f
        assert np.array_equal(f, f.T)

    def test_uniform_density_feels_nothing(self, grid16):
        f = navier_stokes_coupling(1.0, grid16)
        weights = np.full(16, 1.0 / 16.0)
        assert np.max(np.abs(f.f @ weights)) < 1e-16

    def test_rejects_bad_rho0(self, grid16):
        with pytest.raises(ValueError):
            navier_stokes_coupling(0.0, grid16)


class TestMadelung:
    def test_real_positive_zero_velocity(self, grid16):
        a = gaussian_packet(grid16, center=0.0, sigma=1.0)
        r = statevec.init_from_amplitudes(a)
        fields = madelung_fields(r, grid16)
        assert np.nanmax(np.abs(fields.u)) < 1e-14

    def test_density_normalization(self, grid16):
        a = gaussian_packet(grid16, center=0.5, sigma=0.8, kappa=0.3)
        fields = madelung_fields(statevec.init_from_amplitudes(a), grid16)
        assert np.sum(fields.rho) * grid16.cell_volume == pytest.approx(1.0)

    def test_plane_wave_velocity(self):
        grid = GridSpec(points=(64,), dx=0.25, x0=-8.0)
        mode = 2
        kappa = 2 * np.pi * mode / (64 * 0.25)
        r = statevec.init_from_amplitudes(plane_wave_amplitudes(grid, mode))
        fields = madelung_fields(r, grid)
        assert fields.defined.all()
        assert np.max(np.abs(fields.u[0] - kappa)) / kappa < 0.02

    def test_low_density_flagged(self, grid16):
        a = basis_amplitudes(grid16, 3)
        fields = madelung_fields(statevec.init_from_amplitudes(a), grid16)
        assert not fields.defined[0]
        assert np.isnan(fields.u[0, 0])
        assert fields.defined[3]

    def test_2d_shapes(self, grid8x8):
        a = gaussian_packet(grid8x8, sigma=0.7)
        fields = madelung_fields(statevec.init_from_amplitudes(a), grid8x8)
        assert fields.rho.shape == (8, 8)
        assert fields.u.shape == (2, 8, 8)

    def test_requires_clean_ancilla(self, grid16):
        r = statevec.init_from_amplitudes(uniform_amplitudes(grid16))
        statevec.apply_mcx_k(r, 0)
        with pytest.raises(ValueError, match="ancilla not clean"):
            madelung_fields(r, grid16)


class TestTripletCsv:
    def test_round_trip(self, tmp_path, grid16):
        f = navier_stokes_coupling(1.5, grid16)
        path = tmp_path / "f.csv"
        coupling_to_triplet_csv(f, path)
        back = coupling_from_triplet_csv(path, grid16.size)
        assert np.array_equal(back.f, f.f)

    def test_bad_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b,c\n0,0,1.0\n")
        with pytest.raises(ValueError, match="header"):
            coupling_from_triplet_csv(path, 4)


class TestInitialStates:
    def test_gaussian_packet_velocity_convention(self, grid16):
        a = gaussian_packet(grid16, center=0.0, sigma=2.0, kappa=0.5)
        r = statevec.init_from_amplitudes(a)
        fields = madelung_fields(r, grid16)
        mid = fields.defined
        assert np.nanmedian(fields.u[0][mid]) == pytest.approx(0.5, rel=0.05)

    def test_gaussian_2d_product(self, grid8x8):
        a = gaussian_packet(grid8x8, center=(0.0, 0.5), sigma=(0.8, 1.0))
        assert a.shape == (64,)

    def test_basis_out_of_range(self, grid16):
        with pytest.raises(ValueError):
            basis_amplitudes(grid16, 99)
