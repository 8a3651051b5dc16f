import numpy as np
import pytest

from decolab import wigner
from decolab.wigner import (
    ChartSingularityError,
    HarmonicChart,
    PositionKernel,
    TrajectoryDensity,
    WignerGrid,
)


HBAR = 0.5


def oscillator_state(n_level, q, hbar):
    # harmonic-oscillator eigenstates, unit mass and frequency
    x = q / np.sqrt(hbar)
    if n_level == 0:
        psi = np.exp(-(x**2) / 2)
    elif n_level == 1:
        psi = np.sqrt(2.0) * x * np.exp(-(x**2) / 2)
    else:
        raise ValueError(n_level)
    return PositionKernel.from_wavefunction(psi, q, hbar)


@pytest.fixture
def grids():
    q = np.linspace(-5.0, 5.0, 161)
    return q, q.copy()


class TestWignerTransform:
    def test_ground_state_closed_form(self, grids):
        q, p = grids
        k = oscillator_state(0, q, HBAR)
        w = wigner.wigner_transform(k, p)
        qq, pp = np.meshgrid(q, p, indexing="ij")
        exact = np.exp(-(qq**2 + pp**2) / HBAR) / (np.pi * HBAR)
        assert np.abs(w.values - exact).max() < 1e-11
        assert w.integral() == pytest.approx(1.0, abs=1e-10)

    def test_first_excited_negative_at_origin(self, grids):
        q, p = grids
        k = oscillator_state(1, q, HBAR)
        w = wigner.wigner_transform(k, p)
        i0 = np.argmin(np.abs(q))
        assert w.values[i0, i0] == pytest.approx(-1.0 / (np.pi * HBAR), rel=1e-10)
        assert w.integral() == pytest.approx(1.0, abs=1e-10)

    def test_output_real_for_hermitian_kernel(self, grids):
        q, p = grids
        rng = np.random.default_rng(1)
        psi = np.exp(-(q**2)) * (1.0 + 0.2j * q)
        k = PositionKernel.from_wavefunction(psi, q, HBAR)
        w = wigner.wigner_transform(k, p)
        assert np.isrealobj(w.values)

    def test_linearity(self, grids):
        q, p = grids
        k0 = oscillator_state(0, q, HBAR)
        k1 = oscillator_state(1, q, HBAR)
        mix = PositionKernel(q, 0.3 * k0.values + 0.7 * k1.values, HBAR)
        w_mix = wigner.wigner_transform(mix, p)
        w_sum = 0.3 * wigner.wigner_transform(k0, p).values + 0.7 * wigner.wigner_transform(
            k1, p
        ).values
        assert np.abs(w_mix.values - w_sum).max() < 1e-12

    def test_edge_decay_guard(self):
        q = np.linspace(-1.0, 1.0, 65)  # too narrow for this state
        psi = np.exp(-(q**2) / (2 * 4.0))
        k = PositionKernel.from_wavefunction(psi, q, HBAR)
        with pytest.raises(ValueError):
            wigner.wigner_transform(k)

    def test_non_hermitian_rejected(self, grids):
        q, p = grids
        vals = np.zeros((q.size, q.size), dtype=complex)
        vals[3, 5] = 1.0
        with pytest.raises(ValueError):
            wigner.wigner_transform(PositionKernel(q, vals, HBAR), p)


class TestPhaseSpaceMean:
    def test_constant_observable_gives_normalization(self, grids):
        q, p = grids
        w = wigner.wigner_transform(oscillator_state(0, q, HBAR), p)
        ones = WignerGrid(q, p, np.ones((q.size, p.size)), w.cell)
        assert wigner.phase_space_mean(w, ones) == pytest.approx(1.0, abs=1e-10)

    def test_q_squared_ground_state(self, grids):
        q, p = grids
        w = wigner.wigner_transform(oscillator_state(0, q, HBAR), p)
        qq = np.broadcast_to((q**2)[:, None], (q.size, p.size)).copy()
        obs = WignerGrid(q, p, qq, w.cell)
        assert wigner.phase_space_mean(w, obs) == pytest.approx(HBAR / 2, abs=1e-10)

    def test_grid_mismatch_rejected(self, grids):
        q, p = grids
        w = wigner.wigner_transform(oscillator_state(0, q, HBAR), p)
        other = WignerGrid(q + 1.0, p, np.ones_like(w.values), w.cell)
        with pytest.raises(ValueError):
            wigner.phase_space_mean(w, other)

    def test_matches_dense_trace_oracle(self):
        # smooth random kernels on a period-matched p grid
        rng = np.random.default_rng(12)
        hbar = 0.3
        q = np.linspace(-5.0, 5.0, 64)
        h = q[1] - q[0]
        p = wigner.matched_p_grid(q, hbar)

        def packet_kernel():
            vecs = [
                np.exp(
                    -((q - rng.uniform(-0.8, 0.8)) ** 2) / (2 * rng.uniform(0.6, 0.9) ** 2)
                    + 1j * rng.uniform(-0.8, 0.8) * q / hbar
                )
                for _ in range(5)
            ]
            m = sum(
                (rng.normal() + 1j * rng.normal())
                * np.outer(vecs[rng.integers(0, 5)], vecs[rng.integers(0, 5)].conj())
                for _ in range(6)
            )
            return PositionKernel(q, (m + m.conj().T) / 2, hbar)

        for _ in range(3):
            k1, k2 = packet_kernel(), packet_kernel()
            oracle = float(np.real(np.sum(k1.values * k2.values.T)) * h * h)
            w1 = wigner.wigner_transform(k1, p, check_edges=False)
            s2 = wigner.weyl_symbol(k2, p, check_edges=False)
            assert wigner.phase_space_mean(w1, s2) == pytest.approx(oracle, abs=1e-8)


class TestLiouvilleResidual:
    @staticmethod
    def coherent(hbar, q, q0=0.5):
        psi = np.exp(-((q - q0) ** 2) / (2 * hbar))
        psi /= np.sqrt(np.sum(np.abs(psi) ** 2) * (q[1] - q[0]))
        return PositionKernel.from_wavefunction(psi, q, hbar)

    @staticmethod
    def h_grid(q, p, quartic=0.0):
        qq, pp = np.meshgrid(q, p, indexing="ij")
        vals = 0.5 * pp**2 + 0.5 * qq**2 + quartic * qq**4
        return WignerGrid(q, p, vals, float((q[1] - q[0]) * (p[1] - p[0])))

    def test_harmonic_hamiltonian_exact(self):
        q = np.linspace(-3.0, 3.0, 129)
        hbar = 0.1
        res = wigner.liouville_residual(self.coherent(hbar, q), self.h_grid(q, q))
        assert res < 1e-8

    def test_quartic_order_at_least_one(self):
        residuals = []
        for hbar, n in [(0.1, 129), (0.05, 193)]:
            q = np.linspace(-3.0, 3.0, n)
            residuals.append(
                wigner.liouville_residual(
                    self.coherent(hbar, q), self.h_grid(q, q, quartic=0.08)
                )
            )
        assert np.log2(residuals[0] / residuals[1]) >= 1.0

    def test_amplitude_bilinearity(self):
        q = np.linspace(-3.0, 3.0, 129)
        hbar = 0.1
        k = self.coherent(hbar, q)
        doubled = PositionKernel(q, 2.0 * k.values, hbar)
        h_sym = self.h_grid(q, q, quartic=0.08)
        # relative residual is scale-invariant under state rescaling
        r1 = wigner.liouville_residual(k, h_sym)
        r2 = wigner.liouville_residual(doubled, h_sym)
        assert r2 == pytest.approx(r1, rel=1e-10)

    def test_coarse_grid_rejected(self):
        q = np.linspace(-3.0, 3.0, 9)
        hbar = 0.5
        psi = np.exp(-(q**2) / (2 * hbar))
        k = PositionKernel.from_wavefunction(psi, q, hbar)
        with pytest.raises(ValueError):
            wigner.liouville_residual(k, self.h_grid(q, q))


class TestProductResidual:
    def test_identity_operand_zero(self):
        q = np.linspace(-3.0, 3.0, 65)
        k = wigner.gaussian_symbol_kernel(q, 0.1, 1.0, 0.0, 1.0, 0.0)
        report = wigner.product_residual(k, None)
        assert report.residual == 0.0

    def test_order_at_least_one(self):
        residuals = []
        for hbar, n in [(0.1, 129), (0.05, 257)]:
            q = np.linspace(-3.0, 3.0, n)
            ka = wigner.gaussian_symbol_kernel(q, hbar, 1.0, 0.0, 1.0, 0.0)
            kb = wigner.gaussian_symbol_kernel(q, hbar, 2.0, 0.0, 2.0, 0.0)
            residuals.append(wigner.product_residual(ka, kb, q, interior=0.1).residual)
        assert np.log2(residuals[0] / residuals[1]) >= 1.0

    def test_grid_mismatch_rejected(self):
        qa = np.linspace(-3.0, 3.0, 65)
        qb = np.linspace(-2.0, 2.0, 65)
        ka = wigner.gaussian_symbol_kernel(qa, 0.1, 1.0, 0.0, 1.0, 0.0)
        kb = wigner.gaussian_symbol_kernel(qb, 0.1, 1.0, 0.0, 1.0, 0.0)
        with pytest.raises(ValueError):
            wigner.product_residual(ka, kb)


class TestSymbolKernelMaps:
    def test_gaussian_symbol_kernel_round_trip(self):
        hbar = 0.3
        q = np.linspace(-4.0, 4.0, 129)
        k = wigner.gaussian_symbol_kernel(q, hbar, 1.0, 0.2, 1.0, -0.1)
        sym = wigner.weyl_symbol(k, q, check_edges=False)
        qq, pp = np.meshgrid(q, q, indexing="ij")
        exact = np.exp(-((qq - 0.2) ** 2) - (pp + 0.1) ** 2)
        # edge rows suffer from anti-diagonal truncation; compare the interior
        core = slice(16, -16)
        assert np.abs(sym.values - exact)[core, core].max() < 1e-7

    def test_kernel_from_symbol_inverts_weyl(self):
        hbar = 0.3
        q = np.linspace(-4.0, 4.0, 128)
        k = wigner.gaussian_symbol_kernel(q, hbar, 1.0, 0.0, 1.0, 0.0)
        sym = wigner.weyl_symbol(k, q, check_edges=False)
        back = wigner.kernel_from_symbol(sym, hbar)
        assert np.abs(back.values - k.values).max() < 1e-3 * np.abs(k.values).max()


class TestTrajectoryDensities:
    CHART = HarmonicChart(omega=1.0)

    def grids(self):
        g = np.linspace(-3.0, 3.0, 101)
        return g, g.copy()

    def test_momentum_density_normalized(self):
        q, p = self.grids()
        md = wigner.momentum_density(2.0, (), self.CHART, q, p, (0.2,))
        assert md.integral() == pytest.approx(1.0, abs=1e-6)

    def test_peak_at_initial_angle(self):
        q, p = self.grids()
        td = TrajectoryDensity(2.0, (), (0.0,), (0.2, 0.3))
        grid = wigner.trajectory_density(td, 0.0, self.CHART, q, p)
        i, j = np.unravel_index(np.argmax(grid.values), grid.values.shape)
        # angle 0, energy 2 -> q = 2, p = 0
        assert abs(q[i] - 2.0) < 0.1 and abs(p[j]) < 0.1
        assert grid.integral() == pytest.approx(1.0, abs=1e-6)

    def test_full_period_returns_to_start(self):
        q, p = self.grids()
        td = TrajectoryDensity(2.0, (), (0.7,), (0.2, 0.3))
        g0 = wigner.trajectory_density(td, 0.0, self.CHART, q, p)
        g1 = wigner.trajectory_density(td, 2.0 * np.pi, self.CHART, q, p)
        assert np.abs(g1.values - g0.values).max() < 1e-8

    def test_singular_chart_rejected(self):
        q, p = self.grids()
        td = TrajectoryDensity(0.1, (), (0.0,), (0.2, 0.3))
        with pytest.raises(ChartSingularityError):
            wigner.trajectory_density(td, 0.0, self.CHART, q, p)
