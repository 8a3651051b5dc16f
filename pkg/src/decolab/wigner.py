"""Phase-space transforms, correspondence residuals, classical densities.

Position kernels are sampled on a uniform q-grid; the Wigner/Weyl
transform integrates along anti-diagonals after a factor-2 FFT upsampling
of the kernel, which makes multiplication operators (diagonal ridges) and
near-diagonal derivative stencils land on the correct symbol.  Conventions:

* state transform   rho^W = (1/pi hbar) Int dl K(q+l, q-l) e^{-2ipl/hbar}
* Weyl symbol       O^W   = 2 pi hbar * state transform

so that Tr(rho O) = Int rho^W O^W dq dp.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

EDGE_DECAY_TOL = 1e-8


class ChartSingularityError(ValueError):
    """Action-angle chart evaluated where the angle is undefined."""


@dataclass
class PositionKernel:
    """Operator kernel K(q, q') sampled on a uniform grid."""

    q_grid: np.ndarray
    values: np.ndarray
    hbar: float

    def __post_init__(self):
        self.q_grid = np.asarray(self.q_grid, dtype=float)
        self.values = np.asarray(self.values, dtype=complex)
        n = self.q_grid.size
        if self.values.shape != (n, n):
            raise ValueError("kernel must be square on the q grid")
        if self.hbar <= 0:
            raise ValueError("hbar must be positive")
        steps = np.diff(self.q_grid)
        if not np.allclose(steps, steps[0], rtol=1e-12):
            raise ValueError("q grid must be uniform")

    @property
    def dq(self) -> float:
        return float(self.q_grid[1] - self.q_grid[0])

    @classmethod
    def from_wavefunction(cls, psi, q_grid, hbar) -> "PositionKernel":
        psi = np.asarray(psi, dtype=complex)
        q_grid = np.asarray(q_grid, dtype=float)
        norm = np.sqrt(np.sum(np.abs(psi) ** 2) * (q_grid[1] - q_grid[0]))
        psi = psi / norm
        return cls(q_grid, np.outer(psi, psi.conj()), hbar)

    def trace(self) -> float:
        return float(np.sum(np.diagonal(self.values)).real * self.dq)

    def hermiticity_defect(self) -> float:
        return float(np.max(np.abs(self.values - self.values.conj().T)))

    def edge_decay(self) -> float:
        border = np.concatenate(
            [
                np.abs(self.values[0, :]),
                np.abs(self.values[-1, :]),
                np.abs(self.values[:, 0]),
                np.abs(self.values[:, -1]),
            ]
        )
        peak = np.abs(self.values).max()
        return float(border.max() / peak) if peak > 0 else 0.0

    def matmul(self, other: "PositionKernel") -> "PositionKernel":
        """Operator composition: Int K1(q, s) K2(s, q') ds."""
        if not np.array_equal(self.q_grid, other.q_grid):
            raise ValueError("kernels live on different grids")
        return PositionKernel(self.q_grid, self.values @ other.values * self.dq, self.hbar)


@dataclass
class WignerGrid:
    """Real (or complex, for non-Hermitian operators) phase-space samples."""

    q_grid: np.ndarray
    p_grid: np.ndarray
    values: np.ndarray
    cell: float

    def __post_init__(self):
        self.q_grid = np.asarray(self.q_grid, dtype=float)
        self.p_grid = np.asarray(self.p_grid, dtype=float)
        self.values = np.asarray(self.values)
        if self.values.shape != (self.q_grid.size, self.p_grid.size):
            raise ValueError("values shape must be (len(q_grid), len(p_grid))")

    def integral(self) -> float:
        return float(np.sum(self.values).real * self.cell)

    def same_grids(self, other: "WignerGrid") -> bool:
        return np.array_equal(self.q_grid, other.q_grid) and np.array_equal(
            self.p_grid, other.p_grid
        )


def _upsample_axis(values: np.ndarray, axis: int) -> np.ndarray:
    """Factor-2 trigonometric interpolation along one axis.

    The Nyquist bin (even length) is split half-and-half between the
    positive and negative frequency slots so real input stays real.
    """
    f = np.moveaxis(np.fft.fft(values, axis=axis), axis, 0)
    n = f.shape[0]
    pad = np.zeros((2 * n,) + f.shape[1:], dtype=complex)
    if n % 2 == 0:
        half = n // 2
        pad[:half] = f[:half]
        pad[half] = 0.5 * f[half]
        pad[2 * n - half] = 0.5 * f[half]
        pad[2 * n - half + 1 :] = f[half + 1 :]
    else:
        lo = (n + 1) // 2
        pad[:lo] = f[:lo]
        pad[n + lo :] = f[lo:]
    return np.moveaxis(np.fft.ifft(pad, axis=0) * 2.0, 0, axis)


def _upsample2(values: np.ndarray) -> np.ndarray:
    """Factor-2 trigonometric interpolation of a square complex array."""
    return _upsample_axis(_upsample_axis(values, 0), 1)


def _antidiagonal_sums(up: np.ndarray, n: int) -> np.ndarray:
    """A[i, m] = up[2i + m, 2i - m] on the doubled lattice, zero outside."""
    two_n = up.shape[0]
    m_vals = np.arange(-(two_n - 1), two_n)
    centers = 2 * np.arange(n)
    rows = centers[:, None] + m_vals[None, :]
    cols = centers[:, None] - m_vals[None, :]
    valid = (rows >= 0) & (rows < two_n) & (cols >= 0) & (cols < two_n)
    a = np.zeros((n, m_vals.size), dtype=complex)
    rr = np.clip(rows, 0, two_n - 1)
    cc = np.clip(cols, 0, two_n - 1)
    a[valid] = up[rr[valid], cc[valid]]
    return a


def default_p_grid(kernel: PositionKernel) -> np.ndarray:
    """Symmetric p grid matching the q extent (adequate for hbar ~ O(1)
    oscillator states); pass an explicit grid otherwise."""
    return kernel.q_grid - np.mean(kernel.q_grid)


def weyl_transform_raw(kernel: PositionKernel, p_grid=None, check_edges=True) -> WignerGrid:
    """Weyl symbol of an arbitrary (not necessarily Hermitian) kernel."""
    if p_grid is None:
        p_grid = default_p_grid(kernel)
    p_grid = np.asarray(p_grid, dtype=float)
    if check_edges and kernel.edge_decay() > EDGE_DECAY_TOL:
        raise ValueError(
            f"kernel does not decay at the grid edges (ratio {kernel.edge_decay():.2e})"
        )
    n = kernel.q_grid.size
    h = kernel.dq
    up = _upsample2(kernel.values)
    a = _antidiagonal_sums(up, n)
    m_vals = np.arange(-(2 * n - 1), 2 * n)
    phases = np.exp(-1j * np.outer(m_vals, p_grid) * h / kernel.hbar)
    values = h * (a @ phases)
    dp = p_grid[1] - p_grid[0]
    return WignerGrid(kernel.q_grid, p_grid, values, float(h * dp))


def wigner_transform(kernel: PositionKernel, p_grid=None, check_edges=True) -> WignerGrid:
    """Phase-space distribution of a Hermitian state kernel (real output)."""
    if kernel.hermiticity_defect() > 1e-10 * max(1.0, np.abs(kernel.values).max()):
        raise ValueError("state kernel must be Hermitian")
    raw = weyl_transform_raw(kernel, p_grid, check_edges)
    scaled = raw.values / (2.0 * np.pi * kernel.hbar)
    imag = np.abs(scaled.imag).max()
    if imag > 1e-10 * max(1.0, np.abs(scaled.real).max()):
        raise ValueError(f"Wigner output has imaginary part {imag:.3e}")
    return WignerGrid(raw.q_grid, raw.p_grid, scaled.real, raw.cell)


def weyl_symbol(kernel: PositionKernel, p_grid=None, check_edges=True) -> WignerGrid:
    """Weyl symbol of a Hermitian observable kernel (real output)."""
    raw = weyl_transform_raw(kernel, p_grid, check_edges)
    if kernel.hermiticity_defect() <= 1e-10 * max(1.0, np.abs(kernel.values).max()):
        return WignerGrid(raw.q_grid, raw.p_grid, raw.values.real, raw.cell)
    return raw


def kernel_from_symbol(symbol: WignerGrid, hbar: float) -> PositionKernel:
    """Inverse Weyl transform of a (decaying) phase-space symbol."""
    q = symbol.q_grid
    n = q.size
    h = q[1] - q[0]
    dp = symbol.p_grid[1] - symbol.p_grid[0]
    # symbol at midpoints (q_a + q_b)/2 via 1-d upsampling along q
    s_fine = _upsample_axis(symbol.values.astype(complex), 0)
    d_vals = np.arange(-(n - 1), n)
    phases = np.exp(1j * np.outer(symbol.p_grid, d_vals) * h / hbar)
    p_int = (dp / (2.0 * np.pi * hbar)) * (s_fine @ phases)  # (2n, |d|)
    a_idx, b_idx = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    values = p_int[a_idx + b_idx, (a_idx - b_idx) + (n - 1)]
    return PositionKernel(q, values, hbar)


def matched_p_grid(q_grid, hbar: float, factor: int = 4) -> np.ndarray:
    """p grid spanning exactly one period of the discrete transform phases.

    With ``factor >= 4`` the Fourier sum over p is an exact orthogonality
    for every difference index, so phase-space pairing reproduces the
    operator trace pairing up to interpolation error alone.
    """
    n = np.asarray(q_grid).size
    h = q_grid[1] - q_grid[0]
    npts = factor * n
    dp = 2.0 * np.pi * hbar / (h * npts)
    return (np.arange(npts) - npts // 2) * dp


def gaussian_symbol_kernel(
    q_grid, hbar: float, a: float, q0: float, b: float, p0: float
) -> PositionKernel:
    """Position kernel whose Weyl symbol is exactly
    exp(-a (q - q0)^2 - b (p - p0)^2), built from the closed-form inverse
    transform (the p integral of a Gaussian times a plane wave)."""
    q_grid = np.asarray(q_grid, dtype=float)
    x = q_grid[:, None]
    y = q_grid[None, :]
    mid = 0.5 * (x + y)
    d = x - y
    values = (
        np.exp(-a * (mid - q0) ** 2)
        * np.sqrt(np.pi / b)
        / (2.0 * np.pi * hbar)
        * np.exp(-(d**2) / (4.0 * b * hbar**2))
        * np.exp(1j * p0 * d / hbar)
    )
    return PositionKernel(q_grid, values, hbar)


def phase_space_mean(w_state: WignerGrid, w_obs: WignerGrid) -> float:
    """Int rho^W O^W dq dp; equals the operator pairing up to O(quadrature)."""
    if not w_state.same_grids(w_obs):
        raise ValueError("state and observable grids differ")
    return float(np.sum(w_state.values * w_obs.values).real * w_state.cell)


def _spectral_derivative(values: np.ndarray, step: float, axis: int) -> np.ndarray:
    n = values.shape[axis]
    k = 2.0j * np.pi * np.fft.fftfreq(n, d=step)
    shape = [1, 1]
    shape[axis] = n
    return np.real(np.fft.ifft(np.fft.fft(values, axis=axis) * k.reshape(shape), axis=axis))


def _fd5_derivative(values: np.ndarray, step: float, axis: int) -> np.ndarray:
    """Five-point central difference; exact for quartic polynomials."""
    v = np.moveaxis(values, axis, 0)
    out = np.empty_like(v)
    out[2:-2] = (-v[4:] + 8 * v[3:-1] - 8 * v[1:-3] + v[:-4]) / (12 * step)
    out[0] = (v[1] - v[0]) / step
    out[1] = (v[2] - v[0]) / (2 * step)
    out[-2] = (v[-1] - v[-3]) / (2 * step)
    out[-1] = (v[-1] - v[-2]) / step
    return np.moveaxis(out, 0, axis)


def liouville_residual(kernel: PositionKernel, h_symbol: WignerGrid) -> float:
    """Relative mismatch between the Poisson bracket of the symbols and the
    transformed von Neumann commutator; O(hbar) for smooth states.

    The Hamiltonian is assumed separable, H = p^2/2 + V(q); V is read off
    the symbol at the column closest to p = 0.
    """
    n = kernel.q_grid.size
    if n < 16:
        raise ValueError("grid too coarse for the finite-difference bracket")
    hbar = kernel.hbar
    p_grid = h_symbol.p_grid
    rho_w = wigner_transform(kernel, p_grid)
    h = kernel.dq
    dp = p_grid[1] - p_grid[0]

    dh_dq = _fd5_derivative(h_symbol.values, h, axis=0)
    dh_dp = _fd5_derivative(h_symbol.values, dp, axis=1)
    drho_dq = _spectral_derivative(rho_w.values, h, axis=0)
    drho_dp = _spectral_derivative(rho_w.values, dp, axis=1)
    bracket = dh_dq * drho_dp - dh_dp * drho_dq

    j0 = int(np.argmin(np.abs(p_grid)))
    v = h_symbol.values[:, j0] - 0.5 * p_grid[j0] ** 2
    d2 = _spectral_second_derivative(kernel.values, h)
    h_rho = -0.5 * hbar**2 * d2["left"] + v[:, None] * kernel.values
    rho_h = -0.5 * hbar**2 * d2["right"] + kernel.values * v[None, :]
    comm = PositionKernel(kernel.q_grid, (-1j / hbar) * (h_rho - rho_h), hbar)
    comm_w = weyl_transform_raw(comm, p_grid, check_edges=False)
    comm_w_vals = comm_w.values.real / (2.0 * np.pi * hbar)

    scale = np.abs(bracket).max()
    if scale == 0.0:
        return float(np.abs(comm_w_vals).max())
    return float(np.abs(bracket - comm_w_vals).max() / scale)


def _spectral_second_derivative(values: np.ndarray, step: float) -> dict:
    n = values.shape[0]
    k2 = -(2.0 * np.pi * np.fft.fftfreq(n, d=step)) ** 2
    left = np.fft.ifft(np.fft.fft(values, axis=0) * k2[:, None], axis=0)
    right = np.fft.ifft(np.fft.fft(values, axis=1) * k2[None, :], axis=1)
    return {"left": left, "right": right}


@dataclass
class ProductResidualReport:
    residual: float          # max |(O1 O2)^W - O1^W O2^W| over the probe region
    field: np.ndarray        # the full complex residual field


def product_residual(
    o1: PositionKernel,
    o2: PositionKernel | None,
    p_grid=None,
    interior: float = 0.0,
) -> ProductResidualReport:
    """Deviation of the symbol of a product from the product of symbols.

    ``o2=None`` denotes the identity operator (symbol 1), for which the
    residual vanishes identically.  ``interior`` trims a fraction of each
    grid edge before taking the max, where wrap-around artifacts of the
    trigonometric upsampling live.
    """
    w1 = weyl_transform_raw(o1, p_grid, check_edges=False)
    if o2 is None:
        field = w1.values - w1.values
        return ProductResidualReport(0.0, field)
    if not np.array_equal(o1.q_grid, o2.q_grid) or o1.hbar != o2.hbar:
        raise ValueError("operands live on different grids")
    w2 = weyl_transform_raw(o2, w1.p_grid, check_edges=False)
    prod = o1.matmul(o2)
    w12 = weyl_transform_raw(prod, w1.p_grid, check_edges=False)
    field = w12.values - w1.values * w2.values
    nq, npp = field.shape
    iq = int(interior * nq)
    ip = int(interior * npp)
    region = field[iq : nq - iq or None, ip : npp - ip or None]
    return ProductResidualReport(float(np.abs(region).max()), field)


@dataclass
class HarmonicChart:
    """Action-angle chart of H = Omega (q^2 + p^2)/2; angle = atan2(p, q)."""

    omega: float = 1.0

    def h_symbol(self, q, p):
        return 0.5 * self.omega * (q * q + p * p)

    def angle(self, q, p):
        return np.arctan2(p, q)

    def frequency(self, x) -> float:
        # d H / d(action): constant for the oscillator
        return self.omega


def _normalized(values: np.ndarray, cell: float) -> np.ndarray:
    total = values.sum() * cell
    if total <= 0:
        raise ValueError("density has no mass on the grid")
    return values / total


def momentum_density(x, r, chart, q_grid, p_grid, widths) -> WignerGrid:
    """Gaussian-delta approximant concentrated on the energy shell H^W = x.

    ``r`` labels pointer coordinates; the 2-d oscillator chart carries no
    phase-space realization for them, so all r share the same shell.
    """
    sigma = float(widths[0])
    if sigma <= 0:
        raise ValueError("widths must be positive")
    q_grid = np.asarray(q_grid, dtype=float)
    p_grid = np.asarray(p_grid, dtype=float)
    qq, pp = np.meshgrid(q_grid, p_grid, indexing="ij")
    h_vals = chart.h_symbol(qq, pp)
    vals = np.exp(-((h_vals - x) ** 2) / (2.0 * sigma**2))
    cell = float((q_grid[1] - q_grid[0]) * (p_grid[1] - p_grid[0]))
    return WignerGrid(q_grid, p_grid, _normalized(vals, cell), cell)


@dataclass
class TrajectoryDensity:
    """One classical motion: energy x, pointer labels r, initial angles a0."""

    x: float
    r: tuple
    a0: tuple
    widths: tuple  # (sigma_energy, sigma_angle)


def trajectory_density(td: TrajectoryDensity, t, chart, q_grid, p_grid) -> WignerGrid:
    """Phase-space bundle following a_j(t) = frequency * t + a_j(0)."""
    sigma_e, sigma_a = float(td.widths[0]), float(td.widths[1])
    if td.x <= 2.0 * sigma_e:
        raise ChartSingularityError(
            f"energy {td.x} too close to the chart singularity at the origin"
        )
    base = momentum_density(td.x, td.r, chart, q_grid, p_grid, (sigma_e,))
    qq, pp = np.meshgrid(base.q_grid, base.p_grid, indexing="ij")
    target = td.a0[0] + chart.frequency(td.x) * t
    delta = np.angle(np.exp(1j * (chart.angle(qq, pp) - target)))
    vals = base.values * np.exp(-(delta**2) / (2.0 * sigma_a**2))
    return WignerGrid(base.q_grid, base.p_grid, _normalized(vals, base.cell), base.cell)


@dataclass
class ReconstructionReport:
    reconstructed: WignerGrid
    direct: WignerGrid
    max_error: float
    min_value: float
    marginal_error: float


def decompose_and_reconstruct(
    model,
    w_bound,
    w_cont,
    chart,
    q_grid,
    p_grid,
    widths,
    n_angle_samples: int = 32,
) -> ReconstructionReport:
    """Assemble rho*^W from pointer weights and check it against the sharp
    classical density w(H^W) and the angle-marginal partition of unity."""
    w_cont = np.atleast_2d(np.asarray(w_cont, dtype=float).T).T  # (K, M)
    per_node = w_cont.sum(axis=1)
    sigma = float(widths[0])
    quad = model.quadrature_weights
    grid = model.grid

    base_cell = None
    recon = None
    for k in range(grid.size):
        if per_node[k] == 0.0:
            continue
        md = momentum_density(grid[k], (), chart, q_grid, p_grid, (sigma,))
        base_cell = md.cell
        contrib = quad[k] * per_node[k] * md.values
        recon = contrib if recon is None else recon + contrib
    if recon is None:
        raise ValueError("no continuum weight to reconstruct from")
    if np.asarray(w_bound, dtype=float).sum() != 0.0:
        raise ValueError("the oscillator chart has no shell for the bound level")

    qq, pp = np.meshgrid(np.asarray(q_grid, float), np.asarray(p_grid, float), indexing="ij")
    h_vals = chart.h_symbol(qq, pp)
    dens = np.interp(h_vals.ravel(), grid, per_node, left=0.0, right=0.0).reshape(h_vals.shape)
    # density of states of the oscillator shell: area between shells is
    # 2 pi dE / Omega
    direct_vals = dens * chart.omega / (2.0 * np.pi)
    reconstructed = WignerGrid(np.asarray(q_grid, float), np.asarray(p_grid, float), recon, base_cell)
    direct = WignerGrid(reconstructed.q_grid, reconstructed.p_grid, direct_vals, base_cell)

    # partition of unity: averaging trajectory densities over a0 recovers
    # the momentum density
    k_mid = int(np.argmax(per_node))
    md_ref = momentum_density(grid[k_mid], (), chart, q_grid, p_grid, (sigma,))
    sigma_a = float(widths[1]) if len(widths) > 1 else sigma
    acc = np.zeros_like(md_ref.values)
    for a0 in np.linspace(0.0, 2.0 * np.pi, n_angle_samples, endpoint=False):
        td = TrajectoryDensity(grid[k_mid], (), (a0,), (sigma, sigma_a))
        acc += trajectory_density(td, 0.0, chart, q_grid, p_grid).values
    acc /= n_angle_samples
    marginal_error = float(np.abs(acc - md_ref.values).max() / md_ref.values.max())

    return ReconstructionReport(
        reconstructed=reconstructed,
        direct=direct,
        max_error=float(np.abs(recon - direct_vals).max()),
        min_value=float(recon.min()),
        marginal_error=marginal_error,
    )


def classical_deviation(
    state,
    frame,
    t,
    chart,
    q_grid,
    p_grid,
    widths,
    n_energy_bins: int = 160,
) -> tuple[float, float]:
    """Magnitudes of the stationary part rho*^W and the decaying part.

    The coherence blocks are realized on the chart as mean-energy shells
    carrying the first angular harmonic (so they integrate to zero and
    rotate/decay by Riemann-Lebesgue); returns max-abs norms of both parts.
    """
    from .pointer import extract_weights, to_pointer_frame
    from .evolution import asymptotic_state

    sigma = float(widths[0])
    model = state.model
    rho_pf = to_pointer_frame(state, frame)
    w_bound, w_cont = extract_weights(asymptotic_state(state), frame)

    report_grid = momentum_density(
        max(model.grid[1], 3 * sigma), (), chart, q_grid, p_grid, (sigma,)
    )
    quad = model.quadrature_weights
    grid = model.grid
    qq, pp = np.meshgrid(report_grid.q_grid, report_grid.p_grid, indexing="ij")
    h_vals = chart.h_symbol(qq, pp)
    theta = chart.angle(qq, pp)

    per_node = np.atleast_2d(np.asarray(w_cont, dtype=float).T).T.sum(axis=1)
    star = np.zeros_like(h_vals)
    norm_const = 1.0 / (np.sqrt(2.0 * np.pi) * sigma * 2.0 * np.pi / chart.omega)
    for k in range(grid.size):
        if per_node[k] == 0.0:
            continue
        star += (
            quad[k]
            * per_node[k]
            * norm_const
            * np.exp(-((h_vals - grid[k]) ** 2) / (2.0 * sigma**2))
        )

    # complex amplitude of the coherence field vs mean energy
    c_kernel = np.einsum("klmm->kl", rho_pf.kernel.conj())
    nu = grid[:, None] - grid[None, :]
    mu = 0.5 * (grid[:, None] + grid[None, :])
    coeff = quad[:, None] * quad[None, :] * c_kernel * np.exp(-1j * nu * t)
    e_axis = np.linspace(grid[0], grid[-1], n_energy_bins)
    gauss = np.exp(-((e_axis[:, None, None] - mu[None, :, :]) ** 2) / (2.0 * sigma**2))
    f_of_e = np.einsum("ekl,kl->e", gauss, coeff) * norm_const
    amp = np.interp(h_vals.ravel(), e_axis, f_of_e.real).reshape(h_vals.shape) + 1j * np.interp(
        h_vals.ravel(), e_axis, f_of_e.imag
    ).reshape(h_vals.shape)
    delta = 2.0 * np.real(amp * np.exp(1j * theta))

    return float(np.abs(star).max()), float(np.abs(delta).max())
