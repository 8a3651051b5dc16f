"""Unitary evolution of state functionals and decoherence diagnostics.

Only the off-diagonal blocks pick up phases; the bound and singular
diagonal blocks are stationary, so the asymptotic state is obtained by
dropping the coherences.  Late-time mean values are evaluated with Filon
weights so the decay curves stay trustworthy when ``t * omega_max`` is
large.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._quad import oscillatory_weights
from .spectral_core import (
    GeneralizedObservable,
    StateFunctional,
    pair,
)

# Exponential fits are attempted on samples whose magnitude lies in
# [FIT_FLOOR, FIT_CEILING_FRACTION * initial]; below the floor quadrature
# noise dominates.
FIT_FLOOR = 1e-8
FIT_CEILING_FRACTION = 0.5
FIT_RESIDUAL_THRESHOLD = 0.1  # RMS in log units


def evolve(state: StateFunctional, t: float) -> StateFunctional:
    """Apply the free phases e^{i(w - w')t} to the off-diagonal blocks."""
    if not np.isfinite(t):
        raise ValueError("time must be finite")
    model = state.model
    out = state.copy()
    up = np.exp(1j * (model.grid - model.omega0) * t)
    out.cross_up *= up[:, None, None]
    out.cross_down *= up.conj()[:, None, None]
    nu = model.grid[:, None] - model.grid[None, :]
    out.kernel *= np.exp(1j * nu * t)[:, :, None, None]
    return out


def asymptotic_state(state: StateFunctional) -> StateFunctional:
    """Keep the stationary bound and diagonal blocks, zero the coherences."""
    out = state.copy()
    out.cross_up[:] = 0.0
    out.cross_down[:] = 0.0
    out.kernel[:] = 0.0
    return out


def mean_value_at(state: StateFunctional, obs: GeneralizedObservable, t: float) -> float:
    """<O> at time t without materializing the evolved state.

    Identical to ``pair(evolve(state, t), obs)``: the phases are applied
    inside the quadrature, with Filon weights above the phase threshold.
    """
    state.model.require_same(obs.model)
    model = state.model
    w = model.quadrature_weights

    static = np.sum(state.bound.conj() * obs.bound)
    static += np.sum(w[:, None, None] * state.diag.conj() * obs.diag)

    c = oscillatory_weights(model.grid, t)
    s_up = np.einsum("kmn,kmn->k", state.cross_up.conj(), obs.cross_up)
    s_down = np.einsum("kmn,kmn->k", state.cross_down.conj(), obs.cross_down)
    s_kern = np.einsum("klmn,klmn->kl", state.kernel.conj(), obs.kernel)

    cross = np.exp(1j * model.omega0 * t) * np.dot(c.conj(), s_up)
    cross += np.exp(-1j * model.omega0 * t) * np.dot(c, s_down)
    kern = c.conj() @ s_kern @ c

    return float((static + cross + kern).real)


@dataclass
class DecaySeries:
    """Off-diagonal contribution to <O> over time, with an optional fit."""

    times: np.ndarray
    values: np.ndarray
    fitted_rate: float | None
    fit_residual: float


def weak_limit_decay(
    state: StateFunctional,
    obs: GeneralizedObservable,
    times,
    fit: bool = True,
    residual_threshold: float = FIT_RESIDUAL_THRESHOLD,
) -> DecaySeries:
    """Sampled deviation <O>(t) - <O>_* and an exponential-rate fit.

    The fit is least squares on log|values| restricted to the window where
    the magnitude sits between FIT_FLOOR and half the initial value; a fit
    whose RMS log-residual exceeds ``residual_threshold`` is reported as
    absent rather than raising.
    """
    times = np.asarray(times, dtype=float)
    if times.size < 8:
        raise ValueError("need at least 8 time samples")
    if np.any(np.diff(times) <= 0):
        raise ValueError("times must be strictly increasing")
    base = pair(asymptotic_state(state), obs)
    values = np.array([mean_value_at(state, obs, t) - base for t in times])

    fitted_rate = None
    fit_residual = float("inf")
    if fit:
        mags = np.abs(values)
        ceiling = FIT_CEILING_FRACTION * mags[0] if mags[0] > 0 else 0.0
        mask = (mags >= FIT_FLOOR) & (mags <= ceiling)
        if np.count_nonzero(mask) >= 4:
            t_fit = times[mask]
            y_fit = np.log(mags[mask])
            slope, intercept = np.polyfit(t_fit, y_fit, 1)
            resid = y_fit - (slope * t_fit + intercept)
            fit_residual = float(np.sqrt(np.mean(resid**2)))
            if fit_residual <= residual_threshold and slope < 0:
                fitted_rate = float(-slope)
    return DecaySeries(times=times, values=values, fitted_rate=fitted_rate, fit_residual=fit_residual)


@dataclass
class ObstructionReport:
    """Oscillation record for a purely discrete (multi-bound-state) model."""

    times: np.ndarray
    values: np.ndarray

    def amplitude(self, t0: float, t1: float) -> float:
        mask = (self.times >= t0) & (self.times <= t1)
        if not np.any(mask):
            raise ValueError("no samples in the requested window")
        return float(np.max(np.abs(self.values[mask])))

    @property
    def early_amplitude(self) -> float:
        t0, t1 = self.times[0], self.times[-1]
        return self.amplitude(t0, t0 + (t1 - t0) / 3.0)

    @property
    def late_amplitude(self) -> float:
        t0, t1 = self.times[0], self.times[-1]
        return self.amplitude(t1 - (t1 - t0) / 3.0, t1)


def discrete_obstruction(
    energies,
    rho_matrix: np.ndarray,
    obs_matrix: np.ndarray,
    times,
    degeneracy_tol: float = 1e-12,
) -> ObstructionReport:
    """Off-diagonal contribution for n >= 2 bound states: it never decays.

    Degenerate energy pairs are rejected; their term would be secularly
    constant, which is a different phenomenon.
    """
    energies = np.asarray(energies, dtype=float)
    n = energies.size
    if n < 2:
        raise ValueError("need at least two bound states")
    rho_matrix = np.asarray(rho_matrix, dtype=complex)
    obs_matrix = np.asarray(obs_matrix, dtype=complex)
    for name, m in (("rho", rho_matrix), ("obs", obs_matrix)):
        if m.shape != (n, n):
            raise ValueError(f"{name} matrix must be {n}x{n}")
        if np.max(np.abs(m - m.conj().T)) > 1e-10 * max(1.0, np.abs(m).max()):
            raise ValueError(f"{name} matrix must be Hermitian")
    gaps = np.abs(energies[:, None] - energies[None, :])
    np.fill_diagonal(gaps, np.inf)
    if gaps.min() <= degeneracy_tol:
        raise ValueError("degenerate bound-state energies are outside this check")

    times = np.asarray(times, dtype=float)
    offdiag = rho_matrix.T * obs_matrix  # rho_ji * O_ij as an (i, j) array
    np.fill_diagonal(offdiag, 0.0)
    delta = energies[:, None] - energies[None, :]
    phases = np.exp(1j * delta[None, :, :] * times[:, None, None])
    values = np.einsum("ij,tij->t", offdiag, phases).real
    return ObstructionReport(times=times, values=values)
