"""Damped oscillator coupled to a continuum: resolvent, moments, spreads.

One oscillator of frequency Omega is bilinearly coupled to a continuum of
modes on [0, omega_max] through a form factor V(w).  Everything is solved
in the Heisenberg picture through the resolvent functions

    eta_pm(w) = w - Omega - Int V(x)^2 / (w - x -+/+- i0) dx,

with the principal values done by subtraction and explicit half-residues.
First moments spiral into the origin; second moments relax to the
minimal-uncertainty value 1/2 fixed by the completeness integral
Int V^2/|eta_+|^2 = 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import sici

from ._quad import oscillatory_weights, simpson_weights

EULER_GAMMA = 0.5772156649015328606


class BoundStateError(ValueError):
    """The coupling is strong enough to pull a discrete level below the
    continuum; the purely-dissipative treatment does not apply."""


@dataclass(eq=False)
class BathModel:
    """Oscillator-continuum model with sampled form factor.

    The grid must be uniform with an odd node count starting at 0; the
    form factor must vanish at the spectrum edge so the principal values
    stay finite.
    """

    omega_osc: float
    coupling: float
    grid: np.ndarray
    v: np.ndarray
    epsilon: float = 1e-3
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        if self.omega_osc <= 0 or self.coupling < 0 or self.epsilon <= 0:
            raise ValueError("omega_osc, epsilon must be positive; coupling >= 0")
        if self.grid[0] != 0.0:
            raise ValueError("continuum grid must start at 0")
        if self.v.shape != self.grid.shape:
            raise ValueError("form factor must be sampled on the grid")
        if self.v[0] != 0.0:
            raise ValueError("form factor must vanish at the spectrum edge")
        if np.any(self.v < 0):
            raise ValueError("form factor must be nonnegative")
        self.weights = simpson_weights(self.grid)
        if self.coupling > 0:
            self._check_no_bound_state()

    @classmethod
    def default(
        cls,
        omega_osc: float = 1.0,
        coupling: float = 0.1,
        omega_c: float | None = None,
        omega_max: float = 20.0,
        nodes: int = 2001,
        epsilon: float = 1e-3,
    ) -> "BathModel":
        """V(w) = coupling * sqrt(w) * exp(-w / omega_c), omega_c = 5 Omega."""
        if omega_c is None:
            omega_c = 5.0 * omega_osc
        grid = np.linspace(0.0, omega_max, nodes)
        v = coupling * np.sqrt(grid) * np.exp(-grid / omega_c)
        return cls(omega_osc, coupling, grid, v, epsilon)

    @property
    def omega_max(self) -> float:
        return float(self.grid[-1])

    def _check_no_bound_state(self):
        # a discrete level below the continuum requires
        # w - Omega - Int V^2/(w-x) dx = 0 for some w < 0; the left side is
        # increasing there, so it suffices that it is negative at w -> 0-
        with np.errstate(divide="ignore", invalid="ignore"):
            integrand = np.where(self.grid > 0, self.v**2 / self.grid, 0.0)
        edge = -self.omega_osc + np.dot(self.weights, integrand)
        if edge >= 0:
            raise BoundStateError(
                "level condition at the spectrum edge is "
                f"{edge:.3e} >= 0; a bound state splits off"
            )

    # -- resolvent -------------------------------------------------------

    def _principal_value(self, omega: float) -> float:
        """PV Int V(x)^2 / (omega - x) dx by subtraction."""
        v2 = self.v**2
        v2_at = float(np.interp(omega, self.grid, v2))
        with np.errstate(divide="ignore", invalid="ignore"):
            diff = (v2 - v2_at) / (omega - self.grid)
        on_node = np.flatnonzero(self.grid == omega)
        if on_node.size:
            diff[on_node] = -np.gradient(v2, self.grid)[on_node]
        w_max = self.omega_max
        h = self.grid[1] - self.grid[0]
        # boundary nodes: clamp the excised log; the form factor is
        # negligible there by construction
        lo = min(max(omega, 0.5 * h), w_max - 0.5 * h)
        log_term = v2_at * np.log(lo / (w_max - lo))
        return float(np.dot(self.weights, diff) + log_term)

    def eta(self, omega: float, branch: str = "upper") -> complex:
        """Resolvent boundary value eta_+ (branch 'upper') or eta_-."""
        if not 0.0 <= omega <= self.omega_max:
            raise ValueError(f"omega {omega} outside the continuum [0, {self.omega_max}]")
        if branch not in ("upper", "lower"):
            raise ValueError("branch must be 'upper' or 'lower'")
        v2_at = float(np.interp(omega, self.grid, self.v**2))
        real = omega - self.omega_osc - self._principal_value(omega)
        imag = np.pi * v2_at
        return complex(real, imag if branch == "upper" else -imag)

    def eta_epsilon(self, omega: float, eps: float, refine: int = 10) -> complex:
        """Finite-epsilon regularization of eta_+ (cross-check path).

        Evaluates w - Omega - Int V^2/(w - x + i eps) dx on a grid refined
        by ``refine`` so the Lorentzian core is resolved for small eps.
        """
        n_fine = refine * (self.grid.size - 1) + 1
        fine = np.linspace(0.0, self.omega_max, n_fine)
        v2 = np.interp(fine, self.grid, self.v) ** 2
        w_fine = simpson_weights(fine)
        integral = np.dot(w_fine, v2 / (omega - fine + 1j * eps))
        return complex(omega - self.omega_osc - integral)

    def _eta_plus_grid(self) -> np.ndarray:
        if "eta_plus" not in self._cache:
            self._cache["eta_plus"] = np.array(
                [self.eta(w, "upper") for w in self.grid]
            )
        return self._cache["eta_plus"]

    def _line_strength(self) -> np.ndarray:
        """F(w) = V^2 / |eta_+|^2, the dressed spectral density."""
        if "strength" not in self._cache:
            eta = self._eta_plus_grid()
            self._cache["strength"] = self.v**2 / np.abs(eta) ** 2
        return self._cache["strength"]

    def completeness(self) -> float:
        """Int V^2/|eta_+|^2 dw; equals 1 when the dressed continuum spans
        the whole Hilbert space (no bound state, negligible truncation)."""
        return float(np.dot(self.weights, self._line_strength()))

    def completeness_diagnostics(self) -> dict:
        c = self.completeness()
        return {
            "value": c,
            "deviation": c - 1.0,
            "within_tolerance": abs(c - 1.0) <= 5e-3,
            "tail_estimate": float(self.weights[-1] * self._line_strength()[-1]),
        }

    def golden_rule_rate(self, omega: float) -> float:
        """Weak-coupling decay-rate estimate pi V(omega)^2."""
        return float(np.pi * np.interp(omega, self.grid, self.v) ** 2)


@dataclass
class OscillatorInitialState:
    """Means plus central second moments of the oscillator mode.

    ``nbar`` is the fluctuation occupation <db+ db> and ``alpha`` the
    anomalous fluctuation <db db>, with db = b - <b>; the continuum starts
    in its ground state.
    """

    Q0: float = 0.0
    P0: float = 0.0
    nbar: float = 0.0
    alpha: complex = 0.0

    def __post_init__(self):
        self.alpha = complex(self.alpha)
        if self.nbar < 0:
            raise ValueError("nbar must be nonnegative")
        # positivity of the quantum covariance matrix
        if (0.5 + self.nbar) ** 2 - abs(self.alpha) ** 2 < 0.25 - 1e-12:
            raise ValueError("second moments violate the uncertainty relation")

    @property
    def b0(self) -> complex:
        return complex(self.Q0, self.P0) / np.sqrt(2.0)

    def variance_Q0(self) -> float:
        return 0.5 + self.nbar + self.alpha.real

    def variance_P0(self) -> float:
        return 0.5 + self.nbar - self.alpha.real


# -- first moments -------------------------------------------------------


def _survival_amplitude(model: BathModel, t: float) -> complex:
    """g(t) = Int F(w) e^{i w t} dw; g(0) is the completeness value."""
    c = oscillatory_weights(model.grid, t)
    return complex(np.dot(c, model._line_strength()))


def mean_QP(model: BathModel, init: OscillatorInitialState, t: float) -> tuple[float, float]:
    """Mean coordinate and momentum at time t >= 0."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    if model.coupling == 0.0:
        th = model.omega_osc * t
        return (
            init.Q0 * np.cos(th) + init.P0 * np.sin(th),
            init.P0 * np.cos(th) - init.Q0 * np.sin(th),
        )
    g = _survival_amplitude(model, t)
    z = g * np.conj(init.b0) * np.sqrt(2.0)  # g(t) <b+>_0 * sqrt(2)
    return float(z.real), float(-z.imag)


def spiral_trace(model: BathModel, init: OscillatorInitialState, times) -> np.ndarray:
    """(n, 2) array of (<Q>, <P>) samples along increasing times."""
    times = np.asarray(times, dtype=float)
    if np.any(np.diff(times) <= 0):
        raise ValueError("times must be strictly increasing")
    return np.array([mean_QP(model, init, t) for t in times])


@dataclass
class SpiralReport:
    times: np.ndarray
    trace: np.ndarray          # (n, 2)
    radii: np.ndarray
    decay_rate: float | None   # radius ~ exp(-decay_rate * t)
    rotation_rate: float       # winding speed, Omega plus the level shift
    r_squared: float


def spiral_report(model: BathModel, init: OscillatorInitialState, times) -> SpiralReport:
    trace = spiral_trace(model, init, times)
    times = np.asarray(times, dtype=float)
    radii = np.hypot(trace[:, 0], trace[:, 1])
    angles = np.unwrap(np.arctan2(trace[:, 1], trace[:, 0]))
    rotation = float(-np.polyfit(times, angles, 1)[0])  # clockwise winding

    decay_rate = None
    r_squared = 0.0
    mask = radii > 0
    if model.coupling > 0 and np.count_nonzero(mask) >= 4:
        t_fit, y_fit = times[mask], np.log(radii[mask])
        slope, intercept = np.polyfit(t_fit, y_fit, 1)
        resid = y_fit - (slope * t_fit + intercept)
        ss_res = float(np.sum(resid**2))
        ss_tot = float(np.sum((y_fit - y_fit.mean()) ** 2))
        r_squared = 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0
        if slope < 0:
            decay_rate = float(-slope)
    return SpiralReport(times, trace, radii, decay_rate, rotation, r_squared)


# -- second moments ------------------------------------------------------


def _osc_integral_aux(x: np.ndarray) -> np.ndarray:
    """E(x) = Int_0^x (e^{iu} - 1)/u du = -Cin(|x|) + i Si(x)."""
    ax = np.abs(x)
    si, ci = sici(ax)
    with np.errstate(divide="ignore", invalid="ignore"):
        cin = np.where(ax > 0, EULER_GAMMA + np.log(ax) - ci, 0.0)
    return -cin + 1j * np.sign(x) * si


def _transient_setup(model: BathModel) -> dict:
    """Time-independent pieces of the coherence integrals (cached)."""
    if "transient" in model._cache:
        return model._cache["transient"]
    grid = model.grid
    eta_p = model._eta_plus_grid()
    eta_m = eta_p.conj()
    v2 = model.v**2
    strength = model._line_strength()
    s_plus = (grid - model.omega_osc) - eta_p   # Int V^2/(w - x + i0)
    s_minus = s_plus.conj()

    # Cauchy matrix 1/(w' - w) with zero diagonal, used for the
    # subtracted principal values
    denom = grid[None, :] - grid[:, None]
    with np.errstate(divide="ignore"):
        cauchy = np.where(denom != 0.0, 1.0 / denom, 0.0)

    h = grid[1] - grid[0]
    clamped = np.clip(grid, 0.5 * h, model.omega_max - 0.5 * h)
    log_pv = np.log((model.omega_max - clamped) / clamped)

    funcs = {
        "F": strength,
        "Bc": v2 / eta_m,
        "SpF": s_plus * strength,
    }
    grads = {k: np.gradient(f, grid) for k, f in funcs.items()}
    setup = {
        "eta_p": eta_p,
        "eta_m": eta_m,
        "v2": v2,
        "F": strength,
        "s_plus": s_plus,
        "s_minus": s_minus,
        "cauchy": cauchy,
        "log_pv": log_pv,
        "funcs": funcs,
        "grads": grads,
        "A_b": v2 / eta_p,
    }
    model._cache["transient"] = setup
    return setup


def _smooth_cauchy_parts(model: BathModel, t: float) -> dict:
    """R_h(w; t) = (lower-half boundary value of the Cauchy transform of
    h e^{iwt}), smooth in w, for each tabulated h."""
    s = _transient_setup(model)
    grid = model.grid
    c = oscillatory_weights(grid, t)
    names = list(s["funcs"])
    stack = np.column_stack([s["funcs"][k] * c for k in names] + [c])
    sums = s["cauchy"] @ stack  # row w: sum_k' stack[k']/(w_k' - w)
    c_base = sums[:, -1]
    phase = np.exp(1j * grid * t)
    x_hi = t * (model.omega_max - grid)
    x_lo = -t * grid
    psi = _osc_integral_aux(x_hi) - _osc_integral_aux(x_lo) + s["log_pv"]
    out = {"weights": c}
    for j, k in enumerate(names):
        f = s["funcs"][k]
        pv = sums[:, j] - f * c_base + c * s["grads"][k]
        out[k] = pv + f * phase * (psi - 1j * np.pi)
    return out


def second_moments(
    model: BathModel, init: OscillatorInitialState, t: float
) -> tuple[float, float]:
    """(<Q(t)^2>, <P(t)^2>) including the mean motion."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    b0 = init.b0
    alpha_raw = init.alpha + b0 * b0
    nbar_raw = init.nbar + abs(b0) ** 2
    if model.coupling == 0.0:
        rot = alpha_raw * np.exp(-2j * model.omega_osc * t)
        q2 = 0.5 + nbar_raw + rot.real
        p2 = 0.5 + nbar_raw - rot.real
        return float(q2), float(p2)

    s = _transient_setup(model)
    g = _survival_amplitude(model, t)
    r = _smooth_cauchy_parts(model, t)
    c = r["weights"]

    t1 = np.conj(alpha_raw) * g * g
    t2 = nbar_raw * abs(g) ** 2
    t4 = alpha_raw * np.conj(g) * np.conj(g)

    t3 = complex(model.completeness())
    t3 += (nbar_raw + 1.0) * abs(g) ** 2
    t3 += np.dot(c.conj(), s["A_b"] * r["F"])
    t3 -= np.dot(c.conj(), s["F"] * r["Bc"])
    t3 += np.dot(c.conj(), s["F"] * (s["s_minus"] * r["F"] - r["SpF"]))

    q2 = 0.5 * (t1 + t2 + t3 + t4)
    p2 = 0.5 * (-t1 + t2 + t3 - t4)
    scale = max(1.0, abs(q2), abs(p2))
    if max(abs(q2.imag), abs(p2.imag)) > 1e-8 * scale:
        raise ArithmeticError(
            f"second moments not real: imag parts {q2.imag:.3e}, {p2.imag:.3e}"
        )
    return float(q2.real), float(p2.real)


def second_moment_Q(model: BathModel, init: OscillatorInitialState, t: float) -> float:
    return second_moments(model, init, t)[0]


def second_moment_P(model: BathModel, init: OscillatorInitialState, t: float) -> float:
    return second_moments(model, init, t)[1]


def spreads_at(model: BathModel, init: OscillatorInitialState, t: float) -> tuple[float, float]:
    """(Delta Q, Delta P) at time t."""
    q2, p2 = second_moments(model, init, t)
    q, p = mean_QP(model, init, t)
    var_q, var_p = q2 - q * q, p2 - p * p
    if min(var_q, var_p) < -1e-8:
        raise ArithmeticError(f"negative variance ({var_q:.3e}, {var_p:.3e})")
    return float(np.sqrt(max(var_q, 0.0))), float(np.sqrt(max(var_p, 0.0)))


def asymptotic_spreads(model: BathModel) -> tuple[float, float]:
    """Late-time (Delta Q, Delta P); equal by the q-p symmetry and -> 1/sqrt(2)."""
    val = float(np.sqrt(0.5 * model.completeness()))
    return val, val


def dimensional_spreads(mass: float, omega: float, hbar: float) -> tuple[float, float]:
    """Late-time position and velocity spreads with units restored.

    Delta q = sqrt(hbar / (2 m Omega)), Delta v = sqrt(hbar Omega / (2 m));
    both shrink with growing mass and vanish as hbar -> 0.
    """
    if mass <= 0 or omega <= 0 or hbar <= 0:
        raise ValueError("mass, omega, hbar must be positive")
    return float(np.sqrt(hbar / (2.0 * mass * omega))), float(
        np.sqrt(hbar * omega / (2.0 * mass))
    )
