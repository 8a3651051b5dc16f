"""Spectral skeleton, five-block observables/states, and the pairing.

The model is a Hamiltonian with one bound level ``omega0 < 0``, a continuum
discretized on ``[0, omega_max]``, and ``N`` discrete quantum-number axes
flattened row-major into a single axis of size ``M``.  Observables and
states carry five blocks:

* ``bound``       -- M x M matrix at the bound energy,
* ``diag``        -- per continuum node, the singular (delta-weighted)
                     diagonal component,
* ``cross_up``    -- per node, the (continuum, bound) coherence,
* ``cross_down``  -- per node, the (bound, continuum) coherence,
* ``kernel``      -- per node pair, the regular off-diagonal kernel.

The singular diagonal block is integrated with a single quadrature, the
kernel with a double one; the delta weight is never materialized.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from math import prod

import numpy as np

from ._quad import simpson_weights

DEFAULT_HERMITICITY_TOL = 1e-10


class ModelMismatchError(ValueError):
    """Two five-block objects do not share the same spectral model."""


class HermiticityError(ValueError):
    """A block violates its Hermiticity constraint beyond tolerance."""


@dataclass(frozen=True)
class SpectralModel:
    """Bound level, continuum grid with quadrature weights, discrete axes."""

    omega0: float
    grid: np.ndarray
    quadrature_weights: np.ndarray
    m_dims: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "grid", np.asarray(self.grid, dtype=float))
        object.__setattr__(
            self, "quadrature_weights", np.asarray(self.quadrature_weights, dtype=float)
        )
        object.__setattr__(self, "m_dims", tuple(int(d) for d in self.m_dims))
        if not self.omega0 < 0:
            raise ValueError("bound-state energy must be negative")
        if self.grid.ndim != 1 or self.grid.size < 1:
            raise ValueError("grid must be a non-empty 1-d array")
        if self.grid[0] < 0:
            raise ValueError("continuum grid must start at or above 0")
        if np.any(np.diff(self.grid) <= 0):
            raise ValueError("grid must be strictly increasing")
        if self.quadrature_weights.shape != self.grid.shape:
            raise ValueError("one quadrature weight per grid node required")
        if np.any(self.quadrature_weights <= 0):
            raise ValueError("quadrature weights must be positive")
        if any(d < 1 for d in self.m_dims):
            raise ValueError("discrete axis sizes must be positive")
        self.grid.setflags(write=False)
        self.quadrature_weights.setflags(write=False)

    @classmethod
    def uniform(cls, omega0, omega_max, nodes, m_dims=(1,)) -> "SpectralModel":
        """Uniform grid on [0, omega_max] with composite Simpson weights.

        ``nodes`` must be odd so the panel count is even.
        """
        grid = np.linspace(0.0, float(omega_max), int(nodes))
        return cls(float(omega0), grid, simpson_weights(grid), tuple(m_dims))

    @property
    def n_nodes(self) -> int:
        return self.grid.size

    @property
    def m_total(self) -> int:
        return prod(self.m_dims)

    @property
    def omega_max(self) -> float:
        return float(self.grid[-1])

    def same_as(self, other: "SpectralModel") -> bool:
        return (
            self.omega0 == other.omega0
            and self.m_dims == other.m_dims
            and np.array_equal(self.grid, other.grid)
            and np.array_equal(self.quadrature_weights, other.quadrature_weights)
        )

    def require_same(self, other: "SpectralModel") -> None:
        if not self.same_as(other):
            raise ModelMismatchError("spectral models differ (grid or m_dims)")

    def to_json_dict(self) -> dict:
        return {
            "omega0": self.omega0,
            "grid": self.grid.tolist(),
            "quadrature_weights": self.quadrature_weights.tolist(),
            "m_dims": list(self.m_dims),
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "SpectralModel":
        return cls(
            float(d["omega0"]),
            np.asarray(d["grid"], dtype=float),
            np.asarray(d["quadrature_weights"], dtype=float),
            tuple(d["m_dims"]),
        )


_BLOCK_NAMES = ("bound", "diag", "cross_up", "cross_down", "kernel")


def _zeros_blocks(model: SpectralModel) -> dict:
    k, m = model.n_nodes, model.m_total
    return {
        "bound": np.zeros((m, m), dtype=complex),
        "diag": np.zeros((k, m, m), dtype=complex),
        "cross_up": np.zeros((k, m, m), dtype=complex),
        "cross_down": np.zeros((k, m, m), dtype=complex),
        "kernel": np.zeros((k, k, m, m), dtype=complex),
    }


@dataclass
class _FiveBlock:
    """Shared storage/behaviour of observables and state functionals."""

    model: SpectralModel
    bound: np.ndarray
    diag: np.ndarray
    cross_up: np.ndarray
    cross_down: np.ndarray
    kernel: np.ndarray

    def __post_init__(self):
        k, m = self.model.n_nodes, self.model.m_total
        self.bound = np.asarray(self.bound, dtype=complex)
        self.diag = np.asarray(self.diag, dtype=complex)
        self.cross_up = np.asarray(self.cross_up, dtype=complex)
        self.cross_down = np.asarray(self.cross_down, dtype=complex)
        self.kernel = np.asarray(self.kernel, dtype=complex)
        expected = {
            "bound": (m, m),
            "diag": (k, m, m),
            "cross_up": (k, m, m),
            "cross_down": (k, m, m),
            "kernel": (k, k, m, m),
        }
        for name, shape in expected.items():
            arr = getattr(self, name)
            if arr.shape != shape:
                raise ValueError(f"{name} block has shape {arr.shape}, expected {shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} block contains non-finite entries")

    @classmethod
    def zeros(cls, model: SpectralModel):
        return cls(model, **_zeros_blocks(model))

    def copy(self):
        return type(self)(
            self.model,
            self.bound.copy(),
            self.diag.copy(),
            self.cross_up.copy(),
            self.cross_down.copy(),
            self.kernel.copy(),
        )

    def norm(self) -> float:
        """Quadrature-weighted Euclidean size, used to scale tolerances."""
        w = self.model.quadrature_weights
        total = np.sum(np.abs(self.bound) ** 2)
        total += np.sum(w[:, None, None] * np.abs(self.diag) ** 2)
        total += np.sum(w[:, None, None] * np.abs(self.cross_up) ** 2)
        total += np.sum(w[:, None, None] * np.abs(self.cross_down) ** 2)
        total += np.sum(
            w[:, None, None, None] * w[None, :, None, None] * np.abs(self.kernel) ** 2
        )
        return float(np.sqrt(total))

    def hermiticity_violations(self) -> dict:
        """Max absolute deviation from the blockwise adjoint constraints."""
        adjT = self.bound.conj().swapaxes(-1, -2)
        out = {"bound": float(np.max(np.abs(self.bound - adjT), initial=0.0))}
        d = self.diag - self.diag.conj().swapaxes(-1, -2)
        out["diag"] = float(np.max(np.abs(d), initial=0.0))
        c = self.cross_down - self.cross_up.conj().swapaxes(-1, -2)
        out["cross"] = float(np.max(np.abs(c), initial=0.0))
        kt = self.kernel.conj().swapaxes(0, 1).swapaxes(-1, -2)
        out["kernel"] = float(np.max(np.abs(self.kernel - kt), initial=0.0))
        return out

    def worst_kernel_pair(self) -> tuple[int, int] | None:
        kt = self.kernel.conj().swapaxes(0, 1).swapaxes(-1, -2)
        dev = np.abs(self.kernel - kt).max(axis=(-1, -2))
        if dev.size == 0 or dev.max() == 0.0:
            return None
        i, j = np.unravel_index(int(np.argmax(dev)), dev.shape)
        return int(i), int(j)

    def require_hermitian(self, tol: float = DEFAULT_HERMITICITY_TOL) -> None:
        scale = max(self.norm(), 1.0)
        worst = max(self.hermiticity_violations().values())
        if worst > tol * scale:
            raise HermiticityError(
                f"hermiticity violation {worst:.3e} exceeds {tol:.1e} * {scale:.3e}"
            )

    def to_json_dict(self) -> dict:
        return {
            "model": self.model.to_json_dict(),
            "blocks": {name: _complex_to_json(getattr(self, name)) for name in _BLOCK_NAMES},
        }

    @classmethod
    def from_json_dict(cls, d: dict):
        model = SpectralModel.from_json_dict(d["model"])
        k, m = model.n_nodes, model.m_total
        shapes = {
            "bound": (m, m),
            "diag": (k, m, m),
            "cross_up": (k, m, m),
            "cross_down": (k, m, m),
            "kernel": (k, k, m, m),
        }
        blocks = {
            name: _json_to_complex(d["blocks"][name], shapes[name]) for name in _BLOCK_NAMES
        }
        return cls(model, **blocks)


class GeneralizedObservable(_FiveBlock):
    """Five-block observable: bound matrix, singular diagonal, coherences."""


class StateFunctional(_FiveBlock):
    """Five-block state functional, the conjugate layout of the observables."""


def _complex_to_json(arr: np.ndarray) -> list:
    stacked = np.stack([arr.real, arr.imag], axis=-1)
    return stacked.tolist()


def _json_to_complex(data, shape) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    if arr.shape != shape + (2,):
        raise ValueError(f"serialized block has shape {arr.shape}, expected {shape + (2,)}")
    return arr[..., 0] + 1j * arr[..., 1]


def save_json(obj: _FiveBlock, path) -> None:
    with open(path, "w", newline="\n") as fh:
        json.dump(obj.to_json_dict(), fh, indent=1)
        fh.write("\n")


def load_state(path) -> StateFunctional:
    with open(path) as fh:
        return StateFunctional.from_json_dict(json.load(fh))


def load_observable(path) -> GeneralizedObservable:
    with open(path) as fh:
        return GeneralizedObservable.from_json_dict(json.load(fh))


def pair_complex(state: StateFunctional, obs: GeneralizedObservable) -> complex:
    """Raw five-term pairing before taking the real part."""
    state.model.require_same(obs.model)
    w = state.model.quadrature_weights
    total = np.sum(state.bound.conj() * obs.bound)
    total += np.sum(w[:, None, None] * state.diag.conj() * obs.diag)
    total += np.sum(w[:, None, None] * state.cross_up.conj() * obs.cross_up)
    total += np.sum(w[:, None, None] * state.cross_down.conj() * obs.cross_down)
    total += np.sum(
        w[:, None, None, None]
        * w[None, :, None, None]
        * state.kernel.conj()
        * obs.kernel
    )
    return complex(total)


def pair(
    state: StateFunctional,
    obs: GeneralizedObservable,
    tol: float = DEFAULT_HERMITICITY_TOL,
) -> float:
    """Mean value of ``obs`` in ``state`` at t=0 (all phase factors 1).

    The result of pairing Hermitian blocks is real; an imaginary residual
    beyond ``tol`` times the input scales raises ``HermiticityError``.
    """
    state.require_hermitian(tol)
    obs.require_hermitian(tol)
    value = pair_complex(state, obs)
    scale = max(state.norm() * obs.norm(), 1.0)
    if abs(value.imag) > max(tol, 1e-10) * scale:
        raise HermiticityError(
            f"pairing has imaginary residual {value.imag:.3e} (scale {scale:.3e})"
        )
    return float(value.real)


def identity_observable(model: SpectralModel) -> GeneralizedObservable:
    """Identity: unit bound block, unit singular diagonal, no coherences."""
    obs = GeneralizedObservable.zeros(model)
    eye = np.eye(model.m_total, dtype=complex)
    obs.bound[:] = eye
    obs.diag[:] = eye[None, :, :]
    return obs


def total_probability(state: StateFunctional) -> float:
    """Bound-block trace plus quadrature of the diagonal-block trace."""
    w = state.model.quadrature_weights
    bound_tr = np.trace(state.bound).real
    diag_tr = np.einsum("k,kmm->", w, state.diag).real
    return float(bound_tr + diag_tr)


@dataclass
class StateDiagnostics:
    """Pure report produced by :func:`validate`; never mutates the state."""

    hermiticity: dict
    min_diagonal: float
    normalization_deviation: float
    negative_diagonal: bool
    worst_kernel_pair: tuple[int, int] | None = None
    tol: float = field(default=DEFAULT_HERMITICITY_TOL)

    @property
    def max_hermiticity_violation(self) -> float:
        return max(self.hermiticity.values())

    def is_valid(self, norm_tol: float = 1e-8) -> bool:
        return (
            self.max_hermiticity_violation <= self.tol
            and not self.negative_diagonal
            and abs(self.normalization_deviation) <= norm_tol
        )


def validate(state: StateFunctional, tol: float = DEFAULT_HERMITICITY_TOL) -> StateDiagnostics:
    """Report Hermiticity violations, diagonal positivity, normalization."""
    herm = state.hermiticity_violations()
    diag_entries = np.concatenate(
        [np.diagonal(state.bound).real, np.diagonal(state.diag, axis1=-2, axis2=-1).real.ravel()]
    )
    min_diag = float(diag_entries.min()) if diag_entries.size else 0.0
    dev = total_probability(state) - 1.0
    worst_pair = state.worst_kernel_pair() if herm["kernel"] > tol else None
    return StateDiagnostics(
        hermiticity=herm,
        min_diagonal=min_diag,
        normalization_deviation=float(dev),
        negative_diagonal=bool(min_diag < -tol),
        worst_kernel_pair=worst_pair,
        tol=tol,
    )
