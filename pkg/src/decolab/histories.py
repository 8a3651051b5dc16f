"""Consistent-histories calculus over finite-dimensional carriers.

Chains of Heisenberg-evolved projectors, the decoherence matrix/functional,
and the weak / medium / matrix consistency hierarchy, plus the record
operators that certify the strongest level.  Continuum states enter through
:func:`carrier_matrix`, which folds the quadrature weights into a plain
density matrix (the Dirac delta on nodes becomes an inverse-weight
Kronecker, so the ordinary trace reproduces the grid contraction).
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product as iter_product

import numpy as np
from scipy.linalg import expm, svdvals

DEFAULT_TOL = 1e-10
FAMILY_TOL = 1e-12

LEVELS = ("none", "weak", "medium", "matrix")


@dataclass
class ProjectorFamily:
    """Exhaustive, mutually exclusive Hermitian projectors."""

    dim: int
    projectors: list

    def __post_init__(self):
        self.projectors = [np.asarray(p, dtype=complex) for p in self.projectors]
        total = np.zeros((self.dim, self.dim), dtype=complex)
        for a, p in enumerate(self.projectors):
            if p.shape != (self.dim, self.dim):
                raise ValueError(f"projector {a} has shape {p.shape}")
            if np.abs(p - p.conj().T).max() > FAMILY_TOL:
                raise ValueError(f"projector {a} is not Hermitian")
            total += p
        for a, pa in enumerate(self.projectors):
            for b, pb in enumerate(self.projectors):
                expect = pa if a == b else 0.0
                if np.abs(pa @ pb - expect).max() > FAMILY_TOL:
                    raise ValueError(f"projectors {a},{b} are not exclusive/idempotent")
        if np.abs(total - np.eye(self.dim)).max() > FAMILY_TOL:
            raise ValueError("projectors do not resolve the identity")

    def __len__(self) -> int:
        return len(self.projectors)

    @classmethod
    def from_basis_groups(cls, dim: int, groups) -> "ProjectorFamily":
        """One projector per group of computational-basis indices."""
        projectors = []
        for g in groups:
            p = np.zeros((dim, dim), dtype=complex)
            idx = np.asarray(g, dtype=int)
            p[idx, idx] = 1.0
            projectors.append(p)
        return cls(dim, projectors)

    @classmethod
    def complete_basis(cls, dim: int) -> "ProjectorFamily":
        return cls.from_basis_groups(dim, [[i] for i in range(dim)])


@dataclass
class HistoryChain:
    """Time-ordered projector labels, optionally Heisenberg-evolved."""

    times: tuple
    labels: tuple
    hamiltonian: np.ndarray | None = None

    def __post_init__(self):
        self.times = tuple(float(t) for t in self.times)
        self.labels = tuple(int(a) for a in self.labels)
        if len(self.times) != len(self.labels):
            raise ValueError("times and labels must have equal length")
        if any(t1 >= t2 for t1, t2 in zip(self.times, self.times[1:])):
            raise ValueError("times must be strictly increasing")
        if self.hamiltonian is not None:
            h = np.asarray(self.hamiltonian, dtype=complex)
            if np.abs(h - h.conj().T).max() > FAMILY_TOL * max(1.0, np.abs(h).max()):
                raise ValueError("hamiltonian must be Hermitian")
            self.hamiltonian = h


@dataclass
class ConsistencyVerdict:
    level: str
    violations: dict          # keys weak/medium/matrix -> max violation
    probabilities: list | None

    def __post_init__(self):
        if self.level not in LEVELS:
            raise ValueError(f"unknown level {self.level}")


def _evolved_projector(p: np.ndarray, h: np.ndarray | None, t: float) -> np.ndarray:
    if h is None or t == 0.0:
        return p
    if np.abs(h @ p - p @ h).max() <= FAMILY_TOL * max(1.0, np.abs(h).max()):
        return p  # constant-projector collapse
    u = expm(-1j * h * t)
    return u @ p @ u.conj().T


def chain_operator(chain: HistoryChain, family: ProjectorFamily) -> np.ndarray:
    """C = P_{a1}(t1) ... P_{an}(tn), left-to-right in time order."""
    if any(not 0 <= a < len(family) for a in chain.labels):
        raise IndexError("chain label outside the family")
    c = np.eye(family.dim, dtype=complex)
    for t, a in zip(chain.times, chain.labels):
        c = c @ _evolved_projector(family.projectors[a], chain.hamiltonian, t)
    return c


def _check_state(rho: np.ndarray, dim: int) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (dim, dim):
        raise ValueError(f"state dimension {rho.shape} does not match {dim}")
    return rho


def decoherence_matrix(
    rho: np.ndarray, h: HistoryChain, h_prime: HistoryChain, family: ProjectorFamily
) -> np.ndarray:
    """M = C_h^dagger rho C_h'."""
    rho = _check_state(rho, family.dim)
    c1 = chain_operator(h, family)
    c2 = chain_operator(h_prime, family)
    return c1.conj().T @ rho @ c2


def decoherence_functional(
    rho: np.ndarray, h: HistoryChain, h_prime: HistoryChain, family: ProjectorFamily
) -> complex:
    return complex(np.trace(decoherence_matrix(rho, h, h_prime, family)))


def _all_chains(family: ProjectorFamily, times, hamiltonian) -> list[HistoryChain]:
    times = tuple(times)
    return [
        HistoryChain(times, labels, hamiltonian)
        for labels in iter_product(range(len(family)), repeat=len(times))
    ]


def classify(
    rho: np.ndarray,
    family: ProjectorFamily,
    times,
    tol: float = DEFAULT_TOL,
    hamiltonian: np.ndarray | None = None,
) -> ConsistencyVerdict:
    """Strongest consistency level of the full history lattice.

    Violation measures over distinct history pairs: |Re D| (weak), |D|
    (medium), nuclear norm of M (matrix).  The nuclear norm dominates |D|,
    which dominates |Re D|, so the hierarchy is monotone by construction.
    """
    rho = _check_state(rho, family.dim)
    if tol <= 0:
        raise ValueError("tol must be positive")
    chains = _all_chains(family, times, hamiltonian)
    ops = [chain_operator(c, family) for c in chains]
    weak = medium = matrix = 0.0
    probabilities = []
    for i, ci in enumerate(ops):
        left = ci.conj().T @ rho
        for j, cj in enumerate(ops):
            m = left @ cj
            d = complex(np.trace(m))
            if i == j:
                probabilities.append(d.real)
                continue
            weak = max(weak, abs(d.real))
            medium = max(medium, abs(d))
            matrix = max(matrix, float(svdvals(m).sum()))
    if matrix < tol:
        level = "matrix"
    elif medium < tol:
        level = "medium"
    elif weak < tol:
        level = "weak"
    else:
        level = "none"
    return ConsistencyVerdict(
        level=level,
        violations={"weak": weak, "medium": medium, "matrix": matrix},
        probabilities=probabilities if level != "none" else None,
    )


def griffiths_omnes_check(rho: np.ndarray, family: ProjectorFamily) -> float:
    """max_a |Re Tr(P_a rho (1 - P_a) P_a)|; vanishes for exact projectors,
    so this is a regression guard on family idempotency."""
    rho = _check_state(rho, family.dim)
    eye = np.eye(family.dim)
    worst = 0.0
    for p in family.projectors:
        val = np.trace(p @ rho @ (eye - p) @ p)
        worst = max(worst, abs(val.real))
    return float(worst)


def insensitivity_check(
    rho: np.ndarray, family: ProjectorFamily
) -> tuple[np.ndarray, float]:
    """Dephasing map sum_a P_a rho P_a and its Frobenius distance to rho."""
    rho = _check_state(rho, family.dim)
    after = sum(p @ rho @ p for p in family.projectors)
    return after, float(np.linalg.norm(after - rho))


@dataclass
class RecordsReport:
    max_chain_residual: float          # |C rho - R rho| per the record identity
    max_trace_identity_violation: float  # |Tr(R_a rho R_b) - delta p(a)|
    probabilities: list
    consistent: bool


def records_check(
    rho: np.ndarray, family: ProjectorFamily, chains, tol: float = DEFAULT_TOL
) -> RecordsReport:
    """Record operators for constant-projector chains: R = product of the
    chain's projectors (P_a for a uniform chain, 0 for mixed labels).

    Verifies C rho = R rho chain by chain, then the trace identity
    Tr(R_a rho R_b) = delta_ab p(a) that certifies medium decoherence.
    """
    rho = _check_state(rho, family.dim)
    worst = 0.0
    for chain in chains:
        c = chain_operator(chain, family)
        r = np.eye(family.dim, dtype=complex)
        for a in chain.labels:
            r = r @ family.projectors[a]
        worst = max(worst, float(np.abs(c @ rho - r @ rho).max()))

    probs = [float(np.trace(p @ rho @ p).real) for p in family.projectors]
    trace_viol = 0.0
    for a, pa in enumerate(family.projectors):
        for b, pb in enumerate(family.projectors):
            val = complex(np.trace(pa @ rho @ pb))
            expect = probs[a] if a == b else 0.0
            trace_viol = max(trace_viol, abs(val - expect))
    return RecordsReport(
        max_chain_residual=worst,
        max_trace_identity_violation=trace_viol,
        probabilities=probs,
        consistent=worst < tol and trace_viol < tol,
    )


# -- bridge from generalized final states --------------------------------


def carrier_matrix(state) -> np.ndarray:
    """Density matrix over the (bound + node x m) carrier basis.

    Requires a coherence-free state; quadrature weights are folded into
    the continuum blocks so the plain matrix trace equals the grid
    contraction (total probability).
    """
    model = state.model
    offdiag = max(
        np.abs(state.cross_up).max(initial=0.0),
        np.abs(state.cross_down).max(initial=0.0),
        np.abs(state.kernel).max(initial=0.0),
    )
    if offdiag > 1e-10 * max(1.0, state.norm()):
        raise ValueError("carrier_matrix expects a final state with no coherences")
    m = model.m_total
    k = model.n_nodes
    dim = m + k * m
    out = np.zeros((dim, dim), dtype=complex)
    out[:m, :m] = state.bound
    for node in range(k):
        lo = m + node * m
        out[lo : lo + m, lo : lo + m] = model.quadrature_weights[node] * state.diag[node]
    return out


def node_family(model, frame=None) -> ProjectorFamily:
    """One projector per (node-or-bound, pointer coordinate) carrier label."""
    m = model.m_total
    dim = m + model.n_nodes * m
    return ProjectorFamily.complete_basis(dim)


def coordinate_family(model) -> ProjectorFamily:
    """M projectors, each selecting one internal coordinate across the
    bound level and every node."""
    m = model.m_total
    k = model.n_nodes
    dim = m + k * m
    groups = [
        [mm] + [m + node * m + mm for node in range(k)] for mm in range(m)
    ]
    return ProjectorFamily.from_basis_groups(dim, groups)
