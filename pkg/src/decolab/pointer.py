"""Final pointer basis: per-energy diagonalization and pointer observables.

The pointer frame collects one unitary per energy (bound level plus each
continuum node), obtained from the Hermitian eigendecomposition of the
state's stationary blocks.  Eigenvalues are sorted descending and column
phases are fixed (first component above threshold made real positive) so
the frame is deterministic; no continuity-in-omega smoothing is applied,
eigenvalue crossings are only flagged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral_core import (
    DEFAULT_HERMITICITY_TOL,
    GeneralizedObservable,
    HermiticityError,
    SpectralModel,
    StateFunctional,
    pair_complex,
    validate,
)

DEGENERACY_GAP = 1e-9
PHASE_EPS = 1e-12


@dataclass
class PointerFrame:
    """Per-energy unitaries and the descending spectra they expose."""

    model: SpectralModel
    u_bound: np.ndarray          # (M, M)
    u_cont: np.ndarray           # (K, M, M)
    spectrum_bound: np.ndarray   # (M,) descending
    spectrum_cont: np.ndarray    # (K, M) descending per node

    def unitarity_defect(self) -> float:
        m = self.model.m_total
        eye = np.eye(m)
        d = np.max(np.abs(self.u_bound.conj().T @ self.u_bound - eye))
        prods = np.einsum("kij,kil->kjl", self.u_cont.conj(), self.u_cont)
        d = max(d, np.max(np.abs(prods - eye[None, :, :])))
        return float(d)

    def crossing_nodes(self) -> list[int]:
        """Continuum nodes where the descending spectra reorder between
        neighbours, a visible artifact of the per-node convention."""
        out = []
        for k in range(1, self.model.n_nodes):
            prev, cur = self.spectrum_cont[k - 1], self.spectrum_cont[k]
            # a swap shows up as a larger distance to the neighbour's order
            if np.sum((cur - prev) ** 2) > np.sum((np.sort(cur)[::-1] - prev) ** 2) + 1e-15:
                out.append(k)
        return out


def _canonical_eigh(matrix: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Hermitian eigensolve with descending eigenvalues and fixed phases."""
    vals, vecs = np.linalg.eigh(matrix)
    order = np.argsort(-vals, kind="stable")
    vals = vals[order]
    vecs = vecs[:, order]
    for j in range(vecs.shape[1]):
        col = vecs[:, j]
        nz = np.flatnonzero(np.abs(col) > PHASE_EPS)
        if nz.size:
            lead = col[nz[0]]
            vecs[:, j] = col * (abs(lead) / lead)
    return vals, vecs


def pointer_basis(state: StateFunctional, tol: float = DEFAULT_HERMITICITY_TOL) -> PointerFrame:
    """Diagonalize the bound and per-node diagonal blocks of the state."""
    diag = validate(state, tol)
    if diag.hermiticity["bound"] > tol or diag.hermiticity["diag"] > tol:
        raise HermiticityError(
            "stationary blocks are not Hermitian within tolerance: "
            f"{diag.hermiticity}"
        )
    model = state.model
    m = model.m_total
    vals_b, u_b = _canonical_eigh(0.5 * (state.bound + state.bound.conj().T))
    u_c = np.empty((model.n_nodes, m, m), dtype=complex)
    vals_c = np.empty((model.n_nodes, m))
    for k in range(model.n_nodes):
        blk = 0.5 * (state.diag[k] + state.diag[k].conj().T)
        vals_c[k], u_c[k] = _canonical_eigh(blk)
    return PointerFrame(
        model=model,
        u_bound=u_b,
        u_cont=u_c,
        spectrum_bound=vals_b,
        spectrum_cont=vals_c,
    )


def identity_frame(model: SpectralModel) -> PointerFrame:
    m = model.m_total
    eye = np.eye(m, dtype=complex)
    return PointerFrame(
        model=model,
        u_bound=eye.copy(),
        u_cont=np.broadcast_to(eye, (model.n_nodes, m, m)).copy(),
        spectrum_bound=np.zeros(m),
        spectrum_cont=np.zeros((model.n_nodes, m)),
    )


def to_pointer_frame(x, frame: PointerFrame):
    """Conjugate each block by the appropriate per-energy unitary pair.

    Works for states and observables alike; the component transformation is
    U(a)^-1 B(a, b) U(b) with a, b the energies carried by the block.
    """
    x.model.require_same(frame.model)
    ub = frame.u_bound
    uc = frame.u_cont
    out = x.copy()
    out.bound = ub.conj().T @ x.bound @ ub
    out.diag = np.einsum("kim,kij,kjn->kmn", uc.conj(), x.diag, uc)
    out.cross_up = np.einsum("kim,kij,jn->kmn", uc.conj(), x.cross_up, ub)
    out.cross_down = np.einsum("im,kij,kjn->kmn", ub.conj(), x.cross_down, uc)
    out.kernel = np.einsum("kim,klij,ljn->klmn", uc.conj(), x.kernel, uc)
    return out


def from_pointer_frame(x, frame: PointerFrame):
    """Inverse of :func:`to_pointer_frame`."""
    inv = PointerFrame(
        model=frame.model,
        u_bound=frame.u_bound.conj().T,
        u_cont=frame.u_cont.conj().swapaxes(-1, -2),
        spectrum_bound=frame.spectrum_bound,
        spectrum_cont=frame.spectrum_cont,
    )
    return to_pointer_frame(x, inv)


def pointer_labels(model: SpectralModel) -> np.ndarray:
    """(M, N) array of multi-index coordinates r, row-major over m_dims."""
    m = model.m_total
    return np.array(np.unravel_index(np.arange(m), model.m_dims)).T


def pointer_observable(i: int, frame: PointerFrame, model: SpectralModel) -> GeneralizedObservable:
    """Observable that reads off the i-th pointer coordinate r_i.

    Diagonal with entries r_i in the pointer frame (the label convention
    P_r = r_i), returned in the original frame.
    """
    model.require_same(frame.model)
    n_axes = len(model.m_dims)
    if not 1 <= i <= n_axes:
        raise IndexError(f"axis index {i} out of range 1..{n_axes}")
    entries = pointer_labels(model)[:, i - 1].astype(complex)
    d = np.diag(entries)
    obs = GeneralizedObservable.zeros(model)
    obs.bound[:] = d
    obs.diag[:] = d[None, :, :]
    return from_pointer_frame(obs, frame)


def _block_product(a, b, model: SpectralModel):
    """Composition of two five-block operators, quadrature over the
    internal continuum index; returns raw block arrays."""
    w = model.quadrature_weights
    bound = a.bound @ b.bound + np.einsum(
        "k,kij,kjl->il", w, a.cross_down, b.cross_up
    )
    diag = np.einsum("kij,kjl->kil", a.diag, b.diag)
    cross_up = (
        np.einsum("kij,kjl->kil", a.diag, b.cross_up)
        + np.einsum("kij,jl->kil", a.cross_up, b.bound)
        + np.einsum("l,klij,ljn->kin", w, a.kernel, b.cross_up)
    )
    cross_down = (
        np.einsum("ij,kjl->kil", a.bound, b.cross_down)
        + np.einsum("kij,kjl->kil", a.cross_down, b.diag)
        + np.einsum("s,sij,ksjl->kil", w, a.cross_down, np.swapaxes(b.kernel, 0, 1))
    )
    kernel = (
        np.einsum("kij,kljn->klin", a.diag, b.kernel)
        + np.einsum("klij,ljn->klin", a.kernel, b.diag)
        + np.einsum("kij,ljn->klin", a.cross_up, b.cross_down)
        + np.einsum("s,ksij,sljn->klin", w, a.kernel, b.kernel)
    )
    return bound, diag, cross_up, cross_down, kernel


def observable_product(a: GeneralizedObservable, b: GeneralizedObservable) -> GeneralizedObservable:
    a.model.require_same(b.model)
    bound, diag, cu, cd, kern = _block_product(a, b, a.model)
    return GeneralizedObservable(a.model, bound, diag, cu, cd, kern)


def observable_commutator(a: GeneralizedObservable, b: GeneralizedObservable) -> GeneralizedObservable:
    ab = observable_product(a, b)
    ba = observable_product(b, a)
    return GeneralizedObservable(
        a.model,
        ab.bound - ba.bound,
        ab.diag - ba.diag,
        ab.cross_up - ba.cross_up,
        ab.cross_down - ba.cross_down,
        ab.kernel - ba.kernel,
    )


def displacement_annihilation_check(
    rho_star: StateFunctional,
    frame: PointerFrame,
    probes: list[GeneralizedObservable],
) -> float:
    """max |(rho*|[P_i, O])| over pointer axes and probes.

    Zero for the final state: the generator of displacements along the
    conjugate configuration variable annihilates it.
    """
    model = rho_star.model
    result = 0.0
    for i in range(1, len(model.m_dims) + 1):
        p_i = pointer_observable(i, frame, model)
        for probe in probes:
            comm = observable_commutator(p_i, probe)
            result = max(result, abs(pair_complex(rho_star, comm)))
    return float(result)


def extract_weights(rho_star: StateFunctional, frame: PointerFrame) -> tuple[np.ndarray, np.ndarray]:
    """Classical weights (rho*|x, rr): bound (M,) and continuum (K, M).

    Requires a final (diagonal-blocks-only) state; weights are clipped at
    -1e-10 and must integrate to the state's total probability.
    """
    model = rho_star.model
    model.require_same(frame.model)
    offdiag = max(
        np.abs(rho_star.cross_up).max(initial=0.0),
        np.abs(rho_star.cross_down).max(initial=0.0),
        np.abs(rho_star.kernel).max(initial=0.0),
    )
    if offdiag > 1e-10 * max(1.0, rho_star.norm()):
        raise ValueError("extract_weights expects a final state with no coherences")
    transformed = to_pointer_frame(rho_star, frame)
    w_bound = np.diagonal(transformed.bound).real.copy()
    w_cont = np.diagonal(transformed.diag, axis1=-2, axis2=-1).real.copy()
    worst = min(w_bound.min(initial=0.0), w_cont.min(initial=0.0))
    if worst < -1e-10:
        raise ValueError(f"negative pointer weight {worst:.3e}")
    return w_bound, w_cont


def state_from_weights(
    model: SpectralModel,
    frame: PointerFrame,
    w_bound: np.ndarray,
    w_cont: np.ndarray,
) -> StateFunctional:
    """Build the final state carrying the given pointer weights."""
    state = StateFunctional.zeros(model)
    state.bound[:] = np.diag(np.asarray(w_bound, dtype=complex))
    w_cont = np.asarray(w_cont, dtype=complex)
    k, m = model.n_nodes, model.m_total
    diag = np.zeros((k, m, m), dtype=complex)
    idx = np.arange(m)
    diag[:, idx, idx] = w_cont
    state.diag = diag
    return from_pointer_frame(state, frame)
