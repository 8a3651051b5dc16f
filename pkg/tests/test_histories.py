import types

import numpy as np
import pytest
from scipy.linalg import expm

from decolab import histories, pointer
from decolab.histories import (
    HistoryChain,
    ProjectorFamily,
    carrier_matrix,
    chain_operator,
    classify,
    coordinate_family,
    decoherence_functional,
    decoherence_matrix,
    griffiths_omnes_check,
    insensitivity_check,
    node_family,
    records_check,
)

from conftest import make_model, random_state


def density_matrix(rng, dim):
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


@pytest.fixture
def h_rng():
    return np.random.default_rng(404)


class TestProjectorFamily:
    def test_complete_basis(self):
        fam = ProjectorFamily.complete_basis(3)
        assert len(fam) == 3
        assert np.allclose(sum(fam.projectors), np.eye(3))

    def test_rejects_non_hermitian(self):
        p = np.zeros((2, 2), dtype=complex)
        p[0, 1] = 1.0
        with pytest.raises(ValueError):
            ProjectorFamily(2, [p, np.eye(2) - p])

    def test_rejects_non_exclusive(self):
        p = np.diag([1.0, 1.0, 0.0])
        q = np.diag([0.0, 1.0, 1.0])
        with pytest.raises(ValueError):
            ProjectorFamily(3, [p, q])

    def test_rejects_incomplete(self):
        p = np.diag([1.0, 0.0])
        with pytest.raises(ValueError):
            ProjectorFamily(2, [p])

    def test_rejects_shape_mismatch(self):
        with pytest.raises(ValueError):
            ProjectorFamily(3, [np.eye(2)])


class TestHistoryChain:
    def test_rejects_unordered_times(self):
        with pytest.raises(ValueError):
            HistoryChain((1.0, 0.5), (0, 1))

    def test_rejects_length_mismatch(self):
        with pytest.raises(ValueError):
            HistoryChain((0.0, 1.0), (0,))

    def test_rejects_non_hermitian_hamiltonian(self):
        h = np.array([[0.0, 1.0], [0.0, 0.0]])
        with pytest.raises(ValueError):
            HistoryChain((0.0,), (0,), h)


class TestChainOperator:
    def test_no_hamiltonian_is_projector_product(self):
        fam = ProjectorFamily.complete_basis(3)
        uniform = HistoryChain((0.0, 1.0, 2.0), (1, 1, 1))
        assert np.allclose(chain_operator(uniform, fam), fam.projectors[1])
        mixed = HistoryChain((0.0, 1.0), (0, 2))
        assert np.abs(chain_operator(mixed, fam)).max() == 0.0

    def test_heisenberg_evolution_against_expm_oracle(self, h_rng):
        dim = 3
        fam = ProjectorFamily.complete_basis(dim)
        g = h_rng.standard_normal((dim, dim)) + 1j * h_rng.standard_normal((dim, dim))
        ham = g + g.conj().T
        chain = HistoryChain((0.4, 1.1), (0, 2), ham)
        expected = np.eye(dim, dtype=complex)
        for t, a in zip(chain.times, chain.labels):
            u = expm(-1j * ham * t)
            expected = expected @ (u @ fam.projectors[a] @ u.conj().T)
        assert np.abs(chain_operator(chain, fam) - expected).max() < 1e-12

    def test_bad_label_rejected(self):
        fam = ProjectorFamily.complete_basis(2)
        with pytest.raises(IndexError):
            chain_operator(HistoryChain((0.0,), (5,)), fam)


class TestDecoherenceFunctional:
    def test_trivial_family_reproduces_state(self, h_rng):
        rho = density_matrix(h_rng, 3)
        fam = ProjectorFamily(3, [np.eye(3)])
        chain = HistoryChain((0.0, 1.0), (0, 0))
        m = decoherence_matrix(rho, chain, chain, fam)
        assert np.abs(m - rho).max() < 1e-14
        assert decoherence_functional(rho, chain, chain, fam) == pytest.approx(1.0)

    def test_diagonal_nonnegative_and_sums_to_one(self, h_rng):
        rho = density_matrix(h_rng, 4)
        fam = ProjectorFamily.complete_basis(4)
        verdict = classify(rho, fam, (0.0, 1.0))
        assert verdict.probabilities is not None
        assert min(verdict.probabilities) >= -1e-12
        assert sum(verdict.probabilities) == pytest.approx(1.0, abs=1e-10)

    def test_state_dimension_checked(self, h_rng):
        fam = ProjectorFamily.complete_basis(3)
        chain = HistoryChain((0.0,), (0,))
        with pytest.raises(ValueError):
            decoherence_functional(density_matrix(h_rng, 2), chain, chain, fam)


class TestClassify:
    def test_diagonal_state_reaches_matrix_level(self, h_rng):
        rho = np.diag(h_rng.uniform(0.1, 1.0, 4)).astype(complex)
        rho /= np.trace(rho).real
        verdict = classify(rho, ProjectorFamily.complete_basis(4), (0.0, 1.0))
        assert verdict.level == "matrix"
        assert verdict.violations["matrix"] < 1e-10

    def test_cross_group_coherence_is_medium_not_matrix(self):
        # group-diagonal probabilities, but a coherence bridging the groups
        rho = np.diag([0.4, 0.3, 0.3]).astype(complex)
        rho[0, 2] = rho[2, 0] = 0.2
        fam = ProjectorFamily.from_basis_groups(3, [[0, 1], [2]])
        verdict = classify(rho, fam, (0.0, 1.0))
        assert verdict.level == "medium"
        assert verdict.violations["medium"] < 1e-12
        assert verdict.violations["matrix"] > 1e-3

    def test_generic_two_time_is_none(self, h_rng):
        rho = density_matrix(h_rng, 3)
        g = h_rng.standard_normal((3, 3)) + 1j * h_rng.standard_normal((3, 3))
        ham = g + g.conj().T
        verdict = classify(
            rho, ProjectorFamily.complete_basis(3), (0.0, 0.7), hamiltonian=ham
        )
        assert verdict.level == "none"
        assert verdict.probabilities is None

    def test_hierarchy_monotone(self, h_rng):
        # the three violation measures dominate each other by construction
        rho = density_matrix(h_rng, 3)
        g = h_rng.standard_normal((3, 3)) + 1j * h_rng.standard_normal((3, 3))
        ham = g + g.conj().T
        verdict = classify(
            rho, ProjectorFamily.complete_basis(3), (0.0, 0.7), hamiltonian=ham
        )
        v = verdict.violations
        assert v["weak"] <= v["medium"] + 1e-15
        assert v["medium"] <= v["matrix"] + 1e-15

    def test_bad_tolerance_rejected(self, h_rng):
        rho = density_matrix(h_rng, 2)
        with pytest.raises(ValueError):
            classify(rho, ProjectorFamily.complete_basis(2), (0.0,), tol=0.0)


class TestGriffithsOmnes:
    def test_exact_projectors_vanish(self, h_rng):
        rho = density_matrix(h_rng, 4)
        fam = ProjectorFamily.from_basis_groups(4, [[0, 1], [2, 3]])
        assert griffiths_omnes_check(rho, fam) == 0.0

    def test_non_idempotent_flagged(self, h_rng):
        rho = density_matrix(h_rng, 2)
        smeared = np.array([[0.9, 0.0], [0.0, 0.1]], dtype=complex)
        fake = types.SimpleNamespace(
            dim=2, projectors=[smeared, np.eye(2) - smeared]
        )
        assert griffiths_omnes_check(rho, fake) > 1e-3


class TestInsensitivity:
    def test_diagonal_state_fixed(self, h_rng):
        rho = np.diag(h_rng.uniform(0.1, 1.0, 3)).astype(complex)
        rho /= np.trace(rho).real
        after, dist = insensitivity_check(rho, ProjectorFamily.complete_basis(3))
        assert dist < 1e-15
        assert np.abs(after - rho).max() < 1e-15

    def test_coherent_state_moved(self, h_rng):
        rho = density_matrix(h_rng, 3)
        after, dist = insensitivity_check(rho, ProjectorFamily.complete_basis(3))
        assert dist == pytest.approx(
            np.linalg.norm(rho - np.diag(np.diag(rho))), abs=1e-12
        )

    def test_trivial_family_never_moves(self, h_rng):
        rho = density_matrix(h_rng, 3)
        _, dist = insensitivity_check(rho, ProjectorFamily(3, [np.eye(3)]))
        assert dist < 1e-15


class TestRecords:
    def test_uniform_chains_satisfy_identity(self, h_rng):
        rho = np.diag(h_rng.uniform(0.1, 1.0, 3)).astype(complex)
        rho /= np.trace(rho).real
        fam = ProjectorFamily.complete_basis(3)
        chains = [HistoryChain((0.0, 1.0), (a, a)) for a in range(3)]
        report = records_check(rho, fam, chains)
        assert report.consistent
        assert report.max_chain_residual < 1e-12
        assert report.max_trace_identity_violation < 1e-12
        assert sum(report.probabilities) == pytest.approx(1.0, abs=1e-12)

    def test_trace_identity_matches_functional(self, h_rng):
        rho = np.diag(h_rng.uniform(0.1, 1.0, 3)).astype(complex)
        rho /= np.trace(rho).real
        fam = ProjectorFamily.complete_basis(3)
        chains = [HistoryChain((0.0,), (a,)) for a in range(3)]
        report = records_check(rho, fam, chains)
        for a, chain in enumerate(chains):
            d = decoherence_functional(rho, chain, chain, fam)
            assert report.probabilities[a] == pytest.approx(d.real, abs=1e-12)

    def test_evolved_chain_breaks_identity(self, h_rng):
        # once the projectors rotate, the static record product no longer
        # reproduces the chain operator
        rho = density_matrix(h_rng, 3)
        fam = ProjectorFamily.complete_basis(3)
        g = h_rng.standard_normal((3, 3)) + 1j * h_rng.standard_normal((3, 3))
        ham = g + g.conj().T
        chains = [HistoryChain((0.0, 1.0), (a, a), ham) for a in range(3)]
        report = records_check(rho, fam, chains)
        assert report.max_chain_residual > 1e-3
        assert not report.consistent


class TestCarrierBridge:
    def test_trace_is_total_probability(self, h_rng):
        from decolab.spectral_core import total_probability

        model = make_model(nodes=5, m_dims=(2,))
        state = random_state(h_rng, model, coherences=False)
        rho = carrier_matrix(state)
        assert np.trace(rho).real == pytest.approx(total_probability(state), abs=1e-12)

    def test_rejects_coherent_state(self, h_rng):
        model = make_model(nodes=5, m_dims=(2,))
        state = random_state(h_rng, model, coherences=True)
        with pytest.raises(ValueError):
            carrier_matrix(state)

    def test_pointer_final_state_is_matrix_consistent(self, h_rng):
        model = make_model(nodes=5, m_dims=(2,))
        state = random_state(h_rng, model, coherences=False)
        frame = pointer.pointer_basis(state)
        rho = carrier_matrix(pointer.to_pointer_frame(state, frame))
        fam = node_family(model)
        verdict = classify(rho / np.trace(rho).real, fam, (0.0, 1.0))
        assert verdict.level == "matrix"
        assert verdict.violations["matrix"] < 1e-10

    def test_coordinate_family_groups(self):
        model = make_model(nodes=5, m_dims=(2,))
        fam = coordinate_family(model)
        assert len(fam) == 2
        traces = [np.trace(p).real for p in fam.projectors]
        assert traces == [6.0, 6.0]
