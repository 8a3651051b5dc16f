import numpy as np
import pytest

from decolab import evolution, pointer, spectral_core
from decolab.spectral_core import (
    StateFunctional,
    identity_observable,
    pair,
    pair_complex,
)

from conftest import make_model, random_observable, random_state


def diagonal_state(model, bound_diag, cont_diag):
    state = StateFunctional.zeros(model)
    state.bound[:] = np.diag(bound_diag)
    for k in range(model.n_nodes):
        state.diag[k] = np.diag(cont_diag[k])
    return state


class TestPointerBasis:
    def test_already_diagonal_gives_identity(self, model):
        cont = np.tile([0.6, 0.3], (model.n_nodes, 1))
        state = diagonal_state(model, [0.8, 0.2], cont)
        frame = pointer.pointer_basis(state)
        assert np.allclose(frame.u_bound, np.eye(2))
        assert np.allclose(frame.u_cont, np.eye(2)[None])

    def test_two_by_two_closed_form(self, model):
        block = np.array([[0.5, 0.25], [0.25, 0.5]])
        state = StateFunctional.zeros(model)
        state.bound[:] = block
        state.diag[:] = block[None]
        frame = pointer.pointer_basis(state)
        expected_u = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2.0)
        assert np.allclose(frame.u_bound, expected_u, atol=1e-12)
        assert np.allclose(frame.spectrum_bound, [0.75, 0.25], atol=1e-14)

    def test_maximally_mixed_degeneracy_convention(self, model):
        state = StateFunctional.zeros(model)
        state.bound[:] = np.eye(2) / 2
        state.diag[:] = np.eye(2)[None] / 2
        frame = pointer.pointer_basis(state)
        assert np.allclose(frame.u_bound, np.eye(2))

    def test_frame_invariants(self, rng, model):
        state = random_state(rng, model)
        frame = pointer.pointer_basis(state)
        assert frame.unitarity_defect() < 1e-10
        moved = pointer.to_pointer_frame(state, frame)
        off = ~np.eye(model.m_total, dtype=bool)
        assert np.abs(moved.bound[off]).max() < 1e-10
        assert np.abs(moved.diag[:, off]).max() < 1e-10
        # descending spectra
        assert np.all(np.diff(frame.spectrum_bound) <= 1e-12)
        assert np.all(np.diff(frame.spectrum_cont, axis=1) <= 1e-12)

    def test_deterministic(self, model):
        rng1 = np.random.default_rng(99)
        rng2 = np.random.default_rng(99)
        f1 = pointer.pointer_basis(random_state(rng1, model))
        f2 = pointer.pointer_basis(random_state(rng2, model))
        assert np.array_equal(f1.u_bound, f2.u_bound)
        assert np.array_equal(f1.u_cont, f2.u_cont)


class TestFrameTransforms:
    def test_identity_frame_is_noop(self, rng, model):
        state = random_state(rng, model)
        frame = pointer.identity_frame(model)
        moved = pointer.to_pointer_frame(state, frame)
        for name in ("bound", "diag", "cross_up", "cross_down", "kernel"):
            assert np.array_equal(getattr(moved, name), getattr(state, name))

    def test_pairing_invariance(self, rng, model):
        for _ in range(10):
            state = random_state(rng, model)
            obs = random_observable(rng, model)
            frame = pointer.pointer_basis(state)
            before = pair_complex(state, obs)
            after = pair_complex(
                pointer.to_pointer_frame(state, frame),
                pointer.to_pointer_frame(obs, frame),
            )
            assert abs(after - before) < 1e-12 * max(1.0, abs(before))

    def test_round_trip(self, rng, model):
        state = random_state(rng, model)
        frame = pointer.pointer_basis(state)
        back = pointer.from_pointer_frame(pointer.to_pointer_frame(state, frame), frame)
        for name in ("bound", "diag", "cross_up", "cross_down", "kernel"):
            assert np.allclose(getattr(back, name), getattr(state, name), atol=1e-13)


class TestPointerObservables:
    def test_labels_in_pointer_frame(self, rng, model):
        state = random_state(rng, model)
        frame = pointer.pointer_basis(state)
        p0 = pointer.pointer_observable(1, frame, model)
        moved = pointer.to_pointer_frame(p0, frame)
        assert np.allclose(np.diag(moved.bound), [0.0, 1.0])
        assert np.allclose(moved.diag[:, 0, 0], 0.0)
        assert np.allclose(moved.diag[:, 1, 1], 1.0)

    def test_moments_match_weight_sums(self, rng, model):
        state = random_state(rng, model, coherences=False)
        frame = pointer.pointer_basis(state)
        w_bound, w_cont = pointer.extract_weights(state, frame)
        labels = pointer.pointer_labels(model)[:, 0].astype(float)
        p0 = pointer.pointer_observable(1, frame, model)
        quad = model.quadrature_weights
        for n in (1, 2, 3):
            expected = np.sum(labels**n * w_bound) + np.sum(
                quad[:, None] * labels[None, :] ** n * w_cont
            )
            obs_n = p0
            for _ in range(n - 1):
                obs_n = pointer.observable_product(obs_n, p0)
            assert pair(state, obs_n) == pytest.approx(expected, abs=1e-10)

    def test_pointer_observables_commute(self, rng):
        model = make_model(nodes=5, m_dims=(2, 2))
        state = random_state(rng, model)
        frame = pointer.pointer_basis(state)
        p0 = pointer.pointer_observable(1, frame, model)
        p1 = pointer.pointer_observable(2, frame, model)
        comm = pointer.observable_commutator(p0, p1)
        sigma = random_state(rng, model)
        assert abs(pair_complex(sigma, comm)) < 1e-12


class TestDisplacementAnnihilation:
    def test_identity_probe_exact_zero(self, rng, model):
        star = random_state(rng, model, coherences=False)
        frame = pointer.pointer_basis(star)
        val = pointer.displacement_annihilation_check(
            star, frame, [identity_observable(model)]
        )
        assert val == 0.0

    def test_pointer_probe_exact_zero(self, rng, model):
        star = random_state(rng, model, coherences=False)
        frame = pointer.pointer_basis(star)
        probe = pointer.pointer_observable(1, frame, model)
        val = pointer.displacement_annihilation_check(star, frame, [probe])
        assert val < 1e-14

    def test_random_probes_below_threshold(self, rng, model):
        star = random_state(rng, model, coherences=False)
        frame = pointer.pointer_basis(star)
        for _ in range(5):
            probe = random_observable(rng, model)
            val = pointer.displacement_annihilation_check(star, frame, [probe])
            assert val < 1e-9 * probe.norm()

    def test_bound_only_dense_oracle(self, rng):
        # collapsed model: the five-block commutator must reduce to the
        # ordinary matrix commutator on the bound block
        model = make_model(nodes=3, m_dims=(3,))
        state = StateFunctional.zeros(model)
        a = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        state.bound[:] = a @ a.conj().T
        frame = pointer.pointer_basis(state)
        probe = spectral_core.GeneralizedObservable.zeros(model)
        h = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        probe.bound[:] = h + h.conj().T

        labels = pointer.pointer_labels(model)[:, 0].astype(float)
        p_dense = np.diag(labels)
        rho_pf = np.diag(frame.spectrum_bound).astype(complex)
        o_pf = pointer.to_pointer_frame(probe, frame).bound
        comm = p_dense @ o_pf - o_pf @ p_dense
        oracle = abs(np.sum(rho_pf.conj() * comm))
        val = pointer.displacement_annihilation_check(state, frame, [probe])
        assert val == pytest.approx(oracle, abs=1e-12)
        assert val < 1e-9 * probe.norm()


class TestWeights:
    def test_round_trip(self, rng, model):
        frame = pointer.pointer_basis(random_state(rng, model))
        w_bound = rng.uniform(0.1, 1.0, model.m_total)
        w_cont = rng.uniform(0.1, 1.0, (model.n_nodes, model.m_total))
        state = pointer.state_from_weights(model, frame, w_bound, w_cont)
        wb, wc = pointer.extract_weights(state, frame)
        assert np.allclose(wb, w_bound, atol=1e-12)
        assert np.allclose(wc, w_cont, atol=1e-12)

    def test_maximally_mixed_weights_equal(self, model):
        state = StateFunctional.zeros(model)
        norm = 1.0 / (model.m_total * (1.0 + model.omega_max))
        state.bound[:] = np.eye(2) * norm
        state.diag[:] = np.eye(2)[None] * norm
        frame = pointer.pointer_basis(state)
        wb, wc = pointer.extract_weights(state, frame)
        assert np.allclose(wb, wb[0])
        assert np.allclose(wc, wc[0, 0])

    def test_normalized_weights_integrate_to_one(self, rng, model):
        state = random_state(rng, model, coherences=False)
        frame = pointer.pointer_basis(state)
        wb, wc = pointer.extract_weights(state, frame)
        total = wb.sum() + np.sum(model.quadrature_weights[:, None] * wc)
        assert total == pytest.approx(1.0, abs=1e-10)
        assert wb.min() > -1e-10 and wc.min() > -1e-10
