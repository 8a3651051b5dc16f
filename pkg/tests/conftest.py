import numpy as np
import pytest

from decolab import spectral_core


def make_model(nodes=5, m_dims=(2,), omega0=-1.0, omega_max=2.0):
    return spectral_core.SpectralModel.uniform(omega0, omega_max, nodes, m_dims)


def hermitian(rng, shape):
    a = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return a + np.conj(np.swapaxes(a, -1, -2))


def psd(rng, shape):
    a = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return np.einsum("...ij,...kj->...ik", a, a.conj())


def random_observable(rng, model):
    obs = spectral_core.GeneralizedObservable.zeros(model)
    k, m = model.n_nodes, model.m_total
    obs.bound[:] = hermitian(rng, (m, m))
    obs.diag[:] = hermitian(rng, (k, m, m))
    obs.cross_up[:] = rng.standard_normal((k, m, m)) + 1j * rng.standard_normal((k, m, m))
    obs.cross_down[:] = np.conj(np.swapaxes(obs.cross_up, -1, -2))
    kern = rng.standard_normal((k, k, m, m)) + 1j * rng.standard_normal((k, k, m, m))
    obs.kernel[:] = kern + np.conj(np.transpose(kern, (1, 0, 3, 2)))
    return obs


def random_state(rng, model, coherences=True, normalized=True):
    state = spectral_core.StateFunctional.zeros(model)
    k, m = model.n_nodes, model.m_total
    state.bound[:] = psd(rng, (m, m))
    state.diag[:] = psd(rng, (k, m, m))
    if coherences:
        state.cross_up[:] = rng.standard_normal((k, m, m)) + 1j * rng.standard_normal(
            (k, m, m)
        )
        state.cross_down[:] = np.conj(np.swapaxes(state.cross_up, -1, -2))
        kern = rng.standard_normal((k, k, m, m)) + 1j * rng.standard_normal((k, k, m, m))
        state.kernel[:] = kern + np.conj(np.transpose(kern, (1, 0, 3, 2)))
    if normalized:
        total = spectral_core.total_probability(state)
        for name in ("bound", "diag", "cross_up", "cross_down", "kernel"):
            getattr(state, name)[:] /= total
    return state


@pytest.fixture
def rng():
    return np.random.default_rng(20260826)


@pytest.fixture
def model():
    return make_model()
