import numpy as np
import pytest

from softmps.energy import energy, pack, unpack


@pytest.fixture
def rng():
    return np.random.default_rng(20260819)


def central_fd_gradient(x, chi, n_sites, chain, delta, field, eps=1e-6):
    """Central finite differences of the packed energy, one parameter at a time."""
    x = np.asarray(x, dtype=float)
    grad = np.empty_like(x)
    for i in range(x.size):
        hi = x.copy()
        lo = x.copy()
        hi[i] += eps
        lo[i] -= eps
        e_hi = energy(unpack(hi, chi, n_sites, field), chain, delta).total
        e_lo = energy(unpack(lo, chi, n_sites, field), chain, delta).total
        grad[i] = (e_hi - e_lo) / (2 * eps)
    return grad


def random_bounded_state(rng, chi, n_sites, field="real", spectral_cap=0.5):
    """Random state with every mode matrix rescaled to spectral norm <= cap."""
    from softmps.state import MpsState

    shape = (2 + n_sites, chi, chi)
    data = rng.normal(0.0, 1.0, shape)
    if field == "complex":
        data = data + 1j * rng.normal(0.0, 1.0, shape)
    spin, modes = data[:2], np.array(data[2:])
    for m in range(n_sites):
        norm = np.linalg.norm(modes[m], 2)
        if norm > 0:
            modes[m] *= rng.uniform(0.1, 1.0) * spectral_cap / norm
    return MpsState(spin=spin, modes=modes, field=field)
