"""Truncated-Fock-space reference implementations.

Everything here enumerates amplitudes explicitly, which is exponentially
expensive and only feasible for a few sites with small cutoffs.  The point is
independence: none of this code touches the transfer calculus, so agreement
between the two routes validates both.  Budget guards keep accidental use at
scale from freezing a session.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import ChainCoefficients, SbmParams, linear_chain_coefficients
from .state import MpsState, scaled_powers

AMPLITUDE_BUDGET = 10_000_000
DIAGONALIZATION_BUDGET = 4096

_SINGLE_SITE_OPS = ("occupation", "displacement", "hop")
_GLOBAL_OPS = ("norm", "sigma_x", "sigma_z", "hamiltonian")


class AmplitudeBudgetError(RuntimeError):
    """Requested cutoffs enumerate more amplitudes than the budget allows."""


class DiagonalizationBudgetError(RuntimeError):
    """Requested dense Hamiltonian exceeds the diagonalization budget."""


class BoundaryWeightError(RuntimeError):
    """Truncation boundary carries too much weight for the requested operator."""

    def __init__(self, site: int, weight: float, tolerance: float):
        super().__init__(
            f"relative weight {weight:.3e} at the cutoff boundary of site {site} "
            f"exceeds tolerance {tolerance:.1e}; raise the cutoff"
        )
        self.site = site
        self.weight = weight
        self.tolerance = tolerance


@dataclass(frozen=True, eq=False)
class DenseState:
    """Explicit amplitudes on a truncated Fock box.

    amplitudes[k, i_1, .., i_N] is the coefficient of |k, i_1 .. i_N>;
    tail_bound bounds the squared-norm weight outside the box.
    """

    cutoffs: tuple[int, ...]
    amplitudes: np.ndarray
    tail_bound: float

    def __post_init__(self) -> None:
        amps = np.asarray(self.amplitudes)
        if amps.shape != (2, *self.cutoffs):
            raise ValueError(
                f"amplitudes shape {amps.shape} does not match cutoffs {self.cutoffs}"
            )
        amps.flags.writeable = False
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "cutoffs", tuple(int(d) for d in self.cutoffs))


def dense_coefficients(
    state: MpsState, cutoffs, *, budget: int = AMPLITUDE_BUDGET
) -> DenseState:
    """Enumerate every amplitude of the state inside a Fock box.

    cutoffs gives the number of levels kept per site (occupations 0..d-1).
    The tail bound is analytic: the weight of the box complement is at most

        chi * sum_k ||S_k||_F^2 * (prod_m e^{r_m^2} - prod_m T_m(d_m))

    where r_m is the largest singular value of X_m and T_m the partial
    exponential sum sum_{i<d_m} r_m^{2i} / i!.  It follows from bounding each
    amplitude by the product of factor norms.
    """
    cutoffs = tuple(int(d) for d in cutoffs)
    if len(cutoffs) != state.n_sites:
        raise ValueError(
            f"need one cutoff per site ({state.n_sites}), got {len(cutoffs)}"
        )
    if any(d < 1 for d in cutoffs):
        raise ValueError("cutoffs must be >= 1")
    total = 2 * math.prod(cutoffs)
    if total > budget:
        raise AmplitudeBudgetError(
            f"{total} amplitudes exceed the budget of {budget}"
        )

    running = state.spin  # shape (2, ..occupations.., chi, chi)
    for m, d in enumerate(cutoffs):
        powers = scaled_powers(state.modes[m], d - 1)
        running = np.einsum("...ab,ibc->...iac", running, powers)
    amps = np.einsum("...aa->...", running)

    chi = state.chi
    spin_weight = float(np.sum(np.abs(state.spin) ** 2))
    full = 1.0
    kept = 1.0
    for m, d in enumerate(cutoffs):
        r2 = float(np.linalg.norm(state.modes[m], 2)) ** 2
        full *= math.exp(r2)
        kept *= sum(r2**i / math.factorial(i) for i in range(d))
    tail = chi * spin_weight * max(full - kept, 0.0)
    return DenseState(cutoffs=cutoffs, amplitudes=amps, tail_bound=tail)


def _lower(amps: np.ndarray, axis: int) -> np.ndarray:
    """Annihilation operator along one occupation axis."""
    d = amps.shape[axis]
    out = np.zeros_like(amps)
    src = [slice(None)] * amps.ndim
    dst = [slice(None)] * amps.ndim
    src[axis] = slice(1, d)
    dst[axis] = slice(0, d - 1)
    shape = [1] * amps.ndim
    shape[axis] = d - 1
    out[tuple(dst)] = amps[tuple(src)] * np.sqrt(np.arange(1, d)).reshape(shape)
    return out


def _raise(amps: np.ndarray, axis: int) -> np.ndarray:
    """Creation operator along one occupation axis."""
    d = amps.shape[axis]
    out = np.zeros_like(amps)
    src = [slice(None)] * amps.ndim
    dst = [slice(None)] * amps.ndim
    src[axis] = slice(0, d - 1)
    dst[axis] = slice(1, d)
    shape = [1] * amps.ndim
    shape[axis] = d - 1
    out[tuple(dst)] = amps[tuple(src)] * np.sqrt(np.arange(1, d)).reshape(shape)
    return out


def _occupation_weight(amps: np.ndarray, axis: int) -> np.ndarray:
    d = amps.shape[axis]
    shape = [1] * amps.ndim
    shape[axis] = d
    return np.abs(amps) ** 2 * np.arange(d).reshape(shape)


def _boundary_weight(amps: np.ndarray, axis: int) -> float:
    idx = [slice(None)] * amps.ndim
    idx[axis] = amps.shape[axis] - 1
    return float(np.sum(np.abs(amps[tuple(idx)]) ** 2))


def _check_boundary(dense: DenseState, sites, tolerance: float) -> None:
    amps = dense.amplitudes
    total = float(np.sum(np.abs(amps) ** 2))
    for site in sites:
        weight = _boundary_weight(amps, site) / total
        if weight > tolerance:
            raise BoundaryWeightError(site, weight, tolerance)


def _apply_hamiltonian(
    amps: np.ndarray, chain: ChainCoefficients, delta: float
) -> np.ndarray:
    out = np.zeros_like(amps)
    # spin flip: -(delta/2) sigma_x
    out[0] += -0.5 * delta * amps[1]
    out[1] += -0.5 * delta * amps[0]
    # impurity coupling: c0 sigma_z (b_1 + b_1^dag); spin component 0 is up
    displaced = _lower(amps, 1) + _raise(amps, 1)
    out[0] += chain.c0 * displaced[0]
    out[1] -= chain.c0 * displaced[1]
    # chain energies and hops
    for m in range(chain.n_sites):
        axis = m + 1
        d = amps.shape[axis]
        shape = [1] * amps.ndim
        shape[axis] = d
        out += chain.omega[m] * amps * np.arange(d).reshape(shape)
    for m in range(chain.n_sites - 1):
        hop = _raise(_lower(amps, m + 1), m + 2)
        out += chain.t[m] * (hop + _raise(_lower(amps, m + 2), m + 1))
    return out


def dense_expectation(
    dense: DenseState,
    op: str,
    *,
    site: int | None = None,
    chain: ChainCoefficients | None = None,
    delta: float | None = None,
    boundary_tolerance: float = 1e-10,
) -> float:
    """Unnormalized expectation value on the dense amplitudes.

    op is one of 'norm', 'sigma_x', 'sigma_z', 'occupation', 'displacement',
    'hop' (between site and site+1, needing a 1-based site), or 'hamiltonian'
    (needing chain and delta).  Operators that move quanta refuse to answer
    when the cutoff boundary carries more than boundary_tolerance of the
    weight, since the truncated result would be unreliable.
    """
    amps = dense.amplitudes
    n = amps.ndim - 1
    if op in _SINGLE_SITE_OPS:
        if site is None or not 1 <= site <= n:
            raise ValueError(f"op {op!r} needs a site in 1..{n}, got {site}")
        if op == "hop" and site == n:
            raise ValueError(f"hop at site {n} has no right neighbour")
    elif op not in _GLOBAL_OPS:
        raise ValueError(f"unknown operator {op!r}")

    if op == "norm":
        return float(np.sum(np.abs(amps) ** 2))
    if op == "sigma_x":
        value = np.sum(np.conj(amps[0]) * amps[1]) + np.sum(np.conj(amps[1]) * amps[0])
        return float(value.real)
    if op == "sigma_z":
        return float(np.sum(np.abs(amps[0]) ** 2) - np.sum(np.abs(amps[1]) ** 2))
    if op == "occupation":
        return float(np.sum(_occupation_weight(amps, site)))
    if op == "displacement":
        _check_boundary(dense, (site,), boundary_tolerance)
        value = np.sum(np.conj(amps) * (_lower(amps, site) + _raise(amps, site)))
        return float(value.real)
    if op == "hop":
        _check_boundary(dense, (site, site + 1), boundary_tolerance)
        moved = _raise(_lower(amps, site), site + 1)
        value = 2.0 * np.sum(np.conj(amps) * moved)
        return float(value.real)
    # hamiltonian
    if chain is None or delta is None:
        raise ValueError("'hamiltonian' needs chain coefficients and delta")
    if chain.n_sites != n:
        raise ValueError(f"chain has {chain.n_sites} sites, amplitudes have {n}")
    _check_boundary(dense, range(1, n + 1), boundary_tolerance)
    value = np.sum(np.conj(amps) * _apply_hamiltonian(amps, chain, delta))
    return float(value.real)


def exact_ground_state(
    chain: ChainCoefficients,
    delta: float,
    cutoffs,
    *,
    budget: int = DIAGONALIZATION_BUDGET,
) -> tuple[float, np.ndarray]:
    """Dense diagonalization of the truncated chain Hamiltonian.

    Returns the lowest eigenvalue and its eigenvector, ordered with the spin
    index slowest then site occupations.  The assembled matrix is checked to
    be Hermitian before diagonalizing.
    """
    cutoffs = tuple(int(d) for d in cutoffs)
    if len(cutoffs) != chain.n_sites:
        raise ValueError(
            f"need one cutoff per site ({chain.n_sites}), got {len(cutoffs)}"
        )
    dim = 2 * math.prod(cutoffs)
    if dim > budget:
        raise DiagonalizationBudgetError(
            f"dense dimension {dim} exceeds the budget of {budget}"
        )

    def number(d):
        return np.diag(np.arange(d, dtype=float))

    def lower(d):
        return np.diag(np.sqrt(np.arange(1, d, dtype=float)), 1)

    eye2 = np.eye(2)
    sigma_x = np.array([[0.0, 1.0], [1.0, 0.0]])
    sigma_z = np.array([[1.0, 0.0], [0.0, -1.0]])

    def embed(site_ops: dict[int, np.ndarray], spin_op: np.ndarray) -> np.ndarray:
        total = spin_op
        for m, d in enumerate(cutoffs):
            op = site_ops.get(m, np.eye(d))
            total = np.kron(total, op)
        return total

    h = embed({}, -0.5 * delta * sigma_x)
    d0 = cutoffs[0]
    h += chain.c0 * embed({0: lower(d0) + lower(d0).T}, sigma_z)
    for m, d in enumerate(cutoffs):
        h += chain.omega[m] * embed({m: number(d)}, eye2)
    for m in range(chain.n_sites - 1):
        da, db = cutoffs[m], cutoffs[m + 1]
        # b_{m+1}^dag b_m + b_m^dag b_{m+1} acting on the pair (m, m+1)
        pair = np.kron(lower(da), lower(db).T)
        pair = pair + pair.T
        # expand the pair operator into the full chain
        total = eye2
        k = 0
        while k < chain.n_sites:
            if k == m:
                total = np.kron(total, pair)
                k += 2
            else:
                total = np.kron(total, np.eye(cutoffs[k]))
                k += 1
        h += chain.t[m] * total
    if not np.allclose(h, h.T.conj(), atol=1e-12, rtol=0.0):
        raise ValueError("assembled Hamiltonian is not Hermitian")
    values, vectors = np.linalg.eigh(h)
    return float(values[0]), vectors[:, 0]


def random_probe_instance(rng: np.random.Generator):
    """One random (state, params, chain) triple for the equivalence suite.

    Small enough for the dense route: chi <= 2, up to 3 sites, mode matrices
    rescaled to spectral norm <= 0.5 so cutoff 30 leaves a negligible tail.
    """
    chi = int(rng.integers(1, 3))
    n_sites = int(rng.integers(1, 4))
    spin = rng.normal(0.0, 1.0, (2, chi, chi))
    modes = rng.normal(0.0, 1.0, (n_sites, chi, chi))
    for m in range(n_sites):
        norm = np.linalg.norm(modes[m], 2)
        if norm > 0:
            modes[m] *= rng.uniform(0.1, 0.5) / norm
    state = MpsState(spin=spin, modes=modes)
    params = SbmParams(
        s=float(rng.uniform(0.05, 0.95)),
        alpha=float(rng.uniform(0.0, 0.15)),
        delta=float(rng.uniform(0.05, 0.5)),
        omega_c=1.0,
    )
    chain = linear_chain_coefficients(params, n_sites)
    return state, params, chain


def run_equivalence_suite(
    n_instances: int = 200, *, seed: int = 20260819, cutoff: int = 30
) -> list[dict]:
    """Compare the transfer calculus against dense enumeration.

    For each random instance the squared norm, every site occupation, both
    spin expectations, and the total energy are computed along both routes
    and compared at 1e-8 relative tolerance (plus the analytic tail bound).
    Returns one report row per quantity with the worst relative error seen.
    """
    from . import observables
    from .energy import energy as transfer_energy
    from .state import SPIN_SIGMA_X, SPIN_SIGMA_Z, matrix_element, norm_sq

    rng = np.random.default_rng(np.random.SeedSequence(seed))
    rtol = 1e-8
    worst: dict[str, float] = {
        "norm": 0.0,
        "occupation": 0.0,
        "sigma_x": 0.0,
        "sigma_z": 0.0,
        "energy": 0.0,
    }

    def record(name: str, got: float, want: float, slack: float) -> None:
        err = max(abs(got - want) - slack, 0.0) / max(abs(want), 1e-12)
        worst[name] = max(worst[name], err)

    for _ in range(n_instances):
        state, params, chain = random_probe_instance(rng)
        dense = dense_coefficients(state, [cutoff] * state.n_sites)
        slack = dense.tail_bound
        w_dense = dense_expectation(dense, "norm")
        w = norm_sq(state)
        record("norm", w, w_dense, slack)
        site_occ = observables.occupations(state)
        for site in range(1, state.n_sites + 1):
            want = dense_expectation(dense, "occupation", site=site) / w_dense
            record("occupation", site_occ[site - 1], want, slack)
        record(
            "sigma_x",
            matrix_element(state, SPIN_SIGMA_X) / w,
            dense_expectation(dense, "sigma_x") / w_dense,
            slack,
        )
        record(
            "sigma_z",
            matrix_element(state, SPIN_SIGMA_Z) / w,
            dense_expectation(dense, "sigma_z") / w_dense,
            slack,
        )
        got = transfer_energy(state, chain, params.delta).total
        want = (
            dense_expectation(dense, "hamiltonian", chain=chain, delta=params.delta)
            / w_dense
        )
        record("energy", got, want, slack)

    return [
        {"quantity": name, "max_rel_err": err, "tolerance": rtol, "passed": err <= rtol}
        for name, err in worst.items()
    ]
