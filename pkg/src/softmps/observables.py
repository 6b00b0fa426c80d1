"""Ground-state observables: spin block, occupations, mode reduced densities.

Site reduced density matrices are the one place a Fock cutoff reappears:
their matrix elements are evaluated level by level, with the cutoff grown
adaptively until the missing trace weight drops below a tolerance.  The
ansatz itself stays truncation-free; the cutoff only limits what gets
reported.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .energy import EnergyBreakdown, energy
from .model import ChainCoefficients
from .state import (
    DEFAULT_MAX_ENTRY,
    MpsState,
    Transfers,
    scaled_powers,
)

_HERMITICITY_RTOL = 1e-8
_PSD_FLOOR = -1e-9


class RdmTailError(RuntimeError):
    """The reduced density matrix failed to capture enough trace weight."""

    def __init__(self, site: int, deficit: float, cutoff: int, tolerance: float):
        super().__init__(
            f"site {site} reduced density matrix still misses trace weight "
            f"{deficit:.3e} at cutoff {cutoff} (tolerance {tolerance:.1e}); "
            "the mode is occupied beyond what can be reported"
        )
        self.site = site
        self.deficit = deficit
        self.cutoff = cutoff
        self.tolerance = tolerance


@dataclass(frozen=True, eq=False)
class SpinBlock:
    """Spin reduced density matrix with its derived scalars.

    magnetization is |<sigma_z>|, coherence is <sigma_x>.
    """

    rho: np.ndarray
    magnetization: float
    coherence: float


def _check_density(rho: np.ndarray, what: str) -> None:
    scale = max(float(np.max(np.abs(rho))), 1e-300)
    if np.max(np.abs(rho - rho.conj().T)) > _HERMITICITY_RTOL * scale:
        raise ValueError(f"{what} is not Hermitian")
    if np.min(np.linalg.eigvalsh((rho + rho.conj().T) / 2.0)) < _PSD_FLOOR:
        raise ValueError(f"{what} has an eigenvalue below {_PSD_FLOOR}")


def spin_block(
    state: MpsState,
    *,
    transfers: Transfers | None = None,
    max_entry: float = DEFAULT_MAX_ENTRY,
) -> SpinBlock:
    """Trace out all modes, keeping the 2x2 spin density matrix."""
    tr = transfers if transfers is not None else Transfers.build(state, max_entry=max_entry)
    w = tr.norm_value()
    chi = state.chi
    g4 = tr.prefix[state.n_sites].reshape(chi, chi, chi, chi)
    rho = np.einsum("aik,bjl,klij->ab", np.conj(state.spin), state.spin, g4) / w
    _check_density(rho, "spin reduced density matrix")
    if abs(np.trace(rho).real - 1.0) > 1e-8:
        raise ValueError(f"spin density matrix trace deviates from 1: {np.trace(rho)}")
    rho = (rho + rho.conj().T) / 2.0
    rho.flags.writeable = False
    return SpinBlock(
        rho=rho,
        magnetization=abs(float(rho[0, 0].real - rho[1, 1].real)),
        coherence=float(rho[0, 1].real + rho[1, 0].real),
    )


def occupations(
    state: MpsState,
    *,
    transfers: Transfers | None = None,
    max_entry: float = DEFAULT_MAX_ENTRY,
) -> np.ndarray:
    """Mean occupation of every chain mode, in site order."""
    tr = transfers if transfers is not None else Transfers.build(state, max_entry=max_entry)
    w = tr.norm_value()
    xi = tr.spin_identity
    out = np.empty(state.n_sites)
    for m in range(state.n_sites):
        value = np.trace(xi @ tr.prefix[m + 1] @ tr.kernel[m] @ tr.suffix[m + 2])
        occ = float(value.real) / w
        if occ < -1e-8:
            raise ValueError(f"occupation at site {m + 1} came out negative: {occ}")
        out[m] = max(occ, 0.0)
    return out


def site_rdm(
    state: MpsState,
    site: int,
    *,
    tail_tolerance: float = 1e-10,
    max_cutoff: int = 200,
    transfers: Transfers | None = None,
    max_entry: float = DEFAULT_MAX_ENTRY,
) -> np.ndarray:
    """Reduced density matrix of one chain mode in the Fock basis.

    The matrix is grown until its trace deficit is below tail_tolerance
    (so the trace is 1 up to that deficit; no renormalization is applied),
    and at most max_cutoff levels are reported.  Raises RdmTailError when
    the weight refuses to fit, which happens for strongly displaced modes.
    """
    if not 1 <= site <= state.n_sites:
        raise ValueError(f"site must lie in 1..{state.n_sites}, got {site}")
    if tail_tolerance <= 0:
        raise ValueError("tail_tolerance must be > 0")
    tr = transfers if transfers is not None else Transfers.build(state, max_entry=max_entry)
    w = tr.norm_value()
    chi = state.chi
    env = (tr.suffix[site + 1] @ tr.spin_identity @ tr.prefix[site - 1]).reshape(
        chi, chi, chi, chi
    )
    x = state.modes[site - 1]

    cutoff = min(8, max_cutoff)
    while True:
        powers = scaled_powers(x, cutoff - 1)
        rho = (
            np.einsum("bik,ajl,klij->ab", np.conj(powers), powers, env) / w
        )
        deficit = 1.0 - float(np.trace(rho).real)
        if deficit <= tail_tolerance or cutoff >= max_cutoff:
            break
        cutoff = min(2 * cutoff, max_cutoff)
    if deficit > tail_tolerance:
        raise RdmTailError(site, deficit, cutoff, tail_tolerance)
    _check_density(rho, f"site {site} reduced density matrix")
    rho = (rho + rho.conj().T) / 2.0
    if state.field == "real":
        rho = rho.real
    rho.flags.writeable = False
    return rho


def von_neumann_entropy(rho: np.ndarray, *, tolerance: float = 1e-6) -> float:
    """Entropy -sum p ln p of a density matrix, in nats.

    Rejects non-Hermitian matrices and traces away from 1 by more than the
    tolerance.  Eigenvalues within roundoff below zero are clipped.
    """
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"density matrix must be square, got shape {rho.shape}")
    scale = max(float(np.max(np.abs(rho))), 1e-300)
    if np.max(np.abs(rho - rho.conj().T)) > tolerance * scale:
        raise ValueError("density matrix is not Hermitian")
    trace = float(np.trace(rho).real)
    if abs(trace - 1.0) > tolerance:
        raise ValueError(f"density matrix trace {trace} deviates from 1 beyond {tolerance}")
    values = np.linalg.eigvalsh((rho + rho.conj().T) / 2.0)
    values = np.clip(values, 0.0, None)
    positive = values[values > 0.0]
    # an eigenvalue a hair above 1 would otherwise yield a tiny negative
    return max(0.0, float(-np.sum(positive * np.log(positive))))


@dataclass(frozen=True, eq=False)
class ObservableSet:
    """Everything the sweep and reporting layers consume, in one bundle."""

    magnetization: float
    coherence: float
    spin_entropy: float
    occupations: np.ndarray
    site_entropies: np.ndarray
    energy: EnergyBreakdown


def observable_set(
    state: MpsState,
    chain: ChainCoefficients,
    delta: float,
    *,
    tail_tolerance: float = 1e-8,
    max_cutoff: int = 200,
    max_entry: float = DEFAULT_MAX_ENTRY,
) -> ObservableSet:
    """Assemble the standard observable bundle for one converged state.

    The default reduced-density tail tolerance is the looser scan value;
    tighten it to 1e-10 when precision matters more than robustness deep in
    the localized phase.
    """
    tr = Transfers.build(state, max_entry=max_entry)
    block = spin_block(state, transfers=tr)
    occ = occupations(state, transfers=tr)
    entropies = np.empty(state.n_sites)
    for site in range(1, state.n_sites + 1):
        rho = site_rdm(
            state,
            site,
            tail_tolerance=tail_tolerance,
            max_cutoff=max_cutoff,
            transfers=tr,
        )
        entropies[site - 1] = von_neumann_entropy(rho)
    breakdown = energy(state, chain, delta, max_entry=max_entry)
    return ObservableSet(
        magnetization=block.magnetization,
        coherence=block.coherence,
        spin_entropy=von_neumann_entropy(block.rho),
        occupations=occ,
        site_entropies=entropies,
        energy=breakdown,
    )
