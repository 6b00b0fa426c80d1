"""Soft-cutoff matrix product state and its transfer calculus.

The amplitude of the basis state |k, i_1 .. i_N> is

    tr[ S_k  prod_m  X_m**i_m / sqrt(i_m!) ]

with two spin matrices S_0, S_1 and one matrix X_m per chain mode, all
chi x chi.  No Fock-space truncation enters: the matrix powers generate
every occupation amplitude, and the factorial damping makes all sums over
occupations converge to matrix exponentials.  Norms and matrix elements
reduce to traces of products of chi^2 x chi^2 transfer factors

    exp(conj(X_m) (x) X_m)

with operator insertions appearing as extra Kronecker factors.  Throughout,
kron(A, B) places the bra-side (conjugated) matrix in the first slot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np
from scipy.linalg import expm

REAL = "real"
COMPLEX = "complex"

DEFAULT_MAX_ENTRY = 1e150
NORM_FLOOR = 1e-280

STATE_FORMAT_VERSION = 1

# relative tolerance for discarding the imaginary part of nominally real traces
_IMAG_RTOL = 1e-8


class ScaleOverflowError(FloatingPointError):
    """A transfer factor or partial product exceeded the magnitude bound."""

    def __init__(self, site: int, magnitude: float, bound: float):
        super().__init__(
            f"transfer product overflow at site {site}: "
            f"largest entry {magnitude:.3e} exceeds bound {bound:.3e}"
        )
        self.site = site
        self.magnitude = magnitude
        self.bound = bound


class NormUnderflowError(FloatingPointError):
    """The squared norm fell below the floor where energies are meaningless."""


class StateFormatError(ValueError):
    """A serialized state document is malformed or has an unknown version."""


@dataclass(frozen=True, eq=False)
class MpsState:
    """State data: spin matrices, mode matrices, and the scalar field.

    spin:  array (2, chi, chi); component 0 is spin-up (sigma_z = +1)
    modes: array (n_sites, chi, chi), one matrix per chain mode, site m
           at index m-1
    field: "real" or "complex"
    """

    spin: np.ndarray
    modes: np.ndarray
    field: str = REAL

    def __post_init__(self) -> None:
        if self.field not in (REAL, COMPLEX):
            raise ValueError(f"field must be {REAL!r} or {COMPLEX!r}, got {self.field!r}")
        dtype = np.float64 if self.field == REAL else np.complex128
        spin = np.array(self.spin, dtype=dtype)
        modes = np.array(self.modes, dtype=dtype)
        if spin.ndim != 3 or spin.shape[0] != 2 or spin.shape[1] != spin.shape[2]:
            raise ValueError(f"spin must have shape (2, chi, chi), got {spin.shape}")
        chi = spin.shape[1]
        if modes.ndim != 3 or modes.shape[1:] != (chi, chi) or modes.shape[0] < 1:
            raise ValueError(
                f"modes must have shape (n_sites, {chi}, {chi}) with n_sites >= 1, "
                f"got {modes.shape}"
            )
        if not (np.all(np.isfinite(spin)) and np.all(np.isfinite(modes))):
            raise ValueError("state matrices must be finite")
        if not np.any(spin):
            raise ValueError("at least one spin matrix must be nonzero")
        spin.flags.writeable = False
        modes.flags.writeable = False
        object.__setattr__(self, "spin", spin)
        object.__setattr__(self, "modes", modes)

    @property
    def chi(self) -> int:
        return int(self.spin.shape[1])

    @property
    def n_sites(self) -> int:
        return int(self.modes.shape[0])

    @classmethod
    def random(
        cls,
        chi: int,
        n_sites: int,
        scale: float,
        rng: np.random.Generator,
        field: str = REAL,
    ) -> "MpsState":
        """Entries drawn iid normal(0, scale); complex states get independent parts."""
        shape = (2 + n_sites, chi, chi)
        data = rng.normal(0.0, scale, shape)
        if field == COMPLEX:
            data = data + 1j * rng.normal(0.0, scale, shape)
        return cls(spin=data[:2], modes=data[2:], field=field)

    def to_document(self) -> dict:
        """JSON-ready dict; complex entries stored as [re, im] pairs."""

        def encode(a: np.ndarray):
            if self.field == COMPLEX:
                return np.stack([a.real, a.imag], axis=-1).tolist()
            return a.tolist()

        return {
            "version": STATE_FORMAT_VERSION,
            "chi": self.chi,
            "n_sites": self.n_sites,
            "field": self.field,
            "spin": encode(self.spin),
            "modes": encode(self.modes),
        }

    @classmethod
    def from_document(cls, doc: dict) -> "MpsState":
        if not isinstance(doc, dict):
            raise StateFormatError("state document must be a mapping")
        version = doc.get("version")
        if version != STATE_FORMAT_VERSION:
            raise StateFormatError(
                f"unsupported state format version {version!r}, "
                f"this build reads version {STATE_FORMAT_VERSION}"
            )
        try:
            field = doc["field"]
            spin = np.asarray(doc["spin"], dtype=float)
            modes = np.asarray(doc["modes"], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise StateFormatError(f"malformed state document: {exc}") from exc
        if field == COMPLEX:
            if spin.shape[-1] != 2 or modes.shape[-1] != 2:
                raise StateFormatError("complex entries must be [re, im] pairs")
            spin = spin[..., 0] + 1j * spin[..., 1]
            modes = modes[..., 0] + 1j * modes[..., 1]
        try:
            state = cls(spin=spin, modes=modes, field=field)
        except ValueError as exc:
            raise StateFormatError(f"invalid state data: {exc}") from exc
        if state.chi != doc.get("chi") or state.n_sites != doc.get("n_sites"):
            raise StateFormatError("declared dimensions do not match array shapes")
        return state


# ---------------------------------------------------------------------------
# operator insertions

_KINDS = ("occupation", "displacement", "hop_left", "hop_right", "fock_pair")


@dataclass(frozen=True)
class SiteInsertion:
    """A local operator spliced into the transfer product at one site.

    occupation:    number operator at the site
    displacement:  position quadrature b + b^dag at the site
    hop_left:      b_{m+1}^dag b_m, moving one quantum from site m to m+1;
                   occupies sites m and m+1
    hop_right:     b_m^dag b_{m+1}; occupies sites m and m+1
    fock_pair:     projector-style factor selecting ket occupation ket_power
                   and bra occupation bra_power; replaces the site's transfer
                   factor instead of multiplying it
    """

    kind: str
    ket_power: int = 0
    bra_power: int = 0

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise ValueError(f"unknown insertion kind {self.kind!r}")
        if self.ket_power < 0 or self.bra_power < 0:
            raise ValueError("fock powers must be >= 0")


OCCUPATION = SiteInsertion("occupation")
DISPLACEMENT = SiteInsertion("displacement")
HOP_LEFT = SiteInsertion("hop_left")
HOP_RIGHT = SiteInsertion("hop_right")


def fock_pair(ket_power: int, bra_power: int) -> SiteInsertion:
    return SiteInsertion("fock_pair", ket_power=ket_power, bra_power=bra_power)


def _locked(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a

SPIN_IDENTITY = _locked(np.eye(2))
SPIN_SIGMA_X = _locked(np.array([[0.0, 1.0], [1.0, 0.0]]))
SPIN_SIGMA_Z = _locked(np.array([[1.0, 0.0], [0.0, -1.0]]))


# ---------------------------------------------------------------------------
# transfer calculus


def _check_entry_bound(mat: np.ndarray, site: int, bound: float) -> None:
    mag = float(np.max(np.abs(mat))) if mat.size else 0.0
    if not math.isfinite(mag) or mag > bound:
        raise ScaleOverflowError(site, mag, bound)


def site_transfer(state: MpsState, site: int, *, max_entry: float = DEFAULT_MAX_ENTRY) -> np.ndarray:
    """exp(conj(X_site) (x) X_site), the chi^2 x chi^2 factor of one mode."""
    if not 1 <= site <= state.n_sites:
        raise ValueError(f"site must lie in 1..{state.n_sites}, got {site}")
    x = state.modes[site - 1]
    with np.errstate(over="ignore", invalid="ignore"):
        factor = expm(np.kron(np.conj(x), x))
    _check_entry_bound(factor, site, max_entry)
    return factor


def transfer_product(
    state: MpsState, a: int, b: int, *, max_entry: float = DEFAULT_MAX_ENTRY
) -> np.ndarray:
    """Ordered product of the site transfer factors for sites a..b.

    Empty ranges (a > b) give the identity.  Raises ScaleOverflowError naming
    the offending site if any factor or partial product exceeds max_entry.
    """
    if a < 1:
        raise ValueError(f"range start must be >= 1, got {a}")
    if b > state.n_sites:
        raise ValueError(f"range end must be <= {state.n_sites}, got {b}")
    chi2 = state.chi**2
    dtype = np.float64 if state.field == REAL else np.complex128
    total = np.eye(chi2, dtype=dtype)
    for m in range(a, b + 1):
        total = total @ site_transfer(state, m, max_entry=max_entry)
        _check_entry_bound(total, m, max_entry)
    return total


def spin_transfer(state: MpsState, weights: np.ndarray | None = None) -> np.ndarray:
    """sum_{k', k} w[k', k] kron(conj(S_k'), S_k); identity weights by default."""
    w = SPIN_IDENTITY if weights is None else np.asarray(weights)
    if w.shape != (2, 2):
        raise ValueError(f"spin weights must be a 2x2 array, got shape {w.shape}")
    s = state.spin
    sc = np.conj(s)
    total = None
    for kp in range(2):
        for k in range(2):
            if w[kp, k] == 0:
                continue
            term = w[kp, k] * np.kron(sc[kp], s[k])
            total = term if total is None else total + term
    if total is None:
        total = np.zeros((state.chi**2, state.chi**2))
    return total


def _real_trace(value, what: str) -> float:
    if np.iscomplexobj(value):
        scale = max(abs(value.real), 1.0)
        if abs(value.imag) > _IMAG_RTOL * scale:
            raise ValueError(
                f"{what} has non-negligible imaginary part {value.imag:.3e} "
                f"(real part {value.real:.3e})"
            )
        return float(value.real)
    return float(value)


def norm_sq(state: MpsState, *, max_entry: float = DEFAULT_MAX_ENTRY) -> float:
    """Squared norm tr[Xi Gamma_1^N].  Real and positive for valid states."""
    value = np.trace(spin_transfer(state) @ transfer_product(state, 1, state.n_sites, max_entry=max_entry))
    w = _real_trace(value, "squared norm")
    if w <= NORM_FLOOR:
        raise NormUnderflowError(
            f"squared norm {w:.3e} is at or below the floor {NORM_FLOOR:.0e}"
        )
    return w


def scaled_powers(matrix: np.ndarray, top: int) -> np.ndarray:
    """Stack [X**i / sqrt(i!)] for i = 0..top, built by repeated scaled products."""
    chi = matrix.shape[0]
    out = np.empty((top + 1, chi, chi), dtype=matrix.dtype)
    out[0] = np.eye(chi, dtype=matrix.dtype)
    for i in range(1, top + 1):
        out[i] = out[i - 1] @ (matrix / math.sqrt(i))
    return out


def _insertion_occupies(site: int, ins: SiteInsertion) -> tuple[int, ...]:
    if ins.kind in ("hop_left", "hop_right"):
        return (site, site + 1)
    return (site,)


def matrix_element(
    state: MpsState,
    weights: np.ndarray | None = None,
    insertions: Mapping[int, SiteInsertion] | None = None,
    *,
    max_entry: float = DEFAULT_MAX_ENTRY,
):
    """Unnormalized expectation of a spin weight times local bosonic insertions.

    ``insertions`` maps 1-based sites to SiteInsertion values.  Hop insertions
    occupy the named site and its right neighbour, so nothing else may be
    inserted there.  With no arguments this is the squared norm, unchecked.
    Returns float for real states, complex otherwise.
    """
    n = state.n_sites
    ins = dict(insertions) if insertions else {}
    occupied: dict[int, int] = {}
    for site, item in ins.items():
        if not isinstance(item, SiteInsertion):
            raise TypeError(f"insertion at site {site} must be a SiteInsertion")
        if not 1 <= site <= n:
            raise ValueError(f"insertion site must lie in 1..{n}, got {site}")
        if item.kind in ("hop_left", "hop_right") and site == n:
            raise ValueError(f"{item.kind} at site {n} has no right neighbour")
        for m in _insertion_occupies(site, item):
            if m in occupied:
                raise ValueError(
                    f"conflicting insertions: sites {occupied[m]} and {site} both touch site {m}"
                )
            occupied[m] = site

    x = state.modes
    xc = np.conj(x)
    total = spin_transfer(state, weights)
    for site in range(1, n + 1):
        m = site - 1
        item = ins.get(site)
        if item is not None and item.kind == "fock_pair":
            ket = scaled_powers(x[m], item.ket_power)[item.ket_power]
            bra = scaled_powers(xc[m], item.bra_power)[item.bra_power]
            factor = np.kron(bra, ket)
        else:
            with np.errstate(over="ignore", invalid="ignore"):
                factor = expm(np.kron(xc[m], x[m]))
            _check_entry_bound(factor, site, max_entry)
            if item is not None:
                if item.kind == "occupation":
                    extra = np.kron(xc[m], x[m])
                elif item.kind == "displacement":
                    eye = np.eye(state.chi, dtype=x.dtype)
                    extra = np.kron(eye, x[m]) + np.kron(xc[m], eye)
                elif item.kind == "hop_left":
                    extra = np.kron(xc[m + 1], x[m])
                elif item.kind == "hop_right":
                    extra = np.kron(xc[m], x[m + 1])
                else:  # pragma: no cover - kinds are validated above
                    raise AssertionError(item.kind)
                factor = factor @ extra
        total = total @ factor
        _check_entry_bound(total, site, max_entry)
    value = np.trace(total)
    if state.field == REAL:
        return float(value)
    return complex(value)


def coefficient(state: MpsState, spin_index: int, occupations) -> float | complex:
    """Amplitude of |spin_index, occupations>: tr[S_k prod X_m**i_m / sqrt(i_m!)].

    spin_index is 0 (up) or 1 (down); occupations lists one integer per site.
    """
    if spin_index not in (0, 1):
        raise ValueError(f"spin_index must be 0 or 1, got {spin_index}")
    occ = list(occupations)
    if len(occ) != state.n_sites:
        raise ValueError(
            f"need one occupation per site ({state.n_sites}), got {len(occ)}"
        )
    running = state.spin[spin_index]
    for m, i in enumerate(occ):
        i = int(i)
        if i < 0:
            raise ValueError(f"occupation at site {m + 1} must be >= 0, got {i}")
        x = state.modes[m]
        for j in range(1, i + 1):
            running = running @ (x / math.sqrt(j))
    value = np.trace(running)
    if state.field == REAL:
        return float(value)
    return complex(value)


class Transfers:
    """Per-site transfer factors with prefix and suffix products.

    prefix[m] is the product of factors for sites 1..m (prefix[0] identity);
    suffix[m] covers sites m..N (suffix[N+1] identity, index shifted so
    suffix[m] sits at list position m-1 with two extra identity slots).
    Built once per state and shared by energy and observable evaluations.
    """

    __slots__ = ("kernel", "site", "prefix", "suffix", "spin_identity")

    def __init__(self, kernel, site, prefix, suffix, spin_identity):
        self.kernel = kernel
        self.site = site
        self.prefix = prefix
        self.suffix = suffix
        self.spin_identity = spin_identity

    @classmethod
    def build(cls, state: MpsState, *, max_entry: float = DEFAULT_MAX_ENTRY) -> "Transfers":
        n = state.n_sites
        chi2 = state.chi**2
        dtype = np.float64 if state.field == REAL else np.complex128
        x = state.modes
        xc = np.conj(x)
        kernel = np.einsum("mab,mcd->macbd", xc, x).reshape(n, chi2, chi2)
        # Overflow at wild trial points is handled by the bound checks below,
        # so silence the intermediate warnings instead of leaking them.
        with np.errstate(over="ignore", invalid="ignore"):
            site = expm(kernel)
            if site.ndim == 2:  # scipy collapses single-matrix batches
                site = site[None]
            for m in range(n):
                _check_entry_bound(site[m], m + 1, max_entry)
            eye = np.eye(chi2, dtype=dtype)
            prefix = [eye]
            for m in range(n):
                nxt = prefix[-1] @ site[m]
                _check_entry_bound(nxt, m + 1, max_entry)
                prefix.append(nxt)
            suffix = [eye] * (n + 2)
            for m in range(n, 0, -1):
                suffix[m] = site[m - 1] @ suffix[m + 1]
                _check_entry_bound(suffix[m], m, max_entry)
        return cls(
            kernel=kernel,
            site=site,
            prefix=prefix,
            suffix=suffix,
            spin_identity=spin_transfer(state),
        )

    def norm_value(self) -> float:
        return _real_trace(
            np.trace(self.spin_identity @ self.prefix[-1]), "squared norm"
        )
