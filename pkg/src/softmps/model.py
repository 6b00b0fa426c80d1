"""Spin-boson model parameters and bosonic-chain discretizations.

The bath is characterized by a power-law spectral density with a hard upper
cutoff.  Two discretizations of the bath into a nearest-neighbour bosonic
chain are provided: an exact mapping of the continuous measure (``linear``)
and a geometric-lattice mapping (``log``) that concentrates modes at low
frequency.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

LINEAR = "linear"
LOGARITHMIC = "log"

SCHEMES = (LINEAR, LOGARITHMIC)


@dataclass(frozen=True)
class SbmParams:
    """Physical inputs.

    s:       bath exponent, sub-ohmic for 0 < s < 1 (required here)
    alpha:   dimensionless system-bath coupling strength, >= 0
    delta:   tunneling amplitude of the two-level system, > 0
    omega_c: bath cutoff frequency, > 0
    """

    s: float
    alpha: float
    delta: float
    omega_c: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 < self.s < 1.0:
            raise ValueError(f"bath exponent s must lie in (0, 1), got {self.s}")
        if self.alpha < 0.0:
            raise ValueError(f"coupling alpha must be >= 0, got {self.alpha}")
        if self.delta <= 0.0:
            raise ValueError(f"tunneling delta must be > 0, got {self.delta}")
        if self.omega_c <= 0.0:
            raise ValueError(f"cutoff omega_c must be > 0, got {self.omega_c}")


def spectral_density(params: SbmParams, omega: float) -> float:
    """Bath spectral density J(omega) = 2 pi alpha omega_c**(1-s) omega**s.

    Vanishes outside the open interval (0, omega_c); the hard cutoff is
    exclusive, so J(omega_c) == 0.  Negative frequencies are rejected.
    """
    if omega < 0.0:
        raise ValueError(f"spectral density is defined for omega >= 0, got {omega}")
    if omega == 0.0 or omega >= params.omega_c:
        return 0.0
    return 2.0 * math.pi * params.alpha * params.omega_c ** (1.0 - params.s) * omega**params.s


@dataclass(frozen=True, eq=False)
class ChainCoefficients:
    """Nearest-neighbour chain form of the discretized bath.

    c0:    coupling of the impurity to the first chain mode
    omega: site energies, one per mode (length n_sites)
    t:     hopping amplitudes between adjacent modes (length n_sites - 1)
    """

    c0: float
    omega: np.ndarray
    t: np.ndarray
    scheme: str = LINEAR
    lam: float | None = None

    def __post_init__(self) -> None:
        omega = np.asarray(self.omega, dtype=float)
        t = np.asarray(self.t, dtype=float)
        if omega.ndim != 1 or omega.size < 1:
            raise ValueError("omega must be a 1-d array with at least one entry")
        if t.shape != (omega.size - 1,):
            raise ValueError(
                f"t must have length len(omega) - 1, got {t.shape} for {omega.size} sites"
            )
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}, expected one of {SCHEMES}")
        if self.scheme == LINEAR and np.any(omega <= 0.0):
            raise ValueError("linear-scheme site energies must all be positive")
        if not (np.all(np.isfinite(omega)) and np.all(np.isfinite(t)) and math.isfinite(self.c0)):
            raise ValueError("chain coefficients must be finite")
        omega.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "t", t)

    @property
    def n_sites(self) -> int:
        return int(self.omega.size)


def impurity_coupling(params: SbmParams) -> float:
    """Coupling of the two-level system to the first chain mode.

    Equals sqrt(alpha / (2 (s + 1))) * omega_c, the square root of the total
    integrated spectral weight over 2 pi.  Identical for both discretization
    schemes because the first chain mode carries the full bath weight.
    """
    return math.sqrt(params.alpha / (2.0 * (params.s + 1.0))) * params.omega_c


def linear_chain_coefficients(params: SbmParams, n_sites: int) -> ChainCoefficients:
    """Exact chain mapping of the power-law measure on [0, omega_c].

    Site energies and hoppings are the Jacobi recurrence coefficients of the
    weight x**s on the unit interval, scaled by omega_c.  With n = 0, 1, ...
    counting modes from the impurity end:

        omega_n = (omega_c / 2) * (1 + s**2 / ((s + 2n) (2 + s + 2n)))
        t_n     = omega_c * (1 + n)(1 + s + n) / ((s + 2 + 2n)(3 + s + 2n))
                  * sqrt((3 + s + 2n) / (1 + s + 2n))

    Both tend to omega_c/2 and omega_c/4; the chain is gapless only in the
    infinite-length limit.
    """
    if n_sites < 1:
        raise ValueError(f"need at least one chain site, got {n_sites}")
    s = params.s
    wc = params.omega_c
    n = np.arange(n_sites, dtype=float)
    omega = 0.5 * wc * (1.0 + s * s / ((s + 2.0 * n) * (2.0 + s + 2.0 * n)))
    m = n[: n_sites - 1]
    t = (
        wc
        * (1.0 + m)
        * (1.0 + s + m)
        / ((s + 2.0 + 2.0 * m) * (3.0 + s + 2.0 * m))
        * np.sqrt((3.0 + s + 2.0 * m) / (1.0 + s + 2.0 * m))
    )
    return ChainCoefficients(
        c0=impurity_coupling(params), omega=omega, t=t, scheme=LINEAR, lam=None
    )


@dataclass(frozen=True, eq=False)
class LogChainInputs:
    """Recurrence data the log-scheme assembly consumes.

    scale:   overall energy scale (first moment of the discrete measure)
    recur_a: forward recurrence coefficients, index 0..n_max
    recur_c: backward recurrence coefficients, index 0..n_max
    norms:   polynomial normalization constants, index 0..n_max

    Site energies are scale * (recur_a[n] + recur_c[n]) and hoppings are
    -scale * norms[n+1] / norms[n] * recur_a[n].
    """

    scale: float
    recur_a: np.ndarray
    recur_c: np.ndarray
    norms: np.ndarray

    def __post_init__(self) -> None:
        a = np.asarray(self.recur_a, dtype=float)
        c = np.asarray(self.recur_c, dtype=float)
        norms = np.asarray(self.norms, dtype=float)
        if not (a.shape == c.shape == norms.shape) or a.ndim != 1:
            raise ValueError("recurrence arrays must be 1-d and of equal length")
        for arr in (a, c, norms):
            arr.flags.writeable = False
        object.__setattr__(self, "recur_a", a)
        object.__setattr__(self, "recur_c", c)
        object.__setattr__(self, "norms", norms)

    @property
    def n_max(self) -> int:
        return int(self.recur_a.size) - 1


LogCoefficientProvider = Callable[[SbmParams, float, int], LogChainInputs]


def q_lattice_log_provider(params: SbmParams, lam: float, n_max: int) -> LogChainInputs:
    """Closed-form recurrence inputs for the geometric-lattice discretization.

    Collapsing the spectral weight of each band [lam**-(n+1), lam**-n] * omega_c
    onto a single mode gives a measure supported on the points q**n with
    weights proportional to q**(n (s+1)), q = 1/lam.  Its orthogonal
    polynomials satisfy a q-difference recurrence with

        recur_a[n] = q**n (1 - q**(n+s+1))**2
                     / ((1 - q**(2n+s+1)) (1 - q**(2n+s+2)))
        recur_c[n] = q**(n+s) (1 - q**n)**2
                     / ((1 - q**(2n+s)) (1 - q**(2n+s+1)))

    and the scale is the normalized first moment

        scale = omega_c * (s+1)/(s+2) * (1 - lam**-(s+2)) / (1 - lam**-(s+1)).

    The normalization constants alternate in sign so that the assembled
    hoppings come out positive.
    """
    if lam <= 1.0:
        raise ValueError(f"lattice ratio lam must exceed 1, got {lam}")
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    s = params.s
    q = 1.0 / lam
    n = np.arange(n_max + 1, dtype=float)
    recur_a = (
        q**n * (1.0 - q ** (n + s + 1.0)) ** 2
        / ((1.0 - q ** (2.0 * n + s + 1.0)) * (1.0 - q ** (2.0 * n + s + 2.0)))
    )
    recur_c = np.zeros(n_max + 1)
    if n_max >= 1:
        m = n[1:]
        recur_c[1:] = (
            q ** (m + s) * (1.0 - q**m) ** 2
            / ((1.0 - q ** (2.0 * m + s)) * (1.0 - q ** (2.0 * m + s + 1.0)))
        )
    norms = np.ones(n_max + 1)
    for k in range(n_max):
        norms[k + 1] = -norms[k] * math.sqrt(recur_c[k + 1] / recur_a[k])
    scale = (
        params.omega_c
        * (s + 1.0)
        / (s + 2.0)
        * (1.0 - q ** (s + 2.0))
        / (1.0 - q ** (s + 1.0))
    )
    return LogChainInputs(scale=scale, recur_a=recur_a, recur_c=recur_c, norms=norms)


def log_chain_coefficients(
    params: SbmParams,
    n_sites: int,
    lam: float,
    provider: LogCoefficientProvider = q_lattice_log_provider,
) -> ChainCoefficients:
    """Chain mapping of the geometric-lattice bath with ratio ``lam``.

    The provider supplies recurrence data up to index n_sites; the default is
    the closed-form q-lattice provider above.  The impurity coupling c0 is the
    same as in the linear scheme since band-collapsing preserves total weight.
    """
    if n_sites < 1:
        raise ValueError(f"need at least one chain site, got {n_sites}")
    inputs = provider(params, lam, n_sites)
    if inputs.n_max < n_sites:
        raise ValueError(
            f"provider supplied recurrence data up to index {inputs.n_max}, "
            f"need {n_sites}"
        )
    a = inputs.recur_a
    c = inputs.recur_c
    norms = inputs.norms
    scale = inputs.scale
    omega = scale * (a[:n_sites] + c[:n_sites])
    n = np.arange(n_sites - 1)
    t = -scale * norms[n + 1] / norms[n] * a[n]
    return ChainCoefficients(
        c0=impurity_coupling(params), omega=omega, t=t, scheme=LOGARITHMIC, lam=lam
    )
