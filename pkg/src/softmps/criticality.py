"""Phase-boundary location, finite-size extrapolation, and exponent fits.

The delocalized-to-localized transition is detected from the magnetization
of converged ground states on a coupling grid: below the critical coupling
the magnetization vanishes, above it grows continuously.  All fits are
linear least squares in log space, with parameter uncertainties from the
standard covariance of the linearized problem.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Sequence

import numpy as np

from .model import (
    LINEAR,
    LOGARITHMIC,
    ChainCoefficients,
    SbmParams,
    linear_chain_coefficients,
    log_chain_coefficients,
)
from .observables import ObservableSet, RdmTailError, observable_set
from .optimize import (
    AllRestartsFailedError,
    GroundState,
    OptimizerOptions,
    ground_state,
)
from .state import (
    REAL,
    NormUnderflowError,
    ScaleOverflowError,
    SPIN_SIGMA_Z,
    matrix_element,
    norm_sq,
)

DEFAULT_M_THRESHOLD = 0.01
DEFAULT_ALPHA_TOLERANCE = 2e-4
DEFAULT_EXPONENT_WINDOW = (0.01, 0.3)


class BracketError(ValueError):
    """The provided coupling bracket does not straddle the transition."""


@dataclass(frozen=True, eq=False)
class SweepPoint:
    """Result at one coupling; exactly one of (ground, error) is populated."""

    alpha: float
    ground: GroundState | None
    observables: ObservableSet | None
    error: str | None


@dataclass(frozen=True, eq=False)
class SweepResult:
    points: tuple[SweepPoint, ...]
    provenance: dict

    def __post_init__(self) -> None:
        alphas = [p.alpha for p in self.points]
        if any(b <= a for a, b in zip(alphas, alphas[1:])):
            raise ValueError("sweep points must be strictly increasing in alpha")


@dataclass(frozen=True)
class FitResult:
    """Least-squares fit output: parameters, their standard errors, and the
    sum of squared residuals in the fitting (log) space."""

    parameters: dict
    stderr: dict
    residual: float
    n_points: int


@dataclass(frozen=True)
class DetectionResult:
    """Bisection estimate of the critical coupling with its probe history."""

    alpha_c: float
    bracket: tuple[float, float]
    probes: tuple[tuple[float, float], ...]

    @property
    def n_solves(self) -> int:
        return len(self.probes)


def polaron_alpha_c(s: float, delta: float, omega_c: float = 1.0) -> float:
    """Closed-form critical coupling of the adiabatic polaron treatment.

    alpha_c = sin(pi s) e^{-s/2} / (2 pi (1 - s)) * (delta / omega_c)^{1-s}.
    A benchmark line, not a numerical result of the solver.
    """
    if not 0.0 < s < 1.0:
        raise ValueError(f"s must lie in (0, 1), got {s}")
    if delta <= 0.0 or omega_c <= 0.0:
        raise ValueError("delta and omega_c must be > 0")
    return (
        math.sin(math.pi * s)
        * math.exp(-s / 2.0)
        / (2.0 * math.pi * (1.0 - s))
        * (delta / omega_c) ** (1.0 - s)
    )


def build_chain(
    params: SbmParams, n_sites: int, scheme: str = LINEAR, lam: float | None = None
) -> ChainCoefficients:
    """Dispatch to the requested discretization scheme."""
    if scheme == LINEAR:
        return linear_chain_coefficients(params, n_sites)
    if scheme == LOGARITHMIC:
        if lam is None:
            raise ValueError("the log scheme needs a lattice ratio lam")
        return log_chain_coefficients(params, n_sites, lam)
    raise ValueError(f"unknown scheme {scheme!r}")


_POINT_ERRORS = (
    AllRestartsFailedError,
    RdmTailError,
    ScaleOverflowError,
    NormUnderflowError,
)


def sweep_alpha(
    params: SbmParams,
    alphas: Sequence[float],
    *,
    n_sites: int,
    chi: int,
    options: OptimizerOptions = OptimizerOptions(),
    scheme: str = LINEAR,
    lam: float | None = None,
    field: str = REAL,
    tail_tolerance: float = 1e-8,
    warm: bool = True,
) -> SweepResult:
    """Solve the ground state on a strictly increasing coupling grid.

    With warm chaining each solve seeds restart 0 from the previous
    converged state (one extra restart on top of the configured count, so
    the cold-start budget stays what the caller asked for).  A failed point
    is recorded with its error and the sweep continues.
    """
    alphas = [float(a) for a in alphas]
    if any(b <= a for a, b in zip(alphas, alphas[1:])):
        raise ValueError("alpha grid must be strictly increasing")
    if any(a < 0 for a in alphas):
        raise ValueError("couplings must be >= 0")

    points = []
    previous = None
    for alpha in alphas:
        point_params = replace(params, alpha=alpha)
        chain = build_chain(point_params, n_sites, scheme, lam)
        opts = options
        if warm and previous is not None:
            opts = replace(options, warm_start=previous, restarts=options.restarts + 1)
        try:
            gs = ground_state(point_params, chain, chi, opts, field=field)
            obs = observable_set(
                gs.state, chain, params.delta, tail_tolerance=tail_tolerance
            )
        except _POINT_ERRORS as exc:
            points.append(
                SweepPoint(
                    alpha=alpha,
                    ground=None,
                    observables=None,
                    error=f"{type(exc).__name__}: {exc}",
                )
            )
            continue
        points.append(SweepPoint(alpha=alpha, ground=gs, observables=obs, error=None))
        previous = gs.state

    provenance = {
        "s": params.s,
        "delta": params.delta,
        "omega_c": params.omega_c,
        "n_sites": n_sites,
        "chi": chi,
        "scheme": scheme,
        "lam": lam,
        "field": field,
        "tail_tolerance": tail_tolerance,
        "warm": warm,
        "seed": options.seed,
        "restarts": options.restarts,
        "gradient_tolerance": options.gradient_tolerance,
        "step_tolerance": options.step_tolerance,
        "max_iterations": options.max_iterations,
        "init_scale": options.init_scale,
    }
    return SweepResult(points=tuple(points), provenance=provenance)


def bisect_threshold(
    fn: Callable[[float], float],
    lo: float,
    hi: float,
    threshold: float,
    tolerance: float,
) -> tuple[float, list[tuple[float, float]]]:
    """Bisect for the point where fn crosses above a threshold.

    fn must be below the threshold at lo and above it at hi; raises
    BracketError otherwise.  Returns the bracket midpoint once the bracket
    is narrower than the tolerance, along with all (point, value) probes.
    """
    if not lo < hi:
        raise ValueError(f"bracket must satisfy lo < hi, got ({lo}, {hi})")
    if tolerance <= 0:
        raise ValueError("tolerance must be > 0")
    probes = []
    f_lo = fn(lo)
    probes.append((lo, f_lo))
    if f_lo > threshold:
        raise BracketError(
            f"fn({lo}) = {f_lo:.4g} already exceeds the threshold {threshold}; "
            "lower the bracket start"
        )
    f_hi = fn(hi)
    probes.append((hi, f_hi))
    if f_hi <= threshold:
        raise BracketError(
            f"fn({hi}) = {f_hi:.4g} does not exceed the threshold {threshold}; "
            "raise the bracket end"
        )
    while hi - lo > tolerance:
        mid = 0.5 * (lo + hi)
        f_mid = fn(mid)
        probes.append((mid, f_mid))
        if f_mid > threshold:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi), probes


def detect_alpha_c(
    params: SbmParams,
    *,
    n_sites: int,
    chi: int,
    bracket: tuple[float, float],
    options: OptimizerOptions = OptimizerOptions(),
    scheme: str = LINEAR,
    lam: float | None = None,
    field: str = REAL,
    m_threshold: float = DEFAULT_M_THRESHOLD,
    alpha_tolerance: float = DEFAULT_ALPHA_TOLERANCE,
    magnetization_fn: Callable[[float], float] | None = None,
) -> DetectionResult:
    """Bisect the coupling at which the magnetization crosses a threshold.

    Each probe solves the ground state at one coupling, warm-started from
    the nearest already-solved coupling.  magnetization_fn substitutes the
    solver (for testing against synthetic magnetization curves).
    """
    lo, hi = float(bracket[0]), float(bracket[1])
    if lo < 0:
        raise ValueError("bracket must be non-negative")

    if magnetization_fn is None:
        solved: dict[float, object] = {}

        def magnetization_fn(alpha: float) -> float:
            point_params = replace(params, alpha=alpha)
            chain = build_chain(point_params, n_sites, scheme, lam)
            opts = options
            if solved:
                nearest = min(solved, key=lambda a: abs(a - alpha))
                opts = replace(
                    options, warm_start=solved[nearest], restarts=options.restarts + 1
                )
            gs = ground_state(point_params, chain, chi, opts, field=field)
            solved[alpha] = gs.state
            value = matrix_element(gs.state, SPIN_SIGMA_Z) / norm_sq(gs.state)
            return abs(float(np.real(value)))

    alpha_c, probes = bisect_threshold(
        magnetization_fn, lo, hi, m_threshold, alpha_tolerance
    )
    return DetectionResult(alpha_c=alpha_c, bracket=(lo, hi), probes=tuple(probes))


def _linear_fit(design: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    """Ordinary least squares with standard errors from the usual covariance."""
    coef, _, _, _ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    ssr = float(resid @ resid)
    dof = y.size - design.shape[1]
    cov = np.linalg.inv(design.T @ design) * (ssr / dof if dof > 0 else 0.0)
    return coef, np.sqrt(np.maximum(np.diag(cov), 0.0)), ssr


def extrapolate_alpha_c(points: Iterable[tuple[int, float]]) -> FitResult:
    """Fit alpha_c(N) = a exp(b / N) to per-length critical couplings.

    Linear least squares on ln alpha_c against 1/N.  Needs at least three
    points with distinct chain lengths and positive couplings; the infinite
    chain limit is the parameter a.
    """
    pts = [(int(n), float(a)) for n, a in points]
    if len(pts) < 3:
        raise ValueError(f"need at least 3 points to extrapolate, got {len(pts)}")
    lengths = [n for n, _ in pts]
    if len(set(lengths)) != len(lengths):
        raise ValueError("chain lengths must be distinct")
    if any(n < 1 for n in lengths):
        raise ValueError("chain lengths must be >= 1")
    if any(a <= 0 for _, a in pts):
        raise ValueError("critical couplings must be > 0")
    inv_n = np.array([1.0 / n for n, _ in pts])
    log_a = np.log([a for _, a in pts])
    design = np.column_stack([np.ones_like(inv_n), inv_n])
    coef, err, ssr = _linear_fit(design, log_a)
    a = math.exp(coef[0])
    return FitResult(
        parameters={"a": a, "b": float(coef[1])},
        stderr={"a": a * float(err[0]), "b": float(err[1])},
        residual=ssr,
        n_points=len(pts),
    )


def fit_critical_exponent(
    points,
    alpha_c: float,
    window: tuple[float, float] = DEFAULT_EXPONENT_WINDOW,
) -> FitResult:
    """Fit M = prefactor * ((alpha - alpha_c) / alpha_c)^exponent.

    points is either a SweepResult or explicit (alpha, M) pairs.  Only
    points whose reduced coupling falls inside the window and whose
    magnetization is positive enter the log-log fit; at least three must
    survive.
    """
    if alpha_c <= 0:
        raise ValueError(f"alpha_c must be > 0, got {alpha_c}")
    lo, hi = window
    if not 0 < lo < hi:
        raise ValueError(f"window must satisfy 0 < lo < hi, got {window}")
    if isinstance(points, SweepResult):
        pairs = [
            (p.alpha, p.observables.magnetization)
            for p in points.points
            if p.observables is not None
        ]
    else:
        pairs = [(float(a), float(m)) for a, m in points]
    kept = []
    for alpha, m in pairs:
        reduced = (alpha - alpha_c) / alpha_c
        if lo <= reduced <= hi and m > 0.0:
            kept.append((reduced, m))
    if len(kept) < 3:
        raise ValueError(
            f"only {len(kept)} usable points inside the window {window}; need 3"
        )
    log_r = np.log([r for r, _ in kept])
    log_m = np.log([m for _, m in kept])
    design = np.column_stack([np.ones_like(log_r), log_r])
    coef, err, ssr = _linear_fit(design, log_m)
    prefactor = math.exp(coef[0])
    return FitResult(
        parameters={"exponent": float(coef[1]), "prefactor": prefactor},
        stderr={"exponent": float(err[1]), "prefactor": prefactor * float(err[0])},
        residual=ssr,
        n_points=len(kept),
    )
