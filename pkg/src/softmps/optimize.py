"""Quasi-Newton minimization of the variational energy with random restarts.

The minimizer is a plain BFGS with Armijo backtracking, written out here
rather than delegated so that its behaviour under non-finite objective
values, its deterministic restart seeding, and its reparametrization hook
are all explicit contracts.  The energy landscape is smooth but has
symmetry-related minima (both magnetization signs above the transition), so
ground-state searches run several independently seeded descents and keep
the best.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .energy import EnergyBreakdown, energy, energy_and_gradient, pack, unpack
from .model import ChainCoefficients, SbmParams
from .state import COMPLEX, REAL, MpsState, norm_sq

_ARMIJO = 1e-4
_MAX_BACKTRACKS = 60
_CURVATURE_FLOOR = 1e-10
_TIE_BREAK = 1e-12


@dataclass(frozen=True)
class OptimizerOptions:
    """Knobs for :func:`minimize` and :func:`ground_state`.

    Tolerances: the gradient test uses the max-norm, the step test is
    relative to the current point.  restarts counts independent descents;
    a warm_start state replaces the random initial point of the first one.
    jobs > 1 runs restarts in separate processes.
    """

    max_iterations: int = 50_000
    gradient_tolerance: float = 1e-8
    step_tolerance: float = 1e-10
    restarts: int = 1
    init_scale: float = 0.1
    seed: int | None = None
    warm_start: MpsState | None = None
    jobs: int = 1

    def __post_init__(self) -> None:
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.gradient_tolerance <= 0 or self.step_tolerance <= 0:
            raise ValueError("tolerances must be > 0")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.init_scale <= 0:
            raise ValueError("init_scale must be > 0")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")


@dataclass(frozen=True)
class MinimizeResult:
    x: np.ndarray
    fun: float
    gradient_norm: float
    iterations: int
    converged: bool
    status: str


class AllRestartsFailedError(RuntimeError):
    """Every restart failed to produce a finite energy."""

    def __init__(self, diagnostics):
        lines = "; ".join(
            f"restart {i}: {d['status']} (fun={d['fun']})" for i, d in enumerate(diagnostics)
        )
        super().__init__(f"no restart produced a finite energy: {lines}")
        self.diagnostics = list(diagnostics)


@np.errstate(over="ignore", invalid="ignore")
def minimize(
    fun_and_grad,
    x0,
    options: OptimizerOptions = OptimizerOptions(),
    *,
    value_only=None,
    rescale=None,
) -> MinimizeResult:
    """BFGS descent of a smooth objective.

    fun_and_grad(x) returns (value, gradient); value_only, if given, is a
    cheaper value-only evaluation used during line searches.  Non-finite
    trial values are treated as rejections and backtracked past; if even
    tiny steps stay non-finite the search stops at the last good point with
    status 'line_search'.  Statuses: 'gradient', 'step', 'max_iterations',
    'line_search', 'initial_point'.

    rescale, if given, maps an accepted iterate x to (x_equiv, scale) where
    the objective takes the same value at x_equiv and its gradient there
    equals the gradient at x divided elementwise by scale.  It is invoked
    only right after fun_and_grad was evaluated at x, so implementations
    may reuse by-products of that evaluation.  The inverse Hessian is
    rescaled along, keeping the descent exactly equivalent.
    """
    x = np.array(x0, dtype=float)
    f, g = fun_and_grad(x)
    if not math.isfinite(f):
        return MinimizeResult(
            x=x, fun=float(f), gradient_norm=math.inf, iterations=0,
            converged=False, status="initial_point",
        )
    fe = value_only if value_only is not None else None

    h_inv = None
    iterations = 0
    status = "max_iterations"
    converged = False
    for _ in range(options.max_iterations):
        grad_norm = float(np.max(np.abs(g))) if g.size else 0.0
        if grad_norm <= options.gradient_tolerance:
            status, converged = "gradient", True
            break

        direction = -g if h_inv is None else -(h_inv @ g)
        slope = float(direction @ g)
        if slope >= 0.0:
            h_inv = None
            direction = -g
            slope = -float(g @ g)

        step = 1.0
        accepted = False
        trial_x = x
        trial_f = f
        trial_g = None
        for _ in range(_MAX_BACKTRACKS):
            trial_x = x + step * direction
            if fe is not None:
                trial_f = fe(trial_x)
            else:
                trial_f, trial_g = fun_and_grad(trial_x)
            if math.isfinite(trial_f) and trial_f <= f + _ARMIJO * step * slope:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            if h_inv is not None:
                h_inv = None  # retry the iteration as steepest descent
                continue
            status = "line_search"
            break
        if trial_g is None:
            trial_f, trial_g = fun_and_grad(trial_x)

        s = trial_x - x
        y = trial_g - g
        x, f, g = trial_x, trial_f, trial_g
        iterations += 1

        s_norm = float(np.linalg.norm(s))
        if s_norm <= options.step_tolerance * (1.0 + float(np.linalg.norm(x))):
            status, converged = "step", True
            break

        sy = float(s @ y)
        if sy > _CURVATURE_FLOOR * s_norm * float(np.linalg.norm(y)):
            if h_inv is None:
                h_inv = np.eye(x.size) * (sy / float(y @ y))
            hy = h_inv @ y
            rho = 1.0 / sy
            h_inv = (
                h_inv
                - rho * (np.outer(s, hy) + np.outer(hy, s))
                + (rho * rho * float(y @ hy) + rho) * np.outer(s, s)
            )

        if rescale is not None:
            x, scale = rescale(x)
            g = g / scale
            if h_inv is not None:
                h_inv = h_inv * np.outer(scale, scale)

    grad_norm = float(np.max(np.abs(g))) if g.size else 0.0
    return MinimizeResult(
        x=x, fun=float(f), gradient_norm=grad_norm, iterations=iterations,
        converged=converged, status=status,
    )


@dataclass(frozen=True, eq=False)
class GroundState:
    """Best state found over all restarts, with its energy and provenance.

    The stored state is normalized (unit squared norm); energy is recomputed
    from it after normalization.  seed is the actual entropy used, recorded
    even when the caller left it to chance.
    """

    state: MpsState
    energy: EnergyBreakdown
    converged: bool
    iterations: int
    restarts_used: int
    seed: int


def _spin_parameter_mask(chi: int, n_sites: int, field: str) -> np.ndarray:
    count = (2 + n_sites) * chi * chi
    mask = np.zeros(count, dtype=bool)
    mask[: 2 * chi * chi] = True
    if field == COMPLEX:
        mask = np.concatenate([mask, mask])
    return mask


def _solve_one(x0, chain: ChainCoefficients, delta: float, chi: int, field: str,
               options: OptimizerOptions) -> dict:
    n = chain.n_sites
    last_norm = [1.0]

    def evaluate(x, with_grad: bool):
        if not np.all(np.isfinite(x)):
            return math.inf, None
        try:
            state = unpack(x, chi, n, field)
            if with_grad:
                breakdown, grad = energy_and_gradient(state, chain, delta)
            else:
                breakdown, grad = energy(state, chain, delta), None
        except FloatingPointError:
            return math.inf, None
        last_norm[0] = breakdown.norm
        return breakdown.total, grad

    def fun_and_grad(x):
        f, grad = evaluate(x, True)
        if grad is None:
            grad = np.zeros_like(np.asarray(x, dtype=float))
        return f, grad

    def value_only(x):
        return evaluate(x, False)[0]

    spin_mask = _spin_parameter_mask(chi, n, field)

    def rescale(x):
        # exact reparametrization: the energy is invariant under a common
        # rescaling of both spin matrices, so pull the squared norm back to 1
        lam = last_norm[0] ** -0.5
        scale = np.where(spin_mask, lam, 1.0)
        return x * scale, scale

    result = minimize(fun_and_grad, x0, options, value_only=value_only, rescale=rescale)
    return {
        "x": result.x,
        "fun": result.fun,
        "converged": result.converged,
        "iterations": result.iterations,
        "status": result.status,
    }


def _solve_one_packed(args):
    return _solve_one(*args)


def ground_state(
    params: SbmParams,
    chain: ChainCoefficients,
    chi: int,
    options: OptimizerOptions = OptimizerOptions(),
    *,
    field: str = REAL,
) -> GroundState:
    """Minimize the energy over states of bond dimension chi.

    Runs options.restarts independent descents from seeded random points
    (spawned from one seed sequence, so runs are reproducible and
    per-restart streams independent).  A warm_start replaces the random
    initial point of restart 0.  The lowest final energy wins; ties within
    1e-12 go to the lowest restart index.
    """
    if chi < 1:
        raise ValueError(f"bond dimension chi must be >= 1, got {chi}")
    if field not in (REAL, COMPLEX):
        raise ValueError(f"field must be {REAL!r} or {COMPLEX!r}")
    n = chain.n_sites
    count = (2 + n) * chi * chi * (2 if field == COMPLEX else 1)

    seed = options.seed
    if seed is None:
        seed = int(np.random.SeedSequence().entropy)
    children = np.random.SeedSequence(seed).spawn(options.restarts)

    starts = []
    for r in range(options.restarts):
        if r == 0 and options.warm_start is not None:
            ws = options.warm_start
            if ws.chi != chi or ws.n_sites != n or ws.field != field:
                raise ValueError(
                    f"warm start has (chi={ws.chi}, n_sites={ws.n_sites}, "
                    f"field={ws.field}), need ({chi}, {n}, {field})"
                )
            starts.append(pack(ws))
        else:
            rng = np.random.default_rng(children[r])
            starts.append(rng.normal(0.0, options.init_scale, count))

    jobs = [(x0, chain, params.delta, chi, field, options) for x0 in starts]
    if options.jobs > 1 and options.restarts > 1:
        with ProcessPoolExecutor(max_workers=min(options.jobs, options.restarts)) as pool:
            results = list(pool.map(_solve_one_packed, jobs))
    else:
        results = [_solve_one_packed(job) for job in jobs]

    finite = [r for r in results if math.isfinite(r["fun"])]
    if not finite:
        raise AllRestartsFailedError(
            [{"status": r["status"], "fun": r["fun"]} for r in results]
        )
    best_fun = min(r["fun"] for r in finite)
    winner = next(r for r in results if math.isfinite(r["fun"]) and r["fun"] <= best_fun + _TIE_BREAK)

    raw = unpack(winner["x"], chi, n, field)
    w = norm_sq(raw)
    normalized = MpsState(spin=raw.spin / math.sqrt(w), modes=raw.modes, field=field)
    breakdown = energy(normalized, chain, params.delta)
    return GroundState(
        state=normalized,
        energy=breakdown,
        converged=bool(winner["converged"]),
        iterations=int(winner["iterations"]),
        restarts_used=options.restarts,
        seed=seed,
    )
