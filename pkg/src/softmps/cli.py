"""Command line entry points.

Every subcommand accepts --config FILE plus flags; flags override the file.
Solver commands write their outputs and a manifest into the output
directory (--outdir, config output.directory, or $SOFTMPS_OUTDIR, in that
order of precedence).  Exit codes: 0 success, 1 failed run (non-convergence,
overflow, unattainable tolerance), 2 unusable configuration.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .criticality import (
    BracketError,
    build_chain,
    detect_alpha_c,
    extrapolate_alpha_c,
    fit_critical_exponent,
    polaron_alpha_c,
    sweep_alpha,
)
from .observables import RdmTailError, observable_set
from .optimize import AllRestartsFailedError, OptimizerOptions, ground_state
from .oracle import BoundaryWeightError, run_equivalence_suite
from .runio import (
    ConfigError,
    RunManifest,
    build_ansatz,
    build_chain_settings,
    build_grid,
    build_options,
    build_params,
    format_chain_csv,
    format_profile_csv,
    format_sweep_csv,
    ground_state_to_document,
    load_ground_state,
    merge_overrides,
    parse_config_text,
    save_ground_state,
    validate_mapping,
)
from .state import NormUnderflowError, ScaleOverflowError, StateFormatError

_USAGE_ERRORS = (ConfigError, StateFormatError)
_RUN_ERRORS = (
    AllRestartsFailedError,
    BracketError,
    RdmTailError,
    ScaleOverflowError,
    NormUnderflowError,
    BoundaryWeightError,
)

_FLAG_TABLE = {
    "model": (("s", "s"), ("alpha", "alpha"), ("delta", "delta"), ("omega_c", "omega_c")),
    "chain": (("n_sites", "n_sites"), ("scheme", "scheme"), ("lam", "lam")),
    "ansatz": (("chi", "chi"), ("field", "field")),
    "optimizer": (
        ("restarts", "restarts"),
        ("seed", "seed"),
        ("max_iterations", "max_iterations"),
        ("gradient_tolerance", "gradient_tolerance"),
        ("step_tolerance", "step_tolerance"),
        ("init_scale", "init_scale"),
        ("jobs", "jobs"),
    ),
    "observables": (("tail_tolerance", "tail_tolerance"),),
    "grid": (
        ("alpha_start", "start"),
        ("alpha_stop", "stop"),
        ("alpha_count", "count"),
        ("alphas", "alphas"),
    ),
    "detect": (
        ("bracket_lo", "bracket_lo"),
        ("bracket_hi", "bracket_hi"),
        ("m_threshold", "m_threshold"),
        ("alpha_tolerance", "alpha_tolerance"),
    ),
    "exponent": (
        ("alpha_c", "alpha_c"),
        ("window_lo", "window_lo"),
        ("window_hi", "window_hi"),
    ),
    "output": (("outdir", "directory"),),
}


def _assemble_mapping(args) -> dict:
    config_path = getattr(args, "config", None)
    if config_path:
        path = Path(config_path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        file_map = parse_config_text(path.read_text())
    else:
        file_map = {}
    overrides: dict[str, dict] = {}
    for section, pairs in _FLAG_TABLE.items():
        collected = {}
        for attr, key in pairs:
            value = getattr(args, attr, None)
            if value is not None:
                collected[key] = value
        if collected:
            overrides[section] = collected
    merged = merge_overrides(file_map, overrides)
    validate_mapping(merged)
    return merged


def _resolve_outdir(mapping: dict) -> Path:
    directory = (
        mapping.get("output", {}).get("directory")
        or os.environ.get("SOFTMPS_OUTDIR")
        or "."
    )
    outdir = Path(directory)
    outdir.mkdir(parents=True, exist_ok=True)
    return outdir


def _resolve_seed(options: OptimizerOptions) -> OptimizerOptions:
    if options.seed is not None:
        return options
    return replace(options, seed=int(np.random.SeedSequence().entropy))


def _tail_tolerance(mapping: dict) -> float:
    return float(mapping.get("observables", {}).get("tail_tolerance", 1e-8))


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _observables_document(obs) -> dict:
    return {
        "magnetization": float(obs.magnetization),
        "coherence": float(obs.coherence),
        "spin_entropy": float(obs.spin_entropy),
        "occupations": [float(v) for v in obs.occupations],
        "site_entropies": [float(v) for v in obs.site_entropies],
        "energy": dataclasses.asdict(obs.energy),
    }


# ---------------------------------------------------------------------------
# subcommands


def cmd_chain(args) -> int:
    mapping = _assemble_mapping(args)
    params = build_params(mapping)
    n_sites, scheme, lam = build_chain_settings(mapping)
    chain = build_chain(params, n_sites, scheme, lam)
    text = format_chain_csv(chain)
    if args.out:
        outdir = _resolve_outdir(mapping)
        manifest = RunManifest(outdir, "chain", mapping)
        target = outdir / args.out
        target.write_text(text)
        manifest.finish("completed", outputs=[args.out])
        print(f"wrote {target}")
    else:
        sys.stdout.write(text)
    return 0


def cmd_polaron(args) -> int:
    mapping = _assemble_mapping(args)
    params = build_params(mapping, default_alpha=0.0)
    value = polaron_alpha_c(params.s, params.delta, params.omega_c)
    print(f"{value:.4f}")
    return 0


def cmd_ground(args) -> int:
    mapping = _assemble_mapping(args)
    params = build_params(mapping)
    n_sites, scheme, lam = build_chain_settings(mapping)
    chi, field = build_ansatz(mapping)
    warm = load_ground_state(args.warm_start).state if args.warm_start else None
    options = _resolve_seed(build_options(mapping, warm_start=warm))
    outdir = _resolve_outdir(mapping)
    manifest = RunManifest(outdir, "ground", mapping)
    manifest.record_seed(options.seed)
    try:
        chain = build_chain(params, n_sites, scheme, lam)
        gs = ground_state(params, chain, chi, options, field=field)
        doc = ground_state_to_document(gs)
        if args.observables:
            obs = observable_set(
                gs.state, chain, params.delta, tail_tolerance=_tail_tolerance(mapping)
            )
            doc["observables"] = _observables_document(obs)
        _write_json(outdir / "ground.json", doc)
        outputs = ["ground.json"]
        if args.save_state:
            save_ground_state(args.save_state, gs)
    except _RUN_ERRORS as exc:
        manifest.finish("failed", error=f"{type(exc).__name__}: {exc}")
        raise
    e = gs.energy
    print(f"energy = {e.total!r}")
    print(f"  e_loc = {e.e_loc!r}  e_int = {e.e_int!r}  e_chain = {e.e_chain!r}")
    if args.observables:
        print(
            f"  M = {doc['observables']['magnetization']!r}"
            f"  sx = {doc['observables']['coherence']!r}"
        )
    print(f"converged = {gs.converged}  iterations = {gs.iterations}  seed = {gs.seed}")
    if gs.converged:
        manifest.finish("completed", outputs=outputs)
        return 0
    manifest.finish("failed", error="optimizer did not converge", outputs=outputs)
    return 1


def cmd_sweep(args) -> int:
    if isinstance(getattr(args, "alphas", None), str):
        args.alphas = [float(part) for part in args.alphas.split(",") if part.strip()]
    mapping = _assemble_mapping(args)
    params = build_params(mapping, default_alpha=0.0)
    n_sites, scheme, lam = build_chain_settings(mapping)
    chi, field = build_ansatz(mapping)
    options = _resolve_seed(build_options(mapping))
    grid = build_grid(mapping)
    outdir = _resolve_outdir(mapping)
    manifest = RunManifest(outdir, "sweep", mapping)
    manifest.record_seed(options.seed)
    try:
        sweep = sweep_alpha(
            params,
            grid,
            n_sites=n_sites,
            chi=chi,
            options=options,
            scheme=scheme,
            lam=lam,
            field=field,
            tail_tolerance=_tail_tolerance(mapping),
            warm=not args.cold,
        )
        (outdir / "sweep.csv").write_text(format_sweep_csv(sweep))
        (outdir / "occupations.csv").write_text(
            format_profile_csv(sweep, "occupations")
        )
        (outdir / "site_entropy.csv").write_text(
            format_profile_csv(sweep, "site_entropies")
        )
    except _RUN_ERRORS as exc:
        manifest.finish("failed", error=f"{type(exc).__name__}: {exc}")
        raise
    succeeded = 0
    for point in sweep.points:
        if point.error is None:
            print(
                f"alpha={point.alpha:.6g}  M={point.observables.magnetization:.6g}  "
                f"E={point.observables.energy.total:.10g}  "
                f"converged={point.ground.converged}"
            )
            succeeded += 1
        else:
            print(f"alpha={point.alpha:.6g}  FAILED  {point.error}")
    outputs = ["sweep.csv", "occupations.csv", "site_entropy.csv"]
    if succeeded:
        manifest.finish("completed", outputs=outputs)
        return 0
    manifest.finish("failed", error="every grid point failed", outputs=outputs)
    return 1


def cmd_critical(args) -> int:
    mapping = _assemble_mapping(args)
    params = build_params(mapping, default_alpha=0.0)
    n_sites, scheme, lam = build_chain_settings(mapping)
    chi, field = build_ansatz(mapping)
    options = _resolve_seed(build_options(mapping))
    detect = mapping.get("detect", {})
    if "bracket_lo" not in detect or "bracket_hi" not in detect:
        raise ConfigError(
            "critical needs a bracket: set detect.bracket_lo and detect.bracket_hi"
        )
    bracket = (float(detect["bracket_lo"]), float(detect["bracket_hi"]))
    m_threshold = float(detect.get("m_threshold", 0.01))
    alpha_tolerance = float(detect.get("alpha_tolerance", 2e-4))
    outdir = _resolve_outdir(mapping)
    manifest = RunManifest(outdir, "critical", mapping)
    manifest.record_seed(options.seed)
    try:
        result = detect_alpha_c(
            params,
            n_sites=n_sites,
            chi=chi,
            bracket=bracket,
            options=options,
            scheme=scheme,
            lam=lam,
            field=field,
            m_threshold=m_threshold,
            alpha_tolerance=alpha_tolerance,
        )
        payload = {
            "alpha_c": result.alpha_c,
            "bracket": list(result.bracket),
            "m_threshold": m_threshold,
            "alpha_tolerance": alpha_tolerance,
            "n_solves": result.n_solves,
            "probes": [[a, m] for a, m in result.probes],
        }
        _write_json(outdir / "critical.json", payload)
    except _RUN_ERRORS as exc:
        manifest.finish("failed", error=f"{type(exc).__name__}: {exc}")
        raise
    print(f"alpha_c = {result.alpha_c!r}  ({result.n_solves} solves)")
    manifest.finish("completed", outputs=["critical.json"])
    return 0


def _read_extrapolate_points(args) -> list[tuple[int, float]]:
    if args.points:
        pts = []
        for chunk in args.points.split(","):
            chunk = chunk.strip()
            if not chunk:
                continue
            if ":" not in chunk:
                raise ConfigError(
                    f"bad --points entry {chunk!r}, expected N:alpha_c"
                )
            n_text, _, a_text = chunk.partition(":")
            try:
                pts.append((int(n_text), float(a_text)))
            except ValueError as exc:
                raise ConfigError(f"bad --points entry {chunk!r}: {exc}") from exc
        return pts
    if args.input:
        path = Path(args.input)
        if not path.exists():
            raise ConfigError(f"input file not found: {path}")
        lines = [ln for ln in path.read_text().splitlines() if ln.strip()]
        if not lines or lines[0].strip() != "n_sites,alpha_c":
            raise ConfigError("extrapolate input must have header 'n_sites,alpha_c'")
        pts = []
        for ln in lines[1:]:
            n_text, _, a_text = ln.partition(",")
            try:
                pts.append((int(n_text), float(a_text)))
            except ValueError as exc:
                raise ConfigError(f"bad input row {ln!r}: {exc}") from exc
        return pts
    raise ConfigError("extrapolate needs --points or --input")


def cmd_extrapolate(args) -> int:
    mapping = _assemble_mapping(args)
    points = _read_extrapolate_points(args)
    try:
        fit = extrapolate_alpha_c(points)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    outdir = _resolve_outdir(mapping)
    manifest = RunManifest(outdir, "extrapolate", mapping)
    payload = {
        "points": [[n, a] for n, a in points],
        "parameters": fit.parameters,
        "stderr": fit.stderr,
        "residual": fit.residual,
        "n_points": fit.n_points,
    }
    _write_json(outdir / "extrapolate.json", payload)
    manifest.finish("completed", outputs=["extrapolate.json"])
    a, b = fit.parameters["a"], fit.parameters["b"]
    print(f"alpha_c(inf) = {a!r} +- {fit.stderr['a']:.3g}")
    print(f"b = {b!r} +- {fit.stderr['b']:.3g}")
    return 0


def _read_sweep_pairs(path: Path) -> list[tuple[float, float]]:
    lines = [ln for ln in path.read_text().splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("alpha,M"):
        raise ConfigError(f"{path} does not look like a sweep CSV")
    pairs = []
    for ln in lines[1:]:
        cells = ln.split(",")
        if len(cells) < 2 or not cells[1]:
            continue
        pairs.append((float(cells[0]), float(cells[1])))
    return pairs


def cmd_exponent(args) -> int:
    mapping = _assemble_mapping(args)
    section = mapping.get("exponent", {})
    if "alpha_c" not in section:
        raise ConfigError("exponent needs exponent.alpha_c (--alpha-c)")
    alpha_c = float(section["alpha_c"])
    window = (
        float(section.get("window_lo", 0.01)),
        float(section.get("window_hi", 0.3)),
    )
    if not args.input:
        raise ConfigError("exponent needs --input pointing at a sweep CSV")
    path = Path(args.input)
    if not path.exists():
        raise ConfigError(f"input file not found: {path}")
    pairs = _read_sweep_pairs(path)
    try:
        fit = fit_critical_exponent(pairs, alpha_c, window)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    outdir = _resolve_outdir(mapping)
    manifest = RunManifest(outdir, "exponent", mapping)
    payload = {
        "alpha_c": alpha_c,
        "window": list(window),
        "parameters": fit.parameters,
        "stderr": fit.stderr,
        "residual": fit.residual,
        "n_points": fit.n_points,
    }
    _write_json(outdir / "exponent.json", payload)
    manifest.finish("completed", outputs=["exponent.json"])
    print(
        f"exponent = {fit.parameters['exponent']!r} +- {fit.stderr['exponent']:.3g}"
        f"  (from {fit.n_points} points)"
    )
    return 0


def cmd_oracle_check(args) -> int:
    rows = run_equivalence_suite(args.instances, seed=args.seed)
    width = max(len(r["quantity"]) for r in rows)
    all_ok = True
    for row in rows:
        flag = "ok " if row["passed"] else "FAIL"
        print(
            f"{row['quantity']:<{width}}  {flag}  max rel err {row['max_rel_err']:.3e}"
            f"  (tolerance {row['tolerance']:.0e})"
        )
        all_ok = all_ok and row["passed"]
    return 0 if all_ok else 1


# ---------------------------------------------------------------------------
# parser


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="config file (flags override it)")
    parser.add_argument("--outdir", help="output directory (or $SOFTMPS_OUTDIR)")


def _add_model(parser: argparse.ArgumentParser, *, alpha: bool = True) -> None:
    parser.add_argument("--s", type=float, help="bath exponent in (0, 1)")
    if alpha:
        parser.add_argument("--alpha", type=float, help="coupling strength")
    parser.add_argument("--delta", type=float, help="tunneling amplitude")
    parser.add_argument("--omega-c", dest="omega_c", type=float, help="bath cutoff")


def _add_chain(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--n-sites", dest="n_sites", type=int, help="chain length")
    parser.add_argument("--scheme", choices=["linear", "log"], help="discretization")
    parser.add_argument("--lam", type=float, help="lattice ratio for the log scheme")


def _add_ansatz(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--chi", type=int, help="bond dimension")
    parser.add_argument("--field", choices=["real", "complex"], help="matrix entries")


def _add_optimizer(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--restarts", type=int, help="independent descents (default 4)")
    parser.add_argument("--seed", type=int, help="seed (default: fresh entropy)")
    parser.add_argument("--max-iterations", dest="max_iterations", type=int)
    parser.add_argument("--gradient-tolerance", dest="gradient_tolerance", type=float)
    parser.add_argument("--step-tolerance", dest="step_tolerance", type=float)
    parser.add_argument("--init-scale", dest="init_scale", type=float)
    parser.add_argument("--jobs", type=int, help="parallel restart processes")
    parser.add_argument(
        "--tail-tolerance",
        dest="tail_tolerance",
        type=float,
        help="reduced-density trace tolerance for observables",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="softmps",
        description="Sub-ohmic spin-boson ground states without Fock truncation.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("chain", help="print or write the chain coefficients")
    _add_common(p)
    _add_model(p)
    _add_chain(p)
    p.add_argument("--out", help="CSV filename inside the output directory")
    p.set_defaults(handler=cmd_chain)

    p = sub.add_parser("polaron", help="closed-form benchmark critical coupling")
    _add_common(p)
    _add_model(p, alpha=False)
    p.set_defaults(handler=cmd_polaron)

    p = sub.add_parser("ground", help="solve one ground state")
    _add_common(p)
    _add_model(p)
    _add_chain(p)
    _add_ansatz(p)
    _add_optimizer(p)
    p.add_argument("--warm-start", dest="warm_start", help="state JSON to start from")
    p.add_argument("--save-state", dest="save_state", help="write the state JSON here")
    p.add_argument(
        "--observables", action="store_true", help="include observables in the output"
    )
    p.set_defaults(handler=cmd_ground)

    p = sub.add_parser("sweep", help="ground states across a coupling grid")
    _add_common(p)
    _add_model(p)
    _add_chain(p)
    _add_ansatz(p)
    _add_optimizer(p)
    p.add_argument("--alpha-start", dest="alpha_start", type=float)
    p.add_argument("--alpha-stop", dest="alpha_stop", type=float)
    p.add_argument("--alpha-count", dest="alpha_count", type=int)
    p.add_argument("--alphas", help="explicit comma-separated grid")
    p.add_argument(
        "--cold", action="store_true", help="disable warm-starting from the previous point"
    )
    p.set_defaults(handler=cmd_sweep)

    p = sub.add_parser("critical", help="bisect the critical coupling")
    _add_common(p)
    _add_model(p)
    _add_chain(p)
    _add_ansatz(p)
    _add_optimizer(p)
    p.add_argument("--bracket-lo", dest="bracket_lo", type=float)
    p.add_argument("--bracket-hi", dest="bracket_hi", type=float)
    p.add_argument("--m-threshold", dest="m_threshold", type=float)
    p.add_argument("--alpha-tolerance", dest="alpha_tolerance", type=float)
    p.set_defaults(handler=cmd_critical)

    p = sub.add_parser("extrapolate", help="infinite-chain limit of alpha_c(N)")
    _add_common(p)
    p.add_argument("--points", help="inline points like '6:0.028,8:0.027,10:0.026'")
    p.add_argument("--input", help="CSV with header n_sites,alpha_c")
    p.set_defaults(handler=cmd_extrapolate)

    p = sub.add_parser("exponent", help="fit the magnetization growth exponent")
    _add_common(p)
    p.add_argument("--input", help="sweep CSV to read (alpha, M columns)")
    p.add_argument("--alpha-c", dest="alpha_c", type=float)
    p.add_argument("--window-lo", dest="window_lo", type=float)
    p.add_argument("--window-hi", dest="window_hi", type=float)
    p.set_defaults(handler=cmd_exponent)

    p = sub.add_parser("oracle-check", help="dense-enumeration equivalence suite")
    p.add_argument("--instances", type=int, default=200)
    p.add_argument("--seed", type=int, default=20260819)
    p.set_defaults(handler=cmd_oracle_check)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except _USAGE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except _RUN_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
