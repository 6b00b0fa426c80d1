"""Run configuration, manifests, and file formats for the command line.

Configs are TOML-like key/value documents with [section] headers, read
strictly: unknown sections or keys are errors, so typos fail loudly instead
of silently running defaults.  Every run directory gets a manifest that is
written before any numbers and rewritten with the final status, making each
output file reproducible from its manifest alone.
"""

from __future__ import annotations

import dataclasses
import json
import re
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .energy import EnergyBreakdown
from .model import LINEAR, LOGARITHMIC, SbmParams
from .optimize import GroundState, OptimizerOptions
from .state import MpsState, STATE_FORMAT_VERSION, StateFormatError

RESULT_FORMAT_VERSION = 1

SWEEP_HEADER = (
    "alpha,M,sx,spin_entropy,e_total,e_loc,e_int,e_chain,converged,iterations,error"
)
CHAIN_HEADER = "site,omega,t"


class ConfigError(ValueError):
    """A config document or flag combination is unusable."""


_SECTION_RE = re.compile(r"^\[([A-Za-z_][A-Za-z0-9_]*)\]$")
_KEY_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
_BARE_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_\-.]*$")


def _parse_scalar(token: str, where: str):
    token = token.strip()
    if not token:
        raise ConfigError(f"{where}: empty value")
    if token.startswith('"') and token.endswith('"') and len(token) >= 2:
        return token[1:-1]
    if token == "true":
        return True
    if token == "false":
        return False
    try:
        return int(token)
    except ValueError:
        pass
    try:
        return float(token)
    except ValueError:
        pass
    if _BARE_RE.match(token):
        return token
    raise ConfigError(f"{where}: cannot parse value {token!r}")


def parse_config_text(text: str) -> dict:
    """Parse the config format into {section: {key: value}}.

    Values are ints, floats, booleans, strings (quoted or bare words), or
    [comma, separated] lists of those.  '#' starts a comment; duplicate
    sections and keys are rejected.
    """
    data: dict[str, dict] = {}
    section: dict | None = None
    section_name = ""
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        where = f"line {number}"
        header = _SECTION_RE.match(line)
        if header:
            name = header.group(1)
            if name in data:
                raise ConfigError(f"{where}: duplicate section [{name}]")
            section = {}
            section_name = name
            data[name] = section
            continue
        if "=" not in line:
            raise ConfigError(f"{where}: expected 'key = value' or '[section]'")
        if section is None:
            raise ConfigError(f"{where}: key outside any [section]")
        key, _, value = line.partition("=")
        key = key.strip()
        if not _KEY_RE.match(key):
            raise ConfigError(f"{where}: bad key {key!r}")
        if key in section:
            raise ConfigError(f"{where}: duplicate key {key!r} in [{section_name}]")
        value = value.strip()
        if value.startswith("[") and value.endswith("]"):
            inner = value[1:-1].strip()
            items = [] if not inner else [
                _parse_scalar(part, where) for part in inner.split(",")
            ]
            section[key] = items
        else:
            section[key] = _parse_scalar(value, where)
    return data


_KNOWN_KEYS = {
    "model": {"s", "alpha", "delta", "omega_c"},
    "chain": {"n_sites", "scheme", "lam"},
    "ansatz": {"chi", "field"},
    "optimizer": {
        "max_iterations",
        "gradient_tolerance",
        "step_tolerance",
        "restarts",
        "init_scale",
        "seed",
        "jobs",
    },
    "grid": {"start", "stop", "count", "alphas"},
    "detect": {"bracket_lo", "bracket_hi", "m_threshold", "alpha_tolerance"},
    "exponent": {"alpha_c", "window_lo", "window_hi"},
    "observables": {"tail_tolerance"},
    "output": {"directory"},
}


def validate_mapping(mapping: dict) -> None:
    for section, keys in mapping.items():
        if section not in _KNOWN_KEYS:
            raise ConfigError(f"unknown config section [{section}]")
        if not isinstance(keys, dict):
            raise ConfigError(f"section [{section}] must hold key = value pairs")
        for key in keys:
            if key not in _KNOWN_KEYS[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")


def merge_overrides(mapping: dict, overrides: dict) -> dict:
    """Overlay {section: {key: value}} overrides (flags win over the file)."""
    merged = {section: dict(keys) for section, keys in mapping.items()}
    for section, keys in overrides.items():
        target = merged.setdefault(section, {})
        for key, value in keys.items():
            if value is not None:
                target[key] = value
    return merged


def _need(mapping: dict, section: str, key: str):
    try:
        return mapping[section][key]
    except KeyError:
        raise ConfigError(f"missing required setting {section}.{key}") from None


def _get(mapping: dict, section: str, key: str, default):
    return mapping.get(section, {}).get(key, default)


def build_params(mapping: dict, *, default_alpha: float | None = None) -> SbmParams:
    alpha = _get(mapping, "model", "alpha", default_alpha)
    if alpha is None:
        raise ConfigError("missing required setting model.alpha")
    try:
        return SbmParams(
            s=float(_need(mapping, "model", "s")),
            alpha=float(alpha),
            delta=float(_need(mapping, "model", "delta")),
            omega_c=float(_get(mapping, "model", "omega_c", 1.0)),
        )
    except ValueError as exc:
        raise ConfigError(f"bad model parameters: {exc}") from exc


def build_chain_settings(mapping: dict) -> tuple[int, str, float | None]:
    n_sites = _need(mapping, "chain", "n_sites")
    if not isinstance(n_sites, int) or n_sites < 1:
        raise ConfigError(f"chain.n_sites must be a positive integer, got {n_sites!r}")
    scheme = _get(mapping, "chain", "scheme", LINEAR)
    if scheme not in (LINEAR, LOGARITHMIC):
        raise ConfigError(f"chain.scheme must be 'linear' or 'log', got {scheme!r}")
    lam = _get(mapping, "chain", "lam", None)
    if scheme == LOGARITHMIC and lam is None:
        raise ConfigError("chain.scheme = log needs chain.lam > 1")
    return n_sites, scheme, None if lam is None else float(lam)


def build_ansatz(mapping: dict) -> tuple[int, str]:
    chi = _get(mapping, "ansatz", "chi", None)
    if chi is None:
        raise ConfigError("missing required setting ansatz.chi")
    if not isinstance(chi, int) or chi < 1:
        raise ConfigError(f"ansatz.chi must be a positive integer, got {chi!r}")
    field = _get(mapping, "ansatz", "field", "real")
    if field not in ("real", "complex"):
        raise ConfigError(f"ansatz.field must be 'real' or 'complex', got {field!r}")
    return chi, field


def build_options(mapping: dict, warm_start: MpsState | None = None) -> OptimizerOptions:
    section = mapping.get("optimizer", {})
    try:
        return OptimizerOptions(
            max_iterations=int(section.get("max_iterations", 50_000)),
            gradient_tolerance=float(section.get("gradient_tolerance", 1e-8)),
            step_tolerance=float(section.get("step_tolerance", 1e-10)),
            restarts=int(section.get("restarts", 4)),
            init_scale=float(section.get("init_scale", 0.1)),
            seed=None if section.get("seed") is None else int(section["seed"]),
            warm_start=warm_start,
            jobs=int(section.get("jobs", 1)),
        )
    except ValueError as exc:
        raise ConfigError(f"bad optimizer settings: {exc}") from exc


def build_grid(mapping: dict) -> np.ndarray:
    section = mapping.get("grid", {})
    if "alphas" in section:
        if any(k in section for k in ("start", "stop", "count")):
            raise ConfigError("grid.alphas excludes grid.start/stop/count")
        values = [float(a) for a in section["alphas"]]
    else:
        missing = [k for k in ("start", "stop", "count") if k not in section]
        if missing:
            raise ConfigError(
                "grid needs either grid.alphas or grid.start/stop/count "
                f"(missing {', '.join(missing)})"
            )
        count = section["count"]
        if not isinstance(count, int) or count < 2:
            raise ConfigError(f"grid.count must be an integer >= 2, got {count!r}")
        values = np.linspace(float(section["start"]), float(section["stop"]), count).tolist()
    if len(values) < 1:
        raise ConfigError("grid is empty")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ConfigError("grid must be strictly increasing")
    return np.asarray(values)


# ---------------------------------------------------------------------------
# manifests


class RunManifest:
    """Written before a run produces numbers, rewritten when it finishes."""

    def __init__(self, outdir: Path, command: str, config: dict):
        self.path = Path(outdir) / f"{command}_manifest.json"
        self.body = {
            "command": command,
            "package_version": __version__,
            "result_format_version": RESULT_FORMAT_VERSION,
            "state_format_version": STATE_FORMAT_VERSION,
            "created": datetime.now(timezone.utc).isoformat(),
            "status": "running",
            "error": None,
            "config": config,
            "outputs": [],
        }
        self.write()

    def write(self) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_text(json.dumps(self.body, indent=2, sort_keys=True) + "\n")

    def finish(self, status: str, *, error: str | None = None, outputs=()) -> None:
        self.body["status"] = status
        self.body["error"] = error
        self.body["outputs"] = sorted(set(self.body["outputs"]) | set(outputs))
        self.write()

    def record_seed(self, seed: int) -> None:
        self.body.setdefault("config", {}).setdefault("optimizer", {})["seed"] = seed
        self.write()


# ---------------------------------------------------------------------------
# ground-state persistence


def ground_state_to_document(gs: GroundState) -> dict:
    return {
        "version": RESULT_FORMAT_VERSION,
        "state": gs.state.to_document(),
        "energy": dataclasses.asdict(gs.energy),
        "converged": gs.converged,
        "iterations": gs.iterations,
        "restarts_used": gs.restarts_used,
        "seed": gs.seed,
    }


def ground_state_from_document(doc: dict) -> GroundState:
    if not isinstance(doc, dict) or doc.get("version") != RESULT_FORMAT_VERSION:
        raise StateFormatError(
            f"unsupported result format version {doc.get('version')!r}, "
            f"this build reads version {RESULT_FORMAT_VERSION}"
        )
    state = MpsState.from_document(doc["state"])
    energy = EnergyBreakdown(**doc["energy"])
    return GroundState(
        state=state,
        energy=energy,
        converged=bool(doc["converged"]),
        iterations=int(doc["iterations"]),
        restarts_used=int(doc["restarts_used"]),
        seed=int(doc["seed"]),
    )


def save_ground_state(path, gs: GroundState) -> None:
    Path(path).write_text(json.dumps(ground_state_to_document(gs)) + "\n")


def load_ground_state(path) -> GroundState:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise StateFormatError(f"not a result document: {exc}") from exc
    return ground_state_from_document(doc)


# ---------------------------------------------------------------------------
# CSV formats


def format_chain_csv(chain) -> str:
    lines = [
        f"# c0={chain.c0!r} scheme={chain.scheme}"
        + ("" if chain.lam is None else f" lam={chain.lam!r}"),
        CHAIN_HEADER,
    ]
    for m in range(chain.n_sites):
        hop = repr(float(chain.t[m])) if m < chain.n_sites - 1 else ""
        lines.append(f"{m + 1},{float(chain.omega[m])!r},{hop}")
    return "\n".join(lines) + "\n"


def format_sweep_csv(sweep) -> str:
    lines = [SWEEP_HEADER]
    for point in sweep.points:
        if point.error is not None:
            message = point.error.replace('"', "'").replace("\n", " ")
            lines.append(f'{point.alpha!r},,,,,,,,,,"{message}"')
            continue
        obs = point.observables
        gs = point.ground
        e = obs.energy
        lines.append(
            ",".join(
                [
                    repr(float(point.alpha)),
                    repr(float(obs.magnetization)),
                    repr(float(obs.coherence)),
                    repr(float(obs.spin_entropy)),
                    repr(float(e.total)),
                    repr(float(e.e_loc)),
                    repr(float(e.e_int)),
                    repr(float(e.e_chain)),
                    "1" if gs.converged else "0",
                    str(gs.iterations),
                    "",
                ]
            )
        )
    return "\n".join(lines) + "\n"


def format_profile_csv(sweep, attribute: str) -> str:
    """Matrix CSV of a per-site observable across the sweep: rows are
    couplings, columns are chain sites."""
    n_sites = None
    for point in sweep.points:
        if point.observables is not None:
            n_sites = len(getattr(point.observables, attribute))
            break
    if n_sites is None:
        n_sites = 0
    header = "alpha," + ",".join(f"site_{m + 1}" for m in range(n_sites))
    lines = [header]
    for point in sweep.points:
        if point.observables is None:
            lines.append(repr(float(point.alpha)) + "," * n_sites)
            continue
        values = getattr(point.observables, attribute)
        lines.append(
            repr(float(point.alpha)) + "," + ",".join(repr(float(v)) for v in values)
        )
    return "\n".join(lines) + "\n"
