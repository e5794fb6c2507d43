"""Scenario configuration: JSON schema, validation and translation into model objects.

Complex numbers are written as ``[re, im]`` pairs.  Subsystem indices in
observable names are 1-based, matching the way scenarios are usually written.
"""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from typing import Any, Callable

import jsonschema
import numpy as np

from .bath import (
    BathState,
    CouplingSpec,
    bath_from_squeezing,
    bell_bath,
    coefficients_nq,
    ghz_bath,
    ground_bath,
    near_bell_bath,
    product_bath,
    w_bath,
)
from .core import DensityMatrix, PhysicsError, basis_ket, embed, qubit_ket
from .dynamics import bell_state, theta_state
from .gaussian import tmsv_ket
from .liouvillian import SubsystemSpec, dims_of
from .measures import log_negativity, purity, state_fidelity


class ConfigError(ValueError):
    """Configuration rejected before any computation."""


_COMPLEX = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
_NUMBER_OR_COMPLEX = {"oneOf": [{"type": "number"}, _COMPLEX]}
_FAMILY = {"enum": ["phi", "psi"]}

SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["bath", "subsystems", "rates", "initial_state", "integrator", "outputs"],
    "properties": {
        "name": {"type": "string"},
        "bath": {
            "oneOf": [
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["preset"],
                    "properties": {
                        "preset": {"enum": ["ground", "bell", "near_bell", "ghz", "w", "tms"]},
                        "n": {"type": "integer", "minimum": 1, "maximum": 6},
                        "phi": {"type": "number"},
                        "eps": {"type": "number", "exclusiveMinimum": 0},
                        "family": _FAMILY,
                        "r": {"type": "number", "minimum": 0},
                        "theta": {"type": "number"},
                    },
                },
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["amplitudes"],
                    "properties": {
                        "amplitudes": {
                            "type": "object",
                            "minProperties": 1,
                            "propertyNames": {"pattern": "^[eg]+$"},
                            "additionalProperties": _NUMBER_OR_COMPLEX,
                        }
                    },
                },
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["density"],
                    "properties": {
                        "density": {"type": "array", "items": {"type": "array", "items": _NUMBER_OR_COMPLEX}}
                    },
                },
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["product"],
                    "properties": {
                        "product": {
                            "type": "array",
                            "minItems": 1,
                            "items": {"type": "array", "items": _NUMBER_OR_COMPLEX, "minItems": 2, "maxItems": 2},
                        }
                    },
                },
            ]
        },
        "subsystems": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["kind"],
                "properties": {
                    "kind": {"enum": ["qubit", "oscillator"]},
                    "dim": {"type": "integer", "minimum": 2, "maximum": 60},
                },
            },
        },
        "rates": {"type": "array", "minItems": 1, "items": {"type": "number", "minimum": 0}},
        "interaction_time": {"type": "number", "exclusiveMinimum": 0},
        "initial_state": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "preset": {"enum": ["phi+", "phi-", "psi+", "psi-", "theta", "vacuum"]},
                "theta": {"type": "number"},
                "family": _FAMILY,
                "product": {
                    "type": "array",
                    "items": {"oneOf": [{"enum": ["e", "g"]}, {"type": "integer", "minimum": 0}]},
                },
            },
            "oneOf": [{"required": ["preset"]}, {"required": ["product"]}],
        },
        "integrator": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "method": {"enum": ["rk4", "steady"]},
                "dt": {"type": "number", "exclusiveMinimum": 0},
                "t_end": {"type": "number", "minimum": 0},
                "stride": {"type": "integer", "minimum": 1},
            },
        },
        "outputs": {
            "type": "object",
            "additionalProperties": False,
            "required": ["observables"],
            "properties": {
                "observables": {
                    "type": "array",
                    "minItems": 1,
                    "items": {
                        "type": "string",
                        "pattern": r"^(trace|purity|log_negativity|excited:\d+|number:\d+|population:[eg]+|fidelity:(phi\+|phi-|psi\+|psi-|tmsv))$",
                    },
                },
                "file": {"type": "string", "pattern": r"^[\w.-]+$"},
            },
        },
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "required": ["parameter"],
            "properties": {
                "parameter": {"type": "string", "pattern": r"^[a-z_]+(\.[a-z_]+|\.\d+)*$"},
                "values": {"type": "array", "minItems": 1, "items": {"type": "number"}},
                "start": {"type": "number"},
                "stop": {"type": "number"},
                "num": {"type": "integer", "minimum": 1},
            },
            "oneOf": [{"required": ["values"]}, {"required": ["start", "stop", "num"]}],
        },
    },
}

DEFAULT_INTERACTION_TIME = 1e-3


def _complex(x) -> complex:
    return complex(x[0], x[1]) if isinstance(x, list) else complex(x)


def _line_of(text: str, path: list) -> int | None:
    """Best-effort source line for a JSON path: the first line naming its last key."""
    keys = [p for p in path if isinstance(p, str)]
    if not keys:
        return None
    needle = json.dumps(keys[-1]) + ":"
    for k, line in enumerate(text.splitlines(), start=1):
        if needle in line.replace(" :", ":"):
            return k
    return None


def load_config(text: str) -> dict:
    """Parse and schema-validate a scenario.  Raises ConfigError with a field diagnostic."""
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    validate(cfg, text)
    return cfg


def validate(cfg: dict, text: str | None = None) -> None:
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        err = jsonschema.exceptions.best_match(errors)
        field = "/".join(str(p) for p in err.absolute_path) or "<root>"
        line = _line_of(text, list(err.absolute_path)) if text else None
        where = f"line {line}, " if line else ""
        raise ConfigError(f"{where}field {field}: {err.message}")
    values = sweep_values(cfg)
    points = [cfg] if values is None else [with_parameter(cfg, cfg["sweep"]["parameter"], v) for v in values]
    for point in points:
        if point is not cfg:
            err = jsonschema.exceptions.best_match(validator.iter_errors(point))
            if err is not None:
                raise ConfigError(f"sweep {cfg['sweep']['parameter']}: {err.message}")
        try:
            build(point)
        except ConfigError:
            raise
        except (ValueError, KeyError, IndexError, TypeError, PhysicsError) as exc:
            raise ConfigError(str(exc)) from None


def config_hash(cfg: dict) -> str:
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


# ---------------------------------------------------------------------------
# model construction

@dataclass
class Scenario:
    bath: BathState
    specs: list[SubsystemSpec]
    coupling: CouplingSpec
    rho0: DensityMatrix
    method: str
    dt: float
    t_end: float
    stride: int
    observables: dict[str, Callable[[DensityMatrix], float]]
    tms: tuple[float, float] | None = None


def parse_bath(spec: dict) -> tuple[BathState, tuple[float, float] | None]:
    if "amplitudes" in spec:
        amps = {k: _complex(v) for k, v in spec["amplitudes"].items()}
        if len({len(k) for k in amps}) != 1:
            raise ConfigError("bath amplitude labels must all have the same length")
        norm = sum(abs(v) ** 2 for v in amps.values())
        if abs(norm - 1) > 1e-10:
            raise ConfigError(f"bath amplitudes are not normalised (sum |b|^2 = {norm:.12g})")
        return BathState.from_amplitudes(amps), None
    if "density" in spec:
        rho = np.array([[_complex(x) for x in row] for row in spec["density"]])
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise ConfigError("bath density matrix must be square")
        if abs(np.trace(rho) - 1) > 1e-10:
            raise ConfigError("bath density matrix does not have unit trace")
        return BathState.from_density(rho), None
    if "product" in spec:
        return product_bath([(_complex(a), _complex(b)) for a, b in spec["product"]]), None
    preset = spec["preset"]
    family = spec.get("family", "phi")
    if preset == "ground":
        return ground_bath(spec.get("n", 2)), None
    if preset == "bell":
        return bell_bath(spec.get("phi", 0.0), family), None
    if preset == "near_bell":
        if "eps" not in spec:
            raise ConfigError("near_bell bath needs eps")
        return near_bell_bath(spec.get("phi", 0.0), spec["eps"], family), None
    if preset == "ghz":
        return ghz_bath(spec.get("n", 3)), None
    if preset == "w":
        return w_bath(spec.get("n", 3)), None
    r, theta = spec.get("r", 0.0), spec.get("theta", 0.0)
    return bath_from_squeezing(r, theta), (r, theta)


def parse_initial_state(spec: dict, specs: list[SubsystemSpec], family_default: str = "phi") -> DensityMatrix:
    dims = dims_of(specs)
    if "product" in spec:
        labels = spec["product"]
        if len(labels) != len(specs):
            raise ConfigError(f"initial product state has {len(labels)} factors for {len(specs)} subsystems")
        idx = []
        for lab, s in zip(labels, specs):
            if s.kind == "qubit":
                if lab not in ("e", "g"):
                    raise ConfigError("qubit factors must be 'e' or 'g'")
                idx.append(0 if lab == "e" else 1)
            else:
                if not isinstance(lab, int) or lab >= s.dim:
                    raise ConfigError(f"oscillator factor must be a Fock index below {s.dim}")
                idx.append(lab)
        return DensityMatrix.from_ket(dims, basis_ket(dims, idx))
    preset = spec["preset"]
    if preset == "vacuum":
        if any(s.kind != "oscillator" for s in specs):
            raise ConfigError("vacuum initial state needs oscillator subsystems")
        return DensityMatrix.from_ket(dims, basis_ket(dims, [0] * len(dims)))
    if dims != (2, 2):
        raise ConfigError(f"initial state {preset!r} needs two qubits")
    if preset == "theta":
        theta = spec.get("theta")
        if theta is None:
            raise ConfigError("theta initial state needs theta")
        if not 0 <= theta <= np.pi / 2 + 1e-12:
            raise ConfigError(f"theta = {theta} outside [0, pi/2]")
        return theta_state(min(theta, np.pi / 2), spec.get("family", family_default))
    return bell_state(preset)


def _observable(name: str, specs: list[SubsystemSpec], tms) -> Callable[[DensityMatrix], float]:
    dims = dims_of(specs)
    kind, _, arg = name.partition(":")
    if kind == "trace":
        return lambda rho: float(np.trace(rho.data).real)
    if kind == "purity":
        return purity
    if kind == "log_negativity":
        if dims != (2, 2):
            raise ConfigError("log_negativity needs two qubits")
        return log_negativity
    if kind in ("excited", "number"):
        k = int(arg) - 1
        if not 0 <= k < len(specs):
            raise ConfigError(f"observable {name}: subsystem index out of range")
        want = "qubit" if kind == "excited" else "oscillator"
        if specs[k].kind != want:
            raise ConfigError(f"observable {name} needs a {want}")
        low = embed(specs[k].lowering, k, dims)
        op = (low.dag @ low).data
        return lambda rho: rho.expect(op)
    if kind == "population":
        if any(s.kind != "qubit" for s in specs) or len(arg) != len(specs):
            raise ConfigError(f"observable {name} needs one label per qubit")
        i = int(np.argmax(np.abs(qubit_ket(arg))))
        return lambda rho: float(rho.data[i, i].real)
    # fidelity
    if arg == "tmsv":
        if tms is None or len(dims) != 2 or any(s.kind != "oscillator" for s in specs) or dims[0] != dims[1]:
            raise ConfigError("fidelity:tmsv needs a tms bath and two equal oscillators")
        target = DensityMatrix.from_ket(dims, tmsv_ket(tms[0], tms[1], dims[0]))
    else:
        if dims != (2, 2):
            raise ConfigError(f"fidelity:{arg} needs two qubits")
        target = bell_state(arg)
    return lambda rho: state_fidelity(rho, target)


def build(cfg: dict) -> Scenario:
    bath, tms = parse_bath(cfg["bath"])
    specs = [SubsystemSpec(s["kind"], s.get("dim", 2 if s["kind"] == "qubit" else 30)) for s in cfg["subsystems"]]
    if len(specs) != bath.n:
        raise ConfigError(f"{len(specs)} subsystems for a {bath.n}-qubit bath")
    rates = cfg["rates"]
    if len(rates) == 1:
        rates = rates * len(specs)
    if len(rates) != len(specs):
        raise ConfigError(f"{len(rates)} rates for {len(specs)} subsystems")
    coupling = CouplingSpec.from_rates(rates, cfg.get("interaction_time", DEFAULT_INTERACTION_TIME))
    family = cfg["bath"].get("family", "phi") if "preset" in cfg["bath"] else "phi"
    rho0 = parse_initial_state(cfg["initial_state"], specs, family)
    integ = cfg["integrator"]
    method = integ.get("method", "rk4")
    dt = integ.get("dt", 0.005)
    t_end = integ.get("t_end", 0.0)
    if method == "rk4":
        if "t_end" not in integ:
            raise ConfigError("rk4 integrator needs t_end")
        rate = coefficients_nq(bath, coupling).max_rate
        if rate > 0 and dt > 0.01 / rate * (1 + 1e-12):
            raise ConfigError(f"integrator.dt = {dt} exceeds 0.01/rate = {0.01 / rate:.6g}")
        n = round(t_end / dt)
        if abs(n * dt - t_end) > 1e-9 * max(1.0, t_end):
            raise ConfigError("integrator.t_end must be a multiple of integrator.dt")
    obs = {name: _observable(name, specs, tms) for name in cfg["outputs"]["observables"]}
    return Scenario(bath, specs, coupling, rho0, method, dt, t_end, integ.get("stride", 1), obs, tms)


def sweep_values(cfg: dict) -> list[float] | None:
    sw = cfg.get("sweep")
    if sw is None:
        return None
    vals = sw["values"] if "values" in sw else list(np.linspace(sw["start"], sw["stop"], sw["num"]))
    return sorted(float(v) for v in vals)


def with_parameter(cfg: dict, path: str, value: float) -> dict:
    """Copy of ``cfg`` (without its sweep block) with the dotted ``path`` set to ``value``."""
    out = copy.deepcopy(cfg)
    out.pop("sweep", None)
    node = out
    keys = path.split(".")
    for key in keys[:-1]:
        node = node[int(key)] if isinstance(node, list) else node.setdefault(key, {})
        if not isinstance(node, (dict, list)):
            raise ConfigError(f"sweep parameter {path!r} does not name a config field")
    last = keys[-1]
    if isinstance(node, list):
        node[int(last)] = value
    else:
        node[last] = value
    return out
