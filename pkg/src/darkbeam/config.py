"""JSON configuration: schema, validation and default filling."""
from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import jsonschema

from .adiabatic_map import gaussian_envelope
from .errors import InvariantError, SchemaError
from .model import (
    StokesProfile,
    SystemParams,
    Thresholds,
    VelocityClass,
    VelocityDistribution,
    delay_tau,
)
from .pde_solver import GridSpec
from .quantum_stats import QuantumInput

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}


def _obj(props: dict, required: tuple[str, ...] = ()) -> dict:
    return {
        "type": "object",
        "properties": props,
        "required": list(required),
        "additionalProperties": False,
    }


SCHEMA: dict = _obj(
    {
        "params": _obj(
            {
                "alpha": _num,
                "r": _num,
                "gamma_tilde": _num,
                "x": _num,
                "big_delta": _num,
                "length_L": _num,
            },
            ("alpha", "r", "gamma_tilde"),
        ),
        "stokes": _obj(
            {
                "kind": {"enum": ["TanhRampDown", "CosSquaredRamp", "Constant", "Tabulated"]},
                "omega_max": _pos,
                "omega_min": _pos,
                "center": _num,
                "width": _pos,
                "samples": {
                    "type": "array",
                    "items": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2},
                },
                "phase_velocity": _num,
            }
        ),
        "velocities": _obj(
            {
                "dispersion_factor": {"enum": [0.5, 1, 1.0]},
                "pump_recoil": _num,
                "beat_k": _num,
                "spread": {"type": "number", "minimum": 0},
                "n_classes": {"type": "integer", "minimum": 1},
                "classes": {
                    "type": "array",
                    "minItems": 1,
                    "items": _obj(
                        {"k": _num, "xi": _num, "delta": _num, "big_delta": _num},
                        ("k", "xi"),
                    ),
                },
            }
        ),
        "thresholds": _obj(
            {"much_less": _pos, "much_greater": _pos, "weak_excitation": _pos}
        ),
        "grid": _obj(
            {
                "nz": {"type": "integer", "minimum": 64},
                "t_final": _pos,
                "record_planes": {"type": "array", "items": _num},
            }
        ),
        "input": _obj(
            {
                "kind": {"enum": ["Fock", "Coherent", "TwoModeSqueezed"]},
                "N": {"type": "integer", "minimum": 0},
                "amplitude": {
                    "oneOf": [_num, {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}]
                },
                "r_squeeze": {"type": "number", "minimum": 0},
                "pulse": _obj({"t0": _num, "sigma": _pos, "amplitude": _pos}),
            }
        ),
        "sweep": _obj({"x_values": {"type": "array", "items": _num, "minItems": 1}}),
        "map": _obj({"n_samples": {"type": "integer", "minimum": 2}}),
        "seed": {"type": "integer"},
    },
    ("params",),
)


@dataclass(frozen=True)
class PulseSpec:
    t0: float
    sigma: float
    amplitude: float

    def envelope(self):
        return gaussian_envelope(self.t0, self.sigma, self.amplitude)


@dataclass(frozen=True)
class Config:
    """Fully resolved configuration; ``resolved`` echoes every default."""

    params: SystemParams
    profile: StokesProfile
    velocities: VelocityDistribution
    grid: GridSpec
    quantum_input: QuantumInput
    thresholds: Thresholds
    pulse: PulseSpec
    x_values: tuple[float, ...]
    n_samples: int
    seed: int
    resolved: dict = field(default_factory=dict)

    def __iter__(self):
        return iter((self.params, self.profile, self.velocities, self.grid, self.quantum_input))


def _pointer(path) -> str:
    return "/" + "/".join(str(p) for p in path) if path else ""


def validate_document(doc: Any) -> None:
    validator = jsonschema.Draft7Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        raise SchemaError(err.message, _pointer(err.absolute_path))


def apply_overrides(doc: dict, overrides: list[str] | None) -> dict:
    """Apply ``key.sub=value`` overrides; values are parsed as JSON when possible."""
    doc = copy.deepcopy(doc)
    for item in overrides or []:
        if "=" not in item:
            raise SchemaError(f"override {item!r} is not key=value")
        key, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = doc
        parts = key.strip().split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise SchemaError(f"cannot descend into {p!r}", "/" + "/".join(parts))
        node[parts[-1]] = value
    return doc


def parse_config(document: dict | str | Path, overrides: list[str] | None = None) -> Config:
    """Validate a configuration document and build the domain objects.

    ``document`` may be a dict, a JSON string or a path to a JSON file.

    Raises
    ------
    SchemaError
        On malformed documents, with the JSON pointer of the offending node.
    InvariantError
        When a domain invariant is violated.
    """
    if isinstance(document, Path) or (isinstance(document, str) and not document.lstrip().startswith("{")):
        try:
            document = json.loads(Path(document).read_text())
        except json.JSONDecodeError as exc:
            raise SchemaError(f"invalid JSON: {exc}") from exc
    elif isinstance(document, str):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"invalid JSON: {exc}") from exc
    doc = apply_overrides(document, overrides)
    validate_document(doc)

    try:
        return _build(doc)
    except InvariantError:
        raise
    except ValueError as exc:
        raise InvariantError(str(exc)) from exc


def _build(doc: dict) -> Config:
    p = {"x": 0.0, "big_delta": 0.0, "length_L": 1.0, **doc["params"]}
    params = SystemParams(**p)
    if params.r == 0:
        raise InvariantError("r must be non-zero for a transfer computation")

    st = {
        "kind": "TanhRampDown",
        "omega_max": 100.0,
        "omega_min": 1e-3,
        "center": 0.5,
        "width": 0.1,
        **doc.get("stokes", {}),
    }
    prof_kw = dict(st)
    if "samples" in prof_kw:
        prof_kw["samples"] = tuple(tuple(s) for s in prof_kw["samples"])
    profile = StokesProfile(**prof_kw)

    vd = {"dispersion_factor": 0.5, "pump_recoil": 0.0, "beat_k": 0.0, **doc.get("velocities", {})}
    vd["dispersion_factor"] = float(vd["dispersion_factor"])
    if "classes" in vd:
        classes = tuple(
            VelocityClass(c["k"], c["xi"], c.get("delta", 0.0), c.get("big_delta", 0.0))
            for c in vd["classes"]
        )
        velocities = VelocityDistribution(
            classes, vd["dispersion_factor"], vd["pump_recoil"], vd["beat_k"]
        )
    elif vd.get("spread", 0.0) > 0:
        vd.setdefault("n_classes", 5)
        velocities = VelocityDistribution.gaussian(
            params, vd["spread"], vd["n_classes"], vd["beat_k"],
            vd["dispersion_factor"], vd["pump_recoil"],
        )
    else:
        velocities = VelocityDistribution.single(
            params, vd["dispersion_factor"], pump_recoil=vd["pump_recoil"], beat_k=vd["beat_k"]
        )
    velocities.check_against(params)
    vd["classes"] = [
        {"k": c.k, "xi": c.xi, "delta": c.delta, "big_delta": c.big_delta}
        for c in velocities.classes
    ]
    vd.pop("spread", None)
    vd.pop("n_classes", None)

    th = {"much_less": 0.1, "much_greater": 10.0, "weak_excitation": 0.1, **doc.get("thresholds", {})}
    thresholds = Thresholds(**th)

    inp = {"kind": "Fock", "N": 10, "r_squeeze": 1.0, "amplitude": 1.0, **doc.get("input", {})}
    pulse = {"sigma": 2.0, "amplitude": 0.05, **inp.get("pulse", {})}
    pulse.setdefault("t0", 5.0 * pulse["sigma"])
    inp["pulse"] = pulse
    amp = inp["amplitude"]
    amp_c = complex(amp[0], amp[1]) if isinstance(amp, list) else complex(amp)
    qin = QuantumInput(inp["kind"], N=inp["N"], amplitude=amp_c, r_squeeze=inp["r_squeeze"])

    gd = {"nz": 512, "record_planes": [0.0, 1.0], **doc.get("grid", {})}
    if "t_final" not in gd:
        tau_L = delay_tau(params, profile, params.length_L) if params.r > 0 else 0.0
        gd["t_final"] = pulse["t0"] + 5.0 * pulse["sigma"] + tau_L + 2.0
    grid = GridSpec(nz=gd["nz"], record_planes=tuple(gd["record_planes"])).with_duration(
        gd["t_final"]
    )

    sweep = {"x_values": [round(0.025 * i, 10) for i in range(9)], **doc.get("sweep", {})}
    mp = {"n_samples": 401, **doc.get("map", {})}
    seed = int(doc.get("seed", 0))

    resolved = {
        "params": p,
        "stokes": st,
        "velocities": vd,
        "thresholds": th,
        "grid": gd,
        "input": inp,
        "sweep": sweep,
        "map": mp,
        "seed": seed,
    }
    if not all(math.isfinite(v) for v in sweep["x_values"]):
        raise InvariantError("sweep x values must be finite")
    return Config(
        params=params,
        profile=profile,
        velocities=velocities,
        grid=grid,
        quantum_input=qin,
        thresholds=thresholds,
        pulse=PulseSpec(pulse["t0"], pulse["sigma"], pulse["amplitude"]),
        x_values=tuple(float(x) for x in sweep["x_values"]),
        n_samples=int(mp["n_samples"]),
        seed=seed,
        resolved=resolved,
    )
