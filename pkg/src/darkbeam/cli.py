"""Command-line scenario runner.

    darkbeam <scenario> --config <path> --out <dir> [--set key=value]...

Exit codes: 0 ok, 2 configuration error, 3 physics error, 4 a built-in
assertion failed.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import math
import os
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .adiabatic_map import atom_output, build_transfer_map, loss_bound, loss_factor_eta
from .config import Config, parse_config
from .errors import (
    IncompleteTransferWarning,
    InvariantError,
    PhysicsError,
    SchemaError,
)
from .model import adiabatic_loss_exponent, check_feasibility
from .pde_solver import EnvelopeSolver
from .quantum_stats import (
    channel_from_map,
    duan_criterion,
    fig2_curves,
    gaussian_channel_apply,
    two_mode_squeezed_cov,
)

log = logging.getLogger("darkbeam")

SCENARIOS = ("transfer", "validate", "sweep", "entangle", "feasibility")

EXIT_OK, EXIT_CONFIG, EXIT_PHYSICS, EXIT_ASSERT = 0, 2, 3, 4


@dataclasses.dataclass
class Scenario:
    name: str
    config_path: Path | None
    output_dir: Path
    overrides: list[str] = dataclasses.field(default_factory=list)

    def __post_init__(self):
        if self.name not in SCENARIOS:
            raise SchemaError(f"unknown scenario {self.name!r}")


DEFAULT_DOCUMENT = {"params": {"alpha": 20.0, "r": 0.05, "gamma_tilde": 50.0}}


def worker_count() -> int:
    raw = os.environ.get("DARKBEAM_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            log.warning("ignoring malformed DARKBEAM_THREADS=%r", raw)
    return os.cpu_count() or 1


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serializable: {type(o)}")


def _monotone(a: np.ndarray, increasing: bool, tol: float = 1e-12) -> bool:
    d = np.diff(a)
    return bool(np.all(d >= -tol)) if increasing else bool(np.all(d <= tol))


# --- scenarios ---------------------------------------------------------


def _transfer(cfg: Config, out: Path) -> tuple[dict, dict]:
    N = cfg.quantum_input.N if cfg.quantum_input.N > 0 else 10
    table = fig2_curves(cfg.params, cfg.profile, N, n_samples=cfg.n_samples)
    table.to_csv(out / "fig2.csv")
    tmap = build_transfer_map(cfg.params, cfg.profile, n_samples=cfg.n_samples, x=0.0)
    tmap.to_csv(out / "transfer_map.csv")
    peak = int(np.argmax(table.m_var))
    half = int(np.argmin(np.abs(table.m_mean - 0.5)))
    checks = {
        "monotone_exchange": _monotone(table.n_mean, False) and _monotone(table.m_mean, True),
        "photons_depleted": bool(table.n_mean[-1] <= 1e-2),
        "atoms_filled": bool(table.m_mean[-1] >= 0.99),
        "interior_variance_peak": bool(0 < peak < len(table.z) - 1 and abs(peak - half) <= 1),
        "output_variance_small": bool(table.m_var[-1] * N <= 1e-3 * N),
    }
    info = {
        "N": N,
        "n_mean_out": table.n_mean[-1],
        "m_mean_out": table.m_mean[-1],
        "m_var_peak_z": table.z[peak],
        "m_var_peak": table.m_var[peak],
        "residual_photon_fraction": tmap.residual_photon_fraction,
    }
    return checks, info


def _validate(cfg: Config, out: Path) -> tuple[dict, dict]:
    tmap = build_transfer_map(cfg.params, cfg.profile, n_samples=cfg.n_samples)
    env = cfg.pulse.envelope()
    solver = EnvelopeSolver(cfg.params, cfg.profile, cfg.velocities, env, cfg.grid,
                            thresholds=cfg.thresholds)
    rec = solver.run()
    rec.to_csv(out / "pde.csv")
    tmap.to_csv(out / "transfer_map.csv")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IncompleteTransferWarning)
        predicted = atom_output(tmap, env, rec.t)
    numeric = rec.phi3_total(cfg.params.length_L)
    err = float(np.linalg.norm(numeric - predicted) / np.linalg.norm(predicted))
    corr = math.exp(-adiabatic_loss_exponent(cfg.params, cfg.profile))
    err_corr = float(np.linalg.norm(numeric - corr * predicted) / np.linalg.norm(corr * predicted))
    checks = {
        "l2_below_2pct": err < 0.02,
        "budget_closes": rec.budget_residual < 5e-3,
    }
    info = {
        "l2_error": err,
        "l2_error_with_ramp_loss": err_corr,
        "ramp_loss_amplitude_factor": corr,
        **rec.summary(),
    }
    _write_json(out / "pde_summary.json", rec.summary())
    return checks, info


def _sweep_point(cfg: Config, x: float) -> dict:
    params = dataclasses.replace(cfg.params, x=x)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        bound = loss_bound(params)
    eta = loss_factor_eta(params, cfg.profile).eta
    rep = check_feasibility(params, cfg.profile, thresholds=cfg.thresholds)
    return {
        "x": x,
        "eta": eta,
        "bound": bound,
        "two_photon_lhs": rep.two_photon.value,
        "adiabaticity_lhs": rep.adiabaticity.value,
        "opacity_ratio": rep.opacity.value,
    }


def _sweep(cfg: Config, out: Path) -> tuple[dict, dict]:
    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        rows = list(pool.map(lambda x: _sweep_point(cfg, x), cfg.x_values))
    cols = list(rows[0])
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for row in rows:
            w.writerow([repr(float(row[c])) for c in cols])
    checks = {"eta_above_bound": all(r["eta"] >= r["bound"] for r in rows)}
    return checks, {"points": len(rows)}


def _entangle(cfg: Config, out: Path) -> tuple[dict, dict]:
    tmap = build_transfer_map(cfg.params, cfg.profile, n_samples=cfg.n_samples)
    split = channel_from_map(tmap)
    r = cfg.quantum_input.r_squeeze
    cov_in = two_mode_squeezed_cov(r)
    cov_out = gaussian_channel_apply(cov_in, [split, split])
    d_in, d_out = duan_criterion(cov_in), duan_criterion(cov_out)
    q = float(split.q_atom[-1])
    expected = 2 * (q * math.exp(-2 * r) + 1 - q)
    payload = {
        "r_squeeze": r,
        "q_atom": q,
        "cov_in": cov_in,
        "cov_out": cov_out,
        "duan_in": d_in.value,
        "duan_out": d_out.value,
        "entangled_out": d_out.entangled,
    }
    _write_json(out / "entangle.json", payload)
    checks = {
        "duan_matches_channel": abs(d_out.value - expected) < 1e-10,
        "entanglement_survives": d_out.entangled or r == 0,
    }
    return checks, {k: payload[k] for k in ("q_atom", "duan_in", "duan_out")}


def _feasibility(cfg: Config, out: Path) -> tuple[dict, dict]:
    rep = check_feasibility(cfg.params, cfg.profile, cfg.velocities, cfg.thresholds)
    (out / "feasibility.json").write_text(rep.to_json(indent=2, sort_keys=True) + "\n")
    return {c.name: c.passed for c in rep.checks}, {"adiabatic_loss": rep.adiabatic_loss}


_RUNNERS = {
    "transfer": _transfer,
    "validate": _validate,
    "sweep": _sweep,
    "entangle": _entangle,
    "feasibility": _feasibility,
}


def run_scenario(scenario: Scenario) -> int:
    """Run one scenario and write its artifacts; returns the exit status."""
    try:
        doc = DEFAULT_DOCUMENT if scenario.config_path is None else Path(scenario.config_path)
        cfg = parse_config(doc, scenario.overrides)
        out = Path(scenario.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        if not os.access(out, os.W_OK):
            raise SchemaError(f"output directory {out} is not writable")
    except (SchemaError, InvariantError, OSError) as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    _write_json(out / "resolved_config.json", cfg.resolved)
    try:
        checks, info = _RUNNERS[scenario.name](cfg, out)
    except PhysicsError as exc:
        log.error("physics error: %s: %s", type(exc).__name__, exc)
        _write_json(out / "summary.json", {"scenario": scenario.name, "error": str(exc),
                                           "error_type": type(exc).__name__})
        return EXIT_PHYSICS
    passed = all(checks.values())
    _write_json(out / "summary.json", {
        "scenario": scenario.name,
        "assertions": checks,
        "passed": passed,
        **info,
    })
    for name, ok in checks.items():
        log.info("%-28s %s", name, "PASS" if ok else "FAIL")
    return EXIT_OK if passed else EXIT_ASSERT


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="darkbeam", description=__doc__.splitlines()[0])
    ap.add_argument("scenario", choices=SCENARIOS)
    ap.add_argument("--config", type=Path, default=None, help="JSON configuration file")
    ap.add_argument("--out", type=Path, required=True, help="output directory")
    ap.add_argument("--set", dest="overrides", action="append", default=[],
                    metavar="KEY=VALUE", help="override a config entry, e.g. params.alpha=30")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    return run_scenario(Scenario(args.scenario, args.config, args.out, args.overrides))


if __name__ == "__main__":
    sys.exit(main())
