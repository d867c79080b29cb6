"""Scenario runner: JSON config in, CSV time series and a verification
report out.

A scenario names a builtin system, integration parameters, an initial
state, and a list of named checks.  Running it writes

* ``trajectory.csv``   the computed solution (one row per step, or per
  step and node for the rod) with recovered multipliers,
* ``momentum.csv``     residual time series of every check that has one,
* ``report.json``      one record per check: residual norms, tolerance,
  pass/fail, plus environment and timing metadata.

Exit status: 0 when all checks pass, 2 when any check fails, 1 on
configuration or runtime errors.  Outputs are byte-identical across runs
with the same config and seed (timing fields live only in the report).
"""

from __future__ import annotations

import argparse
import copy
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, NhlabError
from .mechanics import (MechState, benenti_system, benenti_velocity_sections,
                        benenti_weighted_section, simulate)
from .momentum import (momentum_equation_residual_rod,
                       momentum_equation_residuals_mech)
from .rod import (RodGrid, RodParams, circular_loop_state, energy_density,
                  field_equation_residuals, perturbed_ring_state,
                  rod_simulate, straight_twisted_state,
                  translation_identity_residual)
from .symmetry import (SamplerConfig, SymmetryAnsatz, contraction_matrix,
                       find_admissible, principal_angles,
                       sample_constraint_manifold)

_BENENTI_LAWS = {
    "momentum-law-m1": ((1.0, 1.0, 0.0, 0.0),
                        "balance of m*(vx1^2 + vy1^2) along the flow"),
    "momentum-law-m2": ((0.0, 0.0, 1.0, 1.0),
                        "balance of m*(vx2^2 + vy2^2) along the flow"),
    "momentum-law-cross": ((1.0, 0.0, 0.0, -1.0),
                           "balance of m*(vx1^2 - vy2^2) along the flow"),
}

#: default tolerance per check name
_CHECK_TOL = {
    "momentum-law-m1": 1e-8,
    "momentum-law-m2": 1e-8,
    "momentum-law-cross": 1e-8,
    "constraint-drift": 1e-9,
    "symmetry-discovery": 1e-8,
    "field-equations": 1e-10,
    "translation-identity": 1e-10,
    "energy-drift": 1e-4,
    # discretization-bound balance residuals, calibrated at the default
    # rod scenario (N = 64, h = 1e-4, snapshots every 10 steps) with ~4x
    # headroom; they shrink at second order under grid refinement
    "energy-current": 0.9,
    "translation-momentum": 1.6,
}

_MECH_CHECKS = ("momentum-law-m1", "momentum-law-m2", "momentum-law-cross",
                "constraint-drift", "symmetry-discovery")
_ROD_CHECKS = ("field-equations", "translation-identity", "energy-drift",
               "energy-current", "translation-momentum")

SCENARIOS = {
    "benenti-free": {
        "name": "benenti-free",
        "system": "benenti",
        "params": {"m": 1.0, "g": 0.0},
        "initial": {"q": [0.0, 0.0, 0.0, 0.0], "v": [1.0, 0.5, 2.0, 1.0]},
        "integration": {"h": 1e-3, "T": 10.0},
        "checks": ["momentum-law-m1", "momentum-law-m2", "momentum-law-cross",
                   "constraint-drift", "symmetry-discovery"],
        "seed": 42,
    },
    "benenti-forced": {
        "name": "benenti-forced",
        "system": "benenti",
        "params": {"m": 1.0, "g": 9.8},
        "initial": {"q": [0.0, 0.0, 0.0, 0.0], "v": [1.0, 0.5, 2.0, 1.0]},
        "integration": {"h": 1e-3, "T": 2.0},
        "checks": ["momentum-law-m1", "momentum-law-m2", "momentum-law-cross",
                   "constraint-drift"],
        "seed": 42,
    },
    "rod-energy-conservation": {
        "name": "rod-energy-conservation",
        "system": "cosserat_rod",
        "params": {"rho": 1.0, "alpha": 1.0, "beta": 1.0, "K": 1.0, "R": 1.0,
                   "length": 1.0},
        "initial": {"preset": "perturbed_ring"},
        "integration": {"h": 1e-4, "T": 1.0, "N": 64, "record_every": 10},
        "checks": ["field-equations", "translation-identity", "energy-drift",
                   "energy-current"],
        "seed": 42,
    },
    "rod-translation-momentum": {
        "name": "rod-translation-momentum",
        "system": "cosserat_rod",
        "params": {"rho": 1.0, "alpha": 1.0, "beta": 1.0, "K": 1.0, "R": 1.0,
                   "length": 1.0},
        "initial": {"preset": "perturbed_ring"},
        "integration": {"h": 1e-4, "T": 1.0, "N": 64, "record_every": 10},
        "checks": ["field-equations", "translation-identity",
                   "translation-momentum"],
        "seed": 42,
    },
}

_SCENARIO_BLURBS = {
    "benenti-free": ("free point-mass pair with parallel velocities; verifies "
                     "the three velocity-weighted momentum laws and recovers "
                     "the admissible-symmetry subspace"),
    "benenti-forced": ("same system with a uniform force on y1; exercises "
                       "nontrivial multiplier solves, the momentum balance "
                       "still holds with its force term"),
    "rod-energy-conservation": ("rolling rod, perturbed periodic data; checks "
                                "the field equations, the multiplier-free "
                                "translation identity, and local plus global "
                                "energy conservation"),
    "rod-translation-momentum": ("rolling rod; checks the balance law of the "
                                 "rolling-compatible translation direction"),
}


@dataclass
class CheckResult:
    name: str
    anchor: str
    residual_max: float
    residual_l2: float
    tolerance: float
    details: dict = field(default_factory=dict)
    series: tuple = None  # (times, values) or None

    def record(self, tolerance_scale: float) -> dict:
        tol = self.tolerance * tolerance_scale
        return {
            "name": self.name,
            "anchor": self.anchor,
            "residual_max": self.residual_max,
            "residual_l2": self.residual_l2,
            "tolerance": tol,
            "passed": bool(self.residual_max <= tol),
            "details": self.details,
        }


def _fail(msg: str) -> ConfigError:
    return ConfigError(msg)


def _require_keys(section: dict, path: str, required, optional=()) -> None:
    for key in section:
        if key not in required and key not in optional:
            raise _fail(f"unknown key '{path}.{key}'" if path else f"unknown key '{key}'")
    for key in required:
        if key not in section:
            raise _fail(f"missing key '{path}.{key}'" if path else f"missing key '{key}'")


def _positive(value, name: str) -> float:
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise _fail(f"{name} must be a number")
    if not value > 0:
        raise _fail(f"{name} must be positive")
    return value


def validate_config(cfg) -> dict:
    """Structural validation; returns the config with defaults filled in.
    Unknown keys anywhere are rejected."""
    if not isinstance(cfg, dict):
        raise _fail("config must be a JSON object")
    _require_keys(cfg, "", required=("system", "initial", "integration", "checks"),
                  optional=("name", "params", "seed", "output_dir"))
    system = cfg["system"]
    if system not in ("benenti", "cosserat_rod"):
        raise _fail(f"system must be 'benenti' or 'cosserat_rod', got {system!r}")
    cfg = copy.deepcopy(cfg)
    cfg.setdefault("params", {})
    cfg.setdefault("seed", 42)
    cfg.setdefault("name", system)
    if not isinstance(cfg["seed"], int):
        raise _fail("seed must be an integer")

    integ = cfg["integration"]
    if system == "benenti":
        _require_keys(integ, "integration", required=("h", "T"))
    else:
        _require_keys(integ, "integration", required=("h", "T", "N"),
                      optional=("record_every",))
        integ.setdefault("record_every", 10)
        if not isinstance(integ["N"], int) or integ["N"] < 8:
            raise _fail("integration.N must be an integer >= 8")
        if not isinstance(integ["record_every"], int) or integ["record_every"] < 1:
            raise _fail("integration.record_every must be a positive integer")
    integ["h"] = _positive(integ["h"], "integration.h")
    try:
        integ["T"] = float(integ["T"])
    except (TypeError, ValueError):
        raise _fail("integration.T must be a number")
    if integ["T"] < 0:
        raise _fail("integration.T must be nonnegative")

    if system == "benenti":
        _require_keys(cfg["params"], "params", required=(), optional=("m", "g"))
        _require_keys(cfg["initial"], "initial", required=("q", "v"))
        for key in ("q", "v"):
            vec = cfg["initial"][key]
            if not isinstance(vec, list) or len(vec) != 4:
                raise _fail(f"initial.{key} must be a list of 4 numbers")
    else:
        _require_keys(cfg["params"], "params", required=(),
                      optional=("rho", "alpha", "beta", "K", "R", "length"))
        init = cfg["initial"]
        _require_keys(init, "initial", required=("preset",),
                      optional=("stretch_amp", "bend_amp", "bend_amp2",
                                "twist_amp", "spin", "spin_wobble", "twist",
                                "radius_wobble", "theta_amp"))
        if init["preset"] not in ("perturbed_ring", "straight_twisted",
                                  "circular_loop"):
            raise _fail(f"initial.preset {init['preset']!r} is not a known preset")

    if not isinstance(cfg["checks"], list) or not cfg["checks"]:
        raise _fail("checks must be a non-empty list")
    known = _MECH_CHECKS if system == "benenti" else _ROD_CHECKS
    normalized = []
    for item in cfg["checks"]:
        if isinstance(item, str):
            entry = {"name": item, "tolerance": None}
        elif isinstance(item, dict):
            _require_keys(item, "checks[]", required=("name",), optional=("tolerance",))
            entry = {"name": item["name"], "tolerance": item.get("tolerance")}
        else:
            raise _fail("each check must be a name or an object with a name")
        if entry["name"] not in known:
            raise _fail(f"check {entry['name']!r} is not available for system "
                        f"'{system}'")
        normalized.append(entry)
    cfg["checks"] = normalized
    return cfg


def _fmt(x) -> str:
    return f"{float(x):.17g}"


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def _apply_overrides(results, checks) -> None:
    for c in checks:
        if c["tolerance"] is not None:
            for r in results:
                if r.name.split("/")[0] == c["name"]:
                    r.tolerance = float(c["tolerance"])


def _run_benenti(cfg: dict):
    params = cfg["params"]
    sys_ = benenti_system(float(params.get("m", 1.0)), float(params.get("g", 0.0)))
    init = cfg["initial"]
    s0 = MechState(0.0, np.asarray(init["q"], float), np.asarray(init["v"], float))
    res0 = sys_.residual(s0)
    if res0.size and np.abs(res0).max() > sys_.drift_tolerance:
        raise _fail(f"initial.v violates the parallel-velocity constraint "
                    f"(|phi| = {np.abs(res0).max():.3e})")
    integ = cfg["integration"]
    traj = simulate(sys_, s0, integ["T"], integ["h"])

    lam = traj.multiplier_array
    phi = traj.residual_array
    rows = []
    for i, s in enumerate(traj.states):
        rows.append([_fmt(s.t)] + [_fmt(v) for v in s.q] + [_fmt(v) for v in s.v]
                    + [_fmt(lam[i, 0]), _fmt(phi[i, 0])])
    header = ["t", "x1", "y1", "x2", "y2", "vx1", "vy1", "vx2", "vy2",
              "lambda_1", "phi_residual_1"]

    results = []
    names = [c["name"] for c in cfg["checks"]]
    law_names = [n for n in names if n in _BENENTI_LAWS]
    if law_names:
        sections = [benenti_weighted_section(_BENENTI_LAWS[n][0]) for n in law_names]
        series = momentum_equation_residuals_mech(sections, sys_, traj)
        for name, ser in zip(law_names, series):
            results.append(CheckResult(
                name=name, anchor=_BENENTI_LAWS[name][1],
                residual_max=ser.max_abs, residual_l2=ser.l2,
                tolerance=_CHECK_TOL[name],
                series=(ser.times, ser.values)))
    if "constraint-drift" in names:
        results.append(CheckResult(
            name="constraint-drift",
            anchor="parallel-velocity constraint satisfied along the trajectory",
            residual_max=float(np.abs(phi).max()),
            residual_l2=float(np.sqrt(np.mean(phi ** 2))),
            tolerance=_CHECK_TOL["constraint-drift"],
            series=(traj.times, phi[:, 0])))
    if "symmetry-discovery" in names:
        results.extend(_benenti_symmetry_check(sys_, cfg["seed"]))

    _apply_overrides(results, cfg["checks"])
    return header, rows, results


def _benenti_symmetry_check(sys_, seed: int):
    ansatz = SymmetryAnsatz(benenti_velocity_sections())
    samples = sample_constraint_manifold(sys_, SamplerConfig(seed=seed))
    basis = find_admissible(sys_, ansatz, samples)
    target = np.array([[1.0, -1.0, -1.0, 1.0]]) / 2.0
    if basis.dimension == 3 and basis.complement.shape[0] == 1:
        angle = float(principal_angles(basis.complement, target).max())
    else:
        angle = float("inf")
    M = contraction_matrix(sys_, ansatz, samples)
    law_resid = 0.0
    for weights, _ in _BENENTI_LAWS.values():
        w = np.asarray(weights)
        law_resid = max(law_resid, float(np.abs(M @ (w / np.linalg.norm(w))).max()))
    return [
        CheckResult(
            name="symmetry-discovery/nullspace",
            anchor="admissible weight vectors satisfy w0 + w3 = w1 + w2",
            residual_max=angle, residual_l2=angle,
            tolerance=_CHECK_TOL["symmetry-discovery"],
            details={"dimension": basis.dimension,
                     "sample_count": basis.sample_count}),
        CheckResult(
            name="symmetry-discovery/known-laws",
            anchor="the three known conservation directions are admissible",
            residual_max=law_resid, residual_l2=law_resid,
            tolerance=1e-9),
    ]


def _rod_initial(cfg: dict, grid: RodGrid):
    init = dict(cfg["initial"])
    preset = init.pop("preset")
    if preset == "perturbed_ring":
        return perturbed_ring_state(grid, **init)
    if preset == "straight_twisted":
        return straight_twisted_state(grid, **init)
    return circular_loop_state(grid, **init)


def _run_rod(cfg: dict):
    p = cfg["params"]
    params = RodParams(rho=float(p.get("rho", 1.0)), alpha=float(p.get("alpha", 1.0)),
                       beta=float(p.get("beta", 1.0)), K=float(p.get("K", 1.0)),
                       R=float(p.get("R", 1.0)), length=float(p.get("length", 1.0)))
    integ = cfg["integration"]
    grid = RodGrid(integ["N"], params.length)
    s0 = _rod_initial(cfg, grid)
    hist = rod_simulate(params, s0, grid, integ["T"], integ["h"],
                        record_every=integ["record_every"])

    nodes = grid.nodes
    rows = []
    for i, s in enumerate(hist.states):
        dens = energy_density(params, s, grid)
        t_str = _fmt(s.t)
        for j in range(grid.n_nodes):
            rows.append([t_str, str(j), _fmt(nodes[j]), _fmt(s.x[j]), _fmt(s.y[j]),
                         _fmt(s.theta[j]), _fmt(s.theta_dot[j]),
                         _fmt(hist.lam[i][j]), _fmt(hist.mu[i][j]), _fmt(dens[j])])
    header = ["t", "node", "s", "x", "y", "theta", "theta_dot", "lambda",
              "mu", "energy_density"]

    results = []
    names = [c["name"] for c in cfg["checks"]]
    if "field-equations" in names:
        per_time = np.array([field_equation_residuals(params, s, grid)["max"]
                             for s in hist.states])
        results.append(CheckResult(
            name="field-equations",
            anchor="rolling-rod field equations hold for the recovered multipliers",
            residual_max=float(per_time.max()),
            residual_l2=float(np.sqrt(np.mean(per_time ** 2))),
            tolerance=_CHECK_TOL["field-equations"],
            series=(hist.times, per_time)))
    if "translation-identity" in names:
        per_time = np.array([translation_identity_residual(params, s, grid)
                             for s in hist.states])
        results.append(CheckResult(
            name="translation-identity",
            anchor="multiplier-free translation momentum identity",
            residual_max=float(per_time.max()),
            residual_l2=float(np.sqrt(np.mean(per_time ** 2))),
            tolerance=_CHECK_TOL["translation-identity"],
            series=(hist.times, per_time)))
    if "energy-drift" in names:
        E = hist.energy_array
        scale = max(abs(float(E[0])), 1e-30)
        drift = np.abs(E - E[0]) / scale
        results.append(CheckResult(
            name="energy-drift",
            anchor="global energy conservation on the periodic rod",
            residual_max=float(drift.max()),
            residual_l2=float(np.sqrt(np.mean(drift ** 2))),
            tolerance=_CHECK_TOL["energy-drift"],
            details={"initial_energy": float(E[0])},
            series=(hist.times, E - E[0])))
    if "energy-current" in names:
        ser = momentum_equation_residual_rod(params, hist, grid, "energy")
        results.append(CheckResult(
            name="energy-current",
            anchor="local energy balance: d/ds(flux) matches d/dt(density)",
            residual_max=ser.max_abs, residual_l2=ser.l2,
            tolerance=_CHECK_TOL["energy-current"],
            series=(ser.times, ser.values)))
    if "translation-momentum" in names:
        ser = momentum_equation_residual_rod(params, hist, grid, "translation")
        results.append(CheckResult(
            name="translation-momentum",
            anchor="momentum balance of the rolling-compatible translation",
            residual_max=ser.max_abs, residual_l2=ser.l2,
            tolerance=_CHECK_TOL["translation-momentum"],
            series=(ser.times, ser.values)))

    _apply_overrides(results, cfg["checks"])
    return header, rows, results


def run_scenario(cfg: dict, output_dir, tolerance_scale: float = 1.0) -> int:
    """Run a validated config, write outputs, return the exit code."""
    outdir = Path(output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    if cfg["system"] == "benenti":
        header, rows, results = _run_benenti(cfg)
    else:
        header, rows, results = _run_rod(cfg)
    t_run = time.perf_counter() - t0

    _write_csv(outdir / "trajectory.csv", header, rows)
    mom_rows = []
    for r in results:
        if r.series is not None:
            times, values = r.series
            for t, v in zip(times, values):
                mom_rows.append([r.name, _fmt(t), _fmt(v)])
    _write_csv(outdir / "momentum.csv", ["check", "t", "residual"], mom_rows)

    records = [r.record(tolerance_scale) for r in results]
    all_passed = all(rec["passed"] for rec in records)
    report = {
        "version": __version__,
        "scenario": cfg.get("name"),
        "system": cfg["system"],
        "seed": cfg["seed"],
        "parameters": {"params": cfg["params"], "integration": cfg["integration"],
                       "initial": cfg["initial"],
                       "tolerance_scale": tolerance_scale},
        "checks": records,
        "all_passed": all_passed,
        "timings": {"run_s": t_run,
                    "total_s": time.perf_counter() - t0},
    }
    with open(outdir / "report.json", "w") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")

    for rec in records:
        status = "PASS" if rec["passed"] else "FAIL"
        print(f"[{status}] {rec['name']}: max residual {rec['residual_max']:.3e} "
              f"(tolerance {rec['tolerance']:.3e})")
    print(f"report written to {outdir / 'report.json'}")
    return 0 if all_passed else 2


def list_scenarios() -> str:
    lines = ["builtin scenarios:"]
    for name, cfg in SCENARIOS.items():
        checks = ", ".join(
            c if isinstance(c, str) else c["name"] for c in cfg["checks"])
        lines.append(f"  {name}")
        lines.append(f"      {_SCENARIO_BLURBS[name]}")
        lines.append(f"      checks: {checks}")
    lines.append("run one with: nhlab run <name>  (or a JSON config path)")
    return "\n".join(lines)


def _load_config(arg: str) -> dict:
    path = Path(arg)
    if path.exists():
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise _fail(f"config is not valid JSON: {exc}")
        return validate_config(raw)
    if arg in SCENARIOS:
        return validate_config(copy.deepcopy(SCENARIOS[arg]))
    raise _fail(f"config {arg!r} is neither a readable file nor a builtin scenario")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="nhlab",
        description="simulate constrained mechanics / rod dynamics and verify "
                    "momentum balance laws as numerical residuals")
    sub = parser.add_subparsers(dest="command", required=True)
    run_p = sub.add_parser("run", help="run a scenario config (path or builtin name)")
    run_p.add_argument("config", help="JSON config path or builtin scenario name")
    run_p.add_argument("--output-dir", default=None,
                       help="where to write trajectory.csv, momentum.csv, report.json")
    run_p.add_argument("--seed", type=int, default=None,
                       help="override the config's random seed")
    run_p.add_argument("--tolerance-scale", type=float, default=1.0,
                       help="multiply all check tolerances (exploratory runs)")
    sub.add_parser("list", help="list builtin scenario templates")

    args = parser.parse_args(argv)
    if args.command == "list":
        print(list_scenarios())
        return 0
    try:
        cfg = _load_config(args.config)
        if args.seed is not None:
            cfg["seed"] = args.seed
        outdir = args.output_dir or cfg.get("output_dir") or f"nhlab-out-{cfg['name']}"
        return run_scenario(cfg, outdir, tolerance_scale=args.tolerance_scale)
    except NhlabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
