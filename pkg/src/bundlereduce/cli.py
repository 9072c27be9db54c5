"""Command-line front end: ``bundlereduce report | verify | simulate``.

report    curvature report (every CurvatureReport field) at base points, checked
          against the scenario's oracle table
verify    identity suite at table points plus random on-surface points
simulate  Monte Carlo reduction relation: reduced pairing vs the group-averaged
          original pairing vs a closed-form oracle

Exit codes: 0 all checks pass, 1 a numeric check failed, 2 usage or
configuration error.  Output (JSON or CSV) never contains timings or other
run-dependent data, so identical configurations and seeds give
byte-identical files.  The output schema is documented in
``docs/output_schema.md``.
"""
from __future__ import annotations

import argparse
import contextlib
import csv
import dataclasses
import io
import json
import math
import sys
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import __version__
from .curvature import DEFAULT_EPS_F, decomposition_report
from .errors import ChartExitError, ConfigError, GeometryError
from .identities import fiber_independence, run_suite
from .scenarios import SCENARIO_NAMES, Scenario, UnknownScenarioError, make_scenario, parse_oracles
from .scenarios.experiments import experiment_for
from .stochastic import SDEConfig, verify_reduction_relation
from .tensor_core import FDConfig, curvature_fd_override

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

COMMANDS = ("report", "verify", "simulate")
#: tolerance of the report rows that are residuals rather than oracle comparisons
RESIDUAL_TOLERANCE = 1e-5
#: pass threshold of Monte Carlo comparisons, in standard errors
Z_THRESHOLD = 3.0
#: number of random group points of the fibre-independence row
FIBER_POINTS = 5


class UsageError(Exception):
    """Invalid command line or configuration (exit code 2)."""


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


@dataclass
class RunConfig:
    """Resolved settings of one command (flat JSON keys = field names)."""

    scenario: str = "flat_torus_u1"
    variant: Optional[str] = None
    command: Optional[str] = None
    points: Optional[list] = None
    eps_F: float = DEFAULT_EPS_F
    fd_step: Optional[float] = None
    tolerance: Optional[float] = None
    oracle_table: Optional[str] = None
    out: Optional[str] = None
    format: str = "json"
    # verify
    n_random: int = 20
    identities: Optional[list] = None
    # simulate
    dt: float = 1e-2
    t_final: float = 0.5
    n_paths: int = 10000
    seed: int = 0
    mu2kappa: Optional[float] = None  # None: the scenario's default (1 except on the spheres)
    kind: str = "reduced_sigma"
    start: Optional[list] = None
    test_function: Optional[str] = None
    n_nodes: int = 16
    batch_size: int = 8192

    def validate(self):
        if self.command is not None and self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command!r}; use one of {', '.join(COMMANDS)}")
        if self.format not in ("json", "csv"):
            raise UsageError("format must be 'json' or 'csv'")
        if self.eps_F not in (1.0, -1.0):
            raise UsageError("eps_F must be +1 or -1")
        for name in ("fd_step", "tolerance"):
            v = getattr(self, name)
            if v is not None and not (_is_number(v) and v > 0):
                raise UsageError(f"{name} must be a positive number")
        for name in ("dt", "t_final", "mu2kappa"):
            v = getattr(self, name)
            if name == "mu2kappa" and v is None:
                continue
            if not (_is_number(v) and v > 0):
                raise UsageError(f"{name} must be a positive number, got {v!r}")
        for name in ("n_paths", "n_nodes", "batch_size", "n_random"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int) or v < (0 if name == "n_random" else 1):
                raise UsageError(f"{name} must be a positive integer, got {v!r}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or self.seed < 0:
            raise UsageError("seed must be a non-negative integer")
        if self.kind not in ("reduced_sigma", "reduced_M"):
            raise UsageError("kind must be 'reduced_sigma' or 'reduced_M'")
        steps = self.t_final / self.dt
        if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
            raise UsageError(f"t_final = {self.t_final} is not a whole number of steps dt = {self.dt}")
        return self

    @property
    def n_steps(self) -> int:
        return int(round(self.t_final / self.dt))


_CONFIG_KEYS = tuple(f.name for f in dataclasses.fields(RunConfig))


def _is_number(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def load_config(path: str) -> dict:
    """Read a flat JSON configuration; unknown keys are rejected."""
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise UsageError(f"config {path} must be a JSON object")
    unknown = sorted(set(doc) - set(_CONFIG_KEYS))
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(unknown)}")
    nested = [k for k, v in doc.items() if isinstance(v, dict)]
    if nested:
        raise UsageError(f"config must be flat; nested objects under: {', '.join(nested)}")
    return doc


def parse_points(text: str) -> list:
    """``"a,b;c,d"`` -> ``[[a, b], [c, d]]`` (base coordinates)."""
    pts = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            pts.append([])
            continue
        try:
            pts.append([float(v) for v in chunk.split(",")])
        except ValueError as exc:
            raise UsageError(f"cannot parse point {chunk!r}") from exc
    return pts


def _parse_scenario(text: str):
    name, _, variant = text.partition(":")
    return name, (variant or None)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bundlereduce", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("command", nargs="?", choices=COMMANDS, help="verb (may instead come from --config)")
    p.add_argument("--scenario", help=f"NAME[:VARIANT]; names: {', '.join(SCENARIO_NAMES)}")
    p.add_argument("--config", help="flat JSON configuration file (command-line flags override it)")
    p.add_argument("--points", help="base points 'a,b;c,d' (default: the scenario table points)")
    p.add_argument("--eps-f", type=float, dest="eps_F", help="sign of the F^2/4 + Jtilde + |j|^2 block (+1 or -1)")
    p.add_argument("--dt", type=float, help="time step of the diffusions")
    p.add_argument("--t-final", type=float, dest="t_final", help="final time (multiple of dt)")
    p.add_argument("--paths", type=int, dest="n_paths", help="number of Monte Carlo paths")
    p.add_argument("--seed", type=int, help="random seed")
    p.add_argument("--mu2kappa", type=float, help="diffusion scale mu^2 kappa")
    p.add_argument("--kind", choices=("reduced_sigma", "reduced_M"), help="reduced-side normalisation")
    p.add_argument("--start", help="start base point 'a,b' (simulate)")
    p.add_argument("--test-function", dest="test_function", help="test function name (simulate)")
    p.add_argument("--nodes", type=int, dest="n_nodes", help="group quadrature nodes (simulate)")
    p.add_argument("--n-random", type=int, dest="n_random", help="random on-surface points (verify)")
    p.add_argument("--tol", type=float, dest="tolerance", help="override every tolerance")
    p.add_argument("--fd-step", type=float, dest="fd_step",
                   help="finite-difference step of composite derivatives (Richardson on)")
    p.add_argument("--oracles", dest="oracle_table", help="oracle table JSON replacing the packaged one")
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--format", choices=("json", "csv"), help="output format (default json)")
    return p


def resolve_config(args: argparse.Namespace) -> RunConfig:
    values = {}
    if args.config:
        values.update(load_config(args.config))
    for key in ("eps_F", "dt", "t_final", "n_paths", "seed", "mu2kappa", "kind", "test_function",
                "n_nodes", "n_random", "tolerance", "fd_step", "oracle_table", "out", "format"):
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    if args.scenario:
        values["scenario"], values["variant"] = _parse_scenario(args.scenario)
    elif isinstance(values.get("scenario"), str) and ":" in values["scenario"]:
        values["scenario"], values["variant"] = _parse_scenario(values["scenario"])
    if args.points is not None:
        values["points"] = parse_points(args.points)
    if args.start is not None:
        values["start"] = parse_points(args.start)[0]
    if args.command is not None:
        values["command"] = args.command
    if values.get("command") not in COMMANDS:
        raise UsageError(f"a command is required: one of {', '.join(COMMANDS)}")
    for k in ("eps_F", "dt", "t_final", "mu2kappa", "tolerance", "fd_step"):
        if isinstance(values.get(k), int) and not isinstance(values.get(k), bool):
            values[k] = float(values[k])
    try:
        cfg = RunConfig(**values)
    except TypeError as exc:
        raise UsageError(str(exc)) from exc
    return cfg.validate()


def load_scenario(cfg: RunConfig) -> Scenario:
    try:
        sc = make_scenario(cfg.scenario, cfg.variant)
    except (UnknownScenarioError, ValueError) as exc:
        raise UsageError(f"scenario: {exc}") from exc
    if cfg.oracle_table:
        try:
            with open(cfg.oracle_table, encoding="utf-8") as fh:
                doc = json.load(fh)
            entries, points, eps_F = parse_oracles(doc, sc.variant, source=cfg.oracle_table)
        except (OSError, ValueError, TypeError, KeyError) as exc:
            raise UsageError(f"oracle table: {exc}") from exc
        if doc.get("scenario") not in (None, sc.name):
            raise UsageError(f"oracle table {cfg.oracle_table} belongs to {doc.get('scenario')!r}")
        sc = dataclasses.replace(sc, oracles=entries, points=points, eps_F=eps_F)
    return sc


def _points(cfg: RunConfig, sc: Scenario):
    pts = cfg.points if cfg.points is not None else [list(p) for p in sc.points]
    dim = len(sc.points[0]) if sc.points else None
    for p in pts:
        if dim is not None and len(p) != dim:
            raise UsageError(f"{sc.name} base points have {dim} coordinates, got {p}")
    return pts


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

_REPORT_ORACLE = {"R_P_direct": "R_P", "R_P_nonholonomic": "R_P", "HR": "HR", "R_G": "R_G", "Fsq": "Fsq",
                  "jsq": "jsq", "Jtilde_coords": "Jtilde", "Jtilde_geom": "Jtilde"}


def _row(sc, point, quantity, value, oracle=None, residual=None, tolerance=None, provenance="", **extra):
    passed = None if tolerance is None or residual is None else bool(abs(residual) <= tolerance)
    row = {"scenario": sc.name, "variant": sc.variant, "point": [float(v) for v in point], "quantity": quantity,
           "value": value, "oracle": oracle, "residual": residual, "tolerance": tolerance, "pass": passed,
           "provenance": provenance}
    row.update(extra)
    return row


def cmd_report(cfg: RunConfig, sc: Scenario) -> list:
    rows = []
    tol_override = cfg.tolerance
    for x in _points(cfg, sc):
        Qs = sc.surface_point(x)
        r = decomposition_report(sc.bundle, Qs, cfg.eps_F)
        d = r.to_dict()
        fields = list(r.SCALARS) + ["R_P_horizontal_block", "R_P_vertical_block", "sign_convention"]
        for q in fields:
            val = float(d[q])
            if q in ("residual_decomposition", "residual_Jroutes"):
                tol = tol_override if tol_override is not None else RESIDUAL_TOLERANCE
                rows.append(_row(sc, x, q, val, 0.0, val, tol,
                                 f"computed; eps_F = {cfg.eps_F:+g}" if q == "residual_decomposition" else "computed"))
                continue
            e = sc.oracle(_REPORT_ORACLE[q], x) if q in _REPORT_ORACLE else None
            if e is None:
                rows.append(_row(sc, x, q, val, provenance="computed; no oracle"))
            else:
                tol = tol_override if tol_override is not None else e.tolerance
                rows.append(_row(sc, x, q, val, e.value, val - e.value, tol, e.provenance))
        for vec in ("j_II", "j_I"):
            for a, val in enumerate(d[vec]):
                q = f"{vec}[{a}]"
                e = sc.oracle(q, x)
                if e is None:
                    rows.append(_row(sc, x, q, float(val), provenance="computed; no oracle"))
                else:
                    tol = tol_override if tol_override is not None else e.tolerance
                    rows.append(_row(sc, x, q, float(val), e.value, float(val) - e.value, tol, e.provenance))
    return rows


def cmd_verify(cfg: RunConfig, sc: Scenario) -> list:
    b = sc.bundle
    table_pts = _points(cfg, sc)
    Qs = [sc.surface_point(x) for x in table_pts]
    if cfg.n_random:
        Qs += list(sc.sample(np.random.default_rng(cfg.seed), cfg.n_random))
    Qs = np.asarray(Qs, dtype=float).reshape(-1, b.n_p)
    rows = []
    try:
        results = run_suite(b, Qs, cfg.identities, cfg.eps_F, cfg.tolerance)
    except KeyError as exc:
        raise UsageError(str(exc.args[0])) from exc
    for res in results:
        prov = "identity suite"
        if res.name == "decomposition":
            prov = f"identity suite; eps_F = {cfg.eps_F:+g}"
        rows.append(_row(sc, res.worst_point, res.name, res.max_residual, 0.0, res.max_residual, res.tolerance,
                         prov, group=res.group, n_points=res.n_points))
    # fibre independence at the first table point
    chart = b.group_chart
    if cfg.identities is None and chart is not None and chart.action is not None:
        rng = np.random.default_rng(cfg.seed + 1)
        a = rng.uniform(-1.0, 1.0, size=(FIBER_POINTS, b.n_g))
        res = fiber_independence(b, Qs[0], a)
        tol = cfg.tolerance if cfg.tolerance is not None else 1e-5
        worst = float(res.max())
        rows.append(_row(sc, Qs[0], "fiber_independence", worst, 0.0, worst, tol,
                         "R_P_direct at random group points vs R_P_nonholonomic at a = e",
                         group="scalar", n_points=FIBER_POINTS))
    # oracle table against the report, in units of each entry's tolerance
    if cfg.identities is None:
        worst, worst_x = 0.0, table_pts[0] if table_pts else []
        for x in table_pts:
            d = decomposition_report(b, sc.surface_point(x), cfg.eps_F).to_dict()
            for q, key in (("R_P", "R_P_direct"), ("HR", "HR"), ("R_G", "R_G"), ("Fsq", "Fsq"),
                           ("jsq", "jsq"), ("Jtilde", "Jtilde_coords")):
                e = sc.oracle(q, x)
                if e is not None:
                    dev = abs(d[key] - e.value) / e.tolerance
                    if dev > worst:
                        worst, worst_x = dev, x
        tol = 1.0
        rows.append(_row(sc, worst_x, "oracle_table", worst, 0.0, worst, tol,
                         "worst |report - oracle| in units of the entry tolerance", group="scalar",
                         n_points=len(table_pts)))
    return rows


def cmd_simulate(cfg: RunConfig, sc: Scenario) -> list:
    try:
        exp = experiment_for(sc.name)
    except KeyError as exc:
        raise UsageError(str(exc.args[0])) from exc
    test = cfg.test_function or exp.default_test
    if test not in exp.test_functions:
        raise UsageError(f"unknown test function {test!r} for {sc.name}; valid: {', '.join(exp.test_functions)}")
    x0 = list(cfg.start) if cfg.start is not None else list(exp.start)
    if len(x0) != len(exp.start):
        raise UsageError(f"{sc.name} start points have {len(exp.start)} coordinates")
    m2k = cfg.mu2kappa if cfg.mu2kappa is not None else exp.mu2kappa
    try:
        sde = SDEConfig(mu2kappa=m2k, dt=cfg.dt, n_steps=cfg.n_steps, n_paths=cfg.n_paths,
                        rng_seed=cfg.seed, batch_size=cfg.batch_size)
    except ConfigError as exc:
        raise UsageError(str(exc)) from exc
    f = exp.test_functions[test]
    variance = m2k * cfg.n_steps * cfg.dt
    oracle = exp.oracle_value(cfg.kind, test, x0, variance)
    chk = verify_reduction_relation(sc.bundle, sde, sc.surface_point(x0), f, n_nodes=cfg.n_nodes,
                                    oracle=oracle, kind=cfg.kind)
    prov = f"closed form: {exp.notes}" if oracle is not None else "no closed form"
    common = dict(test_function=test, kind=cfg.kind, seed=cfg.seed, t_final=cfg.n_steps * cfg.dt, dt=cfg.dt,
                  mu2kappa=m2k)
    rows = []
    for label, est in (("pairing_" + cfg.kind, chk.reduced), ("pairing_group_averaged_original", chk.group_averaged)):
        resid = None if oracle is None else est.value - oracle
        z = None if oracle is None else float(est.z_score(oracle))
        rows.append(_row(sc, x0, label, est.value, oracle, resid, None if oracle is None else Z_THRESHOLD, prov,
                         standard_error=est.standard_error, z=z, n_paths=est.n_paths,
                         n_truncated=est.n_truncated, n_excluded=est.n_excluded, **common))
        if oracle is not None:
            rows[-1]["pass"] = bool(abs(z) <= Z_THRESHOLD)
    rows.append(_row(sc, x0, "reduction_relation", chk.residual, 0.0, chk.residual, Z_THRESHOLD,
                     "reduced pairing minus group-averaged original pairing",
                     standard_error=chk.sigma, z=float(chk.z), n_paths=cfg.n_paths,
                     n_truncated=chk.reduced.n_truncated + chk.group_averaged.n_truncated,
                     n_excluded=chk.reduced.n_excluded + chk.group_averaged.n_excluded, **common))
    rows[-1]["pass"] = bool(abs(chk.z) <= Z_THRESHOLD)
    for k, v in sorted(chk.reduced.variants.items()):
        if k.endswith("_se") or k.endswith("_excluded"):
            continue
        se = chk.reduced.variants.get(k + "_se")
        rows.append(_row(sc, x0, f"variant_{k}", float(v), provenance="same paths, alternative normalisation",
                         standard_error=se, z=None, n_paths=chk.reduced.n_paths,
                         n_truncated=chk.reduced.n_truncated,
                         n_excluded=int(chk.reduced.variants.get(k + "_excluded", 0)), **common))
    return rows


_COMMANDS = {"report": cmd_report, "verify": cmd_verify, "simulate": cmd_simulate}


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return format(v, ".17g")
    if isinstance(v, (list, tuple)):
        return ";".join(_fmt(float(x)) for x in v)
    return str(v)


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return v


def render(cfg: RunConfig, sc: Scenario, rows: list, exit_code: int) -> str:
    n_checked = sum(r["pass"] is not None for r in rows)
    n_failed = sum(r["pass"] is False for r in rows)
    if cfg.format == "csv":
        cols = []
        for r in rows:
            cols += [k for k in r if k not in cols]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([_fmt(r.get(c)) for c in cols])
        return buf.getvalue()
    config = {k: v for k, v in dataclasses.asdict(cfg).items() if k not in ("out", "format")}
    config["variant"] = sc.variant
    doc = {"bundlereduce": __version__, "command": cfg.command, "scenario": sc.name, "variant": sc.variant,
           "config": config,
           "rows": [{k: _jsonable(v) for k, v in r.items()} for r in rows],
           "summary": {"n_rows": len(rows), "n_checked": n_checked, "n_failed": n_failed, "exit_code": exit_code}}
    return json.dumps(doc, indent=1) + "\n"


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage errors, 0 on --help
        return int(exc.code or 0)
    try:
        cfg = resolve_config(args)
        sc = load_scenario(cfg)
        with curvature_fd_override(FDConfig(step=cfg.fd_step, richardson=True)) if cfg.fd_step else contextlib.nullcontext():
            rows = _COMMANDS[cfg.command](cfg, sc)
    except UsageError as exc:
        print(f"bundlereduce: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ChartExitError as exc:
        print(f"bundlereduce: numeric failure: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except GeometryError as exc:
        print(f"bundlereduce: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    code = EXIT_FAIL if any(r["pass"] is False for r in rows) else EXIT_OK
    text = render(cfg, sc, rows, code)
    if cfg.out:
        try:
            with open(cfg.out, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            print(f"bundlereduce: error: cannot write {cfg.out}: {exc}", file=sys.stderr)
            return EXIT_USAGE
    else:
        sys.stdout.write(text)
    n_failed = sum(r["pass"] is False for r in rows)
    print(f"bundlereduce {cfg.command} {sc.name}[{sc.variant}]: {len(rows)} rows, {n_failed} failed -> exit {code}",
          file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
