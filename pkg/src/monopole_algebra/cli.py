"""Command-line entry point: ``monopole-algebra {verify,scan,spectrum,list-suites}``.

Settings come from defaults, then an optional ``--config`` file (INI-style
``[section]`` headers with ``key = value`` lines), then command-line flags.
Exit codes: 0 all checks pass, 1 a check failed, 2 bad usage or configuration.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import algebra_checks as ac
from . import holonomy, quantization
from .fields import test_function
from .monopole import PRESETS, PhysicalParams

log = logging.getLogger(__name__)

SEED_ENV = "MONOPOLE_ALGEBRA_SEED"
DEFAULT_SEED = 2024
FORMATS = ("json", "csv", "text")
FILE_NAMES = {"json": "report.json", "csv": "scan.csv", "text": "report.txt"}
SCHEMA_PATH = Path(__file__).with_name("report.schema.json")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    suites: list = field(default_factory=lambda: ["all"])
    params: PhysicalParams = field(default_factory=PhysicalParams)
    mu: float | None = None
    gauges: tuple = ac.DEFAULT_GAUGES
    grid: ac.GridSpec = field(default_factory=ac.GridSpec)
    delta_z: tuple = holonomy.DEFAULT_DELTA_Z
    series_order: int = holonomy.DEFAULT_SERIES_ORDER
    functions: tuple = holonomy.DEFAULT_SCAN_FUNCTIONS
    min_slope: float = holonomy.DEFAULT_MIN_SLOPE
    phase_tolerance: float = holonomy.DEFAULT_PHASE_TOL
    m_range: tuple = (-3, 3)
    output: str | None = None
    formats: tuple | None = None
    seed: int = DEFAULT_SEED
    tolerance: float | None = None
    mutation: ac.Mutation | None = None


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

_KEYS = {
    "run": {"suites", "seed", "tolerance", "formats", "output", "mutate"},
    "params": {"preset", "hbar", "c", "q", "g", "mu", "r", "gauge"},
    "grid": {"n_theta", "n_phi", "margin", "jitter"},
    "scan": {"delta_z", "series_order", "functions", "min_slope", "phase_tolerance"},
    "spectrum": {"m_min", "m_max"},
}


def _split(text):
    return [t.strip() for t in text.replace(";", ",").split(",") if t.strip()]


def _num(section, key, text, kind=float):
    try:
        val = kind(text)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: cannot parse {text!r} as {kind.__name__}") from None
    if kind is float and not math.isfinite(val):
        raise ConfigError(f"[{section}] {key}: must be finite")
    return val


def _gauges(text):
    vals = tuple(_split(text)) if text not in ("both", "all") else ac.DEFAULT_GAUGES
    bad = [g for g in vals if g not in ac.DEFAULT_GAUGES]
    if bad or not vals:
        raise ConfigError(f"gauge must be north, south or both, got {text!r}")
    return vals


def _formats(values):
    vals = tuple(dict.fromkeys(values))
    bad = [f for f in vals if f not in FORMATS]
    if bad:
        raise ConfigError(f"unknown format(s): {', '.join(bad)}")
    return vals


def read_config(path) -> dict:
    """Parse a config file into ``{section: {key: text}}``, rejecting unknown keys."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from None
    out = {}
    for section in parser.sections():
        if section not in _KEYS:
            raise ConfigError(f"unknown config section [{section}]")
        items = dict(parser.items(section))
        unknown = set(items) - _KEYS[section]
        if unknown:
            raise ConfigError(f"unknown key(s) in [{section}]: {', '.join(sorted(unknown))}")
        out[section] = items
    return out


def _params_from(sec: dict, mu_flag):
    if "preset" in sec and sec["preset"] not in PRESETS:
        raise ConfigError(f"unknown preset {sec['preset']!r}")
    base = PRESETS[sec["preset"]] if "preset" in sec else PhysicalParams()
    vals = {k: _num("params", k, sec[k]) for k in ("hbar", "c", "q", "g", "r") if k in sec}
    try:
        params = replace(base, **vals)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    mu = mu_flag if mu_flag is not None else (_num("params", "mu", sec["mu"]) if "mu" in sec else None)
    if mu is not None:
        try:
            params = params.with_mu(mu)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    return params, mu


def build_config(args) -> RunConfig:
    file_cfg = read_config(args.config) if getattr(args, "config", None) else {}
    run = file_cfg.get("run", {})
    cfg = RunConfig()

    cfg.params, cfg.mu = _params_from(file_cfg.get("params", {}), getattr(args, "mu", None))
    if getattr(args, "gauge", None):
        cfg.gauges = (args.gauge,)
    elif "gauge" in file_cfg.get("params", {}):
        cfg.gauges = _gauges(file_cfg["params"]["gauge"])

    suites = getattr(args, "suite", None) or (_split(run["suites"]) if "suites" in run else ["all"])
    try:
        ac.get_suites(suites)
    except ac.SuiteError as exc:
        raise ConfigError(str(exc)) from None
    cfg.suites = suites

    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    elif "seed" in run:
        cfg.seed = _num("run", "seed", run["seed"], int)
    elif os.environ.get(SEED_ENV):
        cfg.seed = _num("env", SEED_ENV, os.environ[SEED_ENV], int)

    tol = getattr(args, "tolerance", None)
    if tol is None and "tolerance" in run:
        tol = _num("run", "tolerance", run["tolerance"])
    if tol is not None and not tol > 0:
        raise ConfigError("tolerance must be positive")
    cfg.tolerance = tol

    if getattr(args, "format", None):
        cfg.formats = _formats(args.format)
    elif "formats" in run:
        cfg.formats = _formats(_split(run["formats"]))
    cfg.output = getattr(args, "out", None) or run.get("output")

    mut = getattr(args, "mutate", None) or run.get("mutate")
    if mut:
        try:
            cfg.mutation = ac.Mutation.parse(mut)
        except (ac.SuiteError, ValueError) as exc:
            raise ConfigError(str(exc)) from None

    g = file_cfg.get("grid", {})
    cfg.grid = ac.GridSpec(
        n_theta=_num("grid", "n_theta", g.get("n_theta", "20"), int),
        n_phi=_num("grid", "n_phi", g.get("n_phi", "40"), int),
        theta_margin=_num("grid", "margin", g.get("margin", "0.15")),
        jitter=_num("grid", "jitter", g.get("jitter", "0")),
    )
    if cfg.grid.n_theta < 2 or cfg.grid.n_phi < 2 or not 0 < cfg.grid.theta_margin < math.pi / 2:
        raise ConfigError("grid needs n_theta, n_phi >= 2 and 0 < margin < pi/2")

    s = file_cfg.get("scan", {})
    if "delta_z" in s:
        cfg.delta_z = tuple(_num("scan", "delta_z", t) for t in _split(s["delta_z"]))
    if "series_order" in s:
        cfg.series_order = _num("scan", "series_order", s["series_order"], int)
    if "functions" in s:
        cfg.functions = tuple(_split(s["functions"]))
    if "min_slope" in s:
        cfg.min_slope = _num("scan", "min_slope", s["min_slope"])
    if "phase_tolerance" in s:
        cfg.phase_tolerance = _num("scan", "phase_tolerance", s["phase_tolerance"])

    sp = file_cfg.get("spectrum", {})
    lo = getattr(args, "m_min", None)
    hi = getattr(args, "m_max", None)
    lo = lo if lo is not None else _num("spectrum", "m_min", sp.get("m_min", "-3"), int)
    hi = hi if hi is not None else _num("spectrum", "m_max", sp.get("m_max", "3"), int)
    if hi < lo:
        raise ConfigError("m_max must not be below m_min")
    cfg.m_range = (lo, hi)
    return cfg


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def fmt_float(x) -> str:
    """Shortest text that round-trips to the same double."""
    return repr(float(x))


def to_json(obj) -> str:
    """Deterministic JSON: sorted keys, round-trip floats, non-finite as null (not ``Infinity``)."""
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return fmt_float(obj) if math.isfinite(obj) else "null"
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, dict):
        items = sorted(obj.items())
        return "{" + ", ".join(f"{json.dumps(str(k))}: {to_json(v)}" for k, v in items) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(to_json(v) for v in obj) + "]"
    if hasattr(obj, "item"):
        return to_json(obj.item())
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def short(x) -> str:
    """Human-readable float for text output."""
    return format(float(x), ".12g")


def load_schema() -> dict:
    return json.loads(SCHEMA_PATH.read_text(encoding="utf-8"))


def _config_dict(cfg: RunConfig) -> dict:
    return {
        "suites": list(cfg.suites), "params": cfg.params.as_dict(), "mu": cfg.mu, "gauges": list(cfg.gauges),
        "grid": {"n_theta": cfg.grid.n_theta, "n_phi": cfg.grid.n_phi, "margin": cfg.grid.theta_margin,
                 "jitter": cfg.grid.jitter},
        "seed": cfg.seed, "tolerance": cfg.tolerance,
        "mutation": None if cfg.mutation is None else
        {"target": cfg.mutation.target, "slot": cfg.mutation.slot, "eps": cfg.mutation.eps},
    }


def _write_outputs(cfg: RunConfig, texts: dict, default_formats):
    formats = cfg.formats or default_formats
    if not cfg.output:
        return []
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for f in formats:
        if f in texts:
            p = out / FILE_NAMES[f]
            p.write_text(texts[f], encoding="utf-8")
            written.append(p)
    return written


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_list_suites(cfg: RunConfig, stdout) -> int:
    for s in ac.builtin_suites():
        tags = sorted({i.paper_eq for i in s.identities})
        stdout.write(f"{s.name:<18} {len(s.identities):>3} identities  {s.description}  [{'; '.join(tags)}]\n")
    return EXIT_OK


def _verify_text(report: ac.Report, qchecks, ok) -> str:
    lines = []
    for e in report.entries:
        d = e.to_dict()
        tag = "PASS" if d["pass"] else "FAIL"
        where = f"mu={short(d['params'].get('mu', 0.0))}" + (f" {d['gauge']}" if d["gauge"] else "")
        res = short(d["residual"]) if math.isfinite(d["residual"]) else "inf"
        extra = f"  error: {d['error']}" if d["error"] else ""
        lines.append(f"{tag} {d['suite']}: {d['label']} ({d['paper_eq']}) [{where}] "
                     f"residual={res} tol={short(d['tolerance'])}{extra}")
    for q in qchecks:
        tag = "PASS" if q["pass"] else "FAIL"
        extra = f"  {q['detail']}" if q["detail"] else ""
        lines.append(f"{tag} quantization: {q['label']} ({q['paper_eq']}) "
                     f"residual={short(q['residual'])} tol={short(q['tolerance'])}{extra}")
    n = len(report.entries) + len(qchecks)
    n_bad = report.n_failed + sum(not q["pass"] for q in qchecks)
    lines.append(f"{'OK' if ok else 'FAILED'}: {n - n_bad}/{n} checks passed")
    return "\n".join(lines) + "\n"


def cmd_verify(cfg: RunConfig, stdout) -> int:
    suites = ac.get_suites(cfg.suites)
    mus = [cfg.mu] if cfg.mu is not None else None
    report = ac.run_suites(suites, mus=mus, gauges=cfg.gauges, tolerance=cfg.tolerance, grid=cfg.grid,
                           mutation=cfg.mutation, seed=cfg.seed, base=cfg.params)
    qchecks = quantization.self_checks(cfg.params, mus or ac.DEFAULT_MU_SWEEP, cfg.gauges)
    ok = report.passed and all(q["pass"] for q in qchecks)
    n = len(report.entries) + len(qchecks)
    doc = {
        "tool": "monopole-algebra", "command": "verify", "config": _config_dict(cfg),
        "identities": [e.to_dict() for e in report.entries], "quantization": qchecks,
        "summary": {"n_checks": n, "n_failed": n - sum(e.passed for e in report.entries)
                    - sum(q["pass"] for q in qchecks), "pass": ok},
    }
    text = _verify_text(report, qchecks, ok)
    _write_outputs(cfg, {"json": to_json(doc) + "\n", "text": text}, ("json", "text"))
    stdout.write(text)
    return EXIT_OK if ok else EXIT_FAIL


SCAN_COLUMNS = ("delta_z", "delta_omega", "max_residual", "extracted_phase", "predicted_phase", "phase_error")


def scan_csv(result: holonomy.ScanResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SCAN_COLUMNS)
    for row in result.rows:
        w.writerow([fmt_float(getattr(row, c)) for c in SCAN_COLUMNS])
    w.writerow(["slope", fmt_float(result.slope), "extrapolated_ratio", fmt_float(result.extrapolated_ratio),
                "extrapolated_error", fmt_float(result.extrapolated_error)])
    return buf.getvalue()


def cmd_scan(cfg: RunConfig, stdout) -> int:
    # loops sit at the pole of the chosen patch; north unless exactly one gauge was asked for
    gauge = cfg.gauges[0] if len(cfg.gauges) == 1 else "north"
    params = cfg.params if cfg.mu is not None else cfg.params.with_mu(0.5 * cfg.params.hbar)
    pole = (0.0, 0.0, 1.0) if gauge == "north" else (0.0, 0.0, -1.0)
    axes = holonomy.rotation_about(pole) if gauge == "south" else holonomy.LoopSpec.axes
    try:
        specs = [holonomy.LoopSpec(dz, params, gauge, cfg.series_order, axes) for dz in cfg.delta_z]
        functions = [test_function(name, seed=cfg.seed) for name in cfg.functions]
        result = holonomy.convergence_scan(specs, functions, holonomy.points_near(pole, params.r))
    except (ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from None
    tol = cfg.tolerance if cfg.tolerance is not None else cfg.phase_tolerance
    ok = result.passes(cfg.min_slope, tol)
    if params.mu == 0:
        ok = ok and all(abs(r.extracted_phase) <= holonomy.SERIES_TOL for r in result.rows)
    doc = {
        "tool": "monopole-algebra", "command": "scan", "config": _config_dict(cfg),
        "scan": {"rows": [{c: getattr(r, c) for c in SCAN_COLUMNS} for r in result.rows], "slope": result.slope,
                 "extrapolated_ratio": result.extrapolated_ratio, "extrapolated_error": result.extrapolated_error,
                 "expected_ratio": result.expected_ratio, "warnings": list(result.warnings),
                 "min_slope": cfg.min_slope, "phase_tolerance": tol, "gauge": gauge},
        "summary": {"n_checks": 1, "n_failed": 0 if ok else 1, "pass": ok},
    }
    csv_text = scan_csv(result)
    lines = [csv_text.rstrip("\n"),
             f"slope {short(result.slope)} (minimum {short(cfg.min_slope)}); "
             f"phase/dOmega -> {short(result.extrapolated_ratio)} "
             f"(expected {short(result.expected_ratio)}, error {short(result.extrapolated_error)})"]
    lines += [f"warning: {w}" for w in result.warnings]
    lines.append("OK" if ok else "FAILED")
    text = "\n".join(lines) + "\n"
    _write_outputs(cfg, {"csv": csv_text, "json": to_json(doc) + "\n", "text": text}, ("csv", "json", "text"))
    stdout.write(text)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_spectrum(cfg: RunConfig, stdout) -> int:
    p = cfg.params if cfg.mu is not None else cfg.params.with_mu(0.5 * cfg.params.hbar)
    north = quantization.lz_spectrum(p, "north", cfg.m_range)
    south = quantization.lz_spectrum(p, "south", cfg.m_range)
    verdict = quantization.dirac_check(p.mu, p.hbar)
    ms = list(range(cfg.m_range[0], cfg.m_range[1] + 1))
    table = quantization.flux_table(p, ms) if p.q != 0 else []
    lines = [f"mu = {short(p.mu)}  hbar = {short(p.hbar)}",
             "north L_z: " + " ".join(short(v) for v in north.eigenvalues),
             "south L_z: " + " ".join(short(v) for v in south.eigenvalues),
             f"Dirac condition: {verdict.describe()}"]
    if table:
        lines.append(f"flux quantum phi_0 = {short(quantization.flux_quantum(p))}")
        lines.append("m  total_flux  total_flux/phi_0")
        lines += [f"{row['m']}  {short(row['flux'])}  {short(row['flux_over_phi0'])}" for row in table]
    text = "\n".join(lines) + "\n"
    doc = {
        "tool": "monopole-algebra", "command": "spectrum", "config": _config_dict(cfg),
        "spectrum": {"m": ms, "north": north.eigenvalues, "south": south.eigenvalues,
                     "allowed": verdict.allowed, "n": verdict.n, "defect": verdict.defect,
                     "verdict": verdict.describe(), "flux": table},
        "summary": {"n_checks": 0, "n_failed": 0, "pass": True},
    }
    _write_outputs(cfg, {"json": to_json(doc) + "\n", "text": text}, ("json", "text"))
    stdout.write(text)
    return EXIT_OK


COMMANDS = {"verify": cmd_verify, "scan": cmd_scan, "spectrum": cmd_spectrum, "list-suites": cmd_list_suites}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="key = value config file with [section] headers")
    common.add_argument("--suite", action="append", metavar="NAME", help="suite to run (repeatable, or 'all')")
    common.add_argument("--mu", type=float, help="monopole strength mu = q g / c")
    common.add_argument("--gauge", choices=ac.DEFAULT_GAUGES, help="restrict to one gauge patch")
    common.add_argument("--out", metavar="DIR", help="directory for report files")
    common.add_argument("--format", action="append", choices=FORMATS, help="output format (repeatable)")
    common.add_argument("--seed", type=int, help=f"random seed (fallback: ${SEED_ENV})")
    common.add_argument("--tolerance", type=float, help="override every check tolerance")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="monopole-algebra", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    v = sub.add_parser("verify", parents=[common], help="run identity suites and quantization checks")
    v.add_argument("--mutate", metavar="LABEL[:SLOT[:EPS]]",
                   help="perturb one operator coefficient to confirm the checks can fail")
    sub.add_parser("scan", parents=[common], help="loop holonomy convergence scan")
    s = sub.add_parser("spectrum", parents=[common], help="L_z spectra, Dirac condition and flux quanta")
    s.add_argument("--m-min", type=int)
    s.add_argument("--m-max", type=int)
    sub.add_parser("list-suites", parents=[common], help="list built-in identity suites")
    return parser


def main(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.ERROR, stream=stderr)
    try:
        cfg = build_config(args)
        return COMMANDS[args.command](cfg, stdout)
    except ConfigError as exc:
        stderr.write(f"monopole-algebra: configuration error: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
