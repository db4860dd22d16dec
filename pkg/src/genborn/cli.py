"""Command-line front end.

Every subcommand reads the same flat JSON config schema; command-line flags
override values from ``--config``, which override the defaults. Reports go to
stdout as JSON (default) or CSV with round-trip float precision.

Exit codes: 0 success, 2 configuration error, 3 computation error.
"""

from __future__ import annotations

import csv
import io
import json
import math
import sys
import warnings
from dataclasses import dataclass
from pathlib import Path

import click
import numpy as np

from . import deviation as dev
from . import experiment as exp
from .errors import ConfigError, GenbornError, InvalidParameter
from .numerics import DEFAULT_TOL, Interval, Tolerance
from .states import Gaussian, construct, load_tabulated

EXIT_CONFIG = 2
EXIT_COMPUTE = 3

DEFAULTS = {
    "state": None,
    "interval": None,
    "alpha": 0.0,
    "abs_tol": DEFAULT_TOL.abs_tol,
    "rel_tol": DEFAULT_TOL.rel_tol,
    "max_subdivisions": DEFAULT_TOL.max_subdivisions,
    "output": "json",
    "seed": 0,
    "n": None,
    "lengths": None,
    "mode": "length-symmetric",
    "significance": 0.05,
    "power": 0.8,
    "m": None,
    "s": None,
    "workers": 1,
    "grid_points": exp.DEFAULT_GRID_POINTS,
}


@dataclass(frozen=True)
class RunConfig:
    state: object
    interval: Interval | None
    alpha: float
    tol: Tolerance
    output: str
    seed: int
    n: int | None
    lengths: tuple | None
    mode: str
    significance: float
    power: float
    m: int | None
    s: int | None
    workers: int
    grid_points: int


def parse_bound(text, field="interval"):
    if isinstance(text, (int, float)) and not isinstance(text, bool):
        return float(text)
    t = str(text).strip().lower()
    if t in ("inf", "+inf", "infinity"):
        return math.inf
    if t in ("-inf", "-infinity"):
        return -math.inf
    try:
        v = float(t)
    except ValueError:
        raise ConfigError(f"field '{field}': cannot parse bound {text!r}") from None
    if math.isnan(v):
        raise ConfigError(f"field '{field}': NaN is not a valid bound")
    return v


def parse_interval(value) -> Interval:
    if isinstance(value, str):
        parts = value.split(",")
    elif isinstance(value, (list, tuple)):
        parts = list(value)
    elif isinstance(value, dict) and set(value) == {"lo", "hi"}:
        parts = [value["lo"], value["hi"]]
    else:
        raise ConfigError(f"field 'interval': expected 'lo,hi', got {value!r}")
    if len(parts) != 2:
        raise ConfigError(f"field 'interval': expected two bounds, got {value!r}")
    lo, hi = (parse_bound(p) for p in parts)
    if not lo < hi:
        raise ConfigError(f"field 'interval': lo must be < hi, got [{lo}, {hi}]")
    return Interval(lo, hi)


def parse_state(value, base_dir: Path | None = None):
    """Parse ``kind:key=val,...`` (e.g. ``step:H=1,k=2``) or ``tabulated:<path>``."""
    if not isinstance(value, str) or ":" not in value:
        raise ConfigError(f"field 'state': expected 'kind:key=value,...', got {value!r}")
    kind, _, rest = value.partition(":")
    kind = kind.strip().lower()
    if kind == "tabulated":
        path = rest.split("=", 1)[1] if rest.startswith("path=") else rest
        path = Path(path)
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        try:
            return load_tabulated(path)
        except OSError as exc:
            raise ConfigError(f"field 'state': cannot read {path}: {exc.strerror}") from None
        except InvalidParameter as exc:
            raise ConfigError(f"field 'state': {exc}") from None
    params = {}
    for item in filter(None, (p.strip() for p in rest.split(","))):
        key, sep, val = item.partition("=")
        if not sep:
            raise ConfigError(f"field 'state': expected key=value, got {item!r}")
        try:
            params[key.strip()] = float(val)
        except ValueError:
            raise ConfigError(f"field 'state': parameter {key.strip()!r} is not a number") from None
    try:
        return construct(kind, **params)
    except (InvalidParameter, TypeError) as exc:
        raise ConfigError(f"field 'state': {exc}") from None


def parse_lengths(value):
    if isinstance(value, (list, tuple)):
        vals = [parse_bound(v, "lengths") for v in value]
    elif isinstance(value, str):
        parts = value.split(":")
        if len(parts) != 3:
            raise ConfigError(f"field 'lengths': expected 'start:stop:count', got {value!r}")
        try:
            start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError:
            raise ConfigError(f"field 'lengths': cannot parse {value!r}") from None
        if count < 0:
            raise ConfigError("field 'lengths': count must be >= 0")
        vals = np.linspace(start, stop, count).tolist()
    else:
        raise ConfigError(f"field 'lengths': expected 'start:stop:count' or a list, got {value!r}")
    if any(not (math.isfinite(v) and v > 0) for v in vals):
        raise ConfigError("field 'lengths': all lengths must be positive and finite")
    return tuple(vals)


def _number(raw, key, kind=float, lo=None, hi=None, open_lo=False, open_hi=False):
    if raw is None:
        return None
    if isinstance(raw, bool):
        raise ConfigError(f"field '{key}': expected a number, got {raw!r}")
    try:
        v = kind(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"field '{key}': expected {kind.__name__}, got {raw!r}") from None
    if kind is int and isinstance(raw, float) and raw != v:
        raise ConfigError(f"field '{key}': expected an integer, got {raw!r}")
    if kind is float and not math.isfinite(v):
        raise ConfigError(f"field '{key}': must be finite")
    if lo is not None and (v < lo or (open_lo and v == lo)):
        raise ConfigError(f"field '{key}': {v!r} is below the allowed range")
    if hi is not None and (v > hi or (open_hi and v == hi)):
        raise ConfigError(f"field '{key}': {v!r} is above the allowed range")
    return v


def load_config_file(path) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"config {path}: top level must be an object")
    unknown = sorted(set(data) - set(DEFAULTS))
    if unknown:
        raise ConfigError(f"config {path}: unknown field(s) {', '.join(unknown)}")
    return data


def resolve_config(file_values: dict, flags: dict, base_dir: Path | None = None) -> RunConfig:
    """Merge defaults, file values and flags (flag > file > default) and validate."""
    unknown = sorted(set(flags) - set(DEFAULTS))
    if unknown:
        raise ConfigError(f"unknown field(s) {', '.join(unknown)}")
    raw = dict(DEFAULTS)
    raw.update(file_values)
    state_dir = base_dir if "state" in file_values else None
    for k, v in flags.items():
        if v is not None:
            raw[k] = v
            if k == "state":
                state_dir = None

    output = raw["output"]
    if output not in ("json", "csv"):
        raise ConfigError(f"field 'output': expected 'json' or 'csv', got {output!r}")
    mode = raw["mode"]
    if mode not in ("length-symmetric", "free-endpoints"):
        raise ConfigError(f"field 'mode': expected 'length-symmetric' or 'free-endpoints', got {mode!r}")
    try:
        tol = Tolerance(
            _number(raw["abs_tol"], "abs_tol", lo=0.0),
            _number(raw["rel_tol"], "rel_tol", lo=0.0),
            _number(raw["max_subdivisions"], "max_subdivisions", int, lo=1),
        )
    except InvalidParameter as exc:
        raise ConfigError(f"field 'abs_tol'/'rel_tol': {exc}") from None

    return RunConfig(
        state=parse_state(raw["state"], state_dir) if raw["state"] is not None else None,
        interval=parse_interval(raw["interval"]) if raw["interval"] is not None else None,
        alpha=_number(raw["alpha"], "alpha", lo=0.0),
        tol=tol,
        output=output,
        seed=_number(raw["seed"], "seed", int, lo=0, hi=(1 << 64) - 1),
        n=_number(raw["n"], "n", int, lo=1),
        lengths=parse_lengths(raw["lengths"]) if raw["lengths"] is not None else None,
        mode=mode,
        significance=_number(raw["significance"], "significance", lo=0.0, hi=1.0, open_lo=True, open_hi=True),
        power=_number(raw["power"], "power", lo=0.0, hi=1.0, open_lo=True, open_hi=True),
        m=_number(raw["m"], "m", int, lo=1),
        s=_number(raw["s"], "s", int, lo=0),
        workers=_number(raw["workers"], "workers", int, lo=1),
        grid_points=_number(raw["grid_points"], "grid_points", int, lo=exp.MIN_GRID_POINTS),
    )


def _require(cfg, *names):
    for name in names:
        if getattr(cfg, name) is None:
            raise ConfigError(f"field '{name}' is required for this command")


# -- serialization ---------------------------------------------------------

def _json_value(v):
    if isinstance(v, float) and not math.isfinite(v):
        return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")
    return v


def _csv_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return format(v, ".17g")
    return "" if v is None else str(v)


def render(records, output: str, columns=None) -> str:
    """Serialize a list of flat dicts; a single record is written as one object / one row."""
    if output == "json":
        body = [{k: _json_value(v) for k, v in r.items()} for r in records]
        payload = body[0] if len(body) == 1 and columns is None else body
        return json.dumps(payload, indent=2) + "\n"
    if columns is None:
        columns = list(records[0]) if records else []
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for r in records:
        writer.writerow([_csv_value(r.get(c)) for c in columns])
    return buf.getvalue()


def _interval_fields(iv: Interval):
    return {"lo": iv.lo, "hi": iv.hi}


# -- commands --------------------------------------------------------------

def do_prob(cfg: RunConfig):
    _require(cfg, "state", "interval")
    r = dev.deviation_report(cfg.state, cfg.interval, cfg.alpha, cfg.tol)
    return [{"state": cfg.state.kind, **_interval_fields(cfg.interval), "alpha": r.alpha,
             "c1": r.c1, "c2": r.c2, "c3": r.c3, "delta": r.delta,
             "p_first_order": r.p_first_order, "p_exact": r.p_exact,
             "validity_warning": r.validity_warning, "out_of_range": r.out_of_range}], None


def do_delta(cfg: RunConfig):
    _require(cfg, "state", "interval")
    r = dev.deviation_report(cfg.state, cfg.interval, cfg.alpha, cfg.tol)
    return [{"state": cfg.state.kind, **_interval_fields(cfg.interval), "alpha": r.alpha,
             "c1": r.c1, "c2": r.c2, "c3": r.c3, "delta": r.delta,
             "validity_warning": r.validity_warning}], None


def do_optimize(cfg: RunConfig):
    _require(cfg, "state")
    opt = dev.optimize_interval(cfg.state, cfg.alpha, cfg.mode, cfg.tol)
    rec = {"state": cfg.state.kind, "mode": opt.mode, "alpha": cfg.alpha,
           **_interval_fields(opt.interval), "L": opt.interval.length, "delta_max": opt.delta,
           "degenerate": opt.degenerate, "note": opt.note}
    if isinstance(cfg.state, Gaussian):
        ana = dev.gaussian_max_delta(cfg.state.dispersion, cfg.alpha)
        rec.update({"L_max_analytic": ana.L_max, "delta_max_analytic": ana.delta_max, "gamma": ana.gamma})
    return [rec], None


SCAN_COLUMNS = ["L", "c1", "delta", "p_first_order", "p_exact"]


def do_scan(cfg: RunConfig):
    _require(cfg, "state", "lengths")
    rows = dev.scan_delta(cfg.state, cfg.alpha, cfg.lengths, cfg.tol, center=cfg.state.center)
    return [r._asdict() for r in rows], SCAN_COLUMNS


def do_simulate(cfg: RunConfig):
    _require(cfg, "state", "interval", "n")
    plan = exp.ExperimentPlan(cfg.state, cfg.interval, cfg.alpha, cfg.n, cfg.seed)
    out = exp.run_experiment(plan, workers=cfg.workers, grid_points=cfg.grid_points, tol=cfg.tol)
    r = dev.deviation_report(cfg.state, cfg.interval, cfg.alpha, cfg.tol)
    return [{"state": cfg.state.kind, **_interval_fields(cfg.interval), "alpha": cfg.alpha,
             "seed": cfg.seed, "hits": out.hits, "n": out.n, "empirical_p": out.empirical_p,
             "p_value_born": out.p_value_born, "p_value_generalized": out.p_value_generalized,
             "z_born": out.z_born, "p_born": r.c1, "p_first_order": r.p_first_order,
             "p_exact": r.p_exact}], None


def do_power(cfg: RunConfig):
    _require(cfg, "state", "interval")
    r = dev.deviation_report(cfg.state, cfg.interval, cfg.alpha, cfg.tol)
    shift = r.p_exact - r.c1
    n = exp.required_sample_size(exp.PowerRequest(r.c1, shift, cfg.significance, cfg.power))
    return [{"state": cfg.state.kind, **_interval_fields(cfg.interval), "alpha": cfg.alpha,
             "significance": cfg.significance, "power": cfg.power, "p_born": r.c1,
             "p_exact": r.p_exact, "delta": r.delta, "shift": shift, "N": n}], None


def do_design(cfg: RunConfig):
    _require(cfg, "m", "s")
    if cfg.s > cfg.m:
        raise ConfigError(f"field 's': target exponent {cfg.s} exceeds alpha exponent m={cfg.m}")
    d = dev.required_dispersion(cfg.m, cfg.s)
    return [{"m": d.m, "s": d.s, "alpha": 10.0 ** -d.m, "target_delta": 10.0 ** -d.s,
             "b_exponent": d.exponent, "b_order_of_magnitude": d.b_magnitude,
             "b_exact_gamma_corrected": d.b_exact, "gamma": d.gamma}], None


COMMANDS = {
    "prob": do_prob,
    "delta": do_delta,
    "optimize": do_optimize,
    "scan": do_scan,
    "simulate": do_simulate,
    "power": do_power,
    "design": do_design,
}


def run(command: str, file_values: dict, flags: dict, base_dir: Path | None = None) -> str:
    """Resolve the config, execute ``command`` and return the rendered report."""
    cfg = resolve_config(file_values, flags, base_dir)
    records, columns = COMMANDS[command](cfg)
    return render(records, cfg.output, columns)


def _options(f):
    opts = [
        click.option("--config", "config_path", type=click.Path(dir_okay=False), help="JSON config file."),
        click.option("--state", help="State spec, e.g. gaussian:b=1 | step:H=1,k=2 | uniform:H=1 | tabulated:FILE."),
        click.option("--interval", help="Detection window 'lo,hi'; use -inf/inf for open ends."),
        click.option("--alpha", type=float, help="Fourth-order coefficient alpha >= 0."),
        click.option("--n", "n", type=int, help="Number of simulated trials."),
        click.option("--seed", type=int, help="Unsigned 64-bit RNG seed."),
        click.option("--output", type=click.Choice(["csv", "json"]), help="Report format."),
        click.option("--lengths", help="Window lengths 'start:stop:count'."),
        click.option("--mode", type=click.Choice(["length-symmetric", "free-endpoints"])),
        click.option("--significance", type=float),
        click.option("--power", type=float),
        click.option("--m", "m", type=int, help="alpha ~ 10^-m."),
        click.option("--s", "s", type=int, help="target deviation ~ 10^-s."),
        click.option("--abs-tol", "abs_tol", type=float),
        click.option("--rel-tol", "rel_tol", type=float),
        click.option("--max-subdivisions", "max_subdivisions", type=int),
        click.option("--workers", type=int, help="Threads for simulation (result is independent of it)."),
        click.option("--grid-points", "grid_points", type=int, help="Sampler grid size."),
    ]
    for opt in reversed(opts):
        f = opt(f)
    return f


def _make_command(name, doc):
    @click.command(name=name, help=doc)
    @_options
    def command(config_path, **flags):
        try:
            base_dir = None
            file_values = {}
            if config_path is not None:
                file_values = load_config_file(config_path)
                base_dir = Path(config_path).resolve().parent
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always", dev.FirstOrderValidityWarning)
                text = run(name, file_values, flags, base_dir)
            for w in {str(w.message) for w in caught}:
                click.echo(f"warning: {w}", err=True)
        except ConfigError as exc:
            click.echo(f"config error: {exc}", err=True)
            sys.exit(EXIT_CONFIG)
        except (GenbornError, ArithmeticError) as exc:
            click.echo(f"computation error: {type(exc).__name__}: {exc}", err=True)
            sys.exit(EXIT_COMPUTE)
        click.echo(text, nl=False)

    return command


@click.group()
def main():
    """Generalized Born-rule probabilities, optima and detection simulations."""


for _name, _doc in [
    ("prob", "Born, first-order and exact generalized probabilities for a window."),
    ("delta", "First-order deviation from Born's rule for a window."),
    ("optimize", "Window maximising |delta| (numeric, plus analytic for Gaussians)."),
    ("scan", "Deviation along centred windows of the given lengths (CSV columns L,c1,delta,p_first_order,p_exact)."),
    ("simulate", "Simulate a detection run and test it against both rules."),
    ("power", "Trials needed to resolve the predicted shift."),
    ("design", "Gaussian dispersion needed for deviation 10^-s when alpha = 10^-m."),
]:
    main.add_command(_make_command(_name, _doc))
