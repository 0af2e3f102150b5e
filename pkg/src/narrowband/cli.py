"""Command line: exponent predictions, eps sweeps and symbol-class checks.

Exit codes: 0 ok, 2 invalid input, 3 result inconsistent with the predicted
exponent, 4 internal numerical failure.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import sys
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone

import click

from . import __version__
from .curves import Curve, CurveError
from .exponents import (CSV_COLUMNS, Regime, RegimeMismatchError, exponent_grid, predict,
                        prediction_table)
from .norms import InvalidExponentError, LebesgueTriple
from .scaling import CeilingViolation, ConfigError, SweepConfig, SweepPointError, sweep
from .symbols import (FrequencyGrid, GridResolutionError, build_convolved_measure_symbol,
                      build_tube_symbol, ceilings_from, verify_class)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_INCONSISTENT = 3
EXIT_NUMERICAL = 4
ENV_OUT = "NARROWBAND_OUT"


class Failure(click.ClickException):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.exit_code = code


def _invalid(message: str) -> Failure:
    return Failure(message, EXIT_INVALID)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def config_hash(config: dict) -> str:
    """sha256 of the canonical JSON form of a config."""
    text = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


@dataclass
class RunManifest:
    command: str
    config: dict
    seed: int
    tool_version: str = __version__
    started: str = field(default_factory=_now)
    finished: str = ""
    outputs: list = field(default_factory=list)

    @property
    def config_hash(self) -> str:
        return config_hash(self.config)

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["config_hash"] = self.config_hash
        return doc

    def write(self, out_dir: str) -> str:
        self.finished = _now()
        path = os.path.join(out_dir, "manifest.json")
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True, indent=2)
            fh.write("\n")
        return path


def resolve_out(out: str | None, default: str) -> str:
    """NARROWBAND_OUT wins over --out, which wins over the default."""
    return os.environ.get(ENV_OUT) or out or default


def _write(path: str, text: str) -> str:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
    return path


@click.group()
@click.version_option(__version__, prog_name="narrowband")
def main():
    """Decay of narrow-band bilinear multipliers: predict, sweep, verify."""


# -- predict ------------------------------------------------------------------------


def _parse_triple_line(line: str, lineno: int):
    parts = [p.strip() for p in line.replace(";", ",").split(",") if p.strip()]
    if len(parts) != 3:
        raise _invalid(f"line {lineno}: expected three exponents p,q,r")
    return parts


@main.command("predict")
@click.option("--p", "p", help="Exponent of f (1 <= p <= inf).")
@click.option("--q", "q", help="Exponent of g.")
@click.option("--r", "r", help="Exponent of the dual function h.")
@click.option("--regime", default="arbitrary", show_default=True,
              help="nowhere_characteristic, curvature, arbitrary, line_nondegenerate, line_degenerate.")
@click.option("--symbol-class", "symbol_class", type=click.Choice(["M_eps", "N_eps"]), default="M_eps",
              show_default=True)
@click.option("--lam", type=float, default=None, help="Slope of a line regime.")
@click.option("--triples", "triples_path", type=click.Path(dir_okay=False),
              help="File of p,q,r lines; prints a CSV table.")
@click.option("--grid-steps", type=int, default=None,
              help="Tabulate the uniform grid of inverse exponents with this many steps.")
@click.option("--out", default=None, help="Write the CSV table here instead of stdout.")
def cmd_predict(p, q, r, regime, symbol_class, lam, triples_path, grid_steps, out):
    """Predicted decay exponent rho for (p, q, r) in a regime."""
    try:
        reg = Regime(regime, symbol_class, lam)
    except RegimeMismatchError as exc:
        raise _invalid(str(exc))
    if triples_path or grid_steps:
        triples = []
        if triples_path:
            try:
                with open(triples_path, encoding="utf-8") as fh:
                    lines = fh.read().splitlines()
            except OSError as exc:
                raise _invalid(f"cannot read {triples_path}: {exc}")
            for i, line in enumerate(lines, 1):
                if line.strip() and not line.lstrip().startswith("#"):
                    triples.append(_parse_triple_line(line, i))
        if grid_steps:
            triples.extend(exponent_grid(grid_steps))
        try:
            rows = prediction_table(triples, reg)
        except InvalidExponentError as exc:
            raise _invalid(str(exc))
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
        target = os.environ.get(ENV_OUT) or out
        if target:
            path = target if target.endswith(".csv") else os.path.join(target, "predictions.csv")
            _write(path, buf.getvalue())
            click.echo(path)
        else:
            click.echo(buf.getvalue(), nl=False)
        return
    if p is None or q is None or r is None:
        raise _invalid("give --p, --q and --r (or --triples / --grid-steps)")
    try:
        triple = LebesgueTriple(p, q, r)
    except InvalidExponentError as exc:
        raise _invalid(str(exc))
    click.echo(predict(triple, reg).summary())


# -- sweep ---------------------------------------------------------------------------


@main.command("sweep")
@click.option("--config", "config_path", required=True, type=click.Path(dir_okay=False),
              help="JSON sweep configuration.")
@click.option("--seed", type=click.IntRange(0, 2 ** 64 - 1), default=None, help="Override the config seed.")
@click.option("--threads", type=click.IntRange(1, None), default=None, help="Cap on worker threads.")
@click.option("--out", default=None, help="Output directory (NARROWBAND_OUT overrides).")
@click.option("--grid-n", type=click.Choice(["1024", "2048", "4096"]), default=None,
              help="Grid size override.")
@click.option("--log-correction", type=click.Choice(["auto", "none", "sqrt"]), default=None,
              help="Logarithmic factor in the fit; auto follows the prediction.")
def cmd_sweep(config_path, seed, threads, out, grid_n, log_correction):
    """Run an eps sweep and compare the fitted slope with the prediction."""
    try:
        with open(config_path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise _invalid(f"cannot read {config_path}: {exc}")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise _invalid(f"/: invalid JSON: {exc}")
    if isinstance(doc, dict):
        if seed is not None:
            doc["seed"] = seed
        if threads is not None:
            doc["threads"] = threads
        if grid_n is not None:
            doc["grid_n"] = int(grid_n)
        if log_correction is not None:
            doc["log_correction"] = "sqrt_log" if log_correction == "sqrt" else log_correction
    try:
        config = SweepConfig.from_dict(doc)
    except ConfigError as exc:
        raise _invalid(f"config error at {exc.pointer or '/'}: {exc.message}")
    canonical = config.to_dict()
    out_dir = resolve_out(out, os.path.join("narrowband-runs", config_hash(canonical)[:12]))
    manifest = RunManifest("sweep", canonical, config.seed)
    try:
        fit = sweep(config, out_dir)
    except CeilingViolation as exc:
        raise Failure(f"numerical failure: {exc}", EXIT_NUMERICAL)
    except SweepPointError as exc:
        if isinstance(exc.cause, (GridResolutionError, InvalidExponentError, CurveError, ValueError)):
            raise _invalid(str(exc))
        raise Failure(f"numerical failure: {exc}", EXIT_NUMERICAL)
    except (FloatingPointError, ArithmeticError) as exc:
        raise Failure(f"numerical failure: {exc}", EXIT_NUMERICAL)
    manifest.outputs = [os.path.join(out_dir, name) for name in ("results.csv", "fit.json", "plotdata.tsv")]
    manifest.write(out_dir)
    click.echo(fit.verdict_line())
    if fit.verdict == "inconsistent":
        sys.exit(EXIT_INCONSISTENT)


# -- verify-symbol ------------------------------------------------------------------------


def _parse_eps_list(text: str) -> list:
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            if part.startswith("2^"):
                out.append(2.0 ** float(part[2:]))
            else:
                out.append(float(part))
        except ValueError:
            raise _invalid(f"cannot parse eps value {part!r}")
    if not out:
        raise _invalid("empty eps list")
    return out


@main.command("verify-symbol")
@click.option("--curve", "curve_text", default='{"kind": "circle", "center": [0, 1], "radius": 1}',
              show_default=True, help="Curve as JSON text or a path to a JSON file.")
@click.option("--builder", type=click.Choice(["tube", "convolved"]), default="tube", show_default=True)
@click.option("--class", "symbol_class", type=click.Choice(["M_eps", "N_eps"]), default="M_eps",
              show_default=True, help="Class whose ceilings count toward pass.")
@click.option("--eps", "eps_text", default="2^-3,2^-4,2^-5,2^-6", show_default=True,
              help="Comma separated eps values, e.g. 2^-4,0.03125.")
@click.option("--grid-n", type=click.Choice(["1024", "2048", "4096"]), default="1024", show_default=True)
@click.option("--out", default=None, help="Directory for verify.csv (NARROWBAND_OUT overrides).")
def cmd_verify_symbol(curve_text, builder, symbol_class, eps_text, grid_n, out):
    """Measure class constants of a curve symbol over several eps."""
    try:
        if os.path.exists(curve_text):
            with open(curve_text, encoding="utf-8") as fh:
                curve_text = fh.read()
        curve = Curve.from_json(curve_text)
    except (CurveError, json.JSONDecodeError, OSError) as exc:
        raise _invalid(f"bad curve: {exc}")
    eps_list = sorted(_parse_eps_list(eps_text), reverse=True)
    grid = FrequencyGrid(2.0, int(grid_n))
    for e in eps_list:
        try:
            grid.check_resolution(e)
        except GridResolutionError as exc:
            raise _invalid(str(exc))
    reports = []
    ceilings = None
    for e in eps_list:
        try:
            if builder == "tube":
                sym = build_tube_symbol(curve, e, grid)
            else:
                sym = build_convolved_measure_symbol(curve, e, grid)
        except (ValueError, CurveError) as exc:
            raise _invalid(str(exc))
        first = verify_class(sym, check_tangential=symbol_class == "N_eps")
        # ceilings: ten times the constants at the coarsest eps
        ceilings = ceilings or ceilings_from(first)
        reports.append(verify_class(sym, ceilings=ceilings, check_tangential=symbol_class == "N_eps"))
    rows = [rep.as_row() for rep in reports]
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: (repr(v) if isinstance(v, float) else str(v).lower() if isinstance(v, bool) else v)
                         for k, v in row.items()})
    click.echo(buf.getvalue(), nl=False)
    target = os.environ.get(ENV_OUT) or out
    if target:
        _write(os.path.join(target, "verify.csv"), buf.getvalue())
    if not all(rep.passed for rep in reports):
        sys.exit(EXIT_INCONSISTENT)


if __name__ == "__main__":  # pragma: no cover
    main()
