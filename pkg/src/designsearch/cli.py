"""Command-line entry points.

parse      validate a spec and report its search-space size
preview    render sampled variants of a spec to files
serve      run the comparison-scheduling web service
simulate   reproduce the search-vs-uniform experiments with synthetic raters

Exit codes: 0 success, 1 validation failure, 2 runtime failure. Task
defaults (population, iterations, quota, pay) can come from an INI
config file; flags always win.
"""

from __future__ import annotations

import configparser
import json
import os
import random
import socket
import sys
from pathlib import Path

import click

from .engine import GAConfig, Individual
from .genome import (
    build_schema,
    export_designs,
    sample_distinct_designs,
    space_size,
)
from .markup import MarkupError, parse as parse_markup, spec_to_json, validate
from .scheduler import TaskService
from .simulate import proportion_z_test, run_experiment, run_space_size_sweep

EXIT_VALIDATION = 1
EXIT_RUNTIME = 2
STORE_ENV = "DESIGNSEARCH_STORE"

_CONFIG_FIELDS = {
    "population_size": int,
    "iterations": int,
    "mutation_rate": float,
    "per_worker_quota": int,
    "unit_pay": float,
    "lease_seconds": float,
}


def load_defaults(path: str | None) -> dict:
    """Read the [task] section of an INI config file."""
    if not path:
        return {}
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise click.ClickException(f"config file {path!r} not found")
    if not parser.has_section("task"):
        return {}
    out = {}
    for key, cast in _CONFIG_FIELDS.items():
        if parser.has_option("task", key):
            out[key] = cast(parser.get("task", key))
    return out


def _read_spec(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as err:
        click.echo(f"cannot read {path}: {err}", err=True)
        sys.exit(EXIT_RUNTIME)


def _parse_or_exit(text: str):
    try:
        return parse_markup(text)
    except MarkupError as err:
        click.echo(f"{type(err).__name__}: {err}", err=True)
        sys.exit(EXIT_VALIDATION)


@click.group()
def main() -> None:
    """Design-space exploration for annotated HTML."""


@main.command("parse")
@click.argument("file", type=click.Path())
@click.option("--json", "as_json", is_flag=True,
              help="emit the parsed spec as JSON")
def parse_cmd(file: str, as_json: bool) -> None:
    """Validate FILE and print an attribute/size summary."""
    spec = _parse_or_exit(_read_spec(file))
    diagnostics = validate(spec)
    for diag in diagnostics:
        where = f" ({diag.element_id})" if diag.element_id else ""
        click.echo(f"{diag.code}{where}: {diag.message}", err=True)
    if as_json:
        click.echo(json.dumps(spec_to_json(spec), indent=2))
    else:
        size = space_size(build_schema(spec))
        click.echo(f"{len(spec.attributes)} attributes, space size {size}")
    if diagnostics:
        sys.exit(EXIT_VALIDATION)


@main.command("preview")
@click.argument("file", type=click.Path())
@click.option("--sample", "-n", default=4, show_default=True,
              help="number of variants to render")
@click.option("--seed", default=0, show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path(),
              help="output directory")
def preview_cmd(file: str, sample: int, seed: int, out_dir: str) -> None:
    """Render sampled variants of FILE into --out."""
    spec = _parse_or_exit(_read_spec(file))
    diagnostics = validate(spec)
    if diagnostics:
        for diag in diagnostics:
            click.echo(f"{diag.code}: {diag.message}", err=True)
        sys.exit(EXIT_VALIDATION)
    schema = build_schema(spec)
    pairs = sample_distinct_designs(spec, schema, sample, random.Random(seed))
    variants = [Individual(id=i, generation=0, sequence=sequence,
                           mask=(0,) * schema.gene_count)
                for i, (sequence, _) in enumerate(pairs)]
    manifest = export_designs(spec, schema, variants, out_dir)
    click.echo(f"wrote {len(manifest['designs'])} designs to {out_dir}")


@main.command("serve")
@click.option("--port", default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--store", type=click.Path(),
              help=f"event-log path (or ${STORE_ENV})")
@click.option("--ui", "ui_dir", type=click.Path(),
              help="static directory to mount at /ui")
@click.option("--config", "config_path", type=click.Path(),
              help="INI file with [task] defaults")
@click.option("--lease-seconds", type=float, default=None,
              help="lease duration for assignments")
def serve_cmd(port: int, host: str, store: str | None, ui_dir: str | None,
              config_path: str | None, lease_seconds: float | None) -> None:
    """Run the scheduling service."""
    import uvicorn

    from .server import create_app

    defaults = load_defaults(config_path)
    store = store or os.environ.get(STORE_ENV)
    lease = lease_seconds or defaults.get("lease_seconds", 600.0)
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.bind((host, port))
    except OSError as err:
        click.echo(f"cannot bind {host}:{port}: {err}", err=True)
        sys.exit(EXIT_RUNTIME)
    finally:
        probe.close()
    service = TaskService(store_path=store, lease_seconds=lease)
    app = create_app(service, ui_dir=ui_dir)
    try:
        uvicorn.run(app, host=host, port=port, log_level="warning")
    finally:
        service.close()


def _report_row(report) -> str:
    return (f"{report.condition:<22} {report.space:>6} "
            f"{report.ga_vote_share * 100:>7.1f} {report.z_score:>7.2f} "
            f"{report.p_value:>10.3g} {report.ga_top_utility:>8.2f} "
            f"{report.uniform_top_utility:>8.2f}")


_HEADER = (f"{'condition':<22} {'space':>6} {'votes%':>7} {'z':>7} "
           f"{'p':>10} {'ga_u':>8} {'uni_u':>8}")


@main.command("simulate")
@click.argument("file", type=click.Path(), required=False)
@click.option("--seeds", default=5, show_default=True,
              help="number of experiment seeds")
@click.option("--beta", default=1.0, show_default=True,
              help="rater choice sharpness (0 = coin flips)")
@click.option("--votes", default=100, show_default=True,
              help="cross-method votes per seed")
@click.option("--sweep", default=None,
              help="comma-separated space sizes; ignores FILE")
@click.option("--config", "config_path", type=click.Path(),
              help="INI file with [task] defaults")
@click.option("--json", "as_json", is_flag=True, help="emit JSON")
@click.option("--csv", "csv_path", type=click.Path(),
              help="write per-seed rows as CSV (sweep mode)")
def simulate_cmd(file: str | None, seeds: int, beta: float, votes: int,
                 sweep: str | None, config_path: str | None, as_json: bool,
                 csv_path: str | None) -> None:
    """Run searched-vs-uniform experiments with synthetic raters."""
    defaults = load_defaults(config_path)
    config = GAConfig(
        population_size=defaults.get("population_size", 50),
        iterations=defaults.get("iterations", 10),
        mutation_rate=defaults.get("mutation_rate", 0.03))

    if sweep:
        try:
            sizes = [int(s) for s in sweep.split(",") if s.strip()]
            points = run_space_size_sweep(sizes, seeds=range(seeds),
                                          noise_beta=beta, n_votes=votes,
                                          config=config)
        except ValueError as err:
            click.echo(str(err), err=True)
            sys.exit(EXIT_RUNTIME)
        if as_json:
            click.echo(json.dumps([p.to_json() for p in points], indent=2))
        else:
            click.echo(_HEADER)
            for point in points:
                for report in point.reports:
                    click.echo(_report_row(report))
                click.echo(f"{'mean size ' + str(point.space):<22} {point.space:>6} "
                           f"{point.mean_share * 100:>7.1f} "
                           f"(stderr {point.stderr * 100:.1f})")
        if csv_path:
            rows = ["space,seed,share,z,p"]
            for point in points:
                for report in point.reports:
                    rows.append(f"{point.space},{report.seeds['experiment']},"
                                f"{report.ga_vote_share},{report.z_score},"
                                f"{report.p_value}")
            Path(csv_path).write_text("\n".join(rows) + "\n", encoding="utf-8")
            click.echo(f"wrote {csv_path}")
        return

    if not file:
        click.echo("FILE is required unless --sweep is given", err=True)
        sys.exit(EXIT_RUNTIME)
    spec = _parse_or_exit(_read_spec(file))
    diagnostics = validate(spec)
    if diagnostics:
        for diag in diagnostics:
            click.echo(f"{diag.code}: {diag.message}", err=True)
        sys.exit(EXIT_VALIDATION)
    reports = [run_experiment(spec, seed=seed, noise_beta=beta, n_votes=votes,
                              config=config)
               for seed in range(seeds)]
    if as_json:
        click.echo(json.dumps([r.to_json() for r in reports], indent=2))
        return
    click.echo(_HEADER)
    for report in reports:
        click.echo(_report_row(report))
    total_votes = sum(r.n_votes for r in reports)
    ga_votes = sum(round(r.ga_vote_share * r.n_votes) for r in reports)
    share = ga_votes / total_votes
    z, p = proportion_z_test(share, total_votes)
    click.echo(f"{'aggregate':<22} {'':>6} {share * 100:>7.1f} {z:>7.2f} "
               f"{p:>10.3g}")


if __name__ == "__main__":
    main()
