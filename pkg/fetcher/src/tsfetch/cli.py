"""Command-line interface: fetch-convert and verify.

Exit codes: 0 success, 1 verification mismatch, 2 runtime failure.
"""
from __future__ import annotations

import sys
from pathlib import Path

import click

from .convert import ConvertError, fetch_convert
from .sources import SOURCES
from .verify import MismatchReport, verify


@click.group()
def main() -> None:
    """Convert public time-series sources into canonical dataset directories."""


@main.command(name="fetch-convert")
@click.argument("task", type=click.Choice(sorted(SOURCES)))
@click.option("--out", "out_dir", type=click.Path(path_type=Path), required=True)
@click.option("--from-archive", "archive", type=click.Path(path_type=Path), default=None,
              help="Pre-downloaded archive directory or .zip (required for login-walled hosts).")
@click.option("--limit", type=int, default=None,
              help="Cap each split at this many samples, class-proportionally.")
@click.option("--cache-dir", type=click.Path(path_type=Path), default=Path("archives"),
              help="Where downloaded archives are cached.")
def fetch_convert_command(task: str, out_dir: Path, archive: Path | None,
                          limit: int | None, cache_dir: Path) -> None:
    """Convert TASK's raw data into a canonical dataset directory."""
    try:
        out = fetch_convert(task, out_dir, archive=archive, limit=limit, cache_dir=cache_dir)
    except ConvertError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    stats = verify(out)
    click.echo(f"wrote {out}")
    click.echo(stats.summary())


@main.command(name="verify")
@click.argument("dataset_dir", type=click.Path(path_type=Path))
def verify_command(dataset_dir: Path) -> None:
    """Check a converted directory against the expected task shape."""
    try:
        stats = verify(dataset_dir)
    except MismatchReport as exc:
        for problem in exc.problems:
            click.echo(f"mismatch: {problem}", err=True)
        sys.exit(1)
    click.echo(stats.summary() + " OK")


if __name__ == "__main__":
    main()
