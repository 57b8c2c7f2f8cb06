import functools
import sys
from pathlib import Path
from typing import Callable, ParamSpec, TypeVar

import click
from pydantic import ValidationError

from slicemotion import state
from slicemotion.errors import InvalidInputError, NumericalError

P = ParamSpec("P")
T = TypeVar("T")

EXIT_INVALID_INPUT = 2
EXIT_NUMERICAL = 3


def mark_exit_codes():
    """Report package errors as a red one-liner with a stable exit code."""

    def deco(func: Callable[P, T]):
        @functools.wraps(func)
        def wrapper(*args: P.args, **kwargs: P.kwargs) -> T:
            try:
                return func(*args, **kwargs)
            except (InvalidInputError, ValidationError) as e:
                click.secho(f"Invalid input: {e}", err=True, fg="red")
                sys.exit(EXIT_INVALID_INPUT)
            except NumericalError as e:
                click.secho(f"Numerical failure: {e}", err=True, fg="red")
                sys.exit(EXIT_NUMERICAL)

        return wrapper

    return deco


def mark_common_options(*, out_default: str = "out", seed: bool = True):
    """Add --seed, --threads and --out; --threads caps the worker pool."""

    def deco(func: Callable[P, T]):
        @click.option(
            "--threads",
            type=click.IntRange(min=1),
            default=1,
            show_default=True,
            help="Maximum worker threads. Results never depend on this.",
        )
        @click.option(
            "--out",
            type=click.Path(file_okay=False, path_type=Path),
            default=out_default,
            show_default=True,
            help="Output directory.",
        )
        @functools.wraps(func)
        def wrapper(*args: P.args, threads: int, **kwargs: P.kwargs) -> T:
            state.MAX_WORKERS = threads
            return func(*args, **kwargs)

        if not seed:
            return wrapper
        return click.option(
            "--seed",
            type=int,
            default=None,
            help="Experiment seed, overriding the manifest.",
        )(wrapper)

    return deco


def manifest_option():
    return click.option(
        "--manifest",
        "manifest_path",
        type=click.Path(exists=True, dir_okay=False, path_type=Path),
        default=None,
        help="Experiment manifest JSON. Defaults are used when omitted.",
    )


def stack_dirs_argument():
    return click.argument(
        "stack_dirs",
        nargs=-1,
        required=True,
        type=click.Path(exists=True, file_okay=False, path_type=Path),
    )


def resolve_manifest(manifest_path: Path | None, seed: int | None, out: Path):
    from slicemotion.manifest import ExperimentManifest, load_manifest

    manifest = load_manifest(manifest_path) if manifest_path is not None else ExperimentManifest()
    return manifest.with_overrides(seed=seed, output_dir=out)
