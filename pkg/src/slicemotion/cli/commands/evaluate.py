from pathlib import Path

import click

from slicemotion.acquisition import load_stack
from slicemotion.cli.commands.markers import mark_common_options, mark_exit_codes
from slicemotion.evaluation import build_report, write_report_csv, write_report_json
from slicemotion.volume import load_volume, save_volume


@click.command()
@click.option(
    "--volume",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    default=None,
    help="Reconstructed volume to score.",
)
@click.option(
    "--reference",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    default=None,
    help="Ground-truth volume.",
)
@click.option(
    "--stack",
    "stack_dirs",
    multiple=True,
    type=click.Path(exists=True, file_okay=False, path_type=Path),
    help="Stack directory with true and estimated transforms. Repeatable.",
)
@click.option(
    "--align/--no-align",
    default=True,
    show_default=True,
    help="Rigidly align before image metrics.",
)
@mark_common_options(seed=False)
@mark_exit_codes()
def evaluate(
    volume: Path | None,
    reference: Path | None,
    stack_dirs: tuple[Path, ...],
    align: bool,
    out: Path,
) -> None:
    """Score motion estimates and reconstructions against ground truth."""
    if (volume is None) != (reference is None):
        raise click.UsageError("--volume and --reference must be given together")
    if volume is None and not stack_dirs:
        raise click.UsageError("Nothing to evaluate")

    report, dssim = build_report(
        [load_stack(d) for d in stack_dirs],
        load_volume(volume) if volume is not None else None,
        load_volume(reference) if reference is not None else None,
        align=align,
    )
    write_evaluation(report, dssim, out)


def write_evaluation(report, dssim, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    write_report_json(report, out / "report.json")
    write_report_csv(report, out / "report.csv")
    if dssim is not None:
        save_volume(dssim, out / "dssim.raw")

    for name, motion in report.motion.items():
        click.echo(
            f"{name:<9} MAE {motion.mae_rot_deg:.2f}° / {motion.mae_trans_mm:.2f} mm, "
            f"RMSE {motion.rmse_rot_deg:.2f}° / {motion.rmse_trans_mm:.2f} mm"
        )
    if report.image is not None:
        click.echo(f"SSIM {report.image.ssim:.4f}, NRMSE {report.image.nrmse:.4f}")
