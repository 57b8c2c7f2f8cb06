from pathlib import Path

import click

from slicemotion.cli.commands.markers import mark_common_options, mark_exit_codes
from slicemotion.estimator import (
    TrainConfig,
    load_checkpoint,
    train_toy as run_training,
    write_history_csv,
)
from slicemotion.graph import create_loss_graph

CHECKPOINT_NAME = "checkpoint.bin"


@click.command("train-toy")
@click.option(
    "--config",
    "config_path",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    default=None,
    help="Training config JSON. Defaults are used when omitted.",
)
@click.option("--epochs", type=click.IntRange(min=0), default=None, help="Override the epoch count.")
@click.option("--resume", is_flag=True, help="Continue from the checkpoint in --out.")
@click.option("--standard-gru", is_flag=True, help="Use the conventional GRU gate placement.")
@click.option(
    "--fusion",
    type=click.Choice(["affinity", "late", "none"]),
    default=None,
    help="Override the 2D/3D fusion variant.",
)
@click.option(
    "--recurrences",
    type=click.IntRange(min=1),
    default=None,
    help="Override the recurrence count.",
)
@mark_common_options()
@mark_exit_codes()
def train_toy(
    config_path: Path | None,
    epochs: int | None,
    resume: bool,
    standard_gru: bool,
    fusion: str | None,
    recurrences: int | None,
    seed: int | None,
    out: Path,
) -> None:
    """Train the toy motion estimator on simulated phantoms."""
    if config_path is not None:
        cfg = TrainConfig.model_validate_json(config_path.read_bytes())
    else:
        cfg = TrainConfig()

    update: dict = {}
    if epochs is not None:
        update["n_epochs"] = epochs
    if recurrences is not None:
        update["n_recurrences"] = recurrences
    if seed is not None:
        update["seed"] = seed
    estimator = {}
    if standard_gru:
        estimator["standard_gru"] = True
    if fusion is not None:
        estimator["fusion"] = fusion
    if estimator:
        update["estimator"] = cfg.estimator.model_copy(update=estimator)
    cfg = TrainConfig.model_validate(cfg.model_dump() | update)

    out.mkdir(parents=True, exist_ok=True)
    checkpoint_path = out / CHECKPOINT_NAME
    (out / "train_config.json").write_text(cfg.model_dump_json(indent=2) + "\n", encoding="utf-8")

    result = run_training(
        cfg,
        resume=load_checkpoint(checkpoint_path) if resume else None,
        checkpoint_path=checkpoint_path,
    )

    write_history_csv(result.history, out / "history.csv")
    trained = [r for r in result.history if r.train_loss is not None]
    if trained:
        graph = create_loss_graph(
            [r.train_loss for r in trained],
            [r.validation_loss for r in trained],
            switch_epoch=result.state.switch_epoch,
        )
        (out / "loss.png").write_bytes(graph.getvalue())

    click.secho(
        f"Wrote {checkpoint_path} ({result.params.n_parameters} parameters, "
        f"{result.state.epoch} epochs)",
        fg="green",
    )
