import io
from typing import Sequence

import matplotlib.pyplot as plt
import numpy as np
from matplotlib.axes import Axes

from slicemotion.motionsim import MotionTrajectory

ROTATION_COLOURS = ("#E0474C", "#3FA34D", "#2F6FDE")


def create_trajectory_graph(traj: MotionTrajectory, *, title: str | None = None) -> io.BytesIO:
    """Render rotations (degrees) and translations (mm) against time as a PNG."""
    fig, (ax_rot, ax_trans) = plt.subplots(2, 1, sharex=True)

    fine_t = np.linspace(traj.times_s[0], traj.times_s[-1], 200)
    labels = ("x", "y", "z")
    for k, (label, colour) in enumerate(zip(labels, ROTATION_COLOURS)):
        if traj.curves is not None:
            ax_rot.plot(fine_t, np.degrees(traj.curves[k](fine_t)), colour, linewidth=1)
            ax_trans.plot(fine_t, traj.curves[k + 3](fine_t), colour, linewidth=1)
        ax_rot.plot(traj.times_s, np.degrees(traj.rotations[:, k]), colour, marker=".",
                    linestyle="none" if traj.curves is not None else "-", label=f"θ{label}")
        ax_trans.plot(traj.times_s, traj.translations[:, k], colour, marker=".",
                      linestyle="none" if traj.curves is not None else "-", label=f"d{label}")

    ax_rot.set_ylabel("rotation (°)")
    ax_trans.set_ylabel("translation (mm)")
    ax_trans.set_xlabel("time (s)")
    if title:
        ax_rot.set_title(title)

    for ax in (ax_rot, ax_trans):
        _style_axes(ax)
        ax.legend(fontsize=8, loc="upper right", ncols=3, frameon=False)

    f = io.BytesIO()
    fig.savefig(f, format="png", bbox_inches="tight", pad_inches=0.1, dpi=80)
    # bbox_inches, pad_inches: removes padding around the graph
    f.seek(0)

    plt.close(fig)
    return f


def create_loss_graph(
    train: Sequence[float],
    validation: Sequence[float],
    *,
    switch_epoch: int | None = None,
) -> io.BytesIO:
    """Plot training and validation loss per epoch on a log scale."""
    fig, ax = plt.subplots()
    epochs = np.arange(1, len(train) + 1)
    ax.plot(epochs, train, "#2F6FDE", label="train")
    ax.plot(epochs, validation, "#E0474C", label="validation")
    if switch_epoch is not None:
        ax.axvline(switch_epoch, color="#707070", linestyle="--", linewidth=1)

    if len(train) and min(min(train), min(validation, default=1.0)) > 0:
        ax.set_yscale("log")
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    _style_axes(ax)
    ax.legend(fontsize=8, frameon=False)
    set_axes_aspect(ax, 9 / 16, "box")

    f = io.BytesIO()
    fig.savefig(f, format="png", bbox_inches="tight", pad_inches=0.1, dpi=80)
    f.seek(0)

    plt.close(fig)
    return f


def _style_axes(ax: Axes) -> None:
    ax.set_axisbelow(True)
    ax.grid(color="#707070", alpha=0.4)

    # Make the spines invisible
    for spine in ax.spines.values():
        spine.set_color("#00000000")
    ax.tick_params(labelsize=9, color="#70707066")


def set_axes_aspect(ax: Axes, ratio: int | float, *args, **kwargs) -> None:
    """Set an Axes's aspect ratio.

    Extra arguments are passed through to `ax.set_aspect()`.

    :param ax: The Axes to set the aspect ratio for.
    :param ratio: The ratio of height to width.

    """
    # https://www.statology.org/matplotlib-aspect-ratio/
    x_left, x_right = ax.get_xlim()
    y_low, y_high = ax.get_ylim()
    x_size = x_right - x_left
    y_size = y_low - y_high
    current_ratio = abs(x_size / y_size)
    ax.set_aspect(current_ratio * ratio, *args, **kwargs)
