import json
import logging
import time

import numpy as np
import pytest

from slicemotion import logging as slicemotion_logging
from slicemotion.errors import DocstringMessageMixin, InvalidInputError, RetryBudgetExhaustedError
from slicemotion.graph import create_loss_graph, create_trajectory_graph
from slicemotion.manifest import (
    ExperimentManifest,
    ManifestError,
    archive_manifest,
    load_manifest,
    simulate_experiment,
)
from slicemotion.motionsim import MotionTrajectory
from slicemotion.parallel import map_ordered
from slicemotion.rng import substream

from conftest import small_acquisition, small_phantom_spec


def tiny_manifest(**update) -> ExperimentManifest:
    values = dict(seed=4, phantom=small_phantom_spec(), acquisition=small_acquisition())
    return ExperimentManifest(**(values | update))


def test_seed_reaches_every_config():
    manifest = tiny_manifest().seeded()
    assert manifest.phantom.feature_seed == 4
    assert manifest.trajectory.seed == 4
    assert manifest.acquisition.seed == 4

    overridden = tiny_manifest().with_overrides(seed=9, output_dir="elsewhere")
    assert overridden.seed == 9
    assert str(overridden.output_dir) == "elsewhere"
    assert tiny_manifest().with_overrides() == tiny_manifest()


def test_manifest_round_trip(tmp_path):
    manifest = tiny_manifest(static=True)
    path = archive_manifest(manifest, tmp_path)
    assert load_manifest(path) == manifest


def test_invalid_manifest(tmp_path):
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps({"orientations": ["oblique"]}))
    with pytest.raises(ManifestError):
        load_manifest(path)
    path.write_text("not json")
    with pytest.raises(InvalidInputError):
        load_manifest(path)


def test_static_experiment_has_no_motion():
    sim = simulate_experiment(tiny_manifest(static=True))
    assert [s.orientation.value for s in sim.stacks] == ["axial", "coronal", "sagittal"]
    for stack in sim.stacks:
        assert all(T.is_identity() for T in stack.true_transforms)


def test_experiments_are_reproducible():
    a = simulate_experiment(tiny_manifest())
    b = simulate_experiment(tiny_manifest())
    c = simulate_experiment(tiny_manifest(seed=5))
    np.testing.assert_array_equal(a.phantom.data, b.phantom.data)
    for sa, sb in zip(a.stacks, b.stacks):
        np.testing.assert_array_equal(sa.slices, sb.slices)
    assert not np.array_equal(a.trajectories[0].params, c.trajectories[0].params)


def test_substreams():
    a = substream(1, "trajectory", "axial").normal(size=4)
    b = substream(1, "trajectory", "axial").normal(size=4)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, substream(1, "trajectory", "coronal").normal(size=4))
    assert not np.array_equal(a, substream(2, "trajectory", "axial").normal(size=4))
    # "1" and 1 are distinct labels
    assert not np.array_equal(substream(0, 1).normal(size=4), substream(0, "1").normal(size=4))


def test_map_ordered_keeps_input_order():
    def slow_square(x: int) -> int:
        time.sleep(0.01 * (5 - x))
        return x * x

    assert map_ordered(slow_square, range(5), max_workers=4) == [0, 1, 4, 9, 16]
    assert map_ordered(slow_square, [], max_workers=4) == []
    assert map_ordered(slow_square, range(3), max_workers=1) == [0, 1, 4]


def test_json_formatter_keeps_extra_fields():
    logger = logging.getLogger("slicemotion.test")
    record = logger.makeRecord(
        logger.name, logging.INFO, __file__, 1, "epoch %d", (3,), None, extra={"loss": 0.5}
    )
    data = json.loads(slicemotion_logging.JSONFormatter().format(record))
    assert data["message"] == "epoch 3"
    assert data["level"] == "INFO"
    assert data["loss"] == 0.5
    assert "msg" not in data


def test_setup_logging_does_not_stack_handlers(isolated_log_file):
    root = logging.getLogger()
    before = len(root.handlers)
    level = root.level
    try:
        slicemotion_logging.setup_logging(verbose=0)
        slicemotion_logging.setup_logging(verbose=2)
        assert len(root.handlers) == before + 2
        assert root.level == logging.DEBUG

        logging.getLogger("slicemotion.test").info("written", extra={"sigma_mm": 1.2})
        for handler in root.handlers:
            handler.flush()
        lines = isolated_log_file.read_text().splitlines()
        assert json.loads(lines[-1])["sigma_mm"] == 1.2
    finally:
        for handler in slicemotion_logging._installed_handlers:
            root.removeHandler(handler)
            handler.close()
        slicemotion_logging._installed_handlers.clear()
        root.setLevel(level)


def test_graphs_are_png():
    traj = MotionTrajectory.static(5)
    assert create_trajectory_graph(traj, title="static").getvalue().startswith(b"\x89PNG")
    graph = create_loss_graph([1.0, 0.5, 0.25], [1.2, 0.6, 0.4], switch_epoch=2)
    assert graph.getvalue().startswith(b"\x89PNG")


def test_docstring_messages():
    assert str(RetryBudgetExhaustedError()) == RetryBudgetExhaustedError.__doc__
    assert str(RetryBudgetExhaustedError("custom")) == "custom"

    class Unnamed(DocstringMessageMixin, Exception):
        """First line.

        More detail.
        """

    assert str(Unnamed()) == "First line."
