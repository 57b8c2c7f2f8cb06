import json
import logging

import numpy as np
import pytest
from click.testing import CliRunner

from slicemotion import __version__, state
from slicemotion import logging as slicemotion_logging
from slicemotion.acquisition import load_stack
from slicemotion.cli.__main__ import main
from slicemotion.volume import load_volume

from conftest import small_train_config

TINY_MANIFEST = {
    "seed": 3,
    "phantom": {"dims": [16, 16, 16], "spacing_mm": 6.0, "size_mm": 80.0},
    "acquisition": {
        "n_slices": 8,
        "thickness_mm": 6.0,
        "in_plane_shape": [16, 16],
        "in_plane_spacing_mm": 6.0,
    },
    "pipeline": {
        "n_outer": 0,
        "reject": False,
        "srr": {"max_cg_iterations": 5, "target_spacing_mm": 6.0},
    },
}


@pytest.fixture(autouse=True)
def remove_cli_handlers(monkeypatch):
    monkeypatch.setattr(state, "MAX_WORKERS", state.MAX_WORKERS)
    yield
    root = logging.getLogger()
    for handler in slicemotion_logging._installed_handlers:
        root.removeHandler(handler)
        handler.close()
    slicemotion_logging._installed_handlers.clear()


@pytest.fixture
def runner() -> CliRunner:
    return CliRunner()


@pytest.fixture
def manifest_path(tmp_path):
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps(TINY_MANIFEST))
    return path


@pytest.fixture
def simulated(runner, manifest_path, tmp_path):
    out = tmp_path / "sim"
    result = runner.invoke(main, ["simulate", "--manifest", str(manifest_path), "--out", str(out)])
    assert result.exit_code == 0, result.output
    return out


def stack_args(out) -> list[str]:
    return [str(out / "stacks" / name) for name in ("axial", "coronal", "sagittal")]


def test_version_and_appdirs(runner):
    result = runner.invoke(main, ["--version"])
    assert result.exit_code == 0
    assert __version__ in result.output

    result = runner.invoke(main, ["appdirs"])
    assert result.exit_code == 0
    assert "log_file" in result.output


def test_simulate_writes_every_output(simulated):
    assert (simulated / "manifest.json").is_file()
    assert load_volume(simulated / "phantom.raw").dims == (16, 16, 16)
    for name in ("axial", "coronal", "sagittal"):
        stack = load_stack(simulated / "stacks" / name)
        assert stack.n_slices == 8
        assert stack.true_transforms is not None
        assert (simulated / "trajectories" / f"{name}.csv").is_file()
        assert (simulated / "trajectories" / f"{name}.png").read_bytes().startswith(b"\x89PNG")


def test_simulate_is_deterministic(runner, manifest_path, simulated, tmp_path):
    again = tmp_path / "again"
    args = ["simulate", "--manifest", str(manifest_path), "--no-plot", "--threads", "2"]
    result = runner.invoke(main, [*args, "--out", str(again)])
    assert result.exit_code == 0, result.output

    for name in ("axial", "coronal", "sagittal"):
        a = load_stack(simulated / "stacks" / name)
        b = load_stack(again / "stacks" / name)
        np.testing.assert_array_equal(a.slices, b.slices)
        csv = f"trajectories/{name}.csv"
        assert (simulated / csv).read_text() == (again / csv).read_text()


def test_thread_count_does_not_change_outputs(runner, manifest_path, tmp_path):
    outputs = []
    for threads in (1, 4):
        out = tmp_path / f"threads-{threads}"
        args = ["simulate", "--manifest", str(manifest_path), "--no-plot", "--threads", str(threads)]
        result = runner.invoke(main, [*args, "--out", str(out)])
        assert result.exit_code == 0, result.output
        outputs.append(out)

    single, pooled = outputs
    files = sorted(p.relative_to(single) for p in (single / "stacks").rglob("*") if p.is_file())
    files += [f"trajectories/{name}.csv" for name in ("axial", "coronal", "sagittal")]
    assert len(files) > 3
    for name in files:
        assert (single / name).read_bytes() == (pooled / name).read_bytes(), name
    assert (single / "phantom.raw").read_bytes() == (pooled / "phantom.raw").read_bytes()


def test_static_simulation(runner, manifest_path, tmp_path):
    out = tmp_path / "static"
    args = ["simulate", "--manifest", str(manifest_path), "--static", "--no-plot", "--out", str(out)]
    result = runner.invoke(main, args)
    assert result.exit_code == 0, result.output
    stack = load_stack(out / "stacks" / "axial")
    assert all(T.is_identity() for T in stack.true_transforms)
    assert json.loads((out / "manifest.json").read_text())["static"] is True


def test_invalid_manifest(runner, tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"seed": "not a number"}))
    result = runner.invoke(main, ["simulate", "--manifest", str(path), "--out", str(tmp_path / "o")])
    assert result.exit_code == 2
    assert "Invalid input" in result.output


@pytest.mark.parametrize("method", ["sda", "srr"])
def test_reconstruct(runner, simulated, tmp_path, method):
    out = tmp_path / "rec"
    args = ["reconstruct", *stack_args(simulated), "--method", method, "--spacing", "6", "--iterations", "5"]
    result = runner.invoke(main, [*args, "--out", str(out)])
    assert result.exit_code == 0, result.output

    volume = load_volume(out / f"{method}.raw")
    assert volume.grid.spacing_mm == (6.0, 6.0, 6.0)
    assert np.all(np.isfinite(volume.data))
    assert volume.data.max() > 0


def test_reconstruct_needs_existing_stacks(runner, tmp_path):
    result = runner.invoke(main, ["reconstruct", str(tmp_path / "missing")])
    assert result.exit_code == 2


def test_register_without_refinement(runner, simulated, tmp_path):
    out = tmp_path / "reg"
    args = ["register", *stack_args(simulated), "--n-outer", "0", "--no-reject", "--out", str(out)]
    result = runner.invoke(main, args)
    assert result.exit_code == 0, result.output
    assert "Kept 24/24 slices" in result.output
    assert load_volume(out / "volume.raw").dims == (40, 40, 40)

    corrected = load_stack(out / "stacks" / "axial")
    assert all(T.is_identity() for T in corrected.est_transforms)
    assert (out / "transforms" / "axial.json").is_file()


def test_register_affirm_needs_a_checkpoint(runner, simulated):
    result = runner.invoke(main, ["register", *stack_args(simulated), "--coarse", "affirm"])
    assert result.exit_code == 2


def test_evaluate(runner, simulated, tmp_path):
    out = tmp_path / "eval"
    result = runner.invoke(main, ["evaluate", "--stack", str(simulated / "stacks" / "axial"), "--out", str(out)])
    assert result.exit_code == 0, result.output

    report = json.loads((out / "report.json").read_text())
    assert set(report["motion"]) == {"axial"}
    assert report["image"] is None
    assert (out / "report.csv").read_text().startswith("stack,index,")


def test_evaluate_needs_input(runner, simulated, tmp_path):
    result = runner.invoke(main, ["evaluate", "--out", str(tmp_path / "e")])
    assert result.exit_code == 2

    phantom = str(simulated / "phantom.raw")
    result = runner.invoke(main, ["evaluate", "--volume", phantom, "--out", str(tmp_path / "e")])
    assert result.exit_code == 2


def test_pipeline(runner, manifest_path, tmp_path):
    out = tmp_path / "pipeline"
    result = runner.invoke(main, ["pipeline", "--manifest", str(manifest_path), "--out", str(out)])
    assert result.exit_code == 0, result.output

    for name in ("manifest.json", "phantom.raw", "volume.raw", "report.json", "report.csv", "dssim.raw"):
        assert (out / name).is_file(), name
    report = json.loads((out / "report.json").read_text())
    assert set(report["motion"]) == {"axial", "coronal", "sagittal", "all"}
    assert 0.0 <= report["image"]["nrmse"] <= 1.0
    assert "SSIM" in result.output


def test_train_toy(runner, tmp_path):
    config = tmp_path / "train.json"
    config.write_text(small_train_config().model_dump_json())
    out = tmp_path / "train"
    args = ["train-toy", "--config", str(config), "--epochs", "1", "--out", str(out)]

    result = runner.invoke(main, args)
    assert result.exit_code == 0, result.output
    assert (out / "checkpoint.bin").is_file()
    assert (out / "train_config.json").is_file()
    assert (out / "loss.png").read_bytes().startswith(b"\x89PNG")
    assert (out / "history.csv").read_text().splitlines()[0] == "epoch,stage,lr,train_loss,validation_loss"

    # Resuming a finished run trains nothing further
    history = (out / "history.csv").read_text()
    result = runner.invoke(main, [*args, "--resume"])
    assert result.exit_code == 0, result.output
    assert (out / "history.csv").read_text() == history
