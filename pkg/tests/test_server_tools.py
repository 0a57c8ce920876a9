import json
from pathlib import Path
from unittest.mock import patch

from errors import CheckpointError
from evaluation import DISCLAIMER, MetricsReport
from server import DATA_DIR, _describe_impl, _evaluate_impl, _generate_impl


@patch("server.cmd_generate")
def test_generate_tool_reports_written_files(mock_generate, tmp_path):
    mock_generate.return_value = [tmp_path / "sample_00000.pgm", tmp_path / "sample_00001.pgm"]

    # Test the implementation function directly (not the decorated wrapper)
    msg = _generate_impl("/abs/run.qckpt", n=2, out_dir=str(tmp_path), seed=5)

    mock_generate.assert_called_once_with(Path("/abs/run.qckpt"), 2, tmp_path, seed=5)
    assert msg.startswith(f"Wrote 2 images to {tmp_path}")
    assert "sample_00001.pgm" in msg


@patch("server.cmd_generate")
def test_generate_tool_defaults_to_data_dir(mock_generate):
    mock_generate.return_value = []
    msg = _generate_impl("/abs/run.qckpt", n=0)
    assert mock_generate.call_args.args[2] == Path(DATA_DIR) / "samples" / "run"
    assert msg == "No images requested."


@patch("server.cmd_generate", side_effect=CheckpointError("bad magic"))
def test_generate_tool_returns_errors_as_text(mock_generate):
    msg = _generate_impl("/abs/broken.qckpt")
    assert msg == "Error in generate_images: bad magic"


@patch("server.cmd_evaluate")
def test_evaluate_tool_formats_report(mock_evaluate):
    mock_evaluate.return_value = MetricsReport(
        frechet=0.125, n_samples=16, space="pixels", seed=1, checkpoint_epoch=4,
        per_class={"healthy": 0.1, "disease": 0.2}, baseline=0.01,
    )

    output = _evaluate_impl("/abs/run.qckpt", ["/data/healthy", "/data/disease"], n=16, space="pixels")

    assert "--- Fréchet distance (pixels space, epoch 4) ---" in output
    assert "Fréchet: 0.125000" in output
    assert "Real-vs-real baseline: 0.010000" in output
    assert "  disease: 0.200000" in output
    assert output.endswith(DISCLAIMER)


@patch("server.describe_checkpoint")
def test_describe_tool_returns_json(mock_describe, tmp_path):
    path = tmp_path / "epoch_0003.qckpt"
    path.write_bytes(b"")
    mock_describe.return_value = {"epoch": 3, "n_features": 40}

    output = _describe_impl(str(path))

    assert json.loads(output) == {"epoch": 3, "n_features": 40}


def test_describe_tool_errors_when_no_checkpoint():
    msg = _describe_impl("nowhere/epoch_0000.qckpt")
    assert "Error: No checkpoint found at 'nowhere/epoch_0000.qckpt'" in msg
