import json

import pytest
from click.testing import CliRunner

from app.main import cli
from app.services.attack_service import load_attack
from app.utils import ArtifactPaths


@pytest.fixture
def runner():
    return CliRunner()


def _invoke(runner, *args):
    return runner.invoke(cli, list(args), catch_exceptions=False)


def test_eval_before_training_reports_missing_artifact(runner, tiny_config_file, tmp_path):
    result = _invoke(runner, "eval", "--protocol", "asr_snr", "--config", str(tiny_config_file))
    assert result.exit_code == 2
    assert "error: missing_artifact:" in result.output
    assert "synth-data" in result.output


def test_report_before_eval_reports_missing_artifact(runner, tiny_config_file):
    result = _invoke(runner, "report", "--config", str(tiny_config_file))
    assert result.exit_code == 2
    assert "error: missing_artifact:" in result.output


def test_config_errors_name_the_field(runner, tiny_config_file):
    result = _invoke(runner, "synth-data", "--config", str(tiny_config_file), "--set", "model.epochs=-1")
    assert result.exit_code == 2
    assert "error: config: model.epochs" in result.output


def test_data_classifier_and_noise_attack_stages(runner, tiny_config_file, tmp_path):
    out = tmp_path / "stages"
    common = ["--config", str(tiny_config_file), "--output-dir", str(out)]
    assert _invoke(runner, "synth-data", *common).exit_code == 0
    assert _invoke(runner, "train-classifier", *common).exit_code == 0
    assert _invoke(runner, "train-attack", "--variant", "noise", *common).exit_code == 0

    paths = ArtifactPaths(out)
    for path in (paths.dataset("train"), paths.dataset("val"), paths.checkpoint("WB"), paths.checkpoint("BB")):
        assert path.exists()
    manifest = json.loads(paths.manifest.read_text())
    assert set(manifest["commands"]) == {"synth-data", "train-classifier", "train-attack:noise"}
    assert manifest["commands"]["train-attack:noise"]["seeds"]["run_seeds"] == [0, 1]
    attack = load_attack(paths.attack("noise", 1), expected_hash=manifest["config_hash"])
    assert attack.seed == 1
    assert attack.length == 256


def test_changed_config_refuses_existing_directory(runner, tiny_config_file, tmp_path):
    out = tmp_path / "shared"
    assert _invoke(runner, "synth-data", "--config", str(tiny_config_file), "--output-dir", str(out)).exit_code == 0
    result = _invoke(
        runner, "synth-data", "--config", str(tiny_config_file), "--output-dir", str(out), "--set", "model.epochs=4"
    )
    assert result.exit_code == 2
    assert "error: hash_mismatch:" in result.output


def test_run_all_is_reproducible(runner, tiny_config_file, tmp_path):
    summaries = []
    for name in ("first", "second"):
        out = tmp_path / name
        result = _invoke(runner, "run-all", "--config", str(tiny_config_file), "--output-dir", str(out))
        assert result.exit_code == 0, result.output
        assert "defense_ordering:" in result.output
        paths = ArtifactPaths(out)
        assert paths.report("filtering", "fft_no_spectrum", "NA").exists()
        assert paths.report("asr_snr", "fgsm", "BB").exists()
        summaries.append(paths.consolidated_csv.read_bytes())
    assert summaries[0] == summaries[1]

    summary = json.loads((tmp_path / "first" / "summary.json").read_text())
    assert set(summary["acceptance"]) == {"attack_effectiveness", "time_invariance", "filtering", "defense_ordering"}
    assert set(summary["protocols"]) == {"asr_snr", "time_shift", "filtering", "defense_auc", "spectrum"}
