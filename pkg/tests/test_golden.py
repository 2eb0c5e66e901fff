"""Regression tests against the frozen fixtures in tests/fixtures/golden.

The fixtures were produced once by scripts/make_golden.py and committed.
These tests re-run the same commands and require byte-identical output, so
any change to file formats, seeding, or numerics shows up as a diff here.
"""

import filecmp
import json
from pathlib import Path

import pytest

from latentgrid.cli import main
from latentgrid.synth import CLASSES

GOLDEN = Path(__file__).parent / "fixtures" / "golden"


@pytest.fixture(scope="module")
def golden():
    assert GOLDEN.exists(), "run scripts/make_golden.py to build fixtures"
    return GOLDEN


def test_eval_reproduces_frozen_report(golden, tmp_path):
    report = tmp_path / "report.json"
    assert main(["eval", "--model", str(golden / "run" / "model.ckpt"),
                 "--data", str(golden / "data"),
                 "--report", str(report)]) == 0
    assert report.read_bytes() == (golden / "report.json").read_bytes()


def test_infer_zero_noise_normal(golden, capsys):
    assert main(["infer", "--model", str(golden / "run" / "model.ckpt"),
                 "--sample", str(golden / "normal_sample.bin")]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["label"] == "normal"
    assert payload["probabilities"]["normal"] == max(
        payload["probabilities"].values()
    )


def test_synth_reproduces_frozen_dataset(golden, tmp_path):
    out = tmp_path / "data"
    assert main(["synth", "--config", str(golden / "synth.json"),
                 "--out", str(out)]) == 0
    for name in ("manifest.json", "labels.csv", "sample_000000.bin",
                 "sample_000127.bin"):
        assert filecmp.cmp(out / name, golden / "data" / name, shallow=False), name


def test_train_reproduces_frozen_checkpoint(golden, tmp_path):
    out = tmp_path / "run"
    assert main(["train", "--data", str(golden / "data"),
                 "--config", str(golden / "experiment.json"),
                 "--out", str(out)]) == 0
    assert (out / "history.csv").read_bytes() == \
        (golden / "run" / "history.csv").read_bytes()
    assert (out / "model.ckpt").read_bytes() == \
        (golden / "run" / "model.ckpt").read_bytes()


def test_frozen_report_sane(golden):
    report = json.loads((golden / "report.json").read_text())
    assert report["accuracy"] >= 0.9
    assert set(report["per_class"]) == set(CLASSES)
    assert report["precision_at_k"]["k"] == 7
