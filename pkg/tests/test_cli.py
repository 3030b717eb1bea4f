"""CLI surface: exit codes, file outputs, manifests, determinism."""

from __future__ import annotations

import json

import pytest
from click.testing import CliRunner

from bgwtilt.cli import main

TWO_TYPE = "builtin:two-type"


@pytest.fixture()
def runner():
    return CliRunner()


def run(runner, args):
    return runner.invoke(main, args, catch_exceptions=False)


class TestValidateCommand:
    def test_ok_family(self, runner, tmp_path):
        result = run(runner, ["validate", TWO_TYPE, "--out-dir", str(tmp_path)])
        assert result.exit_code == 0
        payload = json.loads((tmp_path / "validate.json").read_text())
        assert all(payload["flags"].values())

    def test_failing_property(self, runner, tmp_path):
        fam = tmp_path / "chain.json"
        fam.write_text(json.dumps({
            "K": 1,
            "types": [{"type": 1, "atoms": [{"word": [1], "prob": "1"}]}],
        }))
        result = run(runner, ["validate", str(fam), "--out-dir", str(tmp_path / "o")])
        assert result.exit_code == 1

    def test_malformed_file(self, runner, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        result = run(runner, ["validate", str(bad), "--out-dir", str(tmp_path / "o")])
        assert result.exit_code == 2

    def test_unknown_builtin(self, runner, tmp_path):
        result = run(runner, ["validate", "builtin:nope", "--out-dir", str(tmp_path)])
        assert result.exit_code == 2


class TestFindCriticalCommand:
    def test_two_type(self, runner, tmp_path):
        result = run(runner, [
            "find-critical", TWO_TYPE, "--gamma", "1 1",
            "--direction", "0.5 0.5", "--out-dir", str(tmp_path),
        ])
        assert result.exit_code == 0
        payload = json.loads((tmp_path / "critical.json").read_text())
        assert payload["residuals"]["rho_gap"] <= 1e-8
        assert payload["cone_case"] == "OpenCone"

    def test_bad_gamma(self, runner, tmp_path):
        result = run(runner, [
            "find-critical", TWO_TYPE, "--gamma", "0 0", "--out-dir", str(tmp_path),
        ])
        assert result.exit_code == 2


class TestBoundaryCommand:
    def test_files_written(self, runner, tmp_path):
        result = run(runner, [
            "boundary", TWO_TYPE, "--points", "5", "--out-dir", str(tmp_path),
        ])
        assert result.exit_code == 0
        assert (tmp_path / "boundary.csv").exists()
        assert (tmp_path / "boundary.svg").exists()
        header = (tmp_path / "boundary.csv").read_text().splitlines()[0]
        assert header == "t,theta1,theta2,chi1,chi2"

    def test_single_point(self, runner, tmp_path):
        result = run(runner, [
            "boundary", TWO_TYPE, "--points", "1", "--out-dir", str(tmp_path),
        ])
        assert result.exit_code == 0
        assert len((tmp_path / "boundary.csv").read_text().splitlines()) == 2

    def test_wrong_type_count(self, runner, tmp_path):
        fam = tmp_path / "mono.json"
        fam.write_text(json.dumps({
            "K": 1,
            "types": [{"type": 1, "atoms": [
                {"word": [], "prob": "1/2"}, {"word": [1, 1], "prob": "1/2"},
            ]}],
        }))
        result = run(runner, ["boundary", str(fam), "--out-dir", str(tmp_path / "o")])
        assert result.exit_code == 2


class TestSampleCommand:
    def test_requires_positive_samples(self, runner, tmp_path):
        result = run(runner, [
            "sample", TWO_TYPE, "--samples", "0", "--seed", "1",
            "--out-dir", str(tmp_path),
        ])
        assert result.exit_code == 2

    def test_seed_reproducibility(self, runner, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        args = ["sample", TWO_TYPE, "--samples", "20", "--seed", "7",
                "--gamma", "1 1", "--g", "5", "--cap", "6"]
        assert run(runner, args + ["--out-dir", str(out1)]).exit_code == 0
        assert run(runner, args + ["--out-dir", str(out2)]).exit_code == 0
        assert (out1 / "trees.txt").read_bytes() == (out2 / "trees.txt").read_bytes()

    def test_counts_family_cannot_sample(self, runner, tmp_path):
        fam = tmp_path / "counts.json"
        fam.write_text(json.dumps({
            "K": 1,
            "types": [{"type": 1, "atoms": [
                {"counts": [0], "prob": "1/2"}, {"counts": [2], "prob": "1/2"},
            ]}],
        }))
        result = run(runner, [
            "sample", str(fam), "--samples", "3", "--seed", "1",
            "--out-dir", str(tmp_path / "o"),
        ])
        assert result.exit_code == 2


class TestKestenCommand:
    def test_critical_family(self, runner, tmp_path):
        fam = tmp_path / "mono.json"
        fam.write_text(json.dumps({
            "K": 1,
            "types": [{"type": 1, "atoms": [
                {"word": [], "prob": "1/2"}, {"word": [1, 1], "prob": "1/2"},
            ]}],
        }))
        result = run(runner, [
            "kesten", str(fam), "--depth", "3", "--samples", "4", "--seed", "2",
            "--out-dir", str(tmp_path / "o"),
        ])
        assert result.exit_code == 0
        text = (tmp_path / "o" / "kesten.txt").read_text()
        assert "spine=" in text

    def test_noncritical_rejected(self, runner, tmp_path):
        result = run(runner, [
            "kesten", TWO_TYPE, "--depth", "2", "--samples", "2", "--seed", "2",
            "--out-dir", str(tmp_path),
        ])
        assert result.exit_code == 2


class TestLocalLimitCommand:
    def test_small_pipeline(self, runner, tmp_path):
        result = run(runner, [
            "locallimit", TWO_TYPE, "--gamma", "1 1", "--targets", "8,16",
            "--samples", "400", "--kesten-samples", "1500", "--seed", "5",
            "--out-dir", str(tmp_path),
        ])
        assert result.exit_code == 0
        rows = (tmp_path / "locallimit.csv").read_text().splitlines()
        assert rows[0] == "g,tv,samples,kesten_samples"
        assert len(rows) == 3
        assert (tmp_path / "balls-g8.csv").exists()
        assert (tmp_path / "locallimit.svg").exists()


class TestAppendixCommands:
    def test_b_small(self, runner, tmp_path):
        result = run(runner, ["appendix", "b", "--N", "3", "--out-dir", str(tmp_path)])
        assert result.exit_code == 0
        payload = json.loads((tmp_path / "preimages.json").read_text())
        assert payload["count"] == 20
        assert payload["max_abs_chi"] <= 1e-10

    def test_b_invalid_n(self, runner, tmp_path):
        result = run(runner, ["appendix", "b", "--N", "2", "--out-dir", str(tmp_path)])
        assert result.exit_code == 2

    def test_a_scan(self, runner, tmp_path):
        result = run(runner, [
            "appendix", "a", "--A", "10", "--eps", "0.01",
            "--s-ladder", "10,20", "--grid-n", "100", "--out-dir", str(tmp_path),
        ])
        assert result.exit_code == 0
        assert (tmp_path / "scan.csv").read_text().splitlines()[0] == "s,theta1,theta2,residual"
        payload = json.loads((tmp_path / "scan.json").read_text())
        assert "cannot certify nonexistence" in payload["disclaimer"]

    def test_a_solve_divergence_exit_code(self, runner, tmp_path):
        result = run(runner, [
            "appendix", "a", "--A", "10", "--eps", "0.01", "--s-ladder", "10",
            "--grid-n", "100", "--solve", "--out-dir", str(tmp_path),
        ])
        assert result.exit_code == 3


class TestManifests:
    def test_rerun_reproduces(self, runner, tmp_path):
        out = tmp_path / "run"
        args = ["sample", TWO_TYPE, "--samples", "10", "--seed", "3",
                "--gamma", "1 1", "--g", "4", "--cap", "5", "--out-dir", str(out)]
        assert run(runner, args).exit_code == 0
        manifest = out / "sample.manifest.json"
        assert manifest.exists()
        redo = tmp_path / "redo"
        result = run(runner, ["rerun", str(manifest), "--out-dir", str(redo)])
        assert result.exit_code == 0
        assert "bit-exactly" in result.output

    def test_manifest_lists_outputs(self, runner, tmp_path):
        assert run(runner, ["validate", TWO_TYPE, "--out-dir", str(tmp_path)]).exit_code == 0
        doc = json.loads((tmp_path / "validate.manifest.json").read_text())
        assert doc["command"] == "validate"
        assert doc["outputs"][0]["name"] == "validate.json"
        assert len(doc["outputs"][0]["sha256"]) == 64


class TestEmitFamily:
    def test_roundtrip(self, runner, tmp_path):
        dest = tmp_path / "two.json"
        assert run(runner, ["emit-family", "two-type", str(dest)]).exit_code == 0
        result = run(runner, ["validate", str(dest), "--out-dir", str(tmp_path / "o")])
        assert result.exit_code == 0
