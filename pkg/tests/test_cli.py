import contextlib
import csv
import io
import json
import tempfile
import unittest
from pathlib import Path

from padeit.cli import EXIT_OK, EXIT_USAGE, run
from padeit.run_dispatcher import RunDispatcher
from tests.fixtures import quick_config

PERTURBATION = {"k_levels": [0, 1], "trials_per_cell": 2}
CLASSIFICATION = {"divisions": [[0.0, 20.0]], "fullness_pairs": [[0.0, 20.0]], "fullness_max_k": 1}


def _read_csv(path):
    with open(path, newline="", encoding="utf-8") as handle:
        return list(csv.reader(handle))


class CliTestCase(unittest.TestCase):
    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.tmpdir = Path(self._tmp.name)

    def tearDown(self):
        self._tmp.cleanup()

    def write_config(self, config, name="config.json"):
        path = self.tmpdir / name
        path.write_text(config.to_json(), encoding="utf-8")
        return str(path)

    def invoke(self, *argv):
        stderr = io.StringIO()
        with contextlib.redirect_stderr(stderr):
            code = run(list(argv))
        return code, stderr.getvalue()


class SimulateCommandTests(CliTestCase):
    def test_simulate_writes_every_artifact(self):
        out = self.tmpdir / "sim"
        code, _ = self.invoke("simulate", "--config", self.write_config(quick_config()), "--out", str(out))
        self.assertEqual(code, EXIT_OK)
        for name in ("frames.csv", "channels.csv", "electrodes.csv", "field.csv", "slice.csv", "slice.pgm",
                     "summary.csv", "effective_config.json"):
            self.assertTrue((out / name).exists(), name)
        frames = _read_csv(out / "frames.csv")
        self.assertEqual(len(frames), 1 + 6)
        self.assertEqual(len(frames[0]), 1 + 48)
        summary = dict(_read_csv(out / "summary.csv")[1:])
        self.assertEqual(summary["degenerate"], "0")
        self.assertEqual(summary["channels"], "48")
        self.assertTrue((out / "slice.pgm").read_bytes().startswith(b"P5"))
        effective = json.loads((out / "effective_config.json").read_text(encoding="utf-8"))
        self.assertEqual(effective["output_dir"], str(out))

    def test_simulate_is_deterministic(self):
        config = self.write_config(quick_config(reconstruction={"frames_per_state": 3, "slice_resolution": 16,
                                                                "noise_sd": 1e-6}))
        first, second = self.tmpdir / "a", self.tmpdir / "b"
        self.assertEqual(self.invoke("simulate", "--config", config, "--out", str(first), "--seed", "9")[0], EXIT_OK)
        self.assertEqual(self.invoke("simulate", "--config", config, "--out", str(second), "--seed", "9")[0], EXIT_OK)
        for name in ("frames.csv", "field.csv", "slice.csv", "slice.pgm", "summary.csv"):
            self.assertEqual((first / name).read_bytes(), (second / name).read_bytes(), name)

    def test_zero_volume_is_flagged_degenerate(self):
        config = quick_config()
        config = config.model_validate({**config.model_dump(), "domain": {**config.domain.model_dump(), "volume_ml": 0.0}})
        out = self.tmpdir / "empty"
        code, _ = self.invoke("simulate", "--config", self.write_config(config), "--out", str(out))
        self.assertEqual(code, EXIT_OK)
        summary = dict(_read_csv(out / "summary.csv")[1:])
        self.assertEqual(summary["degenerate"], "1")
        self.assertEqual(summary["roi_ratio"], "nan")


class StudyCommandTests(CliTestCase):
    def test_layout_sweep_rows_follow_the_sweep(self):
        config = quick_config(layout={"rows": 3, "cols": 3, "spacing": 30.0,
                                      "sweep": [{"rows": 2, "cols": 2, "spacing": 30.0},
                                                {"rows": 3, "cols": 3, "spacing": 30.0}]})
        out = self.tmpdir / "layout"
        code, _ = self.invoke("sweep-layout", "--config", self.write_config(config), "--out", str(out))
        self.assertEqual(code, EXIT_OK)
        rows = _read_csv(out / "layout_sweep.csv")
        self.assertEqual(
            rows[0], ["layout", "rows", "cols", "spacing_mm", "channels", "roi_ratio", "degenerate", "peak_in_bladder"]
        )
        self.assertEqual([r[0] for r in rows[1:]], ["2x2@30mm", "3x3@30mm"])

    def test_perturbation_sweep_then_classify(self):
        config = self.write_config(quick_config(perturbation=PERTURBATION, classification=CLASSIFICATION))
        sweep_out = self.tmpdir / "sweep"
        code, _ = self.invoke("sweep-perturbation", "--config", config, "--out", str(sweep_out), "--threads", "2")
        self.assertEqual(code, EXIT_OK)
        dataset = _read_csv(sweep_out / "dataset.csv")
        self.assertEqual(len(dataset), 1 + 2 * 2 * 2)
        self.assertEqual(dataset[0][-4:], ["label_ml", "k", "trial", "seed"])
        accuracy = _read_csv(sweep_out / "accuracy_vs_k.csv")
        self.assertEqual([r[1] for r in accuracy[1:]], ["0", "1"])

        classify_out = self.tmpdir / "classify"
        code, _ = self.invoke(
            "classify", "--config", config, "--out", str(classify_out), "--dataset", str(sweep_out / "dataset.csv")
        )
        self.assertEqual(code, EXIT_OK)
        fullness = _read_csv(classify_out / "fullness.csv")
        self.assertEqual(fullness[1][:2], ["0", "20"])
        roc = _read_csv(classify_out / "roc.csv")
        self.assertEqual(roc[1][2:4], ["0", "0"])
        self.assertEqual(roc[-1][2:5], ["1", "1", "-inf"])


class AnalyzeCommandTests(CliTestCase):
    def setUp(self):
        super().setUp()
        self.sim = self.tmpdir / "sim"
        self.config = self.write_config(quick_config())
        self.assertEqual(self.invoke("simulate", "--config", self.config, "--out", str(self.sim))[0], EXIT_OK)
        self.frames = str(self.sim / "frames.csv")

    def analyze(self, *extra):
        out = self.tmpdir / "analysis"
        code, err = self.invoke("analyze", *extra, "--config", self.config, "--out", str(out))
        return code, err, out

    def test_baseline_first_row_is_zero(self):
        code, _, out = self.analyze("baseline", "--input", self.frames)
        self.assertEqual(code, EXIT_OK)
        rows = _read_csv(out / "analysis_baseline.csv")
        self.assertTrue(all(value == "0" for value in rows[1][1:]))

    def test_group_of_three(self):
        code, _, out = self.analyze("group", "--input", self.frames, "--group-size", "3")
        self.assertEqual(code, EXIT_OK)
        self.assertEqual(len(_read_csv(out / "analysis_group.csv")), 1 + 2)

    def test_compare_identical_series(self):
        code, _, out = self.analyze("compare", "--input", self.frames, "--input-b", self.frames)
        self.assertEqual(code, EXIT_OK)
        values = {name: float(value) for name, value in _read_csv(out / "analysis_compare.csv")[1:]}
        self.assertAlmostEqual(values["cosine"], 1.0, places=10)
        self.assertAlmostEqual(values["pearson"], 1.0, places=10)
        self.assertAlmostEqual(values["global_pearson"], 1.0, places=10)

    def test_window_and_global(self):
        self.assertEqual(self.analyze("window", "--input", self.frames, "--window", "1")[0], EXIT_OK)
        code, _, out = self.analyze("global", "--input", self.frames)
        self.assertEqual(code, EXIT_OK)
        self.assertEqual(len(_read_csv(out / "analysis_global.csv")), 1 + 6)

    def test_profile_has_one_row_per_channel(self):
        code, _, out = self.analyze("profile", "--input", self.frames)
        self.assertEqual(code, EXIT_OK)
        rows = _read_csv(out / "analysis_profile.csv")
        self.assertEqual(rows[0], ["channel", "mean", "sd"])
        self.assertEqual(len(rows), 1 + 48)
        self.assertTrue(all(abs(float(r[1])) <= 1.0 for r in rows[1:]))

    def test_compare_needs_two_inputs(self):
        code, err, _ = self.analyze("compare", "--input", self.frames)
        self.assertEqual(code, EXIT_USAGE)
        self.assertEqual(json.loads(err)["error"], "UsageError")


class CliErrorTests(CliTestCase):
    def test_missing_subcommand_is_a_usage_error(self):
        code, err = self.invoke()
        self.assertEqual(code, EXIT_USAGE)
        self.assertEqual(len(err.strip().splitlines()), 1)
        self.assertEqual(json.loads(err)["error"], "UsageError")

    def test_classify_without_dataset(self):
        code, err = self.invoke("classify", "--out", str(self.tmpdir))
        self.assertEqual(code, EXIT_USAGE)

    def test_invalid_config_reports_validation_error(self):
        path = self.tmpdir / "bad.json"
        path.write_text('{"schema_version": 2}', encoding="utf-8")
        code, err = self.invoke("simulate", "--config", str(path), "--out", str(self.tmpdir / "x"))
        self.assertEqual(code, EXIT_USAGE)
        self.assertEqual(json.loads(err)["error"], "ValidationError")

    def test_missing_input_file(self):
        code, err = self.invoke("analyze", "baseline", "--input", str(self.tmpdir / "nope.csv"),
                                "--out", str(self.tmpdir / "x"))
        self.assertEqual(code, EXIT_USAGE)
        self.assertEqual(json.loads(err)["error"], "FileNotFoundError")

    def test_dispatcher_lists_subcommands(self):
        self.assertEqual(
            RunDispatcher().subcommands,
            ["simulate", "sweep-layout", "sweep-perturbation", "analyze", "classify"],
        )


if __name__ == "__main__":
    unittest.main()
