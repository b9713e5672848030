"""Long-running studies on full-size domains. Enabled with PADEIT_RUN_SLOW=1."""

import csv
import tempfile
import unittest
from pathlib import Path

import numpy as np

from padeit.analysis import binary_fullness_eval, evaluate_loo
from padeit.cli import EXIT_OK, run
from padeit.domain import build_domain
from padeit.experiment_models import DomainSpec, ExperimentConfig, LayoutSpec
from padeit.perturb import LabeledDataset, generate_dataset, layout_sweep
from tests.fixtures import RUN_SLOW, SLOW_REASON

# Deeper, wider box with a coarser mesh.
OLD_BOX = DomainSpec(size=[300.0, 240.0, 140.0], bladder_depth=60.0, target_elements=12000)


@unittest.skipUnless(RUN_SLOW, SLOW_REASON)
class SimulateStudyTests(unittest.TestCase):
    def test_slice_extremum_lies_in_the_bladder(self):
        config = ExperimentConfig()
        with tempfile.TemporaryDirectory() as tmpdir:
            self.assertEqual(run(["simulate", "--out", tmpdir]), EXIT_OK)
            values = np.loadtxt(Path(tmpdir) / "slice.csv", delimiter=",", ndmin=2)
        domain = build_domain(config.domain, config.layout)
        inclusion = domain.inclusion(config.domain.volume_ml)
        lower, upper = domain.mesh.bounding_box
        ny, nx = values.shape
        iy, ix = np.unravel_index(int(np.argmax(np.abs(values))), values.shape)
        x = lower[0] + (ix + 0.5) * (upper[0] - lower[0]) / nx
        y = lower[1] + (iy + 0.5) * (upper[1] - lower[1]) / ny
        cx, cy, _ = inclusion.center
        a, b, _ = inclusion.radii
        self.assertLessEqual(((x - cx) / a) ** 2 + ((y - cy) / b) ** 2, 1.0)

    def test_summary_reports_peak_in_the_bladder(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            self.assertEqual(run(["simulate", "--out", tmpdir]), EXIT_OK)
            with open(Path(tmpdir) / "summary.csv", newline="", encoding="utf-8") as handle:
                summary = dict(list(csv.reader(handle))[1:])
        self.assertEqual(summary["degenerate"], "0")
        self.assertEqual(summary["peak_in_bladder"], "1")


@unittest.skipUnless(RUN_SLOW, SLOW_REASON)
class LayoutStudyTests(unittest.TestCase):
    def test_denser_and_wider_pads_focus_better(self):
        config = ExperimentConfig()
        self.assertGreaterEqual(config.domain.target_elements, 10000)
        results = layout_sweep(config.domain, config.layout, config.layout.sweep, 100.0, threads=4)
        ratio = {r.label: r.roi_ratio for r in results}
        self.assertFalse(any(r.degenerate for r in results))
        self.assertTrue(all(r.peak_inside for r in results))

        self.assertLess(ratio["2x4@60mm"], ratio["3x3@60mm"])
        self.assertLess(ratio["3x3@60mm"], ratio["3x4@60mm"])
        self.assertGreaterEqual(ratio["4x4@60mm"], 0.9 * ratio["3x4@60mm"])

        self.assertLess(ratio["3x3@30mm"], ratio["3x3@45mm"])
        self.assertLess(ratio["3x3@45mm"], ratio["3x3@60mm"])


@unittest.skipUnless(RUN_SLOW, SLOW_REASON)
class PerturbationStudyTests(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        domain = build_domain(OLD_BOX, LayoutSpec())
        cls.dataset = generate_dataset(
            domain, [0.0, 200.0, 400.0], [0, 1, 2, 3], trials_per_cell=8, seed=3, noise_sd=1e-7, threads=4
        )

    def test_full_bladder_is_detected(self):
        result = binary_fullness_eval(self.dataset, 0.0, 400.0)
        self.assertFalse(result.resubstitution)
        self.assertGreaterEqual(result.auc, 0.99)

    def test_three_volumes_are_separated(self):
        report = evaluate_loo(self.dataset, threads=4)
        self.assertGreater(report.mean_accuracy, 0.8)

    def test_shuffled_labels_are_at_chance(self):
        rng = np.random.default_rng(21)
        data = self.dataset
        scores = []
        for _ in range(20):
            shuffled = LabeledDataset(
                data.features, rng.permutation(data.labels), data.groups, data.trials, data.seeds, data.channel_ids
            )
            scores.append(evaluate_loo(shuffled).mean_accuracy)
        n = len(data)
        standard_error = np.sqrt((1.0 / 3.0) * (2.0 / 3.0) / n)
        self.assertLess(abs(np.mean(scores) - 1.0 / 3.0), 3.0 * standard_error)


@unittest.skipUnless(RUN_SLOW, SLOW_REASON)
class AccuracyVersusKTests(unittest.TestCase):
    THREE_CLASS = [0.0, 200.0, 400.0]
    FIVE_CLASS = [0.0, 100.0, 200.0, 300.0, 400.0]

    @classmethod
    def setUpClass(cls):
        domain = build_domain(OLD_BOX, LayoutSpec())
        dataset = generate_dataset(
            domain, cls.FIVE_CLASS, list(range(10)), trials_per_cell=8, seed=5, noise_sd=1e-7, threads=4
        )
        cls.reports = {
            3: evaluate_loo(dataset, cls.THREE_CLASS, threads=4),
            5: evaluate_loo(dataset, cls.FIVE_CLASS, threads=4),
        }

    def test_unperturbed_rows_are_all_correct(self):
        for report in self.reports.values():
            self.assertEqual(report.accuracy_for(0), 1.0)

    def test_accuracy_bands_at_the_largest_perturbation(self):
        three, five = self.reports[3].accuracy_for(9), self.reports[5].accuracy_for(9)
        self.assertGreaterEqual(three, five)
        self.assertLessEqual(abs(three - 0.896), 0.10)
        self.assertLessEqual(abs(five - 0.588), 0.15)

    def test_accuracy_drops_with_more_moved_electrodes(self):
        self.assertLess(self.reports[5].accuracy_for(9), self.reports[5].accuracy_for(1))
        self.assertLessEqual(self.reports[3].accuracy_for(9), self.reports[3].accuracy_for(1))

if __name__ == "__main__":
    unittest.main()
