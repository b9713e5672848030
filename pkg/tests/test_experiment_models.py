import tempfile
import unittest
from pathlib import Path

from pydantic import ValidationError

from padeit.experiment_models import (
    ClassificationSpec,
    DomainSpec,
    ErrorResponse,
    ExperimentConfig,
    GridSpec,
    LayoutSpec,
    MeshGenerator,
    PerturbationStudySpec,
    ReconstructionSpec,
    load_config,
)
from padeit.inverse import LambdaRule


class ExperimentConfigTests(unittest.TestCase):
    def test_defaults_describe_the_reference_study(self):
        config = ExperimentConfig()
        self.assertEqual(config.seed, 0)
        self.assertEqual(config.domain.generator, MeshGenerator.box)
        self.assertEqual(config.domain.background_conductivity, 0.2)
        self.assertEqual((config.layout.rows, config.layout.cols, config.layout.spacing), (3, 3, 60.0))
        self.assertEqual(config.reconstruction.p, 0.5)
        self.assertIsNone(config.reconstruction.lam)
        self.assertEqual(config.reconstruction.lambda_rule, LambdaRule.weighted_trace)
        self.assertEqual(config.reconstruction.lambda_scale, 100.0)
        self.assertEqual(config.domain.size, [240.0, 200.0, 100.0])
        self.assertEqual(config.domain.bladder_depth, 50.0)
        self.assertEqual(config.perturbation.k_levels, list(range(10)))
        self.assertEqual(config.perturbation.trials_per_cell, 16)
        self.assertEqual(config.classification.classes, [0.0, 100.0, 200.0, 300.0, 400.0])
        self.assertEqual([g.rows * g.cols for g in config.layout.sweep], [8, 9, 12, 16, 9, 9])

    def test_effective_config_round_trip(self):
        config = ExperimentConfig(seed=42, layout=LayoutSpec(rows=2, cols=4, channel_strategy="rectangle"))
        with tempfile.TemporaryDirectory() as tmpdir:
            path = Path(tmpdir) / "effective_config.json"
            path.write_text(config.to_json(), encoding="utf-8")
            loaded = load_config(path)
        self.assertEqual(loaded, config)

    def test_schema_version_is_checked(self):
        with self.assertRaises(ValidationError):
            ExperimentConfig(schema_version=2)

    def test_seed_must_fit_in_64_bits(self):
        with self.assertRaises(ValidationError):
            ExperimentConfig(seed=2 ** 64)
        with self.assertRaises(ValidationError):
            ExperimentConfig(seed=-1)

    def test_unknown_strategies_rejected(self):
        with self.assertRaises(ValidationError):
            LayoutSpec(channel_strategy="spiral")
        with self.assertRaises(ValidationError):
            LayoutSpec(diagonal_strategy="zigzag")

    def test_lambda_rule_by_name(self):
        spec = ReconstructionSpec.model_validate({"lambda_rule": "trace", "lambda_scale": 0.01})
        self.assertEqual(spec.lambda_rule, LambdaRule.trace)
        with self.assertRaises(ValidationError):
            ReconstructionSpec(lambda_rule="median")
        with self.assertRaises(ValidationError):
            ReconstructionSpec(lambda_scale=0.0)

    def test_file_generator_needs_a_path(self):
        with self.assertRaises(ValidationError):
            DomainSpec(generator="file")
        self.assertEqual(DomainSpec(generator="file", mesh_path="slab.mesh").mesh_path, "slab.mesh")

    def test_grid_needs_four_electrodes(self):
        with self.assertRaises(ValidationError):
            GridSpec(rows=1, cols=3)

    def test_perturbation_ranges(self):
        with self.assertRaises(ValidationError):
            PerturbationStudySpec(impedance_factor_range=[0.5, 2.0])
        with self.assertRaises(ValidationError):
            PerturbationStudySpec(displacement_range=[20.0, 5.0])
        with self.assertRaises(ValidationError):
            PerturbationStudySpec(k_levels=[0, 0, 1])

    def test_divisions_and_pairs(self):
        with self.assertRaises(ValidationError):
            ClassificationSpec(divisions=[[0.0]])
        with self.assertRaises(ValidationError):
            ClassificationSpec(fullness_pairs=[[400.0, 0.0]])

    def test_error_response_is_one_json_line(self):
        line = ErrorResponse(error="UsageError", detail="bad flag").model_dump_json()
        self.assertNotIn("\n", line)
        self.assertIn('"error":"UsageError"', line)


if __name__ == "__main__":
    unittest.main()
