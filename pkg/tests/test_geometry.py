import math
import tempfile
import unittest
from pathlib import Path

import numpy as np

from padeit.errors import MeshParseError, MeshValidationError
from padeit.geometry import (
    EllipsoidInclusion,
    Mesh,
    apply_inclusion,
    generate_box_mesh,
    generate_cylinder_mesh,
    generate_disc_mesh,
    inclusion_elements,
    load_mesh,
    mesh_summary,
    save_mesh,
    signed_measures,
    volume_to_ellipsoid,
    with_background,
)
from tests.fixtures import slab_mesh, small_box


def _write(tmpdir, text):
    path = Path(tmpdir) / "mesh.txt"
    path.write_text(text, encoding="utf-8")
    return path


class MeshLoadingTests(unittest.TestCase):
    def test_slab_fixture_loads_with_exact_volume(self):
        mesh = slab_mesh()
        self.assertEqual(mesh.dim, 3)
        self.assertEqual(mesh.node_count, 24)
        self.assertEqual(mesh.element_count, 36)
        self.assertAlmostEqual(float(mesh.measures.sum()), 6000.0, places=9)
        self.assertTrue(np.all(signed_measures(mesh.nodes, mesh.elements) > 0))
        self.assertTrue(np.allclose(mesh.element_conductivity, 0.2))
        self.assertTrue(mesh.is_connected())

    def test_every_slab_node_is_on_the_surface(self):
        # one cell thick: no interior nodes
        self.assertEqual(len(slab_mesh().boundary), 24)

    def test_negatively_oriented_element_is_reordered(self):
        text = "dim 3\nnodes 4\n0 0 0\n1 0 0\n0 1 0\n0 0 1\nelements 1\n1 0 2 3\n"
        with tempfile.TemporaryDirectory() as tmpdir:
            mesh = load_mesh(_write(tmpdir, text))
        self.assertGreater(signed_measures(mesh.nodes, mesh.elements)[0], 0)
        self.assertAlmostEqual(float(mesh.measures[0]), 1.0 / 6.0)
        self.assertTrue(np.allclose(mesh.element_conductivity, 1.0))

    def test_comments_and_sigma_block_are_read(self):
        text = (
            "# triangle\n"
            "dim 2\n"
            "nodes 3  # count\n0 0\n2 0\n0 2\n"
            "elements 1\n0 1 2\n"
            "sigma 1\n0.5\n"
        )
        with tempfile.TemporaryDirectory() as tmpdir:
            mesh = load_mesh(_write(tmpdir, text))
        self.assertEqual(mesh.dim, 2)
        self.assertAlmostEqual(float(mesh.measures[0]), 2.0)
        self.assertEqual(float(mesh.element_conductivity[0]), 0.5)

    def test_parse_error_carries_line_number(self):
        text = "dim 2\nnodes 3\n0 0\n1 0 7\n0 1\nelements 1\n0 1 2\n"
        with tempfile.TemporaryDirectory() as tmpdir:
            with self.assertRaises(MeshParseError) as ctx:
                load_mesh(_write(tmpdir, text))
        self.assertEqual(ctx.exception.line, 4)
        self.assertIn("line 4", str(ctx.exception))

    def test_missing_header_is_a_parse_error(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            with self.assertRaises(MeshParseError):
                load_mesh(_write(tmpdir, "dim 3\nnodes 1\n0 0 0\n"))

    def test_zero_volume_element_is_rejected(self):
        text = "dim 2\nnodes 3\n0 0\n1 0\n2 0\nelements 1\n0 1 2\n"
        with tempfile.TemporaryDirectory() as tmpdir:
            with self.assertRaises(MeshValidationError) as ctx:
                load_mesh(_write(tmpdir, text))
        self.assertEqual(ctx.exception.invariant, "positive-measure")

    def test_disconnected_mesh_fails_validation(self):
        text = (
            "dim 2\nnodes 6\n0 0\n1 0\n0 1\n5 5\n6 5\n5 6\n"
            "elements 2\n0 1 2\n3 4 5\n"
        )
        with tempfile.TemporaryDirectory() as tmpdir:
            with self.assertRaises(MeshValidationError) as ctx:
                load_mesh(_write(tmpdir, text))
        self.assertEqual(ctx.exception.invariant, "connected")

    def test_save_then_load_preserves_mesh(self):
        mesh = apply_inclusion(small_box(), volume_to_ellipsoid(5.0, center=(0.0, 0.0, 15.0)))
        with tempfile.TemporaryDirectory() as tmpdir:
            path = Path(tmpdir) / "box.mesh"
            save_mesh(mesh, path)
            loaded = load_mesh(path)
        np.testing.assert_array_equal(loaded.nodes, mesh.nodes)
        np.testing.assert_array_equal(loaded.elements, mesh.elements)
        np.testing.assert_array_equal(loaded.element_conductivity, mesh.element_conductivity)


class MeshInvariantTests(unittest.TestCase):
    def test_nonpositive_conductivity_is_rejected(self):
        mesh = slab_mesh()
        sigma = np.array(mesh.element_conductivity)
        sigma[3] = 0.0
        with self.assertRaises(MeshValidationError):
            mesh.with_conductivity(sigma)

    def test_element_referencing_missing_node_is_rejected(self):
        with self.assertRaises(MeshValidationError) as ctx:
            Mesh(np.eye(3)[:, :2], [[0, 1, 5]], [1.0])
        self.assertEqual(ctx.exception.invariant, "node-index")

    def test_with_conductivity_shares_geometry(self):
        mesh = slab_mesh()
        clone = mesh.with_conductivity(np.full(mesh.element_count, 3.0))
        self.assertIs(clone.nodes, mesh.nodes)
        self.assertTrue(np.allclose(mesh.element_conductivity, 0.2))
        self.assertFalse(mesh.element_conductivity.flags.writeable)


class GeneratorTests(unittest.TestCase):
    def test_box_volume_is_exact(self):
        mesh = generate_box_mesh((100.0, 80.0, 40.0), 500)
        self.assertAlmostEqual(float(mesh.measures.sum()), 100.0 * 80.0 * 40.0, places=6)
        lower, upper = mesh.bounding_box
        np.testing.assert_allclose(lower, [-50.0, -40.0, 0.0])
        np.testing.assert_allclose(upper, [50.0, 40.0, 40.0])

    def test_box_of_fifteen_millimetre_cells(self):
        self.assertEqual(small_box().element_count, 192)
        self.assertEqual(small_box().node_count, 5 * 5 * 3)

    def test_disc_is_a_valid_triangulation(self):
        mesh = generate_disc_mesh(50.0, 400)
        self.assertEqual(mesh.dim, 2)
        area = float(mesh.measures.sum())
        self.assertLess(area, math.pi * 50.0 ** 2)
        self.assertGreater(area, 0.95 * math.pi * 50.0 ** 2)
        radii = np.linalg.norm(mesh.nodes[mesh.boundary], axis=1)
        np.testing.assert_allclose(radii, 50.0)

    def test_cylinder_spans_its_height(self):
        mesh = generate_cylinder_mesh(40.0, 30.0, 600)
        lower, upper = mesh.bounding_box
        self.assertAlmostEqual(float(lower[2]), 0.0)
        self.assertAlmostEqual(float(upper[2]), 30.0)
        self.assertTrue(np.all(signed_measures(mesh.nodes, mesh.elements) > 0))
        self.assertLess(float(mesh.measures.sum()), math.pi * 40.0 ** 2 * 30.0)

    def test_disc_area_and_element_count(self):
        mesh = generate_disc_mesh(100.0, 2000)
        area = float(mesh.measures.sum())
        self.assertLessEqual(abs(area - math.pi * 100.0 ** 2), 0.02 * math.pi * 100.0 ** 2)
        self.assertLessEqual(abs(mesh.element_count - 2000), 500)

    def test_cylinder_volume(self):
        mesh = generate_cylinder_mesh(80.0, 120.0, 5000)
        expected = math.pi * 80.0 ** 2 * 120.0
        self.assertLessEqual(abs(float(mesh.measures.sum()) - expected), 0.03 * expected)

    def test_summary_reports_counts(self):
        summary = mesh_summary(slab_mesh())
        self.assertEqual(summary["elements"], 36)
        self.assertEqual(summary["dim"], 3)
        self.assertEqual(summary["bbox_max"], [30.0, 20.0, 10.0])
        self.assertAlmostEqual(summary["total_measure"], 6000.0)


class InclusionTests(unittest.TestCase):
    def test_volume_to_ellipsoid_preserves_volume_and_aspect(self):
        inclusion = volume_to_ellipsoid(100.0, (1.0, 0.8, 0.6))
        self.assertAlmostEqual(inclusion.volume_ml, 100.0, places=9)
        a, b, c = inclusion.radii
        self.assertAlmostEqual(b / a, 0.8)
        self.assertAlmostEqual(c / a, 0.6)

    def test_zero_volume_is_the_empty_sentinel(self):
        inclusion = volume_to_ellipsoid(0.0)
        self.assertTrue(inclusion.is_empty)
        mesh = small_box()
        self.assertIs(apply_inclusion(mesh, inclusion), mesh)
        self.assertFalse(np.any(inclusion_elements(mesh, inclusion)))

    def test_negative_volume_is_rejected(self):
        with self.assertRaises(ValueError):
            volume_to_ellipsoid(-1.0)

    def test_inclusion_sets_conductivity_by_centroid(self):
        mesh = small_box()
        inclusion = EllipsoidInclusion((0.0, 0.0, 15.0), (20.0, 20.0, 10.0), 1.75)
        filled = apply_inclusion(mesh, inclusion)
        inside = inclusion.contains(mesh.centroids)
        self.assertTrue(inside.any())
        np.testing.assert_allclose(filled.element_conductivity[inside], 1.75)
        np.testing.assert_allclose(filled.element_conductivity[~inside], 0.2)

    def test_inclusion_is_idempotent(self):
        mesh = small_box()
        inclusion = EllipsoidInclusion((0.0, 0.0, 15.0), (20.0, 20.0, 10.0), 1.75)
        once = apply_inclusion(mesh, inclusion)
        twice = apply_inclusion(once, inclusion)
        np.testing.assert_array_equal(twice.element_conductivity, once.element_conductivity)

    def test_hundred_millilitres_in_a_cylinder(self):
        mesh = generate_cylinder_mesh(80.0, 120.0, 5000)
        inclusion = volume_to_ellipsoid(100.0, center=(0.0, 0.0, 60.0))
        modified = apply_inclusion(mesh, inclusion).element_conductivity != mesh.element_conductivity
        estimate = np.count_nonzero(modified) * float(mesh.measures.mean()) / 1000.0
        self.assertLessEqual(abs(estimate - 100.0), 15.0)

    def test_center_outside_bounding_box_is_rejected(self):
        with self.assertRaises(ValueError):
            apply_inclusion(small_box(), volume_to_ellipsoid(5.0, center=(0.0, 0.0, 200.0)))

    def test_background_is_uniform(self):
        mesh = with_background(slab_mesh(), 0.35)
        self.assertTrue(np.all(mesh.element_conductivity == 0.35))


if __name__ == "__main__":
    unittest.main()
