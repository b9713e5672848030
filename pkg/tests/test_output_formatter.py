import tempfile
import unittest
from pathlib import Path

import numpy as np
from PIL import Image

from padeit.output_formatter import OutputFormatter, format_value


class FormatValueTests(unittest.TestCase):
    def test_numbers(self):
        self.assertEqual(format_value(3), "3")
        self.assertEqual(format_value(np.int64(7)), "7")
        self.assertEqual(format_value(True), "1")
        self.assertEqual(format_value(0.1), "0.1")
        self.assertEqual(format_value(1.0 / 3.0), "0.333333333333")
        self.assertEqual(format_value(-0.0), "0")
        self.assertEqual(format_value(float("nan")), "nan")
        self.assertEqual(format_value(float("-inf")), "-inf")
        self.assertEqual(format_value("ch_0"), "ch_0")


class OutputFormatterTests(unittest.TestCase):
    def test_csv_uses_header_order_and_newlines(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            formatter = OutputFormatter(tmpdir)
            info = formatter.write_csv("rows.csv", ["b", "a"], [{"a": 1, "b": 0.5}, {"a": 2}])
            text = Path(info["filepath"]).read_bytes()
        self.assertEqual(text, b"b,a\n0.5,1\n,2\n")
        self.assertEqual(info["format"], "csv")
        self.assertEqual(info["size_bytes"], len(text))
        self.assertEqual(formatter.written, [info])

    def test_matrix_csv(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            info = OutputFormatter(tmpdir).write_matrix_csv("m.csv", np.array([[1.0, 2.5], [0.0, -1.0]]))
            self.assertEqual(Path(info["filepath"]).read_text(encoding="utf-8"), "1,2.5\n0,-1\n")

    def test_graymap_is_binary_pgm(self):
        image = np.array([[0, 128, 255], [10, 20, 30]], dtype=np.uint8)
        with tempfile.TemporaryDirectory() as tmpdir:
            info = OutputFormatter(tmpdir).write_graymap("slice.pgm", image)
            data = Path(info["filepath"]).read_bytes()
            with Image.open(info["filepath"]) as loaded:
                pixels = np.array(loaded)
        self.assertTrue(data.startswith(b"P5"))
        np.testing.assert_array_equal(pixels, image)

    def test_graymap_rejects_non_2d(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            with self.assertRaises(ValueError):
                OutputFormatter(tmpdir).write_graymap("bad.pgm", np.zeros(4))

    def test_json_gets_trailing_newline(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            info = OutputFormatter(tmpdir).write_json("c.json", '{"seed": 1}')
            self.assertEqual(Path(info["filepath"]).read_text(encoding="utf-8"), '{"seed": 1}\n')


if __name__ == "__main__":
    unittest.main()
