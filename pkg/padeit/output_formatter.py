import csv
import logging
import math
import os
from typing import Iterable, List, Optional, Sequence

import numpy as np
from PIL import Image

from padeit.config import get_settings

logger = logging.getLogger(__name__)


def format_value(value) -> str:
    """Stable text for a CSV cell: integers as-is, floats with 12 significant digits."""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        text = format(value, ".12g")
        return "0" if text == "-0" else text
    return str(value)


class OutputFormatter:
    """Writes run artifacts into one output directory and reports what was written."""

    def __init__(self, output_dir: Optional[str] = None):
        self.output_dir = output_dir or get_settings().output_dir
        os.makedirs(self.output_dir, exist_ok=True)
        self.written: List[dict] = []

    def _path(self, filename: str) -> str:
        return os.path.join(self.output_dir, filename)

    def write_csv(self, filename: str, header: Sequence[str], rows: Iterable[dict]) -> dict:
        """RFC-4180 style CSV with '\\n' line endings; missing cells are left empty."""
        filepath = self._path(filename)
        with open(filepath, "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([format_value(row[key]) if key in row else "" for key in header])
        return self._verify_file(filepath, "csv")

    def write_matrix_csv(self, filename: str, matrix: np.ndarray) -> dict:
        """Headerless numeric grid, one CSV row per matrix row."""
        filepath = self._path(filename)
        with open(filepath, "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            for row in np.atleast_2d(matrix):
                writer.writerow([format_value(v) for v in row])
        return self._verify_file(filepath, "csv")

    def write_graymap(self, filename: str, image: np.ndarray) -> dict:
        """8-bit binary portable graymap (P5)."""
        pixels = np.ascontiguousarray(image, dtype=np.uint8)
        if pixels.ndim != 2:
            raise ValueError("graymap needs a 2D array")
        filepath = self._path(filename)
        Image.fromarray(pixels).save(filepath, format="PPM")
        return self._verify_file(filepath, "pgm")

    def write_json(self, filename: str, text: str) -> dict:
        filepath = self._path(filename)
        with open(filepath, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(text if text.endswith("\n") else text + "\n")
        return self._verify_file(filepath, "json")

    def _verify_file(self, filepath: str, fmt: str) -> dict:
        if not os.path.exists(filepath):
            raise OSError(f"output file {filepath} was not written")
        info = {
            "filename": os.path.basename(filepath),
            "filepath": filepath,
            "size_bytes": os.path.getsize(filepath),
            "format": fmt,
        }
        self.written.append(info)
        logger.info("Wrote %s (%d bytes)", info["filename"], info["size_bytes"])
        return info
