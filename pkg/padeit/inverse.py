"""One-step regularized difference imaging, slicing and the RoI response ratio."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.spatial import cKDTree

from padeit.errors import DegenerateInputError, DimensionMismatchError, OutOfDomainError, SingularSystemError
from padeit.forward import SensitivityMatrix, element_gradients
from padeit.frames import FrameVector
from padeit.geometry import EllipsoidInclusion, Mesh

logger = logging.getLogger(__name__)

DEFAULT_EXPONENT = 0.5
AUTO_LAMBDA_SCALE = 0.01
# Experiment defaults: strong damping, so the image is a normalized backprojection.
STUDY_LAMBDA_SCALE = 100.0
SLICE_CANDIDATES = 32


class LambdaRule(str, Enum):
    """How lambda is chosen when none is given.

    ``trace``: scale * trace(J^T J) / rows.
    ``weighted_trace``: scale * trace(J R^-1 J^T) / rows, which is unchanged
    when J and delta_v are scaled together for every p.
    """

    trace = "trace"
    weighted_trace = "weighted_trace"


def auto_lambda(
    diagonal: np.ndarray,
    weights: np.ndarray,
    rows: int,
    rule: LambdaRule = LambdaRule.trace,
    scale: float = AUTO_LAMBDA_SCALE,
) -> float:
    """Regularization weight from diag(J^T J) and the weights R = diag(J^T J)^p."""
    rule = LambdaRule(rule)
    if not scale > 0:
        raise ValueError("lambda scale must be positive")
    if rule == LambdaRule.trace:
        return scale * float(np.sum(diagonal)) / rows
    return scale * float(np.sum(diagonal / weights)) / rows


@dataclass(frozen=True, eq=False)
class ReconstructionField:
    """Relative conductivity change, one value per element."""

    values: np.ndarray
    regularization: float = 0.0
    exponent: float = DEFAULT_EXPONENT
    floored_elements: Tuple[int, ...] = ()
    degenerate: bool = False

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 1:
            raise DimensionMismatchError("field values must be one-dimensional")
        if not np.all(np.isfinite(values)):
            raise ValueError("field contains non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "floored_elements", tuple(int(e) for e in self.floored_elements))

    def __len__(self) -> int:
        return len(self.values)

    @property
    def peak_element(self) -> int:
        """Element with the largest absolute response."""
        return int(np.argmax(np.abs(self.values)))

    def check_mesh(self, mesh: Mesh) -> None:
        if len(self.values) != mesh.element_count:
            raise DimensionMismatchError(f"field has {len(self.values)} values, mesh has {mesh.element_count} elements")

    def to_rows(self):
        return [{"element": i, "value": float(v)} for i, v in enumerate(self.values)]


def _as_matrix(J: Union[SensitivityMatrix, np.ndarray]) -> np.ndarray:
    matrix = J.entries if isinstance(J, SensitivityMatrix) else np.asarray(J, dtype=float)
    if matrix.ndim != 2 or 0 in matrix.shape:
        raise DimensionMismatchError("sensitivity matrix must be a non-empty 2D array")
    if not np.all(np.isfinite(matrix)):
        raise ValueError("sensitivity matrix contains non-finite entries")
    return matrix


class Reconstructor:
    """Precomputed solve for fixed J, lambda and p.

    Computes (J^T J + lambda R)^-1 J^T dv with R = diag(J^T J)^p. When the
    mesh has more elements than there are channels the equivalent
    channel-space form R^-1 J^T (J R^-1 J^T + lambda I)^-1 dv is used.
    Read-only after construction.
    """

    def __init__(
        self,
        J: Union[SensitivityMatrix, np.ndarray],
        lam: Optional[float] = None,
        p: float = DEFAULT_EXPONENT,
        rule: LambdaRule = LambdaRule.trace,
        scale: float = AUTO_LAMBDA_SCALE,
    ):
        if not 0.0 <= p <= 1.0:
            raise ValueError("p must lie in [0, 1]")
        if lam is not None and not (np.isfinite(lam) and lam > 0):
            raise ValueError("lambda must be positive")
        matrix = _as_matrix(J)
        self.matrix = matrix
        self.exponent = float(p)
        rows, cols = matrix.shape

        diagonal = np.einsum("ij,ij->j", matrix, matrix)
        peak = diagonal.max()
        if peak <= 0:
            raise DegenerateInputError("sensitivity matrix is identically zero")
        zero = diagonal == 0
        self.floored_elements = tuple(int(i) for i in np.flatnonzero(zero))
        if self.floored_elements:
            logger.warning("%d elements invisible to every channel; regularization floored", len(self.floored_elements))
        floored = np.where(zero, np.finfo(float).eps * peak, diagonal)
        self.weights = floored ** self.exponent
        self.rule = LambdaRule(rule)
        self.lam = float(lam) if lam is not None else auto_lambda(diagonal, self.weights, rows, self.rule, scale)

        self.element_space = cols <= rows
        try:
            if self.element_space:
                system = matrix.T @ matrix + self.lam * np.diag(self.weights)
            else:
                scaled = matrix / self.weights
                system = scaled @ matrix.T + self.lam * np.eye(rows)
            self._factor = cho_factor(system)
        except LinAlgError as exc:
            raise SingularSystemError(f"regularized normal matrix is not positive definite: {exc}") from exc
        logger.debug(
            "Reconstructor ready (%s space, lambda=%.6g, p=%.3g, rule=%s)",
            "element" if self.element_space else "channel", self.lam, self.exponent, self.rule.value,
        )

    def solve(self, delta_v: Union[FrameVector, np.ndarray]) -> np.ndarray:
        dv = delta_v.values if isinstance(delta_v, FrameVector) else np.asarray(delta_v, dtype=float)
        if dv.shape[0] != self.matrix.shape[0]:
            raise DimensionMismatchError(f"delta_v has {dv.shape[0]} rows, J has {self.matrix.shape[0]}")
        if not np.all(np.isfinite(dv)):
            raise ValueError("delta_v contains non-finite values")
        if self.element_space:
            return cho_solve(self._factor, self.matrix.T @ dv)
        return (self.matrix.T @ cho_solve(self._factor, dv)) / (
            self.weights if dv.ndim == 1 else self.weights[:, None]
        )

    def reconstruct(self, delta_v: Union[FrameVector, np.ndarray]) -> ReconstructionField:
        dv = delta_v.values if isinstance(delta_v, FrameVector) else np.asarray(delta_v, dtype=float)
        degenerate = not np.any(dv)
        if degenerate:
            logger.warning("Difference signal is identically zero; reconstruction is degenerate")
        return ReconstructionField(self.solve(dv), self.lam, self.exponent, self.floored_elements, degenerate)


def reconstruct(
    J: Union[SensitivityMatrix, np.ndarray],
    delta_v: Union[FrameVector, np.ndarray],
    lam: Optional[float] = None,
    p: float = DEFAULT_EXPONENT,
    rule: LambdaRule = LambdaRule.trace,
    scale: float = AUTO_LAMBDA_SCALE,
) -> ReconstructionField:
    return Reconstructor(J, lam, p, rule, scale).reconstruct(delta_v)


@dataclass(frozen=True, eq=False)
class SliceRaster:
    """Sampled plane; row 0 is the lowest y, column 0 the lowest x.

    Cells outside the domain hold ``fill`` and are False in ``mask``.
    """

    values: np.ndarray
    mask: np.ndarray
    extent: Tuple[float, float, float, float]
    height: Optional[float] = None
    fill: float = 0.0
    cell_size: Tuple[float, float] = field(init=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        mask = np.array(self.mask, dtype=bool)
        if values.ndim != 2 or values.shape != mask.shape:
            raise DimensionMismatchError("raster values and mask must be matching 2D grids")
        x0, x1, y0, y1 = (float(v) for v in self.extent)
        if not (x1 > x0 and y1 > y0):
            raise ValueError("raster extent must be positive")
        ny, nx = values.shape
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "extent", (x0, x1, y0, y1))
        object.__setattr__(self, "cell_size", ((x1 - x0) / nx, (y1 - y0) / ny))

    @property
    def shape(self) -> Tuple[int, int]:
        return self.values.shape

    def cell_centers(self) -> Tuple[np.ndarray, np.ndarray]:
        x0, _, y0, _ = self.extent
        dx, dy = self.cell_size
        ny, nx = self.values.shape
        return x0 + (np.arange(nx) + 0.5) * dx, y0 + (np.arange(ny) + 0.5) * dy


def locate_points(mesh: Mesh, points: np.ndarray, candidates: int = SLICE_CANDIDATES) -> np.ndarray:
    """Index of an element containing each point, -1 when outside the mesh.

    Candidates are the nearest element centroids, tested by barycentric
    coordinates in distance order.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    k = min(candidates, mesh.element_count)
    _, nearest = cKDTree(mesh.centroids).query(points, k=k)
    nearest = nearest.reshape(len(points), k)
    grads = element_gradients(mesh)
    anchors = mesh.nodes[mesh.elements[:, 0]]
    found = np.full(len(points), -1, dtype=np.int64)
    for column in range(k):
        pending = np.flatnonzero(found < 0)
        if not len(pending):
            break
        elements = nearest[pending, column]
        offset = points[pending] - anchors[elements]
        bary = np.einsum("pid,pd->pi", grads[elements], offset)
        bary[:, 0] += 1.0
        inside = np.all(bary >= -1e-9, axis=1)
        found[pending[inside]] = elements[inside]
    return found


def slice_field(
    field_: ReconstructionField,
    mesh: Mesh,
    height: Optional[float] = None,
    resolution: Union[int, Sequence[int]] = 64,
) -> SliceRaster:
    """Sample the field on the plane z = height over the mesh's x/y extent."""
    field_.check_mesh(mesh)
    nx, ny = (resolution, resolution) if np.isscalar(resolution) else (int(resolution[0]), int(resolution[1]))
    if nx < 1 or ny < 1:
        raise ValueError("resolution must be at least 1x1")
    lower, upper = mesh.bounding_box
    if mesh.dim == 3:
        if height is None or not lower[2] <= height <= upper[2]:
            raise OutOfDomainError(f"slice height {height} outside mesh z-range [{lower[2]:g}, {upper[2]:g}]")
    extent = (lower[0], upper[0], lower[1], upper[1])
    raster = SliceRaster(np.zeros((ny, nx)), np.zeros((ny, nx), dtype=bool), extent, height if mesh.dim == 3 else None)
    xs, ys = raster.cell_centers()
    gx, gy = np.meshgrid(xs, ys)
    points = np.column_stack([gx.ravel(), gy.ravel()])
    if mesh.dim == 3:
        points = np.column_stack([points, np.full(len(points), float(height))])

    owners = locate_points(mesh, points)
    inside = owners >= 0
    values = np.full(len(points), raster.fill)
    values[inside] = field_.values[owners[inside]]
    logger.debug("Slice %dx%d: %d of %d cells in domain", nx, ny, int(inside.sum()), len(points))
    return SliceRaster(values.reshape(ny, nx), inside.reshape(ny, nx), extent, raster.height, raster.fill)


def roi_response_ratio(field_: ReconstructionField, mesh: Mesh, region: EllipsoidInclusion) -> float:
    """Mean |response| inside the region over mean |response| across the domain."""
    field_.check_mesh(mesh)
    if region.is_empty:
        raise DegenerateInputError("region of interest is empty")
    inside = region.contains(mesh.centroids)
    if not np.any(inside):
        raise DegenerateInputError("region of interest contains no element centroid")
    magnitude = np.abs(field_.values)
    overall = magnitude.mean()
    if overall == 0:
        logger.warning("Field is identically zero; RoI response ratio is degenerate")
        return float("inf")
    return float(magnitude[inside].mean() / overall)


def raster_to_graymap(raster: SliceRaster) -> np.ndarray:
    """8-bit image, +y up; in-domain cells min-max scaled to 0..255, outside cells 0."""
    image = np.zeros(raster.shape, dtype=np.uint8)
    if np.any(raster.mask):
        inside = raster.values[raster.mask]
        low, high = inside.min(), inside.max()
        if high > low:
            scaled = np.rint((raster.values - low) / (high - low) * 255.0)
        else:
            scaled = np.full(raster.shape, 128.0)
        image[raster.mask] = scaled[raster.mask].astype(np.uint8)
    return np.flipud(image)
