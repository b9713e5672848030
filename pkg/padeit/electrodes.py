"""Rectangular electrode grids on a mesh surface, and their perturbations."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree

from padeit.config import get_settings
from padeit.errors import ElectrodePlacementError, RelocationExhaustedError
from padeit.geometry import Mesh

logger = logging.getLogger(__name__)

DEFAULT_MIN_DISPLACEMENT = 5.0


@dataclass(frozen=True)
class GridLayout:
    """rows x cols pads at ``spacing`` mm, centred on ``origin``.

    Electrode index is row-major: ``index = row * cols + col``.
    """

    rows: int
    cols: int
    spacing: float
    origin: Optional[Tuple[float, ...]] = None
    orientation: Tuple[float, ...] = (1.0, 0.0, 0.0)

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("rows and cols must be positive")
        if self.rows * self.cols < 4:
            raise ValueError("4-pole sensing needs at least 4 electrodes")
        if not self.spacing > 0:
            raise ValueError("spacing must be positive")
        if not np.linalg.norm(self.orientation) > 0:
            raise ValueError("orientation must be a non-zero vector")

    @property
    def count(self) -> int:
        return self.rows * self.cols

    @property
    def label(self) -> str:
        return f"{self.rows}x{self.cols}@{self.spacing:g}mm"

    def index(self, row: int, col: int) -> int:
        return row * self.cols + col


@dataclass(frozen=True, eq=False)
class ElectrodeSet:
    """Electrodes snapped to surface nodes.

    ``nominal_positions`` keep the intended pad locations; relocation only
    changes ``node_indices``.
    """

    nominal_positions: np.ndarray
    node_indices: Tuple[int, ...]
    contact_radius: float
    layout: Optional[GridLayout] = field(default=None)

    def __post_init__(self):
        nodes = tuple(int(n) for n in self.node_indices)
        if len(set(nodes)) != len(nodes):
            raise ElectrodePlacementError("electrode nodes must be pairwise distinct")
        positions = np.array(self.nominal_positions, dtype=float)
        positions.setflags(write=False)
        if len(positions) != len(nodes):
            raise ElectrodePlacementError("one nominal position per electrode required")
        object.__setattr__(self, "node_indices", nodes)
        object.__setattr__(self, "nominal_positions", positions)

    def __len__(self) -> int:
        return len(self.node_indices)

    def with_nodes(self, node_indices: Sequence[int]) -> "ElectrodeSet":
        return ElectrodeSet(self.nominal_positions, tuple(node_indices), self.contact_radius, self.layout)

    def same_as(self, other: "ElectrodeSet") -> bool:
        return (
            self.node_indices == other.node_indices
            and np.array_equal(self.nominal_positions, other.nominal_positions)
            and self.contact_radius == other.contact_radius
        )


def surface_normal(mesh: Mesh, node: int) -> np.ndarray:
    """Unit outward normal at a boundary node, area-weighted over incident facets."""
    facets = mesh.boundary_facets
    incident = np.any(facets == node, axis=1)
    if not np.any(incident):
        raise ElectrodePlacementError(f"node {node} is not on the mesh surface")
    normal = mesh.boundary_facet_normals[incident].sum(axis=0)
    length = np.linalg.norm(normal)
    if length == 0:
        raise ElectrodePlacementError(f"surface normal undefined at node {node}")
    return normal / length


def tangent_frame(normal: np.ndarray, hint: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    """Orthonormal tangent vectors (u, v) with u closest to ``hint``."""
    dim = len(normal)
    if dim == 2:
        u = np.array([-normal[1], normal[0]])
        if np.dot(u, np.asarray(hint[:2], dtype=float)) < 0:
            u = -u
        return u, np.zeros(2)
    hint = np.asarray(hint, dtype=float)[:3]
    u = hint - np.dot(hint, normal) * normal
    if np.linalg.norm(u) < 1e-9:
        # hint is parallel to the normal, fall back to the least aligned axis
        axis = np.eye(3)[int(np.argmin(np.abs(normal)))]
        u = axis - np.dot(axis, normal) * normal
    u = u / np.linalg.norm(u)
    v = np.cross(normal, u)
    return u, v


def default_origin(mesh: Mesh) -> np.ndarray:
    """Pad centre: top of the domain on its vertical axis (3D) or the +y pole (2D)."""
    lower, upper = mesh.bounding_box
    center = (lower + upper) / 2.0
    if mesh.dim == 3:
        return np.array([center[0], center[1], upper[2]])
    return np.array([center[0], upper[1]])


def _grid_points(layout: GridLayout, origin: np.ndarray, u: np.ndarray, v: np.ndarray, dim: int) -> np.ndarray:
    rows, cols, spacing = layout.rows, layout.cols, layout.spacing
    if dim == 2:
        # A 2D boundary is a curve: the grid becomes a single strip along it.
        n = rows * cols
        offsets = (np.arange(n) - (n - 1) / 2.0) * spacing
        return origin + offsets[:, None] * u
    r = (np.arange(rows) - (rows - 1) / 2.0) * spacing
    c = (np.arange(cols) - (cols - 1) / 2.0) * spacing
    rr, cc = np.meshgrid(r, c, indexing="ij")
    return origin + cc.reshape(-1, 1) * u + rr.reshape(-1, 1) * v


def place_grid(mesh: Mesh, layout: GridLayout, contact_radius: Optional[float] = None) -> ElectrodeSet:
    """Snap each grid point to its nearest boundary node."""
    boundary = mesh.boundary
    if layout.count > len(boundary):
        raise ElectrodePlacementError(
            f"collision: {layout.count} electrodes cannot occupy {len(boundary)} boundary nodes"
        )
    tree = cKDTree(mesh.nodes[boundary])
    origin = np.asarray(layout.origin, dtype=float)[: mesh.dim] if layout.origin is not None else default_origin(mesh)
    _, anchor = tree.query(origin)
    normal = surface_normal(mesh, int(boundary[anchor]))
    u, v = tangent_frame(normal, layout.orientation)
    points = _grid_points(layout, origin, u, v, mesh.dim)

    distances, nearest = tree.query(points)
    far = np.flatnonzero(distances > layout.spacing / 2.0)
    if len(far):
        raise ElectrodePlacementError(
            f"out of surface: grid point {int(far[0])} is {distances[far[0]]:.2f} mm from the nearest surface node"
        )
    nodes = boundary[nearest]
    if len(np.unique(nodes)) != len(nodes):
        raise ElectrodePlacementError("collision: two grid points snap to the same surface node; mesh too coarse")
    radius = layout.spacing / 4.0 if contact_radius is None else float(contact_radius)
    logger.debug("Placed %s grid on nodes %s", layout.label, nodes.tolist())
    return ElectrodeSet(points, tuple(int(n) for n in nodes), radius, layout)


def relocate(
    electrodes: ElectrodeSet,
    mesh: Mesh,
    indices: Iterable[int],
    max_displacement: float,
    rng: np.random.Generator,
    min_displacement: float = DEFAULT_MIN_DISPLACEMENT,
    max_retries: Optional[int] = None,
) -> ElectrodeSet:
    """Move selected electrodes to the surface node nearest a tangentially displaced point.

    The displacement distance is uniform in [min_displacement, max_displacement],
    the lower bound clamped to max_displacement.
    """
    selected = sorted(set(int(i) for i in indices))
    if max_displacement < 0:
        raise ValueError("max_displacement must be non-negative")
    if any(i < 0 or i >= len(electrodes) for i in selected):
        raise ValueError("relocation index out of range")
    if not selected or max_displacement == 0:
        return electrodes
    retries = max_retries if max_retries is not None else get_settings().relocation_max_retries
    low = min(min_displacement, max_displacement)

    boundary = mesh.boundary
    tree = cKDTree(mesh.nodes[boundary])
    nodes: List[int] = list(electrodes.node_indices)
    for index in selected:
        start = electrodes.nominal_positions[index]
        normal = surface_normal(mesh, nodes[index])
        u, v = tangent_frame(normal, (1.0, 0.0, 0.0))
        occupied = set(nodes[:index] + nodes[index + 1:])
        for _ in range(retries):
            distance = rng.uniform(low, max_displacement)
            if mesh.dim == 2:
                direction = u if rng.uniform() < 0.5 else -u
            else:
                angle = rng.uniform(0.0, 2.0 * np.pi)
                direction = np.cos(angle) * u + np.sin(angle) * v
            _, nearest = tree.query(start + distance * direction)
            candidate = int(boundary[nearest])
            if candidate not in occupied:
                nodes[index] = candidate
                break
        else:
            raise RelocationExhaustedError(
                f"electrode {index}: no collision-free placement after {retries} draws"
            )
    return electrodes.with_nodes(nodes)


def contact_region(mesh: Mesh, node: int, radius: float) -> np.ndarray:
    """Elements having at least one node within ``radius`` of ``node``."""
    near = np.linalg.norm(mesh.nodes - mesh.nodes[node], axis=1) <= radius
    return np.any(near[mesh.elements], axis=1)


def contact_shift(
    mesh: Mesh,
    electrodes: ElectrodeSet,
    indices: Iterable[int],
    factor_range: Sequence[float],
    rng: np.random.Generator,
) -> Mesh:
    """Raise contact impedance near selected electrodes.

    Impedance scaled by f means conductivity divided by f; one factor is
    drawn per electrode, uniform in ``factor_range``.
    """
    low, high = (float(v) for v in factor_range)
    if not 1.0 <= low <= high:
        raise ValueError("factor_range must satisfy 1 <= low <= high")
    selected = sorted(set(int(i) for i in indices))
    if any(i < 0 or i >= len(electrodes) for i in selected):
        raise ValueError("contact index out of range")
    if not selected:
        return mesh
    sigma = np.array(mesh.element_conductivity)
    for index in selected:
        factor = rng.uniform(low, high)
        region = contact_region(mesh, electrodes.node_indices[index], electrodes.contact_radius)
        sigma[region] /= factor
    return mesh.with_conductivity(sigma)


def electrode_table(electrodes: ElectrodeSet) -> List[dict]:
    """Rows for the CSV experiment log."""
    rows = []
    for index, (position, node) in enumerate(zip(electrodes.nominal_positions, electrodes.node_indices)):
        padded = list(position) + [0.0] * (3 - len(position))
        rows.append({"electrode": index, "x": padded[0], "y": padded[1], "z": padded[2], "node": node})
    return rows
