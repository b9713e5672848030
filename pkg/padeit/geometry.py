"""Simulation domains: simplex meshes, conductivity fields and bladder inclusions.

All lengths are millimetres and conductivities S/m. A Mesh is immutable:
every operation that changes conductivity returns a new Mesh that shares
the node and element arrays with its parent.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import Delaunay

from padeit.errors import MeshParseError, MeshValidationError

logger = logging.getLogger(__name__)

ML_TO_MM3 = 1000.0
DEFAULT_BACKGROUND_CONDUCTIVITY = 0.2
DEFAULT_INCLUSION_CONDUCTIVITY = 1.75
DEFAULT_ASPECT = (1.0, 0.8, 0.6)

# Kuhn subdivision of the unit cube: one tetrahedron per axis permutation.
_KUHN_PERMUTATIONS = ((0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0))


def _frozen(values, dtype) -> np.ndarray:
    """Read-only contiguous view; writeable inputs are copied first."""
    array = np.ascontiguousarray(values, dtype=dtype)
    if array.flags.writeable:
        array = array.copy()
        array.setflags(write=False)
    return array


def _readonly(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


def signed_measures(nodes: np.ndarray, elements: np.ndarray) -> np.ndarray:
    """Signed area (2D) or volume (3D) of every simplex."""
    dim = nodes.shape[1]
    origin = nodes[elements[:, 0]]
    edges = np.stack([nodes[elements[:, i]] - origin for i in range(1, dim + 1)], axis=-1)
    return np.linalg.det(edges) / math.factorial(dim)


@dataclass(frozen=True, eq=False)
class Mesh:
    """Simplex mesh with one conductivity value per element."""

    nodes: np.ndarray
    elements: np.ndarray
    element_conductivity: np.ndarray
    source: str = field(default="generated", compare=False)

    def __post_init__(self):
        nodes = _frozen(self.nodes, float)
        elements = _frozen(self.elements, np.int64)
        sigma = _frozen(self.element_conductivity, float)
        if nodes.ndim != 2 or nodes.shape[1] not in (2, 3):
            raise MeshValidationError("dimension", f"nodes must be N x 2 or N x 3, got {nodes.shape}")
        dim = nodes.shape[1]
        if elements.ndim != 2 or elements.shape[1] != dim + 1:
            raise MeshValidationError("simplex", f"{dim}D elements need {dim + 1} node indices")
        if len(elements) == 0:
            raise MeshValidationError("simplex", "mesh has no elements")
        if elements.min() < 0 or elements.max() >= len(nodes):
            raise MeshValidationError("node-index", "element references a node that does not exist")
        if sigma.shape != (len(elements),):
            raise MeshValidationError("conductivity", "one conductivity value per element required")
        if not np.all(np.isfinite(sigma)) or np.any(sigma <= 0):
            raise MeshValidationError("conductivity", "conductivity must be strictly positive and finite")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "elements", elements)
        object.__setattr__(self, "element_conductivity", sigma)

    @property
    def dim(self) -> int:
        return self.nodes.shape[1]

    @property
    def element_count(self) -> int:
        return len(self.elements)

    @property
    def node_count(self) -> int:
        return len(self.nodes)

    @cached_property
    def measures(self) -> np.ndarray:
        """Unsigned element areas or volumes."""
        return _readonly(np.abs(signed_measures(self.nodes, self.elements)))

    @cached_property
    def centroids(self) -> np.ndarray:
        return _readonly(self.nodes[self.elements].mean(axis=1))

    @cached_property
    def _facets(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        dim = self.dim
        local = [tuple(j for j in range(dim + 1) if j != i) for i in range(dim + 1)]
        facets = self.elements[:, local].reshape(-1, dim)
        owner = np.repeat(np.arange(self.element_count), dim + 1)
        opposite = self.elements.reshape(-1)
        keys = np.sort(facets, axis=1)
        _, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
        inverse = inverse.reshape(-1)
        return facets, owner, opposite, counts[inverse]

    @cached_property
    def boundary_facets(self) -> np.ndarray:
        """Facets (edges in 2D, triangles in 3D) that belong to exactly one element."""
        facets, _, _, multiplicity = self._facets
        return _readonly(facets[multiplicity == 1])

    @cached_property
    def boundary(self) -> np.ndarray:
        """Sorted indices of surface nodes."""
        return _readonly(np.unique(self.boundary_facets))

    @cached_property
    def boundary_facet_normals(self) -> np.ndarray:
        """Outward normals of boundary facets, scaled by facet area (3D) or length (2D)."""
        facets, _, opposite, multiplicity = self._facets
        mask = multiplicity == 1
        facets = facets[mask]
        inner = self.nodes[opposite[mask]]
        base = self.nodes[facets[:, 0]]
        if self.dim == 2:
            edge = self.nodes[facets[:, 1]] - base
            normals = np.column_stack([edge[:, 1], -edge[:, 0]])
        else:
            normals = 0.5 * np.cross(self.nodes[facets[:, 1]] - base, self.nodes[facets[:, 2]] - base)
        inward = np.einsum("ij,ij->i", normals, inner - base) > 0
        normals[inward] *= -1.0
        return _readonly(normals)

    @property
    def bounding_box(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.nodes.min(axis=0), self.nodes.max(axis=0)

    def with_conductivity(self, conductivity: np.ndarray) -> "Mesh":
        """Return a mesh sharing this geometry with a new conductivity vector."""
        clone = Mesh(self.nodes, self.elements, conductivity, source=self.source)
        for name in ("measures", "centroids", "_facets", "boundary_facets", "boundary", "boundary_facet_normals"):
            if name in self.__dict__:
                clone.__dict__[name] = self.__dict__[name]
        return clone

    def validate(self) -> "Mesh":
        """Check orientation and connectivity; raise MeshValidationError naming the failure."""
        signed = signed_measures(self.nodes, self.elements)
        if np.any(signed <= 0):
            bad = int(np.flatnonzero(signed <= 0)[0])
            raise MeshValidationError("positive-measure", f"element {bad} has non-positive signed measure")
        if not self.is_connected():
            raise MeshValidationError("connected", "element adjacency graph has more than one component")
        return self

    def is_connected(self) -> bool:
        if self.element_count == 1:
            return True
        facets, owner, _, multiplicity = self._facets
        shared = multiplicity == 2
        keys = np.sort(facets[shared], axis=1)
        owners = owner[shared]
        order = np.lexsort(keys.T[::-1])
        pairs = owners[order].reshape(-1, 2)
        graph = coo_matrix(
            (np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])),
            shape=(self.element_count, self.element_count),
        )
        count, _ = connected_components(graph, directed=False)
        return count == 1


@dataclass(frozen=True)
class EllipsoidInclusion:
    """Axis-aligned ellipsoid with a uniform conductivity.

    Zero radii are the "no inclusion" sentinel produced for a 0 mL bladder.
    """

    center: Tuple[float, ...]
    radii: Tuple[float, float, float]
    conductivity: float = DEFAULT_INCLUSION_CONDUCTIVITY

    def __post_init__(self):
        radii = tuple(float(r) for r in self.radii)
        if len(radii) != 3:
            raise ValueError("ellipsoid needs three semi-axes")
        if not self.is_empty_radii(radii) and any(r <= 0 for r in radii):
            raise ValueError("ellipsoid semi-axes must be positive")
        if not self.conductivity > 0:
            raise ValueError("inclusion conductivity must be positive")
        object.__setattr__(self, "radii", radii)
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    @staticmethod
    def is_empty_radii(radii: Sequence[float]) -> bool:
        return all(r == 0 for r in radii)

    @property
    def is_empty(self) -> bool:
        return self.is_empty_radii(self.radii)

    @property
    def volume_ml(self) -> float:
        a, b, c = self.radii
        return 4.0 / 3.0 * math.pi * a * b * c / ML_TO_MM3

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Boolean mask of points satisfying the ellipsoid inequality."""
        points = np.atleast_2d(points)
        if self.is_empty:
            return np.zeros(len(points), dtype=bool)
        dim = points.shape[1]
        center = np.asarray(self.center[:dim])
        radii = np.asarray(self.radii[:dim])
        scaled = (points - center) / radii
        return np.einsum("ij,ij->i", scaled, scaled) <= 1.0


def generate_disc_mesh(radius: float, target_element_count: int) -> Mesh:
    """Delaunay triangulation of concentric node rings.

    Ring i carries m*i nodes, which gives about m*n^2 triangles for n rings.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    if target_element_count < 8:
        raise ValueError("target_element_count must be at least 8")
    rings = max(1, int(round(math.sqrt(target_element_count / 6.0))))
    per_ring = max(3, int(round(target_element_count / rings ** 2)))
    nodes, triangles = _disc_rings(radius, rings, per_ring)
    mesh = Mesh(nodes, triangles, np.ones(len(triangles)), source="disc")
    logger.debug("Generated disc mesh with %d triangles", mesh.element_count)
    return mesh.validate()


def _disc_rings(radius: float, rings: int, per_ring: int) -> Tuple[np.ndarray, np.ndarray]:
    points = [(0.0, 0.0)]
    for i in range(1, rings + 1):
        count = per_ring * i
        angles = 2.0 * math.pi * np.arange(count) / count
        r = radius * i / rings
        points.extend(zip(r * np.cos(angles), r * np.sin(angles)))
    nodes = np.asarray(points)

    triangles = Delaunay(nodes).simplices
    # cocircular ring points can leave slivers
    keep = np.abs(signed_measures(nodes, triangles)) > 1e-9 * radius ** 2
    return nodes, _orient(nodes, triangles[keep])


def _orient(nodes: np.ndarray, elements: np.ndarray) -> np.ndarray:
    elements = np.array(elements, dtype=np.int64)
    negative = signed_measures(nodes, elements) < 0
    elements[negative, 0], elements[negative, 1] = elements[negative, 1], elements[negative, 0].copy()
    return elements


def generate_cylinder_mesh(radius: float, height: float, target_element_count: int) -> Mesh:
    """Extrude a disc triangulation into prism layers split into three tetrahedra each.

    The cylinder axis is z, the bottom cap sits at z = 0.
    """
    if radius <= 0 or height <= 0:
        raise ValueError("cylinder radius and height must be positive")
    if target_element_count < 3:
        raise ValueError("target_element_count must be at least 3")
    rings = max(1, int(round((target_element_count * radius / (18.0 * height)) ** (1.0 / 3.0))))
    layers = max(1, int(round(height * rings / radius)))
    per_ring = max(3, int(round(target_element_count / (3.0 * layers * rings ** 2))))
    disc_nodes, triangles = _disc_rings(radius, rings, per_ring)

    n2 = len(disc_nodes)
    z = np.linspace(0.0, height, layers + 1)
    nodes = np.column_stack([np.tile(disc_nodes, (layers + 1, 1)), np.repeat(z, n2)])

    ordered = np.sort(triangles, axis=1)
    tets = []
    for layer in range(layers):
        v = ordered + layer * n2
        w = v + n2
        # Each quad side is cut from its lower-index bottom node to its higher-index top node.
        tets.append(np.column_stack([v[:, 0], v[:, 1], v[:, 2], w[:, 2]]))
        tets.append(np.column_stack([v[:, 0], v[:, 1], w[:, 1], w[:, 2]]))
        tets.append(np.column_stack([v[:, 0], w[:, 0], w[:, 1], w[:, 2]]))
    elements = _orient(nodes, np.vstack(tets))
    mesh = Mesh(nodes, elements, np.ones(len(elements)), source="cylinder")
    logger.debug("Generated cylinder mesh with %d tetrahedra in %d layers", mesh.element_count, layers)
    return mesh.validate()


def generate_box_mesh(size: Sequence[float], target_element_count: int) -> Mesh:
    """Structured slab centred on the z axis, z in [0, size_z], six tetrahedra per cell."""
    lx, ly, lz = (float(s) for s in size)
    if min(lx, ly, lz) <= 0:
        raise ValueError("box dimensions must be positive")
    if target_element_count < 6:
        raise ValueError("target_element_count must be at least 6")
    h = (lx * ly * lz / (target_element_count / 6.0)) ** (1.0 / 3.0)
    nx, ny, nz = (max(1, int(round(length / h))) for length in (lx, ly, lz))

    xs = np.linspace(-lx / 2.0, lx / 2.0, nx + 1)
    ys = np.linspace(-ly / 2.0, ly / 2.0, ny + 1)
    zs = np.linspace(0.0, lz, nz + 1)
    gz, gy, gx = np.meshgrid(zs, ys, xs, indexing="ij")
    nodes = np.column_stack([gx.ravel(), gy.ravel(), gz.ravel()])

    def index(i, j, k):
        return i + (nx + 1) * (j + (ny + 1) * k)

    ci, cj, ck = np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nz), indexing="ij")
    ci, cj, ck = ci.ravel(), cj.ravel(), ck.ravel()
    tets = []
    for perm in _KUHN_PERMUTATIONS:
        corner = [ci.copy(), cj.copy(), ck.copy()]
        vertices = [index(*corner)]
        for axis in perm:
            corner[axis] = corner[axis] + 1
            vertices.append(index(*corner))
        tets.append(np.column_stack(vertices))
    elements = _orient(nodes, np.vstack(tets))
    mesh = Mesh(nodes, elements, np.ones(len(elements)), source="box")
    logger.debug("Generated box mesh %dx%dx%d cells, %d tetrahedra", nx, ny, nz, mesh.element_count)
    return mesh.validate()


def load_mesh(path: Union[str, Path]) -> Mesh:
    """Read the line-oriented mesh format.

    Header ``dim <2|3>``, then ``nodes <N>`` with N coordinate lines,
    ``elements <M>`` with M zero-based index lines and an optional
    ``sigma <M>`` block. ``#`` starts a comment. Negatively oriented
    elements are reordered; zero-measure elements are rejected.
    """
    path = Path(path)
    lines = []
    with open(path, "r", encoding="utf-8") as handle:
        for number, raw in enumerate(handle, start=1):
            text = raw.split("#", 1)[0].strip()
            if text:
                lines.append((number, text.split()))
    if not lines:
        raise MeshParseError("empty mesh file", line=1)

    cursor = 0

    def header(expected: str) -> int:
        nonlocal cursor
        if cursor >= len(lines):
            raise MeshParseError(f"missing '{expected}' header", line=lines[-1][0])
        number, tokens = lines[cursor]
        if len(tokens) != 2 or tokens[0] != expected:
            raise MeshParseError(f"expected '{expected} <count>'", line=number)
        try:
            value = int(tokens[1])
        except ValueError as exc:
            raise MeshParseError(f"'{expected}' count is not an integer", line=number) from exc
        cursor += 1
        return value

    def block(count: int, width: int, cast):
        nonlocal cursor
        rows = []
        for _ in range(count):
            if cursor >= len(lines):
                raise MeshParseError("unexpected end of file", line=lines[-1][0])
            number, tokens = lines[cursor]
            if len(tokens) != width:
                raise MeshParseError(f"expected {width} values, found {len(tokens)}", line=number)
            try:
                rows.append([cast(t) for t in tokens])
            except ValueError as exc:
                raise MeshParseError(f"cannot parse value: {exc}", line=number) from exc
            cursor += 1
        return rows

    dim = header("dim")
    if dim not in (2, 3):
        raise MeshParseError("dim must be 2 or 3", line=lines[0][0])
    node_rows = block(header("nodes"), dim, float)
    element_count = header("elements")
    element_rows = block(element_count, dim + 1, int)
    sigma = None
    if cursor < len(lines):
        sigma = [row[0] for row in block(header("sigma"), 1, float)]
        if len(sigma) != element_count:
            raise MeshParseError("sigma block length differs from element count", line=lines[cursor - 1][0])
    if cursor < len(lines):
        raise MeshParseError("trailing content after mesh blocks", line=lines[cursor][0])
    if element_count == 0:
        raise MeshParseError("mesh declares no elements", line=lines[-1][0])

    nodes = np.asarray(node_rows, dtype=float).reshape(-1, dim)
    elements = np.asarray(element_rows, dtype=np.int64)
    conductivity = np.asarray(sigma, dtype=float) if sigma is not None else np.ones(element_count)
    mesh = Mesh(nodes, elements, conductivity, source=str(path))
    if np.any(np.abs(signed_measures(mesh.nodes, mesh.elements)) <= 0):
        raise MeshValidationError("positive-measure", "element with zero area/volume")
    mesh = Mesh(mesh.nodes, _orient(mesh.nodes, mesh.elements), mesh.element_conductivity, source=str(path))
    logger.info("Loaded mesh %s with %d elements", path, mesh.element_count)
    return mesh.validate()


def save_mesh(mesh: Mesh, path: Union[str, Path]) -> None:
    """Write a mesh, including its conductivity block, in the load_mesh format."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(f"dim {mesh.dim}\n")
        handle.write(f"nodes {mesh.node_count}\n")
        for row in mesh.nodes:
            handle.write(" ".join(repr(float(v)) for v in row) + "\n")
        handle.write(f"elements {mesh.element_count}\n")
        for row in mesh.elements:
            handle.write(" ".join(str(int(v)) for v in row) + "\n")
        handle.write(f"sigma {mesh.element_count}\n")
        for value in mesh.element_conductivity:
            handle.write(f"{float(value)!r}\n")


def mesh_summary(mesh: Mesh) -> dict:
    lower, upper = mesh.bounding_box
    return {
        "source": mesh.source,
        "dim": mesh.dim,
        "nodes": mesh.node_count,
        "elements": mesh.element_count,
        "boundary_nodes": int(len(mesh.boundary)),
        "bbox_min": [float(v) for v in lower],
        "bbox_max": [float(v) for v in upper],
        "total_measure": float(mesh.measures.sum()),
    }


def volume_to_ellipsoid(
    volume: float,
    aspect: Sequence[float] = DEFAULT_ASPECT,
    center: Sequence[float] = (0.0, 0.0, 0.0),
    conductivity: float = DEFAULT_INCLUSION_CONDUCTIVITY,
) -> EllipsoidInclusion:
    """Ellipsoid with radii proportional to ``aspect`` enclosing ``volume`` mL."""
    if volume < 0:
        raise ValueError("volume must be non-negative")
    aspect = tuple(float(a) for a in aspect)
    if len(aspect) != 3 or any(a <= 0 for a in aspect):
        raise ValueError("aspect needs three positive components")
    if volume == 0:
        return EllipsoidInclusion(center=tuple(center), radii=(0.0, 0.0, 0.0), conductivity=conductivity)
    product = volume * ML_TO_MM3 * 3.0 / (4.0 * math.pi)
    scale = (product / (aspect[0] * aspect[1] * aspect[2])) ** (1.0 / 3.0)
    return EllipsoidInclusion(
        center=tuple(center),
        radii=(aspect[0] * scale, aspect[1] * scale, aspect[2] * scale),
        conductivity=conductivity,
    )


def apply_inclusion(mesh: Mesh, inclusion: EllipsoidInclusion) -> Mesh:
    """Set the conductivity of every element whose centroid lies in the ellipsoid."""
    if inclusion.is_empty:
        return mesh
    lower, upper = mesh.bounding_box
    center = np.asarray(inclusion.center[: mesh.dim])
    if np.any(center < lower) or np.any(center > upper):
        raise ValueError("inclusion center lies outside the mesh bounding box")
    inside = inclusion.contains(mesh.centroids)
    sigma = np.array(mesh.element_conductivity)
    sigma[inside] = inclusion.conductivity
    logger.debug("Inclusion of %.1f mL covers %d elements", inclusion.volume_ml, int(inside.sum()))
    return mesh.with_conductivity(sigma)


def with_background(mesh: Mesh, conductivity: float = DEFAULT_BACKGROUND_CONDUCTIVITY) -> Mesh:
    """Uniform tissue conductivity on the mesh geometry."""
    return mesh.with_conductivity(np.full(mesh.element_count, float(conductivity)))


def inclusion_elements(mesh: Mesh, inclusion: Optional[EllipsoidInclusion]) -> np.ndarray:
    if inclusion is None:
        return np.zeros(mesh.element_count, dtype=bool)
    return inclusion.contains(mesh.centroids)
