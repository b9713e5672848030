"""Linear finite-element forward model and sensitivity matrix.

Solves div(sigma grad u) = 0 on P1 simplices with point-electrode current
injection and one grounded reference node. Channel voltage is
u(v+) - u(v-).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.linalg import splu

from padeit.channels import ChannelPlan, Pair
from padeit.electrodes import ElectrodeSet
from padeit.errors import DimensionMismatchError, ElectrodePlacementError, SingularSystemError
from padeit.frames import FrameSeries, FrameVector
from padeit.geometry import Mesh

logger = logging.getLogger(__name__)

DEFAULT_CURRENT = 1e-3


def element_gradients(mesh: Mesh) -> np.ndarray:
    """Gradients of the barycentric basis functions, shape (elements, dim + 1, dim)."""
    coords = mesh.nodes[mesh.elements]
    edges = coords[:, 1:, :] - coords[:, :1, :]
    inverse = np.linalg.inv(edges)
    grads = np.empty(coords.shape, dtype=float)
    grads[:, 1:, :] = np.transpose(inverse, (0, 2, 1))
    grads[:, 0, :] = -grads[:, 1:, :].sum(axis=1)
    return grads


def current_vector(node_count: int, source: int, sink: int, current: float) -> np.ndarray:
    """Nodal injection: +current at the source node, -current at the sink node."""
    rhs = np.zeros(node_count)
    rhs[source] += current
    rhs[sink] -= current
    return rhs


def default_reference_node(mesh: Mesh, electrodes: ElectrodeSet) -> int:
    used = set(electrodes.node_indices)
    for node in mesh.boundary:
        if int(node) not in used:
            return int(node)
    raise SingularSystemError("every boundary node carries an electrode; no reference node left")


class ForwardModel:
    """Geometry-dependent FEM terms for one mesh, reusable across conductivities.

    Keeps a one-entry factorization cache, so an instance is not meant to
    be shared between worker threads.
    """

    def __init__(self, mesh: Mesh, electrodes: ElectrodeSet, reference_node: Optional[int] = None):
        nodes = np.asarray(electrodes.node_indices)
        if np.any(nodes < 0) or np.any(nodes >= mesh.node_count):
            raise ElectrodePlacementError("electrode node missing from mesh")
        if not mesh.is_connected():
            raise SingularSystemError("mesh is disconnected; stiffness system is singular")
        self.mesh = mesh
        self.electrodes = electrodes
        self.reference_node = default_reference_node(mesh, electrodes) if reference_node is None else int(reference_node)
        if not 0 <= self.reference_node < mesh.node_count:
            raise ValueError(f"reference node {self.reference_node} not in mesh")

        self.gradients = element_gradients(mesh)
        # conductivity-free element stiffness: |e| * G G^T
        self._shape_stiffness = mesh.measures[:, None, None] * np.einsum("mid,mjd->mij", self.gradients, self.gradients)
        k = mesh.elements.shape[1]
        self._rows = np.repeat(mesh.elements, k, axis=1).ravel()
        self._cols = np.tile(mesh.elements, (1, k)).ravel()
        self._free = np.setdiff1d(np.arange(mesh.node_count), [self.reference_node])
        self._cached_sigma: Optional[np.ndarray] = None
        self._lu = None

    def stiffness(self, conductivity: np.ndarray):
        values = (np.asarray(conductivity)[:, None, None] * self._shape_stiffness).ravel()
        n = self.mesh.node_count
        return coo_matrix((values, (self._rows, self._cols)), shape=(n, n)).tocsr()

    def _factor(self, conductivity: np.ndarray):
        if self._cached_sigma is not None and np.array_equal(self._cached_sigma, conductivity):
            return self._lu
        matrix = self.stiffness(conductivity)[self._free][:, self._free].tocsc()
        try:
            lu = splu(matrix)
        except RuntimeError as exc:
            raise SingularSystemError(f"stiffness factorization failed: {exc}") from exc
        self._cached_sigma = np.array(conductivity)
        self._lu = lu
        return lu

    def potentials(
        self, pairs: Sequence[Pair], current: float, conductivity: Optional[np.ndarray] = None
    ) -> np.ndarray:
        """Nodal potentials, one column per electrode pair, reference node at 0 V."""
        sigma = self.mesh.element_conductivity if conductivity is None else np.asarray(conductivity, dtype=float)
        if len(sigma) != self.mesh.element_count:
            raise DimensionMismatchError("conductivity length differs from element count")
        lu = self._factor(sigma)
        n = self.mesh.node_count
        nodes = self.electrodes.node_indices
        rhs = np.column_stack([current_vector(n, nodes[a], nodes[b], current) for a, b in pairs])
        solution = lu.solve(rhs[self._free])
        if not np.all(np.isfinite(solution)):
            raise SingularSystemError("stiffness solve produced non-finite potentials")
        full = np.zeros((n, len(pairs)))
        full[self._free] = solution
        return full

    def voltages(self, plan: ChannelPlan, current: float, conductivity: Optional[np.ndarray] = None) -> np.ndarray:
        """One solve per distinct injection pair, evaluated at all of its sense pairs."""
        groups = plan.injection_groups()
        fields = self.potentials(list(groups), current, conductivity)
        nodes = self.electrodes.node_indices
        values = np.empty(len(plan))
        for column, indices in enumerate(groups.values()):
            for index in indices:
                plus, minus = plan[index].sense
                values[index] = fields[nodes[plus], column] - fields[nodes[minus], column]
        logger.debug("Solved %d injection pairs for %d channels", len(groups), len(plan))
        return values

    def field_gradients(self, potentials: np.ndarray) -> np.ndarray:
        """Per-element field gradients, shape (elements, columns, dim)."""
        local = potentials[self.mesh.elements]
        return np.einsum("mid,mip->mpd", self.gradients, local)


def _check_inputs(electrodes: ElectrodeSet, plan: ChannelPlan, current: float) -> None:
    if plan.electrode_count != len(electrodes):
        raise DimensionMismatchError(
            f"plan expects {plan.electrode_count} electrodes, electrode set has {len(electrodes)}"
        )
    if not current > 0:
        raise ValueError("current must be positive")


def solve_forward(
    mesh: Mesh,
    electrodes: ElectrodeSet,
    plan: ChannelPlan,
    current: float = DEFAULT_CURRENT,
    reference_node: Optional[int] = None,
) -> FrameVector:
    _check_inputs(electrodes, plan, current)
    model = ForwardModel(mesh, electrodes, reference_node)
    return FrameVector(model.voltages(plan, current), plan)


@dataclass(frozen=True, eq=False)
class SensitivityMatrix:
    """d(channel voltage) / d(element conductivity), channels x elements."""

    entries: np.ndarray
    plan: ChannelPlan
    element_count: int

    def __post_init__(self):
        entries = np.array(self.entries, dtype=float)
        if entries.shape != (len(self.plan), self.element_count):
            raise DimensionMismatchError(
                f"sensitivity shape {entries.shape} != ({len(self.plan)}, {self.element_count})"
            )
        if not np.all(np.isfinite(entries)):
            raise ValueError("sensitivity matrix contains non-finite entries")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.entries.shape


def jacobian(
    mesh: Mesh,
    electrodes: ElectrodeSet,
    plan: ChannelPlan,
    current: float = 1.0,
    reference_node: Optional[int] = None,
    model: Optional[ForwardModel] = None,
) -> SensitivityMatrix:
    """Adjoint-field sensitivity: -|e| grad(u_inject) . grad(u_sense).

    u_inject carries ``current``; u_sense is the unit-current field of the
    sensing pair.
    """
    _check_inputs(electrodes, plan, current)
    if model is None:
        model = ForwardModel(mesh, electrodes, reference_node)
    conductivity = mesh.element_conductivity

    inject_pairs = list(plan.injection_groups())
    sense_pairs = plan.sense_pairs()
    inject_fields = model.field_gradients(model.potentials(inject_pairs, current, conductivity))
    sense_fields = model.field_gradients(model.potentials(sense_pairs, 1.0, conductivity))

    inject_column = {pair: i for i, pair in enumerate(inject_pairs)}
    sense_column = {pair: i for i, pair in enumerate(sense_pairs)}
    a = [inject_column[c.inject] for c in plan]
    s = [sense_column[c.sense] for c in plan]
    products = np.einsum("mcd,mcd->mc", inject_fields[:, a, :], sense_fields[:, s, :])
    entries = -(mesh.measures[:, None] * products).T
    logger.info("Computed %dx%d sensitivity matrix", entries.shape[0], entries.shape[1])
    return SensitivityMatrix(entries, plan, mesh.element_count)


def simulate_series(
    mesh_sequence: Sequence[Mesh],
    electrodes: ElectrodeSet,
    plan: ChannelPlan,
    rate: float,
    noise_sd: float = 0.0,
    rng: Optional[np.random.Generator] = None,
    current: float = DEFAULT_CURRENT,
    session_id: str = "simulated",
) -> FrameSeries:
    """One frame per mesh plus zero-mean Gaussian noise, timestamps at 1/rate."""
    if not mesh_sequence:
        raise ValueError("mesh sequence must not be empty")
    if not rate > 0:
        raise ValueError("rate must be positive")
    if noise_sd < 0:
        raise ValueError("noise_sd must be non-negative")
    _check_inputs(electrodes, plan, current)
    rng = rng if rng is not None else np.random.default_rng(0)

    models: Dict[int, ForwardModel] = {}
    frames: List[np.ndarray] = []
    for mesh in mesh_sequence:
        # meshes derived with with_conductivity share their node array
        key = id(mesh.nodes)
        if key not in models:
            models[key] = ForwardModel(mesh, electrodes)
        frames.append(models[key].voltages(plan, current, mesh.element_conductivity))
    values = np.vstack(frames)
    if noise_sd > 0:
        values = values + rng.normal(0.0, noise_sd, size=values.shape)
    return FrameSeries(values, rate, session_id, tuple(plan.channel_ids))
