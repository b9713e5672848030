"""Build a ready-to-simulate domain (mesh, electrodes, plan) from a config."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from padeit.channels import ChannelPlan, plan_for_strategy
from padeit.config import get_settings
from padeit.electrodes import ElectrodeSet, GridLayout, default_origin, place_grid, surface_normal
from padeit.experiment_models import DomainSpec, GridSpec, LayoutSpec, MeshGenerator
from padeit.forward import ForwardModel
from padeit.geometry import (
    EllipsoidInclusion,
    Mesh,
    apply_inclusion,
    generate_box_mesh,
    generate_cylinder_mesh,
    generate_disc_mesh,
    load_mesh,
    mesh_summary,
    volume_to_ellipsoid,
    with_background,
)

logger = logging.getLogger(__name__)


def resolve_mesh_path(mesh_path: str) -> Path:
    """Relative paths that do not exist here are looked up in PADEIT_MESH_DIR."""
    path = Path(mesh_path)
    mesh_dir = get_settings().mesh_dir
    if not path.is_absolute() and not path.exists() and mesh_dir:
        return Path(mesh_dir) / path
    return path


def build_mesh(spec: DomainSpec) -> Mesh:
    """Background-conductivity mesh for the configured generator."""
    if spec.generator == MeshGenerator.box:
        mesh = generate_box_mesh(spec.size, spec.target_elements)
    elif spec.generator == MeshGenerator.cylinder:
        mesh = generate_cylinder_mesh(spec.radius, spec.height, spec.target_elements)
    elif spec.generator == MeshGenerator.disc:
        mesh = generate_disc_mesh(spec.radius, spec.target_elements)
    else:
        mesh = load_mesh(resolve_mesh_path(spec.mesh_path))
    mesh = with_background(mesh, spec.background_conductivity)
    logger.info("Domain mesh: %s", mesh_summary(mesh))
    return mesh


def grid_layout(layout: LayoutSpec, grid: Optional[GridSpec] = None) -> GridLayout:
    """GridLayout from the config, optionally with another rows/cols/spacing."""
    grid = grid or layout
    return GridLayout(
        rows=grid.rows,
        cols=grid.cols,
        spacing=grid.spacing,
        origin=tuple(layout.origin) if layout.origin is not None else None,
        orientation=tuple(layout.orientation),
    )


@dataclass(frozen=True, eq=False)
class SimulationDomain:
    """Empty-bladder mesh with a placed pad and its channel plan."""

    mesh: Mesh
    layout: GridLayout
    electrodes: ElectrodeSet
    plan: ChannelPlan
    bladder_center: np.ndarray
    spec: DomainSpec

    def inclusion(self, volume_ml: float) -> EllipsoidInclusion:
        return volume_to_ellipsoid(
            volume_ml,
            self.spec.bladder_aspect,
            tuple(self.bladder_center),
            self.spec.inclusion_conductivity,
        )

    def filled(self, volume_ml: float, base: Optional[Mesh] = None) -> Mesh:
        """``base`` (default: the empty mesh) with the bladder at ``volume_ml``."""
        return apply_inclusion(base if base is not None else self.mesh, self.inclusion(volume_ml))

    def forward_model(self, electrodes: Optional[ElectrodeSet] = None) -> ForwardModel:
        return ForwardModel(self.mesh, electrodes or self.electrodes)


def bladder_center(mesh: Mesh, spec: DomainSpec, origin: np.ndarray) -> np.ndarray:
    """Configured centre, else ``bladder_depth`` below the pad along the inward normal."""
    if spec.bladder_center is not None:
        return np.asarray(spec.bladder_center, dtype=float)[: mesh.dim]
    anchor = mesh.boundary[int(np.argmin(np.linalg.norm(mesh.nodes[mesh.boundary] - origin, axis=1)))]
    return origin - spec.bladder_depth * surface_normal(mesh, int(anchor))


def build_domain(
    spec: DomainSpec,
    layout: LayoutSpec,
    grid: Optional[GridSpec] = None,
    mesh: Optional[Mesh] = None,
) -> SimulationDomain:
    mesh = mesh if mesh is not None else build_mesh(spec)
    grid_layout_ = grid_layout(layout, grid)
    electrodes = place_grid(mesh, grid_layout_, layout.contact_radius)
    plan = plan_for_strategy(layout.channel_strategy, grid_layout_, layout.diagonal_strategy)
    origin = (
        np.asarray(layout.origin, dtype=float)[: mesh.dim] if layout.origin is not None else default_origin(mesh)
    )
    center = bladder_center(mesh, spec, origin)
    logger.info(
        "Domain ready: %s pad, %d channels, bladder centre %s",
        grid_layout_.label, len(plan), np.round(center, 3).tolist(),
    )
    return SimulationDomain(mesh, grid_layout_, electrodes, plan, center, spec)
