"""Small meshes and pad setups shared by the test modules."""

import os
from functools import lru_cache
from pathlib import Path

import numpy as np

from padeit.channels import default_plan
from padeit.electrodes import GridLayout, place_grid
from padeit.experiment_models import DomainSpec, ExperimentConfig, LayoutSpec, ReconstructionSpec
from padeit.geometry import generate_box_mesh, load_mesh, with_background

DATA_DIR = Path(__file__).parent / "data"
SLAB_MESH = DATA_DIR / "abdomen_slab.mesh"

RUN_SLOW = bool(os.environ.get("PADEIT_RUN_SLOW"))
SLOW_REASON = "set PADEIT_RUN_SLOW=1 to run the long acceptance studies"


@lru_cache()
def slab_mesh():
    """36-tetrahedron slab, 30 x 20 x 10 mm, sigma 0.2."""
    return load_mesh(SLAB_MESH)


@lru_cache()
def small_box():
    """60 x 60 x 30 mm box, 15 mm cells, 192 tetrahedra."""
    return with_background(generate_box_mesh((60.0, 60.0, 30.0), 192))


@lru_cache()
def medium_box():
    """120 x 120 x 60 mm box, 15 mm cells, 1536 tetrahedra."""
    return with_background(generate_box_mesh((120.0, 120.0, 60.0), 1536))


def pad_setup(mesh, spacing):
    """3x3 pad at the top centre with its default 48-channel plan."""
    layout = GridLayout(3, 3, spacing)
    return place_grid(mesh, layout), default_plan(layout)


def random_conductivity(mesh, seed=0, low=0.1, high=1.0):
    return np.random.default_rng(seed).uniform(low, high, mesh.element_count)


def quick_config(**overrides):
    """Config that runs every subcommand in seconds on the medium box."""
    config = ExperimentConfig(
        domain=DomainSpec(size=[120.0, 120.0, 60.0], target_elements=1536, bladder_depth=30.0, volume_ml=20.0),
        layout=LayoutSpec(rows=3, cols=3, spacing=30.0),
        reconstruction=ReconstructionSpec(frames_per_state=3, slice_resolution=16),
    )
    if overrides:
        config = ExperimentConfig.model_validate({**config.model_dump(), **overrides})
    return config
