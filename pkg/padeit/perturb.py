"""In-silico experiments: layout sweeps, perturbation trials and labeled datasets."""

from __future__ import annotations

import concurrent.futures
import csv
import hashlib
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from padeit.domain import SimulationDomain, build_domain, build_mesh
from padeit.electrodes import ElectrodeSet, contact_shift, relocate
from padeit.errors import DegenerateInputError, DimensionMismatchError
from padeit.experiment_models import DomainSpec, GridSpec, LayoutSpec
from padeit.forward import DEFAULT_CURRENT, ForwardModel, jacobian
from padeit.frames import default_channel_ids
from padeit.geometry import Mesh
from padeit.inverse import STUDY_LAMBDA_SCALE, LambdaRule, ReconstructionField, reconstruct, roi_response_ratio

logger = logging.getLogger(__name__)

LABEL_COLUMN = "label_ml"
GROUP_COLUMN = "k"
TRIAL_COLUMN = "trial"
SEED_COLUMN = "seed"


@dataclass(frozen=True)
class PerturbationSpec:
    """Degree ``k`` plus the impedance and displacement ranges of one trial."""

    k: int
    impedance_factor_range: Tuple[float, float] = (2.0, 5.0)
    displacement_range: Tuple[float, float] = (5.0, 20.0)
    seed: int = 0

    def __post_init__(self):
        if self.k < 0:
            raise ValueError("perturbation degree k must be non-negative")
        low, high = self.impedance_factor_range
        if not 1.0 <= low <= high:
            raise ValueError("impedance_factor_range must satisfy 1 <= low <= high")
        low, high = self.displacement_range
        if not 0.0 <= low <= high:
            raise ValueError("displacement_range must satisfy 0 <= low <= high")


def derive_seed(master: int, volume: float, k: int, trial: int) -> int:
    """First 8 bytes (big-endian) of SHA-256 over the JSON tuple (master, volume, k, trial)."""
    payload = json.dumps([int(master), float(volume), int(k), int(trial)]).encode("utf-8")
    return int.from_bytes(hashlib.sha256(payload).digest()[:8], "big")


def perturb_trial(
    base_mesh: Mesh,
    electrodes: ElectrodeSet,
    spec: PerturbationSpec,
    rng: Optional[np.random.Generator] = None,
) -> Tuple[Mesh, ElectrodeSet]:
    """Relocate k randomly chosen electrodes, then raise contact impedance at their new nodes."""
    if spec.k > len(electrodes):
        raise ValueError(f"k={spec.k} exceeds the {len(electrodes)} electrodes")
    if spec.k == 0:
        return base_mesh, electrodes
    rng = rng if rng is not None else np.random.default_rng(spec.seed)
    selected = sorted(int(i) for i in rng.choice(len(electrodes), size=spec.k, replace=False))
    low, high = spec.displacement_range
    moved = relocate(electrodes, base_mesh, selected, high, rng, min_displacement=low)
    mesh = contact_shift(base_mesh, moved, selected, spec.impedance_factor_range, rng)
    return mesh, moved


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    """Feature rows (one column per channel) with volume labels and group tags."""

    features: np.ndarray
    labels: np.ndarray
    groups: np.ndarray
    trials: np.ndarray
    seeds: np.ndarray
    channel_ids: Tuple[str, ...] = ()
    classes: Tuple[float, ...] = ()

    def __post_init__(self):
        features = np.array(self.features, dtype=float)
        if features.ndim != 2:
            raise DimensionMismatchError("features must be a rows x channels matrix")
        n = len(features)
        labels = np.array(self.labels, dtype=float).reshape(-1)
        groups = np.array(self.groups, dtype=np.int64).reshape(-1)
        trials = np.array(self.trials, dtype=np.int64).reshape(-1)
        seeds = np.array(self.seeds, dtype=np.uint64).reshape(-1)
        if not (len(labels) == len(groups) == len(trials) == len(seeds) == n):
            raise DimensionMismatchError("labels, groups, trials and seeds need one entry per row")
        ids = tuple(self.channel_ids) or default_channel_ids(features.shape[1])
        if len(ids) != features.shape[1]:
            raise DimensionMismatchError("one channel id per feature column required")
        classes = tuple(float(c) for c in self.classes) or tuple(sorted(set(labels.tolist())))
        if not set(labels.tolist()) <= set(classes):
            raise ValueError("labels outside the declared class set")
        for name, value in (("features", features), ("labels", labels), ("groups", groups),
                            ("trials", trials), ("seeds", seeds)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)
        object.__setattr__(self, "channel_ids", ids)
        object.__setattr__(self, "classes", classes)

    def __len__(self) -> int:
        return len(self.features)

    @property
    def channel_count(self) -> int:
        return self.features.shape[1]

    def subset(self, mask: np.ndarray, classes: Optional[Sequence[float]] = None) -> "LabeledDataset":
        mask = np.asarray(mask)
        return LabeledDataset(
            self.features[mask], self.labels[mask], self.groups[mask], self.trials[mask], self.seeds[mask],
            self.channel_ids, tuple(classes) if classes is not None else self.classes,
        )

    def restrict_to(self, classes: Sequence[float]) -> "LabeledDataset":
        """Rows whose label is one of ``classes``."""
        return self.subset(np.isin(self.labels, list(classes)), classes)


def dataset_header(dataset: LabeledDataset) -> List[str]:
    return list(dataset.channel_ids) + [LABEL_COLUMN, GROUP_COLUMN, TRIAL_COLUMN, SEED_COLUMN]


def dataset_rows(dataset: LabeledDataset) -> List[dict]:
    rows = []
    for i in range(len(dataset)):
        row = {cid: float(v) for cid, v in zip(dataset.channel_ids, dataset.features[i])}
        row[LABEL_COLUMN] = float(dataset.labels[i])
        row[GROUP_COLUMN] = int(dataset.groups[i])
        row[TRIAL_COLUMN] = int(dataset.trials[i])
        row[SEED_COLUMN] = int(dataset.seeds[i])
        rows.append(row)
    return rows


def load_dataset(path: Union[str, Path], classes: Optional[Sequence[float]] = None) -> LabeledDataset:
    """Read a dataset CSV written by the sweep-perturbation command."""
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"dataset CSV {path} is empty") from None
        rows = [row for row in reader if row]
    required = (LABEL_COLUMN, GROUP_COLUMN, TRIAL_COLUMN, SEED_COLUMN)
    missing = [name for name in required if name not in header]
    if missing:
        raise ValueError(f"dataset CSV missing columns: {', '.join(missing)}")
    if not rows:
        raise ValueError(f"dataset CSV {path} has no rows")
    position = {name: header.index(name) for name in required}
    channel_cols = [i for i, name in enumerate(header) if name not in required]
    try:
        features = np.array([[float(row[i]) for i in channel_cols] for row in rows])
        labels = [float(row[position[LABEL_COLUMN]]) for row in rows]
        groups = [int(row[position[GROUP_COLUMN]]) for row in rows]
        trials = [int(row[position[TRIAL_COLUMN]]) for row in rows]
        seeds = [int(row[position[SEED_COLUMN]]) for row in rows]
    except (IndexError, ValueError) as exc:
        raise ValueError(f"malformed dataset CSV {path}: {exc}") from exc
    if not np.all(np.isfinite(features)):
        raise ValueError("dataset features must be finite")
    return LabeledDataset(
        features, labels, groups, trials, seeds,
        tuple(header[i] for i in channel_cols), tuple(classes) if classes else (),
    )


def generate_dataset(
    domain: SimulationDomain,
    classes: Sequence[float],
    k_levels: Sequence[int],
    trials_per_cell: int,
    seed: int = 0,
    impedance_factor_range: Tuple[float, float] = (2.0, 5.0),
    displacement_range: Tuple[float, float] = (5.0, 20.0),
    noise_sd: float = 0.0,
    current: float = DEFAULT_CURRENT,
    threads: int = 1,
) -> LabeledDataset:
    """One row per (volume, k, trial): perturbed frame minus the unperturbed empty frame.

    Rows come out ordered by volume, then k, then trial whatever the
    completion order of the workers.
    """
    if trials_per_cell < 1:
        raise ValueError("trials_per_cell must be at least 1")
    if not classes:
        raise ValueError("at least one volume class is required")
    if not k_levels:
        raise ValueError("at least one perturbation level is required")
    if max(k_levels) > len(domain.electrodes) or min(k_levels) < 0:
        raise ValueError(f"k levels must lie in 0..{len(domain.electrodes)}")
    if noise_sd < 0:
        raise ValueError("noise_sd must be non-negative")

    plan = domain.plan
    baseline = ForwardModel(domain.mesh, domain.electrodes).voltages(plan, current)
    filled = {float(v): domain.filled(float(v)) for v in classes}
    cells = [(float(v), int(k), t) for v in classes for k in k_levels for t in range(trials_per_cell)]

    def run(cell: Tuple[float, int, int]) -> Tuple[np.ndarray, int]:
        volume, k, trial = cell
        trial_seed = derive_seed(seed, volume, k, trial)
        rng = np.random.default_rng(trial_seed)
        spec = PerturbationSpec(k, tuple(impedance_factor_range), tuple(displacement_range), trial_seed)
        mesh, electrodes = perturb_trial(filled[volume], domain.electrodes, spec, rng)
        frame = ForwardModel(mesh, electrodes).voltages(plan, current)
        features = frame - baseline
        if noise_sd > 0:
            features = features + rng.normal(0.0, noise_sd, size=features.shape)
        return features, trial_seed

    logger.info(
        "Generating %d rows (%d classes x %d levels x %d trials) on %d thread(s)",
        len(cells), len(classes), len(k_levels), trials_per_cell, threads,
    )
    results: Dict[int, Tuple[np.ndarray, int]] = {}
    if threads > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as executor:
            futures = {executor.submit(run, cell): index for index, cell in enumerate(cells)}
            for future in concurrent.futures.as_completed(futures):
                results[futures[future]] = future.result()
    else:
        for index, cell in enumerate(cells):
            results[index] = run(cell)

    ordered = [results[i] for i in range(len(cells))]
    return LabeledDataset(
        features=np.vstack([features for features, _ in ordered]),
        labels=[cell[0] for cell in cells],
        groups=[cell[1] for cell in cells],
        trials=[cell[2] for cell in cells],
        seeds=[trial_seed for _, trial_seed in ordered],
        channel_ids=tuple(plan.channel_ids),
        classes=tuple(float(v) for v in classes),
    )


@dataclass(frozen=True, eq=False)
class DifferenceImage:
    """Noise-free empty and filled frames with their reconstruction."""

    empty: np.ndarray
    full: np.ndarray
    field: ReconstructionField
    roi_ratio: float
    degenerate: bool
    peak_inside: bool = False


def difference_image(
    domain: SimulationDomain,
    volume_ml: float,
    lam: Optional[float] = None,
    p: float = 0.5,
    current: float = DEFAULT_CURRENT,
    lambda_rule: LambdaRule = LambdaRule.weighted_trace,
    lambda_scale: float = STUDY_LAMBDA_SCALE,
) -> DifferenceImage:
    """Simulate empty and filled states, reconstruct, and score localization.

    Automatic lambda follows the experiment defaults, not the library ones.
    """
    model = domain.forward_model()
    full_mesh = domain.filled(volume_ml)
    empty = model.voltages(domain.plan, current)
    full = model.voltages(domain.plan, current, full_mesh.element_conductivity)
    J = jacobian(domain.mesh, domain.electrodes, domain.plan, current, model=model)
    field = reconstruct(J, full - empty, lam, p, lambda_rule, lambda_scale)

    inclusion = domain.inclusion(volume_ml)
    degenerate = field.degenerate or inclusion.is_empty
    if degenerate:
        logger.warning("Volume %.1f mL gives no difference signal; RoI ratio undefined", volume_ml)
        ratio = float("nan")
    else:
        try:
            ratio = roi_response_ratio(field, domain.mesh, inclusion)
        except DegenerateInputError as exc:
            logger.warning("RoI ratio undefined: %s", exc)
            ratio, degenerate = float("nan"), True
    peak_inside = bool(inclusion.contains(domain.mesh.centroids[field.peak_element])[0])
    return DifferenceImage(empty, full, field, ratio, degenerate, peak_inside)


@dataclass(frozen=True)
class LayoutResult:
    label: str
    rows: int
    cols: int
    spacing: float
    channels: int
    roi_ratio: float
    degenerate: bool
    peak_inside: bool = False

    def to_row(self) -> dict:
        return {
            "layout": self.label,
            "rows": self.rows,
            "cols": self.cols,
            "spacing_mm": self.spacing,
            "channels": self.channels,
            "roi_ratio": self.roi_ratio,
            "degenerate": int(self.degenerate),
            "peak_in_bladder": int(self.peak_inside),
        }


def layout_sweep(
    domain_spec: DomainSpec,
    layout_spec: LayoutSpec,
    grids: Sequence[GridSpec],
    volume_ml: float,
    lam: Optional[float] = None,
    p: float = 0.5,
    current: float = DEFAULT_CURRENT,
    mesh: Optional[Mesh] = None,
    threads: int = 1,
    lambda_rule: LambdaRule = LambdaRule.weighted_trace,
    lambda_scale: float = STUDY_LAMBDA_SCALE,
) -> List[LayoutResult]:
    """RoI response ratio of each pad design for one bladder volume, in input order."""
    if not grids:
        raise ValueError("at least one layout is required")
    if mesh is None:
        mesh = build_mesh(domain_spec)

    def run(grid: GridSpec) -> LayoutResult:
        domain = build_domain(domain_spec, layout_spec, grid, mesh=mesh)
        image = difference_image(domain, volume_ml, lam, p, current, lambda_rule, lambda_scale)
        logger.info("Layout %s: RoI ratio %.4g", domain.layout.label, image.roi_ratio)
        return LayoutResult(
            domain.layout.label, grid.rows, grid.cols, grid.spacing, len(domain.plan),
            image.roi_ratio, image.degenerate, image.peak_inside,
        )

    if threads > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as executor:
            return list(executor.map(run, grids))
    return [run(grid) for grid in grids]
