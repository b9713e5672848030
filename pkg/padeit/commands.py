"""Subcommand handlers: each turns (config, inputs) into files in the output directory."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List

import numpy as np

from padeit.analysis import (
    baseline_subtract,
    channel_profile,
    cosine_similarity,
    evaluate_loo,
    fullness_sweep,
    global_signal,
    group_average,
    mean_pairwise_pearson,
    normalize_to_start,
    pearson,
    window_mean,
)
from padeit.channels import plan_rows
from padeit.domain import build_domain
from padeit.electrodes import electrode_table
from padeit.errors import DegenerateInputError, UsageError
from padeit.experiment_models import ClassificationSpec, ExperimentConfig
from padeit.forward import jacobian, simulate_series
from padeit.frames import TIMESTAMP_COLUMN, FrameSeries, load_frame_series
from padeit.inverse import Reconstructor, raster_to_graymap, roi_response_ratio, slice_field
from padeit.output_formatter import OutputFormatter
from padeit.perturb import LabeledDataset, dataset_header, dataset_rows, generate_dataset, layout_sweep, load_dataset

logger = logging.getLogger(__name__)

ANALYZE_MODES = ("baseline", "group", "normalize", "compare", "window", "global", "profile")


@dataclass
class RunContext:
    config: ExperimentConfig
    formatter: OutputFormatter
    threads: int = 1
    options: Dict[str, Any] = field(default_factory=dict)


def _write_effective_config(ctx: RunContext) -> dict:
    return ctx.formatter.write_json("effective_config.json", ctx.config.to_json())


def _series_header(series: FrameSeries) -> List[str]:
    return [TIMESTAMP_COLUMN] + list(series.channel_ids)


def cmd_simulate(ctx: RunContext) -> List[dict]:
    """Empty then filled frames, difference reconstruction and a slice through the bladder centre."""
    config = ctx.config
    rec = config.reconstruction
    out = ctx.formatter
    domain = build_domain(config.domain, config.layout)
    volume = config.domain.volume_ml
    states = [domain.mesh] * rec.frames_per_state + [domain.filled(volume)] * rec.frames_per_state
    series = simulate_series(
        states, domain.electrodes, domain.plan, rec.frame_rate, rec.noise_sd,
        np.random.default_rng(config.seed), rec.current, session_id="simulate",
    )
    delta = window_mean(baseline_subtract(series), config.analysis.window_seconds)

    model = domain.forward_model()
    J = jacobian(domain.mesh, domain.electrodes, domain.plan, rec.current, model=model)
    field_ = Reconstructor(J, rec.lam, rec.p, rec.lambda_rule, rec.lambda_scale).reconstruct(delta)

    inclusion = domain.inclusion(volume)
    degenerate = field_.degenerate or inclusion.is_empty
    ratio = float("nan") if degenerate else roi_response_ratio(field_, domain.mesh, inclusion)
    peak_inside = bool(not inclusion.is_empty and inclusion.contains(domain.mesh.centroids[field_.peak_element])[0])

    height = None
    if domain.mesh.dim == 3:
        lower, upper = domain.mesh.bounding_box
        height = float(np.clip(domain.bladder_center[2], lower[2], upper[2]))
    raster = slice_field(field_, domain.mesh, height, rec.slice_resolution)

    files = [
        _write_effective_config(ctx),
        out.write_csv("electrodes.csv", ["electrode", "x", "y", "z", "node"], electrode_table(domain.electrodes)),
        out.write_csv(
            "channels.csv", ["channel", "inject_pos", "inject_neg", "sense_pos", "sense_neg"], plan_rows(domain.plan)
        ),
        out.write_csv("frames.csv", _series_header(series), series.to_rows()),
        out.write_csv("field.csv", ["element", "value"], field_.to_rows()),
        out.write_matrix_csv("slice.csv", raster.values),
        out.write_graymap("slice.pgm", raster_to_graymap(raster)),
    ]
    summary = [
        {"metric": "volume_ml", "value": volume},
        {"metric": "elements", "value": domain.mesh.element_count},
        {"metric": "channels", "value": len(domain.plan)},
        {"metric": "lambda", "value": field_.regularization},
        {"metric": "p", "value": field_.exponent},
        {"metric": "floored_elements", "value": len(field_.floored_elements)},
        {"metric": "roi_ratio", "value": ratio},
        {"metric": "peak_in_bladder", "value": int(peak_inside)},
        {"metric": "slice_height_mm", "value": height if height is not None else float("nan")},
        {"metric": "degenerate", "value": int(degenerate)},
    ]
    files.append(out.write_csv("summary.csv", ["metric", "value"], summary))
    if degenerate:
        logger.warning("Simulation at %.1f mL is degenerate (no difference signal)", volume)
    return files


def cmd_sweep_layout(ctx: RunContext) -> List[dict]:
    config = ctx.config
    rec = config.reconstruction
    results = layout_sweep(
        config.domain, config.layout, config.layout.sweep, config.domain.volume_ml,
        rec.lam, rec.p, rec.current, threads=ctx.threads,
        lambda_rule=rec.lambda_rule, lambda_scale=rec.lambda_scale,
    )
    header = ["layout", "rows", "cols", "spacing_mm", "channels", "roi_ratio", "degenerate", "peak_in_bladder"]
    return [
        _write_effective_config(ctx),
        ctx.formatter.write_csv("layout_sweep.csv", header, [r.to_row() for r in results]),
    ]


def _division_label(division) -> str:
    return "/".join(format(float(v), "g") for v in division)


def _accuracy_rows(dataset: LabeledDataset, spec: ClassificationSpec, threads: int) -> List[dict]:
    rows: List[dict] = []
    if len(set(dataset.groups.tolist())) < 2:
        logger.warning("Dataset has a single perturbation level; skipping leave-one-group-out accuracy")
        return rows
    present = set(dataset.labels.tolist())
    for division in spec.divisions:
        if not set(float(v) for v in division) <= present:
            logger.warning("Skipping division %s: not every class is in the dataset", _division_label(division))
            continue
        report = evaluate_loo(dataset, division, spec.l2, spec.tolerance, spec.max_iterations, threads)
        label = _division_label(division)
        for entry in report.groups:
            rows.append({"division": label, **entry.to_row()})
        logger.info("Division %s: mean accuracy %.4f", label, report.mean_accuracy)
    return rows


ACCURACY_HEADER = ["division", "group", "n_train", "n_test", "accuracy"]


def cmd_sweep_perturbation(ctx: RunContext) -> List[dict]:
    config = ctx.config
    study = config.perturbation
    domain = build_domain(config.domain, config.layout)
    dataset = generate_dataset(
        domain,
        config.classification.classes,
        study.k_levels,
        study.trials_per_cell,
        seed=config.seed,
        impedance_factor_range=tuple(study.impedance_factor_range),
        displacement_range=tuple(study.displacement_range),
        noise_sd=study.noise_sd,
        current=config.reconstruction.current,
        threads=ctx.threads,
    )
    files = [
        _write_effective_config(ctx),
        ctx.formatter.write_csv("dataset.csv", dataset_header(dataset), dataset_rows(dataset)),
    ]
    rows = _accuracy_rows(dataset, config.classification, ctx.threads)
    files.append(ctx.formatter.write_csv("accuracy_vs_k.csv", ACCURACY_HEADER, rows))
    return files


def cmd_classify(ctx: RunContext) -> List[dict]:
    path = ctx.options.get("dataset")
    if not path:
        raise UsageError("classify needs --dataset <csv>")
    spec = ctx.config.classification
    dataset = load_dataset(path)
    files = [
        _write_effective_config(ctx),
        ctx.formatter.write_csv("accuracy.csv", ACCURACY_HEADER, _accuracy_rows(dataset, spec, ctx.threads)),
    ]
    results = []
    for low, high in spec.fullness_pairs:
        try:
            results.extend(
                fullness_sweep(
                    dataset, [(low, high)], spec.fullness_max_k,
                    l2=spec.l2, tolerance=spec.tolerance, max_iterations=spec.max_iterations,
                )
            )
        except DegenerateInputError as exc:
            logger.warning("Skipping fullness pair (%g, %g): %s", low, high, exc)
    fullness_header = ["v_low", "v_high", "auc", "accuracy", "positives", "negatives", "resubstitution"]
    files.append(ctx.formatter.write_csv("fullness.csv", fullness_header, [r.to_row() for r in results]))
    roc_rows = [
        {"v_low": r.v_low, "v_high": r.v_high, **point} for r in results for point in r.curve_rows()
    ]
    files.append(ctx.formatter.write_csv("roc.csv", ["v_low", "v_high", "fpr", "tpr", "threshold"], roc_rows))
    return files


def cmd_analyze(ctx: RunContext) -> List[dict]:
    mode = ctx.options.get("mode")
    inputs = ctx.options.get("inputs") or []
    if mode not in ANALYZE_MODES:
        raise UsageError(f"analyze mode must be one of {', '.join(ANALYZE_MODES)}")
    if not inputs:
        raise UsageError("analyze needs --input <frames.csv>")
    spec = ctx.config.analysis
    series = load_frame_series(inputs[0], rate=spec.rate)
    out = ctx.formatter
    filename = f"analysis_{mode}.csv"

    if mode == "baseline":
        result = baseline_subtract(series)
        written = out.write_csv(filename, _series_header(result), result.to_rows())
    elif mode == "group":
        result = group_average(series, ctx.options.get("group_size") or spec.group_size)
        written = out.write_csv(filename, _series_header(result), result.to_rows())
    elif mode == "window":
        seconds = ctx.options.get("window") or spec.window_seconds
        mean = window_mean(series, seconds)
        written = out.write_csv(filename, list(series.channel_ids), [dict(zip(series.channel_ids, mean.values))])
    elif mode == "global":
        curve = global_signal(series)
        rows = [{TIMESTAMP_COLUMN: t, "global": g} for t, g in zip(series.timestamps, curve)]
        written = out.write_csv(filename, [TIMESTAMP_COLUMN, "global"], rows)
    elif mode == "normalize":
        curve = global_signal(series)
        normalized = normalize_to_start(curve)
        rows = [
            {TIMESTAMP_COLUMN: t, "global": g, "normalized": n}
            for t, g, n in zip(series.timestamps, curve, normalized)
        ]
        written = out.write_csv(filename, [TIMESTAMP_COLUMN, "global", "normalized"], rows)
    elif mode == "profile":
        mean, sd = channel_profile(series)
        rows = [{"channel": cid, "mean": m, "sd": s} for cid, m, s in zip(series.channel_ids, mean, sd)]
        written = out.write_csv(filename, ["channel", "mean", "sd"], rows)
    else:
        if len(inputs) < 2:
            raise UsageError("analyze compare needs two --input files")
        other = load_frame_series(inputs[1], rate=spec.rate)
        a = series.frames.mean(axis=0)
        b = other.frames.mean(axis=0)
        rows = [
            {"metric": "cosine", "value": cosine_similarity(a, b)},
            {"metric": "pearson", "value": pearson(a, b)},
        ]
        if len(series) == len(other):
            try:
                curves = [global_signal(series), global_signal(other)]
                rows.append({"metric": "global_pearson", "value": mean_pairwise_pearson(curves)})
            except DegenerateInputError as exc:
                logger.warning("Skipping global curve correlation: %s", exc)
        written = out.write_csv(filename, ["metric", "value"], rows)
    return [_write_effective_config(ctx), written]
