# This file is part of python-seqpt which is distributed under the
# PYTHON SOFTWARE FOUNDATION LICENSE VERSION 2.

"""
Command line driver: full reconstruction, the sampling efficiency curve and
the state tomography cross-check, each writing deterministic JSON and CSV
outputs stamped with the configuration hash and the master seed.
"""

import argparse
import csv
import json
import logging
import os
import sys
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .algebra import from_pairs, projector, random_pure_state
from .channels import (ChiMatrix, ChoiMatrix, PHASE_SHIFT, TARGET_PHASE,
                       TARGET_SUPPORT, basis_for_dims, build_phase_slab,
                       channel_from_spec, chi_from_choi, chi_from_kraus,
                       chi_to_json, choi_from_chi, choi_from_kraus,
                       choi_to_json, identity_channel)
from .config import ConfigError, ExperimentConfig, config_hash, load_config
from .postprocess import (ProjectionReport, choi_fidelity, cptp_project,
                          qst_ls, standard_qpt, standard_qpt_settings,
                          state_fidelity)
from .seqpt import (coefficient_index, design_for_dims, reconstruct,
                    resolve_coefficients, sample_plans)
from .seqpt_threaded import threaded_map, workers_from_env
from .simlab import (MissingSettingError, SimulatedSource, audit_dataset,
                     qst_settings, run_experiment, settings_for_plans,
                     store_dataset)

_log = logging.getLogger(__name__)

REPORT_SCHEMA = ("seqpt-reconstruction", 1)

# name -> (schema, version, columns)
CSV_SCHEMAS: Dict[str, Tuple[str, int, Tuple[str, ...]]] = {
    "chi": ("seqpt-chi", 1, (
        "i", "j", "i1", "i2", "j1", "j2", "re", "im", "abs", "stderr",
        "target_re", "target_im", "estimated")),
    "fidelity": ("seqpt-fidelity", 1, (
        "method", "target_label", "fidelity", "iterations", "tp_residual",
        "min_eigenvalue", "converged")),
    "efficiency_curve": ("seqpt-efficiency-curve", 1, (
        "M", "settings_count", "target_label", "fidelity_mean",
        "fidelity_std", "repetitions")),
    "efficiency_points": ("seqpt-efficiency-points", 1, (
        "M", "repetition", "settings_count", "target_label", "fidelity",
        "converged")),
    "qst_histogram": ("seqpt-qst-histogram", 1, (
        "state", "fidelity_seqpt", "fidelity_sqpt")),
    "qst_summary": ("seqpt-qst-summary", 1, (
        "method", "count", "fidelity_mean", "fidelity_std", "fidelity_min",
        "fidelity_max")),
}


def _provenance(config: ExperimentConfig) -> Dict[str, Any]:
    return {"config_hash": config_hash(config), "seed": config.seed}


def _output_path(config: ExperimentConfig, name: str) -> str:
    os.makedirs(config.out_dir, exist_ok=True)
    return os.path.join(config.out_dir, name)


def _cell(value: Any) -> Any:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return "" if np.isnan(value) else repr(float(value))
    return value


def write_csv(config: ExperimentConfig, name: str,
              rows: Sequence[Dict[str, Any]]) -> str:
    """Write ``rows`` under the versioned schema ``name``. Rows whose
    columns differ from the schema are rejected."""
    schema, version, columns = CSV_SCHEMAS[name]
    for row in rows:
        if tuple(row) != columns:
            raise ValueError(f"row with columns {list(row)} does not match "
                             f"schema {schema}/{version}")
    path = _output_path(config, name + ".csv")
    provenance = _provenance(config)
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write(f"# schema: {schema}/{version}\n")
        handle.write(f"# config_hash: {provenance['config_hash']}\n")
        handle.write(f"# seed: {provenance['seed']}\n")
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_cell(v) for v in row.values()])
    _log.info("wrote %d rows to %s", len(rows), path)
    return path


def write_json(config: ExperimentConfig, name: str, obj: Dict[str, Any]
               ) -> str:
    path = _output_path(config, name)
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(obj, handle, sort_keys=True, indent=1)
        handle.write("\n")
    _log.info("wrote %s", path)
    return path


def _project(chi: ChiMatrix, config: ExperimentConfig) -> ProjectionReport:
    return cptp_project(choi_from_chi(chi), config.cptp_tol,
                        config.cptp_max_iter)


def _fidelity_row(method: str, label: str, fidelity: float,
                  projection: ProjectionReport) -> Dict[str, Any]:
    return {"method": method, "target_label": label, "fidelity": fidelity,
            "iterations": projection.iterations,
            "tp_residual": projection.tp_residual,
            "min_eigenvalue": projection.min_eigenvalue,
            "converged": projection.converged}


def comparison_targets(config: ExperimentConfig
                       ) -> List[Tuple[str, ChoiMatrix]]:
    """The declared channel, the identity and, for phase slabs, the same
    slab with its phase shifted by one radian."""
    spec = config.channel
    targets = [("target", choi_from_kraus(channel_from_spec(spec))),
               ("identity", choi_from_kraus(identity_channel(config.dim)))]
    if spec["type"] == "phase_slab":
        shifted = build_phase_slab(
            config.dim, float(spec.get("phase", TARGET_PHASE)) + PHASE_SHIFT,
            spec.get("support", TARGET_SUPPORT))
        targets.append(("shifted", choi_from_kraus(shifted)))
    return targets


def cmd_reconstruct(config: ExperimentConfig, threads: int = 0) -> int:
    """
    Simulate the experiment, reconstruct the selected chi entries and the
    standard tomography baseline, project both onto CPTP maps and compare
    them with the declared channel.

    Returns 1 when an audit fails: a setting missing from the dataset, a
    projection that did not converge or a declared channel that does not
    preserve the trace.
    """
    dims = config.dims
    channel = channel_from_spec(config.channel)
    design = design_for_dims(dims)
    basis = basis_for_dims(dims)
    target = chi_from_kraus(channel, basis)
    pairs = resolve_coefficients(config.coefficients, dims, target)
    failures = []
    if not target.is_trace_preserving():
        failures.append("declared channel is not trace preserving")

    settings_count = None
    shots = config.shots
    if shots is None and not config.save_dataset:
        source: Any = channel
    else:
        plans = sample_plans(pairs, dims, config.sample_size, config.seed)
        settings = settings_for_plans(plans, design, basis) + \
            standard_qpt_settings(design)
        dataset = run_experiment(channel, settings, shots, config.seed,
                                 threads, config.channel, dims,
                                 config_hash(config))
        missing = audit_dataset(dataset, settings)
        if missing:
            failures.append(f"dataset lacks {len(missing)} settings")
        settings_count = len(dataset)
        if config.save_dataset:
            store_dataset(dataset, _output_path(config, "dataset.jsonl.gz"))
        source = dataset

    estimate = reconstruct(source, dims, config.coefficients,
                           config.sample_size, config.seed, 0, threads,
                           reference=target)
    baseline = standard_qpt(source, design, basis)
    target_choi = choi_from_chi(target)
    results = {}
    for method, chi in (("seqpt", estimate.chi()), ("sqpt", baseline)):
        projection = _project(chi, config)
        if not projection.converged:
            failures.append(f"{method} CPTP projection did not converge")
        fidelity = choi_fidelity(projection.output, target_choi)
        _log.info("%s process fidelity %.6f", method, fidelity)
        results[method] = (chi, projection, fidelity)

    report = {
        "schema": REPORT_SCHEMA[0], "schema_version": REPORT_SCHEMA[1],
        "config": config.to_dict(), **_provenance(config),
        "target": {"channel": config.channel,
                   "chi": chi_to_json(basis, target.entries)},
        "seqpt": {**estimate.report(),
                  "chi": chi_to_json(basis, estimate.entries)},
        "sqpt": {"chi": chi_to_json(basis, baseline.entries)},
        "audit": {"passed": not failures, "failures": failures,
                  "settings": settings_count},
    }
    for method, (_, projection, fidelity) in results.items():
        report[method].update({"projection": projection.to_json(),
                               "choi": choi_to_json(projection.output),
                               "fidelity": fidelity})
    write_json(config, "reconstruction.json", report)

    rows = []
    for i, j in [(i, j) for i in range(len(basis))
                 for j in range(i, len(basis))]:
        value = estimate.entries[i, j]
        estimated = bool(estimate.estimated[i, j])
        rows.append(dict(zip(CSV_SCHEMAS["chi"][2], (
            i, j, *coefficient_index(i, j, dims),
            value.real if estimated else None,
            value.imag if estimated else None,
            abs(value) if estimated else None,
            estimate.stderr[i, j] if estimated else None,
            target.entries[i, j].real, target.entries[i, j].imag,
            estimated))))
    write_csv(config, "chi", rows)
    write_csv(config, "fidelity", [
        _fidelity_row(method, "target", fidelity, projection)
        for method, (_, projection, fidelity) in results.items()])

    for failure in failures:
        _log.error("audit failed: %s", failure)
    return 1 if failures else 0


def repetition_seed(seed: int, repetition: int) -> int:
    """Shot-noise seed of one repetition, independent across repetitions."""
    return int(np.random.SeedSequence([seed, repetition]).generate_state(1)[0])


def cmd_efficiency_curve(config: ExperimentConfig, threads: int = 0) -> int:
    """
    Reconstruct the support of the declared channel from ``M`` sampled
    design elements per coefficient, for every ``M`` of the grid and every
    repetition, and compare the projected estimates with each comparison
    target.
    """
    dims = config.dims
    channel = channel_from_spec(config.channel)
    reference = chi_from_kraus(channel, basis_for_dims(dims))
    support = resolve_coefficients("support", dims, reference)
    targets = comparison_targets(config)
    shots = config.shots
    tasks = [(m, r) for m in config.m_grid
             for r in range(config.repetitions)]
    _log.info("efficiency curve: %d support entries, %d runs",
              len(support), len(tasks))

    def run(task: Tuple[int, int]) -> List[Dict[str, Any]]:
        m, r = task
        if shots is None:
            source: Any = channel
        else:
            source = SimulatedSource(channel, shots,
                                     repetition_seed(config.seed, r), dims)
        estimate = reconstruct(source, dims, "support", m, config.seed,
                               permutation=r, reference=reference)
        projection = _project(estimate.chi(), config)
        return [dict(zip(CSV_SCHEMAS["efficiency_points"][2], (
            m, r, len(support) * m, label,
            choi_fidelity(projection.output, choi), projection.converged)))
            for label, choi in targets]

    points = [row for rows in threaded_map(run, tasks, threads)
              for row in rows]
    summary = []
    for m in config.m_grid:
        for label, _ in targets:
            values = np.array([p["fidelity"] for p in points
                               if p["M"] == m and p["target_label"] == label])
            summary.append(dict(zip(CSV_SCHEMAS["efficiency_curve"][2], (
                m, len(support) * m, label, float(values.mean()),
                float(values.std()), len(values)))))
    write_csv(config, "efficiency_curve", summary)
    write_csv(config, "efficiency_points", points)
    unconverged = sum(not p["converged"] for p in points) // len(targets)
    if unconverged:
        _log.error("audit failed: %d CPTP projections did not converge",
                   unconverged)
        return 1
    return 0


def _load_predictions(config: ExperimentConfig) -> Dict[str, ChiMatrix]:
    if config.report is None:
        raise ConfigError("field 'report': qst-histogram needs a "
                          "reconstruction report")
    try:
        with open(config.report, "r", encoding="utf-8") as handle:
            report = json.load(handle)
    except OSError as error:
        raise ConfigError(f"field 'report': cannot read {config.report}: "
                          f"{error.strerror or error}") from error
    except json.JSONDecodeError as error:
        raise ConfigError(f"field 'report': {config.report} is not valid "
                          f"JSON: {error}") from error
    if (report.get("schema"), report.get("schema_version")) != REPORT_SCHEMA:
        raise ConfigError(f"field 'report': {config.report} is not a "
                          f"{REPORT_SCHEMA[0]}/{REPORT_SCHEMA[1]} report")
    if tuple(report["config"]["dims"]) != tuple(config.dims):
        raise ConfigError(f"field 'report': reconstruction of dims "
                          f"{report['config']['dims']} does not match dims "
                          f"{list(config.dims)}")
    basis = basis_for_dims(config.dims)
    return {method: chi_from_choi(
                ChoiMatrix(from_pairs(report[method]["choi"]["entries"])),
                basis)
            for method in ("seqpt", "sqpt")}


def cmd_qst_histogram(config: ExperimentConfig, threads: int = 0) -> int:
    """
    Send random pure states through the declared channel, reconstruct each
    output with state tomography and compare it with the output predicted
    by the SEQPT and the standard reconstructions of a prior report.
    """
    predictions = _load_predictions(config)
    channel = channel_from_spec(config.channel)
    projectors = design_for_dims(config.dims).states
    rng = np.random.default_rng([config.seed, config.states])
    states = [random_pure_state(config.dim, rng).amplitudes
              for _ in range(config.states)]
    settings = qst_settings(states, projectors)
    dataset = run_experiment(channel, settings, config.shots, config.seed,
                             threads, config.channel, config.dims,
                             config_hash(config))
    if config.save_dataset:
        store_dataset(dataset, _output_path(config, "qst_dataset.jsonl.gz"))

    def measure(k: int) -> Dict[str, Any]:
        values, _ = dataset.expectations(states[k][None], projectors)
        observed = qst_ls(values[0], projectors)
        row: Dict[str, Any] = {"state": k}
        for method, chi in predictions.items():
            row[f"fidelity_{method}"] = state_fidelity(
                observed, chi.apply(projector(states[k])))
        return row

    rows = threaded_map(measure, range(config.states), threads)
    write_csv(config, "qst_histogram", rows)
    summary = []
    for method in predictions:
        values = np.array([row[f"fidelity_{method}"] for row in rows])
        summary.append(dict(zip(CSV_SCHEMAS["qst_summary"][2], (
            method, len(values), float(values.mean()), float(values.std()),
            float(values.min()), float(values.max())))))
        _log.info("%s state fidelity %.4f +- %.4f", method, values.mean(),
                  values.std())
    write_csv(config, "qst_summary", summary)
    return 0


COMMANDS: Dict[str, Callable[[ExperimentConfig, int], int]] = {
    "reconstruct": cmd_reconstruct,
    "efficiency-curve": cmd_efficiency_curve,
    "qst-histogram": cmd_qst_histogram,
}


def _argument_parser():
    parser = argparse.ArgumentParser(prog="seqpt")
    parser.description = (
        "Selective and efficient quantum process tomography on simulated "
        "measurements of a channel on two prime-dimensional factors.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config",
                        help="JSON experiment configuration. Defaults are "
                             "used for every field it leaves out.")
    common.add_argument("--seed", type=int,
                        help="Master seed; overrides the configuration.")
    common.add_argument("--out-dir",
                        help="Output directory; overrides the "
                             "configuration.")
    common.add_argument("--mode",
                        help="'noiseless' or 'shots:<N>'; overrides the "
                             "configuration.")
    common.add_argument("--report",
                        help="Reconstruction report read by qst-histogram; "
                             "overrides the configuration.")
    common.add_argument("-v", "--verbose", action="count", default=0,
                        help="Log progress (-v) or details (-vv) to "
                             "stderr.")
    subparsers = parser.add_subparsers(dest="command", metavar="COMMAND")
    subparsers.required = True
    subparsers.add_parser(
        "reconstruct", parents=[common],
        help="Reconstruct chi with SEQPT and standard QPT.")
    subparsers.add_parser(
        "efficiency-curve", parents=[common],
        help="Fidelity of support-only reconstructions against the number "
             "of sampled design elements.")
    subparsers.add_parser(
        "qst-histogram", parents=[common],
        help="State fidelities of predicted against tomographed outputs "
             "for random input states.")
    return parser


def _configure(args) -> ExperimentConfig:
    config = load_config(args.config) if args.config else ExperimentConfig()
    return config.with_overrides(seed=args.seed, out_dir=args.out_dir,
                                 mode=args.mode, report=args.report)


def main(argv: Optional[Sequence[str]] = None):
    args = _argument_parser().parse_args(argv)
    level = {0: logging.WARNING, 1: logging.INFO}.get(args.verbose,
                                                      logging.DEBUG)
    logging.basicConfig(level=level, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = _configure(args)
        threads = workers_from_env()
        status = COMMANDS[args.command](config, threads)
    except (ConfigError, MissingSettingError) as error:
        sys.exit(str(error))
    except ValueError as error:
        # Raised by workers_from_env and by channel specs.
        sys.exit(f"error: {error}")
    if status:
        sys.exit(status)


if __name__ == "__main__":  # pragma: no cover
    main()
