"""Command-line pipeline: simulate -> residuals -> estimate-w -> evaluate.

Every command writes a manifest.json into its output directory recording
the command, a digest of its configuration, seeds, input/output paths and
wall-clock duration. Exit codes: 0 success, 2 validation error, 3
numerical failure, 4 I/O failure.
"""

from __future__ import annotations

import csv
import dataclasses
import functools
import hashlib
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import click
import numpy as np

from . import __version__, io
from .errors import DegreeCapError, NumericalError, ValidationError
from .graph import FeasibleSubgraph, Graph, connected_components, lattice_graph
from .objective import objective
from .residuals import fit_poisson_glm, raw_residuals, temporal_average
from .search import SearchConfig, brute_force_optimum, local_search
from .simulate import SimulatedPanel, SimulationConfig, simulate_panel
from .smoothing import (
    EvalReport,
    SmootherGrid,
    evaluate_replicate,
    evaluate_replicate_surfaces,
)

_CONFIG_KEYS = {f.name for f in dataclasses.fields(SimulationConfig)}


def _handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (ValidationError, DegreeCapError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)
        except NumericalError as exc:
            click.echo(f"numerical failure: {exc}", err=True)
            sys.exit(3)
        except OSError as exc:
            click.echo(f"i/o failure: {exc}", err=True)
            sys.exit(4)

    return wrapper


def _digest(payload) -> str:
    return hashlib.sha256(
        json.dumps(payload, sort_keys=True, default=str).encode()
    ).hexdigest()


def _write_manifest(out_dir: Path, command: str, params: dict, seed,
                    inputs: list[str], outputs: list[str], started: float) -> None:
    io.write_json(
        out_dir / "manifest.json",
        {
            "command": command,
            "version": __version__,
            "config_digest": _digest(params),
            "seed": seed,
            "inputs": sorted(inputs),
            "outputs": sorted(outputs),
            "duration_s": time.monotonic() - started,
        },
    )


@click.group()
@click.version_option(version=__version__)
def main():
    """Neighbourhood-graph estimation tools for areal count data."""


def _scenario_config(raw: dict) -> SimulationConfig:
    unknown = set(raw) - _CONFIG_KEYS
    if unknown:
        raise ValidationError(f"unknown config keys: {sorted(unknown)}")
    kwargs = dict(raw)
    for key in ("beta", "e_range"):
        if key in kwargs:
            kwargs[key] = tuple(kwargs[key])
    missing = {"rows", "cols", "n_periods"} - set(kwargs)
    if missing:
        raise ValidationError(f"config missing required keys: {sorted(missing)}")
    return SimulationConfig(**kwargs)


def _load_scenarios(config_path: Path) -> tuple[list[SimulationConfig], int, bool]:
    raw = io.read_json(config_path)
    replicates = int(raw.pop("replicates", 1))
    if replicates < 1:
        raise ValidationError("replicates must be >= 1")
    if "scenarios" in raw:
        base = raw.get("base", {})
        scenarios = [_scenario_config({**base, **s}) for s in raw["scenarios"]]
        if not scenarios:
            raise ValidationError("scenario list is empty")
        return scenarios, replicates, True
    return [_scenario_config(raw)], replicates, False


def _simulate_one(task) -> list[str]:
    cfg_dict, seed, s_idx, rep, rep_dir = task
    cfg = SimulationConfig(**cfg_dict)
    rng = np.random.default_rng([seed, s_idx, rep])
    sim = simulate_panel(cfg, rng)
    rep_dir = Path(rep_dir)
    rep_dir.mkdir(parents=True, exist_ok=True)
    io.write_panel_csv(rep_dir / "panel.csv", sim.panel)
    io.write_truth_csv(rep_dir / "truth.csv", sim)
    io.write_edge_csv(rep_dir / "graph.csv", lattice_graph(cfg.rows, cfg.cols))
    io.write_centroids_csv(rep_dir / "centroids.csv", sim.centroids)
    io.write_json(
        rep_dir / "metadata.json",
        {
            "seed": seed,
            "scenario_index": s_idx,
            "replicate": rep,
            "config": dataclasses.asdict(cfg),
            "cov_range_param": sim.cov_range_param,
            "surface_range_param": sim.surface_range_param,
        },
    )
    return [
        str(rep_dir / name)
        for name in ("panel.csv", "truth.csv", "graph.csv", "centroids.csv", "metadata.json")
    ]


@main.command("simulate")
@click.option("--config", "config_path", required=True, type=click.Path(path_type=Path))
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path))
@click.option("--seed", type=int, default=None, help="Override the config seed.")
@click.option("--replicates", type=int, default=None, help="Override the replicate count.")
@click.option("--jobs", type=int, default=1, show_default=True)
@_handle_errors
def cmd_simulate(config_path: Path, out_dir: Path, seed, replicates, jobs):
    """Generate synthetic panels (with truth) for one or more scenarios."""
    started = time.monotonic()
    scenarios, cfg_replicates, batch = _load_scenarios(config_path)
    if replicates is not None:
        cfg_replicates = replicates
    if cfg_replicates < 1:
        raise ValidationError("replicates must be >= 1")
    out_dir.mkdir(parents=True, exist_ok=True)

    tasks = []
    for s_idx, cfg in enumerate(scenarios):
        run_seed = seed if seed is not None else cfg.seed
        for rep in range(cfg_replicates):
            if batch:
                rep_dir = out_dir / f"s{s_idx:02d}" / f"rep{rep:03d}"
            else:
                rep_dir = out_dir / f"rep{rep:03d}"
            tasks.append((dataclasses.asdict(cfg), run_seed, s_idx, rep, str(rep_dir)))

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outputs = [p for chunk in pool.map(_simulate_one, tasks) for p in chunk]
    else:
        outputs = [p for task in tasks for p in _simulate_one(task)]

    if batch:
        io.write_json(
            out_dir / "scenarios.json",
            {"scenarios": [dataclasses.asdict(c) for c in scenarios], "replicates": cfg_replicates},
        )
        outputs.append(str(out_dir / "scenarios.json"))
    _write_manifest(
        out_dir,
        "simulate",
        {"config": io.read_json(config_path), "seed": seed, "replicates": cfg_replicates},
        seed if seed is not None else [c.seed for c in scenarios],
        [str(config_path)],
        outputs,
        started,
    )
    click.echo(f"wrote {len(tasks)} replicate set(s) under {out_dir}")


@main.command("residuals")
@click.option("--panel", "panel_path", required=True, type=click.Path(path_type=Path))
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path))
@click.option("--no-intercept", is_flag=True, default=False)
@_handle_errors
def cmd_residuals(panel_path: Path, out_dir: Path, no_intercept: bool):
    """Fit the covariate-only model and write the per-unit residual surface."""
    started = time.monotonic()
    panel = io.read_panel_csv(panel_path)
    fit = fit_poisson_glm(panel, add_intercept=not no_intercept)
    resid = raw_residuals(panel, fit)
    surface = temporal_average(resid)
    out_dir.mkdir(parents=True, exist_ok=True)
    io.write_surface_csv(out_dir / "residual_surface.csv", surface)
    io.write_json(
        out_dir / "glm.json",
        {
            "beta": [float(b) for b in fit.beta],
            "converged": fit.converged,
            "iterations": fit.iterations,
            "deviance": fit.deviance,
            "with_intercept": fit.with_intercept,
        },
    )
    _write_manifest(
        out_dir,
        "residuals",
        {"panel": str(panel_path), "no_intercept": no_intercept},
        None,
        [str(panel_path)],
        [str(out_dir / "residual_surface.csv"), str(out_dir / "glm.json")],
        started,
    )
    click.echo(f"wrote residual surface for {panel.n_units} units to {out_dir}")


@main.command("estimate-w")
@click.option("--graph", "graph_path", required=True, type=click.Path(path_type=Path))
@click.option("--surface", "surface_path", required=True, type=click.Path(path_type=Path))
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path))
@click.option("--degree-cap", type=int, default=25, show_default=True)
@click.option("--max-passes", type=int, default=1000, show_default=True)
@click.option("--single-edge-fallback", is_flag=True, default=False,
              help="Score only single-edge deletions at vertices over the degree cap.")
@click.option("--dense-adjacency", is_flag=True, default=False,
              help="Also emit the kept graph as a dense 0/1 matrix.")
@click.option("--centroids", "centroids_path", type=click.Path(path_type=Path),
              default=None,
              help="Unit centroid CSV; emits midpoints of deleted edges for mapping.")
@_handle_errors
def cmd_estimate_w(graph_path: Path, surface_path: Path, out_dir: Path,
                   degree_cap: int, max_passes: int, single_edge_fallback: bool,
                   dense_adjacency: bool, centroids_path):
    """Estimate the neighbourhood graph from a residual surface."""
    started = time.monotonic()
    surface = io.read_surface_csv(surface_path)
    g = io.read_graph_file(graph_path)
    if g.vertex_count != len(surface):
        raise ValidationError(
            f"graph has {g.vertex_count} vertices but surface has {len(surface)} units"
        )
    cfg = SearchConfig(
        max_passes=max_passes,
        degree_cap=degree_cap,
        single_edge_fallback=single_edge_fallback,
    )
    result, trace = local_search(g, surface, cfg)

    out_dir.mkdir(parents=True, exist_ok=True)
    io.write_edge_csv(out_dir / "kept_edges.csv", result.as_graph())
    with open(out_dir / "deleted_edges.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["u", "v"])
        for u, v in sorted(result.deleted_edges):
            writer.writerow([u, v])
    if dense_adjacency:
        io.write_dense_adjacency_csv(out_dir / "kept_adjacency.csv", result.as_graph())
    if centroids_path is not None:
        centroids = io.read_centroids_csv(centroids_path)
        if len(centroids) != g.vertex_count:
            raise ValidationError(
                f"centroid file has {len(centroids)} units but graph has {g.vertex_count}"
            )
        with open(out_dir / "deleted_edge_midpoints.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["u", "v", "x", "y"])
            for u, v in sorted(result.deleted_edges):
                mid = 0.5 * (centroids[u] + centroids[v])
                writer.writerow([u, v, repr(float(mid[0])), repr(float(mid[1]))])
    n_deleted = len(result.deleted_edges)
    reduction = 100.0 * n_deleted / g.edge_count if g.edge_count else 0.0
    io.write_json(
        out_dir / "trace.json",
        {
            "initial_objective": trace.initial_objective,
            "pass_objectives": list(trace.pass_objectives),
            "deleted_edges": [list(e) for e in trace.deleted_edges],
            "passes": trace.passes,
            "terminated_by": trace.terminated_by,
            "edges_before": g.edge_count,
            "edges_after": result.edge_count,
            "reduction_pct": reduction,
        },
    )
    outputs = [str(out_dir / "kept_edges.csv"), str(out_dir / "deleted_edges.csv"),
               str(out_dir / "trace.json")]
    if dense_adjacency:
        outputs.append(str(out_dir / "kept_adjacency.csv"))
    if centroids_path is not None:
        outputs.append(str(out_dir / "deleted_edge_midpoints.csv"))
    _write_manifest(
        out_dir,
        "estimate-w",
        {"graph": str(graph_path), "surface": str(surface_path),
         "degree_cap": degree_cap, "max_passes": max_passes,
         "single_edge_fallback": single_edge_fallback},
        None,
        [str(graph_path), str(surface_path)],
        outputs,
        started,
    )
    click.echo(
        f"deleted {n_deleted} of {g.edge_count} edges ({reduction:.1f}% reduction)"
    )


def _load_replicate(rep_dir: Path) -> SimulatedPanel:
    panel = io.read_panel_csv(rep_dir / "panel.csv")
    truth = io.read_truth_csv(rep_dir / "truth.csv")
    if truth["latent_surfaces"].shape != panel.counts.shape:
        raise ValidationError(f"panel and truth in {rep_dir} have mismatched shapes")
    return SimulatedPanel(
        panel=panel,
        latent_surfaces=truth["latent_surfaces"],
        trend=truth["trend"],
        risk=truth["risk"],
        region_label=truth["region_label"],
        centroids=np.zeros((panel.n_units, 2)),  # not needed for evaluation
        cov_range_param=float("nan"),
        surface_range_param=float("nan"),
    )


def _resolve_graph(path_text: str, rep_dir: Path, vertex_count: int) -> Graph:
    path = Path(path_text)
    if not path.is_absolute() and not path.exists() and (rep_dir / path).exists():
        path = rep_dir / path
    return io.read_graph_file(path, vertex_count=vertex_count)


def _evaluate_one(task) -> tuple[str, dict]:
    rep_dir_text, border_text, estimated_text, obs_sd = task
    rep_dir = Path(rep_dir_text)
    grid = SmootherGrid(obs_sd=obs_sd)
    sim = _load_replicate(rep_dir)
    k = sim.panel.n_units
    border = _resolve_graph(border_text, rep_dir, k)
    est_graph = _resolve_graph(estimated_text, rep_dir, k)
    extra = est_graph.edges - border.edges
    if extra:
        raise ValidationError(
            f"estimated graph has edges missing from the border graph: {sorted(extra)[:5]}"
        )
    estimated = FeasibleSubgraph(border, est_graph.edges)
    report = evaluate_replicate(sim, border, estimated, grid)
    return rep_dir.name, dataclasses.asdict(report)


_REPORT_FIELDS = [f.name for f in dataclasses.fields(EvalReport)]


@main.command("evaluate")
@click.option("--truth", "truth_dir", required=True, type=click.Path(path_type=Path),
              help="A replicate directory, or a directory of rep*/ subdirectories.")
@click.option("--border-graph", required=True, type=str)
@click.option("--estimated-graph", required=True, type=str,
              help="Path, or path relative to each replicate directory.")
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path))
@click.option("--obs-sd", type=float, default=None,
              help="Fix the smoother's observation noise sd instead of estimating it.")
@click.option("--jobs", type=int, default=1, show_default=True,
              help="Replicates evaluated in parallel (batch mode).")
@_handle_errors
def cmd_evaluate(truth_dir: Path, border_graph: str, estimated_graph: str,
                 out_dir: Path, obs_sd, jobs: int):
    """Score risk recovery under two neighbourhood graphs against the truth."""
    started = time.monotonic()
    rep_dirs = sorted(p for p in truth_dir.glob("rep*") if p.is_dir())
    single = not rep_dirs
    if single:
        if not (truth_dir / "truth.csv").exists():
            raise ValidationError(f"no replicates and no truth.csv under {truth_dir}")
        rep_dirs = [truth_dir]

    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = []
    if single:
        rep_dir = rep_dirs[0]
        grid = SmootherGrid(obs_sd=obs_sd)
        sim = _load_replicate(rep_dir)
        k = sim.panel.n_units
        border = _resolve_graph(border_graph, rep_dir, k)
        est_graph = _resolve_graph(estimated_graph, rep_dir, k)
        extra = est_graph.edges - border.edges
        if extra:
            raise ValidationError(
                f"estimated graph has edges missing from the border graph: {sorted(extra)[:5]}"
            )
        estimated = FeasibleSubgraph(border, est_graph.edges)
        report, sm_border, sm_est = evaluate_replicate_surfaces(
            sim, border, estimated, grid
        )
        io.write_smoothed_csv(
            out_dir / "smoothed.csv", sm_border.surfaces, sm_est.surfaces
        )
        io.write_json(out_dir / "report.json", dataclasses.asdict(report))
        outputs += [str(out_dir / "smoothed.csv"), str(out_dir / "report.json")]
        reports = [(rep_dir.name, dataclasses.asdict(report))]
    else:
        tasks = [(str(d), border_graph, estimated_graph, obs_sd) for d in rep_dirs]
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                reports = list(pool.map(_evaluate_one, tasks))
        else:
            reports = [_evaluate_one(task) for task in tasks]
        for name, report in reports:
            io.write_json(out_dir / f"{name}_report.json", report)
            outputs.append(str(out_dir / f"{name}_report.json"))
        with open(out_dir / "reports.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["replicate"] + _REPORT_FIELDS)
            for name, report in reports:
                writer.writerow(
                    [name]
                    + [repr(report[f]) if isinstance(report[f], float) else report[f]
                       for f in _REPORT_FIELDS]
                )
        means = {
            f: float(np.mean([report[f] for _, report in reports]))
            for f in _REPORT_FIELDS
        }
        with open(out_dir / "aggregate.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["n_replicates"] + _REPORT_FIELDS)
            writer.writerow([len(reports)] + [repr(means[f]) for f in _REPORT_FIELDS])
        outputs += [str(out_dir / "reports.csv"), str(out_dir / "aggregate.csv")]

    _write_manifest(
        out_dir,
        "evaluate",
        {"truth": str(truth_dir), "border_graph": border_graph,
         "estimated_graph": estimated_graph, "obs_sd": obs_sd},
        None,
        [str(truth_dir), border_graph, estimated_graph],
        outputs,
        started,
    )
    mean_reduction = float(np.mean([report["reduction_pct"] for _, report in reports]))
    click.echo(f"evaluated {len(reports)} replicate(s); mean RMSE reduction {mean_reduction:.2f}%")


def _random_feasible_connected(rng: np.random.Generator, edge_cap: int) -> Graph:
    # Random spanning subgraph of a small lattice: planar by construction.
    shapes = [(r, c) for r in (1, 2, 3) for c in (2, 3, 4)
              if 2 * r * c - r - c <= edge_cap and r * c >= 3]
    rows, cols = shapes[rng.integers(len(shapes))]
    g = lattice_graph(rows, cols)
    sub = FeasibleSubgraph.full(g)
    edges = sorted(g.edges)
    for idx in rng.permutation(len(edges)):
        if rng.random() < 0.3:
            e = edges[int(idx)]
            if e not in sub.kept_edges:
                continue
            try:
                cand = sub.remove_edges([e])
            except ValidationError:
                continue
            if len(connected_components(cand)) == 1:
                sub = cand
    return sub.as_graph()


@main.command("oracle-check")
@click.option("--trials", type=int, default=100, show_default=True)
@click.option("--edge-cap", type=int, default=12, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path))
@_handle_errors
def cmd_oracle_check(trials: int, edge_cap: int, seed: int, out_dir: Path):
    """Compare local search against exact brute force on random small instances."""
    started = time.monotonic()
    if edge_cap > 20:
        raise ValidationError("edge_cap must be <= 20")
    rng = np.random.default_rng(seed)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for trial in range(trials):
        g = _random_feasible_connected(rng, edge_cap)
        phi = rng.standard_normal(g.vertex_count)
        result, _ = local_search(g, phi)
        local_val = objective(result, phi).value
        _, oracle_val = brute_force_optimum(g, phi, edge_cap=edge_cap)
        rows.append((trial, g.vertex_count, g.edge_count, local_val,
                     oracle_val.value, oracle_val.value - local_val))
    with open(out_dir / "oracle_report.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["trial", "vertices", "edges", "local_objective",
                         "oracle_objective", "gap"])
        for row in rows:
            writer.writerow([row[0], row[1], row[2], repr(row[3]), repr(row[4]), repr(row[5])])
    gaps = [r[5] for r in rows]
    _write_manifest(
        out_dir,
        "oracle-check",
        {"trials": trials, "edge_cap": edge_cap, "seed": seed},
        seed,
        [],
        [str(out_dir / "oracle_report.csv")],
        started,
    )
    click.echo(
        f"{trials} trials: max gap {max(gaps):.3e}, "
        f"exact matches {sum(1 for x in gaps if x == 0.0)}/{trials}"
    )


if __name__ == "__main__":
    main()
