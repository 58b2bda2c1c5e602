"""CSV and JSON file formats.

All tabular data is CSV with headers; floats are written with repr (the
shortest round-tripping form) so outputs are byte-stable across runs.
Graphs travel as edge lists (header ``u,v``, one undirected edge per row
in canonical u < v order); dense 0/1 adjacency matrices are accepted on
input and written only on request. Panels are long-format rows
``unit,time,y,expected,x1..xp``; residual surfaces are ``unit,phi_tilde``.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .errors import CsvFormatError, ValidationError
from .graph import Graph
from .residuals import CountPanel

__all__ = [
    "read_edge_csv",
    "write_edge_csv",
    "read_dense_adjacency_csv",
    "write_dense_adjacency_csv",
    "read_graph_file",
    "read_surface_csv",
    "write_surface_csv",
    "read_panel_csv",
    "write_panel_csv",
    "read_truth_csv",
    "write_truth_csv",
    "read_centroids_csv",
    "write_centroids_csv",
    "write_smoothed_csv",
    "write_json",
    "read_json",
]


def _fmt(x: float) -> str:
    return repr(float(x))


def _open_rows(path: str | Path):
    with open(path, newline="") as fh:
        yield from enumerate(csv.reader(fh), start=1)


def _parse_int(text: str, line: int, what: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise CsvFormatError(f"expected integer {what}, got {text!r}", line) from None


def _parse_float(text: str, line: int, what: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise CsvFormatError(f"expected number for {what}, got {text!r}", line) from None


def write_edge_csv(path: str | Path, g: Graph) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["u", "v"])
        for u, v in g.sorted_edges():
            writer.writerow([u, v])


def read_edge_csv(path: str | Path, vertex_count: int | None = None) -> Graph:
    """Read an edge-list CSV; vertex count defaults to max index + 1."""
    edges = []
    max_v = -1
    for line, row in _open_rows(path):
        if line == 1:
            if [c.strip() for c in row] != ["u", "v"]:
                raise CsvFormatError(f"expected header 'u,v', got {row!r}", line)
            continue
        if not row:
            continue
        if len(row) != 2:
            raise CsvFormatError(f"expected 2 columns, got {len(row)}", line)
        u = _parse_int(row[0], line, "vertex")
        v = _parse_int(row[1], line, "vertex")
        if u < 0 or v < 0:
            raise CsvFormatError("vertex indices must be nonnegative", line)
        edges.append((u, v))
        max_v = max(max_v, u, v)
    k = vertex_count if vertex_count is not None else max_v + 1
    if k < 1:
        raise ValidationError(f"edge file {path} contains no edges and no vertex count given")
    return Graph(k, edges)


def write_dense_adjacency_csv(path: str | Path, g: Graph) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for v in range(g.vertex_count):
            row = [0] * g.vertex_count
            for w in g.neighbours(v):
                row[w] = 1
            writer.writerow(row)


def read_dense_adjacency_csv(path: str | Path) -> Graph:
    rows = []
    for line, row in _open_rows(path):
        if not row:
            continue
        rows.append([_parse_int(c, line, "adjacency entry") for c in row])
    k = len(rows)
    if k == 0:
        raise ValidationError(f"adjacency file {path} is empty")
    edges = []
    for i, row in enumerate(rows):
        if len(row) != k:
            raise CsvFormatError(f"row has {len(row)} columns, expected {k}", i + 1)
        for j, val in enumerate(row):
            if val not in (0, 1):
                raise CsvFormatError(f"adjacency entries must be 0/1, got {val}", i + 1)
            if val == 1 and i < j:
                edges.append((i, j))
            if val == 1 and i == j:
                raise CsvFormatError("nonzero diagonal entry", i + 1)
    g = Graph(k, edges)
    for i, row in enumerate(rows):
        for j, val in enumerate(row):
            if val == 1 and not g.has_edge(i, j):
                raise CsvFormatError("adjacency matrix is not symmetric", i + 1)
        if sum(row) != g.degree(i):
            raise CsvFormatError("adjacency matrix is not symmetric", i + 1)
    return g


def read_graph_file(path: str | Path, vertex_count: int | None = None) -> Graph:
    """Read either format: sniffs an edge-list header, else dense adjacency."""
    with open(path, newline="") as fh:
        first = fh.readline()
    if [c.strip() for c in first.strip().split(",")] == ["u", "v"]:
        return read_edge_csv(path, vertex_count)
    return read_dense_adjacency_csv(path)


def write_surface_csv(path: str | Path, values: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["unit", "phi_tilde"])
        for unit, val in enumerate(values):
            writer.writerow([unit, _fmt(val)])


def read_surface_csv(path: str | Path) -> np.ndarray:
    vals: dict[int, float] = {}
    for line, row in _open_rows(path):
        if line == 1:
            if [c.strip() for c in row] != ["unit", "phi_tilde"]:
                raise CsvFormatError(f"expected header 'unit,phi_tilde', got {row!r}", line)
            continue
        if not row:
            continue
        if len(row) != 2:
            raise CsvFormatError(f"expected 2 columns, got {len(row)}", line)
        unit = _parse_int(row[0], line, "unit")
        if unit in vals:
            raise CsvFormatError(f"duplicate unit {unit}", line)
        vals[unit] = _parse_float(row[1], line, "phi_tilde")
    if not vals:
        raise ValidationError(f"surface file {path} has no rows")
    k = max(vals) + 1
    if sorted(vals) != list(range(k)):
        raise ValidationError(f"surface file {path} is missing unit indices")
    return np.array([vals[i] for i in range(k)])


def _panel_header(p: int) -> list[str]:
    return ["unit", "time", "y", "expected"] + [f"x{i + 1}" for i in range(p)]


def write_panel_csv(path: str | Path, panel: CountPanel) -> None:
    k, n, p = panel.n_units, panel.n_periods, panel.n_covariates
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_panel_header(p))
        for unit in range(k):
            for t in range(n):
                row = [unit, t, int(panel.counts[unit, t]), _fmt(panel.expected[unit, t])]
                row += [_fmt(panel.covariates[unit, t, j]) for j in range(p)]
                writer.writerow(row)


def read_panel_csv(path: str | Path) -> CountPanel:
    header: list[str] | None = None
    rows: dict[tuple[int, int], tuple[int, float, list[float]]] = {}
    p = 0
    for line, row in _open_rows(path):
        if line == 1:
            header = [c.strip() for c in row]
            if header[:4] != ["unit", "time", "y", "expected"]:
                raise CsvFormatError(
                    f"expected header 'unit,time,y,expected,x1..', got {row!r}", line
                )
            p = len(header) - 4
            if header[4:] != [f"x{i + 1}" for i in range(p)]:
                raise CsvFormatError(f"covariate columns must be x1..x{p}", line)
            continue
        if not row:
            continue
        if len(row) != 4 + p:
            raise CsvFormatError(f"expected {4 + p} columns, got {len(row)}", line)
        unit = _parse_int(row[0], line, "unit")
        t = _parse_int(row[1], line, "time")
        y = _parse_int(row[2], line, "count")
        e = _parse_float(row[3], line, "expected")
        xs = [_parse_float(row[4 + j], line, f"x{j + 1}") for j in range(p)]
        if (unit, t) in rows:
            raise CsvFormatError(f"duplicate (unit, time) = ({unit}, {t})", line)
        rows[(unit, t)] = (y, e, xs)
    if header is None or not rows:
        raise ValidationError(f"panel file {path} has no data rows")
    k = max(u for u, _ in rows) + 1
    n = max(t for _, t in rows) + 1
    if len(rows) != k * n:
        raise ValidationError(f"panel file {path} is not a complete unit x time grid")
    counts = np.zeros((k, n), dtype=np.int64)
    expected = np.zeros((k, n))
    covariates = np.zeros((k, n, p))
    for (unit, t), (y, e, xs) in rows.items():
        counts[unit, t] = y
        expected[unit, t] = e
        covariates[unit, t, :] = xs
    return CountPanel(counts=counts, expected=expected, covariates=covariates)


def write_centroids_csv(path: str | Path, centroids: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["unit", "x", "y"])
        for unit, (x, y) in enumerate(centroids):
            writer.writerow([unit, _fmt(x), _fmt(y)])


def read_centroids_csv(path: str | Path) -> np.ndarray:
    rows: dict[int, tuple[float, float]] = {}
    for line, row in _open_rows(path):
        if line == 1:
            if [c.strip() for c in row] != ["unit", "x", "y"]:
                raise CsvFormatError(f"expected header 'unit,x,y', got {row!r}", line)
            continue
        if not row:
            continue
        if len(row) != 3:
            raise CsvFormatError(f"expected 3 columns, got {len(row)}", line)
        unit = _parse_int(row[0], line, "unit")
        rows[unit] = (
            _parse_float(row[1], line, "x"),
            _parse_float(row[2], line, "y"),
        )
    if not rows:
        raise ValidationError(f"centroid file {path} has no rows")
    k = max(rows) + 1
    if sorted(rows) != list(range(k)):
        raise ValidationError(f"centroid file {path} is missing unit indices")
    return np.array([rows[i] for i in range(k)])


def write_smoothed_csv(path: str | Path, border: np.ndarray, estimated: np.ndarray) -> None:
    """Per-unit, per-period smoothed surfaces under each neighbourhood graph."""
    k, n = border.shape
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["unit", "time", "phi_hat_border", "phi_hat_estimated"])
        for unit in range(k):
            for t in range(n):
                writer.writerow(
                    [unit, t, _fmt(border[unit, t]), _fmt(estimated[unit, t])]
                )


_TRUTH_HEADER = ["unit", "time", "phi", "delta", "theta", "region_label"]


def write_truth_csv(path: str | Path, sim) -> None:
    k, n = sim.latent_surfaces.shape
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_TRUTH_HEADER)
        for unit in range(k):
            for t in range(n):
                writer.writerow(
                    [
                        unit,
                        t,
                        _fmt(sim.latent_surfaces[unit, t]),
                        _fmt(sim.trend[t]),
                        _fmt(sim.risk[unit, t]),
                        int(sim.region_label[unit]),
                    ]
                )


def read_truth_csv(path: str | Path) -> dict[str, np.ndarray]:
    rows: dict[tuple[int, int], tuple[float, float, float, int]] = {}
    for line, row in _open_rows(path):
        if line == 1:
            if [c.strip() for c in row] != _TRUTH_HEADER:
                raise CsvFormatError(f"expected header {_TRUTH_HEADER}, got {row!r}", line)
            continue
        if not row:
            continue
        if len(row) != 6:
            raise CsvFormatError(f"expected 6 columns, got {len(row)}", line)
        unit = _parse_int(row[0], line, "unit")
        t = _parse_int(row[1], line, "time")
        rows[(unit, t)] = (
            _parse_float(row[2], line, "phi"),
            _parse_float(row[3], line, "delta"),
            _parse_float(row[4], line, "theta"),
            _parse_int(row[5], line, "region_label"),
        )
    if not rows:
        raise ValidationError(f"truth file {path} has no data rows")
    k = max(u for u, _ in rows) + 1
    n = max(t for _, t in rows) + 1
    if len(rows) != k * n:
        raise ValidationError(f"truth file {path} is not a complete unit x time grid")
    surfaces = np.zeros((k, n))
    trend = np.zeros(n)
    risk = np.zeros((k, n))
    labels = np.zeros(k, dtype=np.int64)
    for (unit, t), (phi, delta, theta, label) in rows.items():
        surfaces[unit, t] = phi
        trend[t] = delta
        risk[unit, t] = theta
        labels[unit] = label
    return {
        "latent_surfaces": surfaces,
        "trend": trend,
        "risk": risk,
        "region_label": labels,
    }


def write_json(path: str | Path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path: str | Path) -> dict:
    with open(path) as fh:
        return json.load(fh)
