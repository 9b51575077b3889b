"""Delimited report tables, run-manifest headers and figure rendering.

Every file the command-line tool writes starts with a comment block that
replays the invocation (tool version, subcommand, arguments, seeds). The
block carries no timestamps or host details so reruns stay byte-identical.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

from . import __version__
from .classifier import ModelEnsemble, predict
from .graph import FEATURE_NAMES
from .objectives import Objective

# feature column holding the triangle rate the threshold selector tests
_TR_RATE_INDEX = FEATURE_NAMES.index("avg_triangles_rate")


@dataclass(frozen=True)
class RunManifest:
    subcommand: str
    args: tuple[tuple[str, str], ...]

    @classmethod
    def build(cls, subcommand: str, pairs: Sequence[tuple[str, object]]) -> "RunManifest":
        return cls(subcommand, tuple((str(k), str(v)) for k, v in pairs))

    def header_lines(self) -> list[str]:
        lines = [f"run nectarml {__version__} {self.subcommand}"]
        lines.extend(f"arg {k}={v}" for k, v in self.args)
        return lines


def format_cell(value) -> str:
    if isinstance(value, bool):
        return str(value)
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def write_table(path_or_file, columns: Sequence[str], rows, fmt: str = "csv",
                header_lines: Sequence[str] = ()) -> None:
    """Delimited table with '#' comment header; floats printed to 6 decimals.

    Accepts a path or an open text stream (so reports can go to stdout).
    """
    if fmt not in ("csv", "tsv"):
        raise ValueError(f"unknown table format {fmt!r}")
    delim = "," if fmt == "csv" else "\t"

    def emit(fh):
        for line in header_lines:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh, delimiter=delim, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_cell(v) for v in row])

    if hasattr(path_or_file, "write"):
        emit(path_or_file)
    else:
        with open(path_or_file, "w", encoding="utf-8", newline="") as fh:
            emit(fh)


# ---------------------------------------------------------------------------
# selector comparison
# ---------------------------------------------------------------------------

# generation tags that index a comparison cell; rows missing any of them are
# pooled into one catch-all cell
CELL_TAGS = ("k", "On", "Om", "mut")


@dataclass
class ComparisonCell:
    key: tuple[float, float, float, float] | None
    n_networks: int
    ml_only: int
    nectar_only: int
    value: float


def threshold_pick(features, tr_rate: float) -> Objective:
    rate = float(features[_TR_RATE_INDEX])
    return Objective.WOCC if rate >= tr_rate else Objective.QE


def compare_selectors(rows, model: ModelEnsemble, tr_rate: float = 5.0) -> list[ComparisonCell]:
    """Weight-summed advantage of the learned selector over the fixed rule.

    Per row: +weight when only the model picks the labeled objective,
    -weight when only the triangle-rate rule does, 0 when they agree with
    each other. Cell value is the signed sum divided by the cell's row
    count, so it always lands in [-1, 1].
    """
    groups: dict[tuple | None, list] = {}
    for row in rows:
        if all(t in row.lfr for t in CELL_TAGS):
            key = tuple(float(row.lfr[t]) for t in CELL_TAGS)
        else:
            key = None
        groups.setdefault(key, []).append(row)

    cells = []
    for key in sorted((k for k in groups if k is not None)) + ([None] if None in groups else []):
        signed = 0.0
        ml_only = 0
        nectar_only = 0
        members = groups[key]
        for row in members:
            truth = row.label
            ml, _ = predict(model, row.features)
            fixed = threshold_pick(row.features, tr_rate)
            if ml is truth and fixed is not truth:
                signed += row.weight
                ml_only += 1
            elif fixed is truth and ml is not truth:
                signed -= row.weight
                nectar_only += 1
        cells.append(ComparisonCell(
            key=key,
            n_networks=len(members),
            ml_only=ml_only,
            nectar_only=nectar_only,
            value=signed / len(members),
        ))
    return cells


def comparison_table(cells: Sequence[ComparisonCell]) -> tuple[tuple[str, ...], list[list]]:
    """Column names and rows for write_table; catch-all tags print as '*'."""
    columns = (*CELL_TAGS, "networks", "ml_only", "nectar_only", "value")
    rows = []
    for cell in cells:
        tags = ["*"] * len(CELL_TAGS) if cell.key is None else [format_cell(v) for v in cell.key]
        rows.append([*tags, cell.n_networks, cell.ml_only, cell.nectar_only, cell.value])
    return columns, rows


# ---------------------------------------------------------------------------
# figures
# ---------------------------------------------------------------------------

def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def render_compare_heatmap(path, cells: Sequence[ComparisonCell]) -> None:
    """Cells pivoted to (k, On) rows by (Om, mut) columns, catch-all as '*'."""
    plt = _pyplot()
    import numpy as np

    def row_key(c):
        return ("*", "*") if c.key is None else (c.key[0], c.key[1])

    def col_key(c):
        return ("*", "*") if c.key is None else (c.key[2], c.key[3])

    row_keys = sorted({row_key(c) for c in cells}, key=str)
    col_keys = sorted({col_key(c) for c in cells}, key=str)
    grid = np.full((len(row_keys), len(col_keys)), np.nan)
    for c in cells:
        grid[row_keys.index(row_key(c)), col_keys.index(col_key(c))] = c.value

    fig, ax = plt.subplots(figsize=(max(4, 0.9 * len(col_keys) + 2), max(3, 0.5 * len(row_keys) + 2)))
    im = ax.imshow(np.ma.masked_invalid(grid), cmap="coolwarm", vmin=-1.0, vmax=1.0, aspect="auto")
    ax.set_xticks(range(len(col_keys)), [f"Om={a} mut={b}" for a, b in col_keys], rotation=45, ha="right")
    ax.set_yticks(range(len(row_keys)), [f"k={a} On={b}" for a, b in row_keys])
    ax.set_title("learned selector minus fixed rule (weighted)")
    fig.colorbar(im, ax=ax, label="mean signed weight")
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)


def render_ig_bars(path, gains: dict[str, float]) -> None:
    plt = _pyplot()
    names = [n for n in FEATURE_NAMES if n in gains]
    values = [gains[n] for n in names]
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.bar(range(len(names)), values, color="#33658a")
    ax.set_xticks(range(len(names)), names, rotation=20, ha="right")
    ax.set_ylabel("information gain (bits)")
    ax.set_title("feature relevance to objective choice")
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
