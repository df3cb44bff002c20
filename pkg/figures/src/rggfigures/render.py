"""Render figures from experiment CSVs; no statistics are recomputed here.

Four figure kinds, one per experiment family:

  power_curve   sweep_power.csv          power and FPR vs dimension
  spectrum_hist eigenvalues.csv          eigenvalue histogram + np/sqrt(d), np/d lines
  scaling       signed-weight sweep CSV  log-log mean vs d + reference slope
  tv_decay      TV-bound sweep CSV       bound vs dimension

Scaling plots draw the dashed guide slope -(k-2)/2 for finite norms and
-(k-2) for the max norm.  Output is byte-stable for fixed input: the SVG
hash salt is pinned and no timestamps are embedded.
"""

from __future__ import annotations

import csv
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "rggfigures"

import matplotlib.pyplot as plt
import numpy as np

FIGURE_KINDS = ("power_curve", "spectrum_hist", "scaling", "tv_decay")

REQUIRED_COLUMNS = {
    "power_curve": {"d", "power", "fpr"},
    "spectrum_hist": {"eigenvalue", "n", "d", "p", "norm"},
    "scaling": {"norm", "k", "d", "mean"},
    "tv_decay": {"d", "bound"},
}


class MissingColumnsError(ValueError):
    def __init__(self, missing):
        self.missing = sorted(missing)
        super().__init__(f"missing columns: {', '.join(self.missing)}")


@dataclass(frozen=True)
class FigureJob:
    input_csv: str
    figure_kind: str
    output_path: str

    def __post_init__(self):
        if self.figure_kind not in FIGURE_KINDS:
            raise ValueError(f"unknown figure kind {self.figure_kind!r}")


def read_rows(path: str, kind: str) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = set(reader.fieldnames or ())
        missing = REQUIRED_COLUMNS[kind] - header
        if missing:
            raise MissingColumnsError(missing)
        return list(reader)


def _save(fig, path: str) -> None:
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, metadata={"Date": None} if out.suffix == ".svg" else None)
    plt.close(fig)


def _power_curve(rows, path):
    d = np.array([float(r["d"]) for r in rows])
    power = np.array([float(r["power"]) for r in rows])
    fpr = np.array([float(r["fpr"]) for r in rows])
    order = np.argsort(d)
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    ax.plot(d[order], power[order], "o-", label="power")
    ax.plot(d[order], fpr[order], "s--", label="false positive rate")
    ax.set_xscale("log")
    ax.set_xlabel("dimension d")
    ax.set_ylabel("rate")
    ax.set_ylim(-0.03, 1.03)
    ax.legend(frameon=False)
    ax.set_title("signed-triangle test power")
    fig.tight_layout()
    _save(fig, path)


def _spectrum_hist(rows, path):
    lam = np.array([float(r["eigenvalue"]) for r in rows])
    n = float(rows[0]["n"])
    d = float(rows[0]["d"])
    p = float(rows[0]["p"])
    norm = rows[0]["norm"]
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    ax.hist(lam, bins=80, color="steelblue")
    ax.axvline(n * p / math.sqrt(d), color="crimson", ls="--",
               label="np/sqrt(d)")
    ax.axvline(n * p / d, color="darkorange", ls=":", label="np/d")
    ax.set_yscale("log")
    ax.set_xlabel("eigenvalue")
    ax.set_ylabel("count")
    ax.legend(frameon=False)
    ax.set_title(f"centered spectrum (n={n:.0f}, d={d:.0f}, p={p}, norm={norm})")
    fig.tight_layout()
    _save(fig, path)


def fit_loglog_slope(d, mean) -> float:
    mask = (np.asarray(mean) > 0) & (np.asarray(d) > 0)
    x = np.log(np.asarray(d, dtype=float)[mask])
    y = np.log(np.asarray(mean, dtype=float)[mask])
    return float(np.polyfit(x, y, 1)[0])


def _scaling(rows, path):
    d = np.array([float(r["d"]) for r in rows])
    mean = np.array([float(r["mean"]) for r in rows])
    k = int(float(rows[0]["k"]))
    norm = rows[0]["norm"]
    ref_slope = -(k - 2.0) if norm == "inf" else -(k - 2.0) / 2.0
    order = np.argsort(d)
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    ax.plot(d[order], mean[order], "o-", label=f"mean signed weight (k={k})")
    anchor = mean[order][0] * 1.3
    guide = anchor * (d[order] / d[order][0]) ** ref_slope
    ax.plot(d[order], guide, "k--", lw=1,
            label=f"reference slope {ref_slope:g}")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("dimension d")
    ax.set_ylabel("mean")
    fitted = fit_loglog_slope(d, mean)
    ax.set_title(f"signed-weight scaling (fitted slope {fitted:.3f})")
    ax.legend(frameon=False)
    fig.tight_layout()
    _save(fig, path)


def _tv_decay(rows, path):
    d = np.array([float(r["d"]) for r in rows])
    bound = np.array([float(r["bound"]) for r in rows])
    order = np.argsort(d)
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    ax.plot(d[order], bound[order], "o-")
    ax.set_xscale("log")
    if np.all(bound > 0):
        ax.set_yscale("log")
    ax.set_xlabel("dimension d")
    ax.set_ylabel("TV upper bound")
    ax.set_title("total-variation bound decay")
    fig.tight_layout()
    _save(fig, path)


_RENDERERS = {
    "power_curve": _power_curve,
    "spectrum_hist": _spectrum_hist,
    "scaling": _scaling,
    "tv_decay": _tv_decay,
}


def render(job: FigureJob) -> None:
    rows = read_rows(job.input_csv, job.figure_kind)
    if not rows:
        raise ValueError(f"no data rows in {job.input_csv}")
    _RENDERERS[job.figure_kind](rows, job.output_path)


def main(argv=None) -> int:
    args = sys.argv[1:] if argv is None else argv
    if len(args) != 3:
        print("usage: rgg-figures <kind> <input.csv> <output.{svg,png}>",
              file=sys.stderr)
        return 2
    kind, inp, outp = args
    try:
        render(FigureJob(input_csv=inp, figure_kind=kind, output_path=outp))
    except MissingColumnsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
