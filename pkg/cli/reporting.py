"""
Reporting
JSON, CSV and SVG writers for command outputs
"""

import csv
import json
import logging
import os

import matplotlib

matplotlib.use('Agg')
import matplotlib.pyplot as plt  # noqa: E402

logger = logging.getLogger(__name__)

# fixed ids and no date keep the SVG byte-identical across runs
matplotlib.rcParams['svg.hashsalt'] = 'crackseg'


def ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return path


def write_json(data, path):
    with open(path, 'w') as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write('\n')
    logger.info(f"Wrote {path}")


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def _cell(value):
    if isinstance(value, float):
        return f"{value:.12g}"
    return value


def write_rows(path, header, rows):
    """
    Write dict rows as CSV in header order

    Args:
        path: Output path
        header: Column names
        rows: Iterable of dicts
    """
    with open(path, 'w', newline='') as fh:
        writer = csv.writer(fh, lineterminator='\n')
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(row[column]) for column in header])
    logger.info(f"Wrote {path}")


def plot_pr_curves(curves, path, title='Precision-recall'):
    """
    Line plot of one or more PR curves as SVG

    Args:
        curves: Dict label -> PrCurve
        path: Output .svg path
        title: Plot title
    """
    fig, ax = plt.subplots(figsize=(5, 5))
    for label, curve in curves.items():
        ax.plot(curve.recalls, curve.precisions, label=label, linewidth=1.5)

    ax.set_xlim(0.0, 1.0)
    ax.set_ylim(0.0, 1.02)
    ax.set_xlabel('Recall')
    ax.set_ylabel('Precision')
    ax.set_title(title)
    ax.grid(True, linewidth=0.5, alpha=0.5)
    ax.legend(loc='lower left')

    fig.savefig(path, format='svg', metadata={'Date': None})
    plt.close(fig)
    logger.info(f"Wrote {path}")
