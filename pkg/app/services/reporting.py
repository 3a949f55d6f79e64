"""CSV, chart and trace emission for sweep results."""
from collections import defaultdict
from pathlib import Path
from typing import Dict, List, Sequence
import csv
import logging

import matplotlib
matplotlib.use("Agg")
# fixed ids keep svg output byte-stable
matplotlib.rcParams["svg.hashsalt"] = "gridstorm"
import matplotlib.pyplot as plt

from app.models.attack import CriticalNode, TraceEntry
from app.models.experiment import SweepParameter, SweepRow
from app.utils.exceptions import ConfigException

logger = logging.getLogger(__name__)

ROW_FIELDS = [
    "parameter", "value", "algorithm", "run", "seed",
    "total_node_failures", "microgrids_islanded", "node_failures_in_microgrids",
    "lines_failed", "budget_spent",
]
METRICS = ["total_node_failures", "microgrids_islanded", "node_failures_in_microgrids"]

AXIS_LABELS = {
    SweepParameter.CAPACITY: "line capacity reduction",
    SweepParameter.RESOURCE: "maximum resource (fraction)",
    SweepParameter.MGLOAD: "microgrid load (units)",
}


def _open(path: Path):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        return path.open("w", newline="", encoding="utf-8")
    except OSError as e:
        raise ConfigException(f"cannot write {path}: {e}")


def write_rows(rows: Sequence[SweepRow], path: Path) -> str:
    with _open(path) as f:
        writer = csv.DictWriter(f, ROW_FIELDS, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            data = row.model_dump()
            data["parameter"] = row.parameter.value
            data["algorithm"] = row.algorithm.value
            writer.writerow({k: data[k] for k in ROW_FIELDS})
    return str(path)


def summarize(rows: Sequence[SweepRow]) -> List[dict]:
    """Per (value, algorithm) means of every metric."""
    groups: Dict[tuple, List[SweepRow]] = defaultdict(list)
    for row in rows:
        groups[(row.value, row.algorithm.value)].append(row)

    summary = []
    for (value, algorithm), members in sorted(groups.items()):
        entry = {"value": value, "algorithm": algorithm, "runs": len(members)}
        for metric in METRICS + ["lines_failed", "budget_spent"]:
            entry[metric] = sum(getattr(m, metric) for m in members) / len(members)
        summary.append(entry)
    return summary


def write_summary(summary: Sequence[dict], path: Path) -> str:
    fields = ["value", "algorithm", "runs"] + METRICS + ["lines_failed", "budget_spent"]
    with _open(path) as f:
        writer = csv.DictWriter(f, fields, lineterminator="\n")
        writer.writeheader()
        writer.writerows(summary)
    return str(path)


def plot_summary(summary: Sequence[dict], param: SweepParameter, out_dir: Path) -> List[str]:
    files = []
    for metric in METRICS:
        fig, ax = plt.subplots(figsize=(6, 4))
        for algorithm in sorted({s["algorithm"] for s in summary}):
            points = [s for s in summary if s["algorithm"] == algorithm]
            ax.plot([p["value"] for p in points], [p[metric] for p in points], marker="o", label=algorithm)
        ax.set_xlabel(AXIS_LABELS[param])
        ax.set_ylabel(metric.replace("_", " "))
        ax.grid(True, alpha=0.3)
        ax.legend()
        path = out_dir / f"{param.value}_{metric}.svg"
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            fig.savefig(path, format="svg", metadata={"Date": None})
        except OSError as e:
            raise ConfigException(f"cannot write {path}: {e}")
        finally:
            plt.close(fig)
        files.append(str(path))
    return files


def write_critical_nodes(nodes: Sequence[CriticalNode], path: Path) -> str:
    with _open(path) as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["bus", "role", "contribution"])
        for node in nodes:
            writer.writerow([node.bus, node.role.value, node.contribution])
    return str(path)


def write_trace(trace: Sequence[TraceEntry], path: Path) -> str:
    with _open(path) as f:
        for entry in trace:
            f.write(entry.render() + "\n")
    return str(path)
