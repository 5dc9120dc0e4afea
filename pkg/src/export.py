"""
Export Module
Writes per-pair CSV logs, agent poses and run metrics to an output directory
"""

import json
from pathlib import Path
from typing import Dict, List, Union
import logging

import pandas as pd

try:
    from .harness import PAIR_COLUMNS, RunLog, RunMetrics
except ImportError:
    from harness import PAIR_COLUMNS, RunLog, RunMetrics

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.12g"


def pair_frame(log: RunLog, pair: int) -> pd.DataFrame:
    """Step records of one pair as a DataFrame with the fixed column order"""
    frame = pd.DataFrame(log.rows.get(pair, []), columns=PAIR_COLUMNS)
    frame["visible"] = frame["visible"].astype(bool).astype(int)
    return frame


def poses_frame(log: RunLog) -> pd.DataFrame:
    """Agent poses at every logged step, columns t, x0, y0, theta0, x1, ..."""
    columns = ["t"] + [f"{c}{j}" for j in range(log.n_agents) for c in ("x", "y", "theta")]
    records = [
        [t] + poses.reshape(-1).tolist() for t, poses in zip(log.times, log.poses)
    ]
    return pd.DataFrame(records, columns=columns)


def export_csv(log: RunLog, metrics: RunMetrics, out_dir: Union[str, Path]) -> List[Path]:
    """
    Write pair_<i>.csv for every pair, agents.csv and metrics.json.

    Missing values (blind steps, nominal input while blind) are written as
    empty fields. Output is byte-stable for identical runs.

    Args:
        log: Completed or partial run log
        metrics: Matching run metrics
        out_dir: Target directory (created if needed)

    Returns:
        Paths of the written files

    Raises:
        OSError: if the directory or files cannot be written
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    for pair in range(1, log.n_pairs + 1):
        path = out_dir / f"pair_{pair}.csv"
        pair_frame(log, pair).to_csv(path, index=False, float_format=FLOAT_FORMAT, na_rep="")
        written.append(path)

    path = out_dir / "agents.csv"
    poses_frame(log).to_csv(path, index=False, float_format=FLOAT_FORMAT)
    written.append(path)

    path = out_dir / "metrics.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(metrics.to_dict(), fh, indent=2, sort_keys=True)
    written.append(path)

    logger.info(f"Wrote {len(written)} files to {out_dir}")
    return written


def compare_summary(metrics_on: RunMetrics, metrics_off: RunMetrics) -> pd.DataFrame:
    """Per-pair side-by-side of the filter-on and filter-off runs"""
    rows = []
    for on, off in zip(metrics_on.pairs, metrics_off.pairs):
        for name in ("violation_steps", "blind_steps", "infeasible_steps", "filter_active_steps"):
            rows.append({
                "pair": on.pair, "metric": name,
                "filter_on": getattr(on, name), "filter_off": getattr(off, name),
            })
        rows.append({
            "pair": on.pair, "metric": "min_h",
            "filter_on": on.min_h_overall, "filter_off": off.min_h_overall,
        })
        rows.append({
            "pair": on.pair, "metric": "first_violation_t",
            "filter_on": on.first_violation_t, "filter_off": off.first_violation_t,
        })
    return pd.DataFrame(rows, columns=["pair", "metric", "filter_on", "filter_off"])


def sweep_row(param: str, value, metrics: RunMetrics) -> Dict:
    """One summary.csv row of a parameter sweep"""
    return {
        "param": param,
        "value": value,
        "steps": metrics.steps,
        "degenerate": metrics.degenerate,
        "violations": metrics.total_violations,
        "infeasible": metrics.total_infeasible,
        "blind": sum(p.blind_steps for p in metrics.pairs),
        "filter_active": sum(p.filter_active_steps for p in metrics.pairs),
        "min_h": min((p.min_h_overall for p in metrics.pairs), default=float("nan")),
    }
