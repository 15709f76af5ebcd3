"""CSV and JSON emission. Numbers carry 17 significant digits so files
round-trip doubles exactly; files are written to a temp name and renamed,
so readers never observe partial output."""

from __future__ import annotations

import json
import os
import tempfile

import numpy as np

__all__ = [
    "fmt17",
    "atomic_write_text",
    "write_csv",
    "read_csv_columns",
    "write_series_csv",
    "read_series_csv",
    "write_trajectory_csv",
    "write_incompressible_csv",
    "write_coefficients_csv",
    "write_sweep_csv",
    "write_json",
]

TRAJECTORY_HEADER = ["t", "I", "h01_norm", "div_norm", "mass", "energy_residual"]
SWEEP_HEADER = [
    "alpha",
    "err_vel_L2H1",
    "err_vel_LinfL2",
    "err_pres_LinfL2",
    "x_alpha",
    "x_limit",
    "probe_max",
]


def fmt17(x) -> str:
    return format(float(x), ".17g")


def atomic_write_text(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp_", suffix=".part")
    try:
        with os.fdopen(fd, "w", newline="\n") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: str, header, rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(cell if isinstance(cell, str) else fmt17(cell) for cell in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_csv_columns(path: str) -> dict:
    with open(path) as handle:
        header = handle.readline().strip().split(",")
        data = [line.strip().split(",") for line in handle if line.strip()]
    columns = {}
    for i, name in enumerate(header):
        cells = [row[i] for row in data]
        try:
            columns[name] = np.array([float(cell) for cell in cells])
        except ValueError:
            columns[name] = np.array(cells)
    return columns


def write_series_csv(path: str, times, values) -> None:
    write_csv(path, ["t", "value"], zip(times, values))


def read_series_csv(path: str):
    cols = read_csv_columns(path)
    if "t" not in cols or "value" not in cols:
        raise ValueError(f"{path}: expected columns t,value")
    return cols["t"], cols["value"]


def _node_residuals(per_step: np.ndarray, n_nodes: int) -> np.ndarray:
    out = np.zeros(n_nodes)
    out[1:] = per_step
    return out


def write_trajectory_csv(path: str, traj, per_step_residual) -> None:
    res = _node_residuals(np.asarray(per_step_residual), len(traj.times))
    rows = zip(traj.times, traj.energy, traj.h01, traj.div, traj.mass, res)
    write_csv(path, TRAJECTORY_HEADER, rows)


def write_incompressible_csv(path: str, traj) -> None:
    res = _node_residuals(np.asarray(traj.energy_residual), len(traj.times))
    header = [name for name in TRAJECTORY_HEADER if name != "mass"]
    rows = zip(traj.times, traj.energy, traj.h01, traj.div, res)
    write_csv(path, header, rows)


def write_coefficients_csv(path: str, traj) -> None:
    m_u = traj.c.shape[1]
    m_p = traj.q.shape[1]
    header = ["t"] + [f"c_{i}" for i in range(m_u)] + [f"q_{k}" for k in range(m_p)]
    rows = (
        [t] + list(c) + list(q) for t, c, q in zip(traj.times, traj.c, traj.q)
    )
    write_csv(path, header, rows)


def write_sweep_csv(path: str, result) -> None:
    rows = []
    for row in result.rows:
        rows.append(
            [
                row.alpha,
                row.err_vel_l2h1,
                row.err_vel_linf_l2,
                row.err_pres_linf_l2,
                row.x_alpha,
                result.x_limit,
                row.probe_max,
            ]
        )
    write_csv(path, SWEEP_HEADER, rows)


def write_json(path: str, payload) -> None:
    atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")
