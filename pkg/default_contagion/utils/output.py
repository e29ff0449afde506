"""
CSV and JSON writers for run outputs

All floats are written with 17 significant digits, so re-running a command with the same
inputs reproduces the files byte for byte.
"""
import json
import os
from pathlib import Path

import numpy as np
import pandas as pd

from default_contagion.config import OUTPUT_SETTINGS
from default_contagion.utils.logger import logger


def ensure_dir(path):
    path = Path(path)
    os.makedirs(path, exist_ok=True)
    return path


def write_frame(frame, path):
    """
    Write a DataFrame as UTF-8 CSV with the configured float format

    Args:
        frame: pandas DataFrame
        path: Target file

    Returns:
        Path written
    """
    path = Path(path)
    ensure_dir(path.parent)
    frame.to_csv(path, index=False, float_format=OUTPUT_SETTINGS["float_format"], encoding="utf-8", lineterminator="\n")
    logger.debug(f"Wrote {path}")
    return path


def _plain(value):
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def write_json(data, path):
    """Write a JSON document with sorted keys"""
    path = Path(path)
    ensure_dir(path.parent)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(_plain(data), f, indent=OUTPUT_SETTINGS["json_indent"], sort_keys=True)
        f.write("\n")
    logger.debug(f"Wrote {path}")
    return path


def curves_frame(t, D, D_by_type, L, Q_by_type, X, labels):
    """
    Path layout shared by every engine: t, D, D_<type>..., L_1..L_r, Q_<type>..., X

    Args:
        t: (steps+1,) grid
        D: (steps+1,) loss rate
        D_by_type: (steps+1, types)
        L: (steps+1, r)
        Q_by_type: (steps+1, types)
        X: (steps+1,) systematic factor
        labels: Type labels

    Returns:
        DataFrame
    """
    columns = {"t": t, "D": D}
    for i, label in enumerate(labels):
        columns[f"D_{label}"] = D_by_type[:, i]
    for j in range(L.shape[1]):
        columns[f"L_{j + 1}"] = L[:, j]
    for i, label in enumerate(labels):
        columns[f"Q_{label}"] = Q_by_type[:, i]
    columns["X"] = X
    return pd.DataFrame(columns)


def histogram_frame(samples, bins=None):
    """(bin_left, bin_right, count) table of a sample"""
    bins = bins or OUTPUT_SETTINGS["histogram_bins"]
    counts, edges = np.histogram(np.asarray(samples, dtype=float), bins=bins)
    return pd.DataFrame({"bin_left": edges[:-1], "bin_right": edges[1:], "count": counts})


def default_times_frame(default_times, name_types, labels):
    """(name, type, time) rows for every defaulted name, in name order"""
    names = np.flatnonzero(np.isfinite(default_times))
    return pd.DataFrame({
        "name": names,
        "type": [labels[name_types[n]] for n in names],
        "time": default_times[names],
    })


def types_frame(config):
    """Label and parameters of every configured type"""
    rows = []
    for label, name_type in zip(config.labels(), config.types):
        row = {"label": label, "weight": name_type.weight, "sigma": name_type.sigma,
               "beta_S": name_type.beta_S, "rho": name_type.rho, "lambda0": name_type.lambda0,
               "drift": json.dumps(name_type.drift.to_dict(), sort_keys=True)}
        row.update({f"beta_C_{j + 1}": v for j, v in enumerate(name_type.beta_C)})
        row.update({f"ell_{j + 1}": v for j, v in enumerate(name_type.ell)})
        rows.append(row)
    return pd.DataFrame(rows)
