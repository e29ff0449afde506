"""
Reading adjacency matrices and exporting decompositions
"""
from pathlib import Path

import numpy as np
import pandas as pd

from default_contagion.errors import MalformedConfig
from default_contagion.network.decomposition import AdjacencyMatrix
from default_contagion.utils.logger import logger
from default_contagion.utils.output import write_frame

TRIPLE_COLUMNS = ("i", "j", "omega")


def read_matrix(path, n=None):
    """
    Load an adjacency matrix from CSV

    Two layouts are accepted: a dense matrix with one row per line and no header, or a
    sparse triple list with header "i,j,omega" (0-based indices, missing entries are 0).

    Args:
        path: CSV file
        n: Dimension for triple lists (default: largest index + 1)

    Returns:
        AdjacencyMatrix

    Raises:
        OSError: if the file cannot be read
        MalformedConfig: if the content is not a square nonnegative matrix
    """
    path = Path(path)
    with open(path, "r", encoding="utf-8") as f:
        first = f.readline().strip().lower()

    if tuple(cell.strip() for cell in first.split(",")) == TRIPLE_COLUMNS:
        frame = pd.read_csv(path)
        rows = frame["i"].to_numpy(dtype=int)
        cols = frame["j"].to_numpy(dtype=int)
        size = int(n) if n is not None else int(max(rows.max(), cols.max())) + 1
        values = np.zeros((size, size))
        np.add.at(values, (rows, cols), frame["omega"].to_numpy(dtype=float))
        logger.info(f"Loaded {len(frame)} triples into a {size}x{size} matrix from {path}")
        return AdjacencyMatrix(values)

    try:
        values = pd.read_csv(path, header=None).to_numpy(dtype=float)
    except ValueError as e:
        raise MalformedConfig(f"{path}: not a numeric matrix ({e})")
    logger.info(f"Loaded {values.shape[0]}x{values.shape[1]} dense matrix from {path}")
    return AdjacencyMatrix(values)


def write_matrix(matrix, path):
    """Dense CSV without header, the layout read_matrix accepts"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, matrix.values, delimiter=",", fmt="%.17g")
    return path


def write_svd(svd, out_dir):
    """
    One file per factor: singular_values.csv, left_factors.csv, right_factors.csv

    Returns:
        List of written paths
    """
    out_dir = Path(out_dir)
    r = svd.rank
    values = pd.DataFrame({"j": np.arange(1, r + 1), "singular_value": svd.singular_values})
    left = pd.DataFrame(svd.left, columns=[f"ell_{j + 1}" for j in range(r)])
    right = pd.DataFrame(svd.right, columns=[f"u_{j + 1}" for j in range(r)])
    return [
        write_frame(values, out_dir / "singular_values.csv"),
        write_frame(left, out_dir / "left_factors.csv"),
        write_frame(right, out_dir / "right_factors.csv"),
    ]
