"""
Empirical type distributions read off the SVD factors
"""
from dataclasses import dataclass
from typing import Tuple

import numpy as np
import pandas as pd

from default_contagion.config import NETWORK_SETTINGS
from default_contagion.model import NameType
from default_contagion.utils.logger import logger


@dataclass(frozen=True)
class TypeAtom:
    beta_C: Tuple[float, ...]
    ell: Tuple[float, ...]
    probability: float
    count: int


@dataclass(frozen=True)
class TypeDistribution:
    """Joint distribution of (beta_C, ell) over the names of a network"""

    atoms: Tuple[TypeAtom, ...]
    n: int

    @property
    def rank(self):
        return len(self.atoms[0].beta_C) if self.atoms else 0

    def marginal(self, field, j):
        """
        Distribution of one coordinate, e.g. marginal("beta_C", 0) for the first cluster

        Args:
            field: "beta_C" or "ell"
            j: Cluster index (0-based)

        Returns:
            List of (value, probability) sorted by value
        """
        if field not in ("beta_C", "ell"):
            raise ValueError(f"unknown field '{field}'")
        counts = {}
        for atom in self.atoms:
            value = getattr(atom, field)[j]
            counts[value] = counts.get(value, 0) + atom.count
        return [(value, count / self.n) for value, count in sorted(counts.items())]

    def expand(self):
        """Rows (beta_C, ell) repeated by their counts, in atom order"""
        beta = np.array([atom.beta_C for atom in self.atoms for _ in range(atom.count)])
        ell = np.array([atom.ell for atom in self.atoms for _ in range(atom.count)])
        return beta, ell

    def to_frame(self):
        rows = []
        for atom in self.atoms:
            row = {f"beta_C_{j + 1}": v for j, v in enumerate(atom.beta_C)}
            row.update({f"ell_{j + 1}": v for j, v in enumerate(atom.ell)})
            row["count"] = atom.count
            row["probability"] = atom.probability
            rows.append(row)
        return pd.DataFrame(rows)

    def to_name_types(self, sigma, drift, beta_S, lambda0, rho=0.5):
        """
        One NameType per atom, sharing the idiosyncratic parameters

        Returns:
            Tuple of NameType labelled a1, a2, ...
        """
        return tuple(
            NameType(
                sigma=sigma,
                drift=drift,
                beta_S=beta_S,
                beta_C=atom.beta_C,
                ell=atom.ell,
                rho=rho,
                lambda0=lambda0,
                weight=atom.probability,
                label=f"a{i + 1}",
            )
            for i, atom in enumerate(self.atoms)
        )


def extract_types(svd, group_tol=None, decimals=None):
    """
    Group names whose rounded (beta_C, ell) rows agree within group_tol

    Rows are rounded to `decimals` places, sorted lexicographically and swept once; a row
    joins the current group while it stays within group_tol (max norm) of the group's
    first row.

    Args:
        svd: NetworkSVD
        group_tol: Max-norm merge tolerance
        decimals: Rounding applied before grouping

    Returns:
        TypeDistribution with probability = count / n
    """
    group_tol = NETWORK_SETTINGS["group_tol"] if group_tol is None else group_tol
    decimals = NETWORK_SETTINGS["table_decimals"] if decimals is None else decimals

    r = svd.rank
    rows = np.round(np.hstack([svd.beta_matrix(), svd.ell_matrix()]), decimals)
    n = rows.shape[0]
    order = np.lexsort(rows.T[::-1]) if r else np.arange(n)

    groups = []
    for index in order:
        row = rows[index]
        if groups and np.max(np.abs(row - rows[groups[-1][0]])) <= group_tol:
            groups[-1].append(index)
        else:
            groups.append([index])

    atoms = []
    for members in groups:
        value = np.round(rows[members].mean(axis=0), decimals)
        atoms.append(TypeAtom(
            beta_C=tuple(float(v) for v in value[:r]),
            ell=tuple(float(v) for v in value[r:]),
            probability=len(members) / n,
            count=len(members),
        ))

    logger.debug(f"Extracted {len(atoms)} types from {n} names")
    return TypeDistribution(atoms=tuple(atoms), n=n)
