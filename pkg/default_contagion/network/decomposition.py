"""
Singular value decomposition of the default-impact network and its best low-rank approximations

The adjacency matrix A has entries omega(i, j), the impact of a default of name i on name j.
Its SVD A = sum_j xi_j l_j u_j^T defines the clusters: name n feels cluster j with
coefficient beta_C[n, j] = xi_j * u[n, j] and contributes l[n, j] to the cluster loss rate.
"""
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from default_contagion.config import NETWORK_SETTINGS
from default_contagion.errors import MalformedConfig, NonConvergence, RankOutOfRange
from default_contagion.utils.logger import logger


class AdjacencyMatrix:
    """
    Square matrix of default impacts

    Args:
        values: (n, n) array-like
        nonnegative: Require entries >= 0 (low-rank approximations may dip below 0)
    """

    def __init__(self, values, nonnegative=True):
        values = np.array(values, dtype=float)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise MalformedConfig(f"adjacency matrix must be square, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise MalformedConfig("adjacency matrix has non-finite entries")
        if nonnegative and np.any(values < 0):
            raise MalformedConfig("adjacency matrix entries must be nonnegative")
        values.setflags(write=False)
        self.values = values

    @property
    def n(self):
        return self.values.shape[0]

    def frobenius(self):
        return float(np.linalg.norm(self.values, "fro"))

    @classmethod
    def from_factors(cls, singular_values, left, right, nonnegative=True):
        """
        Build sum_j xi_j l_j u_j^T

        Args:
            singular_values: Length-r sequence
            left: (n, r) left factors
            right: (n, r) right factors

        Returns:
            AdjacencyMatrix
        """
        s = np.asarray(singular_values, dtype=float)
        left = np.asarray(left, dtype=float).reshape(-1, len(s))
        right = np.asarray(right, dtype=float).reshape(-1, len(s))
        return cls((left * s) @ right.T, nonnegative=nonnegative)

    def __repr__(self):
        return f"AdjacencyMatrix(n={self.n})"


@dataclass(frozen=True)
class NetworkSVD:
    """Leading singular triplets: singular_values (r,), left (n, r), right (n, r)"""

    singular_values: np.ndarray
    left: np.ndarray
    right: np.ndarray

    @property
    def rank(self):
        return len(self.singular_values)

    @property
    def n(self):
        return self.left.shape[0]

    def beta_matrix(self):
        """(n, r) contagion coefficients beta_C[n, j] = xi_j u[n, j]"""
        return self.right * self.singular_values

    def ell_matrix(self):
        return self.left

    def truncate(self, theta):
        return NetworkSVD(self.singular_values[:theta], self.left[:, :theta], self.right[:, :theta])

    def reconstruct(self):
        return (self.left * self.singular_values) @ self.right.T


@dataclass(frozen=True)
class LowRankReport:
    theta: int
    frobenius: float
    spectral: float
    tail_sum: float

    def to_dict(self):
        return {"theta": self.theta, "frobenius": self.frobenius, "spectral": self.spectral, "tail_sum": self.tail_sum}


def _fix_signs(left, right):
    """Make the largest-magnitude entry of every right factor positive"""
    for j in range(right.shape[1]):
        index = int(np.argmax(np.abs(right[:, j])))
        if right[index, j] < 0:
            right[:, j] = -right[:, j]
            left[:, j] = -left[:, j]


def _tie_order(s, left):
    """
    Column order: decreasing singular value, ties (relative 1e-12) by descending
    lexicographic order of the left factor
    """
    order = list(range(len(s)))
    scale = s[0] if len(s) else 1.0
    groups = []
    for j in order:
        if groups and abs(s[groups[-1][0]] - s[j]) <= 1e-12 * scale:
            groups[-1].append(j)
        else:
            groups.append([j])
    result = []
    for group in groups:
        result.extend(sorted(group, key=lambda j: tuple(-left[:, j])))
    return result


def reconstruction_residual(matrix, svd):
    """Frobenius norm of A - sum xi l u^T"""
    return float(np.linalg.norm(matrix.values - svd.reconstruct(), "fro"))


def check_orthonormal(svd):
    """Largest deviation of L^T L and U^T U from the identity"""
    eye = np.eye(svd.rank)
    left = np.max(np.abs(svd.left.T @ svd.left - eye)) if svd.rank else 0.0
    right = np.max(np.abs(svd.right.T @ svd.right - eye)) if svd.rank else 0.0
    return float(max(left, right))


def svd_decompose(matrix, tol=None):
    """
    Decompose the network and keep singular values above tol * max

    Args:
        matrix: AdjacencyMatrix
        tol: Relative rank cutoff

    Returns:
        NetworkSVD with signs fixed and ties ordered deterministically

    Raises:
        NonConvergence: if LAPACK fails or the factors miss their tolerances
    """
    tol = NETWORK_SETTINGS["svd_tol"] if tol is None else tol
    if tol <= 0:
        raise MalformedConfig("svd tolerance must be positive")

    try:
        u, s, vh = scipy.linalg.svd(matrix.values, full_matrices=False, lapack_driver="gesdd")
    except (np.linalg.LinAlgError, ValueError):
        logger.debug("gesdd failed, retrying with gesvd")
        try:
            u, s, vh = scipy.linalg.svd(matrix.values, full_matrices=False, lapack_driver="gesvd")
        except (np.linalg.LinAlgError, ValueError) as e:
            raise NonConvergence(f"SVD did not converge: {e}")

    r = int(np.sum(s > tol * s[0])) if s.size and s[0] > 0 else 0
    left = np.array(u[:, :r])
    right = np.array(vh[:r].T)
    values = np.array(s[:r])
    _fix_signs(left, right)
    order = _tie_order(values, left)
    svd = NetworkSVD(values[order], left[:, order], right[:, order])

    deviation = check_orthonormal(svd)
    if deviation > NETWORK_SETTINGS["orthonormal_tol"]:
        raise NonConvergence(f"factors not orthonormal (deviation {deviation:.3g})")
    dropped = float(np.sqrt(np.sum(s[r:] ** 2)))
    residual = reconstruction_residual(matrix, svd)
    allowed = NETWORK_SETTINGS["reconstruction_tol"] * matrix.frobenius() + dropped
    if residual > allowed:
        raise NonConvergence(f"reconstruction residual {residual:.3g} above {allowed:.3g}")

    logger.info(f"SVD of {matrix.n}x{matrix.n} network: rank {r}, leading value {values[0] if r else 0.0:.6g}")
    return svd


def low_rank(svd, theta):
    """
    Best rank-theta approximation A_theta = sum_{j <= theta} xi_j l_j u_j^T

    Args:
        svd: NetworkSVD
        theta: Target rank, 1 <= theta <= r

    Returns:
        (AdjacencyMatrix, LowRankReport). The report carries the Frobenius error
        sqrt(sum_{i > theta} xi_i^2), the spectral error xi_{theta+1} and the tail sum
        sum_{i > theta} xi_i, which bounds the spectral error from above.

    Raises:
        RankOutOfRange: if theta is outside [1, r]
    """
    if not 1 <= theta <= svd.rank:
        raise RankOutOfRange(f"theta={theta} outside [1, {svd.rank}]")
    tail = svd.singular_values[theta:]
    report = LowRankReport(
        theta=int(theta),
        frobenius=float(np.sqrt(np.sum(tail ** 2))),
        spectral=float(tail[0]) if tail.size else 0.0,
        tail_sum=float(np.sum(tail)),
    )
    approx = AdjacencyMatrix(svd.truncate(theta).reconstruct(), nonnegative=False)
    return approx, report


def beta_norms(svd):
    """
    Column norms of the contagion coefficients, ||beta_C[., j]||_2

    The right factors are orthonormal, so each norm is the singular value itself.
    """
    return np.array(svd.singular_values, dtype=float)
