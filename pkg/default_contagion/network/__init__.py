"""
Adjacency matrices, their SVD and the type tables derived from it
"""
from default_contagion.network.decomposition import (
    AdjacencyMatrix,
    LowRankReport,
    NetworkSVD,
    beta_norms,
    low_rank,
    svd_decompose,
)
from default_contagion.network.types import TypeAtom, TypeDistribution, extract_types
