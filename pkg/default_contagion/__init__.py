"""
Default contagion engine: finite pools, mean-field limits and low-rank networks
"""

__version__ = "0.1.0"
