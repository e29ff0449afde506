"""
Numerical engines: finite pool, moment hierarchy and weighted-particle oracle
"""
