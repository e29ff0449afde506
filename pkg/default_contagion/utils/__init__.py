"""
Utility modules for the default contagion engine
"""
