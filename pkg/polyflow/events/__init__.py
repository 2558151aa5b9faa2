"""
Event classes of the numerical operations.
"""
