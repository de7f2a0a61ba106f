"""
Shared library for the PDMP jump-rate toolkit
"""

__version__ = '1.0.0'
