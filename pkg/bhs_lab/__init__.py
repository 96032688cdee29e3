"""
BHS Lab - Black hole search simulator
Mobile agents locating a black hole on dynamic and static graphs
"""

__version__ = "1.0.0"
__author__ = "BHS Lab Contributors"
