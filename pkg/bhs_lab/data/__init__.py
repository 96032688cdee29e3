"""
Data layer components - database and configuration
"""

from .database import Database
from .config import LabConfig

__all__ = ['Database', 'LabConfig']
