"""
Core simulation components
"""

from .graph import Footprint, EdgeId, GraphError, generate
from .runtime import World, run, step, SimOutcome, Verdict, ConfigurationError
from .adversary import parse_adversary, enumerate_decisions
from .scattered import ScatteredBhs
from .rooted import RootedBhs
from .ebhs_chain import run_ebhs, find_uxs, uxs_step
from .harness import audit_trace, oracle_dynamic, oracle_ebhs, VerificationManager

__all__ = [
    'Footprint',
    'EdgeId',
    'GraphError',
    'generate',
    'World',
    'run',
    'step',
    'SimOutcome',
    'Verdict',
    'ConfigurationError',
    'parse_adversary',
    'enumerate_decisions',
    'ScatteredBhs',
    'RootedBhs',
    'run_ebhs',
    'find_uxs',
    'uxs_step',
    'audit_trace',
    'oracle_dynamic',
    'oracle_ebhs',
    'VerificationManager',
]
