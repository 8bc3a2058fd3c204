"""Diagnosis of over-constrained boolean knowledge bases.

Given a background KB and an ordered list of requirements that together
are unsatisfiable, the engine removes a minimal, preference-respecting
subset of requirements so the rest fits.  Checks run either one by one
or speculatively on a worker pool.
"""

__version__ = "0.1.0"

from .diagcore import SequentialProvider, fastdiag, run_diagnosis
from .model import Constraint, ConstraintSet, Diagnosis, DiagnosisTask, VariableTable
from .speculate import SpeculativeProvider

__all__ = [
    "Constraint",
    "ConstraintSet",
    "Diagnosis",
    "DiagnosisTask",
    "SequentialProvider",
    "SpeculativeProvider",
    "VariableTable",
    "fastdiag",
    "run_diagnosis",
    "__version__",
]
