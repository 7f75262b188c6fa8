"""
Compilador IMC - Paquete Principal
Compilación de pesos tolerante a fallas stuck-at para arreglos de memoria
"""

import os
import sys

__version__ = "1.0.0"
__author__ = "Compilador IMC"

# Los módulos se importan entre sí como módulos planos de src/; el paquete
# reexporta esos mismos módulos para no duplicar clases
_DIRECTORIO = os.path.dirname(os.path.abspath(__file__))
if _DIRECTORIO not in sys.path:
    sys.path.insert(0, _DIRECTORIO)

from config_manager import ConfigManager  # noqa: E402
from core_model import (  # noqa: E402
    Bitmap,
    CompiledWeight,
    FaultMap,
    FaultMapSide,
    GroupingConfig,
    Path,
    decode,
    realized_weight,
    significance_vector,
)
from exceptions import *  # noqa: F401,F403,E402
from faultsim import FaultRates, estimate_inconsec_prob, sample_faultmaps  # noqa: E402
from pipeline import CompilePolicy, CompileReport, Compiler, compile_tensor, compile_weight  # noqa: E402
from range_analysis import inconsecutivity_trigger, representable_range  # noqa: E402

__all__ = [
    'ConfigManager',
    'Bitmap',
    'CompiledWeight',
    'FaultMap',
    'FaultMapSide',
    'GroupingConfig',
    'Path',
    'decode',
    'realized_weight',
    'significance_vector',
    'FaultRates',
    'estimate_inconsec_prob',
    'sample_faultmaps',
    'CompilePolicy',
    'CompileReport',
    'Compiler',
    'compile_tensor',
    'compile_weight',
    'inconsecutivity_trigger',
    'representable_range',
]
