"""
Pipeline de compilación por peso.

    rango -> (fuera) clamp
          -> disparador de inconsecutividad -> CVM
          -> FAWD (tabla o ILP) -> si no hay solución exacta, CVM

El disparador es sólo condición suficiente: un FAWD infactible cae a CVM,
así que el residuo es siempre el mínimo |w - w~| sobre el conjunto
representable.
"""

import logging
import threading
import time
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from core_model import INT64_MAX, INT64_MIN, Bitmap, CompiledWeight, FaultMap, GroupingConfig, Path
from exceptions import ConfigInvalidError, LongitudError, PesoInvalidoError, RangoError, es_error_recuperable
from fawd_table import MAX_ENTRADAS_DEFAULT, TableCache, cvm_table_lookup, fawd_table_lookup
from ilp_kernel import MAX_NODOS_DEFAULT, MAX_VARIABLES_DEFAULT, cvm_ilp, fawd_ilp
from parallel import parallel_map_ordered
from range_analysis import (
    ENUMERATION_BUDGET_DEFAULT,
    ConsecutivityReport,
    RangeInfo,
    inconsecutivity_trigger,
    representable_range,
)

logger = logging.getLogger(__name__)

TABLE_BUDGET_DEFAULT = 4096
TAM_BLOQUE = 1024
ETAPAS = ("condicion", "fawd", "cvm")

__all__ = [
    "CompiledWeight", "Path", "ForcePath", "CompilePolicy", "CompileReport", "Compiler",
    "clamp_solution", "compile_weight", "compile_tensor", "compile_tensor_codes",
]


class ForcePath(str, Enum):
    AUTO = "auto"
    TABLE = "table"
    ILP = "ilp"


@dataclass(frozen=True)
class CompilePolicy:
    force_path: ForcePath = ForcePath.AUTO
    table_budget: int = TABLE_BUDGET_DEFAULT
    thread_count: int = 1
    enumeration_budget: int = ENUMERATION_BUDGET_DEFAULT
    skip_checks: bool = False
    max_variables: int = MAX_VARIABLES_DEFAULT
    max_nodes: int = MAX_NODOS_DEFAULT
    max_table_entries: int = MAX_ENTRADAS_DEFAULT

    def __post_init__(self):
        try:
            object.__setattr__(self, 'force_path', ForcePath(str(getattr(self.force_path, 'value', self.force_path)).lower()))
        except ValueError:
            raise ConfigInvalidError('COMPILACION', 'force_path', str(self.force_path),
                                     "debe ser auto, table o ilp")
        for nombre in ('table_budget', 'thread_count', 'enumeration_budget',
                       'max_variables', 'max_nodes', 'max_table_entries'):
            valor = getattr(self, nombre)
            if valor <= 0:
                raise ConfigInvalidError('COMPILACION', nombre, str(valor), "debe ser positivo")


@dataclass(frozen=True)
class CompileReport:
    weights: Tuple[CompiledWeight, ...]
    stage_seconds: Dict[str, float]

    def __len__(self):
        return len(self.weights)

    @property
    def l1(self) -> int:
        return sum(abs(cw.residual) for cw in self.weights)

    @property
    def path_counts(self) -> Dict[str, int]:
        conteo = Counter(cw.path for cw in self.weights)
        return {p.value: conteo.get(p, 0) for p in Path}

    @property
    def residual_histogram(self) -> Dict[int, int]:
        return dict(sorted(Counter(cw.residual for cw in self.weights).items()))

    @property
    def cvm_fraction(self) -> float:
        if not self.weights:
            return 0.0
        return sum(1 for cw in self.weights if cw.path.is_cvm) / len(self.weights)

    def to_dict(self, incluir_tiempos: bool = True) -> dict:
        """Resumen con orden de claves fijo."""
        resumen = {
            'count': len(self.weights),
            'l1': self.l1,
            'path_counts': self.path_counts,
            'cvm_fraction': self.cvm_fraction,
            'residual_histogram': {str(k): v for k, v in self.residual_histogram.items()},
        }
        if incluir_tiempos:
            resumen['stage_seconds'] = {etapa: round(self.stage_seconds.get(etapa, 0.0), 6) for etapa in ETAPAS}
        return resumen


def clamp_solution(w: int, faults: FaultMap, range: RangeInfo, config: GroupingConfig) -> CompiledWeight:
    """
    Peso fuera del rango: un lado con todas sus celdas libres en L-1 y el
    otro en 0. Es óptimo porque el extremo del rango es el valor más cercano.

    Raises:
        RangoError: si w está dentro del rango
    """
    w = int(w)
    if range.contains(w):
        raise RangoError(w, range.min_value, range.max_value)
    lleno_pos = Bitmap(faults.pos.free_mask * (config.levels - 1))
    lleno_neg = Bitmap(faults.neg.free_mask * (config.levels - 1))
    cero = Bitmap.zeros(config)
    if w > range.max_value:
        return CompiledWeight(lleno_pos, cero, range.max_value, w - range.max_value, Path.CLAMP)
    return CompiledWeight(cero, lleno_neg, range.min_value, w - range.min_value, Path.CLAMP)


def _como_pesos(weights: Sequence[int]) -> np.ndarray:
    """Vector int64 de pesos; rechaza valores que no son enteros o no caben en 64 bits."""
    if isinstance(weights, np.ndarray) and weights.dtype.kind == "i":
        return weights.astype(np.int64).ravel()
    for w in weights:
        if isinstance(w, (bool, np.bool_)) or not isinstance(w, (int, np.integer)):
            raise PesoInvalidoError(w, "se esperaba un entero")
        if not INT64_MIN <= int(w) <= INT64_MAX:
            raise PesoInvalidoError(w, "no cabe en 64 bits")
    return np.asarray([int(w) for w in weights], dtype=np.int64)


class Compiler:
    """
    Sesión de compilación para un layout: guarda el análisis de rango por
    mapa de fallas, las tablas de descomposición y los tiempos por etapa.
    """

    def __init__(self, config: GroupingConfig, policy: Optional[CompilePolicy] = None):
        self.config = config
        self.policy = policy or CompilePolicy()
        self.tables = TableCache(config, self.policy.max_table_entries)
        self._lock = threading.Lock()
        self._analisis: Dict[bytes, Tuple[RangeInfo, ConsecutivityReport]] = {}
        self._tiempos = {etapa: 0.0 for etapa in ETAPAS}
        self._tabla_habilitada = self._decidir_tabla()

    def _decidir_tabla(self) -> bool:
        if self.policy.force_path is ForcePath.ILP:
            return False
        if self.policy.force_path is ForcePath.TABLE:
            return True
        return self.config.levels ** self.config.cells_per_side <= self.policy.table_budget

    def _analizar(self, faults: FaultMap) -> Tuple[RangeInfo, ConsecutivityReport]:
        clave = faults.key
        analisis = self._analisis.get(clave)
        if analisis is None:
            analisis = (representable_range(faults, self.config),
                        inconsecutivity_trigger(faults, self.config))
            with self._lock:
                self._analisis[clave] = analisis
        return analisis

    def _sumar_tiempo(self, etapa: str, segundos: float):
        with self._lock:
            self._tiempos[etapa] += segundos

    def stage_seconds(self) -> Dict[str, float]:
        with self._lock:
            return dict(self._tiempos)

    def _tabla(self, faults: FaultMap):
        if not self._tabla_habilitada:
            return None
        try:
            return self.tables.get(faults)
        except Exception as e:
            if not es_error_recuperable(e):
                raise
            logger.warning(f"{e}; se usa el camino ILP")
            self._tabla_habilitada = False
            return None

    def _fawd(self, w: int, faults: FaultMap) -> Optional[CompiledWeight]:
        tabla = self._tabla(faults)
        if tabla is not None:
            return fawd_table_lookup(w, tabla)
        return fawd_ilp(w, faults, self.config, self.policy.max_variables, self.policy.max_nodes)

    def _cvm(self, w: int, faults: FaultMap) -> CompiledWeight:
        tabla = self._tabla(faults)
        if tabla is not None:
            return cvm_table_lookup(w, tabla)
        return cvm_ilp(w, faults, self.config, self.policy.max_variables, self.policy.max_nodes)

    def compile_weight(self, w: int, faults: FaultMap) -> CompiledWeight:
        w = int(w)
        faults.validate(self.config)

        inicio = time.perf_counter()
        disparado = False
        if not self.policy.skip_checks:
            rango, reporte = self._analizar(faults)
            if not rango.contains(w):
                resultado = clamp_solution(w, faults, rango, self.config)
                self._sumar_tiempo('condicion', time.perf_counter() - inicio)
                return resultado
            disparado = reporte.triggered
        marca = time.perf_counter()
        self._sumar_tiempo('condicion', marca - inicio)

        resultado = None
        if not disparado:
            resultado = self._fawd(w, faults)
            ahora = time.perf_counter()
            self._sumar_tiempo('fawd', ahora - marca)
            marca = ahora
            if resultado is None:
                logger.debug(f"FAWD sin solución exacta para w={w}; se pasa a CVM")

        if resultado is None:
            resultado = self._cvm(w, faults)
            self._sumar_tiempo('cvm', time.perf_counter() - marca)
        return resultado

    def _compilar_indices(self, pesos: np.ndarray, indices: np.ndarray,
                          mapas: List[FaultMap]) -> CompileReport:
        antes = self.stage_seconds()
        if len(pesos) == 0:
            return CompileReport((), {etapa: 0.0 for etapa in ETAPAS})

        # Cada par (mapa, peso) distinto se compila una sola vez
        pares = np.stack([indices.astype(np.int64), pesos.astype(np.int64)], axis=1)
        unicos, inversa = np.unique(pares, axis=0, return_inverse=True)
        bloques = [unicos[i:i + TAM_BLOQUE] for i in range(0, len(unicos), TAM_BLOQUE)]

        def compilar_bloque(bloque):
            return [self.compile_weight(int(w), mapas[int(i)]) for i, w in bloque]

        resultados = [cw for bloque in parallel_map_ordered(compilar_bloque, bloques, self.policy.thread_count)
                      for cw in bloque]
        despues = self.stage_seconds()
        return CompileReport(
            weights=tuple(resultados[k] for k in np.asarray(inversa).ravel()),
            stage_seconds={etapa: despues[etapa] - antes[etapa] for etapa in ETAPAS},
        )

    def compile_tensor(self, weights: Sequence[int], faults: Sequence[FaultMap]) -> CompileReport:
        if len(weights) != len(faults):
            raise LongitudError(len(weights), len(faults))
        logger.info(f"Compilando {len(weights)} pesos ({self.config}, hilos={self.policy.thread_count})")
        posiciones: Dict[bytes, int] = {}
        mapas: List[FaultMap] = []
        indices = []
        for mapa in faults:
            mapa.validate(self.config)
            indice = posiciones.get(mapa.key)
            if indice is None:
                indice = posiciones[mapa.key] = len(mapas)
                mapas.append(mapa)
            indices.append(indice)
        reporte = self._compilar_indices(_como_pesos(weights),
                                         np.asarray(indices, dtype=np.int64), mapas)
        self._registrar(reporte)
        return reporte

    def compile_codes(self, weights: Sequence[int], codes) -> CompileReport:
        """Como compile_tensor, con los mapas como matriz de códigos (n, 2*c*r)."""
        codigos = np.asarray(codes, dtype=np.int8).reshape(-1, self.config.cells_per_weight)
        if len(weights) != len(codigos):
            raise LongitudError(len(weights), len(codigos))
        logger.info(f"Compilando {len(weights)} pesos ({self.config}, hilos={self.policy.thread_count})")
        if len(codigos) == 0:
            return CompileReport((), {etapa: 0.0 for etapa in ETAPAS})
        unicos, inversa = np.unique(codigos, axis=0, return_inverse=True)
        mapas = [FaultMap.from_codes(fila, self.config) for fila in unicos]
        reporte = self._compilar_indices(_como_pesos(weights),
                                         np.asarray(inversa).ravel(), mapas)
        self._registrar(reporte)
        return reporte

    def _registrar(self, reporte: CompileReport):
        logger.info(f"Compilación terminada: l1={reporte.l1}, "
                    f"CVM={reporte.cvm_fraction:.4%}, tablas={self.tables.stats()}")


def compile_weight(w: int, faults: FaultMap, config: GroupingConfig,
                   policy: Optional[CompilePolicy] = None) -> CompiledWeight:
    return Compiler(config, policy).compile_weight(w, faults)


def compile_tensor(weights: Sequence[int], faults: Sequence[FaultMap], config: GroupingConfig,
                   policy: Optional[CompilePolicy] = None) -> CompileReport:
    return Compiler(config, policy).compile_tensor(weights, faults)


def compile_tensor_codes(weights: Sequence[int], codes, config: GroupingConfig,
                         policy: Optional[CompilePolicy] = None) -> CompileReport:
    return Compiler(config, policy).compile_codes(weights, codes)
