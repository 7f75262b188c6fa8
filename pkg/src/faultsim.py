"""
Generación de mapas de fallas y reproducciones Monte Carlo.

Las muestras se sortean por bloques de índices fijos; cada bloque usa un
generador Philox con la semilla como clave y el número de bloque en la
palabra alta del contador, así el resultado no depende de cuántos hilos
procesen los bloques ni en qué orden.
"""

import logging
import threading
from dataclasses import asdict, dataclass
from enum import Enum
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from core_model import (
    CODIGO_SA0,
    CODIGO_SA1,
    FaultMap,
    GroupingConfig,
    naive_decomposition,
    realized_weight,
)
from exceptions import EnumeracionExcedidaError, LongitudError, TasasInvalidasError
from parallel import parallel_map_ordered
from pipeline import CompilePolicy, Compiler, CompileReport
from range_analysis import (
    ENUMERATION_BUDGET_DEFAULT,
    inconsecutivity_trigger,
    is_consecutive_exact,
    representable_range,
)

logger = logging.getLogger(__name__)

MUESTRAS_POR_BLOQUE = 65536


@dataclass(frozen=True)
class FaultRates:
    p_sa0: float
    p_sa1: float

    def __post_init__(self):
        if not (0 <= self.p_sa0 <= 1 and 0 <= self.p_sa1 <= 1) or self.p_sa0 + self.p_sa1 > 1:
            raise TasasInvalidasError(self.p_sa0, self.p_sa1)

    @property
    def total(self) -> float:
        return self.p_sa0 + self.p_sa1

    def scaled(self, total: float) -> "FaultRates":
        """Misma proporción SA0:SA1 con otra tasa total."""
        if self.total == 0:
            raise TasasInvalidasError(self.p_sa0, self.p_sa1)
        factor = total / self.total
        return FaultRates(self.p_sa0 * factor, self.p_sa1 * factor)


# Tasas medidas en chips ReRAM
TASAS_REFERENCIA = FaultRates(0.0175, 0.0904)


class InconsecMethod(str, Enum):
    TRIGGER = "trigger"
    EXACT = "exact"


@dataclass
class SimSummary:
    sample_count: int
    seed: Optional[int] = None
    inconsecutive_fraction: Optional[float] = None
    mean_range_reduction: Optional[float] = None
    max_range_reduction: Optional[float] = None
    l1: Optional[int] = None
    l1_naive: Optional[int] = None
    l1_per_layer: Optional[Dict[str, int]] = None
    residual_histogram: Optional[Dict[str, int]] = None
    path_counts: Optional[Dict[str, int]] = None
    cvm_fraction: Optional[float] = None

    def to_dict(self) -> dict:
        """Campos definidos, en orden de declaración."""
        return {clave: valor for clave, valor in asdict(self).items() if valor is not None}


def level_count(config: GroupingConfig) -> int:
    """Niveles representables por un lado: (L^c - 1) * r + 1."""
    return config.ideal_max + 1


# ============================================================================
# MUESTREO
# ============================================================================

def _codigos_desde_uniformes(u: np.ndarray, rates: FaultRates) -> np.ndarray:
    codigos = np.zeros(u.shape, dtype=np.int8)
    codigos[u < rates.p_sa0] = CODIGO_SA0
    codigos[(u >= rates.p_sa0) & (u < rates.total)] = CODIGO_SA1
    return codigos


def sample_faultmap(config: GroupingConfig, rates: FaultRates, rng: np.random.Generator) -> FaultMap:
    """Un mapa: cada celda SA0 con p_sa0, SA1 con p_sa1, libre en otro caso."""
    u = rng.random(config.cells_per_weight)
    return FaultMap.from_codes(_codigos_desde_uniformes(u, rates), config)


def _generador_bloque(seed: int, bloque: int) -> np.random.Generator:
    contador = np.array([0, 0, 0, bloque], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=int(seed) & (2 ** 128 - 1), counter=contador))


def _bloques(count: int, tam_bloque: int) -> List[Tuple[int, int]]:
    return [(b, min(tam_bloque, count - inicio)) for b, inicio in enumerate(range(0, count, tam_bloque))]


def _codigos_bloque(config: GroupingConfig, rates: FaultRates, seed: int, bloque: int, n: int) -> np.ndarray:
    u = _generador_bloque(seed, bloque).random((n, config.cells_per_weight))
    return _codigos_desde_uniformes(u, rates)


def sample_faultmaps(config: GroupingConfig, rates: FaultRates, count: int, seed: int = 0,
                     tam_bloque: int = MUESTRAS_POR_BLOQUE) -> np.ndarray:
    """Matriz de códigos (count, 2*c*r), en el orden de celdas de los archivos."""
    if count < 0:
        raise ValueError(f"count debe ser >= 0: {count}")
    if count == 0:
        return np.zeros((0, config.cells_per_weight), dtype=np.int8)
    partes = [_codigos_bloque(config, rates, seed, b, n) for b, n in _bloques(count, tam_bloque)]
    return np.concatenate(partes, axis=0)


# ============================================================================
# PROBABILIDAD DE INCONSECUTIVIDAD
# ============================================================================

class _Clasificador:
    """Decisión por mapa único, memorizada entre bloques."""

    def __init__(self, config: GroupingConfig, method: InconsecMethod, budget: int):
        self.config = config
        self.method = method
        self.budget = budget
        self._cache: Dict[bytes, bool] = {}
        self._lock = threading.Lock()

    def __call__(self, codigos: np.ndarray) -> bool:
        clave = codigos.tobytes()
        decision = self._cache.get(clave)
        if decision is None:
            mapa = FaultMap.from_codes(codigos, self.config)
            if self.method is InconsecMethod.TRIGGER:
                decision = inconsecutivity_trigger(mapa, self.config).triggered
            else:
                decision = not is_consecutive_exact(mapa, self.config, self.budget)
            with self._lock:
                self._cache[clave] = decision
        return decision


def estimate_inconsec_prob(config: GroupingConfig, rates: FaultRates, samples: int,
                           method=InconsecMethod.EXACT, seed: int = 0,
                           budget: int = ENUMERATION_BUDGET_DEFAULT, threads: int = 1,
                           tam_bloque: int = MUESTRAS_POR_BLOQUE) -> float:
    """
    Fracción de mapas muestreados que son inconsecutivos.

    Raises:
        EnumeracionExcedidaError: método exacto fuera del presupuesto
    """
    method = InconsecMethod(method)
    if method is InconsecMethod.EXACT and config.levels ** config.cells_per_weight > budget:
        raise EnumeracionExcedidaError(config.levels ** config.cells_per_weight, budget)
    if samples <= 0:
        return 0.0

    clasificar = _Clasificador(config, method, budget)

    def contar(bloque: Tuple[int, int]) -> int:
        codigos = _codigos_bloque(config, rates, seed, *bloque)
        unicos, conteos = np.unique(codigos, axis=0, return_counts=True)
        return int(sum(int(n) for fila, n in zip(unicos, conteos) if clasificar(fila)))

    total = sum(parallel_map_ordered(contar, _bloques(samples, tam_bloque), threads))
    probabilidad = total / samples
    logger.info(f"Inconsecutividad {config} ({method.value}, {samples} muestras): {probabilidad:.6%}")
    return probabilidad


def trigger_probability_analytic(config: GroupingConfig, rates: FaultRates) -> float:
    """1 - prod(1 - p^(2r)) sobre las significancias no-MSB que cumplen la condición de hueco."""
    p = rates.total
    r, niveles = config.rows, config.levels
    producto = 1.0
    for i in range(1, config.columns):
        if 2 * r * (niveles ** (i - 1) - 1) + 1 < niveles ** i:
            producto *= 1.0 - p ** (2 * r)
    return 1.0 - producto


def fault_rate_sweep(config: GroupingConfig, totals: Sequence[float], samples: int, seed: int = 0,
                     method=InconsecMethod.EXACT, base: FaultRates = TASAS_REFERENCIA,
                     budget: int = ENUMERATION_BUDGET_DEFAULT, threads: int = 1) -> Dict[float, float]:
    """Probabilidad de inconsecutividad por tasa total, con la proporción SA0:SA1 de `base`."""
    return {
        float(total): estimate_inconsec_prob(config, base.scaled(total), samples, method, seed, budget, threads)
        for total in totals
    }


# ============================================================================
# REDUCCIÓN DE RANGO
# ============================================================================

@dataclass(frozen=True)
class SingleFaultImpact:
    side: str
    significance: int
    row: int
    polarity: str
    min_value: int
    max_value: int
    reduction: Fraction


def single_fault_sweep(config: GroupingConfig) -> List[SingleFaultImpact]:
    """
    Todas las posiciones y polaridades de una única falla.

    `significance` es el índice 1..c del bitmap (MSB primero) y `row` el
    índice 1..r.
    """
    impactos = []
    celdas_por_lado = config.cells_per_side
    for posicion in range(config.cells_per_weight):
        lado, resto = divmod(posicion, celdas_por_lado)
        k, j = divmod(resto, config.rows)
        for codigo, polaridad in ((CODIGO_SA0, "SA0"), (CODIGO_SA1, "SA1")):
            codigos = np.zeros(config.cells_per_weight, dtype=np.int8)
            codigos[posicion] = codigo
            rango = representable_range(FaultMap.from_codes(codigos, config), config)
            impactos.append(SingleFaultImpact(
                side="pos" if lado == 0 else "neg",
                significance=k + 1,
                row=j + 1,
                polarity=polaridad,
                min_value=rango.min_value,
                max_value=rango.max_value,
                reduction=rango.reduction,
            ))
    return impactos


def range_reduction_stats(config: GroupingConfig, rates: FaultRates, samples: int,
                          seed: int = 0, threads: int = 1,
                          tam_bloque: int = MUESTRAS_POR_BLOQUE) -> SimSummary:
    """Reducción relativa del ancho de rango sobre mapas muestreados."""
    if samples <= 0:
        return SimSummary(sample_count=0, seed=seed, mean_range_reduction=0.0, max_range_reduction=0.0)

    def reducir(bloque: Tuple[int, int]) -> Tuple[Fraction, Fraction]:
        codigos = _codigos_bloque(config, rates, seed, *bloque)
        unicos, conteos = np.unique(codigos, axis=0, return_counts=True)
        suma, maximo = Fraction(0), Fraction(0)
        for fila, n in zip(unicos, conteos):
            reduccion = representable_range(FaultMap.from_codes(fila, config), config).reduction
            suma += reduccion * int(n)
            maximo = max(maximo, reduccion)
        return suma, maximo

    parciales = parallel_map_ordered(reducir, _bloques(samples, tam_bloque), threads)
    suma = sum((p[0] for p in parciales), Fraction(0))
    maximo = max(p[1] for p in parciales)
    return SimSummary(
        sample_count=samples,
        seed=seed,
        mean_range_reduction=float(suma / samples),
        max_range_reduction=float(maximo),
    )


# ============================================================================
# DISTORSIÓN
# ============================================================================

def naive_realized(w: int, faults: FaultMap, config: GroupingConfig) -> int:
    """Valor que realiza la escritura sin conocimiento de fallas."""
    pos, neg = naive_decomposition(w, config)
    return realized_weight(pos, neg, faults, config)


def _compilar(weights, faults, compilador: Compiler) -> Tuple[CompileReport, List[FaultMap]]:
    if isinstance(faults, np.ndarray):
        codigos = faults.reshape(-1, compilador.config.cells_per_weight)
        mapas = [FaultMap.from_codes(fila, compilador.config) for fila in codigos]
        return compilador.compile_codes(weights, codigos), mapas
    mapas = list(faults)
    return compilador.compile_tensor(weights, mapas), mapas


def distortion_report(weights: Sequence[int], faults, config: GroupingConfig,
                      policy: Optional[CompilePolicy] = None,
                      layers: Optional[Sequence[str]] = None) -> SimSummary:
    """
    Distorsión l1 del lote compilado, con la l1 de la escritura ingenua como
    referencia y, si se pasan etiquetas, la l1 por capa.

    Args:
        faults: secuencia de FaultMap o matriz de códigos (n, 2*c*r)
    """
    n_mapas = len(faults) if not isinstance(faults, np.ndarray) else faults.reshape(-1, config.cells_per_weight).shape[0]
    if len(weights) != n_mapas:
        raise LongitudError(len(weights), n_mapas)
    if layers is not None and len(layers) != len(weights):
        raise LongitudError(len(weights), len(layers))

    reporte, mapas = _compilar(weights, faults, Compiler(config, policy))

    ingenuos: Dict[Tuple[bytes, int], int] = {}
    l1_naive = 0
    for w, mapa in zip(weights, mapas):
        clave = (mapa.key, int(w))
        if clave not in ingenuos:
            ingenuos[clave] = naive_realized(int(w), mapa, config)
        l1_naive += abs(int(w) - ingenuos[clave])

    por_capa = None
    if layers is not None:
        por_capa = {}
        for etiqueta, cw in zip(layers, reporte.weights):
            por_capa[str(etiqueta)] = por_capa.get(str(etiqueta), 0) + abs(cw.residual)

    return SimSummary(
        sample_count=len(reporte),
        l1=reporte.l1,
        l1_naive=l1_naive,
        l1_per_layer=por_capa,
        residual_histogram={str(k): v for k, v in reporte.residual_histogram.items()},
        path_counts=reporte.path_counts,
        cvm_fraction=reporte.cvm_fraction,
    )


def paired_distortion(weights_unit: Sequence[float], configs: Sequence[GroupingConfig],
                      rates: FaultRates = TASAS_REFERENCIA, seed: int = 0,
                      policy: Optional[CompilePolicy] = None) -> Dict[str, Dict[str, float]]:
    """
    l1 por layout sobre las mismas muestras de peso en [-1, 1], escaladas al
    rango ideal de cada layout. Los mapas de fallas se sortean con la misma
    semilla para cada layout. `l1_normalized` divide por el máximo ideal
    para comparar layouts en la misma escala.
    """
    unitarios = np.clip(np.asarray(weights_unit, dtype=np.float64), -1.0, 1.0)
    resultado = {}
    for config in configs:
        pesos = np.rint(unitarios * config.ideal_max).astype(np.int64)
        codigos = sample_faultmaps(config, rates, len(pesos), seed)
        reporte = Compiler(config, policy).compile_codes(pesos, codigos)
        resultado[str(config)] = {'l1': reporte.l1, 'l1_normalized': reporte.l1 / config.ideal_max}
        logger.info(f"Distorsión pareada {config}: l1={reporte.l1}")
    return resultado
