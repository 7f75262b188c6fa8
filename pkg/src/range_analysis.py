"""
Análisis del rango representable de un grupo de celdas con fallas.

- Recorte (clipping): cualquier falla reduce estrictamente el ancho del rango
  [min, max]; los extremos salen de poner todas las celdas libres de un lado
  en L-1 y las del otro en 0, más la constante C aportada por las celdas SA0.
- Inconsecutividad: si todas las celdas de una significancia no-MSB están
  clavadas en ambos lados, el conjunto representable salta de a L^i y queda
  con huecos cuando 2 * r * (L^(i-1) - 1) + 1 < L^i.

El oráculo exacto compone, significancia por significancia, las
contribuciones alcanzables (suma de Minkowski) en lugar de recorrer las
L^(2cr) asignaciones.
"""

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import FrozenSet, List, Tuple

import numpy as np

from core_model import (
    FaultMap,
    FaultMapSide,
    GroupingConfig,
    column_free_counts,
    column_sa0_counts,
    significance_vector,
)
from exceptions import EnumeracionExcedidaError

logger = logging.getLogger(__name__)

ENUMERATION_BUDGET_DEFAULT = 2 ** 24


@dataclass(frozen=True)
class RangeInfo:
    """Rango representable de un mapa de fallas."""

    stuck_offset: int
    max_value: int
    min_value: int
    ideal_max: int
    ideal_min: int

    @property
    def width(self) -> int:
        return self.max_value - self.min_value

    @property
    def ideal_width(self) -> int:
        return self.ideal_max - self.ideal_min

    @property
    def reduction(self) -> Fraction:
        """Fracción exacta del ancho ideal perdida por las fallas."""
        return Fraction(self.ideal_width - self.width, self.ideal_width)

    def contains(self, w: int) -> bool:
        return self.min_value <= w <= self.max_value


@dataclass(frozen=True)
class ConsecutivityReport:
    """
    Resultado del chequeo de inconsecutividad.

    Las significancias se indexan desde el LSB: i = 1 pesa L^0, i = c es el
    MSB y nunca aparece en `triggering_significances`.
    """

    triggered: bool
    triggering_significances: FrozenSet[int]
    columns: int
    rows: int
    levels: int

    def gap_stride(self, i: int) -> int:
        return self.levels ** i

    def tail_span(self, i: int) -> int:
        return self.rows * (self.levels ** (i - 1) - 1)

    def column_index(self, i: int) -> int:
        """Índice (1..c, MSB primero) de la significancia i en el bitmap."""
        return self.columns - i + 1


def _offset_lado(side: FaultMapSide, config: GroupingConfig) -> int:
    s = np.array(significance_vector(config), dtype=np.int64)
    return int((config.levels - 1) * (s @ column_sa0_counts(side)))


def _maximo_libre(side: FaultMapSide, config: GroupingConfig) -> int:
    s = np.array(significance_vector(config), dtype=np.int64)
    return int((config.levels - 1) * (s @ column_free_counts(side)))


def stuck_offset(faults: FaultMap, config: GroupingConfig) -> int:
    """C = (L-1) * (d(F0+) - d(F0-))."""
    faults.validate(config)
    return _offset_lado(faults.pos, config) - _offset_lado(faults.neg, config)


def representable_range(faults: FaultMap, config: GroupingConfig) -> RangeInfo:
    """Extremos del rango: libres positivas en L-1 (máximo) o libres negativas en L-1 (mínimo)."""
    offset = stuck_offset(faults, config)
    return RangeInfo(
        stuck_offset=offset,
        max_value=_maximo_libre(faults.pos, config) + offset,
        min_value=-_maximo_libre(faults.neg, config) + offset,
        ideal_max=config.ideal_max,
        ideal_min=config.ideal_min,
    )


def inconsecutivity_trigger(faults: FaultMap, config: GroupingConfig) -> ConsecutivityReport:
    """
    Condición suficiente de inconsecutividad, O(c*r).

    Se exige además al menos una celda libre en alguna significancia mayor:
    si todo lo de arriba también está clavado, el conjunto no tiene saltos.
    """
    faults.validate(config)
    libres = faults.pos.free_mask | faults.neg.free_mask  # (c, r)
    libres_por_columna = libres.any(axis=1)
    c, r, niveles = config.columns, config.rows, config.levels
    disparadas = set()
    for i in range(1, c):
        k = c - i  # índice 0-based, MSB primero
        if libres_por_columna[k]:
            continue
        if not libres_por_columna[:k].any():
            continue
        cola = r * (niveles ** (i - 1) - 1)
        if 2 * cola + 1 < niveles ** i:
            disparadas.add(i)
    return ConsecutivityReport(
        triggered=bool(disparadas),
        triggering_significances=frozenset(disparadas),
        columns=c,
        rows=r,
        levels=niveles,
    )


def _verificar_presupuesto(config: GroupingConfig, budget: int):
    requerido = config.levels ** config.cells_per_weight
    if requerido > budget:
        raise EnumeracionExcedidaError(requerido, budget)


def achievable_indicator(side: FaultMapSide, config: GroupingConfig) -> Tuple[int, np.ndarray]:
    """
    Valores decodificados alcanzables por un lado después de inyectar fallas.

    Returns:
        (offset, indicador): el valor v es alcanzable si indicador[v - offset].
    """
    indicador = np.ones(1, dtype=np.int64)
    for s_k, m in zip(significance_vector(config), column_free_counts(side)):
        if m == 0:
            continue
        nucleo = np.zeros(int(m) * (config.levels - 1) * s_k + 1, dtype=np.int64)
        nucleo[::s_k] = 1
        indicador = (np.convolve(indicador, nucleo) > 0).astype(np.int64)
    return _offset_lado(side, config), indicador.astype(bool)


def _indicador_representable(faults: FaultMap, config: GroupingConfig) -> Tuple[int, np.ndarray]:
    offset_pos, ind_pos = achievable_indicator(faults.pos, config)
    offset_neg, ind_neg = achievable_indicator(faults.neg, config)
    diferencia = np.convolve(ind_pos.astype(np.int64), ind_neg[::-1].astype(np.int64)) > 0
    return offset_pos - offset_neg - (len(ind_neg) - 1), diferencia


def enumerate_representable_set(faults: FaultMap, config: GroupingConfig,
                                budget: int = ENUMERATION_BUDGET_DEFAULT) -> Tuple[int, ...]:
    """Conjunto representable S completo, sin repetidos y ordenado."""
    faults.validate(config)
    _verificar_presupuesto(config, budget)
    offset, indicador = _indicador_representable(faults, config)
    return tuple(int(v) + offset for v in np.flatnonzero(indicador))


def is_consecutive_exact(faults: FaultMap, config: GroupingConfig,
                         budget: int = ENUMERATION_BUDGET_DEFAULT) -> bool:
    """True si S es un intervalo entero contiguo."""
    faults.validate(config)
    _verificar_presupuesto(config, budget)
    _, indicador = _indicador_representable(faults, config)
    posiciones = np.flatnonzero(indicador)
    return bool(indicador[posiciones[0]:posiciones[-1] + 1].all())


def representable_gaps(faults: FaultMap, config: GroupingConfig,
                       budget: int = ENUMERATION_BUDGET_DEFAULT) -> List[Tuple[int, int]]:
    """Intervalos cerrados de enteros ausentes entre el mínimo y el máximo de S."""
    valores = enumerate_representable_set(faults, config, budget)
    huecos = []
    for anterior, siguiente in zip(valores, valores[1:]):
        if siguiente - anterior > 1:
            huecos.append((anterior + 1, siguiente - 1))
    return huecos
