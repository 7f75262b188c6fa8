"""
Tabla de descomposición para FAWD/CVM.

Cada lado del arreglo guarda los valores decodificados alcanzables después
de inyectar las fallas (incluida la contribución de sus celdas SA0), con la
mínima suma de celdas y un bitmap testigo. Un par (a, b) realiza a - b:
FAWD busca sobre la diagonal a - b = w, CVM sobre las vecinas más cercanas.
"""

import dataclasses
import logging
import threading
from types import MappingProxyType
from typing import Dict, Mapping, NamedTuple, Optional, Tuple

from core_model import (
    Bitmap,
    CompiledWeight,
    FaultMap,
    FaultMapSide,
    GroupingConfig,
    Path,
    bitmap_from_column_sums,
    column_free_counts,
    column_sa0_counts,
    significance_vector,
)
from exceptions import TablaExcedidaError

logger = logging.getLogger(__name__)

MAX_ENTRADAS_DEFAULT = 2 ** 16


class Achievable(NamedTuple):
    cell_sum: int
    witness: Bitmap


class AchievableSide:
    """Valor alcanzable -> (mínima suma de celdas, testigo). Inmutable."""

    __slots__ = ("entries", "values")

    def __init__(self, entries: Dict[int, Achievable]):
        ordenados = dict(sorted(entries.items()))
        self.entries: Mapping[int, Achievable] = MappingProxyType(ordenados)
        self.values: Tuple[int, ...] = tuple(ordenados)

    def __len__(self):
        return len(self.values)

    def __contains__(self, valor):
        return valor in self.entries

    def __repr__(self):
        return f"AchievableSide({len(self.values)} valores, [{self.values[0]}, {self.values[-1]}])"


def achievable_values(side_faults: FaultMapSide, config: GroupingConfig,
                      budget: int = MAX_ENTRADAS_DEFAULT) -> AchievableSide:
    """
    Composición por significancia de las contribuciones alcanzables.

    Por cada significancia k con m celdas libres la contribución es j * s_k,
    j en [0, m(L-1)], con suma de celdas j. Entre las combinaciones que dan
    el mismo valor se queda la de menor suma y, a igual suma, la tupla de
    sumas por columna menor, que llenando cada columna desde la última fila
    es también el bitmap lexicográficamente menor.

    Raises:
        TablaExcedidaError: si L^(c*r) supera `budget`
    """
    requerido = config.levels ** config.cells_per_side
    if requerido > budget:
        raise TablaExcedidaError(requerido, budget)

    s = significance_vector(config)
    libres_por_columna = column_free_counts(side_faults)
    offset = (config.levels - 1) * sum(s_k * int(n) for s_k, n in zip(s, column_sa0_counts(side_faults)))

    estados = {offset: (0, ())}
    for s_k, m in zip(s, libres_por_columna):
        tope = int(m) * (config.levels - 1)
        nuevos = {}
        for valor, (suma, columnas) in estados.items():
            for j in range(tope + 1):
                clave = valor + j * s_k
                candidato = (suma + j, columnas + (j,))
                actual = nuevos.get(clave)
                if actual is None or candidato < actual:
                    nuevos[clave] = candidato
        estados = nuevos

    libres = side_faults.free_mask
    return AchievableSide({
        valor: Achievable(suma, bitmap_from_column_sums(columnas, libres, config))
        for valor, (suma, columnas) in estados.items()
    })


@dataclasses.dataclass(frozen=True)
class DecompositionTable:
    pos: AchievableSide
    neg: AchievableSide

    def representable_values(self) -> Tuple[int, ...]:
        """Diferencias a - b de todos los pares, ordenadas y sin repetidos."""
        return tuple(sorted({a - b for a in self.pos.values for b in self.neg.values}))


def build_table(faults: FaultMap, config: GroupingConfig,
                budget: int = MAX_ENTRADAS_DEFAULT) -> DecompositionTable:
    faults.validate(config)
    return DecompositionTable(
        pos=achievable_values(faults.pos, config, budget),
        neg=achievable_values(faults.neg, config, budget),
    )


def _mejor_par(w: int, table: DecompositionTable) -> Optional[Tuple[Achievable, Achievable]]:
    mejor = None
    mejor_total = None
    for a in table.pos.values:
        entrada_neg = table.neg.entries.get(a - w)
        if entrada_neg is None:
            continue
        entrada_pos = table.pos.entries[a]
        total = entrada_pos.cell_sum + entrada_neg.cell_sum
        if mejor_total is None or total < mejor_total:
            mejor, mejor_total = (entrada_pos, entrada_neg), total
        elif total == mejor_total:
            actual = mejor[0].witness.flat() + mejor[1].witness.flat()
            if entrada_pos.witness.flat() + entrada_neg.witness.flat() < actual:
                mejor = (entrada_pos, entrada_neg)
    return mejor


def fawd_table_lookup(w: int, table: DecompositionTable) -> Optional[CompiledWeight]:
    """Par exacto más ralo sobre la diagonal a - b = w; None si w no es representable."""
    w = int(w)
    par = _mejor_par(w, table)
    if par is None:
        return None
    return CompiledWeight(par[0].witness, par[1].witness, w, 0, Path.TABLE_FAWD)


def _distancia_minima(w: int, table: DecompositionTable) -> int:
    """Barrido de dos punteros sobre los valores ordenados de cada lado."""
    negativos = table.neg.values
    j = 0
    mejor = None
    for a in table.pos.values:
        objetivo = a - w
        while j + 1 < len(negativos) and negativos[j + 1] <= objetivo:
            j += 1
        for b in negativos[j:j + 2]:
            distancia = abs(objetivo - b)
            if mejor is None or distancia < mejor:
                mejor = distancia
    return mejor


def cvm_table_lookup(w: int, table: DecompositionTable) -> CompiledWeight:
    """Par que minimiza |w - (a - b)|, con el mismo desempate que el camino ILP."""
    w = int(w)
    t = _distancia_minima(w, table)
    elegido = None
    for realizado in sorted({w - t, w + t}):
        par = _mejor_par(realizado, table)
        if par is None:
            continue
        clave = (par[0].cell_sum + par[1].cell_sum, par[0].witness.flat() + par[1].witness.flat())
        if elegido is None or clave < elegido[0]:
            elegido = (clave, par, realizado)
    _, (entrada_pos, entrada_neg), realizado = elegido
    return CompiledWeight(entrada_pos.witness, entrada_neg.witness, realizado, w - realizado, Path.TABLE_CVM)


class TableCache:
    """
    Tablas por clave de mapa de fallas, construidas una sola vez.

    Varios hilos pueden pedir la misma clave; sólo uno la construye y el
    resto espera.
    """

    def __init__(self, config: GroupingConfig, budget: int = MAX_ENTRADAS_DEFAULT):
        self.config = config
        self.budget = budget
        self._lock = threading.Lock()
        self._tablas: Dict[bytes, DecompositionTable] = {}
        self._en_construccion: Dict[bytes, threading.Event] = {}
        self._hits = 0
        self._misses = 0

    def get(self, faults: FaultMap) -> DecompositionTable:
        clave = faults.key
        with self._lock:
            tabla = self._tablas.get(clave)
            if tabla is not None:
                self._hits += 1
                return tabla
            evento = self._en_construccion.get(clave)
            constructor = evento is None
            if constructor:
                evento = threading.Event()
                self._en_construccion[clave] = evento
                self._misses += 1

        if not constructor:
            evento.wait()
            return self.get(faults)

        try:
            tabla = build_table(faults, self.config, self.budget)
            with self._lock:
                self._tablas[clave] = tabla
            logger.debug(f"Tabla construida: {len(tabla.pos)}x{len(tabla.neg)} valores, "
                         f"{faults.fault_count} fallas")
        finally:
            with self._lock:
                del self._en_construccion[clave]
            evento.set()
        return tabla

    def stats(self) -> Dict[str, int]:
        with self._lock:
            return {'hits': self._hits, 'misses': self._misses, 'size': len(self._tablas)}

    def __len__(self):
        with self._lock:
            return len(self._tablas)
