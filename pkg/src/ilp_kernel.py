"""
Solver exacto para los ILP chicos que aparecen por peso y constructores
de los modelos FAWD y CVM.

- Modelos con una sola igualdad y sin desigualdades (forma FAWD): programación
  dinámica sobre las sumas parciales, variable por variable en orden de
  significancia.
- Resto: branch-and-bound en profundidad con cota de relajación LP. El LP
  se resuelve con un simplex entero sin fracciones (pivoteo de Bareiss), así
  que ninguna restricción se acepta con aritmética de punto flotante.

Desempate canónico: mínima suma de celdas y luego el bitmap concatenado
(pos, neg) lexicográficamente menor.
"""

import bisect
import logging
import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

import numpy as np

from core_model import (
    Bitmap,
    CompiledWeight,
    FaultMap,
    GroupingConfig,
    Path,
    realized_weight,
    significance_vector,
)
from exceptions import LimiteSolverExcedidoError, ModeloILPInvalidoError
from range_analysis import stuck_offset

logger = logging.getLogger(__name__)

MAX_VARIABLES_DEFAULT = 64
MAX_NODOS_DEFAULT = 200000

Restriccion = Tuple[Tuple[int, ...], int]


class IlpStatus(str, Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"


def _es_entero(valor) -> bool:
    return isinstance(valor, (int, np.integer)) and not isinstance(valor, bool)


@dataclass(frozen=True)
class IlpModel:
    """
    min objective . x  sujeto a  bounds, equalities (a . x = b) e
    inequalities (a . x <= b). Todo entero y acotado.
    """

    bounds: Tuple[Tuple[int, int], ...]
    objective: Tuple[int, ...]
    equalities: Tuple[Restriccion, ...] = ()
    inequalities: Tuple[Restriccion, ...] = ()

    @property
    def num_variables(self) -> int:
        return len(self.bounds)

    def validate(self) -> "IlpModel":
        n = self.num_variables
        if len(self.objective) != n:
            raise ModeloILPInvalidoError(f"objetivo con {len(self.objective)} coeficientes para {n} variables")
        if not all(_es_entero(c) for c in self.objective):
            raise ModeloILPInvalidoError("coeficientes del objetivo no enteros")
        for j, cota in enumerate(self.bounds):
            if len(cota) != 2 or not all(_es_entero(v) for v in cota):
                raise ModeloILPInvalidoError(f"cota de la variable {j} no entera o infinita: {cota}")
            if cota[0] > cota[1]:
                raise ModeloILPInvalidoError(f"cota de la variable {j} vacía: {cota}")
        for tipo, restricciones in (("igualdad", self.equalities), ("desigualdad", self.inequalities)):
            for coefs, constante in restricciones:
                if len(coefs) != n:
                    raise ModeloILPInvalidoError(f"{tipo} con {len(coefs)} coeficientes para {n} variables")
                if not _es_entero(constante) or not all(_es_entero(a) for a in coefs):
                    raise ModeloILPInvalidoError(f"{tipo} con coeficientes no enteros")
        return self

    def evaluate(self, assignment: Sequence[int]) -> int:
        return sum(int(c) * int(x) for c, x in zip(self.objective, assignment))

    def is_feasible(self, assignment: Sequence[int]) -> bool:
        if len(assignment) != self.num_variables:
            return False
        if any(not lo <= x <= hi for x, (lo, hi) in zip(assignment, self.bounds)):
            return False
        for coefs, constante in self.equalities:
            if sum(a * x for a, x in zip(coefs, assignment)) != constante:
                return False
        for coefs, constante in self.inequalities:
            if sum(a * x for a, x in zip(coefs, assignment)) > constante:
                return False
        return True


@dataclass(frozen=True)
class IlpSolution:
    status: IlpStatus
    assignment: Optional[Tuple[int, ...]] = None
    objective_value: Optional[int] = None
    nodes: int = 0

    @property
    def is_optimal(self) -> bool:
        return self.status is IlpStatus.OPTIMAL


INFACTIBLE = IlpSolution(IlpStatus.INFEASIBLE)


def solve(model: IlpModel, max_variables: int = MAX_VARIABLES_DEFAULT,
          max_nodes: int = MAX_NODOS_DEFAULT) -> IlpSolution:
    """
    Resuelve el modelo de forma exacta y determinista.

    Raises:
        LimiteSolverExcedidoError: más variables que `max_variables` o más
            nodos que `max_nodes`
        ModeloILPInvalidoError: modelo mal formado
    """
    model.validate()
    if model.num_variables > max_variables:
        raise LimiteSolverExcedidoError("variables", model.num_variables, max_variables)
    if len(model.equalities) == 1 and not model.inequalities:
        return _resolver_dp(model)
    return _branch_and_bound(model, max_nodes)


# ============================================================================
# PROGRAMACIÓN DINÁMICA (una igualdad)
# ============================================================================

def _resolver_dp(model: IlpModel) -> IlpSolution:
    coefs, constante = model.equalities[0]
    n = model.num_variables

    # Rango alcanzable por las variables restantes, para podar estados
    resto_min = [0] * (n + 1)
    resto_max = [0] * (n + 1)
    for j in range(n - 1, -1, -1):
        lo, hi = model.bounds[j]
        extremos = (coefs[j] * lo, coefs[j] * hi)
        resto_min[j] = resto_min[j + 1] + min(extremos)
        resto_max[j] = resto_max[j + 1] + max(extremos)

    # suma parcial -> (costo, asignación parcial); el mínimo de la tupla es el canónico
    estados = {0: (0, ())}
    for j, (lo, hi) in enumerate(model.bounds):
        a, c = int(coefs[j]), int(model.objective[j])
        nuevos = {}
        for suma, (costo, parcial) in estados.items():
            for v in range(lo, hi + 1):
                clave = suma + a * v
                faltante = constante - clave
                if not resto_min[j + 1] <= faltante <= resto_max[j + 1]:
                    continue
                candidato = (costo + c * v, parcial + (v,))
                actual = nuevos.get(clave)
                if actual is None or candidato < actual:
                    nuevos[clave] = candidato
        estados = nuevos
        if not estados:
            return INFACTIBLE

    mejor = estados.get(constante)
    if mejor is None:
        return INFACTIBLE
    return IlpSolution(IlpStatus.OPTIMAL, mejor[1], mejor[0], 0)


def reachable_sums(model: IlpModel) -> Tuple[int, ...]:
    """
    Valores ordenados que toma el lado izquierdo de la única igualdad del
    modelo dentro de las cotas, sin importar la constante.
    """
    model.validate()
    if len(model.equalities) != 1:
        raise ModeloILPInvalidoError(f"se esperaba una igualdad, hay {len(model.equalities)}")
    coefs, _ = model.equalities[0]
    sumas = {0}
    for a, (lo, hi) in zip(coefs, model.bounds):
        sumas = {s + int(a) * v for s in sumas for v in range(lo, hi + 1)}
    return tuple(sorted(sumas))


def _distancia_minima(objetivo: int, sumas: Sequence[int]) -> int:
    i = bisect.bisect_left(sumas, objetivo)
    return min(abs(objetivo - sumas[k]) for k in (i - 1, i) if 0 <= k < len(sumas))


# ============================================================================
# SIMPLEX ENTERO (Bareiss)
# ============================================================================

class _TablaSimplex:
    """
    Tableau entero: el valor real de cada entrada es entrada / denominador.
    La última columna es el lado derecho.
    """

    def __init__(self, filas: List[List[int]], rhs: List[int]):
        m = len(filas)
        self.n_reales = len(filas[0]) if filas else 0
        self.filas = [
            list(fila) + [1 if k == i else 0 for k in range(m)] + [b]
            for i, (fila, b) in enumerate(zip(filas, rhs))
        ]
        self.base = [self.n_reales + i for i in range(m)]
        self.denominador = 1
        self.ancho = self.n_reales + m + 1

    def fila_objetivo(self, costos: Sequence[int]) -> List[int]:
        """Costos reducidos escalados por el denominador para la base actual."""
        ancho = self.ancho
        d = self.denominador
        objetivo = [(costos[j] if j < len(costos) else 0) * d for j in range(ancho - 1)] + [0]
        for i, fila in enumerate(self.filas):
            cb = costos[self.base[i]] if self.base[i] < len(costos) else 0
            if cb:
                objetivo = [x - cb * y for x, y in zip(objetivo, fila)]
        return objetivo

    def pivotear(self, r: int, s: int, objetivo: List[int]):
        fila_p = self.filas[r]
        p = fila_p[s]
        d = self.denominador
        for i, fila in enumerate(self.filas):
            if i != r:
                f = fila[s]
                self.filas[i] = [(x * p - f * y) // d for x, y in zip(fila, fila_p)]
        f = objetivo[s]
        objetivo[:] = [(x * p - f * y) // d for x, y in zip(objetivo, fila_p)]
        self.base[r] = s
        self.denominador = p
        if p < 0:
            self.filas = [[-x for x in fila] for fila in self.filas]
            objetivo[:] = [-x for x in objetivo]
            self.denominador = -p

    def optimizar(self, objetivo: List[int], permitidas: range) -> bool:
        """Regla de Bland. Devuelve False si el LP es no acotado."""
        while True:
            s = next((j for j in permitidas if objetivo[j] < 0), None)
            if s is None:
                return True
            r = None
            for i, fila in enumerate(self.filas):
                a = fila[s]
                if a <= 0:
                    continue
                if r is None:
                    r = i
                    continue
                izq = fila[-1] * self.filas[r][s]
                der = self.filas[r][-1] * a
                if izq < der or (izq == der and self.base[i] < self.base[r]):
                    r = i
            if r is None:
                return False
            self.pivotear(r, s, objetivo)

    def retirar_artificiales(self, objetivo: List[int]):
        """Saca de la base las artificiales en cero; descarta filas redundantes."""
        i = 0
        while i < len(self.filas):
            if self.base[i] < self.n_reales:
                i += 1
                continue
            fila = self.filas[i]
            s = next((j for j in range(self.n_reales) if fila[j] != 0), None)
            if s is None:
                del self.filas[i]
                del self.base[i]
                continue
            self.pivotear(i, s, objetivo)
            i += 1

    def valores(self) -> List[Fraction]:
        x = [Fraction(0)] * self.n_reales
        for i, columna in enumerate(self.base):
            if columna < self.n_reales:
                x[columna] = Fraction(self.filas[i][-1], self.denominador)
        return x


def _relajacion_lp(model: IlpModel, lo: Sequence[int], hi: Sequence[int]):
    """
    Relajación LP del nodo con cotas [lo, hi].

    Returns:
        (valor, x) con Fractions, o None si el LP es infactible.
    """
    n = model.num_variables
    libres = [j for j in range(n) if lo[j] < hi[j]]
    nf, ni = len(libres), len(model.inequalities)
    constante = sum(c * l for c, l in zip(model.objective, lo))

    filas, rhs = [], []
    for coefs, b in model.equalities:
        filas.append([coefs[j] for j in libres] + [0] * (ni + nf))
        rhs.append(b - sum(a * l for a, l in zip(coefs, lo)))
    for q, (coefs, b) in enumerate(model.inequalities):
        holgura = [0] * ni
        holgura[q] = 1
        filas.append([coefs[j] for j in libres] + holgura + [0] * nf)
        rhs.append(b - sum(a * l for a, l in zip(coefs, lo)))
    for t, j in enumerate(libres):
        fila = [0] * (nf + ni + nf)
        fila[t] = 1
        fila[nf + ni + t] = 1
        filas.append(fila)
        rhs.append(hi[j] - lo[j])

    if not filas:
        return Fraction(constante), [Fraction(v) for v in lo]

    for i in range(len(filas)):
        if rhs[i] < 0:
            filas[i] = [-a for a in filas[i]]
            rhs[i] = -rhs[i]

    tabla = _TablaSimplex(filas, rhs)
    m = len(filas)

    # Fase 1: minimizar la suma de artificiales
    objetivo = tabla.fila_objetivo([0] * tabla.n_reales + [1] * m)
    tabla.optimizar(objetivo, range(tabla.n_reales + m))
    if objetivo[-1] < 0:
        return None
    tabla.retirar_artificiales(objetivo)

    # Fase 2
    costos = [model.objective[j] for j in libres] + [0] * (ni + nf)
    objetivo = tabla.fila_objetivo(costos)
    if not tabla.optimizar(objetivo, range(tabla.n_reales)):
        raise ModeloILPInvalidoError("relajación LP no acotada")

    y = tabla.valores()
    x = [Fraction(v) for v in lo]
    for t, j in enumerate(libres):
        x[j] += y[t]
    valor = constante + Fraction(-objetivo[-1], tabla.denominador)
    return valor, x


def _branch_and_bound(model: IlpModel, max_nodos: int) -> IlpSolution:
    mejor_valor = None
    mejor_x = None
    nodos = 0
    pila = [(tuple(b[0] for b in model.bounds), tuple(b[1] for b in model.bounds))]

    while pila:
        lo, hi = pila.pop()
        nodos += 1
        if nodos > max_nodos:
            raise LimiteSolverExcedidoError("nodos", nodos, max_nodos)

        relajacion = _relajacion_lp(model, lo, hi)
        if relajacion is None:
            continue
        valor, x = relajacion
        if mejor_valor is not None and math.ceil(valor) >= mejor_valor:
            continue

        j = next((k for k, v in enumerate(x) if v.denominator != 1), None)
        if j is None:
            mejor_valor = int(valor)
            mejor_x = tuple(int(v) for v in x)
            continue

        piso = math.floor(x[j])
        hi_abajo = hi[:j] + (piso,) + hi[j + 1:]
        lo_arriba = lo[:j] + (piso + 1,) + lo[j + 1:]
        pila.append((lo_arriba, hi))
        pila.append((lo, hi_abajo))

    logger.debug(f"Branch-and-bound: {nodos} nodos, óptimo={mejor_valor}")
    if mejor_x is None:
        return IlpSolution(IlpStatus.INFEASIBLE, nodes=nodos)
    return IlpSolution(IlpStatus.OPTIMAL, mejor_x, mejor_valor, nodos)


# ============================================================================
# MODELOS FAWD / CVM
# ============================================================================

@dataclass(frozen=True)
class FreeCellIndex:
    """Correspondencia variable <-> (lado, significancia, fila) de las celdas libres."""

    cells: Tuple[Tuple[int, int, int], ...]
    coefficients: Tuple[int, ...]

    @classmethod
    def from_faults(cls, faults: FaultMap, config: GroupingConfig) -> "FreeCellIndex":
        faults.validate(config)
        s = significance_vector(config)
        celdas, coefs = [], []
        for lado, (side, signo) in enumerate(((faults.pos, 1), (faults.neg, -1))):
            libres = side.free_mask
            for k in range(config.columns):
                for j in range(config.rows):
                    if libres[k, j]:
                        celdas.append((lado, k, j))
                        coefs.append(signo * s[k])
        return cls(tuple(celdas), tuple(coefs))

    def __len__(self):
        return len(self.cells)

    def to_bitmaps(self, assignment: Sequence[int], config: GroupingConfig) -> Tuple[Bitmap, Bitmap]:
        valores = np.zeros((2,) + config.shape, dtype=np.int64)
        for (lado, k, j), v in zip(self.cells, assignment):
            valores[lado, k, j] = v
        return Bitmap(valores[0]), Bitmap(valores[1])


def build_fawd_model(w: int, faults: FaultMap, config: GroupingConfig,
                     indice: Optional[FreeCellIndex] = None) -> IlpModel:
    """min sum(x)  s.a.  sum(s_k x+) - sum(s_k x-) = w - C,  0 <= x <= L-1."""
    indice = indice or FreeCellIndex.from_faults(faults, config)
    n = len(indice)
    return IlpModel(
        bounds=((0, config.levels - 1),) * n,
        objective=(1,) * n,
        equalities=((indice.coefficients, int(w) - stuck_offset(faults, config)),),
    )


def build_cvm_model(w: int, faults: FaultMap, config: GroupingConfig,
                    indice: Optional[FreeCellIndex] = None) -> IlpModel:
    """
    min t  s.a.  -t <= w - w~ <= t.

    La cota de t es el ancho ideal más |w|, así el modelo es factible aun
    para pesos fuera del rango ideal.
    """
    indice = indice or FreeCellIndex.from_faults(faults, config)
    n = len(indice)
    w = int(w)
    offset = stuck_offset(faults, config)
    coefs = indice.coefficients
    return IlpModel(
        bounds=((0, config.levels - 1),) * n + ((0, config.ideal_width + abs(w)),),
        objective=(0,) * n + (1,),
        inequalities=(
            (tuple(-a for a in coefs) + (-1,), offset - w),
            (coefs + (-1,), w - offset),
        ),
    )


def fawd_ilp(w: int, faults: FaultMap, config: GroupingConfig,
             max_variables: int = MAX_VARIABLES_DEFAULT,
             max_nodes: int = MAX_NODOS_DEFAULT) -> Optional[CompiledWeight]:
    """Descomposición exacta más rala, o None si w no es representable."""
    indice = FreeCellIndex.from_faults(faults, config)
    solucion = solve(build_fawd_model(w, faults, config, indice), max_variables, max_nodes)
    if not solucion.is_optimal:
        return None
    pos, neg = indice.to_bitmaps(solucion.assignment, config)
    realizado = realized_weight(pos, neg, faults, config)
    return CompiledWeight(pos, neg, realizado, int(w) - realizado, Path.ILP_FAWD)


def cvm_ilp(w: int, faults: FaultMap, config: GroupingConfig,
            max_variables: int = MAX_VARIABLES_DEFAULT,
            max_nodes: int = MAX_NODOS_DEFAULT) -> CompiledWeight:
    """
    Valor más cercano a w.

    t* sale de las sumas alcanzables de la igualdad FAWD (mismo óptimo que
    el modelo CVM, sin branch-and-bound); luego, entre los valores w - t* y
    w + t*, se elige el par con mínima suma de celdas y bitmap
    lexicográficamente menor.
    """
    w = int(w)
    indice = FreeCellIndex.from_faults(faults, config)
    if len(indice) > max_variables:
        raise LimiteSolverExcedidoError("variables", len(indice), max_variables)
    modelo_fawd = build_fawd_model(w, faults, config, indice)
    t = _distancia_minima(modelo_fawd.equalities[0][1], reachable_sums(modelo_fawd))

    mejor = None
    for objetivo in sorted({w - t, w + t}):
        solucion = solve(build_fawd_model(objetivo, faults, config, indice), max_variables, max_nodes)
        if not solucion.is_optimal:
            continue
        clave = (solucion.objective_value, solucion.assignment)
        if mejor is None or clave < mejor[0]:
            mejor = (clave, objetivo)

    (_, asignacion), realizado = mejor
    pos, neg = indice.to_bitmaps(asignacion, config)
    return CompiledWeight(pos, neg, realizado, w - realizado, Path.ILP_CVM)
