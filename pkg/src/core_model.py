"""
Modelo de celdas para el agrupamiento híbrido fila-columna.

Un peso entero con signo se almacena en dos grupos de celdas (arreglo
positivo y negativo). Cada grupo es una matriz c x r: el eje 1 recorre las
significancias de MSB a LSB (s_k = L^(c-k)) y el eje 2 las r filas que
comparten la misma entrada.

Polaridad de las fallas (fija, no depende de la intuición de resistencia):
    SA0 -> la celda queda clavada en L-1
    SA1 -> la celda queda clavada en 0

Todos los tipos son inmutables; las operaciones son funciones puras.
"""

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence, Tuple

import numpy as np

from exceptions import (
    BitmapInvalidoError,
    ConfiguracionAgrupamientoError,
    FaultMapInvalidoError,
    ShapeMismatchError,
)

INT64_MAX = 2 ** 63 - 1
INT64_MIN = -(2 ** 63)

# Códigos de celda usados en los archivos y en FaultMap.codes
CODIGO_LIBRE = 0
CODIGO_SA0 = 1
CODIGO_SA1 = 2


@dataclass(frozen=True)
class GroupingConfig:
    """Layout de un grupo de celdas: c columnas, r filas, L niveles por celda."""

    columns: int
    rows: int
    levels: int

    def __post_init__(self):
        c, r, niveles = self.columns, self.rows, self.levels
        for nombre, valor in (("columns", c), ("rows", r), ("levels", niveles)):
            if not isinstance(valor, (int, np.integer)) or isinstance(valor, bool):
                raise ConfiguracionAgrupamientoError(c, r, niveles, f"{nombre} debe ser entero")
        if c < 1 or r < 1:
            raise ConfiguracionAgrupamientoError(c, r, niveles, "se requiere c >= 1 y r >= 1")
        if niveles < 2:
            raise ConfiguracionAgrupamientoError(c, r, niveles, "se requiere L >= 2")
        if niveles ** c * r > INT64_MAX:
            raise ConfiguracionAgrupamientoError(c, r, niveles, "L^c * r desborda 64 bits")

    @classmethod
    def from_layout(cls, layout: str, levels: int) -> "GroupingConfig":
        """Construye la configuración desde un token `R{r}C{c}`."""
        token = layout.strip().upper()
        if not token.startswith("R") or "C" not in token:
            raise ConfiguracionAgrupamientoError(0, 0, levels, f"layout '{layout}' no tiene forma R{{r}}C{{c}}")
        filas_txt, columnas_txt = token[1:].split("C", 1)
        if not filas_txt.isdigit() or not columnas_txt.isdigit():
            raise ConfiguracionAgrupamientoError(0, 0, levels, f"layout '{layout}' no tiene forma R{{r}}C{{c}}")
        return cls(columns=int(columnas_txt), rows=int(filas_txt), levels=int(levels))

    @property
    def layout(self) -> str:
        return f"R{self.rows}C{self.columns}"

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.columns, self.rows)

    @property
    def cells_per_side(self) -> int:
        return self.columns * self.rows

    @property
    def cells_per_weight(self) -> int:
        return 2 * self.columns * self.rows

    @property
    def ideal_max(self) -> int:
        return (self.levels ** self.columns - 1) * self.rows

    @property
    def ideal_min(self) -> int:
        return -self.ideal_max

    @property
    def ideal_width(self) -> int:
        return 2 * self.ideal_max

    def __str__(self):
        return f"{self.layout}/L={self.levels}"


def significance_vector(config: GroupingConfig) -> Tuple[int, ...]:
    """Devuelve [L^(c-1), ..., L, 1]."""
    return tuple(config.levels ** (config.columns - k) for k in range(1, config.columns + 1))


def _vector_significancia_np(config: GroupingConfig) -> np.ndarray:
    return np.array(significance_vector(config), dtype=np.int64)


def _verificar_forma(matriz: np.ndarray, config: GroupingConfig, contexto: str):
    if matriz.shape != config.shape:
        raise ShapeMismatchError(config.shape, tuple(matriz.shape), contexto)


def _solo_lectura(valores) -> np.ndarray:
    arr = np.array(valores, dtype=np.int64)
    arr.setflags(write=False)
    return arr


class Bitmap:
    """
    Valores programados de un grupo de celdas (un lado del arreglo).

    `values` es una matriz c x r de enteros, significancia primero (MSB arriba).
    """

    __slots__ = ("values",)

    def __init__(self, values):
        arr = _solo_lectura(values)
        if arr.ndim != 2:
            raise ShapeMismatchError(("c", "r"), tuple(arr.shape), "bitmap")
        self.values = arr

    @classmethod
    def zeros(cls, config: GroupingConfig) -> "Bitmap":
        return cls(np.zeros(config.shape, dtype=np.int64))

    @classmethod
    def full(cls, config: GroupingConfig) -> "Bitmap":
        """Todas las celdas en L-1."""
        return cls(np.full(config.shape, config.levels - 1, dtype=np.int64))

    @classmethod
    def from_flat(cls, valores: Sequence[int], config: GroupingConfig) -> "Bitmap":
        arr = np.asarray(valores, dtype=np.int64)
        if arr.size != config.cells_per_side:
            raise ShapeMismatchError((config.cells_per_side,), tuple(arr.shape), "bitmap plano")
        return cls(arr.reshape(config.shape))

    def validate(self, config: GroupingConfig) -> "Bitmap":
        _verificar_forma(self.values, config, "bitmap")
        if self.values.size and (self.values.min() < 0 or self.values.max() > config.levels - 1):
            raise BitmapInvalidoError(config.levels, int(self.values.min()), int(self.values.max()))
        return self

    @property
    def cell_sum(self) -> int:
        return int(self.values.sum())

    def flat(self) -> Tuple[int, ...]:
        return tuple(int(v) for v in self.values.ravel())

    def __eq__(self, otro):
        if not isinstance(otro, Bitmap):
            return NotImplemented
        return self.values.shape == otro.values.shape and bool(np.array_equal(self.values, otro.values))

    def __hash__(self):
        return hash((self.values.shape, self.values.tobytes()))

    def __repr__(self):
        return f"Bitmap({self.values.tolist()})"


class FaultMapSide:
    """Indicadores SA0/SA1 de un lado (matrices binarias c x r, disjuntas)."""

    __slots__ = ("sa0", "sa1")

    def __init__(self, sa0, sa1, _validar: bool = True):
        sa0_arr = np.array(sa0, dtype=np.int64)
        sa1_arr = np.array(sa1, dtype=np.int64)
        if _validar:
            if sa0_arr.shape != sa1_arr.shape or sa0_arr.ndim != 2:
                raise ShapeMismatchError(tuple(sa0_arr.shape), tuple(sa1_arr.shape), "indicadores SA0/SA1")
            if not np.isin(sa0_arr, (0, 1)).all() or not np.isin(sa1_arr, (0, 1)).all():
                raise FaultMapInvalidoError("los indicadores deben ser 0 o 1")
            if np.any(sa0_arr & sa1_arr):
                raise FaultMapInvalidoError("una celda no puede ser SA0 y SA1 a la vez")
        sa0_arr.setflags(write=False)
        sa1_arr.setflags(write=False)
        self.sa0 = sa0_arr
        self.sa1 = sa1_arr

    @classmethod
    def empty(cls, config: GroupingConfig) -> "FaultMapSide":
        ceros = np.zeros(config.shape, dtype=np.int64)
        return cls(ceros, ceros, _validar=False)

    @classmethod
    def from_codes(cls, codigos, config: GroupingConfig) -> "FaultMapSide":
        arr = np.asarray(codigos).reshape(config.shape)
        return cls(arr == CODIGO_SA0, arr == CODIGO_SA1, _validar=False)

    @property
    def shape(self) -> Tuple[int, int]:
        return tuple(self.sa0.shape)

    @property
    def free_mask(self) -> np.ndarray:
        return (1 - self.sa0 - self.sa1).astype(bool)

    @property
    def codes(self) -> np.ndarray:
        return (self.sa0 * CODIGO_SA0 + self.sa1 * CODIGO_SA1).astype(np.int8)

    @property
    def fault_count(self) -> int:
        return int(self.sa0.sum() + self.sa1.sum())

    def __eq__(self, otro):
        if not isinstance(otro, FaultMapSide):
            return NotImplemented
        return bool(np.array_equal(self.sa0, otro.sa0) and np.array_equal(self.sa1, otro.sa1))

    def __hash__(self):
        return hash(self.codes.tobytes())

    def __repr__(self):
        return f"FaultMapSide(sa0={self.sa0.tolist()}, sa1={self.sa1.tolist()})"


class FaultMap:
    """Mapa de fallas completo de un peso: lados positivo y negativo."""

    __slots__ = ("pos", "neg", "_codes")

    def __init__(self, pos: FaultMapSide, neg: FaultMapSide):
        if pos.shape != neg.shape:
            raise ShapeMismatchError(pos.shape, neg.shape, "mapa de fallas negativo")
        self.pos = pos
        self.neg = neg
        codigos = np.concatenate([pos.codes.ravel(), neg.codes.ravel()])
        codigos.setflags(write=False)
        self._codes = codigos

    @classmethod
    def fault_free(cls, config: GroupingConfig) -> "FaultMap":
        vacio = FaultMapSide.empty(config)
        return cls(vacio, vacio)

    @classmethod
    def from_codes(cls, codigos: Iterable[int], config: GroupingConfig) -> "FaultMap":
        """
        Construye el mapa desde 2*c*r códigos (0 libre, 1 SA0, 2 SA1).

        Orden: lado (pos, neg), luego significancia (MSB primero), luego fila.
        """
        arr = np.asarray(list(codigos) if not isinstance(codigos, np.ndarray) else codigos)
        if arr.size != config.cells_per_weight:
            raise ShapeMismatchError((config.cells_per_weight,), tuple(arr.shape), "códigos de falla")
        if not np.isin(arr, (CODIGO_LIBRE, CODIGO_SA0, CODIGO_SA1)).all():
            raise FaultMapInvalidoError("los códigos deben estar en {0, 1, 2}")
        arr = arr.reshape(2, config.columns, config.rows)
        return cls(FaultMapSide.from_codes(arr[0], config), FaultMapSide.from_codes(arr[1], config))

    @property
    def shape(self) -> Tuple[int, int]:
        return self.pos.shape

    @property
    def codes(self) -> np.ndarray:
        return self._codes

    @property
    def key(self) -> bytes:
        return self._codes.tobytes()

    @property
    def fault_count(self) -> int:
        return self.pos.fault_count + self.neg.fault_count

    def validate(self, config: GroupingConfig) -> "FaultMap":
        if self.shape != config.shape:
            raise ShapeMismatchError(config.shape, self.shape, "mapa de fallas")
        return self

    def __eq__(self, otro):
        if not isinstance(otro, FaultMap):
            return NotImplemented
        return self.shape == otro.shape and self.key == otro.key

    def __hash__(self):
        return hash((self.shape, self.key))

    def __repr__(self):
        return f"FaultMap(codes={self._codes.tolist()})"


def decode(bitmap: Bitmap, config: GroupingConfig) -> int:
    """d(X) = s X 1: suma ponderada por significancia de todas las celdas."""
    _verificar_forma(bitmap.values, config, "bitmap")
    return int(_vector_significancia_np(config) @ bitmap.values.sum(axis=1))


def inject_faults(bitmap: Bitmap, side: FaultMapSide, config: GroupingConfig) -> Bitmap:
    """f(X) = (1 - F0 - F1) * X + (L-1) F0, elemento a elemento."""
    _verificar_forma(bitmap.values, config, "bitmap")
    _verificar_forma(side.sa0, config, "mapa de fallas")
    libres = 1 - side.sa0 - side.sa1
    return Bitmap(libres * bitmap.values + (config.levels - 1) * side.sa0)


def realized_weight(pos: Bitmap, neg: Bitmap, faults: FaultMap, config: GroupingConfig) -> int:
    """w~ = d(f(X+)) - d(f(X-))."""
    return (decode(inject_faults(pos, faults.pos, config), config)
            - decode(inject_faults(neg, faults.neg, config), config))


def fill_column(suma: int, libres: Sequence[bool], niveles: int) -> list:
    """
    Reparte `suma` entre las celdas libres de una columna, llenando desde la
    última fila hacia la primera. Es la disposición lexicográficamente menor
    para esa suma; las celdas clavadas quedan en 0.
    """
    valores = [0] * len(libres)
    restante = suma
    for fila in range(len(libres) - 1, -1, -1):
        if restante <= 0:
            break
        if libres[fila]:
            valor = min(restante, niveles - 1)
            valores[fila] = valor
            restante -= valor
    if restante > 0:
        raise BitmapInvalidoError(niveles, 0, suma)
    return valores


def bitmap_from_column_sums(sumas: Sequence[int], libres: np.ndarray, config: GroupingConfig) -> Bitmap:
    """Construye el bitmap canónico a partir de la suma por columna de celdas libres."""
    filas = [fill_column(int(j), libres[k], config.levels) for k, j in enumerate(sumas)]
    return Bitmap(filas)


def naive_decomposition(w: int, config: GroupingConfig) -> Tuple[Bitmap, Bitmap]:
    """
    Mapeo sin conocimiento de fallas: |w| en base L (columnas repartidas entre
    filas) en un solo lado, el otro en cero. Recorta al rango ideal.
    """
    valor = min(abs(int(w)), config.ideal_max)
    capacidad = config.rows * (config.levels - 1)
    sumas = []
    for s_k in significance_vector(config):
        j = min(valor // s_k, capacidad)
        sumas.append(j)
        valor -= j * s_k
    todas_libres = np.ones(config.shape, dtype=bool)
    escrito = bitmap_from_column_sums(sumas, todas_libres, config)
    cero = Bitmap.zeros(config)
    return (escrito, cero) if w >= 0 else (cero, escrito)


def effective_bits(config: GroupingConfig) -> float:
    """Precisión efectiva log2(niveles representables) de un lado."""
    return math.log2(config.ideal_max + 1)


def column_free_counts(side: FaultMapSide) -> np.ndarray:
    """Cantidad de celdas libres por significancia."""
    return side.free_mask.sum(axis=1)


def column_sa0_counts(side: FaultMapSide) -> np.ndarray:
    """Cantidad de celdas SA0 por significancia."""
    return side.sa0.sum(axis=1)


class Path(str, Enum):
    """Camino del pipeline que produjo un peso compilado."""

    CLAMP = "Clamp"
    TABLE_FAWD = "TableFawd"
    ILP_FAWD = "IlpFawd"
    TABLE_CVM = "TableCvm"
    ILP_CVM = "IlpCvm"

    @property
    def is_fawd(self) -> bool:
        return self in (Path.TABLE_FAWD, Path.ILP_FAWD)

    @property
    def is_cvm(self) -> bool:
        return self in (Path.TABLE_CVM, Path.ILP_CVM)


@dataclass(frozen=True)
class CompiledWeight:
    """Par de bitmaps resuelto para un peso (celdas clavadas en 0)."""

    pos: Bitmap
    neg: Bitmap
    realized: int
    residual: int
    path: Path

    @property
    def cell_sum(self) -> int:
        return self.pos.cell_sum + self.neg.cell_sum

    def flat(self) -> Tuple[int, ...]:
        """Bitmap concatenado (pos, luego neg) en el orden de los archivos."""
        return self.pos.flat() + self.neg.flat()
