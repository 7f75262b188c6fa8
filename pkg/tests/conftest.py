"""
Fixtures y oráculos de fuerza bruta compartidos por los tests.

Los oráculos recorren todas las asignaciones de las celdas libres con
itertools.product; sólo sirven para layouts chicos. OraculoVectorizado hace
lo mismo con numpy y alcanza para L^(2cr) = 65536.
"""

import functools
import itertools
import logging
import sys
from pathlib import Path

import numpy as np
import pytest

# Agregar src al path
sys.path.insert(0, str(Path(__file__).resolve().parent.parent / 'src'))

from core_model import Bitmap, FaultMap, GroupingConfig, realized_weight, significance_vector  # noqa: E402

LAYOUTS_CHICOS = [
    GroupingConfig(columns=2, rows=1, levels=3),
    GroupingConfig(columns=2, rows=2, levels=2),
    GroupingConfig(columns=3, rows=1, levels=2),
]


def todos_los_mapas(config: GroupingConfig):
    """Los 3^(2cr) mapas de fallas del layout."""
    for codigos in itertools.product((0, 1, 2), repeat=config.cells_per_weight):
        yield FaultMap.from_codes(codigos, config)


def mapas_muestreados(config: GroupingConfig, cantidad: int, seed: int = 1234):
    rng = np.random.default_rng(seed)
    for _ in range(cantidad):
        yield FaultMap.from_codes(rng.integers(0, 3, config.cells_per_weight), config)


def asignaciones(faults: FaultMap, config: GroupingConfig):
    """
    Todos los pares (pos, neg) con las celdas clavadas en 0.

    Devuelve tuplas (realizado, suma_celdas, bitmap_plano, pos, neg).
    """
    libres = np.concatenate([faults.pos.free_mask.ravel(), faults.neg.free_mask.ravel()])
    posiciones = np.flatnonzero(libres)
    lado = config.cells_per_side
    for valores in itertools.product(range(config.levels), repeat=len(posiciones)):
        plano = np.zeros(config.cells_per_weight, dtype=np.int64)
        plano[posiciones] = valores
        pos = Bitmap.from_flat(plano[:lado], config)
        neg = Bitmap.from_flat(plano[lado:], config)
        yield realized_weight(pos, neg, faults, config), int(plano.sum()), tuple(int(v) for v in plano), pos, neg


def conjunto_fuerza_bruta(faults: FaultMap, config: GroupingConfig):
    return sorted({realizado for realizado, *_ in asignaciones(faults, config)})


def fawd_fuerza_bruta(w: int, faults: FaultMap, config: GroupingConfig):
    """(suma, bitmap plano) canónico para w, o None si no es representable."""
    candidatos = [(suma, plano) for realizado, suma, plano, _, _ in asignaciones(faults, config) if realizado == w]
    return min(candidatos) if candidatos else None


def cvm_fuerza_bruta(w: int, faults: FaultMap, config: GroupingConfig):
    """(|residuo|, suma, bitmap plano, realizado) canónico para w."""
    return min((abs(w - realizado), suma, plano, realizado)
               for realizado, suma, plano, _, _ in asignaciones(faults, config))


@functools.lru_cache(maxsize=None)
def _todas_las_asignaciones(celdas: int, niveles: int) -> np.ndarray:
    """Matriz (niveles^celdas, celdas) en el orden de itertools.product."""
    rejilla = np.meshgrid(*([np.arange(niveles, dtype=np.int64)] * celdas), indexing="ij")
    return np.stack(rejilla, axis=-1).reshape(-1, celdas)


def _pesos_planos(config: GroupingConfig) -> np.ndarray:
    s = np.repeat(np.asarray(significance_vector(config), dtype=np.int64), config.rows)
    return np.concatenate([s, -s])


class OraculoVectorizado:
    """
    Fuerza bruta vectorizada sobre todas las asignaciones de un mapa.

    Por cada valor realizable guarda la asignación canónica: mínima suma de
    celdas y luego el bitmap plano (pos, neg) lexicográficamente menor.
    """

    def __init__(self, faults: FaultMap, config: GroupingConfig):
        libres = np.concatenate([faults.pos.free_mask.ravel(), faults.neg.free_mask.ravel()])
        sa0 = np.concatenate([faults.pos.sa0.ravel(), faults.neg.sa0.ravel()]).astype(np.int64)
        plano = _todas_las_asignaciones(config.cells_per_weight, config.levels) * libres
        realizados = (plano + (config.levels - 1) * sa0) @ _pesos_planos(config)
        sumas = plano.sum(axis=1)
        claves = tuple(plano[:, k] for k in reversed(range(plano.shape[1]))) + (sumas, realizados)
        orden = np.lexsort(claves)
        self.valores, primeros = np.unique(realizados[orden], return_index=True)
        self.sumas = sumas[orden][primeros]
        self.bitmaps = plano[orden][primeros]

    @property
    def consecutivo(self) -> bool:
        return int(self.valores[-1] - self.valores[0]) + 1 == len(self.valores)

    def _entrada(self, i: int):
        return int(self.sumas[i]), tuple(int(v) for v in self.bitmaps[i])

    def fawd(self, w: int):
        """(suma, bitmap plano) canónico, o None si w no es representable."""
        i = int(np.searchsorted(self.valores, w))
        if i < len(self.valores) and self.valores[i] == w:
            return self._entrada(i)
        return None

    def cvm(self, w: int):
        """(|residuo|, suma, bitmap plano, realizado) canónico."""
        i = int(np.searchsorted(self.valores, w))
        vecinos = [k for k in (i - 1, i) if 0 <= k < len(self.valores)]
        return min((abs(w - int(self.valores[k])),) + self._entrada(k) + (int(self.valores[k]),)
                   for k in vecinos)


@functools.lru_cache(maxsize=None)
def _valores_lado(codigos: bytes, config: GroupingConfig) -> np.ndarray:
    codigos = np.frombuffer(codigos, dtype=np.int8)
    libres = codigos == 0
    sa0 = (codigos == 1).astype(np.int64)
    asignaciones_lado = _todas_las_asignaciones(config.cells_per_side, config.levels) * libres
    return np.unique((asignaciones_lado + (config.levels - 1) * sa0) @ _pesos_planos(config)[:config.cells_per_side])


def valores_representables(faults: FaultMap, config: GroupingConfig) -> np.ndarray:
    """Conjunto representable como diferencias de los valores de cada lado."""
    codigos = np.asarray(faults.codes, dtype=np.int8).ravel()
    lado = config.cells_per_side
    positivos = _valores_lado(codigos[:lado].tobytes(), config)
    negativos = _valores_lado(codigos[lado:].tobytes(), config)
    return np.unique(np.subtract.outer(positivos, negativos))


@pytest.fixture
def r1c4():
    return GroupingConfig(columns=4, rows=1, levels=4)


@pytest.fixture
def r2c2():
    return GroupingConfig(columns=2, rows=2, levels=4)


@pytest.fixture
def mapa_escritura_ingenua(r1c4):
    """SA0 en el MSB positivo y SA1 en la significancia de peso 4."""
    codigos = [0] * r1c4.cells_per_weight
    codigos[0] = 1
    codigos[2] = 2
    return FaultMap.from_codes(codigos, r1c4)


@pytest.fixture
def archivo_config(tmp_path):
    """Escribe un .conf con las secciones dadas y devuelve su ruta."""
    def _escribir(contenido: str) -> str:
        ruta = tmp_path / "compilador.conf"
        ruta.write_text(contenido, encoding="utf-8")
        return str(ruta)
    return _escribir


@pytest.fixture(autouse=True)
def limpiar_logging():
    """Quita los handlers que instala la CLI en el logger raíz."""
    raiz = logging.getLogger()
    nivel = raiz.level
    yield
    for handler in list(raiz.handlers):
        if getattr(handler, '_compilador_imc', False):
            raiz.removeHandler(handler)
            handler.close()
    raiz.setLevel(nivel)
