"""Tests de la tabla de descomposición y su caché."""

from concurrent.futures import ThreadPoolExecutor

import pytest

import fawd_table
from conftest import LAYOUTS_CHICOS, cvm_fuerza_bruta, mapas_muestreados, todos_los_mapas
from core_model import FaultMap, Path, decode, inject_faults
from exceptions import TablaExcedidaError
from fawd_table import (
    TableCache,
    achievable_values,
    build_table,
    cvm_table_lookup,
    fawd_table_lookup,
)
from ilp_kernel import cvm_ilp, fawd_ilp
from range_analysis import enumerate_representable_set


def test_valores_alcanzables_sin_fallas(r2c2):
    lado = achievable_values(FaultMap.fault_free(r2c2).pos, r2c2)
    assert lado.values == tuple(range(0, 31))
    assert lado.entries[0].cell_sum == 0
    # 4 = una celda de significancia 4 (suma 1), no cuatro unos
    assert lado.entries[4].cell_sum == 1
    assert lado.entries[4].witness.values.tolist() == [[0, 1], [0, 0]]


def test_testigos_realizan_su_valor():
    for config in LAYOUTS_CHICOS:
        for mapa in mapas_muestreados(config, 20):
            tabla = build_table(mapa, config)
            for lado_fallas, lado in ((mapa.pos, tabla.pos), (mapa.neg, tabla.neg)):
                for valor, entrada in lado.entries.items():
                    assert decode(inject_faults(entrada.witness, lado_fallas, config), config) == valor
                    assert entrada.witness.cell_sum == entrada.cell_sum


def test_valores_representables_coinciden_con_enumeracion():
    for config in LAYOUTS_CHICOS:
        for mapa in list(todos_los_mapas(config))[::37]:
            tabla = build_table(mapa, config)
            assert tabla.representable_values() == enumerate_representable_set(mapa, config)


def test_presupuesto_de_tabla(r1c4):
    with pytest.raises(TablaExcedidaError) as info:
        achievable_values(FaultMap.fault_free(r1c4).pos, r1c4, budget=100)
    assert "--table-budget" in str(info.value)


class TestConsultas:
    def test_fawd_igual_que_ilp(self):
        for config in LAYOUTS_CHICOS:
            for mapa in mapas_muestreados(config, 15, seed=21):
                tabla = build_table(mapa, config)
                for w in range(config.ideal_min, config.ideal_max + 1):
                    por_tabla = fawd_table_lookup(w, tabla)
                    por_ilp = fawd_ilp(w, mapa, config)
                    if por_ilp is None:
                        assert por_tabla is None
                        continue
                    assert por_tabla.path is Path.TABLE_FAWD
                    assert (por_tabla.pos, por_tabla.neg) == (por_ilp.pos, por_ilp.neg)

    def test_cvm_igual_que_fuerza_bruta(self):
        for config in LAYOUTS_CHICOS:
            for mapa in mapas_muestreados(config, 15, seed=22):
                tabla = build_table(mapa, config)
                for w in range(config.ideal_min - 3, config.ideal_max + 4):
                    residuo, suma, plano, realizado = cvm_fuerza_bruta(w, mapa, config)
                    cw = cvm_table_lookup(w, tabla)
                    assert cw.path is Path.TABLE_CVM
                    assert (abs(cw.residual), cw.cell_sum, cw.flat(), cw.realized) == (residuo, suma, plano, realizado)

    def test_cvm_igual_que_ilp_en_el_hueco(self, r1c4):
        codigos = [0] * 8
        codigos[2] = codigos[6] = 2
        mapa = FaultMap.from_codes(codigos, r1c4)
        tabla = build_table(mapa, r1c4)
        for w in range(-20, 21):
            por_tabla, por_ilp = cvm_table_lookup(w, tabla), cvm_ilp(w, mapa, r1c4)
            assert (por_tabla.pos, por_tabla.neg, por_tabla.residual) == (por_ilp.pos, por_ilp.neg, por_ilp.residual)

    def test_fawd_fuera_del_conjunto(self, r1c4):
        codigos = [0] * 8
        codigos[2] = codigos[6] = 2
        tabla = build_table(FaultMap.from_codes(codigos, r1c4), r1c4)
        assert fawd_table_lookup(8, tabla) is None


class TestCache:
    def test_construye_una_vez(self, r2c2, mocker):
        espia = mocker.spy(fawd_table, "build_table")
        cache = TableCache(r2c2)
        mapa = FaultMap.from_codes([1, 0, 0, 0, 0, 0, 0, 2], r2c2)
        assert cache.get(mapa) is cache.get(mapa)
        assert espia.call_count == 1
        assert cache.stats() == {'hits': 1, 'misses': 1, 'size': 1}

    def test_hilos_concurrentes(self, r2c2, mocker):
        espia = mocker.spy(fawd_table, "build_table")
        cache = TableCache(r2c2)
        mapas = [FaultMap.from_codes(c, r2c2) for c in ([0] * 8, [2] + [0] * 7, [0] * 7 + [1])]
        with ThreadPoolExecutor(max_workers=8) as pool:
            tablas = list(pool.map(cache.get, mapas * 20))
        assert espia.call_count == 3
        assert len(cache) == 3
        for i, tabla in enumerate(tablas):
            assert tabla is tablas[i % 3]

    def test_error_no_deja_la_clave_bloqueada(self, r1c4):
        cache = TableCache(r1c4, budget=10)
        mapa = FaultMap.fault_free(r1c4)
        for _ in range(2):
            with pytest.raises(TablaExcedidaError):
                cache.get(mapa)
        assert len(cache) == 0
