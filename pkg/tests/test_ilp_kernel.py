"""Tests del solver ILP exacto y de los modelos FAWD/CVM."""

import itertools

import numpy as np
import pytest

import ilp_kernel
from conftest import LAYOUTS_CHICOS, cvm_fuerza_bruta, fawd_fuerza_bruta, mapas_muestreados
from core_model import FaultMap, GroupingConfig, Path, realized_weight
from exceptions import LimiteSolverExcedidoError, ModeloILPInvalidoError
from fawd_table import build_table, cvm_table_lookup
from ilp_kernel import (
    FreeCellIndex,
    IlpModel,
    IlpStatus,
    build_cvm_model,
    build_fawd_model,
    cvm_ilp,
    fawd_ilp,
    reachable_sums,
    solve,
)


def _optimo_fuerza_bruta(model: IlpModel):
    mejor = None
    for x in itertools.product(*(range(lo, hi + 1) for lo, hi in model.bounds)):
        if model.is_feasible(x):
            valor = model.evaluate(x)
            if mejor is None or valor < mejor:
                mejor = valor
    return mejor


def _modelos_aleatorios(cantidad, seed=3):
    rng = np.random.default_rng(seed)
    for _ in range(cantidad):
        n = int(rng.integers(2, 5))
        bounds = tuple((int(lo), int(lo + rng.integers(0, 4))) for lo in rng.integers(-2, 2, n))
        objective = tuple(int(c) for c in rng.integers(-5, 6, n))
        inequalities = tuple(
            (tuple(int(a) for a in rng.integers(-4, 5, n)), int(rng.integers(-3, 8)))
            for _ in range(int(rng.integers(1, 3)))
        )
        equalities = ()
        if rng.random() < 0.5:
            equalities = ((tuple(int(a) for a in rng.integers(-3, 4, n)), int(rng.integers(-4, 5))),)
        yield IlpModel(bounds, objective, equalities, inequalities)


class TestSolver:
    def test_una_igualdad_usa_programacion_dinamica(self):
        # min x0 + x1 + x2  s.a.  4 x0 + 2 x1 + x2 = 7
        modelo = IlpModel(bounds=((0, 3),) * 3, objective=(1, 1, 1), equalities=(((4, 2, 1), 7),))
        solucion = solve(modelo)
        assert solucion.status is IlpStatus.OPTIMAL
        assert solucion.objective_value == 3
        assert solucion.assignment == (1, 1, 1)
        assert solucion.nodes == 0

    def test_dp_desempata_por_asignacion_menor(self):
        # x0 + x1 = 1 con costo igual: (0, 1) antes que (1, 0)
        modelo = IlpModel(bounds=((0, 1), (0, 1)), objective=(1, 1), equalities=(((1, 1), 1),))
        assert solve(modelo).assignment == (0, 1)

    def test_dp_infactible(self):
        modelo = IlpModel(bounds=((0, 3),) * 2, objective=(1, 1), equalities=(((4, 4), 6),))
        assert solve(modelo).status is IlpStatus.INFEASIBLE

    def test_branch_and_bound_mochila(self):
        # max 5 x0 + 4 x1 + 3 x2  s.a.  2 x0 + 3 x1 + x2 <= 5,  x binaria
        modelo = IlpModel(bounds=((0, 1),) * 3, objective=(-5, -4, -3),
                          inequalities=(((2, 3, 1), 5),))
        solucion = solve(modelo)
        assert solucion.objective_value == -9
        assert modelo.is_feasible(solucion.assignment)
        assert solucion.nodes >= 1

    def test_branch_and_bound_infactible(self):
        modelo = IlpModel(bounds=((0, 1),) * 2, objective=(1, 1),
                          inequalities=(((-1, -1), -3),))
        assert solve(modelo).status is IlpStatus.INFEASIBLE

    def test_igualdad_sin_solucion_entera(self):
        # 2 x0 - 2 x1 = 1 tiene solución LP pero ninguna entera
        modelo = IlpModel(bounds=((0, 3),) * 2, objective=(0, 0),
                          equalities=(((2, -2), 1),), inequalities=(((1, 1), 6),))
        assert solve(modelo).status is IlpStatus.INFEASIBLE

    def test_variables_fijas(self):
        modelo = IlpModel(bounds=((2, 2), (0, 3)), objective=(1, -1), inequalities=(((1, 1), 4),))
        solucion = solve(modelo)
        assert solucion.assignment == (2, 2)
        assert solucion.objective_value == 0

    def test_coincide_con_fuerza_bruta(self):
        for modelo in _modelos_aleatorios(60):
            solucion = solve(modelo)
            esperado = _optimo_fuerza_bruta(modelo)
            if esperado is None:
                assert solucion.status is IlpStatus.INFEASIBLE
            else:
                assert solucion.objective_value == esperado
                assert modelo.is_feasible(solucion.assignment)

    def test_limite_de_variables(self):
        modelo = IlpModel(bounds=((0, 1),) * 5, objective=(1,) * 5, equalities=(((1,) * 5, 2),))
        with pytest.raises(LimiteSolverExcedidoError):
            solve(modelo, max_variables=4)

    def test_limite_de_nodos(self):
        modelo = IlpModel(bounds=((0, 1),) * 2, objective=(-1, -1), inequalities=(((2, 2), 3),))
        with pytest.raises(LimiteSolverExcedidoError):
            solve(modelo, max_nodes=1)

    @pytest.mark.parametrize("modelo", [
        IlpModel(bounds=((0, 1),), objective=(1, 1)),
        IlpModel(bounds=((0, 1.5),), objective=(1,)),
        IlpModel(bounds=((2, 1),), objective=(1,)),
        IlpModel(bounds=((0, 1),), objective=(1,), equalities=(((1, 1), 1),)),
        IlpModel(bounds=((0, 1),), objective=(0.5,)),
    ])
    def test_modelo_invalido(self, modelo):
        with pytest.raises(ModeloILPInvalidoError):
            solve(modelo)


class TestModelos:
    def test_indice_de_celdas_libres(self, r2c2):
        mapa = FaultMap.from_codes([2, 0, 0, 0, 0, 0, 1, 0], r2c2)
        indice = FreeCellIndex.from_faults(mapa, r2c2)
        assert len(indice) == 6
        assert indice.cells[0] == (0, 0, 1)
        assert indice.coefficients == (4, 1, 1, -4, -4, -1)

    def test_modelo_fawd_descuenta_offset(self, r2c2):
        mapa = FaultMap.from_codes([1, 0, 0, 0, 0, 0, 0, 0], r2c2)
        modelo = build_fawd_model(20, mapa, r2c2)
        assert modelo.equalities[0][1] == 20 - 12
        assert modelo.bounds == ((0, 3),) * 7

    def test_modelo_cvm_siempre_factible(self, r2c2):
        modelo = build_cvm_model(500, FaultMap.fault_free(r2c2), r2c2)
        assert modelo.bounds[-1] == (0, 60 + 500)
        assert solve(modelo).objective_value == 470


class TestFawdIlp:
    def test_coincide_con_fuerza_bruta(self):
        for config in LAYOUTS_CHICOS:
            for mapa in mapas_muestreados(config, 12, seed=11):
                for w in range(config.ideal_min, config.ideal_max + 1):
                    esperado = fawd_fuerza_bruta(w, mapa, config)
                    cw = fawd_ilp(w, mapa, config)
                    if esperado is None:
                        assert cw is None
                        continue
                    assert (cw.cell_sum, cw.flat()) == esperado
                    assert cw.realized == w and cw.residual == 0
                    assert cw.path is Path.ILP_FAWD

    def test_celdas_clavadas_en_cero(self, r2c2):
        mapa = FaultMap.from_codes([1, 2, 0, 0, 0, 0, 2, 1], r2c2)
        cw = fawd_ilp(10, mapa, r2c2)
        assert cw.pos.values[0, 0] == 0 and cw.pos.values[0, 1] == 0
        assert cw.neg.values[1, 0] == 0 and cw.neg.values[1, 1] == 0
        assert realized_weight(cw.pos, cw.neg, mapa, r2c2) == 10


class TestCvmIlp:
    def test_coincide_con_fuerza_bruta(self):
        for config in LAYOUTS_CHICOS:
            for mapa in mapas_muestreados(config, 8, seed=5):
                for w in range(config.ideal_min - 2, config.ideal_max + 3):
                    residuo, suma, plano, realizado = cvm_fuerza_bruta(w, mapa, config)
                    cw = cvm_ilp(w, mapa, config)
                    assert abs(cw.residual) == residuo
                    assert (cw.cell_sum, cw.flat(), cw.realized) == (suma, plano, realizado)
                    assert cw.path is Path.ILP_CVM

    def test_residuo_en_el_hueco(self, r1c4):
        # con la significancia de peso 4 clavada en ambos lados, 8 queda a 5 de 3 y a 5 de 13
        codigos = [0] * 8
        codigos[2] = codigos[6] = 2
        mapa = FaultMap.from_codes(codigos, r1c4)
        cw = cvm_ilp(8, mapa, r1c4)
        assert abs(cw.residual) == 5
        assert cw.realized in (3, 13)
        assert realized_weight(cw.pos, cw.neg, mapa, r1c4) == cw.realized

    def test_distancia_igual_al_modelo_cvm(self):
        for config in LAYOUTS_CHICOS:
            for mapa in mapas_muestreados(config, 6, seed=21):
                for w in range(config.ideal_min - 3, config.ideal_max + 4, 2):
                    cw = cvm_ilp(w, mapa, config)
                    distancia = solve(build_cvm_model(w, mapa, config))
                    assert abs(cw.residual) == distancia.objective_value

    def test_sumas_alcanzables(self, r1c4):
        codigos = [0] * 8
        codigos[2] = codigos[6] = 2
        mapa = FaultMap.from_codes(codigos, r1c4)
        sumas = reachable_sums(build_fawd_model(0, mapa, r1c4))
        assert 3 in sumas and 13 in sumas
        assert not any(4 <= s <= 12 for s in sumas)
        assert list(sumas) == sorted(set(sumas))

    def test_sumas_alcanzables_requiere_una_igualdad(self, r2c2):
        mapa = FaultMap.from_codes([0] * 8, r2c2)
        with pytest.raises(ModeloILPInvalidoError):
            reachable_sums(build_cvm_model(3, mapa, r2c2))

    def test_layout_ancho_sin_branch_and_bound(self, mocker):
        config = GroupingConfig(columns=4, rows=2, levels=4)
        espia = mocker.spy(ilp_kernel, "_branch_and_bound")
        for mapa in mapas_muestreados(config, 5, seed=9):
            tabla = build_table(mapa, config)
            for w in (0, 77, -130, 255, config.ideal_max + 10):
                cw = cvm_ilp(w, mapa, config)
                referencia = cvm_table_lookup(w, tabla)
                assert (cw.realized, cw.cell_sum, cw.flat()) == (
                    referencia.realized, referencia.cell_sum, referencia.flat())
        assert espia.call_count == 0

