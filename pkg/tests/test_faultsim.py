"""Tests de muestreo de fallas y reproducciones Monte Carlo."""

from fractions import Fraction

import numpy as np
import pytest

from core_model import FaultMap, GroupingConfig
from exceptions import EnumeracionExcedidaError, LongitudError, TasasInvalidasError
from faultsim import (
    TASAS_REFERENCIA,
    FaultRates,
    InconsecMethod,
    distortion_report,
    estimate_inconsec_prob,
    fault_rate_sweep,
    level_count,
    naive_realized,
    paired_distortion,
    range_reduction_stats,
    sample_faultmap,
    sample_faultmaps,
    single_fault_sweep,
    trigger_probability_analytic,
)


class TestTasas:
    @pytest.mark.parametrize("p_sa0,p_sa1", [(-0.1, 0.1), (0.6, 0.5), (1.2, 0.0)])
    def test_invalidas(self, p_sa0, p_sa1):
        with pytest.raises(TasasInvalidasError):
            FaultRates(p_sa0, p_sa1)

    def test_escalar_mantiene_proporcion(self):
        escaladas = TASAS_REFERENCIA.scaled(0.2)
        assert escaladas.total == pytest.approx(0.2)
        assert escaladas.p_sa0 / escaladas.p_sa1 == pytest.approx(0.0175 / 0.0904)

    def test_escalar_desde_cero(self):
        with pytest.raises(TasasInvalidasError):
            FaultRates(0.0, 0.0).scaled(0.1)


def test_cantidad_de_niveles(r1c4, r2c2):
    assert level_count(r1c4) == 256
    assert level_count(r2c2) == 31


class TestMuestreo:
    def test_reproducible(self, r2c2):
        a = sample_faultmaps(r2c2, TASAS_REFERENCIA, 5000, seed=9)
        b = sample_faultmaps(r2c2, TASAS_REFERENCIA, 5000, seed=9)
        assert np.array_equal(a, b)
        assert a.shape == (5000, 8)
        assert not np.array_equal(a, sample_faultmaps(r2c2, TASAS_REFERENCIA, 5000, seed=10))

    def test_independiente_del_tamano_de_bloque_en_el_prefijo(self, r2c2):
        # el primer bloque no depende de cuántas muestras se pidan
        corto = sample_faultmaps(r2c2, TASAS_REFERENCIA, 100, seed=3, tam_bloque=256)
        largo = sample_faultmaps(r2c2, TASAS_REFERENCIA, 1000, seed=3, tam_bloque=256)
        assert np.array_equal(corto, largo[:100])

    def test_frecuencias(self):
        config = GroupingConfig(columns=4, rows=4, levels=4)
        codigos = sample_faultmaps(config, FaultRates(0.1, 0.2), 20000, seed=1)
        assert np.mean(codigos == 1) == pytest.approx(0.1, abs=0.005)
        assert np.mean(codigos == 2) == pytest.approx(0.2, abs=0.005)

    def test_sin_fallas(self, r2c2):
        assert not sample_faultmaps(r2c2, FaultRates(0.0, 0.0), 100).any()

    def test_cero_muestras(self, r2c2):
        assert sample_faultmaps(r2c2, TASAS_REFERENCIA, 0).shape == (0, 8)

    def test_un_mapa(self, r2c2):
        mapa = sample_faultmap(r2c2, FaultRates(1.0, 0.0), np.random.default_rng(0))
        assert mapa.pos.sa0.all() and mapa.neg.sa0.all()


class TestInconsecutividad:
    def test_analitica_r1c4(self, r1c4):
        assert trigger_probability_analytic(r1c4, TASAS_REFERENCIA) == pytest.approx(0.0349, abs=0.0005)

    def test_analitica_r2c2(self, r2c2):
        p = trigger_probability_analytic(r2c2, TASAS_REFERENCIA)
        assert 0.00005 <= p <= 0.0003

    def test_disparador_nunca_supera_exacto(self, r1c4):
        disparador = estimate_inconsec_prob(r1c4, TASAS_REFERENCIA, 20000, InconsecMethod.TRIGGER, seed=2)
        exacto = estimate_inconsec_prob(r1c4, TASAS_REFERENCIA, 20000, InconsecMethod.EXACT, seed=2)
        assert disparador <= exacto

    def test_hilos_no_cambian_la_estimacion(self, r1c4):
        uno = estimate_inconsec_prob(r1c4, TASAS_REFERENCIA, 30000, "trigger", seed=4, threads=1, tam_bloque=4096)
        cuatro = estimate_inconsec_prob(r1c4, TASAS_REFERENCIA, 30000, "trigger", seed=4, threads=4, tam_bloque=4096)
        assert uno == cuatro

    def test_exacto_fuera_de_presupuesto(self, r1c4):
        with pytest.raises(EnumeracionExcedidaError):
            estimate_inconsec_prob(r1c4, TASAS_REFERENCIA, 10, InconsecMethod.EXACT, budget=1000)

    def test_barrido_crece_con_la_tasa(self, r1c4):
        barrido = fault_rate_sweep(r1c4, [0.02, 0.3], 20000, seed=5, method="trigger")
        assert barrido[0.02] < barrido[0.3]

    @pytest.mark.slow
    def test_r1c4_con_tasas_medidas(self, r1c4):
        p = estimate_inconsec_prob(r1c4, TASAS_REFERENCIA, 1_000_000, InconsecMethod.EXACT, seed=0, threads=4)
        assert p == pytest.approx(0.0349, abs=0.005)

    @pytest.mark.slow
    def test_r1c4_disparador_con_tasas_medidas(self, r1c4):
        p = estimate_inconsec_prob(r1c4, TASAS_REFERENCIA, 1_000_000, InconsecMethod.TRIGGER, seed=0, threads=4)
        assert p == pytest.approx(0.0349, abs=0.002)

    @pytest.mark.slow
    def test_r2c2_con_tasas_medidas(self, r2c2):
        p = estimate_inconsec_prob(r2c2, TASAS_REFERENCIA, 10_000_000, InconsecMethod.EXACT, seed=0, threads=4)
        assert 0.00005 <= p <= 0.0003

    @pytest.mark.slow
    def test_r1c4_al_20_por_ciento(self, r1c4):
        p = estimate_inconsec_prob(r1c4, TASAS_REFERENCIA.scaled(0.2), 1_000_000, "trigger", seed=0, threads=4)
        assert p > 0.10


class TestReduccionDeRango:
    def test_barrido_de_falla_unica(self, r2c2):
        impactos = single_fault_sweep(r2c2)
        assert len(impactos) == 2 * r2c2.cells_per_weight
        peor = max(impactos, key=lambda i: i.reduction)
        assert peor.significance == 1
        assert peor.reduction == Fraction(12, 60)
        sa1_msb_pos = [i for i in impactos if (i.side, i.significance, i.row, i.polarity) == ("pos", 1, 1, "SA1")]
        assert (sa1_msb_pos[0].min_value, sa1_msb_pos[0].max_value) == (-30, 18)

    def test_estadisticas(self, r1c4):
        resumen = range_reduction_stats(r1c4, TASAS_REFERENCIA, 5000, seed=6)
        assert 0 < resumen.mean_range_reduction < resumen.max_range_reduction <= 1
        assert resumen.sample_count == 5000
        assert 'l1' not in resumen.to_dict()


class TestDistorsion:
    def test_escritura_ingenua(self, r1c4, mapa_escritura_ingenua):
        assert naive_realized(52, mapa_escritura_ingenua, r1c4) == 240

    def test_reporte(self, r1c4, mapa_escritura_ingenua):
        libre = FaultMap.fault_free(r1c4)
        resumen = distortion_report([52, 10, 52], [mapa_escritura_ingenua, libre, libre], r1c4,
                                    layers=["conv1", "conv1", "fc"])
        assert resumen.l1 == 0
        assert resumen.l1_naive == 188
        assert resumen.l1_per_layer == {"conv1": 0, "fc": 0}
        assert resumen.sample_count == 3

    def test_reporte_con_codigos(self, r2c2):
        codigos = sample_faultmaps(r2c2, FaultRates(0.1, 0.2), 200, seed=7)
        pesos = list(np.random.default_rng(7).integers(-30, 31, 200))
        resumen = distortion_report(pesos, codigos, r2c2)
        assert resumen.l1 <= resumen.l1_naive
        assert sum(resumen.path_counts.values()) == 200

    def test_longitudes(self, r2c2):
        with pytest.raises(LongitudError):
            distortion_report([1, 2], [FaultMap.fault_free(r2c2)], r2c2)

    def test_pareada(self, r1c4, r2c2):
        unitarios = np.random.default_rng(8).uniform(-1, 1, 300)
        resultado = paired_distortion(unitarios, [r1c4, r2c2], seed=8)
        assert set(resultado) == {"R1C4/L=4", "R2C2/L=4"}
        for config in (r1c4, r2c2):
            fila = resultado[str(config)]
            assert fila['l1_normalized'] == pytest.approx(fila['l1'] / config.ideal_max)
