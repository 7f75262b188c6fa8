"""
Línea de comandos del compilador IMC.

Subcomandos:
    compile      compila un archivo de pesos contra un archivo de fallas
    gen-faults   genera mapas de fallas aleatorios reproducibles
    analyze      range | consecutivity | inconsec-prob | levels | reduction | sweep

Todos los archivos usan el mismo orden plano de celdas: lado (pos, neg),
luego significancia (MSB primero), luego fila. Los resultados van a stdout
como JSON con orden de claves fijo; los logs van a stderr.
"""

import argparse
import logging
import sys
import traceback
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
import ujson

from config_manager import ConfigManager
from core_model import FaultMap, GroupingConfig, effective_bits
from exceptions import (
    CompiladorIMCError,
    ConfigError,
    FormatoArchivoError,
    LayoutIncompatibleError,
    LongitudError,
    codigo_salida,
    describir_errores,
)
from faultsim import (
    FaultRates,
    InconsecMethod,
    estimate_inconsec_prob,
    fault_rate_sweep,
    level_count,
    naive_realized,
    range_reduction_stats,
    sample_faultmaps,
    single_fault_sweep,
    trigger_probability_analytic,
)
from logging_config import configurar_logging
from pipeline import CompilePolicy, Compiler
from range_analysis import (
    inconsecutivity_trigger,
    is_consecutive_exact,
    representable_gaps,
    representable_range,
)

logger = logging.getLogger(__name__)

DECIMALES = 6


@dataclass(frozen=True)
class LayoutSpec:
    """Token `R{r}C{c}` más la cantidad de niveles."""

    layout: str
    levels: int

    @classmethod
    def parse(cls, layout: str, levels: int) -> "LayoutSpec":
        config = GroupingConfig.from_layout(layout, levels)
        return cls(config.layout, config.levels)

    @property
    def config(self) -> GroupingConfig:
        return GroupingConfig.from_layout(self.layout, self.levels)

    def __str__(self):
        return f"{self.layout}/L={self.levels}"


# ============================================================================
# ARCHIVOS
# ============================================================================

def dumps(documento) -> str:
    return ujson.dumps(documento, indent=2, ensure_ascii=False, escape_forward_slashes=False) + "\n"


def escribir_json(ruta: str, documento):
    destino = Path(ruta)
    if destino.parent and not destino.parent.exists():
        destino.parent.mkdir(parents=True, exist_ok=True)
    destino.write_text(dumps(documento), encoding="utf-8")
    logger.info(f"Archivo escrito: {ruta}")


def emitir(documento):
    sys.stdout.write(dumps(documento))
    sys.stdout.flush()


def leer_json(ruta: str) -> dict:
    try:
        texto = Path(ruta).read_text(encoding="utf-8")
    except OSError as e:
        raise FormatoArchivoError(ruta, f"no se pudo leer: {e}")
    try:
        documento = ujson.loads(texto)
    except ValueError as e:
        raise FormatoArchivoError(ruta, f"JSON inválido: {e}")
    if not isinstance(documento, dict):
        raise FormatoArchivoError(ruta, "se esperaba un objeto JSON")
    return documento


def _campo(documento: dict, clave: str, tipo, ruta: str):
    if clave not in documento:
        raise FormatoArchivoError(ruta, f"falta el campo '{clave}'")
    valor = documento[clave]
    if not isinstance(valor, tipo) or isinstance(valor, bool):
        raise FormatoArchivoError(ruta, f"el campo '{clave}' tiene tipo {type(valor).__name__}")
    return valor


def _enteros(valores, ruta: str, clave: str) -> List[int]:
    plano = []
    pendientes = [valores]
    # Se aceptan listas planas o anidadas (una fila por peso)
    while pendientes:
        actual = pendientes.pop()
        if isinstance(actual, list):
            pendientes.extend(reversed(actual))
        elif isinstance(actual, int) and not isinstance(actual, bool):
            plano.append(actual)
        elif isinstance(actual, float) and actual.is_integer():
            plano.append(int(actual))
        else:
            raise FormatoArchivoError(ruta, f"'{clave}' contiene un valor no entero: {actual!r}")
    return plano


def _verificar_layout(documento: dict, disposicion: LayoutSpec, ruta: str):
    layout = _campo(documento, "layout", str, ruta)
    niveles = _campo(documento, "levels", int, ruta)
    try:
        del_archivo = LayoutSpec.parse(layout, niveles)
    except CompiladorIMCError as e:
        raise FormatoArchivoError(ruta, str(e))
    if del_archivo != disposicion:
        raise LayoutIncompatibleError(f"el archivo declara {del_archivo}, se pidió {disposicion}", ruta)


def _verificar_ancho(pesos: List[int], documento: dict, ruta: str):
    bits = 64
    if "bits" in documento:
        bits = _campo(documento, "bits", int, ruta)
        if not 1 <= bits <= 64:
            raise FormatoArchivoError(ruta, f"'bits' debe estar en [1, 64], se recibió {bits}")
    minimo, maximo = -(2 ** (bits - 1)), 2 ** (bits - 1) - 1
    for i, w in enumerate(pesos):
        if not minimo <= w <= maximo:
            raise FormatoArchivoError(ruta, f"el peso {w} (posición {i}) no cabe en {bits} bits con signo")


def leer_pesos(ruta: str, disposicion: LayoutSpec) -> Tuple[List[int], Optional[List[str]]]:
    documento = leer_json(ruta)
    _verificar_layout(documento, disposicion, ruta)
    pesos = _enteros(_campo(documento, "weights", list, ruta), ruta, "weights")
    _verificar_ancho(pesos, documento, ruta)
    if "shape" in documento:
        forma = _enteros(_campo(documento, "shape", list, ruta), ruta, "shape")
        if int(np.prod(forma)) != len(pesos):
            raise LayoutIncompatibleError(f"shape {forma} no coincide con {len(pesos)} pesos", ruta)
    capas = None
    if documento.get("layers") is not None:
        capas = [str(c) for c in _campo(documento, "layers", list, ruta)]
        if len(capas) != len(pesos):
            raise LayoutIncompatibleError(f"{len(capas)} etiquetas de capa para {len(pesos)} pesos", ruta)
    return pesos, capas


def leer_fallas(ruta: str, disposicion: LayoutSpec) -> np.ndarray:
    documento = leer_json(ruta)
    _verificar_layout(documento, disposicion, ruta)
    codigos = _enteros(_campo(documento, "codes", list, ruta), ruta, "codes")
    if any(c not in (0, 1, 2) for c in codigos):
        raise FormatoArchivoError(ruta, "los códigos deben estar en {0, 1, 2}")
    celdas = disposicion.config.cells_per_weight
    if len(codigos) % celdas:
        raise LayoutIncompatibleError(f"{len(codigos)} códigos no es múltiplo de 2*c*r = {celdas}", ruta)
    matriz = np.asarray(codigos, dtype=np.int8).reshape(-1, celdas)
    if "count" in documento and _campo(documento, "count", int, ruta) != len(matriz):
        raise LayoutIncompatibleError(f"count={documento['count']} pero hay {len(matriz)} mapas", ruta)
    return matriz


def documento_fallas(disposicion: LayoutSpec, codigos: np.ndarray, rates: FaultRates, seed: int) -> dict:
    return {
        "layout": disposicion.layout,
        "levels": disposicion.levels,
        "count": int(len(codigos)),
        "p_sa0": rates.p_sa0,
        "p_sa1": rates.p_sa1,
        "seed": seed,
        "codes": codigos.ravel().tolist(),
    }


# ============================================================================
# COMANDOS
# ============================================================================

def _tasas(args, config: ConfigManager) -> FaultRates:
    p_sa0 = args.p_sa0 if args.p_sa0 is not None else config.simulacion.p_sa0
    p_sa1 = args.p_sa1 if args.p_sa1 is not None else config.simulacion.p_sa1
    return FaultRates(p_sa0, p_sa1)


def _semilla(args, config: ConfigManager) -> int:
    return args.seed if args.seed is not None else config.simulacion.semilla


def _politica(args, config: ConfigManager) -> CompilePolicy:
    base = config.politica_compilacion()
    return CompilePolicy(
        force_path=args.force_path or base.force_path,
        table_budget=args.table_budget or base.table_budget,
        thread_count=args.threads or base.thread_count,
        enumeration_budget=base.enumeration_budget,
        skip_checks=bool(getattr(args, "skip_checks", False)),
        max_variables=base.max_variables,
        max_nodes=base.max_nodes,
        max_table_entries=base.max_table_entries,
    )


def cmd_compile(args, config: ConfigManager) -> int:
    disposicion = LayoutSpec.parse(args.layout, args.levels)
    grupo = disposicion.config
    pesos, capas = leer_pesos(args.weights, disposicion)
    if args.faults:
        codigos = leer_fallas(args.faults, disposicion)
    else:
        codigos = sample_faultmaps(grupo, config.tasas_fallas(), len(pesos), _semilla(args, config),
                                   config.simulacion.muestras_por_bloque)
        logger.info(f"Sin archivo de fallas: {len(codigos)} mapas sorteados con semilla {_semilla(args, config)}")
    if len(pesos) != len(codigos):
        raise LongitudError(len(pesos), len(codigos))

    reporte = Compiler(grupo, _politica(args, config)).compile_codes(pesos, codigos)

    ingenuos = None
    if args.naive:
        unicos, inversa = np.unique(codigos, axis=0, return_inverse=True)
        mapas = [FaultMap.from_codes(fila, grupo) for fila in unicos]
        memo = {}
        ingenuos = []
        for w, i in zip(pesos, np.asarray(inversa).ravel()):
            clave = (int(i), w)
            if clave not in memo:
                memo[clave] = naive_realized(w, mapas[int(i)], grupo)
            ingenuos.append(memo[clave])

    registros = []
    for indice, (w, cw) in enumerate(zip(pesos, reporte.weights)):
        registro = {
            "index": indice,
            "weight": w,
            "pos": list(cw.pos.flat()),
            "neg": list(cw.neg.flat()),
            "realized": cw.realized,
            "residual": cw.residual,
            "path": cw.path.value,
        }
        if ingenuos is not None:
            registro["naive_realized"] = ingenuos[indice]
        if capas is not None:
            registro["layer"] = capas[indice]
        registros.append(registro)

    resumen = {"layout": disposicion.layout, "levels": disposicion.levels}
    resumen.update(_redondear(reporte.to_dict(incluir_tiempos=False)))
    if ingenuos is not None:
        resumen["l1_naive"] = sum(abs(w - v) for w, v in zip(pesos, ingenuos))

    escribir_json(args.out, {
        "layout": disposicion.layout,
        "levels": disposicion.levels,
        "count": len(registros),
        "weights": registros,
        "summary": resumen,
    })

    resumen["stage_seconds"] = _redondear(reporte.to_dict()["stage_seconds"])
    emitir(resumen)
    return 0


def cmd_gen_faults(args, config: ConfigManager) -> int:
    disposicion = LayoutSpec.parse(args.layout, args.levels)
    rates = _tasas(args, config)
    semilla = _semilla(args, config)
    if args.count < 0:
        raise FormatoArchivoError("--count", f"debe ser >= 0: {args.count}")
    codigos = sample_faultmaps(disposicion.config, rates, args.count, semilla,
                               config.simulacion.muestras_por_bloque)
    escribir_json(args.out, documento_fallas(disposicion, codigos, rates, semilla))

    frecuencias = {"free": 0.0, "sa0": 0.0, "sa1": 0.0}
    if codigos.size:
        frecuencias = {nombre: float(np.mean(codigos == codigo))
                       for nombre, codigo in (("free", 0), ("sa0", 1), ("sa1", 2))}
    emitir({
        "layout": disposicion.layout,
        "levels": disposicion.levels,
        "count": int(len(codigos)),
        "seed": semilla,
        "frequencies": _redondear(frecuencias),
    })
    return 0


def _mapa_desde_args(args, disposicion: LayoutSpec) -> FaultMap:
    if args.codes is not None:
        try:
            codigos = [int(c) for c in args.codes.replace(" ", "").split(",") if c != ""]
        except ValueError:
            raise FormatoArchivoError("--codes", f"lista de códigos inválida: {args.codes}")
        if any(c not in (0, 1, 2) for c in codigos):
            raise FormatoArchivoError("--codes", "los códigos deben estar en {0, 1, 2}")
        if len(codigos) != disposicion.config.cells_per_weight:
            raise LayoutIncompatibleError(
                f"--codes tiene {len(codigos)} códigos, se esperan {disposicion.config.cells_per_weight}")
        return FaultMap.from_codes(codigos, disposicion.config)
    if args.faults is not None:
        matriz = leer_fallas(args.faults, disposicion)
        if not 0 <= args.index < len(matriz):
            raise LayoutIncompatibleError(f"índice {args.index} fuera de rango (0..{len(matriz) - 1})",
                                          args.faults)
        return FaultMap.from_codes(matriz[args.index], disposicion.config)
    return FaultMap.fault_free(disposicion.config)


def _redondear(valor):
    if isinstance(valor, float):
        return round(valor, DECIMALES)
    if isinstance(valor, dict):
        return {k: _redondear(v) for k, v in valor.items()}
    if isinstance(valor, list):
        return [_redondear(v) for v in valor]
    return valor


def _presupuesto_enumeracion(args, config: ConfigManager) -> int:
    return args.enumeration_budget or config.analisis.enumeration_budget


def cmd_analyze(args, config: ConfigManager) -> int:
    disposicion = LayoutSpec.parse(args.layout, args.levels)
    grupo = disposicion.config
    cabecera = {"layout": disposicion.layout, "levels": disposicion.levels}

    if args.analisis == "levels":
        cabecera.update({
            "level_count": level_count(grupo),
            "effective_bits": round(effective_bits(grupo), DECIMALES),
            "ideal_min": grupo.ideal_min,
            "ideal_max": grupo.ideal_max,
        })

    elif args.analisis == "range":
        rango = representable_range(_mapa_desde_args(args, disposicion), grupo)
        cabecera.update({
            "stuck_offset": rango.stuck_offset,
            "min": rango.min_value,
            "max": rango.max_value,
            "ideal_min": rango.ideal_min,
            "ideal_max": rango.ideal_max,
            "width": rango.width,
            "ideal_width": rango.ideal_width,
            "width_lost": rango.ideal_width - rango.width,
            "reduction": round(float(rango.reduction), DECIMALES),
        })

    elif args.analisis == "consecutivity":
        mapa = _mapa_desde_args(args, disposicion)
        reporte = inconsecutivity_trigger(mapa, grupo)
        cabecera.update({
            "triggered": reporte.triggered,
            "triggering_significances": [
                {
                    "significance": i,
                    "column_index": reporte.column_index(i),
                    "gap_stride": reporte.gap_stride(i),
                    "tail_span": reporte.tail_span(i),
                }
                for i in sorted(reporte.triggering_significances)
            ],
        })
        if args.exact:
            presupuesto = _presupuesto_enumeracion(args, config)
            cabecera["consecutive"] = is_consecutive_exact(mapa, grupo, presupuesto)
            cabecera["gaps"] = [list(h) for h in representable_gaps(mapa, grupo, presupuesto)]

    elif args.analisis == "inconsec-prob":
        rates = _tasas(args, config)
        semilla = _semilla(args, config)
        probabilidad = estimate_inconsec_prob(
            grupo, rates, args.samples, args.method, semilla,
            _presupuesto_enumeracion(args, config), args.threads or config.compilacion.threads,
            config.simulacion.muestras_por_bloque,
        )
        cabecera.update({
            "method": InconsecMethod(args.method).value,
            "samples": args.samples,
            "seed": semilla,
            "p_sa0": rates.p_sa0,
            "p_sa1": rates.p_sa1,
            "probability": round(probabilidad, DECIMALES + 2),
            "analytic_trigger": round(trigger_probability_analytic(grupo, rates), DECIMALES + 2),
        })

    elif args.analisis == "reduction":
        cabecera["single_fault"] = [
            {
                "side": impacto.side,
                "significance": impacto.significance,
                "row": impacto.row,
                "polarity": impacto.polarity,
                "min": impacto.min_value,
                "max": impacto.max_value,
                "reduction": round(float(impacto.reduction), DECIMALES),
            }
            for impacto in single_fault_sweep(grupo)
        ]
        if args.samples:
            resumen = range_reduction_stats(grupo, _tasas(args, config), args.samples,
                                            _semilla(args, config), args.threads or config.compilacion.threads,
                                            config.simulacion.muestras_por_bloque)
            cabecera["sampled"] = _redondear(resumen.to_dict())

    elif args.analisis == "sweep":
        try:
            totales = [float(t) for t in args.totals.split(",") if t.strip()]
        except ValueError:
            raise FormatoArchivoError("--totals", f"lista de tasas inválida: {args.totals}")
        base = _tasas(args, config)
        resultados = fault_rate_sweep(grupo, totales, args.samples, _semilla(args, config), args.method,
                                      base, _presupuesto_enumeracion(args, config),
                                      args.threads or config.compilacion.threads)
        cabecera.update({
            "method": InconsecMethod(args.method).value,
            "samples": args.samples,
            "ratio_sa0": round(base.p_sa0 / base.total, DECIMALES) if base.total else 0.0,
            "results": [{"total": t, "probability": round(p, DECIMALES + 2)} for t, p in resultados.items()],
        })

    emitir(cabecera)
    return 0


# ============================================================================
# ARGUMENTOS
# ============================================================================

def _agregar_layout(parser):
    parser.add_argument('--layout', required=True, help='Layout R{r}C{c} (ej: R2C2)')
    parser.add_argument('--levels', type=int, required=True, help='Niveles por celda L')


def _agregar_tasas(parser):
    parser.add_argument('--p-sa0', type=float, help='Probabilidad SA0 (default: [SIMULACION] p_sa0)')
    parser.add_argument('--p-sa1', type=float, help='Probabilidad SA1 (default: [SIMULACION] p_sa1)')
    parser.add_argument('--seed', type=int, help='Semilla (default: [SIMULACION] semilla)')


def _agregar_mapa(parser):
    grupo = parser.add_mutually_exclusive_group()
    grupo.add_argument('--codes', help='2*c*r códigos separados por coma (0 libre, 1 SA0, 2 SA1)')
    grupo.add_argument('--faults', help='Archivo de fallas; se usa el mapa --index')
    parser.add_argument('--index', type=int, default=0, help='Mapa a usar de --faults (default: 0)')


def configurar_argumentos() -> argparse.ArgumentParser:
    """Configura argumentos de línea de comandos."""
    parser = argparse.ArgumentParser(
        prog="compilador_imc",
        description="Compilador de pesos tolerante a fallas para arreglos IMC",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Ejemplos de uso:
  compilador_imc gen-faults --layout R2C2 --levels 4 --count 1000 --seed 7 --out fallas.json
  compilador_imc compile --layout R2C2 --levels 4 --weights pesos.json --faults fallas.json --out salida.json
  compilador_imc analyze range --layout R1C4 --levels 4 --codes 2,0,0,0,0,0,0,0
  compilador_imc analyze inconsec-prob --layout R1C4 --levels 4 --method exact --samples 1000000
        """
    )
    parser.add_argument('--config', default='config/compilador.conf',
                        help='Archivo de configuración (default: config/compilador.conf)')
    parser.add_argument('--log-level', choices=['DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL'],
                        help='Nivel de logging (default: [LOGGING] nivel)')

    comandos = parser.add_subparsers(dest='comando', required=True)

    compilar = comandos.add_parser('compile', help='Compilar pesos contra mapas de fallas')
    _agregar_layout(compilar)
    compilar.add_argument('--weights', required=True, help='Archivo de pesos (JSON)')
    compilar.add_argument('--faults', help='Archivo de fallas (JSON); si falta se sortean con --seed')
    compilar.add_argument('--out', required=True, help='Archivo de salida (JSON)')
    compilar.add_argument('--threads', type=int, help='Hilos de compilación')
    compilar.add_argument('--force-path', choices=['auto', 'table', 'ilp'], help='Forzar tabla o ILP')
    compilar.add_argument('--table-budget', type=int, help='Máximo L^(c*r) por lado para usar tabla')
    compilar.add_argument('--seed', type=int, help='Semilla para sortear fallas si no hay archivo')
    compilar.add_argument('--naive', action='store_true', help='Registrar también la escritura ingenua')
    compilar.add_argument('--skip-checks', action='store_true',
                          help='Omitir chequeos de rango y consecutividad (FAWD y luego CVM)')

    generar = comandos.add_parser('gen-faults', help='Generar mapas de fallas aleatorios')
    _agregar_layout(generar)
    generar.add_argument('--count', type=int, required=True, help='Cantidad de mapas')
    _agregar_tasas(generar)
    generar.add_argument('--out', required=True, help='Archivo de salida (JSON)')

    analizar = comandos.add_parser('analyze', help='Diagnósticos de rango y consecutividad')
    analisis = analizar.add_subparsers(dest='analisis', required=True)

    niveles = analisis.add_parser('levels', help='Niveles representables')
    _agregar_layout(niveles)

    rango = analisis.add_parser('range', help='Rango representable de un mapa')
    _agregar_layout(rango)
    _agregar_mapa(rango)

    consecutividad = analisis.add_parser('consecutivity', help='Disparador de inconsecutividad')
    _agregar_layout(consecutividad)
    _agregar_mapa(consecutividad)
    consecutividad.add_argument('--exact', action='store_true', help='Enumerar el conjunto representable')
    consecutividad.add_argument('--enumeration-budget', type=int, help='Máximo L^(2*c*r) a enumerar')

    for nombre, ayuda in (('inconsec-prob', 'Probabilidad Monte Carlo de inconsecutividad'),
                          ('sweep', 'Probabilidad de inconsecutividad por tasa total')):
        sub = analisis.add_parser(nombre, help=ayuda)
        _agregar_layout(sub)
        _agregar_tasas(sub)
        sub.add_argument('--method', choices=['trigger', 'exact'], default='exact', help='Definición usada')
        sub.add_argument('--samples', type=int, default=100000, help='Cantidad de mapas muestreados')
        sub.add_argument('--threads', type=int, help='Hilos')
        sub.add_argument('--enumeration-budget', type=int, help='Máximo L^(2*c*r) a enumerar')
        if nombre == 'sweep':
            sub.add_argument('--totals', default='0.01,0.05,0.1,0.1079,0.15,0.2',
                             help='Tasas totales separadas por coma')

    reduccion = analisis.add_parser('reduction', help='Reducción de rango por falla única y muestreada')
    _agregar_layout(reduccion)
    _agregar_tasas(reduccion)
    reduccion.add_argument('--samples', type=int, default=0, help='Mapas muestreados (0: sólo barrido)')
    reduccion.add_argument('--threads', type=int, help='Hilos')

    return parser


COMANDOS = {
    'compile': cmd_compile,
    'gen-faults': cmd_gen_faults,
    'analyze': cmd_analyze,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Punto de entrada; devuelve el código de salida."""
    args = configurar_argumentos().parse_args(argv)
    try:
        config = ConfigManager(args.config)
        configurar_logging(config, args.log_level)
        errores = config.validar_configuracion()
        if errores:
            raise ConfigError(describir_errores(errores))
        logger.debug(f"Configuración efectiva: {config.obtener_info_sistema()}")
        return COMANDOS[args.comando](args, config)
    except CompiladorIMCError as e:
        logger.error(str(e))
        return codigo_salida(e)
    except KeyboardInterrupt:
        logger.warning("Interrupción por teclado")
        return 130
    except Exception as e:
        logger.error(f"Error interno: {e}")
        logger.debug(traceback.format_exc())
        return 1
