"""
Excepciones personalizadas para el compilador IMC tolerante a fallas.

Este módulo define todas las excepciones específicas del proyecto,
proporcionando un manejo de errores granular y descriptivo. Cada familia
lleva su propio código de error, y la CLI traduce las excepciones a
códigos de salida con `codigo_salida`.
"""

from typing import Optional, Sequence


class CompiladorIMCError(Exception):
    """Excepción base para todos los errores del compilador IMC."""

    def __init__(self, mensaje: str, codigo_error: Optional[str] = None):
        super().__init__(mensaje)
        self.mensaje = mensaje
        self.codigo_error = codigo_error or "UNKNOWN_ERROR"

    def __str__(self):
        return f"[{self.codigo_error}] {self.mensaje}"


# ============================================================================
# EXCEPCIONES DE CONFIGURACIÓN
# ============================================================================

class ConfigError(CompiladorIMCError):
    """Error relacionado con la configuración del sistema."""

    def __init__(self, mensaje: str):
        super().__init__(mensaje, "CONFIG_ERROR")


class ConfigInvalidError(ConfigError):
    """Error cuando la configuración tiene valores inválidos."""

    def __init__(self, seccion: str, clave: str, valor: str, razon: str):
        mensaje = f"Configuración inválida [{seccion}][{clave}] = '{valor}': {razon}"
        super().__init__(mensaje)
        self.seccion = seccion
        self.clave = clave
        self.valor = valor
        self.razon = razon


# ============================================================================
# EXCEPCIONES DEL MODELO (agrupamiento, bitmaps, mapas de fallas)
# ============================================================================

class ModeloError(CompiladorIMCError):
    """Error base para tipos del modelo de celdas."""

    def __init__(self, mensaje: str):
        super().__init__(mensaje, "MODEL_ERROR")


class ConfiguracionAgrupamientoError(ModeloError):
    """Parámetros de agrupamiento fila-columna inválidos."""

    def __init__(self, columnas: int, filas: int, niveles: int, razon: str):
        mensaje = f"Agrupamiento R{filas}C{columnas} con L={niveles} inválido: {razon}"
        super().__init__(mensaje)
        self.columnas = columnas
        self.filas = filas
        self.niveles = niveles
        self.razon = razon


class ShapeMismatchError(ModeloError):
    """La forma de una matriz no coincide con la del agrupamiento."""

    def __init__(self, esperado: tuple, recibido: tuple, contexto: str = "matriz"):
        mensaje = f"Forma de {contexto} incompatible: esperado {esperado}, recibido {recibido}"
        super().__init__(mensaje)
        self.esperado = esperado
        self.recibido = recibido


class BitmapInvalidoError(ModeloError):
    """Un bitmap contiene valores fuera de [0, L-1]."""

    def __init__(self, niveles: int, minimo: int, maximo: int):
        mensaje = f"Valores de celda fuera de [0, {niveles - 1}]: rango recibido [{minimo}, {maximo}]"
        super().__init__(mensaje)
        self.niveles = niveles


class FaultMapInvalidoError(ModeloError):
    """Mapa de fallas con indicadores no binarios o SA0/SA1 superpuestos."""

    def __init__(self, razon: str):
        super().__init__(f"Mapa de fallas inválido: {razon}")
        self.razon = razon


class PesoInvalidoError(ModeloError):
    """Peso no entero o fuera del ancho de bits declarado."""

    def __init__(self, peso, razon: str):
        super().__init__(f"Peso inválido {peso!r}: {razon}")
        self.peso = peso
        self.razon = razon


# ============================================================================
# EXCEPCIONES DE PRESUPUESTO (enumeración y tablas)
# ============================================================================

class PresupuestoExcedidoError(CompiladorIMCError):
    """Un cálculo exhaustivo supera el presupuesto configurado."""

    def __init__(self, operacion: str, requerido: int, presupuesto: int, nombre_flag: str):
        mensaje = (f"{operacion} requiere {requerido} casos, supera el presupuesto "
                   f"{presupuesto} (ajustar {nombre_flag})")
        super().__init__(mensaje, "BUDGET_EXCEEDED")
        self.operacion = operacion
        self.requerido = requerido
        self.presupuesto = presupuesto
        self.nombre_flag = nombre_flag


class EnumeracionExcedidaError(PresupuestoExcedidoError):
    """El oráculo de enumeración excede `enumeration_budget`."""

    def __init__(self, requerido: int, presupuesto: int):
        super().__init__("Enumeración del conjunto representable", requerido,
                         presupuesto, "--enumeration-budget")


class TablaExcedidaError(PresupuestoExcedidoError):
    """La tabla de descomposición excede su presupuesto de entradas."""

    def __init__(self, requerido: int, presupuesto: int):
        super().__init__("Tabla de descomposición", requerido, presupuesto,
                         "--table-budget")


# ============================================================================
# EXCEPCIONES DEL SOLVER ILP
# ============================================================================

class SolverError(CompiladorIMCError):
    """Error base del solver ILP."""

    def __init__(self, mensaje: str):
        super().__init__(mensaje, "SOLVER_ERROR")


class LimiteSolverExcedidoError(SolverError):
    """El modelo supera el límite de variables o de nodos del solver."""

    def __init__(self, limite: str, valor: int, maximo: int):
        super().__init__(f"Límite de {limite} excedido: {valor} > {maximo}")
        self.limite = limite
        self.valor = valor
        self.maximo = maximo


class ModeloILPInvalidoError(SolverError):
    """Modelo ILP mal formado (cotas infinitas, dimensiones, coeficientes no enteros)."""

    def __init__(self, razon: str):
        super().__init__(f"Modelo ILP inválido: {razon}")
        self.razon = razon


# ============================================================================
# EXCEPCIONES DEL PIPELINE Y LA SIMULACIÓN
# ============================================================================

class RangoError(CompiladorIMCError):
    """Se pidió recortar (clamp) un peso que está dentro del rango representable."""

    def __init__(self, peso: int, minimo: int, maximo: int):
        super().__init__(f"El peso {peso} está dentro del rango [{minimo}, {maximo}]",
                         "RANGE_ERROR")
        self.peso = peso
        self.minimo = minimo
        self.maximo = maximo


class LongitudError(CompiladorIMCError):
    """Secuencias de pesos y mapas de fallas con distinta longitud."""

    def __init__(self, pesos: int, mapas: int):
        super().__init__(f"Longitudes incompatibles: {pesos} pesos y {mapas} mapas de fallas",
                         "LENGTH_MISMATCH")
        self.pesos = pesos
        self.mapas = mapas


class TasasInvalidasError(CompiladorIMCError):
    """Probabilidades de falla fuera de rango."""

    def __init__(self, p_sa0: float, p_sa1: float):
        super().__init__(f"Tasas de falla inválidas: p_sa0={p_sa0}, p_sa1={p_sa1} "
                         f"(se requiere 0 <= p y p_sa0 + p_sa1 <= 1)", "INVALID_RATES")
        self.p_sa0 = p_sa0
        self.p_sa1 = p_sa1


# ============================================================================
# EXCEPCIONES DE ARCHIVOS
# ============================================================================

class ArchivoError(CompiladorIMCError):
    """Error base para archivos de entrada/salida."""

    def __init__(self, mensaje: str, archivo: Optional[str] = None, codigo: str = "FILE_ERROR"):
        super().__init__(mensaje, codigo)
        self.archivo = archivo


class FormatoArchivoError(ArchivoError):
    """Documento JSON mal formado o con campos inválidos."""

    def __init__(self, archivo: str, razon: str):
        super().__init__(f"Archivo {archivo} mal formado: {razon}", archivo, "FILE_FORMAT_ERROR")
        self.razon = razon


class LayoutIncompatibleError(ArchivoError):
    """Layout, niveles o cantidades no coinciden entre archivos y flags."""

    def __init__(self, razon: str, archivo: Optional[str] = None):
        super().__init__(f"Layout incompatible: {razon}", archivo, "LAYOUT_MISMATCH")
        self.razon = razon


# ============================================================================
# UTILIDADES DE EXCEPCIONES
# ============================================================================

def codigo_salida(excepcion: BaseException) -> int:
    """
    Traduce una excepción al código de salida de la CLI.

    Args:
        excepcion: La excepción a traducir

    Returns:
        int: 2 formato/tasas/layout mal escrito, 3 layout/longitud, 4 presupuesto, 1 otros
    """
    if isinstance(excepcion, (FormatoArchivoError, TasasInvalidasError, ConfigError,
                               ConfiguracionAgrupamientoError, FaultMapInvalidoError, PesoInvalidoError)):
        return 2
    if isinstance(excepcion, (LayoutIncompatibleError, LongitudError, ShapeMismatchError)):
        return 3
    if isinstance(excepcion, PresupuestoExcedidoError):
        return 4
    return 1


def es_error_recuperable(excepcion: Exception) -> bool:
    """
    Determina si el pipeline puede continuar cambiando de camino.

    Los presupuestos excedidos son recuperables (tabla -> ILP); el resto no.

    Args:
        excepcion: La excepción a evaluar

    Returns:
        bool: True si el error es recuperable
    """
    errores_recuperables = (
        TablaExcedidaError,
        EnumeracionExcedidaError,
    )
    return isinstance(excepcion, errores_recuperables)


def describir_errores(errores: Sequence[str]) -> str:
    """Une una lista de errores de validación en un único mensaje."""
    return "; ".join(errores)


# Mapeo de familias a códigos de error
ERROR_CODES = {
    ConfigError: "CONFIG_ERROR",
    ModeloError: "MODEL_ERROR",
    PresupuestoExcedidoError: "BUDGET_EXCEEDED",
    SolverError: "SOLVER_ERROR",
    RangoError: "RANGE_ERROR",
    LongitudError: "LENGTH_MISMATCH",
    TasasInvalidasError: "INVALID_RATES",
    ArchivoError: "FILE_ERROR",
}
