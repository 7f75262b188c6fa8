"""
Config Manager del compilador IMC

Lee un archivo INI con configparser sobre valores por defecto y expone
objetos tipados por sección (solver, analisis, tabla, compilacion,
simulacion, logging).
"""

import configparser
import logging
import os
from typing import List

from exceptions import ConfigError, ConfigInvalidError

logger = logging.getLogger(__name__)

FORCE_PATHS = ("auto", "table", "ilp")
NIVELES_LOG = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


class ConfigManager:
    def __init__(self, config_file="config/compilador.conf"):
        self.config_file = config_file
        # Sin interpolación: el formato de logging usa %(...)s
        self.config = configparser.ConfigParser(interpolation=None)

        # Crear configuración por defecto ANTES de cargar
        self._create_defaults()

        # Cargar configuración desde archivo
        self.load_config()

        # Crear objetos tipados por sección
        self._create_compatibility_objects()

    def _create_defaults(self):
        """Crear configuración por defecto"""
        self.config['SOLVER'] = {
            'max_variables': '64',
            'max_nodos': '200000',
        }

        self.config['ANALISIS'] = {
            'enumeration_budget': str(2 ** 24),
        }

        self.config['TABLA'] = {
            'table_budget': '4096',
            'max_entradas': str(2 ** 16),
        }

        self.config['COMPILACION'] = {
            'force_path': 'auto',
            'threads': '1',
        }

        self.config['SIMULACION'] = {
            'p_sa0': '0.0175',
            'p_sa1': '0.0904',
            'semilla': '0',
            'muestras_por_bloque': '65536',
        }

        self.config['LOGGING'] = {
            'nivel': 'INFO',
            'archivo': '',
            'formato': '%(asctime)s - %(name)s - %(levelname)s - %(message)s',
            'max_size_mb': '10',
            'backup_count': '5',
        }

    def _create_compatibility_objects(self):
        """Crear objetos tipados a partir de las secciones"""

        class SolverConfig:
            def __init__(self, cm):
                self.max_variables = cm._entero('SOLVER', 'max_variables')
                self.max_nodos = cm._entero('SOLVER', 'max_nodos')

        class AnalisisConfig:
            def __init__(self, cm):
                self.enumeration_budget = cm._entero('ANALISIS', 'enumeration_budget')

        class TablaConfig:
            def __init__(self, cm):
                self.table_budget = cm._entero('TABLA', 'table_budget')
                self.max_entradas = cm._entero('TABLA', 'max_entradas')

        class CompilacionConfig:
            def __init__(self, cm):
                self.force_path = cm.get('COMPILACION', 'force_path', 'auto').strip().lower()
                self.threads = cm._entero('COMPILACION', 'threads')

        class SimulacionConfig:
            def __init__(self, cm):
                self.p_sa0 = cm._real('SIMULACION', 'p_sa0')
                self.p_sa1 = cm._real('SIMULACION', 'p_sa1')
                self.semilla = cm._entero('SIMULACION', 'semilla')
                self.muestras_por_bloque = cm._entero('SIMULACION', 'muestras_por_bloque')

        class LoggingConfig:
            def __init__(self, cm):
                self.nivel = cm.get('LOGGING', 'nivel', 'INFO').strip().upper()
                self.archivo = cm.get('LOGGING', 'archivo', '').strip()
                self.formato = cm.get('LOGGING', 'formato',
                                      '%(asctime)s - %(name)s - %(levelname)s - %(message)s')
                self.max_size_mb = cm._entero('LOGGING', 'max_size_mb')
                self.backup_count = cm._entero('LOGGING', 'backup_count')

        self.solver = SolverConfig(self)
        self.analisis = AnalisisConfig(self)
        self.tabla = TablaConfig(self)
        self.compilacion = CompilacionConfig(self)
        self.simulacion = SimulacionConfig(self)
        self.logging = LoggingConfig(self)

    def _entero(self, section, key) -> int:
        valor = self.get(section, key)
        try:
            return int(valor)
        except (TypeError, ValueError):
            raise ConfigInvalidError(section, key, str(valor), "se esperaba un entero")

    def _real(self, section, key) -> float:
        valor = self.get(section, key)
        try:
            return float(valor)
        except (TypeError, ValueError):
            raise ConfigInvalidError(section, key, str(valor), "se esperaba un número")

    def load_config(self):
        """Cargar configuración desde archivo; si no existe se usan los valores por defecto"""
        if not os.path.exists(self.config_file):
            logger.debug(f"Archivo de configuración no existe, usando valores por defecto: {self.config_file}")
            return
        try:
            with open(self.config_file, 'r', encoding='utf-8') as f:
                self.config.read_file(f)
            logger.info(f"Configuración cargada: {self.config_file}")
        except configparser.Error as e:
            raise ConfigError(f"No se pudo leer {self.config_file}: {e}")

    def save_config(self):
        """Guardar configuración a archivo"""
        config_dir = os.path.dirname(self.config_file)
        if config_dir:
            os.makedirs(config_dir, exist_ok=True)

        with open(self.config_file, 'w', encoding='utf-8') as f:
            self.config.write(f)
        logger.info(f"Configuración guardada: {self.config_file}")

    def get(self, section, key, fallback=None):
        """Obtener valor de configuración"""
        return self.config.get(section, key, fallback=fallback)

    def set(self, section, key, value):
        """Establecer valor de configuración (en memoria; usar save_config para persistir)"""
        if section not in self.config:
            self.config[section] = {}
        self.config[section][key] = str(value)

        # Actualizar objetos tipados
        self._create_compatibility_objects()

    def validar_configuracion(self) -> List[str]:
        """Validar configuración actual"""
        errores = []

        for nombre, valor in (
            ('SOLVER.max_variables', self.solver.max_variables),
            ('SOLVER.max_nodos', self.solver.max_nodos),
            ('ANALISIS.enumeration_budget', self.analisis.enumeration_budget),
            ('TABLA.table_budget', self.tabla.table_budget),
            ('TABLA.max_entradas', self.tabla.max_entradas),
            ('COMPILACION.threads', self.compilacion.threads),
            ('SIMULACION.muestras_por_bloque', self.simulacion.muestras_por_bloque),
        ):
            if valor <= 0:
                errores.append(f"{nombre} debe ser positivo: {valor}")

        if self.compilacion.force_path not in FORCE_PATHS:
            errores.append(f"COMPILACION.force_path no válido: {self.compilacion.force_path}")

        p_sa0, p_sa1 = self.simulacion.p_sa0, self.simulacion.p_sa1
        if p_sa0 < 0 or p_sa1 < 0 or p_sa0 + p_sa1 > 1:
            errores.append(f"Tasas de falla no válidas: p_sa0={p_sa0}, p_sa1={p_sa1}")

        if self.logging.nivel not in NIVELES_LOG:
            errores.append(f"LOGGING.nivel no válido: {self.logging.nivel}")

        return errores

    def politica_compilacion(self):
        """CompilePolicy derivada de las secciones COMPILACION, TABLA, ANALISIS y SOLVER"""
        from pipeline import CompilePolicy

        return CompilePolicy(
            force_path=self.compilacion.force_path,
            table_budget=self.tabla.table_budget,
            thread_count=self.compilacion.threads,
            enumeration_budget=self.analisis.enumeration_budget,
            max_variables=self.solver.max_variables,
            max_nodes=self.solver.max_nodos,
            max_table_entries=self.tabla.max_entradas,
        )

    def tasas_fallas(self):
        """FaultRates de la sección SIMULACION"""
        from faultsim import FaultRates

        return FaultRates(self.simulacion.p_sa0, self.simulacion.p_sa1)

    def obtener_info_sistema(self):
        """Resumen de la configuración efectiva para el log de arranque"""
        return {
            'config_file': self.config_file,
            'force_path': self.compilacion.force_path,
            'threads': self.compilacion.threads,
            'table_budget': self.tabla.table_budget,
            'enumeration_budget': self.analisis.enumeration_budget,
            'max_variables': self.solver.max_variables,
            'p_sa0': self.simulacion.p_sa0,
            'p_sa1': self.simulacion.p_sa1,
            'logging_nivel': self.logging.nivel,
        }
