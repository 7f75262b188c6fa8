"""
Configuración de logging del compilador.

Consola con colorlog (a stderr, la salida estándar queda para resultados)
y, si [LOGGING] archivo está definido, un RotatingFileHandler.
"""

import logging
import sys
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Optional

import colorlog

LOGGER_RAIZ = "compilador_imc"

NIVEL_MAP = {
    'DEBUG': logging.DEBUG,
    'INFO': logging.INFO,
    'WARNING': logging.WARNING,
    'ERROR': logging.ERROR,
    'CRITICAL': logging.CRITICAL,
}

FORMATO_CONSOLA = "%(log_color)s%(levelname)-8s%(reset)s %(name)s: %(message)s"
FORMATO_ARCHIVO = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def configurar_logging(config=None, nivel: Optional[str] = None) -> logging.Logger:
    """
    Configura el logger raíz del proyecto.

    Los módulos usan `logging.getLogger(__name__)`; como sus nombres no
    cuelgan de LOGGER_RAIZ, los handlers se instalan en el logger raíz y
    se marcan para no duplicarlos en llamadas sucesivas.

    Args:
        config: ConfigManager opcional (sección LOGGING)
        nivel: nivel explícito, tiene prioridad sobre la configuración

    Returns:
        logging.Logger: logger del proyecto
    """
    log_config = getattr(config, 'logging', None)
    nombre_nivel = (nivel or (log_config.nivel if log_config else 'WARNING')).upper()
    nivel_num = NIVEL_MAP.get(nombre_nivel, logging.INFO)

    raiz = logging.getLogger()
    raiz.setLevel(nivel_num)

    # Evitar duplicar handlers
    for handler in list(raiz.handlers):
        if getattr(handler, '_compilador_imc', False):
            raiz.removeHandler(handler)
            handler.close()

    console_handler = colorlog.StreamHandler(sys.stderr)
    console_handler.setLevel(nivel_num)
    console_handler.setFormatter(colorlog.ColoredFormatter(
        FORMATO_CONSOLA,
        log_colors={
            'DEBUG': 'cyan',
            'INFO': 'green',
            'WARNING': 'yellow',
            'ERROR': 'red',
            'CRITICAL': 'bold_red',
        },
    ))
    console_handler._compilador_imc = True
    raiz.addHandler(console_handler)

    if log_config and log_config.archivo:
        Path(log_config.archivo).parent.mkdir(parents=True, exist_ok=True)
        file_handler = RotatingFileHandler(
            log_config.archivo,
            maxBytes=log_config.max_size_mb * 1024 * 1024,
            backupCount=log_config.backup_count,
            encoding='utf-8',
        )
        file_handler.setLevel(nivel_num)
        file_handler.setFormatter(logging.Formatter(log_config.formato or FORMATO_ARCHIVO))
        file_handler._compilador_imc = True
        raiz.addHandler(file_handler)

    logger = logging.getLogger(LOGGER_RAIZ)
    logger.debug(f"Logging configurado: nivel={nombre_nivel}")
    return logger
