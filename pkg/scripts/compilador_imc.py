#!/usr/bin/env python3
"""
Punto de entrada del compilador IMC.

Uso:
    python3 scripts/compilador_imc.py compile --layout R2C2 --levels 4 \
        --weights pesos.json --faults fallas.json --out salida.json
"""

import sys
from pathlib import Path

try:
    sys.path.insert(0, str(Path(__file__).parent.parent / 'src'))
    from cli import main
except ImportError as e:
    print(f"Error importando módulos: {e}", file=sys.stderr)
    print("Ejecutar desde la raíz del proyecto", file=sys.stderr)
    sys.exit(1)


if __name__ == "__main__":
    sys.exit(main())
