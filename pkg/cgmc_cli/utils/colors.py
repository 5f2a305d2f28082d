"""
Colores ANSI para la salida del orquestador y detección de soporte de color
"""

import os
import sys


class Colors:
    """
    Códigos ANSI usados por mensajes, tablas de conteo y resultados de verificación
    """
    RESET = '\033[0m'
    BOLD = '\033[1m'

    YELLOW = '\033[33m'
    BLUE = '\033[34m'
    MAGENTA = '\033[35m'
    CYAN = '\033[36m'
    WHITE = '\033[37m'

    BRIGHT_RED = '\033[91m'
    BRIGHT_GREEN = '\033[92m'
    BRIGHT_YELLOW = '\033[93m'
    BRIGHT_BLUE = '\033[94m'

    @classmethod
    def disable(cls):
        """Deshabilita todos los colores"""
        for attr in dir(cls):
            if attr.isupper():
                setattr(cls, attr, '')


LEVEL_COLORS = {
    'INFO': 'BLUE',
    'SUCCESS': 'BRIGHT_GREEN',
    'PASS': 'BRIGHT_GREEN',
    'WARNING': 'BRIGHT_YELLOW',
    'ERROR': 'BRIGHT_RED',
    'FAILED': 'BRIGHT_RED',
    'FAIL': 'BRIGHT_RED',
    'CANCELLED': 'YELLOW',
}


def should_use_colors(no_color_flag: bool = False) -> bool:
    """
    Colores solo en un terminal interactivo, sin --no-color ni la variable NO_COLOR
    """
    if no_color_flag or os.environ.get('NO_COLOR'):
        return False
    return sys.stdout.isatty()


def colorize(text: str, color: str, use_colors: bool = True) -> str:
    if not use_colors:
        return text
    return f"{getattr(Colors, color, '')}{text}{Colors.RESET}"


def print_colored_message(level: str, message: str, use_colors: bool = True):
    """
    Imprime "[NIVEL] mensaje" con el color del nivel
    """
    tag = colorize(f"[{level}]", LEVEL_COLORS.get(level, 'WHITE'), use_colors)
    print(f"{tag} {message}")
