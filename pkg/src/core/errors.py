"""
Jerarquía de excepciones del motor de Monte Carlo
"""


class CGMCError(Exception):
    """
    Error base del proyecto
    """


class ConfigurationError(CGMCError, ValueError):
    """
    Configuración inválida: geometría inconsistente, estrategia desconocida,
    clave no reconocida o tipo incorrecto en un archivo de configuración
    """

    def __init__(self, message: str, line: int | None = None, key: str | None = None):
        self.line = line
        self.key = key
        location = []
        if line is not None:
            location.append(f"línea {line}")
        if key is not None:
            location.append(f"clave '{key}'")
        if location:
            message = f"{message} ({', '.join(location)})"
        super().__init__(message)


class ArgumentError(CGMCError, ValueError):
    """
    Argumento fuera del dominio de una operación
    """


class StateSpaceError(CGMCError, ValueError):
    """
    Espacio de estados demasiado grande para enumeración exacta
    """


class StatisticsError(CGMCError, ValueError):
    """
    Estadística indefinida (sin propuestas, sin muestras, sin rasgos)
    """


class VerificationError(CGMCError, AssertionError):
    """
    Falla de una verificación exacta (balance detallado, cotas espectrales)
    """
