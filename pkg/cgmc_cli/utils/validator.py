"""
Utilidades para validación de nombres de corrida y formato de tamaños
"""

import re
from pathlib import Path


class RunNameValidator:
    """
    Validador de nombres de directorios de corrida
    """

    RESERVED_NAMES = {
        'CON', 'PRN', 'AUX', 'NUL', 'COM1', 'COM2', 'COM3', 'COM4',
        'COM5', 'COM6', 'COM7', 'COM8', 'COM9', 'LPT1', 'LPT2',
        'LPT3', 'LPT4', 'LPT5', 'LPT6', 'LPT7', 'LPT8', 'LPT9'
    }

    INVALID_CHARS_PATTERN = r'[<>:"/\\|?*\s]'

    MAX_NAME_LENGTH = 120

    @classmethod
    def validate_run_name(cls, name: str) -> tuple[bool, str]:
        """
        Valida que el nombre de la corrida sirva como nombre de directorio
        """
        if not name:
            return False, "El nombre de la corrida no puede estar vacío"

        if re.search(cls.INVALID_CHARS_PATTERN, name):
            return False, "El nombre contiene espacios o caracteres inválidos"

        if len(name) > cls.MAX_NAME_LENGTH:
            return False, f"El nombre es muy largo (máximo {cls.MAX_NAME_LENGTH} caracteres)"

        if name.upper() in cls.RESERVED_NAMES or name in ('.', '..'):
            return False, f"'{name}' es un nombre reservado del sistema"

        return True, "Nombre de corrida válido"

    @classmethod
    def resolve_run_dir(cls, base_dir: Path, name: str, force_overwrite: bool = False) -> tuple[Path, bool]:
        """
        Directorio final de la corrida; si ya existe y no se fuerza, agrega un sufijo
        numérico (True indica que el nombre fue modificado)
        """
        is_valid, message = cls.validate_run_name(name)
        if not is_valid:
            raise ValueError(f"Nombre de corrida inválido: {message}")

        run_dir = Path(base_dir) / name
        if not run_dir.exists() or force_overwrite:
            return run_dir, False

        suffix = 2
        while (Path(base_dir) / f"{name}_{suffix}").exists():
            suffix += 1
        return Path(base_dir) / f"{name}_{suffix}", True


def format_file_size(size_bytes: int) -> str:
    """
    Formatea el tamaño del archivo en unidades legibles
    """
    for unit in ['B', 'KB', 'MB', 'GB']:
        if size_bytes < 1024.0:
            return f"{size_bytes:.1f} {unit}"
        size_bytes /= 1024.0
    return f"{size_bytes:.1f} TB"
