"""
Indicador de progreso para variantes de muestreo e instancias de verificación
"""

from .colors import colorize


class ProgressIndicator:
    """
    Mensaje inicial, un punto por unidad terminada y el resultado con el contador
    """

    def __init__(self, message: str, use_colors: bool = True, total: int | None = None):
        self.message = message
        self.active = False
        self.use_colors = use_colors
        self.total = total
        self.done = 0

    def start(self):
        self.active = True
        self.done = 0
        print(f"{colorize('[INFO]', 'BLUE', self.use_colors)} {self.message}", end="", flush=True)

    def update(self, status: str = "."):
        """Marca una unidad de trabajo terminada"""
        if self.active:
            self.done += 1
            print(colorize(status, 'CYAN', self.use_colors), end="", flush=True)

    def complete(self, success: bool = True):
        if not self.active:
            return
        counter = f" {self.done}/{self.total}" if self.total else ""
        tag = colorize('[OK]', 'BRIGHT_GREEN', self.use_colors) if success \
            else colorize('[FAILED]', 'BRIGHT_RED', self.use_colors)
        print(f"{counter} {tag}")
        self.active = False
