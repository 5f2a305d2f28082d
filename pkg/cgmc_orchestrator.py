#!/usr/bin/env python3

import logging
import sys
from pathlib import Path

from cgmc_cli.cli.parser import CLIConfig, create_cli_parser
from cgmc_cli.utils.colors import Colors, colorize, print_colored_message, should_use_colors
from cgmc_cli.utils.progress import ProgressIndicator
from cgmc_cli.utils.validator import RunNameValidator, format_file_size
from src.core.errors import CGMCError, ConfigurationError
from src.models.config import ExperimentConfig, load_config, load_preset, workers_from_env
from src.operations import (
    format_ops_report, list_runs, read_ops_rows, run_experiment, variants_of, verification_tasks,
)


class ExperimentOrchestrator:
    """
    Orquestador de experimentos: resuelve la configuración y el directorio de la corrida,
    configura el logging a archivo y ejecuta run / verify / report
    """

    def __init__(self, out_dir: str = "runs", show_progress: bool = True, use_colors: bool = True,
                 verbose: bool = False):
        self.out_dir = Path(out_dir)
        self.show_progress = show_progress
        self.use_colors = use_colors
        self.verbose = verbose
        self.file_handler = None
        self.logger = logging.getLogger(__name__)

        if not use_colors:
            Colors.disable()

    def setup_logging(self, run_dir: Path):
        """
        Configura el logging a <run_dir>/experiment.log; la consola la manejan los mensajes y el progreso
        """
        run_dir.mkdir(parents=True, exist_ok=True)
        level = logging.DEBUG if self.verbose else logging.INFO

        file_handler = logging.FileHandler(run_dir / "experiment.log", encoding='utf-8')
        file_handler.setLevel(level)
        file_handler.setFormatter(logging.Formatter('%(asctime)s - %(levelname)s - %(message)s'))

        for name in ('src', __name__):
            target = logging.getLogger(name)
            target.setLevel(level)
            if self.file_handler is not None:
                target.removeHandler(self.file_handler)
            target.addHandler(file_handler)
        if self.file_handler is not None:
            self.file_handler.close()
        self.file_handler = file_handler

    def close_logging(self):
        if self.file_handler is None:
            return
        for name in ('src', __name__):
            logging.getLogger(name).removeHandler(self.file_handler)
        self.file_handler.close()
        self.file_handler = None

    def _print_message(self, level: str, message: str):
        """Imprime mensaje con color si el progreso está habilitado"""
        if self.show_progress:
            print_colored_message(level, message, self.use_colors)

    def load_configuration(self, config_path: str | None = None, preset: str | None = None,
                           seed: int | None = None) -> ExperimentConfig | None:
        """
        Carga un archivo INI o un preset y aplica la semilla de la línea de comandos
        """
        try:
            if config_path is not None:
                config = load_config(config_path)
            elif preset is not None:
                config = load_preset(preset)
            else:
                raise ConfigurationError("Indique --config o --preset")
        except ConfigurationError as e:
            print_colored_message('ERROR', f"Configuración inválida: {e}", self.use_colors)
            return None
        return config.with_seed(seed)

    def _resolve_run_dir(self, name: str, force: bool) -> Path | None:
        try:
            run_dir, modified = RunNameValidator.resolve_run_dir(self.out_dir, name, force)
        except ValueError as e:
            print_colored_message('ERROR', str(e), self.use_colors)
            return None
        if modified:
            self._print_message('WARNING', f"Nombre de corrida modificado para evitar conflicto: {run_dir.name}")
        return run_dir

    def run(self, config: ExperimentConfig, name: str | None = None, force: bool = False) -> bool:
        """
        Ejecuta el experimento y escribe sus artefactos en <out>/<nombre>
        """
        run_dir = self._resolve_run_dir(name or config.experiment.name, force)
        if run_dir is None:
            return False
        self.setup_logging(run_dir)

        try:
            workers = workers_from_env()
            units = len(verification_tasks(config)) if config.experiment.kind == 'verification' \
                else len(variants_of(config))
        except ConfigurationError as e:
            print_colored_message('ERROR', f"Configuración inválida: {e}", self.use_colors)
            self.logger.error(str(e))
            return False

        progress = ProgressIndicator(f"Ejecutando '{config.experiment.name}' ({config.experiment.kind})",
                                     self.use_colors, total=units)
        if self.show_progress:
            progress.start()
        self.logger.info(f"Iniciando la corrida en {run_dir} con {workers} proceso(s)")
        try:
            summary = run_experiment(config, run_dir, workers,
                                     progress.update if self.show_progress else None)
        except CGMCError as e:
            if self.show_progress:
                progress.complete(False)
            self.logger.error(f"Error en el experimento: {e}")
            print_colored_message('ERROR', str(e), self.use_colors)
            return False
        except OSError as e:
            if self.show_progress:
                progress.complete(False)
            self.logger.error(f"Error de E/S: {e}")
            print_colored_message('ERROR', f"Error de escritura de artefactos: {e}", self.use_colors)
            return False

        if self.show_progress:
            progress.complete(summary.ok)
        for message in summary.messages:
            self._print_message('FAIL', message)
        total = sum(path.stat().st_size for path in summary.artifacts.values() if path.exists())
        self._print_message('INFO', f"Artefactos: {len(summary.artifacts)} ({format_file_size(total)})")
        self._print_message('INFO', f"Ubicación: {run_dir.absolute()}")
        self.logger.info(f"Corrida terminada: ok={summary.ok}, artefactos={sorted(summary.artifacts)}")
        return summary.ok

    def report(self, run_name: str) -> bool:
        """
        Imprime el conteo de operaciones (predicho, medido y nominal) de una corrida
        """
        run_dir = self.out_dir / run_name
        try:
            rows = read_ops_rows(run_dir)
        except CGMCError as e:
            print_colored_message('ERROR', str(e), self.use_colors)
            return False
        for line in format_ops_report(rows):
            print(line)
        exact = not any(row['exact'] == 'False' for row in rows)
        for row in rows:
            if row['m'] > row['n']:
                print_colored_message('FAIL', f"{row['variant']}: m > n", self.use_colors)
                exact = False
        return exact


def display_run_list(orchestrator: ExperimentOrchestrator, use_colors: bool):
    """
    Muestra las corridas existentes con el tamaño de sus artefactos
    """
    runs = list_runs(orchestrator.out_dir)
    if not runs:
        print(colorize("No se encontraron corridas", 'YELLOW', use_colors))
        return 0

    print(colorize(f"Corridas en {orchestrator.out_dir}:", 'CYAN', use_colors))
    print(colorize('-' * 50, 'CYAN', use_colors))
    for run in runs:
        name_str = f"{run['name']:<36}"
        size_str = f"{format_file_size(run['size']):>12}"
        print(f"{colorize(name_str, 'WHITE', use_colors)} {colorize(size_str, 'BRIGHT_BLUE', use_colors)}")
    return 0


def display_header(config: ExperimentConfig, use_colors: bool):
    """
    Muestra el experimento, la red y las variantes a ejecutar
    """
    lat = config.lattice
    print(colorize("Orquestador de Monte Carlo de grano grueso", 'CYAN', use_colors))
    print(f"Experimento: {colorize(config.experiment.name, 'BRIGHT_YELLOW', use_colors)} ({config.experiment.kind})")
    print(f"Red: d={lat.d}, n={lat.n}, q={lat.q}; semilla: {config.sampler.seed}")
    if config.experiment.kind != 'verification':
        labels = ', '.join(v.label for v in variants_of(config))
        print(f"Variantes: {colorize(labels, 'BRIGHT_YELLOW', use_colors)}")
    print(colorize('-' * 40, 'CYAN', use_colors))


def main(argv=None):
    """
    Función principal con interfaz de línea de comandos
    """
    parser = create_cli_parser()
    args = parser.parse_args(argv)
    config = CLIConfig(args)

    use_colors = should_use_colors(config.no_color)
    if not use_colors:
        Colors.disable()

    orchestrator = None
    try:
        orchestrator = ExperimentOrchestrator(
            out_dir=config.out_dir,
            show_progress=config.show_progress,
            use_colors=use_colors,
            verbose=config.verbose
        )

        if config.command == 'report':
            if config.run_name is None:
                return display_run_list(orchestrator, use_colors)
            return 0 if orchestrator.report(config.run_name) else 1

        experiment = orchestrator.load_configuration(config.config, config.preset, config.seed)
        if experiment is None:
            return 1
        if config.command == 'verify' and experiment.experiment.kind != 'verification':
            print_colored_message('ERROR', "verify requiere una configuración con kind = verification", use_colors)
            return 1

        if config.show_progress:
            display_header(experiment, use_colors)

        success = orchestrator.run(experiment, config.name, config.force)

        if success:
            if config.show_progress:
                print_colored_message('SUCCESS', 'Experimento completado exitosamente', use_colors)
            return 0
        else:
            if config.show_progress:
                print_colored_message('FAILED', 'El experimento falló', use_colors)
            return 1

    except KeyboardInterrupt:
        print_colored_message('CANCELLED', 'Experimento cancelado por el usuario', use_colors)
        return 130
    except Exception as e:
        print_colored_message('ERROR', f'Error inesperado: {e}', use_colors)
        return 1
    finally:
        if orchestrator is not None:
            orchestrator.close_logging()


if __name__ == "__main__":
    sys.exit(main())
