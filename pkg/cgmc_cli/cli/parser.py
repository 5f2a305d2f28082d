"""
Parser de argumentos de línea de comandos para el orquestador de experimentos
"""

import argparse


def _add_common_arguments(parser: argparse.ArgumentParser):
    parser.add_argument(
        '--out', '-o',
        type=str,
        default='runs',
        help='Directorio base de corridas (predeterminado: runs)'
    )

    parser.add_argument(
        '--verbose', '-v',
        action='store_true',
        help='Habilitar salida detallada (logging DEBUG)'
    )

    parser.add_argument(
        '--quiet', '-q',
        action='store_true',
        help='Deshabilitar indicadores de progreso'
    )

    parser.add_argument(
        '--no-color',
        action='store_true',
        help='Deshabilitar salida coloreada'
    )


def _add_run_arguments(parser: argparse.ArgumentParser):
    source = parser.add_mutually_exclusive_group()
    source.add_argument(
        '--config', '-c',
        type=str,
        help='Archivo INI de configuración del experimento'
    )
    source.add_argument(
        '--preset', '-p',
        type=str,
        help='Nombre de un preset incluido (p. ej. benchmark_hysteresis)'
    )

    parser.add_argument(
        '--seed', '-s',
        type=int,
        help='Semilla del generador (reemplaza sampler.seed)'
    )

    parser.add_argument(
        '--name', '-n',
        type=str,
        help='Nombre del directorio de la corrida (predeterminado: nombre del experimento)'
    )

    parser.add_argument(
        '--force', '-f',
        action='store_true',
        help='Sobrescribir una corrida existente con el mismo nombre'
    )


def create_cli_parser():
    """
    Crea el parser de argumentos con los subcomandos run, verify y report
    """
    parser = argparse.ArgumentParser(
        description='Orquestador de experimentos de Monte Carlo de grano grueso en dos niveles',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Ejemplos de uso:
  %(prog)s run --preset benchmark_hysteresis         # Histéresis del modelo de referencia
  %(prog)s run --config exp.ini --seed 7             # Configuración propia con otra semilla
  %(prog)s run --preset kac_1d --name kac --force    # Sobrescribir la corrida 'kac'
  %(prog)s verify                                    # Matriz de verificación exacta
  %(prog)s report                                    # Listar corridas existentes
  %(prog)s report benchmark_hysteresis               # Conteo de operaciones de una corrida
  %(prog)s run --preset morse_discs --quiet          # Sin indicadores de progreso
  %(prog)s verify --no-color                         # Deshabilitar salida coloreada
        """
    )

    subparsers = parser.add_subparsers(dest='command', required=True)

    run = subparsers.add_parser('run', help='Ejecutar un experimento')
    _add_run_arguments(run)
    _add_common_arguments(run)

    verify = subparsers.add_parser('verify', help='Ejecutar la matriz de verificación exacta')
    _add_run_arguments(verify)
    _add_common_arguments(verify)

    report = subparsers.add_parser('report', help='Listar corridas o resumir el conteo de operaciones')
    report.add_argument(
        'run_name',
        nargs='?',
        help='Nombre de la corrida a resumir; sin él se listan las corridas'
    )
    _add_common_arguments(report)

    return parser


class CLIConfig:
    """
    Configuración derivada de los argumentos de línea de comandos
    """

    def __init__(self, args):
        self.command = args.command
        self.config = getattr(args, 'config', None)
        self.preset = getattr(args, 'preset', None)
        self.seed = getattr(args, 'seed', None)
        self.name = getattr(args, 'name', None)
        self.force = getattr(args, 'force', False)
        self.run_name = getattr(args, 'run_name', None)
        self.out_dir = args.out
        self.verbose = args.verbose
        self.quiet = args.quiet
        self.no_color = args.no_color

        # Configuraciones derivadas
        self.show_progress = not args.quiet
        self.use_colors = not args.no_color
        if self.command == 'verify' and self.config is None and self.preset is None:
            self.preset = 'tiny_verification'

    def __repr__(self):
        return f"CLIConfig(command={self.command}, preset={self.preset}, out_dir={self.out_dir}, quiet={self.quiet})"
