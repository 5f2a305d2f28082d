"""
Tests unitarios para las utilidades CLI del orquestador de experimentos.
"""

from unittest.mock import patch

import pytest

from cgmc_cli.cli.parser import CLIConfig, create_cli_parser
from cgmc_cli.utils.colors import Colors, colorize, print_colored_message, should_use_colors
from cgmc_cli.utils.progress import ProgressIndicator
from cgmc_cli.utils.validator import RunNameValidator, format_file_size


class TestColors:
    """
    Clase de tests para la funcionalidad de colores ANSI.
    """

    def test_colors_constants_exist(self):
        for color in ['RESET', 'BOLD', 'YELLOW', 'BLUE', 'CYAN', 'WHITE', 'BRIGHT_RED', 'BRIGHT_GREEN',
                      'BRIGHT_YELLOW', 'BRIGHT_BLUE']:
            assert isinstance(getattr(Colors, color), str)

    def test_colors_disable(self, restore_colors):
        """
        Test que verifica que Colors.disable() elimina todos los códigos de color.
        """
        Colors.disable()
        assert Colors.BLUE == ''
        assert Colors.BRIGHT_RED == ''
        assert Colors.RESET == ''

    @pytest.mark.parametrize("no_color_flag,isatty_result,expected", [
        (False, True, True),
        (True, True, False),
        (False, False, False),
        (True, False, False),
    ])
    def test_should_use_colors(self, monkeypatch, no_color_flag, isatty_result, expected):
        """
        Test parametrizado para verificar should_use_colors() en diferentes escenarios.
        """
        monkeypatch.delenv('NO_COLOR', raising=False)
        with patch('sys.stdout.isatty', return_value=isatty_result):
            assert should_use_colors(no_color_flag) == expected

    def test_no_color_environment(self, monkeypatch):
        monkeypatch.setenv('NO_COLOR', '1')
        with patch('sys.stdout.isatty', return_value=True):
            assert should_use_colors(False) is False

    def test_colorize(self):
        assert colorize('texto', 'CYAN', use_colors=False) == 'texto'
        assert colorize('texto', 'CYAN') == f"{Colors.CYAN}texto{Colors.RESET}"

    def test_print_colored_message_with_colors(self):
        with patch('builtins.print') as mock_print:
            print_colored_message('INFO', 'Mensaje de prueba', use_colors=True)

            mock_print.assert_called_once()
            call_args = mock_print.call_args[0][0]
            assert '[INFO]' in call_args
            assert 'Mensaje de prueba' in call_args
            assert Colors.BLUE in call_args

    def test_print_colored_message_without_colors(self):
        with patch('builtins.print') as mock_print:
            print_colored_message('FAIL', 'balance detallado', use_colors=False)
            mock_print.assert_called_once_with('[FAIL] balance detallado')

    @pytest.mark.parametrize("level", ['INFO', 'SUCCESS', 'PASS', 'WARNING', 'ERROR', 'FAIL', 'CANCELLED', 'OTRO'])
    def test_print_colored_message_different_levels(self, level):
        """
        Test parametrizado para diferentes niveles de mensaje.
        """
        with patch('builtins.print') as mock_print:
            print_colored_message(level, 'Mensaje', use_colors=True)
            assert f'[{level}]' in mock_print.call_args[0][0]


class TestProgressIndicator:
    """
    Clase de tests para el indicador de progreso por unidades de trabajo.
    """

    def test_initialization(self):
        progress = ProgressIndicator("Variantes", use_colors=True, total=4)
        assert progress.message == "Variantes"
        assert progress.active is False
        assert progress.done == 0

    def test_start_does_not_end_line(self):
        progress = ProgressIndicator("Variantes", use_colors=False)
        with patch('builtins.print') as mock_print:
            progress.start()
            assert progress.active is True
            assert mock_print.call_args[1]['end'] == ""
            assert mock_print.call_args[1]['flush'] is True
            assert "Variantes" in mock_print.call_args[0][0]

    def test_update_counts_units(self):
        progress = ProgressIndicator("Variantes", use_colors=False, total=3)
        with patch('builtins.print'):
            progress.start()
            progress.update()
            progress.update()
        assert progress.done == 2

    def test_update_inactive_does_nothing(self):
        progress = ProgressIndicator("Variantes", use_colors=False)
        with patch('builtins.print') as mock_print:
            progress.update()
            mock_print.assert_not_called()
        assert progress.done == 0

    @pytest.mark.parametrize("success,tag", [(True, '[OK]'), (False, '[FAILED]')])
    def test_complete_prints_counter(self, success, tag):
        """
        Test parametrizado que verifica el contador y la etiqueta final.
        """
        progress = ProgressIndicator("Variantes", use_colors=False, total=3)
        with patch('builtins.print') as mock_print:
            progress.start()
            progress.update()
            progress.complete(success)
            assert mock_print.call_args[0][0] == f" 1/3 {tag}"
        assert progress.active is False

    def test_complete_without_start(self):
        progress = ProgressIndicator("Variantes", use_colors=False)
        with patch('builtins.print') as mock_print:
            progress.complete()
            mock_print.assert_not_called()


class TestCLIParser:
    """
    Clase de tests para el parser de argumentos y CLIConfig.
    """

    def test_run_with_preset(self):
        args = create_cli_parser().parse_args(['run', '--preset', 'kac_1d', '--seed', '5', '--quiet'])
        config = CLIConfig(args)
        assert config.command == 'run'
        assert config.preset == 'kac_1d'
        assert config.seed == 5
        assert config.show_progress is False
        assert config.use_colors is True
        assert config.out_dir == 'runs'

    def test_config_and_preset_are_exclusive(self):
        with pytest.raises(SystemExit):
            create_cli_parser().parse_args(['run', '--config', 'a.ini', '--preset', 'kac_1d'])

    def test_command_is_required(self):
        with pytest.raises(SystemExit):
            create_cli_parser().parse_args([])

    def test_verify_defaults_to_tiny_verification(self):
        config = CLIConfig(create_cli_parser().parse_args(['verify', '--no-color']))
        assert config.preset == 'tiny_verification'
        assert config.use_colors is False

    def test_verify_keeps_explicit_config(self):
        config = CLIConfig(create_cli_parser().parse_args(['verify', '--config', 'matriz.ini']))
        assert config.preset is None
        assert config.config == 'matriz.ini'

    def test_report_optional_run_name(self):
        parser = create_cli_parser()
        assert CLIConfig(parser.parse_args(['report'])).run_name is None
        config = CLIConfig(parser.parse_args(['report', 'kac_1d', '--out', 'otras']))
        assert config.run_name == 'kac_1d'
        assert config.out_dir == 'otras'
        assert config.seed is None

    def test_run_flags(self):
        config = CLIConfig(create_cli_parser().parse_args(['run', '-c', 'exp.ini', '-n', 'prueba', '-f', '-v']))
        assert config.config == 'exp.ini'
        assert config.name == 'prueba'
        assert config.force is True
        assert config.verbose is True
        assert 'run' in repr(config)


class TestRunNameValidator:
    """
    Clase de tests para la validación de nombres de corrida.
    """

    @pytest.mark.parametrize("name", ['benchmark_hysteresis', 'kac-1d.v2', 'corrida_2'])
    def test_valid_names(self, name):
        is_valid, _ = RunNameValidator.validate_run_name(name)
        assert is_valid

    @pytest.mark.parametrize("name,fragment", [
        ('', 'vacío'),
        ('con espacio', 'inválidos'),
        ('a/b', 'inválidos'),
        ('a' * 121, 'largo'),
        ('NUL', 'reservado'),
        ('..', 'reservado'),
    ])
    def test_invalid_names(self, name, fragment):
        """
        Test parametrizado de nombres rechazados y su mensaje.
        """
        is_valid, message = RunNameValidator.validate_run_name(name)
        assert not is_valid
        assert fragment in message

    def test_resolve_new_directory(self, temp_run_dir):
        run_dir, modified = RunNameValidator.resolve_run_dir(temp_run_dir, 'kac')
        assert run_dir == temp_run_dir / 'kac'
        assert modified is False

    def test_resolve_adds_suffix(self, temp_run_dir):
        (temp_run_dir / 'kac').mkdir()
        (temp_run_dir / 'kac_2').mkdir()
        run_dir, modified = RunNameValidator.resolve_run_dir(temp_run_dir, 'kac')
        assert run_dir == temp_run_dir / 'kac_3'
        assert modified is True

    def test_resolve_force_overwrite(self, temp_run_dir):
        (temp_run_dir / 'kac').mkdir()
        run_dir, modified = RunNameValidator.resolve_run_dir(temp_run_dir, 'kac', force_overwrite=True)
        assert run_dir == temp_run_dir / 'kac'
        assert modified is False

    def test_resolve_invalid_name(self, temp_run_dir):
        with pytest.raises(ValueError, match="inválido"):
            RunNameValidator.resolve_run_dir(temp_run_dir, 'a b')

    @pytest.mark.parametrize("size,expected", [
        (0, '0.0 B'),
        (512, '512.0 B'),
        (2048, '2.0 KB'),
        (5 * 1024 ** 2, '5.0 MB'),
        (3 * 1024 ** 4, '3.0 TB'),
    ])
    def test_format_file_size(self, size, expected):
        assert format_file_size(size) == expected
