"""
Configuración compartida para todos los tests del proyecto.
Incluye fixtures de redes diminutas, hamiltonianos de referencia y directorios temporales.
"""

import shutil
import tempfile
from pathlib import Path

import numpy as np
import pytest

from cgmc_cli.utils.colors import Colors
from cgmc_orchestrator import ExperimentOrchestrator
from src.core.energy import build_coarse_hamiltonian, build_hamiltonian
from src.core.lattice import build_geometry
from src.core.potentials import benchmark_potential, kac_smooth

TINY_CONFIG = """
[experiment]
name = diminuto
kind = hysteresis

[lattice]
d = 1
n = 8
q = 2

[potential]
kind = ising_curie_weiss
K = 1.0
J = 2.0

[ensemble]
beta = 1.0
h_min = 0.0
h_max = 2.0
h_points = 3

[sampler]
method = two_level
strategy = corrections
burn_in = 40
samples_per_point = 20
stride = 2
batches = 4
seed = 7

[compare]
variants = mh:2:corrections, two_level:2:corrections, cgmc:2:corrections
"""


@pytest.fixture
def temp_run_dir():
    """
    Fixture que crea un directorio temporal para corridas durante las pruebas.
    Se limpia automáticamente después de cada test.
    """
    temp_dir = tempfile.mkdtemp(prefix="test_cgmc_")
    yield Path(temp_dir)
    shutil.rmtree(temp_dir, ignore_errors=True)


@pytest.fixture
def restore_colors():
    """
    Fixture que restaura los códigos ANSI tras un test que llama a Colors.disable().
    """
    saved = {name: getattr(Colors, name) for name in dir(Colors) if name.isupper()}
    yield
    for name, value in saved.items():
        setattr(Colors, name, value)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def tiny_benchmark():
    """
    Fixture con el benchmark Ising + Curie-Weiss en una red 1D de 6 sitios y celdas de 2.
    Devuelve (H, H̄ completo, geometría gruesa).
    """
    geom, cg = build_geometry(1, 6, 2)
    H = build_hamiltonian(geom, benchmark_potential(1.0, 1.0, geom.N), 0.3, 0.8)
    return H, build_coarse_hamiltonian(H, cg, 'full'), cg


@pytest.fixture
def tiny_kac():
    """
    Fixture con un potencial de Kac suave (L=3) en una red 1D de 6 sitios y celdas de 2.
    """
    geom, cg = build_geometry(1, 6, 2)
    H = build_hamiltonian(geom, kac_smooth(1.5, 3.0, 1), -0.2, 1.0)
    return H, build_coarse_hamiltonian(H, cg, 'full'), cg


@pytest.fixture
def tiny_config_text():
    return TINY_CONFIG


@pytest.fixture
def tiny_config_file(temp_run_dir, tiny_config_text):
    path = temp_run_dir / 'diminuto.ini'
    path.write_text(tiny_config_text, encoding='utf-8')
    return path


@pytest.fixture
def orchestrator_instance(temp_run_dir, restore_colors):
    """
    Fixture que crea una instancia del ExperimentOrchestrator con configuración de test.
    """
    orchestrator = ExperimentOrchestrator(
        out_dir=str(temp_run_dir / 'runs'),
        show_progress=False,
        use_colors=False
    )
    yield orchestrator
    orchestrator.close_logging()
