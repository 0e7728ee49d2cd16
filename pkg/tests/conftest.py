"""
Configuration et fixtures pytest pour les tests
"""
import pytest
import sys
import os

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from core.config import Settings
from core.mesh import MeshGrading, fill_holes, mesh_closed_surface, mesh_domain
from core.packing import make_domain_spec, select_separated_points
from core.surface import equilateral_torus, sphere, square_torus


@pytest.fixture(autouse=True)
def fresh_settings(monkeypatch):
    """Réinitialise le singleton de configuration et neutralise les variables STEKLAB_*"""
    for key in list(os.environ):
        if key.startswith('STEKLAB_'):
            monkeypatch.delenv(key, raising=False)
    Settings.reset_instance()
    yield
    Settings.reset_instance()


@pytest.fixture
def sphere_surface():
    """Fixture pour la sphère d'aire 1"""
    return sphere()


@pytest.fixture
def square_torus_surface():
    """Fixture pour le tore carré"""
    return square_torus()


@pytest.fixture
def equilateral_torus_surface():
    """Fixture pour le tore équilatéral"""
    return equilateral_torus()


@pytest.fixture
def sphere_packing(sphere_surface):
    """Fixture pour un empilement de 4 centres sur la sphère"""
    return select_separated_points(sphere_surface, 4, seed=0, n_candidates=4000)


@pytest.fixture
def sphere_domain_spec(sphere_packing):
    """Fixture pour la spécification k = 4, α = 2

    Quatre centres séparés de πR/2 ≈ 0.443 excluent α = 1.5 (2(r_i + r_j) = 0.5).
    """
    return make_domain_spec(sphere_packing, 2.0)


@pytest.fixture
def sphere_domain_mesh(sphere_domain_spec):
    """Fixture pour un domaine perforé grossier sur la sphère (k = 4, α = 2)"""
    return mesh_domain(sphere_domain_spec.surface, sphere_domain_spec, MeshGrading(target_h=0.04))


@pytest.fixture
def sphere_filled_mesh(sphere_domain_mesh):
    """Fixture pour le domaine de la sphère rebouché"""
    return fill_holes(sphere_domain_mesh)


@pytest.fixture
def torus_domain_mesh(square_torus_surface):
    """Fixture pour un domaine perforé grossier sur le tore carré (k = 8)"""
    packing = select_separated_points(square_torus_surface, 8, seed=0, n_candidates=4000)
    spec = make_domain_spec(packing, 1.5)
    return mesh_domain(square_torus_surface, spec, MeshGrading(target_h=0.04))


@pytest.fixture
def coarse_sphere_mesh(sphere_surface):
    """Fixture pour un maillage fermé grossier de la sphère"""
    return mesh_closed_surface(sphere_surface, 0.05)
