"""
Tests d'intégration de l'interface en ligne de commande
"""
import json
import math

import pytest
from click.testing import CliRunner

from app import cli
from core.experiments import emit_results
from core.packing import DiskPacking
from models import SweepRecord

pytestmark = pytest.mark.integration


@pytest.fixture
def runner():
    """Fixture pour le lanceur click"""
    return CliRunner()


@pytest.fixture
def packing_file(runner, tmp_path):
    """Empilement de 6 centres sur la sphère écrit par la commande pack"""
    path = tmp_path / 'packing.json'
    result = runner.invoke(cli, ['pack', '--k', '6', '--out', str(path)])
    assert result.exit_code == 0, result.output
    return path


@pytest.fixture
def domain_mesh_file(runner, packing_file, tmp_path):
    """Domaine perforé maillé par la commande mesh"""
    path = tmp_path / 'omega.mesh'
    result = runner.invoke(cli, ['mesh', '--packing', str(packing_file), '--h', '0.04', '--out', str(path)])
    assert result.exit_code == 0, result.output
    assert 'χ = -4' in result.output
    return path


class TestPackCommand:
    """Tests pour la commande pack"""

    def test_pack_to_file(self, packing_file):
        """Vérifie l'empilement écrit et ses rayons k^{-α}"""
        packing = DiskPacking.load(packing_file)
        assert packing.k == 6
        assert packing.alpha == 1.5
        assert packing.radii.tolist() == pytest.approx([6 ** -1.5] * 6)

    def test_pack_to_stdout(self, runner):
        """Vérifie la sortie JSON sur la sortie standard"""
        result = runner.invoke(cli, ['pack', '--surface', 'square-torus', '--k', '9', '--seed', '2'])
        assert result.exit_code == 0, result.output
        data = json.loads(result.stdout)
        assert data['k'] == 9
        assert data['surface']['kind'] == 'flat-torus'

    def test_invalid_k(self, runner):
        """Vérifie qu'une erreur de domaine donne le code de sortie 1 et un message lisible"""
        result = runner.invoke(cli, ['pack', '--k', '0'])
        assert result.exit_code == 1
        assert 'k doit être ≥ 1' in result.output


class TestMeshAndSolve:
    """Tests pour les commandes mesh, solve, dualnorm et certify"""

    def test_mesh_requires_input(self, runner, tmp_path):
        """Vérifie le refus d'un appel sans --packing ni --surface"""
        result = runner.invoke(cli, ['mesh', '--out', str(tmp_path / 'x.mesh')])
        assert result.exit_code == 1
        assert '--packing' in result.output

    def test_closed_surface_laplace(self, runner, tmp_path):
        """Vérifie le spectre de Laplace de la sphère maillée"""
        path = tmp_path / 'sphere.mesh'
        result = runner.invoke(cli, ['mesh', '--surface', 'sphere', '--h', '0.1', '--out', str(path)])
        assert result.exit_code == 0, result.output

        result = runner.invoke(cli, ['solve', '--mesh', str(path), '--count', '3'])
        assert result.exit_code == 0, result.output
        data = json.loads(result.stdout)
        assert data['kind'] == 'laplace'
        assert data['normalized'][1] == pytest.approx(8 * math.pi, rel=0.1)

    def test_domain_steklov(self, runner, domain_mesh_file):
        """Vérifie le spectre de Steklov du domaine avec la densité β"""
        result = runner.invoke(cli, ['solve', '--mesh', str(domain_mesh_file), '--count', '4', '--density', 'beta'])
        assert result.exit_code == 0, result.output
        data = json.loads(result.stdout)
        assert data['kind'] == 'steklov'
        assert 0 < data['normalized'][1] < 8 * math.pi

    def test_dualnorm(self, runner, domain_mesh_file, tmp_path):
        """Vérifie la distance duale et la constante d'encadrement"""
        out = tmp_path / 'dual.json'
        result = runner.invoke(cli, ['dualnorm', '--mesh', str(domain_mesh_file), '--out', str(out)])
        assert result.exit_code == 0, result.output
        data = json.loads(out.read_text(encoding='utf-8'))
        assert data['dual_dist'] > 0
        assert data['sandwich_constant'] > 1

    def test_certify(self, runner, domain_mesh_file):
        """Vérifie le certificat sur la sphère"""
        result = runner.invoke(cli, ['certify', '--mesh', str(domain_mesh_file)])
        assert result.exit_code == 0, result.output
        data = json.loads(result.stdout)
        assert data['energy_gap'] >= -1e-6
        assert isinstance(data['holds'], bool)


class TestSweepAndFit:
    """Tests pour les commandes sweep et fit"""

    def test_fit_from_results(self, runner, tmp_path):
        """Vérifie l'ajustement depuis un fichier de résultats JSON"""
        records = [SweepRecord(k=k, gap=2 * math.log(k) / k) for k in (4, 8, 16, 32)]
        path = tmp_path / 'results.json'
        emit_results(records, json_path=path)

        result = runner.invoke(cli, ['fit', '--results', str(path)])
        assert result.exit_code == 0, result.output
        data = json.loads(result.stdout)
        assert data['best'] == 'log_k_over_k'
        assert data['log_coefficient'] == pytest.approx(2.0)

    def test_sweep_failure_exit_code(self, runner, tmp_path):
        """Vérifie qu'un k en échec donne le code de sortie 1 et une ligne d'erreur"""
        config = tmp_path / 'sweep.toml'
        config.write_text("[sweep]\nks = [1]\nh0 = 0.1\nworkers = 1\n", encoding='utf-8')
        csv_path = tmp_path / 'results.csv'

        result = runner.invoke(cli, ['sweep', '--config', str(config), '--csv', str(csv_path)])
        assert result.exit_code == 1
        lines = csv_path.read_text(encoding='utf-8').splitlines()
        assert len(lines) == 2
        assert lines[1].startswith('1,')
        assert 'GeometryError' in lines[1]
