"""
Tests unitaires pour l'assemblage éléments finis et les solveurs
"""
import math

import numpy as np
import pytest

from core.errors import AssemblyError, CapacityError, DomainError, UsageError
from core.fem import (
    MeasureSupport,
    NodalMeasure,
    SolverSettings,
    assemble_area_mass,
    assemble_boundary_mass,
    assemble_stiffness,
    element_energies,
    generalized_eigs,
    harmonic_extension,
    solve_poisson_dirichlet,
    solve_spd,
)
from core.mesh import TriMesh, fill_holes, mesh_domain, mesh_flat_disk, MeshGrading
from core.packing import make_domain_spec, select_separated_points
from core.surface import SQRT_PI, distance


class TestAssembly:
    """Tests pour la raideur et les masses condensées"""

    def test_stiffness_annihilates_constants(self, sphere_domain_mesh):
        """Vérifie K·1 = 0, la symétrie et la positivité de K"""
        K = assemble_stiffness(sphere_domain_mesh)
        assert np.abs(K @ np.ones(K.shape[0])).max() < 1e-10 * abs(K.diagonal()).max()
        assert abs(K - K.T).max() < 1e-12
        u = np.random.default_rng(0).standard_normal(K.shape[0])
        assert u @ (K @ u) > 0

    def test_element_energies_sum(self, coarse_sphere_mesh):
        """Vérifie que la somme des énergies élémentaires vaut uᵀKu"""
        u = coarse_sphere_mesh.vertices[:, 0]
        K = assemble_stiffness(coarse_sphere_mesh)
        assert element_energies(coarse_sphere_mesh, u).sum() == pytest.approx(u @ (K @ u))

    def test_area_mass_total(self, coarse_sphere_mesh):
        """Vérifie que la masse d'aire totale vaut l'aire du maillage"""
        mu = assemble_area_mass(coarse_sphere_mesh)
        assert mu.support is MeasureSupport.AREA
        assert mu.total == pytest.approx(coarse_sphere_mesh.triangle_areas().sum())

    def test_boundary_mass_total(self, sphere_domain_mesh):
        """Vérifie que la masse de bord totale vaut la longueur des boucles"""
        mu = assemble_boundary_mass(sphere_domain_mesh)
        lengths = sum(sphere_domain_mesh.loop_length(j) for j in range(sphere_domain_mesh.n_holes))
        assert mu.total == pytest.approx(lengths)
        interior = np.setdiff1d(np.arange(sphere_domain_mesh.n_vertices), sphere_domain_mesh.boundary_vertices())
        assert np.all(mu.weights[interior] == 0.0)

    def test_boundary_mass_on_closed_mesh(self, coarse_sphere_mesh):
        """Vérifie que la masse de bord d'un maillage fermé lève UsageError"""
        with pytest.raises(UsageError) as exc_info:
            assemble_boundary_mass(coarse_sphere_mesh)

        assert 'sans bord' in str(exc_info.value)

    def test_negative_density(self, coarse_sphere_mesh):
        """Vérifie qu'une densité négative lève DomainError"""
        f = np.ones(coarse_sphere_mesh.n_vertices)
        f[5] = -1.0

        with pytest.raises(DomainError) as exc_info:
            assemble_area_mass(coarse_sphere_mesh, f)

        assert 'sommet 5' in str(exc_info.value)

    def test_density_shape_mismatch(self, coarse_sphere_mesh):
        """Vérifie qu'une densité de mauvaise taille lève UsageError"""
        with pytest.raises(UsageError):
            assemble_area_mass(coarse_sphere_mesh, np.ones(3))

    def test_degenerate_triangle(self):
        """Vérifie qu'un triangle d'aire nulle lève AssemblyError"""
        m = TriMesh(surface=None, vertices=[[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]], triangles=[[0, 1, 2]])

        with pytest.raises(AssemblyError) as exc_info:
            assemble_stiffness(m)

        assert 'Triangle dégénéré 0' in str(exc_info.value)


class TestNodalMeasure:
    """Tests pour NodalMeasure"""

    def test_negative_weight_rejected(self):
        """Vérifie le refus d'un poids négatif"""
        with pytest.raises(DomainError):
            NodalMeasure(np.array([1.0, -0.5, 2.0]))

    def test_rounding_noise_clipped(self):
        """Vérifie que le bruit d'arrondi négatif est ramené à zéro"""
        mu = NodalMeasure(np.array([1.0, -1e-15, 2.0]))
        assert mu.weights[1] == 0.0
        assert mu.total == pytest.approx(3.0)

    def test_padded(self):
        """Vérifie le prolongement par des poids nuls"""
        mu = NodalMeasure(np.array([1.0, 2.0]), MeasureSupport.BOUNDARY, "beta")
        padded = mu.padded(4)
        assert padded.weights.tolist() == [1.0, 2.0, 0.0, 0.0]
        assert padded.density_label == "beta"

        with pytest.raises(UsageError):
            mu.padded(1)

    def test_scaled(self):
        """Vérifie la multiplication par un facteur positif"""
        mu = NodalMeasure(np.array([1.0, 2.0]))
        assert mu.scaled(3.0).total == pytest.approx(9.0)

        with pytest.raises(DomainError):
            mu.scaled(0.0)


class TestSolvers:
    """Tests pour SolverSettings et solve_spd"""

    def test_settings_defaults(self):
        """Vérifie les réglages par défaut issus de la configuration"""
        settings = SolverSettings()
        assert settings.rtol == 1e-12
        assert settings.method == 'cg'
        assert settings.maxiter == 5000

    def test_invalid_method(self):
        """Vérifie le refus d'une méthode inconnue"""
        with pytest.raises(DomainError) as exc_info:
            SolverSettings(method='lu')

        assert 'method' in str(exc_info.value)

    def test_unrealistic_cg_tolerance(self):
        """Vérifie le refus d'une tolérance CG sous la précision machine"""
        with pytest.raises(DomainError):
            SolverSettings(rtol=1e-17)

    def test_cg_matches_direct(self, sphere_domain_mesh):
        """Vérifie l'accord entre gradient conjugué préconditionné et factorisation directe"""
        K = assemble_stiffness(sphere_domain_mesh)
        interior = np.setdiff1d(np.arange(sphere_domain_mesh.n_vertices), sphere_domain_mesh.boundary_vertices())
        A = K[interior][:, interior]
        rhs = np.ones(len(interior))
        x_cg, res_cg = solve_spd(A, rhs, SolverSettings(method='cg'))
        x_lu, _ = solve_spd(A, rhs, SolverSettings(method='direct'))
        assert res_cg <= 1e-10
        assert np.allclose(x_cg, x_lu, rtol=1e-8, atol=1e-12)


class TestPoisson:
    """Tests pour solve_poisson_dirichlet"""

    def test_divergence_identity(self, sphere_domain_mesh):
        """Vérifie Σβ = ∫f à 1e-9 près et le signe de ψ"""
        solution = solve_poisson_dirichlet(sphere_domain_mesh)
        assert abs(solution.beta_total - solution.area.total) <= 1e-9 * solution.area.total
        assert solution.psi.max() <= 1e-3 * solution.psi_linf
        assert np.all(solution.beta.weights[sphere_domain_mesh.boundary_vertices()] > 0)
        assert solution.psi_linf > 0

    def test_zero_source(self, sphere_domain_mesh):
        """Vérifie que f = 0 donne ψ = 0 et β = 0"""
        solution = solve_poisson_dirichlet(sphere_domain_mesh, 0.0)
        assert solution.beta_total == 0.0
        assert solution.psi_linf == 0.0

    def test_closed_mesh_rejected(self, coarse_sphere_mesh):
        """Vérifie que le problème de Dirichlet sans bord lève UsageError"""
        with pytest.raises(UsageError):
            solve_poisson_dirichlet(coarse_sphere_mesh)

    @pytest.mark.slow
    def test_radial_oracle(self, sphere_surface):
        """Vérifie la solution radiale sur la sphère privée d'un trou de rayon 0.3 (L² à 1 %, β à 0.1 %)"""
        packing = select_separated_points(sphere_surface, 1, seed=0, n_candidates=500)
        spec = make_domain_spec(packing, radii=[0.3])
        m = mesh_domain(sphere_surface, spec, MeshGrading(target_h=0.01))
        solution = solve_poisson_dirichlet(m)

        t = distance(sphere_surface, packing.centers[0], m.vertices)
        exact = -(np.log(np.sin(SQRT_PI * t)) - math.log(math.sin(0.3 * SQRT_PI))) / (2 * math.pi)
        w = solution.area.weights
        error = math.sqrt(w @ (solution.psi - exact) ** 2)
        assert error <= 1e-2 * math.sqrt(w @ exact ** 2)
        assert solution.beta_total == pytest.approx(math.cos(0.3 * SQRT_PI) ** 2, rel=1e-3)

    def test_radial_oracle_coarse(self, sphere_surface):
        """Vérifie la forme de la solution radiale sur un maillage grossier"""
        packing = select_separated_points(sphere_surface, 1, seed=0, n_candidates=500)
        spec = make_domain_spec(packing, radii=[0.3])
        m = mesh_domain(sphere_surface, spec, MeshGrading(target_h=0.03))
        solution = solve_poisson_dirichlet(m)

        t = distance(sphere_surface, packing.centers[0], m.vertices)
        exact = -(np.log(np.sin(SQRT_PI * t)) - math.log(math.sin(0.3 * SQRT_PI))) / (2 * math.pi)
        error = np.abs(solution.psi - exact).max()
        assert error <= 3e-2 * np.abs(exact).max()
        assert solution.beta_total == pytest.approx(math.cos(0.3 * SQRT_PI) ** 2, rel=1e-2)


class TestHarmonicExtension:
    """Tests pour harmonic_extension sur un anneau plan rebouché"""

    def test_linear_function_reproduced(self):
        """Vérifie que x est prolongé exactement et que le rapport d'énergies vaut 1/3"""
        annulus = mesh_flat_disk(1.0, 0.05, hole_radius=0.5)
        filled = fill_holes(annulus)
        extension = harmonic_extension(filled, annulus.vertices[:, 0])
        assert np.allclose(extension.values, filled.vertices[:, 0], atol=1e-10)
        assert extension.energy_ratio == pytest.approx(1.0 / 3.0, rel=2e-2)

    def test_size_mismatch(self):
        """Vérifie le refus de valeurs de mauvaise taille"""
        annulus = mesh_flat_disk(1.0, 0.1, hole_radius=0.5)
        filled = fill_holes(annulus)

        with pytest.raises(UsageError):
            harmonic_extension(filled, np.zeros(3))


class TestGeneralizedEigs:
    """Tests pour le solveur propre généralisé"""

    def test_sphere_first_eigenvalue(self, coarse_sphere_mesh):
        """Vérifie λ̄₁ ≈ 8π et la B-orthonormalité des vecteurs propres"""
        K = assemble_stiffness(coarse_sphere_mesh)
        mu = assemble_area_mass(coarse_sphere_mesh)
        result = generalized_eigs(K, mu, 4)
        assert result.eigenvalues[0] == 0.0
        assert np.allclose(result.normalized[1:4], 8 * math.pi, rtol=3e-2)
        gram = result.eigenvectors.T @ (mu.weights[:, None] * result.eigenvectors)
        assert np.allclose(gram, np.eye(5), atol=1e-8)
        assert result.residuals[1:].max() < 1e-6

    def test_disk_steklov(self):
        """Vérifie σ̄₁ = 2π pour le disque unité (ρ = 1), valeur double, puis σ̄₃ = σ̄₄ = 4π"""
        m = mesh_flat_disk(1.0, 0.04)
        K = assemble_stiffness(m)
        rho = assemble_boundary_mass(m)
        result = generalized_eigs(K, rho, 4, kind='steklov')
        assert result.normalized[1] == pytest.approx(2 * math.pi, rel=1e-2)
        assert result.normalized[2] == pytest.approx(2 * math.pi, rel=1e-2)
        assert result.normalized[3] == pytest.approx(4 * math.pi, rel=2e-2)
        assert result.normalized[4] == pytest.approx(4 * math.pi, rel=2e-2)

    @pytest.mark.slow
    def test_disk_steklov_fine(self):
        """Vérifie σ_m = 1, 1, 2, 2 à 1 % près au pas 0.01"""
        m = mesh_flat_disk(1.0, 0.01)
        K = assemble_stiffness(m)
        rho = assemble_boundary_mass(m)
        result = generalized_eigs(K, rho, 4, kind='steklov')
        assert np.allclose(result.eigenvalues[1:5], [1.0, 1.0, 2.0, 2.0], rtol=1e-2)
        assert result.normalized[1] == pytest.approx(2 * math.pi, rel=1e-2)

    def test_count_beyond_spectrum(self, sphere_domain_mesh):
        """Vérifie que demander plus de valeurs que le rang de B lève CapacityError"""
        K = assemble_stiffness(sphere_domain_mesh)
        rho = assemble_boundary_mass(sphere_domain_mesh)
        rank = len(sphere_domain_mesh.boundary_vertices())

        with pytest.raises(CapacityError) as exc_info:
            generalized_eigs(K, rho, rank)

        assert 'demandées' in str(exc_info.value)

    def test_unsupported_mode(self, coarse_sphere_mesh):
        """Vérifie le refus d'un mode de calcul inconnu"""
        K = assemble_stiffness(coarse_sphere_mesh)

        with pytest.raises(UsageError):
            generalized_eigs(K, assemble_area_mass(coarse_sphere_mesh), 2, mode='highest')
