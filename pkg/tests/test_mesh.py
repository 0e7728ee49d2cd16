"""
Tests unitaires pour les maillages des surfaces et des domaines perforés
"""
import math

import numpy as np
import pytest

from core.config import Settings
from core.errors import CapacityError, DomainError, MeshingError, UsageError
from core.mesh import (
    MeshGrading,
    _hole_rings,
    fill_holes,
    mesh_closed_surface,
    mesh_domain,
    mesh_flat_disk,
    mesh_quality,
    read_mesh,
    write_mesh,
)
from core.packing import make_domain_spec, select_separated_points
from core.surface import disk_boundary_length, distance


class TestClosedSurfaces:
    """Tests pour mesh_closed_surface"""

    def test_icosphere(self, coarse_sphere_mesh):
        """Vérifie la topologie et l'aire de l'icosphère"""
        m = coarse_sphere_mesh
        assert m.euler_characteristic() == 2
        assert m.is_closed
        assert m.triangle_areas().sum() == pytest.approx(1.0, rel=2e-2)
        assert m.h_max <= 0.07

    def test_icosphere_outward(self, coarse_sphere_mesh):
        """Vérifie que les triangles sont orientés vers l'extérieur"""
        p = coarse_sphere_mesh.vertices[coarse_sphere_mesh.triangles]
        normal = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
        assert np.all(np.einsum('ij,ij->i', normal, p.sum(axis=1)) > 0)

    def test_periodic_grid(self, square_torus_surface):
        """Vérifie la grille périodique du tore carré"""
        m = mesh_closed_surface(square_torus_surface, 0.05)
        assert m.n_vertices == 400
        assert m.n_triangles == 800
        assert m.euler_characteristic() == 0
        assert m.triangle_areas().sum() == pytest.approx(1.0)
        assert m.h_max == pytest.approx(0.05 * math.sqrt(2))

    def test_equilateral_grid_is_regular(self, equilateral_torus_surface):
        """Vérifie que la grille du tore équilatéral est faite de triangles équilatéraux"""
        m = mesh_closed_surface(equilateral_torus_surface, 0.1)
        assert np.allclose(m.angles(), 60.0)
        assert m.triangle_areas().sum() == pytest.approx(1.0)

    def test_non_positive_step(self, sphere_surface):
        """Vérifie qu'un pas non positif lève DomainError"""
        with pytest.raises(DomainError):
            mesh_closed_surface(sphere_surface, 0.0)

    def test_step_beyond_injectivity(self, square_torus_surface):
        """Vérifie qu'un pas supérieur au rayon d'injectivité lève MeshingError"""
        with pytest.raises(MeshingError) as exc_info:
            mesh_closed_surface(square_torus_surface, 0.6)

        assert "injectivité" in str(exc_info.value)

    def test_vertex_capacity(self, sphere_surface, monkeypatch):
        """Vérifie que le plafond de sommets lève CapacityError"""
        monkeypatch.setenv('STEKLAB_MAX_VERTICES', '100')
        Settings.reset_instance()

        with pytest.raises(CapacityError):
            mesh_closed_surface(sphere_surface, 0.05)


class TestDomainMesh:
    """Tests pour mesh_domain"""

    def test_sphere_domain_topology(self, sphere_domain_mesh):
        """Vérifie χ = 2 − k et les quatre boucles de bord"""
        m = sphere_domain_mesh
        assert m.n_holes == 4
        assert m.euler_characteristic() == 2 - 4
        assert mesh_quality(m).euler_ok

    def test_boundary_on_circles(self, sphere_domain_mesh):
        """Vérifie que les sommets de bord sont exactement sur les cercles géodésiques"""
        m = sphere_domain_mesh
        for j, loop in enumerate(m.boundary_loops):
            d = distance(m.surface, m.hole_centers[j], m.vertices[loop])
            assert np.allclose(d, m.hole_radii[j], atol=1e-12)
            expected = disk_boundary_length(m.surface, m.hole_radii[j])
            assert m.loop_length(j) == pytest.approx(expected, rel=1e-2)

    def test_domain_area(self, sphere_domain_mesh):
        """Vérifie l'aire du domaine maillé contre 1 − Σ aire des trous"""
        from core.surface import disk_area
        m = sphere_domain_mesh
        expected = 1.0 - float(np.sum(disk_area(m.surface, m.hole_radii)))
        assert m.triangle_areas().sum() == pytest.approx(expected, rel=2e-2)

    def test_no_degenerate_triangles(self, sphere_domain_mesh, torus_domain_mesh):
        """Vérifie l'absence de triangles dégénérés sur les domaines (angle minimal > 5°)"""
        assert mesh_quality(sphere_domain_mesh).min_angle > 5.0
        assert mesh_quality(torus_domain_mesh).min_angle > 5.0

    def test_closed_meshes_meet_angle_floor(self, coarse_sphere_mesh, square_torus_surface):
        """Vérifie un angle minimal ≥ 20° sur l'icosphère et la grille périodique"""
        assert mesh_quality(coarse_sphere_mesh).min_angle >= 20.0
        assert mesh_quality(mesh_closed_surface(square_torus_surface, 0.05)).min_angle >= 20.0

    def test_rings_fit_below_cap(self, sphere_surface):
        """Vérifie que rings_min anneaux tiennent sous le plafond quand le rapport nominal est trop grand"""
        radius, cap = 0.06804, 0.1589
        rings = _hole_rings(sphere_surface, radius, 0.04, 1.4, cap, 0.1, 16, 3)
        radii = [rho for rho, _ in rings]
        assert len(rings) - 1 >= 3
        assert radii[0] == radius
        assert all(b > a for a, b in zip(radii, radii[1:]))
        assert radii[-1] <= cap

    def test_six_holes_on_sphere(self, sphere_surface):
        """Vérifie le maillage de k = 6 trous de rayon 6^{-3/2} au pas 0.04"""
        packing = select_separated_points(sphere_surface, 6, seed=0)
        spec = make_domain_spec(packing, 1.5)
        m = mesh_domain(sphere_surface, spec, MeshGrading(target_h=0.04))
        assert m.n_holes == 6
        assert m.euler_characteristic() == 2 - 6
        assert mesh_quality(m).euler_ok

    def test_torus_domain(self, torus_domain_mesh):
        """Vérifie la topologie d'un domaine perforé sur le tore carré"""
        m = torus_domain_mesh
        assert m.shifts is not None
        assert m.euler_characteristic() == -8
        for j, loop in enumerate(m.boundary_loops):
            d = distance(m.surface, m.hole_centers[j], m.vertices[loop])
            assert np.allclose(d, m.hole_radii[j], atol=1e-12)

    def test_grading_validation(self):
        """Vérifie que les descripteurs de MeshGrading refusent les valeurs hors intervalle"""
        with pytest.raises(DomainError) as exc_info:
            MeshGrading(ring_ratio=2.5)

        assert 'ring_ratio' in str(exc_info.value)

        with pytest.raises(DomainError):
            MeshGrading(target_h=math.inf)


class TestFillHoles:
    """Tests pour fill_holes"""

    def test_filled_is_closed_sphere(self, sphere_domain_mesh, sphere_filled_mesh):
        """Vérifie que le maillage rebouché est une sphère qui prolonge le domaine"""
        m, filled = sphere_domain_mesh, sphere_filled_mesh
        assert filled.euler_characteristic() == 2
        assert filled.n_domain == m.n_vertices
        assert np.array_equal(filled.vertices[:m.n_vertices], m.vertices)
        assert filled.triangle_areas().sum() == pytest.approx(1.0, rel=2e-2)
        assert np.count_nonzero(filled.triangle_region == 0) == m.n_triangles
        assert set(np.unique(filled.triangle_region)) == {0, 1, 2, 3, 4}

    def test_filled_torus(self, torus_domain_mesh):
        """Vérifie que le tore rebouché a χ = 0 et une aire unité"""
        filled = fill_holes(torus_domain_mesh)
        assert filled.euler_characteristic() == 0
        assert filled.triangle_areas().sum() == pytest.approx(1.0)

    def test_closed_mesh_rejected(self, coarse_sphere_mesh):
        """Vérifie que fill_holes refuse un maillage fermé"""
        with pytest.raises(UsageError) as exc_info:
            fill_holes(coarse_sphere_mesh)

        assert 'fill_holes' in str(exc_info.value)


class TestFlatDisk:
    """Tests pour les maillages plans de validation"""

    def test_disk(self):
        """Vérifie la topologie et l'aire du disque unité"""
        m = mesh_flat_disk(1.0, 0.05)
        assert m.euler_characteristic() == 1
        assert m.triangle_areas().sum() == pytest.approx(math.pi, rel=1e-2)
        assert np.allclose(np.linalg.norm(m.vertices[m.boundary_loops[0]], axis=1), 1.0)

    def test_annulus(self):
        """Vérifie la topologie de l'anneau et ses deux boucles"""
        m = mesh_flat_disk(1.0, 0.05, hole_radius=0.5)
        assert m.euler_characteristic() == 0
        assert len(m.boundary_loops) == 2
        assert m.triangle_areas().sum() == pytest.approx(0.75 * math.pi, rel=1e-2)

    def test_invalid_hole_radius(self):
        """Vérifie le refus d'un trou plus grand que le disque"""
        with pytest.raises(DomainError):
            mesh_flat_disk(1.0, 0.05, hole_radius=1.5)


class TestMeshFile:
    """Tests pour le format SURFMESH"""

    def test_roundtrip_sphere_domain(self, sphere_domain_mesh, tmp_path):
        """Vérifie l'écriture puis la relecture d'un domaine sur la sphère"""
        path = tmp_path / 'omega.mesh'
        write_mesh(sphere_domain_mesh, path)
        loaded = read_mesh(path)
        assert np.array_equal(loaded.vertices, sphere_domain_mesh.vertices)
        assert np.array_equal(loaded.triangles, sphere_domain_mesh.triangles)
        assert loaded.content_hash() == sphere_domain_mesh.content_hash()
        assert loaded.region_tag == 'domain'
        assert len(loaded.boundary_loops) == 4

    def test_header_line(self, sphere_domain_mesh, tmp_path):
        """Vérifie l'en-tête et la ligne de comptage V E_b F H"""
        path = tmp_path / 'omega.mesh'
        write_mesh(sphere_domain_mesh, path)
        lines = path.read_text(encoding='utf-8').splitlines()
        assert lines[0] == 'SURFMESH 1'
        counts = [int(v) for v in lines[3].split()]
        m = sphere_domain_mesh
        assert counts == [m.n_vertices, len(m.boundary_vertices()), m.n_triangles, 4]

    def test_roundtrip_torus_shifts(self, torus_domain_mesh, tmp_path):
        """Vérifie la conservation des décalages périodiques"""
        path = tmp_path / 'torus.mesh'
        write_mesh(torus_domain_mesh, path)
        loaded = read_mesh(path)
        assert np.array_equal(loaded.shifts, torus_domain_mesh.shifts)
        assert loaded.euler_characteristic() == -8

    def test_invalid_header(self, tmp_path):
        """Vérifie qu'un en-tête invalide lève UsageError"""
        path = tmp_path / 'bad.mesh'
        path.write_text("OFF\n3 1 0\n", encoding='utf-8')

        with pytest.raises(UsageError) as exc_info:
            read_mesh(path)

        assert 'SURFMESH 1' in str(exc_info.value)
