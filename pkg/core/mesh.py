"""
Triangulations conformes des surfaces modèles et des domaines perforés

Trois familles de maillages :

* surfaces fermées (icosaèdre subdivisé projeté sur la sphère, grille
  périodique structurée sur le tore) ;
* domaines Ω = M \\ ∪ B_{r_j}(p_j), avec des anneaux concentriques gradués
  autour de chaque trou raccordés à un fond quasi uniforme ;
* disques et anneaux plans servant d'oracles de validation.

Sur le tore, la topologie est réalisée par identification des sommets :
chaque triangle porte, pour chacun de ses coins, le décalage entier du
réseau à appliquer au sommet (``shifts``).
"""
import math
import hashlib
import json
import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import ConvexHull, Delaunay, cKDTree

from core.config import get_settings
from core.decorators import auto_validation, log_step
from core.descriptors import BoundedFloat, PositiveInt
from core.errors import CapacityError, DomainError, MeshingError, UsageError
from core.surface import (
    SPHERE_RADIUS,
    ModelSurface,
    disk_boundary_length,
    displacement,
    distance,
    exp_map,
    log_map,
    sample_points,
)

logger = logging.getLogger(__name__)

MESH_FORMAT_HEADER = "SURFMESH 1"
# arête de l'icosaèdre inscrit dans la sphère unité
ICOSA_EDGE = 4.0 / math.sqrt(10.0 + 2.0 * math.sqrt(5.0))
SQRT3_2 = math.sqrt(3.0) / 2.0


@dataclass(eq=False)
class TriMesh:
    """Maillage triangulaire d'une surface modèle, d'un domaine perforé ou d'une région plane"""
    surface: Optional[ModelSurface]
    vertices: np.ndarray
    triangles: np.ndarray
    shifts: Optional[np.ndarray] = None
    boundary_loops: List[np.ndarray] = field(default_factory=list)
    hole_centers: Optional[np.ndarray] = None
    hole_radii: Optional[np.ndarray] = None
    region_tag: str = 'closed'
    n_domain: Optional[int] = None
    triangle_region: Optional[np.ndarray] = None

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float)
        self.triangles = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        if self.shifts is not None:
            self.shifts = np.asarray(self.shifts, dtype=np.int64).reshape(-1, 3, 2)
        self.boundary_loops = [np.asarray(loop, dtype=np.int64) for loop in self.boundary_loops]
        dim = self.vertices.shape[1] if self.vertices.ndim == 2 else 2
        if self.hole_centers is None:
            self.hole_centers = np.zeros((0, dim))
        if self.hole_radii is None:
            self.hole_radii = np.zeros(0)
        self.hole_centers = np.asarray(self.hole_centers, dtype=float).reshape(-1, dim)
        self.hole_radii = np.asarray(self.hole_radii, dtype=float).reshape(-1)
        if self.n_domain is None:
            self.n_domain = len(self.vertices)

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_triangles(self):
        return len(self.triangles)

    @property
    def n_holes(self):
        return len(self.hole_radii)

    @property
    def is_closed(self):
        return self.region_tag == 'closed'

    @property
    def h_max(self):
        return float(self.edge_lengths().max())

    def corner_positions(self):
        """Positions des coins de chaque triangle (F × 3 × dim), décalages périodiques inclus"""
        positions = self.vertices[self.triangles]
        if self.shifts is not None and self.surface is not None and not self.surface.is_sphere:
            positions = positions + self.shifts @ self.surface.lattice_basis
        return positions

    def edge_lengths(self):
        """Longueurs des trois côtés de chaque triangle (F × 3), le côté i opposé au coin i"""
        p = self.corner_positions()
        sides = np.stack([p[:, 2] - p[:, 1], p[:, 0] - p[:, 2], p[:, 1] - p[:, 0]], axis=1)
        return np.linalg.norm(sides, axis=2)

    def triangle_areas(self):
        p = self.corner_positions()
        u = p[:, 1] - p[:, 0]
        v = p[:, 2] - p[:, 0]
        if p.shape[2] == 3:
            return 0.5 * np.linalg.norm(np.cross(u, v), axis=1)
        return 0.5 * np.abs(u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0])

    def angles(self):
        """Angles intérieurs en degrés (F × 3)"""
        p = self.corner_positions()
        out = np.empty((len(p), 3))
        for i in range(3):
            u = p[:, (i + 1) % 3] - p[:, i]
            v = p[:, (i + 2) % 3] - p[:, i]
            cos = np.einsum('ij,ij->i', u, v) / (np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1))
            out[:, i] = np.degrees(np.arccos(np.clip(cos, -1.0, 1.0)))
        return out

    def _half_edges(self):
        t = self.triangles
        return np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])

    def edges(self):
        """Arêtes non orientées uniques (E × 2) et leur nombre de triangles incidents"""
        half = np.sort(self._half_edges(), axis=1)
        unique, counts = np.unique(half, axis=0, return_counts=True)
        return unique, counts

    def boundary_edges(self):
        """Arêtes orientées n'appartenant qu'à un triangle"""
        half = self._half_edges()
        key = np.sort(half, axis=1)
        _, inverse, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
        return half[counts[inverse.reshape(-1)] == 1]

    def euler_characteristic(self):
        edges, _ = self.edges()
        return int(self.n_vertices - len(edges) + self.n_triangles)

    def expected_euler(self):
        """χ attendu : χ(M) moins le nombre de bords (le plan compte comme une sphère)"""
        base = 2 if self.surface is None else self.surface.euler_char
        if self.region_tag == 'closed' and self.surface is not None:
            return base
        return base - len(self.boundary_loops)

    def boundary_vertices(self):
        if not self.boundary_loops:
            return np.zeros(0, dtype=np.int64)
        return np.concatenate(self.boundary_loops)

    def loop_segments(self, loop_index):
        """Vecteurs des cordes successives d'une boucle de bord"""
        loop = self.boundary_loops[loop_index]
        p = self.vertices[loop]
        q = self.vertices[np.roll(loop, -1)]
        return displacement(self.surface, p, q)

    def loop_length(self, loop_index):
        return float(np.linalg.norm(self.loop_segments(loop_index), axis=1).sum())

    def domain_triangle_mask(self):
        """Triangles appartenant au domaine (tous, sauf pour un maillage rebouché)"""
        if self.triangle_region is None:
            return np.ones(self.n_triangles, dtype=bool)
        return self.triangle_region == 0

    def content_hash(self):
        digest = hashlib.sha256()
        digest.update(np.ascontiguousarray(self.vertices, dtype=np.float64).tobytes())
        digest.update(np.ascontiguousarray(self.triangles, dtype=np.int64).tobytes())
        if self.shifts is not None:
            digest.update(np.ascontiguousarray(self.shifts, dtype=np.int64).tobytes())
        return digest.hexdigest()


@auto_validation
class MeshGrading:
    """Paramètres de gradation des anneaux autour des trous"""

    target_h = BoundedFloat(0.0, math.inf, default=0.03)
    ring_ratio = BoundedFloat(1.0, 2.0, default=1.4, high_inclusive=True)
    rings_min = PositiveInt(1, default=3)
    min_loop_vertices = PositiveInt(3, default=16)

    def __init__(self, target_h=0.03, ring_ratio=1.4, rings_min=3, min_loop_vertices=16):
        self.target_h = target_h
        self.ring_ratio = ring_ratio
        self.rings_min = rings_min
        self.min_loop_vertices = min_loop_vertices

    def validate(self):
        if not math.isfinite(self.target_h):
            raise DomainError(f"Pas de maillage non fini : {self.target_h}")

    def to_dict(self):
        return {
            'target_h': self.target_h,
            'ring_ratio': self.ring_ratio,
            'rings_min': self.rings_min,
            'min_loop_vertices': self.min_loop_vertices,
        }


def _check_budget(n_vertices, what):
    cap = get_settings().max_vertices
    if n_vertices > cap:
        raise CapacityError(f"{what} : {n_vertices} sommets dépassent la capacité configurée ({cap})")


def _orient_outward(vertices, triangles):
    p = vertices[triangles]
    normal = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
    flip = np.einsum('ij,ij->i', normal, p.sum(axis=1)) < 0
    triangles = triangles.copy()
    triangles[flip] = triangles[flip][:, [0, 2, 1]]
    return triangles, flip


def _orient_planar(corners, triangles, shifts=None):
    u = corners[:, 1] - corners[:, 0]
    v = corners[:, 2] - corners[:, 0]
    flip = (u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0]) < 0
    triangles = triangles.copy()
    triangles[flip] = triangles[flip][:, [0, 2, 1]]
    if shifts is not None:
        shifts = shifts.copy()
        shifts[flip] = shifts[flip][:, [0, 2, 1]]
    return triangles, shifts


# Surfaces fermées

def _icosahedron():
    t = (1.0 + math.sqrt(5.0)) / 2.0
    vertices = np.array([
        [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
        [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
        [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
    ], dtype=float)
    vertices /= np.linalg.norm(vertices, axis=1, keepdims=True)
    faces = np.array([
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ])
    return vertices, faces


def icosphere_frequency(target_h):
    """Fréquence de subdivision donnant des arêtes ≈ target_h sur la sphère d'aire 1"""
    return max(1, int(math.ceil(ICOSA_EDGE * SPHERE_RADIUS / target_h)))


def _icosphere(n):
    base, faces = _icosahedron()
    ij = [(i, j) for i in range(n + 1) for j in range(n + 1 - i)]
    local = {key: idx for idx, key in enumerate(ij)}
    bary = np.array(ij, dtype=float) / n
    local_tris = []
    for i in range(n):
        for j in range(n - i):
            local_tris.append((local[(i, j)], local[(i + 1, j)], local[(i, j + 1)]))
            if i + j < n - 1:
                local_tris.append((local[(i + 1, j)], local[(i + 1, j + 1)], local[(i, j + 1)]))
    local_tris = np.array(local_tris)

    a, b, c = base[faces[:, 0]], base[faces[:, 1]], base[faces[:, 2]]
    points = (a[:, None, :]
              + bary[None, :, :1] * (b - a)[:, None, :]
              + bary[None, :, 1:] * (c - a)[:, None, :])
    points = points.reshape(-1, 3)
    points /= np.linalg.norm(points, axis=1, keepdims=True)
    tris = (local_tris[None, :, :] + (np.arange(len(faces)) * len(ij))[:, None, None]).reshape(-1, 3)

    # fusion des sommets partagés par les faces voisines
    pairs = cKDTree(points).query_pairs(1e-9, output_type='ndarray')
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(len(points), len(points)))
    n_unique, labels = connected_components(graph, directed=False)
    vertices = np.zeros((n_unique, 3))
    vertices[labels] = points
    triangles = labels[tris]
    if n_unique != 10 * n * n + 2:
        raise MeshingError(f"Icosphère invalide : {n_unique} sommets au lieu de {10 * n * n + 2}")
    triangles, _ = _orient_outward(vertices, triangles)
    return SPHERE_RADIUS * vertices, triangles


def _periodic_grid(s, n1, n2):
    b1, b2 = s.lattice_basis
    i, j = np.meshgrid(np.arange(n1), np.arange(n2), indexing='ij')
    vertices = s.from_lattice(np.column_stack([i.ravel() / n1, j.ravel() / n2]))

    if np.linalg.norm(b1 / n1 + b2 / n2) <= np.linalg.norm(b2 / n2 - b1 / n1):
        pattern = [[(0, 0), (1, 0), (1, 1)], [(0, 0), (1, 1), (0, 1)]]
    else:
        pattern = [[(0, 0), (1, 0), (0, 1)], [(1, 0), (1, 1), (0, 1)]]

    ii, jj = i.ravel(), j.ravel()
    triangles, shifts = [], []
    for tri in pattern:
        corner_ids, corner_shifts = [], []
        for di, dj in tri:
            ci, cj = ii + di, jj + dj
            corner_ids.append((ci % n1) * n2 + (cj % n2))
            corner_shifts.append(np.column_stack([ci // n1, cj // n2]))
        triangles.append(np.column_stack(corner_ids))
        shifts.append(np.stack(corner_shifts, axis=1))
    return vertices, np.concatenate(triangles), np.concatenate(shifts)


@log_step
def mesh_closed_surface(s, target_h):
    """Maillage de la surface fermée avec des arêtes d'ordre target_h"""
    if not target_h > 0:
        raise DomainError(f"Pas de maillage non positif : {target_h}")
    if target_h >= s.injectivity_radius:
        raise MeshingError(f"Pas de maillage {target_h} ≥ rayon d'injectivité {s.injectivity_radius:.6g}")

    if s.is_sphere:
        n = icosphere_frequency(target_h)
        _check_budget(10 * n * n + 2, "Icosphère")
        vertices, triangles = _icosphere(n)
        shifts = None
    else:
        b1, b2 = s.lattice_basis
        n1 = int(math.ceil(np.linalg.norm(b1) / target_h))
        n2 = int(math.ceil(np.linalg.norm(b2) / target_h))
        _check_budget(n1 * n2, "Grille périodique")
        vertices, triangles, shifts = _periodic_grid(s, n1, n2)

    mesh = TriMesh(surface=s, vertices=vertices, triangles=triangles, shifts=shifts, region_tag='closed')
    logger.info(f"Maillage fermé {s.name} : {mesh.n_vertices} sommets, h_max = {mesh.h_max:.4g}")
    return mesh


# Domaines perforés

def _hole_rings(s, radius, h, ratio, cap, goal, n_min, rings_min):
    """Rayons et effectifs des anneaux concentriques autour d'un trou

    Le rapport entre anneaux successifs est réduit si nécessaire pour que
    rings_min anneaux tiennent sous le plafond cap.
    """
    ratio = min(ratio, (cap / radius) ** (1.0 / (rings_min + 0.5)))
    n_points = max(n_min, int(math.ceil(disk_boundary_length(s, radius) / h)))
    rings = [(radius, n_points)]
    rho = radius
    while True:
        spacing = disk_boundary_length(s, rho) / n_points
        if len(rings) > rings_min and rho >= goal and spacing >= 0.9 * h:
            break
        step = min((ratio - 1.0) * rho, SQRT3_2 * h)
        nxt = rho + step
        if nxt > cap:
            break
        n_points = max(n_points, int(math.ceil(disk_boundary_length(s, nxt) / h)))
        rings.append((nxt, n_points))
        rho = nxt
    return rings


def _ring_points(s, center, rings):
    chunks = []
    for m, (rho, count) in enumerate(rings):
        theta = 2.0 * math.pi * (np.arange(count) + 0.5 * m) / count
        chunks.append(exp_map(s, center, rho * np.column_stack([np.cos(theta), np.sin(theta)])))
    points = np.concatenate(chunks)
    if not s.is_sphere:
        points = s.reduce(points)
    return points


def _is_hexagonal(s):
    b1, b2 = s.lattice_basis
    n1, n2 = np.linalg.norm(b1), np.linalg.norm(b2)
    return abs(n1 - n2) < 1e-9 * n1 and abs(abs(b1 @ b2) / (n1 * n1) - 0.5) < 1e-9


def _torus_background(s, h):
    b1, _ = s.lattice_basis
    len1 = float(np.linalg.norm(b1))
    if _is_hexagonal(s):
        n = int(math.ceil(len1 / h))
        i, j = np.meshgrid(np.arange(n), np.arange(n), indexing='ij')
        u = np.column_stack([i.ravel() / n, j.ravel() / n])
    else:
        n1 = int(math.ceil(len1 / h))
        height = 1.0 / len1
        n2 = int(math.ceil(height / (SQRT3_2 * h)))
        n2 += n2 % 2
        i, j = np.meshgrid(np.arange(n1), np.arange(n2), indexing='ij')
        u = np.column_stack([(i.ravel() + 0.5 * (j.ravel() % 2)) / n1, j.ravel() / n2])
    return s.from_lattice(u)


def _exclude_near_holes(s, points, centers, radii):
    """Indices des points de fond à conserver (hors des disques d'exclusion)"""
    keep = np.ones(len(points), dtype=bool)
    if s.is_sphere:
        tree = cKDTree(points)
        chord = 2.0 * SPHERE_RADIUS * np.sin(np.minimum(radii, math.pi * SPHERE_RADIUS) / (2.0 * SPHERE_RADIUS))
        for c, r in zip(centers, chord):
            keep[tree.query_ball_point(c, r)] = False
        return np.flatnonzero(keep)
    offsets = np.array([[a, b] for a in (-1, 0, 1) for b in (-1, 0, 1)], dtype=float) @ s.lattice_basis
    tiled = (points[None, :, :] + offsets[:, None, :]).reshape(-1, 2)
    tree = cKDTree(tiled)
    for c, r in zip(centers, radii):
        hits = np.asarray(tree.query_ball_point(c, r), dtype=np.int64)
        keep[hits % len(points)] = False
    return np.flatnonzero(keep)


def _triangulate_sphere(points):
    hull = ConvexHull(points)
    if len(hull.coplanar):
        raise MeshingError(f"{len(hull.coplanar)} points absents de l'enveloppe convexe")
    triangles, _ = _orient_outward(points, hull.simplices.astype(np.int64))
    return triangles, None


def _triangulate_torus(s, points):
    n = len(points)
    u = s.lattice_coords(points)
    tiles = np.array([[a, b] for a in (-1, 0, 1) for b in (-1, 0, 1)], dtype=np.int64)
    tiled_u = (u[None, :, :] + tiles[:, None, :]).reshape(-1, 2)
    tri = Delaunay(s.from_lattice(tiled_u))
    if len(tri.coplanar):
        raise MeshingError(f"{len(tri.coplanar)} points confondus dans la triangulation périodique")
    simplices = tri.simplices.astype(np.int64)
    centroid = tiled_u[simplices].mean(axis=1)
    inside = np.all((centroid >= 0.0) & (centroid < 1.0), axis=1)
    simplices = simplices[inside]
    triangles = simplices % n
    shifts = tiles[simplices // n]
    corners = s.from_lattice(tiled_u[simplices])
    triangles, shifts = _orient_planar(corners, triangles, shifts)
    return triangles, shifts


def _drop_hole_faces(triangles, shifts, ring_id):
    rid = ring_id[triangles]
    inside = (rid[:, 0] >= 0) & (rid[:, 0] == rid[:, 1]) & (rid[:, 1] == rid[:, 2])
    if shifts is not None:
        shifts = shifts[~inside]
    return triangles[~inside], shifts


def _check_manifold(mesh, loops):
    """Vérifie que les seules arêtes de bord sont celles des boucles des trous"""
    _, counts = mesh.edges()
    if np.any(counts > 2):
        raise MeshingError("Maillage non manifold : arête partagée par plus de deux triangles")
    used = np.zeros(mesh.n_vertices, dtype=bool)
    used[mesh.triangles.ravel()] = True
    if not used.all():
        raise MeshingError(f"{int((~used).sum())} sommets isolés après triangulation")

    boundary = {tuple(sorted(e)) for e in mesh.boundary_edges().tolist()}
    expected = {}
    for j, loop in enumerate(loops):
        for a, b in zip(loop, np.roll(loop, -1)):
            expected[tuple(sorted((int(a), int(b))))] = j
    for edge in boundary:
        if edge not in expected:
            owner = next((j for j, loop in enumerate(loops) if edge[0] in set(loop.tolist())), None)
            raise MeshingError(f"Arête de bord parasite {edge} près du trou {owner}", hole=owner)
    missing = set(expected) - boundary
    if missing:
        j = expected[next(iter(missing))]
        raise MeshingError(f"Raccordement incomplet autour du trou {j}", hole=j)


@log_step
def mesh_domain(s, d, grading=None):
    """Maillage de Ω = M \\ ∪ B_{r_j}(p_j) avec anneaux gradués autour des trous"""
    grading = grading or MeshGrading()
    h = grading.target_h
    if d is None or d.k == 0:
        return mesh_closed_surface(s, h)
    if h >= s.injectivity_radius:
        raise MeshingError(f"Pas de maillage {h} ≥ rayon d'injectivité {s.injectivity_radius:.6g}")

    centers = np.asarray(d.centers, dtype=float)
    radii = np.asarray(d.radii, dtype=float)
    inj = s.injectivity_radius
    sep = d.packing.min_separation

    chunks, ring_id, loops = [], [], []
    outer_radii, last_spacing = [], []
    offset = 0
    for j, (c, r) in enumerate(zip(centers, radii)):
        cap = min(0.4 * sep, r + 0.5 * (inj - r))
        goal = min(0.25 * sep, cap)
        if cap <= r:
            raise MeshingError(f"Trou {j} : aucun espace pour les anneaux (r = {r:.4g}, plafond {cap:.4g})", hole=j)
        rings = _hole_rings(s, r, h, grading.ring_ratio, cap, goal,
                            grading.min_loop_vertices, grading.rings_min)
        points = _ring_points(s, c, rings)
        chunks.append(points)
        n0 = rings[0][1]
        loops.append(np.arange(offset, offset + n0))
        ids = np.full(len(points), -1)
        ids[:n0] = j
        ring_id.append(ids)
        offset += len(points)
        rho_last, n_last = rings[-1]
        outer_radii.append(rho_last)
        last_spacing.append(disk_boundary_length(s, rho_last) / n_last)

    h_bg = min(h, 1.5 * min(last_spacing))
    if s.is_sphere:
        n_bg = int(math.ceil(2.0 / (math.sqrt(3.0) * h_bg ** 2)))
        _check_budget(offset + n_bg, "Maillage du domaine")
        background = sample_points(s, n_bg)
    else:
        background = _torus_background(s, h_bg)
        _check_budget(offset + len(background), "Maillage du domaine")
    keep = _exclude_near_holes(s, background, centers, np.asarray(outer_radii) + 0.6 * h_bg)
    background = background[keep]

    vertices = np.concatenate(chunks + [background])
    ring_id = np.concatenate(ring_id + [np.full(len(background), -1)])
    logger.info(f"Domaine k={d.k} : {offset} sommets d'anneaux, {len(background)} de fond (h_fond = {h_bg:.4g})")

    if s.is_sphere:
        triangles, shifts = _triangulate_sphere(vertices)
    else:
        triangles, shifts = _triangulate_torus(s, vertices)
    triangles, shifts = _drop_hole_faces(triangles, shifts, ring_id)

    mesh = TriMesh(
        surface=s, vertices=vertices, triangles=triangles, shifts=shifts,
        boundary_loops=loops, hole_centers=centers, hole_radii=radii, region_tag='domain',
    )
    _check_manifold(mesh, loops)
    logger.info(f"Maillage du domaine : {mesh.n_vertices} sommets, {mesh.n_triangles} triangles, h_max = {mesh.h_max:.4g}")
    return mesh


@log_step
def fill_holes(m):
    """Maillage fermé obtenu en triangulant l'intérieur de chaque trou

    Les n_domain premiers sommets sont ceux du domaine, dans le même ordre ;
    ``triangle_region`` vaut 0 sur le domaine et j+1 dans le trou j.
    """
    if m.region_tag != 'domain' or m.n_holes == 0:
        raise UsageError("fill_holes exige un maillage de domaine avec au moins un trou")
    s = m.surface
    torus = s is not None and not s.is_sphere

    new_points, new_triangles, new_shifts, regions = [], [], [], []
    next_id = m.n_vertices
    for j in range(m.n_holes):
        c, r, loop = m.hole_centers[j], m.hole_radii[j], m.boundary_loops[j]
        chart_loop = log_map(s, c, m.vertices[loop])
        n_loop = len(loop)
        spacing = 2.0 * r * math.sin(math.pi / n_loop)
        n_inner = max(0, int(math.ceil(r / (SQRT3_2 * spacing))) - 1)
        inner = [np.zeros((1, 2))]
        for q in range(1, n_inner + 1):
            rho = r * (1.0 - q / (n_inner + 1))
            count = max(6, int(round(2.0 * math.pi * rho / spacing)))
            theta = 2.0 * math.pi * (np.arange(count) + 0.5 * q) / count
            inner.append(rho * np.column_stack([np.cos(theta), np.sin(theta)]))
        inner = np.concatenate(inner)
        local = np.concatenate([chart_loop, inner])
        simplices = Delaunay(local).simplices.astype(np.int64)
        simplices, _ = _orient_planar(local[simplices], simplices)

        global_ids = np.concatenate([loop, next_id + np.arange(len(inner))])
        triangles = global_ids[simplices]
        world_inner = exp_map(s, c, inner)
        if torus:
            unreduced = c + local
            world_inner = s.reduce(world_inner)
            all_world = np.concatenate([m.vertices, *new_points, world_inner])
            shifts = np.rint(s.lattice_coords(unreduced[simplices] - all_world[triangles])).astype(np.int64)
            new_shifts.append(shifts)
        new_points.append(world_inner)
        new_triangles.append(triangles)
        regions.append(np.full(len(triangles), j + 1))
        next_id += len(inner)

    vertices = np.concatenate([m.vertices] + new_points)
    triangles = np.concatenate([m.triangles] + new_triangles)
    if s is not None and s.is_sphere:
        triangles, _ = _orient_outward(vertices, triangles)
    shifts = None
    if torus:
        base = m.shifts if m.shifts is not None else np.zeros((m.n_triangles, 3, 2), dtype=np.int64)
        shifts = np.concatenate([base] + new_shifts)
    triangle_region = np.concatenate([np.zeros(m.n_triangles, dtype=np.int64)] + regions)

    filled = TriMesh(
        surface=s, vertices=vertices, triangles=triangles, shifts=shifts,
        boundary_loops=m.boundary_loops, hole_centers=m.hole_centers, hole_radii=m.hole_radii,
        region_tag='closed' if s is not None else 'domain',
        n_domain=m.n_vertices, triangle_region=triangle_region,
    )
    return filled


def mesh_flat_disk(radius, h, hole_radius=None):
    """Disque plan de rayon ``radius`` (ou anneau si ``hole_radius`` est donné), centré en 0"""
    if not radius > 0 or not h > 0:
        raise DomainError(f"Rayon et pas doivent être positifs : {radius}, {h}")
    if hole_radius is not None and not 0 < hole_radius < radius:
        raise DomainError(f"Rayon du trou invalide : {hole_radius}")

    def ring(rho, m, minimum):
        count = max(minimum, int(math.ceil(2.0 * math.pi * rho / h)))
        theta = 2.0 * math.pi * (np.arange(count) + 0.5 * m) / count
        return rho * np.column_stack([np.cos(theta), np.sin(theta)])

    if hole_radius is None:
        n_rings = max(1, int(round(radius / (SQRT3_2 * h))))
        rings = [ring(radius * (1.0 - m / n_rings), m, 16 if m == 0 else 6) for m in range(n_rings)]
        points = np.concatenate(rings + [np.zeros((1, 2))])
        loops = [np.arange(len(rings[0]))]
        centers, radii = None, None
        ring_id = np.full(len(points), -1)
    else:
        n_rings = max(1, int(round((radius - hole_radius) / (SQRT3_2 * h))))
        step = (radius - hole_radius) / n_rings
        rings = [ring(hole_radius + m * step, m, 16) for m in range(n_rings + 1)]
        points = np.concatenate(rings)
        sizes = np.cumsum([0] + [len(r) for r in rings])
        loops = [np.arange(sizes[0], sizes[1]), np.arange(sizes[-2], sizes[-1])]
        centers, radii = np.zeros((1, 2)), np.array([hole_radius])
        ring_id = np.full(len(points), -1)
        ring_id[loops[0]] = 0

    triangles = Delaunay(points).simplices.astype(np.int64)
    triangles, _ = _drop_hole_faces(triangles, None, ring_id)
    triangles, _ = _orient_planar(points[triangles], triangles)
    mesh = TriMesh(surface=None, vertices=points, triangles=triangles, boundary_loops=loops,
                   hole_centers=centers, hole_radii=radii, region_tag='domain')
    return mesh


# Qualité

@dataclass
class HoleResolution:
    hole: int
    n_vertices: int
    loop_length: float
    expected_length: float
    max_radius_error: float


@dataclass
class MeshQuality:
    """Rapport de qualité d'un maillage"""
    n_vertices: int
    n_triangles: int
    min_angle: float
    max_angle: float
    h_max: float
    total_area: float
    euler_characteristic: int
    expected_euler: int
    holes: List[HoleResolution] = field(default_factory=list)

    @property
    def euler_ok(self):
        return self.euler_characteristic == self.expected_euler

    def to_dict(self):
        return {
            'n_vertices': self.n_vertices,
            'n_triangles': self.n_triangles,
            'min_angle': self.min_angle,
            'max_angle': self.max_angle,
            'h_max': self.h_max,
            'total_area': self.total_area,
            'euler_characteristic': self.euler_characteristic,
            'expected_euler': self.expected_euler,
            'euler_ok': self.euler_ok,
            'holes': [vars(hole) for hole in self.holes],
        }


def mesh_quality(m):
    """Angles extrêmes, h_max, résolution de chaque trou et contrôle d'Euler"""
    angles = m.angles()
    holes = []
    for j in range(m.n_holes):
        loop = m.boundary_loops[j]
        r = float(m.hole_radii[j])
        expected = 2.0 * math.pi * r if m.surface is None else disk_boundary_length(m.surface, r)
        radial = np.atleast_1d(distance(m.surface, m.hole_centers[j], m.vertices[loop]))
        holes.append(HoleResolution(
            hole=j,
            n_vertices=len(loop),
            loop_length=m.loop_length(j),
            expected_length=float(expected),
            max_radius_error=float(np.abs(radial - r).max()),
        ))
    return MeshQuality(
        n_vertices=m.n_vertices,
        n_triangles=m.n_triangles,
        min_angle=float(angles.min()),
        max_angle=float(angles.max()),
        h_max=m.h_max,
        total_area=float(m.triangle_areas().sum()),
        euler_characteristic=m.euler_characteristic(),
        expected_euler=m.expected_euler(),
        holes=holes,
    )


# Format de fichier SURFMESH

def write_mesh(m, path):
    """Écrit le maillage au format texte SURFMESH 1"""
    boundary_tag = np.zeros(m.n_vertices, dtype=int)
    loop_id = np.full(m.n_vertices, -1)
    for j, loop in enumerate(m.boundary_loops):
        boundary_tag[loop] = 1
        loop_id[loop] = j
    meta = {
        'region_tag': m.region_tag,
        'n_domain': int(m.n_domain),
        'hole_centers': m.hole_centers.tolist(),
        'hole_radii': m.hole_radii.tolist(),
        'loops': [loop.tolist() for loop in m.boundary_loops],
        'triangle_region': None if m.triangle_region is None else m.triangle_region.tolist(),
    }
    with open(path, 'w', encoding='utf-8') as fh:
        fh.write(f"{MESH_FORMAT_HEADER}\n")
        fh.write(f"# surface {json.dumps(None if m.surface is None else m.surface.to_dict())}\n")
        fh.write(f"# meta {json.dumps(meta)}\n")
        n_boundary_edges = sum(len(loop) for loop in m.boundary_loops)
        fh.write(f"{m.n_vertices} {n_boundary_edges} {m.n_triangles} {len(m.boundary_loops)}\n")
        for x, tag, lid in zip(m.vertices, boundary_tag, loop_id):
            coords = ' '.join(repr(float(v)) for v in x)
            fh.write(f"{coords} {tag} {lid}\n")
        for f, tri in enumerate(m.triangles):
            line = f"{tri[0]} {tri[1]} {tri[2]}"
            if m.shifts is not None:
                line += ' ' + ' '.join(str(int(v)) for v in m.shifts[f].ravel())
            fh.write(line + "\n")
    logger.info(f"Maillage écrit dans {path}")
    return path


def read_mesh(path):
    """Lit un maillage SURFMESH 1"""
    with open(path, 'r', encoding='utf-8') as fh:
        lines = [line.rstrip('\n') for line in fh]
    if not lines or lines[0].strip() != MESH_FORMAT_HEADER:
        raise UsageError(f"Fichier de maillage invalide (en-tête attendu « {MESH_FORMAT_HEADER} ») : {path}")

    surface_data, meta = None, {}
    body = []
    for line in lines[1:]:
        if line.startswith('# surface '):
            surface_data = json.loads(line[len('# surface '):])
        elif line.startswith('# meta '):
            meta = json.loads(line[len('# meta '):])
        elif line.startswith('#') or not line.strip():
            continue
        else:
            body.append(line.split())

    surface = None if surface_data is None else ModelSurface.from_dict(surface_data)
    dim = 3 if surface is not None and surface.is_sphere else 2
    n_vertices, _, n_triangles, _ = (int(v) for v in body[0])
    vertex_rows = body[1:1 + n_vertices]
    triangle_rows = body[1 + n_vertices:1 + n_vertices + n_triangles]
    if len(vertex_rows) != n_vertices or len(triangle_rows) != n_triangles:
        raise UsageError(f"Fichier de maillage tronqué : {path}")

    vertices = np.array([[float(v) for v in row[:dim]] for row in vertex_rows])
    triangles = np.array([[int(v) for v in row[:3]] for row in triangle_rows], dtype=np.int64)
    shifts = None
    if triangle_rows and len(triangle_rows[0]) == 9:
        shifts = np.array([[int(v) for v in row[3:]] for row in triangle_rows], dtype=np.int64).reshape(-1, 3, 2)

    loops = meta.get('loops')
    if loops is None:
        tags = np.array([int(row[dim + 1]) for row in vertex_rows])
        loops = [np.flatnonzero(tags == j) for j in range(tags.max() + 1)] if len(tags) else []
    region = meta.get('triangle_region')
    return TriMesh(
        surface=surface,
        vertices=vertices,
        triangles=triangles,
        shifts=shifts,
        boundary_loops=loops,
        hole_centers=np.asarray(meta.get('hole_centers', []), dtype=float).reshape(-1, dim),
        hole_radii=np.asarray(meta.get('hole_radii', []), dtype=float),
        region_tag=meta.get('region_tag', 'domain' if loops else 'closed'),
        n_domain=meta.get('n_domain'),
        triangle_region=None if region is None else np.asarray(region, dtype=np.int64),
    )
