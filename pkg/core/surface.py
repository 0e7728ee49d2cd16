"""
Géométrie exacte des surfaces modèles d'aire unité et de courbure constante

La sphère est réalisée comme la sphère euclidienne de rayon (4π)^{-1/2} dans
R³ ; un tore plat est le quotient de R² par un réseau de covolume 1. Toutes
les quantités géodésiques sont données par des formules closes.

Les points sont des tableaux numpy : vecteurs 3D de norme SPHERE_RADIUS pour
la sphère, vecteurs 2D réduits au domaine fondamental pour le tore. Le cas
``surface is None`` désigne le plan euclidien (maillages de validation).
"""
import math
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
from scipy.optimize import bisect

from core.errors import DomainError

logger = logging.getLogger(__name__)

SPHERE_RADIUS = 1.0 / math.sqrt(4.0 * math.pi)
SQRT_PI = math.sqrt(math.pi)
GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))

# Bornes de l'encadrement L(t) / (2πt) ∈ [3/4, 5/4]
BRACKET_LOW = 0.75
BRACKET_HIGH = 1.25


class SurfaceKind(Enum):
    SPHERE = "sphere"
    FLAT_TORUS = "flat-torus"


def _reduce_basis(basis):
    """Réduction de Lagrange-Gauss d'une base de réseau plan"""
    b1, b2 = np.array(basis[0], dtype=float), np.array(basis[1], dtype=float)
    if b1 @ b1 > b2 @ b2:
        b1, b2 = b2, b1
    while True:
        mu = round((b1 @ b2) / (b1 @ b1))
        b2 = b2 - mu * b1
        if b2 @ b2 >= b1 @ b1:
            break
        b1, b2 = b2, b1
    if b1[0] * b2[1] - b1[1] * b2[0] < 0:
        b2 = -b2
    return np.vstack([b1, b2])


@dataclass(frozen=True, eq=False)
class ModelSurface:
    """Surface fermée d'aire 1 et de courbure constante K = 2πχ"""
    kind: SurfaceKind
    euler_char: int
    lattice_basis: Optional[np.ndarray] = None
    name: str = ""
    _inverse_basis: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        if self.euler_char < 0:
            raise DomainError(f"Surfaces hyperboliques non prises en charge (χ = {self.euler_char})")
        if self.kind is SurfaceKind.SPHERE:
            if self.euler_char != 2:
                raise DomainError(f"La sphère a χ = 2, reçu {self.euler_char}")
        elif self.kind is SurfaceKind.FLAT_TORUS:
            if self.euler_char != 0:
                raise DomainError(f"Le tore plat a χ = 0, reçu {self.euler_char}")
            if self.lattice_basis is None:
                raise DomainError("Un tore plat exige une base de réseau")
            basis = np.asarray(self.lattice_basis, dtype=float)
            if basis.shape != (2, 2):
                raise DomainError(f"Base de réseau invalide : forme {basis.shape}")
            det = abs(np.linalg.det(basis))
            if det < 1e-12:
                raise DomainError("Base de réseau dégénérée")
            basis = _reduce_basis(basis / math.sqrt(det))
            object.__setattr__(self, 'lattice_basis', basis)
            object.__setattr__(self, '_inverse_basis', np.linalg.inv(basis))
        else:
            raise DomainError(f"Type de surface inconnu : {self.kind}")

    @property
    def is_sphere(self):
        return self.kind is SurfaceKind.SPHERE

    @property
    def dim(self):
        """Dimension des coordonnées des points"""
        return 3 if self.is_sphere else 2

    @property
    def curvature(self):
        return 2.0 * math.pi * self.euler_char

    @property
    def area(self):
        return 1.0

    @property
    def injectivity_radius(self):
        if self.is_sphere:
            return math.pi * SPHERE_RADIUS
        return 0.5 * float(np.linalg.norm(self.lattice_basis[0]))

    @property
    def diameter(self):
        """Diamètre géodésique"""
        if self.is_sphere:
            return math.pi * SPHERE_RADIUS
        corners = np.array([[0.5, 0.5], [0.5, -0.5]]) @ self.lattice_basis
        return max(float(np.linalg.norm(displacement(self, np.zeros(2), c))) for c in corners)

    @property
    def r0(self):
        """Plus grand rayon pour lequel l'encadrement (3/4, 5/4) de L(t)/(2πt) tient"""
        return bracket_radius(self.kind)

    def lattice_coords(self, x):
        return np.asarray(x, dtype=float) @ self._inverse_basis

    def from_lattice(self, u):
        return np.asarray(u, dtype=float) @ self.lattice_basis

    def reduce(self, x):
        """Ramène un point du tore au domaine fondamental [0,1)² (coordonnées réseau)"""
        u = self.lattice_coords(x)
        u = u - np.floor(u)
        u[u >= 1.0] = 0.0
        return self.from_lattice(u)

    def project(self, x):
        """Ramène des coordonnées quelconques sur la surface"""
        x = np.asarray(x, dtype=float)
        if self.is_sphere:
            return SPHERE_RADIUS * x / np.linalg.norm(x, axis=-1, keepdims=True)
        return self.reduce(x)

    # Spectre analytique
    def dual_lattice_shell(self, levels=1):
        """Vecteurs du réseau dual de plus petites normes (par couches)"""
        dual = self._inverse_basis.T
        m = np.arange(-4, 5)
        grid = np.stack(np.meshgrid(m, m, indexing='ij'), axis=-1).reshape(-1, 2)
        grid = grid[np.any(grid != 0, axis=1)]
        vectors = grid @ dual
        norms2 = np.einsum('ij,ij->i', vectors, vectors)
        shells = []
        remaining = norms2.copy()
        for _ in range(levels):
            level = remaining.min()
            mask = np.abs(norms2 - level) <= 1e-9 * level
            shells.append((level, vectors[mask]))
            remaining = np.where(norms2 <= level * (1 + 1e-9), np.inf, remaining)
        return shells

    def first_eigenvalue(self):
        """Λ₁ : première valeur propre non nulle de la métrique plate ou ronde (aire 1)"""
        if self.is_sphere:
            return 8.0 * math.pi
        level, _ = self.dual_lattice_shell()[0]
        return 4.0 * math.pi ** 2 * level

    def first_multiplicity(self):
        if self.is_sphere:
            return 3
        _, vectors = self.dual_lattice_shell()[0]
        return len(vectors)

    def first_eigenfunctions(self, points):
        """Base L²-orthonormée de l'espace propre de Λ₁, évaluée aux points (n × dim V)"""
        x = np.atleast_2d(np.asarray(points, dtype=float))
        if self.is_sphere:
            return math.sqrt(3.0) * x / SPHERE_RADIUS
        _, vectors = self.dual_lattice_shell()[0]
        # un représentant par paire ±w
        reps = []
        for w in vectors:
            if not any(np.allclose(w, -r) for r in reps):
                reps.append(w)
        phase = 2.0 * math.pi * x @ np.array(reps).T
        columns = []
        for j in range(len(reps)):
            columns.append(math.sqrt(2.0) * np.cos(phase[:, j]))
            columns.append(math.sqrt(2.0) * np.sin(phase[:, j]))
        return np.column_stack(columns)

    def to_dict(self):
        data = {'kind': self.kind.value, 'name': self.name}
        if not self.is_sphere:
            data['basis'] = self.lattice_basis.tolist()
        return data

    @classmethod
    def from_dict(cls, data):
        return make_surface(data.get('kind', 'sphere'), basis=data.get('basis'),
                            lattice=data.get('lattice'), name=data.get('name', ''))


def sphere():
    return ModelSurface(SurfaceKind.SPHERE, 2, name='sphere')


def torus(basis, name='torus'):
    """Tore plat ; la base est renormalisée à covolume 1"""
    return ModelSurface(SurfaceKind.FLAT_TORUS, 0, lattice_basis=np.asarray(basis, dtype=float), name=name)


def square_torus():
    return torus([[1.0, 0.0], [0.0, 1.0]], name='square-torus')


def equilateral_torus():
    a = math.sqrt(2.0 / math.sqrt(3.0))
    return torus([[a, 0.0], [a / 2.0, a * math.sqrt(3.0) / 2.0]], name='equilateral-torus')


LATTICES = {
    'square': square_torus,
    'equilateral': equilateral_torus,
}


def make_surface(kind, basis=None, lattice=None, euler_char=None, name=''):
    """Construit une surface depuis un descripteur de configuration"""
    kind_value = kind.value if isinstance(kind, SurfaceKind) else str(kind)
    if euler_char is not None and euler_char < 0:
        raise DomainError(f"Surfaces hyperboliques non prises en charge (χ = {euler_char})")
    if kind_value in ('sphere', 'S2'):
        return sphere()
    if kind_value in ('square-torus', 'equilateral-torus'):
        lattice = kind_value.split('-')[0]
        kind_value = 'flat-torus'
    if kind_value == 'flat-torus':
        if basis is not None:
            return torus(basis, name=name or 'torus')
        factory = LATTICES.get(lattice or 'square')
        if factory is None:
            raise DomainError(f"Réseau inconnu : {lattice}. Valeurs acceptées : {list(LATTICES)}")
        return factory()
    raise DomainError(f"Type de surface inconnu : {kind_value}")


# Primitives géodésiques

def displacement(s, p, q):
    """Vecteur de p vers q : corde pour la sphère, plus courte image pour le tore"""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    diff = q - p
    if s is None or s.is_sphere:
        return diff
    u = diff @ s._inverse_basis
    u = u - np.round(u)
    base = u @ s.lattice_basis
    offsets = np.array([[i, j] for i in (-1, 0, 1) for j in (-1, 0, 1)], dtype=float) @ s.lattice_basis
    candidates = base[..., None, :] + offsets
    norms = np.einsum('...ij,...ij->...i', candidates, candidates)
    best = np.argmin(norms, axis=-1)
    return np.take_along_axis(candidates, best[..., None, None], axis=-2)[..., 0, :]


def distance(s, p, q):
    """Distance géodésique entre p et q (diffusion numpy sur les premiers axes)"""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if s is not None and s.is_sphere:
        cross = np.linalg.norm(np.cross(p, q), axis=-1)
        dot = np.einsum('...i,...i->...', p, q)
        out = SPHERE_RADIUS * np.arctan2(cross, dot)
    else:
        out = np.linalg.norm(displacement(s, p, q), axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def bracket_radius(kind):
    """r₀ : plus grand t où (3/4)·2πt ≤ L(t) ≤ (5/4)·2πt, calculé par bissection"""
    kind = kind if isinstance(kind, SurfaceKind) else SurfaceKind(kind)
    if kind is SurfaceKind.FLAT_TORUS:
        return math.inf
    return _sphere_bracket_radius()


_R0_CACHE = {}


def _sphere_bracket_radius():
    if 'sphere' not in _R0_CACHE:
        # L(t)/(2πt) = sin(x)/x avec x = 2√π t
        x = bisect(lambda x: math.sin(x) / x - BRACKET_LOW, 1e-6, math.pi, xtol=1e-12)
        _R0_CACHE['sphere'] = x / (2.0 * SQRT_PI)
        logger.debug(f"r₀(sphère) = {_R0_CACHE['sphere']:.12f}")
    return _R0_CACHE['sphere']


def _check_radius(s, t, bracket):
    t_arr = np.asarray(t, dtype=float)
    if np.any(~np.isfinite(t_arr)) or np.any(t_arr < 0):
        raise DomainError(f"Rayon négatif ou non fini : {t}")
    inj = s.injectivity_radius
    if bracket:
        limit = min(s.r0, inj)
        if np.any(t_arr >= limit):
            raise DomainError(f"Rayon hors de l'encadrement : t = {t} ≥ min(r₀, inj) = {limit:.6g}")
    elif s.is_sphere:
        if np.any(t_arr > inj * (1 + 1e-12)):
            raise DomainError(f"Rayon au-delà du demi-diamètre : t = {t} > {inj:.6g}")
    elif np.any(t_arr >= inj):
        raise DomainError(f"Rayon au-delà du rayon d'injectivité : t = {t} ≥ {inj:.6g}")
    return t_arr


def disk_boundary_length(s, t, bracket=False):
    """Longueur L(t) du cercle géodésique de rayon t"""
    t_arr = _check_radius(s, t, bracket)
    if s.is_sphere:
        out = SQRT_PI * np.sin(2.0 * SQRT_PI * np.minimum(t_arr, s.injectivity_radius))
    else:
        out = 2.0 * math.pi * t_arr
    return float(out) if np.ndim(out) == 0 else out


def disk_area(s, t, bracket=False):
    """Aire du disque géodésique de rayon t"""
    t_arr = _check_radius(s, t, bracket)
    if s.is_sphere:
        out = 0.5 * (1.0 - np.cos(2.0 * SQRT_PI * np.minimum(t_arr, s.injectivity_radius)))
    else:
        out = math.pi * t_arr ** 2
    return float(out) if np.ndim(out) == 0 else out


# Cartes polaires géodésiques

def tangent_frame(c):
    """Repère orthonormé direct (e1, e2) du plan tangent en c (e1 × e2 = c/|c|)"""
    n = np.asarray(c, dtype=float)
    n = n / np.linalg.norm(n)
    helper = np.array([0.0, 0.0, 1.0]) if abs(n[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    e1 = np.cross(helper, n)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(n, e1)
    return e1, e2


def exp_map(s, c, v):
    """Application exponentielle en c ; v donne les coordonnées tangentes 2D (n × 2)"""
    v = np.atleast_2d(np.asarray(v, dtype=float))
    c = np.asarray(c, dtype=float)
    if s is None:
        return c + v
    if not s.is_sphere:
        return c + v
    n = c / np.linalg.norm(c)
    e1, e2 = tangent_frame(c)
    rho = np.linalg.norm(v, axis=1)
    angle = rho / SPHERE_RADIUS
    direction = np.zeros_like(v)
    nonzero = rho > 0
    direction[nonzero] = v[nonzero] / rho[nonzero, None]
    tangent = direction[:, :1] * e1 + direction[:, 1:] * e2
    return SPHERE_RADIUS * (np.cos(angle)[:, None] * n + np.sin(angle)[:, None] * tangent)


def log_map(s, c, points):
    """Inverse de exp_map : coordonnées polaires géodésiques des points autour de c"""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    c = np.asarray(c, dtype=float)
    if s is None:
        return points - c
    if not s.is_sphere:
        return displacement(s, c, points)
    n = c / np.linalg.norm(c)
    e1, e2 = tangent_frame(c)
    unit = points / np.linalg.norm(points, axis=1, keepdims=True)
    rho = distance(s, c, points)
    tangent = unit - (unit @ n)[:, None] * n
    coords = np.column_stack([tangent @ e1, tangent @ e2])
    norms = np.linalg.norm(coords, axis=1)
    out = np.zeros_like(coords)
    nonzero = norms > 0
    out[nonzero] = coords[nonzero] * (np.atleast_1d(rho)[nonzero] / norms[nonzero])[:, None]
    return out


def geodesic_circle_points(s, c, r, n, phase=0.0):
    """n points équirépartis en angle sur le cercle géodésique de centre c et rayon r"""
    if n < 3:
        raise DomainError(f"Au moins 3 points requis sur un cercle : n = {n}")
    if not r > 0:
        raise DomainError(f"Rayon de cercle non positif : {r}")
    if s is not None and r >= s.injectivity_radius:
        raise DomainError(f"Rayon {r} ≥ rayon d'injectivité {s.injectivity_radius:.6g}")
    theta = 2.0 * math.pi * (np.arange(n) + phase) / n
    v = r * np.column_stack([np.cos(theta), np.sin(theta)])
    points = exp_map(s, c, v)
    if s is not None and not s.is_sphere:
        points = s.reduce(points)
    return points


def sample_points(s, n):
    """Échantillon quasi uniforme d'environ n points (Fibonacci sur la sphère, grille sur le tore)"""
    if n < 1:
        raise DomainError(f"Nombre de points invalide : {n}")
    if s.is_sphere:
        i = np.arange(n)
        z = 1.0 - (2.0 * i + 1.0) / n
        radial = np.sqrt(1.0 - z ** 2)
        phi = i * GOLDEN_ANGLE
        return SPHERE_RADIUS * np.column_stack([radial * np.cos(phi), radial * np.sin(phi), z])
    m = max(1, int(math.ceil(math.sqrt(n))))
    u = (np.arange(m) + 0.5) / m
    grid = np.stack(np.meshgrid(u, u, indexing='ij'), axis=-1).reshape(-1, 2)
    return s.from_lattice(grid)


def sample_spacing(s, n):
    """Espacement typique d'un échantillon de n points (aire par point triangulaire)"""
    return math.sqrt(2.0 / (math.sqrt(3.0) * n)) if s.is_sphere else 1.0 / math.ceil(math.sqrt(n))
