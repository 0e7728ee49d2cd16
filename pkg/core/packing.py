"""
Choix de k centres bien séparés et spécification du domaine perforé

Les centres sont obtenus par échantillonnage glouton du point le plus
éloigné (farthest point sampling) parmi un ensemble dense de candidats
quasi uniformes ; les constantes de séparation et de recouvrement sont
ensuite vérifiées, pas supposées.
"""
import math
import json
import logging
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from core.config import get_settings
from core.errors import CapacityError, DomainError, GeometryError
from core.surface import ModelSurface, distance, disk_area, sample_points, sample_spacing

logger = logging.getLogger(__name__)

# Constantes de séparation et de recouvrement : sep ≥ 2c₀/√k, cov ≤ C₀/√k
SEPARATION_CONSTANT = 1.0 / math.sqrt(5.0 * math.pi)
COVERING_CONSTANT = 8.0 / math.sqrt(3.0 * math.pi)
DEFAULT_ALPHA = 1.5


@dataclass(eq=False)
class DiskPacking:
    """k centres, leurs rayons et les statistiques de séparation et de recouvrement"""
    surface: ModelSurface
    centers: np.ndarray
    radii: np.ndarray
    min_separation: float
    covering_radius: float
    seed: int
    grid_spacing: float = 0.0
    alpha: float = DEFAULT_ALPHA

    @property
    def k(self):
        return len(self.centers)

    def separation_ratio(self):
        """min_separation·√k, à comparer à 2c₀"""
        return self.min_separation * math.sqrt(self.k)

    def covering_ratio(self):
        """covering_radius·√k, à comparer à C₀"""
        return self.covering_radius * math.sqrt(self.k)

    def to_dict(self):
        return {
            'surface': self.surface.to_dict(),
            'seed': self.seed,
            'k': self.k,
            'alpha': self.alpha,
            'centers': self.centers.tolist(),
            'radii': self.radii.tolist(),
            'min_separation': None if math.isinf(self.min_separation) else self.min_separation,
            'covering_radius': self.covering_radius,
            'grid_spacing': self.grid_spacing,
        }

    @classmethod
    def from_dict(cls, data):
        surface = ModelSurface.from_dict(data['surface'])
        sep = data.get('min_separation')
        return cls(
            surface=surface,
            centers=np.asarray(data['centers'], dtype=float).reshape(-1, surface.dim),
            radii=np.asarray(data['radii'], dtype=float),
            min_separation=math.inf if sep is None else float(sep),
            covering_radius=float(data['covering_radius']),
            seed=int(data['seed']),
            grid_spacing=float(data.get('grid_spacing', 0.0)),
            alpha=float(data.get('alpha', DEFAULT_ALPHA)),
        )

    def save(self, path):
        with open(path, 'w', encoding='utf-8') as fh:
            json.dump(self.to_dict(), fh, indent=2)

    @classmethod
    def load(cls, path):
        with open(path, 'r', encoding='utf-8') as fh:
            return cls.from_dict(json.load(fh))


@dataclass(eq=False)
class DomainSpec:
    """Ω = M privée des disques géodésiques B_{r_j}(p_j)"""
    packing: DiskPacking
    radius_exponent: float
    radii: np.ndarray = field(default=None)

    @property
    def surface(self):
        return self.packing.surface

    @property
    def centers(self):
        return self.packing.centers

    @property
    def k(self):
        return self.packing.k

    def hole_area_total(self):
        """Σ_j aire(B_{r_j})"""
        if self.k == 0:
            return 0.0
        return float(np.sum(disk_area(self.surface, self.radii)))

    def domain_area(self):
        return 1.0 - self.hole_area_total()


class HolePartition(NamedTuple):
    """Partition des trous en grands (S′) et petits (S \\ S′)"""
    large: np.ndarray
    small: np.ndarray
    threshold: float
    count_bound: float


def pairwise_distances(s, points):
    """Matrice des distances géodésiques entre points"""
    points = np.asarray(points, dtype=float)
    return distance(s, points[:, None, :], points[None, :, :])


def _farthest_point_order(s, candidates, k, start):
    min_dist = np.atleast_1d(distance(s, candidates[start], candidates))
    chosen = [start]
    for _ in range(1, k):
        idx = int(np.argmax(min_dist))
        chosen.append(idx)
        min_dist = np.minimum(min_dist, distance(s, candidates[idx], candidates))
    return np.array(chosen), min_dist


def select_separated_points(s, k, seed=0, n_candidates=None):
    """Sélection gloutonne de k centres par échantillonnage du point le plus éloigné"""
    settings = get_settings()
    if k < 1:
        raise DomainError(f"k doit être ≥ 1 : {k}")
    if k > settings.max_k:
        raise CapacityError(f"k = {k} dépasse la capacité configurée ({settings.max_k})")

    n = int(n_candidates or settings.validation_samples)
    n = max(n, 20 * k)
    candidates = sample_points(s, n)
    rng = np.random.default_rng(seed)
    start = int(rng.integers(len(candidates)))

    chosen, min_dist = _farthest_point_order(s, candidates, k, start)
    centers = candidates[chosen].copy()
    covering = float(min_dist.max())

    if k > 1:
        dist = pairwise_distances(s, centers)
        np.fill_diagonal(dist, np.inf)
        separation = float(dist.min())
    else:
        separation = math.inf

    radii = np.full(k, float(k) ** (-DEFAULT_ALPHA))
    packing = DiskPacking(
        surface=s,
        centers=centers,
        radii=radii,
        min_separation=separation,
        covering_radius=covering,
        seed=int(seed),
        grid_spacing=sample_spacing(s, len(candidates)),
    )
    logger.info(
        f"Empilement k={k} : séparation·√k = {packing.separation_ratio():.4f}, "
        f"recouvrement·√k = {packing.covering_ratio():.4f}"
    )
    return packing


def make_domain_spec(p, alpha=DEFAULT_ALPHA, radii=None):
    """Spécification Ω_k = M \\ ∪ B_{k^{-α}}(p_j) ; des rayons explicites peuvent remplacer k^{-α}"""
    if alpha < 1:
        raise DomainError(f"L'exposant α doit être ≥ 1 : {alpha}")
    s = p.surface
    if radii is None:
        radii = np.full(p.k, float(p.k) ** (-alpha))
    radii = np.asarray(radii, dtype=float).reshape(-1)
    if len(radii) != p.k:
        raise DomainError(f"{len(radii)} rayons fournis pour {p.k} centres")
    if np.any(radii <= 0):
        raise DomainError("Les rayons des trous doivent être strictement positifs")

    inj = s.injectivity_radius
    too_big = np.flatnonzero(radii >= inj)
    if len(too_big):
        j = int(too_big[0])
        raise GeometryError(
            f"Rayon du trou {j} ({radii[j]:.6g}) ≥ rayon d'injectivité ({inj:.6g})", pair=(j, j)
        )

    if p.k > 1:
        dist = pairwise_distances(s, p.centers)
        margin = dist - 2.0 * (radii[:, None] + radii[None, :])
        np.fill_diagonal(margin, np.inf)
        i, j = np.unravel_index(int(np.argmin(margin)), margin.shape)
        if margin[i, j] <= 0:
            i, j = sorted((int(i), int(j)))
            raise GeometryError(
                f"Disques doublés non disjoints entre les trous {i} et {j} : "
                f"distance {dist[i, j]:.6g} ≤ 2(r_i + r_j) = {2 * (radii[i] + radii[j]):.6g}",
                pair=(i, j),
            )

    return DomainSpec(packing=p, radius_exponent=float(alpha), radii=radii)


def split_large_holes(d, delta):
    """Partition S′ = {j : r_j ≥ √δ·k^{-1/4}} et son complémentaire"""
    if not delta > 0:
        raise DomainError(f"δ doit être strictement positif : {delta}")
    k = max(d.k, 1)
    threshold = math.sqrt(delta) * k ** -0.25
    large = np.flatnonzero(d.radii >= threshold)
    small = np.flatnonzero(d.radii < threshold)
    return HolePartition(large=large, small=small, threshold=threshold,
                         count_bound=4.0 / (3.0 * math.pi) * math.sqrt(k))
