"""
Valeurs propres normalisées de Laplace et de Steklov, quasi-modes et
comptage de valeurs propres dans une fenêtre
"""
import math
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from core.errors import CapacityError, DomainError, UsageError
from core.fem import (
    NodalMeasure,
    assemble_area_mass,
    assemble_boundary_mass,
    assemble_stiffness,
    generalized_eigs,
)
from core.mesh import mesh_closed_surface

logger = logging.getLogger(__name__)


def multiplet_tolerance(h):
    """Tolérance relative de regroupement des valeurs propres dégénérées"""
    return max(1e-6, 10.0 * h * h)


def group_multiplets(values, h):
    """Regroupe des valeurs croissantes en multiplets (chaînage à tolérance relative)"""
    values = np.asarray(values, dtype=float)
    if len(values) == 0:
        return []
    tol = multiplet_tolerance(h)
    groups = [[0]]
    for i in range(1, len(values)):
        if values[i] - values[i - 1] <= tol * abs(values[i - 1]):
            groups[-1].append(i)
        else:
            groups.append([i])
    return [np.array(g) for g in groups]


@dataclass(eq=False)
class EigenBasisV:
    """Espace propre V de la première valeur propre de la surface fermée"""
    surface: object
    eigenvalue: float
    vectors: Optional[np.ndarray] = None
    computed_eigenvalue: Optional[float] = None
    mesh_hash: str = ""

    @classmethod
    def analytic(cls, surface):
        return cls(surface=surface, eigenvalue=surface.first_eigenvalue())

    @property
    def dimension(self):
        if self.vectors is not None:
            return self.vectors.shape[1]
        return self.surface.first_multiplicity()

    def evaluate(self, points):
        """Base analytique L²-orthonormée de V évaluée aux points (n × dim V)"""
        if self.surface is None:
            raise UsageError("Base analytique indisponible sans surface modèle")
        return self.surface.first_eigenfunctions(points)

    def alignment(self, mesh, mass):
        """Valeurs singulières de Φᵀ M U : cosinus des angles entre V discret et V analytique"""
        if self.vectors is None:
            raise UsageError("Aucune base discrète à comparer")
        w = mass.weights if isinstance(mass, NodalMeasure) else np.asarray(mass)
        phi = self.evaluate(mesh.vertices)
        return np.linalg.svd(phi.T @ (w[:, None] * self.vectors), compute_uv=False)


def laplace_spectrum(m, f=None, count=10, settings=None):
    """Spectre normalisé de K u = λ M_f u sur un maillage fermé, avec extraction de V"""
    K = assemble_stiffness(m)
    mu = assemble_area_mass(m, f, label="f" if f is not None else "uniform")
    result = generalized_eigs(K, mu, count, settings=settings, kind='laplace')
    result.mesh_hash = m.content_hash()

    groups = group_multiplets(result.normalized[1:], m.h_max)
    first = groups[0] + 1
    computed = float(result.normalized[first].mean())
    reference = m.surface.first_eigenvalue() if (f is None and m.surface is not None) else computed
    result.basis = EigenBasisV(
        surface=m.surface,
        eigenvalue=reference,
        vectors=result.eigenvectors[:, first],
        computed_eigenvalue=computed,
        mesh_hash=result.mesh_hash,
    )
    logger.info(f"λ̄₁ = {computed:.8g} (référence {reference:.8g}), multiplicité {len(first)}")
    return result


def laplace_normalized(s, f=None, h=0.03, count=10, settings=None):
    """λ̄_i = λ_i·μ(M) sur la surface fermée maillée au pas h"""
    return laplace_spectrum(mesh_closed_surface(s, h), f, count, settings)


def first_multiplicity(result, h):
    return len(group_multiplets(result.normalized[1:], h)[0])


def steklov_normalized(m, rho=None, count=10, settings=None):
    """σ̄_i = σ_i·masse(ρ ds) ; ρ densité de bord ou NodalMeasure déjà assemblée"""
    if isinstance(rho, NodalMeasure):
        measure = rho
        if len(measure) != m.n_vertices:
            raise UsageError(f"Mesure de {len(measure)} sommets pour un maillage de {m.n_vertices}")
    else:
        measure = assemble_boundary_mass(m, rho, label="rho")
    if measure.total <= 0:
        raise DomainError("Densité de bord identiquement nulle")
    K = assemble_stiffness(m)
    result = generalized_eigs(K, measure, count, settings=settings, kind='steklov')
    result.mesh_hash = m.content_hash()
    return result


@dataclass
class QuasimodeReport:
    """Résidus de l'équation de Steklov pour les φ ∈ V contre les premiers vecteurs propres χ"""
    residuals: np.ndarray
    energy_ratios: np.ndarray
    energy_constants: np.ndarray
    k: int

    @property
    def max_residual(self):
        return float(self.residuals.max())

    @property
    def scaled_residual(self):
        """max résidu / (log k / k)"""
        if self.k < 2:
            return math.nan
        return self.max_residual * self.k / math.log(self.k)


def quasimode_residual(m, beta, V, steklov=None, count=6, settings=None):
    """|∫⟨dφ, dχ⟩ − Λ₁∫βφχ| / (‖χ‖_{L²(β)} + ‖dχ‖) pour φ ∈ V et χ vecteurs propres de Steklov"""
    phi = V.evaluate(m.vertices)
    if phi.shape[0] != m.n_vertices or len(beta) != m.n_vertices:
        raise UsageError(f"Dimensions incompatibles : φ {phi.shape[0]}, β {len(beta)}, sommets {m.n_vertices}")
    if steklov is None:
        steklov = steklov_normalized(m, beta, count, settings)
    chi = steklov.eigenvectors
    if chi is None or chi.shape[0] != m.n_vertices:
        raise UsageError("Vecteurs propres de Steklov absents ou de mauvaise dimension")

    K = assemble_stiffness(m)
    b = beta.weights
    Kchi = K @ chi
    pairing = phi.T @ Kchi - V.eigenvalue * phi.T @ (b[:, None] * chi)
    trace = np.sqrt(np.einsum('ij,i,ij->j', chi, b, chi))
    energy = np.sqrt(np.maximum(np.einsum('ij,ij->j', chi, Kchi), 0.0))
    residuals = np.abs(pairing) / (trace + energy)[None, :]

    k = m.n_holes
    Kphi = K @ phi
    ratios = np.einsum('ij,ij->j', phi, Kphi) / np.einsum('ij,i,ij->j', phi, b, phi)
    constants = (ratios - V.eigenvalue) * (k / math.log(k)) if k >= 2 else np.full(len(ratios), math.nan)
    return QuasimodeReport(residuals=residuals, energy_ratios=ratios, energy_constants=constants, k=k)


def window_count(r, center, eta):
    """Nombre de valeurs propres normalisées dans [center − η, center + η]"""
    if eta < 0 or math.isnan(eta):
        raise DomainError(f"Demi-largeur de fenêtre négative : {eta}")
    values = r.normalized
    if math.isinf(eta):
        return int(len(values))
    if center + eta > values.max():
        raise CapacityError(f"Fenêtre [{center - eta:.6g}, {center + eta:.6g}] au-delà du spectre calculé "
                            f"(max {values.max():.6g})")
    return int(np.count_nonzero(np.abs(values - center) <= eta))


def smallest_window(r, center, count):
    """Plus petit η tel que la fenêtre de centre center contienne count valeurs propres"""
    values = r.normalized
    if count < 1 or count > len(values):
        raise CapacityError(f"{count} valeurs demandées, {len(values)} calculées")
    return float(np.sort(np.abs(values - center))[count - 1])


def discretization_error_bar(s, h, settings=None):
    """|λ̄₁(h) − Λ₁| sur la surface fermée"""
    result = laplace_normalized(s, h=h, count=s.first_multiplicity(), settings=settings)
    error = abs(result.basis.computed_eigenvalue - s.first_eigenvalue())
    logger.info(f"Barre d'erreur de discrétisation ({s.name}, h = {h}) : {error:.4g}")
    return error


@dataclass
class MonotonicityReport:
    sigma1_bar: float
    lambda1_bar: float

    @property
    def holds(self):
        return self.sigma1_bar <= self.lambda1_bar * (1.0 + 1e-9)


def monotonicity_check(domain, filled, beta, settings=None):
    """σ̄₁(Ω, β) contre λ̄₁ de la même mesure nodale sur le maillage rebouché"""
    if filled.n_domain != domain.n_vertices:
        raise UsageError("Le maillage rebouché ne prolonge pas le maillage du domaine")
    sigma = steklov_normalized(domain, beta, 1, settings).first_nonzero()
    K = assemble_stiffness(filled)
    lam = generalized_eigs(K, beta.padded(filled.n_vertices), 1, settings=settings, kind='laplace').first_nonzero()
    return MonotonicityReport(sigma1_bar=sigma, lambda1_bar=lam)
