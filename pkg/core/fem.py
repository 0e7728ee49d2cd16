"""
Éléments finis P1 : raideur cotangente, masses condensées, problème de
Poisson avec récupération conservative du flux, prolongement harmonique et
solveur propre généralisé par shift-invert.
"""
import math
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import (
    ArpackNoConvergence,
    LinearOperator,
    cg,
    eigsh,
    spilu,
    splu,
)

from core.config import get_settings
from core.decorators import auto_validation, log_step
from core.descriptors import BoundedFloat, Choice, PositiveInt
from core.errors import AssemblyError, CapacityError, DomainError, NumericError, UsageError
from models import SpectralResult

logger = logging.getLogger(__name__)

SparseSym = sp.csr_matrix

DEGENERATE_AREA = 1e-14


class MeasureSupport(Enum):
    AREA = "area"
    BOUNDARY = "boundary"


@dataclass
class NodalMeasure:
    """Mesure discrète : poids positifs portés par les sommets"""
    weights: np.ndarray
    support: MeasureSupport = MeasureSupport.AREA
    density_label: str = "uniform"

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        scale = float(np.abs(w).max()) if len(w) else 0.0
        if np.any(~np.isfinite(w)):
            raise DomainError(f"Poids non finis dans la mesure {self.density_label}")
        if np.any(w < -1e-12 * scale):
            raise DomainError(f"Poids négatif dans la mesure {self.density_label} : {w.min():.3e}")
        self.weights = np.maximum(w, 0.0)

    @property
    def total(self):
        return float(self.weights.sum())

    def __len__(self):
        return len(self.weights)

    def scaled(self, c):
        if not c > 0:
            raise DomainError(f"Facteur d'échelle non positif : {c}")
        return NodalMeasure(c * self.weights, self.support, self.density_label)

    def matrix(self):
        return sp.diags(self.weights, format='csr')

    def padded(self, n):
        """Même mesure vue sur un maillage à n ≥ len(self) sommets (sommets ajoutés de poids nul)"""
        if n < len(self.weights):
            raise UsageError(f"Impossible de tronquer une mesure de {len(self.weights)} à {n} sommets")
        weights = np.zeros(n)
        weights[:len(self.weights)] = self.weights
        return NodalMeasure(weights, self.support, self.density_label)


def _cotangents(m):
    """Cotangentes des angles de chaque triangle (F × 3) et aires"""
    p = m.corner_positions()
    areas = m.triangle_areas()
    bad = np.flatnonzero(areas < DEGENERATE_AREA)
    if len(bad):
        f = int(bad[0])
        raise AssemblyError(f"Triangle dégénéré {f} (aire {areas[f]:.3e}), {len(bad)} au total")
    cot = np.empty((len(p), 3))
    for i in range(3):
        u = p[:, (i + 1) % 3] - p[:, i]
        v = p[:, (i + 2) % 3] - p[:, i]
        cot[:, i] = np.einsum('ij,ij->i', u, v) / (2.0 * areas)
    return cot, areas


def assemble_stiffness(m):
    """Matrice de raideur P1 (poids cotangents), semi-définie positive, K·1 = 0"""
    cot, _ = _cotangents(m)
    t = m.triangles
    rows = np.concatenate([t[:, (i + 1) % 3] for i in range(3)])
    cols = np.concatenate([t[:, (i + 2) % 3] for i in range(3)])
    weights = 0.5 * np.concatenate([cot[:, i] for i in range(3)])
    n = m.n_vertices
    upper = sp.coo_matrix((weights, (rows, cols)), shape=(n, n)).tocsr()
    off = upper + upper.T
    K = sp.diags(np.asarray(off.sum(axis=1)).ravel()) - off
    return SparseSym(K)


def element_energies(m, u):
    """Énergie de Dirichlet ∫_T |∇u|² de l'interpolé P1 sur chaque triangle"""
    cot, _ = _cotangents(m)
    ut = np.asarray(u, dtype=float)[m.triangles]
    energy = np.zeros(m.n_triangles)
    for i in range(3):
        energy += 0.5 * cot[:, i] * (ut[:, (i + 1) % 3] - ut[:, (i + 2) % 3]) ** 2
    return energy


def _vertex_values(m, f, name):
    if f is None:
        return np.ones(m.n_vertices)
    if callable(f):
        values = np.asarray(f(m.vertices), dtype=float)
    elif np.isscalar(f):
        values = np.full(m.n_vertices, float(f))
    else:
        values = np.asarray(f, dtype=float)
    if values.shape != (m.n_vertices,):
        raise UsageError(f"Densité {name} : {values.shape} valeurs pour {m.n_vertices} sommets")
    if np.any(values < 0):
        raise DomainError(f"Densité {name} négative au sommet {int(np.argmin(values))} : {values.min():.3e}")
    return values


def assemble_area_mass(m, f=None, triangle_mask=None, label="uniform"):
    """Mesure d'aire condensée Σ_T f_i·|T|/3 ; f fonction, scalaire ou tableau (1 par défaut)"""
    values = _vertex_values(m, f, label)
    areas = m.triangle_areas()
    if triangle_mask is not None:
        areas = np.where(triangle_mask, areas, 0.0)
    lumped = np.bincount(m.triangles.ravel(), weights=np.repeat(areas / 3.0, 3), minlength=m.n_vertices)
    return NodalMeasure(values * lumped, MeasureSupport.AREA, label)


def assemble_boundary_mass(m, rho=None, label="uniform"):
    """Mesure de bord condensée (trapèzes sur chaque boucle)"""
    if not m.boundary_loops or m.region_tag == 'closed':
        raise UsageError("Masse de bord demandée sur un maillage sans bord")
    values = _vertex_values(m, rho, label)
    weights = np.zeros(m.n_vertices)
    for j, loop in enumerate(m.boundary_loops):
        lengths = np.linalg.norm(m.loop_segments(j), axis=1)
        weights[loop] += 0.5 * values[loop] * (lengths + np.roll(lengths, 1))
    return NodalMeasure(weights, MeasureSupport.BOUNDARY, label)


@auto_validation
class SolverSettings:
    """Réglages des solveurs linéaires et propres"""

    rtol = BoundedFloat(0.0, 1.0)
    method = Choice('cg', 'direct', default='cg')
    maxiter = PositiveInt(1)
    eig_shift = BoundedFloat(0.0, 1.0)

    def __init__(self, rtol=None, method='cg', maxiter=None, eig_shift=None):
        settings = get_settings()
        self.rtol = settings.linear_rtol if rtol is None else rtol
        self.method = method
        self.maxiter = settings.linear_maxiter if maxiter is None else maxiter
        self.eig_shift = settings.eig_shift if eig_shift is None else eig_shift

    def validate(self):
        if self.method == 'cg' and self.rtol < 1e-15:
            raise DomainError(f"Tolérance CG irréaliste : {self.rtol}")


def solve_spd(A, rhs, settings):
    """Résout A x = rhs (A symétrique définie positive) ; renvoie x et le résidu relatif"""
    A = sp.csc_matrix(A)
    norm_rhs = float(np.linalg.norm(rhs))
    if norm_rhs == 0.0:
        return np.zeros_like(rhs), 0.0
    if settings.method == 'direct':
        x = splu(A).solve(rhs)
    else:
        ilu = spilu(A, drop_tol=1e-6, fill_factor=20)
        preconditioner = LinearOperator(A.shape, ilu.solve)
        x, info = cg(A, rhs, rtol=settings.rtol, atol=0.0, maxiter=settings.maxiter, M=preconditioner)
        if info != 0:
            residual = float(np.linalg.norm(A @ x - rhs)) / norm_rhs
            raise NumericError(f"Gradient conjugué non convergé (info = {info}, résidu {residual:.3e})",
                               residual=residual)
    residual = float(np.linalg.norm(A @ x - rhs)) / norm_rhs
    return x, residual


@dataclass
class PoissonSolution:
    """ψ sur le domaine (nul au bord) et flux β = ∂ψ/∂ν comme mesure de bord"""
    psi: np.ndarray
    beta: NodalMeasure
    residual_norm: float
    area: NodalMeasure

    @property
    def beta_total(self):
        return self.beta.total

    @property
    def psi_l2(self):
        return float(math.sqrt(np.sum(self.area.weights * self.psi ** 2)))

    @property
    def psi_linf(self):
        return float(np.abs(self.psi).max())


@log_step
def solve_poisson_dirichlet(m, f=None, settings=None):
    """Δψ = f dans Ω (Laplacien d'analyste), ψ = 0 sur ∂Ω ; β = (Kψ + F) sur le bord"""
    if not m.boundary_loops:
        raise UsageError("Problème de Dirichlet sans bord : système singulier")
    settings = settings or SolverSettings()
    area = assemble_area_mass(m, f, label="f")
    F = area.weights
    boundary = m.boundary_vertices()
    interior = np.setdiff1d(np.arange(m.n_vertices), boundary)

    if F.sum() == 0.0:
        zero = np.zeros(m.n_vertices)
        return PoissonSolution(zero, NodalMeasure(zero.copy(), MeasureSupport.BOUNDARY, "beta"), 0.0, area)

    K = assemble_stiffness(m)
    K_II = K[interior][:, interior]
    psi_interior, residual = solve_spd(K_II, -F[interior], settings)

    psi = np.zeros(m.n_vertices)
    psi[interior] = psi_interior
    flux = F + K @ psi
    beta_weights = np.zeros(m.n_vertices)
    beta_weights[boundary] = flux[boundary]
    if np.any(beta_weights[boundary] <= 0):
        raise NumericError(f"Flux de bord non positif : min β = {beta_weights[boundary].min():.3e}",
                           residual=residual)

    beta = NodalMeasure(beta_weights, MeasureSupport.BOUNDARY, "beta")
    drift = abs(beta.total - area.total) / area.total
    logger.info(f"Poisson : résidu {residual:.2e}, Σβ = {beta.total:.12f}, écart de divergence {drift:.2e}")
    return PoissonSolution(psi=psi, beta=beta, residual_norm=residual, area=area)


@dataclass
class HarmonicExtension:
    values: np.ndarray
    energy_inside: float
    energy_outside: float

    @property
    def energy_ratio(self):
        if self.energy_outside == 0.0:
            return 0.0 if self.energy_inside == 0.0 else math.inf
        return self.energy_inside / self.energy_outside


def harmonic_extension(filled, values):
    """Prolonge des valeurs données sur Ω à l'intérieur des trous en minimisant l'énergie"""
    values = np.asarray(values, dtype=float)
    n_domain = filled.n_domain
    if filled.triangle_region is None or len(values) != n_domain:
        raise UsageError(f"{len(values)} valeurs pour {n_domain} sommets du domaine "
                         f"(le maillage doit provenir de fill_holes)")
    K = assemble_stiffness(filled)
    domain = np.arange(n_domain)
    holes = np.arange(n_domain, filled.n_vertices)
    u = np.zeros(filled.n_vertices)
    u[domain] = values
    if len(holes):
        K_HH = sp.csc_matrix(K[holes][:, holes])
        u[holes] = splu(K_HH).solve(-(K[holes][:, domain] @ values))
    energies = element_energies(filled, u)
    inside = filled.triangle_region > 0
    return HarmonicExtension(
        values=u,
        energy_inside=float(energies[inside].sum()),
        energy_outside=float(energies[~inside].sum()),
    )


def _as_measure(B):
    if isinstance(B, NodalMeasure):
        return B
    return NodalMeasure(np.asarray(B, dtype=float))


@log_step
def generalized_eigs(K, B, count, mode='lowest_nonzero', settings=None, kind='laplace'):
    """Plus petites valeurs propres non nulles de K u = λ B u, mode constant déflaté

    Le résultat contient count + 1 paires : l'entrée 0 est le mode constant
    (λ₀ = 0), suivie des count premières valeurs propres non nulles.
    """
    if mode != 'lowest_nonzero':
        raise UsageError(f"Mode de calcul propre non pris en charge : {mode}")
    settings = settings or SolverSettings()
    B = _as_measure(B)
    n = K.shape[0]
    mass = B.total
    if mass <= 0:
        raise DomainError("Mesure de masse nulle")
    rank = int(np.count_nonzero(B.weights))
    if count < 1 or count > rank - 1 or count + 1 >= n:
        raise CapacityError(f"{count} valeurs propres demandées, spectre disponible : {min(rank, n - 1) - 1}")

    Bmat = B.matrix()
    shift = settings.eig_shift * float(K.diagonal().sum()) / mass
    factor = splu(sp.csc_matrix(K + shift * Bmat))
    op_inv = LinearOperator((n, n), matvec=factor.solve, dtype=float)
    v0 = np.random.default_rng(0).standard_normal(n)
    try:
        values, vectors = eigsh(K, k=count + 1, M=Bmat, sigma=-shift, OPinv=op_inv, v0=v0, which='LM')
    except ArpackNoConvergence as e:
        raise NumericError(f"Lanczos non convergé ({len(e.eigenvalues)} paires sur {count + 1})") from e

    order = np.argsort(values)
    values, vectors = values[order], vectors[:, order]

    w = B.weights
    ones = np.ones(n)
    vectors[:, 0] = ones / math.sqrt(mass)
    rest = vectors[:, 1:]
    rest = rest - np.outer(ones, (w @ rest) / mass)
    gram = rest.T @ (w[:, None] * rest)
    try:
        chol = np.linalg.cholesky(0.5 * (gram + gram.T))
    except np.linalg.LinAlgError as e:
        raise NumericError("Vecteurs propres B-dépendants après déflation des constantes") from e
    rest = np.linalg.solve(chol, rest.T).T
    vectors[:, 1:] = rest
    values[0] = 0.0

    Ku = K @ vectors
    Bu = w[:, None] * vectors
    residuals = np.linalg.norm(Ku - Bu * values, axis=0)
    scale = np.maximum(np.linalg.norm(Ku, axis=0), 1e-300)
    residuals = np.where(np.arange(len(values)) == 0, residuals, residuals / scale)

    logger.info(f"Spectre ({kind}) : λ₁ = {values[1]:.8g}, λ̄₁ = {values[1] * mass:.8g}, "
                f"résidu max {residuals.max():.2e}")
    return SpectralResult(
        kind=kind,
        eigenvalues=values,
        eigenvectors=vectors,
        measure_mass=mass,
        residuals=residuals,
    )
