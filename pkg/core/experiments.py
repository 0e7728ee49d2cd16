"""
Balayages de construction sur k, ajustement des taux de convergence du gap
et émission des résultats (CSV, JSON)
"""
import csv
import json
import math
import time
import logging

import numpy as np

from core.decorators import add_performance_tracking
from core.errors import CapacityError, ResultIOError, SteklabError, UsageError
from core.fem import SolverSettings, assemble_area_mass, assemble_stiffness, solve_poisson_dirichlet
from core.mesh import MeshGrading, fill_holes, mesh_domain
from core.metaclasses import RateModelMeta, Registry
from core.packing import make_domain_spec, select_separated_points
from core.queue import SweepPool, TaskStatus
from core.spectra import (
    EigenBasisV,
    discretization_error_bar,
    quasimode_residual,
    smallest_window,
    steklov_normalized,
    window_count,
)
from core.stability import MeasureDiff, dual_norm_full, gap_certificate_sphere
from models import CSV_COLUMNS, FitReport, RateFit, SpectralResult, SweepRecord

logger = logging.getLogger(__name__)


# Modèles de taux

class BaseRateModel(metaclass=RateModelMeta):
    """Modèle gap(k) ≈ Σ_i c_i·b_i(k), ajusté en moindres carrés relatifs"""
    basis = ()

    @classmethod
    def design(cls, k):
        k = np.asarray(k, dtype=float)
        return np.column_stack([f(k) for f in cls.basis])

    @classmethod
    def fit(cls, k, gap):
        gap = np.asarray(gap, dtype=float)
        A = cls.design(k) / gap[:, None]
        coefficients, *_ = np.linalg.lstsq(A, np.ones(len(gap)), rcond=None)
        relative = A @ coefficients - 1.0
        return RateFit(
            name=cls.key,
            coefficients=[float(c) for c in coefficients],
            residual=float(math.sqrt(np.mean(relative ** 2))),
            n_params=cls.n_params,
        )


def _log_over_k(k):
    return np.log(k) / k


def _inverse(k):
    return 1.0 / k


def _inverse_sqrt(k):
    return 1.0 / np.sqrt(k)


class LogOverK(BaseRateModel):
    key = 'log_k_over_k'
    basis = (_log_over_k,)


class InverseK(BaseRateModel):
    key = 'inv_k'
    basis = (_inverse,)


class InverseSqrtK(BaseRateModel):
    key = 'inv_sqrt_k'
    basis = (_inverse_sqrt,)


class LogOverKPlusInverseK(BaseRateModel):
    key = 'log_k_over_k_plus_inv_k'
    basis = (_log_over_k, _inverse)


def fit_rate(records, models=None):
    """Ajuste le gap contre chaque modèle de taux et retient le meilleur

    Parmi les modèles dont le résidu relatif égale le minimum (à 1e-6 près),
    le plus parcimonieux l'emporte.
    """
    valid = [r for r in records if r.ok and r.gap is not None and r.gap > 0 and r.k >= 2]
    if len(valid) < 4:
        raise UsageError(f"Au moins 4 enregistrements valides requis pour l'ajustement, {len(valid)} fournis")
    k = np.array([r.k for r in valid], dtype=float)
    gap = np.array([r.gap for r in valid], dtype=float)

    models = models or list(Registry.all(RateModelMeta.namespace).values())
    fits = [model.fit(k, gap) for model in models]
    best_residual = min(fit.residual for fit in fits)
    threshold = best_residual + 1e-9 + 1e-6 * best_residual
    candidates = [fit for fit in fits if fit.residual <= threshold]
    best = min(candidates, key=lambda fit: (fit.n_params, fit.residual))

    log_fit = next((fit for fit in fits if fit.name == LogOverK.key), None)
    log_coefficient = log_fit.coefficients[0] if log_fit else LogOverK.fit(k, gap).coefficients[0]
    for fit in fits:
        logger.info(f"Modèle {fit.name} : coefficients {fit.coefficients}, résidu relatif {fit.residual:.4g}")
    logger.info(f"Modèle retenu : {best.name} (coefficient log k/k = {log_coefficient:.6g})")
    return FitReport(fits=fits, best=best.name, log_coefficient=log_coefficient, n_records=len(valid))


# Fenêtres spectrales

def _count_in_window(k, spectrum, center, constant):
    if k < 2:
        return None
    result = SpectralResult(kind='steklov', eigenvalues=np.asarray(spectrum, dtype=float),
                            eigenvectors=None, measure_mass=1.0)
    try:
        # la valeur qui fixe C tombe sur le bord de la fenêtre
        return window_count(result, center, constant * math.log(k) / k * (1.0 + 1e-9))
    except CapacityError as e:
        logger.warning(f"k={k} : fenêtre hors du spectre calculé ({e})")
        return None


def fit_window_constant(records, min_k=24):
    """Plus petite constante C telle que la fenêtre C·log k/k capture dim V valeurs pour tout k ≥ min_k

    Sans enregistrement à k ≥ min_k, tous les enregistrements valides servent.
    """
    usable = [r for r in records if r.ok and r.window_constant is not None]
    if not usable:
        return None
    large = [r for r in usable if r.k >= min_k] or usable
    constant = max(r.window_constant for r in large)
    logger.info(f"Constante de fenêtre ajustée : C = {constant:.6g} sur k ∈ {[r.k for r in large]}")
    return constant


def apply_window_constant(records, center, constant):
    """Renseigne window_count à la constante donnée pour chaque enregistrement valide"""
    for record in records:
        if record.ok and record.spectrum is not None:
            record.window_count = _count_in_window(record.k, record.spectrum, center, constant)
    return records


# Pipeline de construction

@add_performance_tracking
class ConstructionPipeline:
    """Empilement → domaine → maillage → Poisson → β → Steklov pour un k donné"""

    def __init__(self, cfg, surface=None, error_bar=None):
        self.cfg = cfg
        self.surface = surface or cfg.surface.build()
        self.error_bar = error_bar
        self.settings = SolverSettings(rtol=cfg.linear_rtol, method=cfg.solver_method)
        self.basis = EigenBasisV.analytic(self.surface)

    def _step(self, name, func, *args, **kwargs):
        start = time.perf_counter()
        result = func(*args, **kwargs)
        self._track_performance((time.perf_counter() - start) * 1000.0, name)
        return result

    def run(self, k):
        cfg, s = self.cfg, self.surface
        start = time.perf_counter()
        lam = self.basis.eigenvalue

        packing = self._step('packing', select_separated_points, s, k, cfg.seed)
        spec = self._step('domain', make_domain_spec, packing, cfg.alpha)
        grading = MeshGrading(target_h=cfg.target_h(k), ring_ratio=cfg.ring_ratio, rings_min=cfg.rings_min)
        mesh = self._step('mesh', mesh_domain, s, spec, grading)
        poisson = self._step('poisson', solve_poisson_dirichlet, mesh, None, self.settings)
        steklov = self._step('steklov', steklov_normalized, mesh, poisson.beta, cfg.eigen_count, self.settings)
        sigma1_bar = steklov.first_nonzero()

        quasimode = self._step('quasimode', quasimode_residual, mesh, poisson.beta, self.basis, steklov)
        spectrum = [float(v) for v in steklov.normalized]
        constant = None
        if k >= 2:
            try:
                constant = smallest_window(steklov, lam, self.basis.dimension) * k / math.log(k)
            except CapacityError as e:
                logger.warning(f"k={k} : moins de {self.basis.dimension} valeurs propres calculées ({e})")
        count = None
        if cfg.window_constant is not None:
            count = _count_in_window(k, spectrum, lam, cfg.window_constant)

        filled = self._step('fill', fill_holes, mesh)
        K = assemble_stiffness(filled)
        area = assemble_area_mass(filled)
        sigma1 = float(steklov.eigenvalues[1])
        diff = MeasureDiff.from_measures(poisson.beta.padded(filled.n_vertices).scaled(sigma1), area.scaled(lam))
        dual = self._step('dual', dual_norm_full, K, area, diff)

        certificate = None
        if cfg.certify and s.is_sphere:
            certificate = self._step('certificate', gap_certificate_sphere, mesh, poisson.beta, self.settings).to_dict()

        constants = quasimode.energy_constants
        energy_constant = float(np.nanmax(constants)) if np.any(np.isfinite(constants)) else None
        record = SweepRecord(
            k=k,
            h_max=mesh.h_max,
            n_vertices=mesh.n_vertices,
            sigma1_bar=sigma1_bar,
            gap=lam - sigma1_bar,
            beta_total=poisson.beta_total,
            psi_l2=poisson.psi_l2,
            psi_linf=poisson.psi_linf,
            quasimode_res=quasimode.max_residual,
            window_count=count,
            dual_dist=dual,
            wall_ms=(time.perf_counter() - start) * 1000.0,
            fem_error_bar=self.error_bar,
            energy_constant=energy_constant,
            window_constant=constant,
            spectrum=spectrum,
            certificate=certificate,
        )
        if record.gap <= 5.0 * record.h_max:
            logger.warning(f"k={k} : gap {record.gap:.4g} sous la tolérance de discrétisation 5·h_max")
        logger.info(f"k={k} : σ̄₁ = {sigma1_bar:.8g}, gap = {record.gap:.6g}, Σβ = {record.beta_total:.10f}")
        return record


def _run_point(cfg, surface, k, error_bar):
    return ConstructionPipeline(cfg, surface, error_bar).run(k)


def run_sweep(cfg, workers=None):
    """Exécute le pipeline pour chaque k ; un k en échec n'interrompt pas le balayage"""
    surface = cfg.surface.build()
    settings = SolverSettings(rtol=cfg.linear_rtol, method=cfg.solver_method)
    try:
        error_bar = discretization_error_bar(surface, cfg.h0, settings)
    except SteklabError as e:
        logger.warning(f"Barre d'erreur de discrétisation indisponible : {e}")
        error_bar = None

    pool = SweepPool(workers or cfg.workers)
    for k in cfg.ks:
        pool.submit(k, _run_point, cfg, surface, k, error_bar)
    records = []
    for task in pool.run():
        if task.status is TaskStatus.COMPLETED:
            records.append(task.result)
        else:
            records.append(SweepRecord.failed(task.key, task.error))

    if cfg.window_constant is None:
        constant = fit_window_constant(records, cfg.window_min_k)
        if constant is not None:
            apply_window_constant(records, surface.first_eigenvalue(), constant)

    stats = pool.get_stats()
    logger.info(f"Balayage terminé : {stats['completed']}/{len(records)} valeurs de k réussies, "
                f"{stats['failed']} en échec")
    return records


# Émission

def emit_results(records, fit=None, csv_path=None, json_path=None):
    """Écrit les enregistrements en CSV (ordre de colonnes fixe) et/ou en JSON"""
    if not records:
        raise UsageError("Aucun enregistrement à écrire")
    written = []
    if csv_path is not None:
        try:
            with open(csv_path, 'w', newline='', encoding='utf-8') as fh:
                writer = csv.writer(fh, lineterminator='\n')
                writer.writerow(CSV_COLUMNS)
                for record in records:
                    writer.writerow(record.csv_row())
        except OSError as e:
            raise ResultIOError(f"Écriture impossible : {csv_path} ({e})", path=csv_path) from e
        written.append(csv_path)
    if json_path is not None:
        payload = {
            'columns': list(CSV_COLUMNS),
            'records': [record.to_dict() for record in records],
            'fit': None if fit is None else fit.to_dict(),
        }
        try:
            with open(json_path, 'w', encoding='utf-8') as fh:
                json.dump(payload, fh, indent=2)
        except OSError as e:
            raise ResultIOError(f"Écriture impossible : {json_path} ({e})", path=json_path) from e
        written.append(json_path)
    logger.info(f"Résultats écrits : {', '.join(str(p) for p in written)}")
    return written


def load_results(path):
    """Relit un fichier JSON produit par emit_results : (enregistrements, ajustement)"""
    try:
        with open(path, 'r', encoding='utf-8') as fh:
            payload = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise ResultIOError(f"Lecture impossible : {path} ({e})", path=path) from e
    records = [SweepRecord.from_dict(data) for data in payload.get('records', [])]
    fit = payload.get('fit')
    return records, None if fit is None else FitReport.from_dict(fit)
