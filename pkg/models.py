"""
Enregistrements de résultats et modèles de configuration

Les résultats numériques sont des dataclasses sérialisables (to_dict /
from_dict) ; la configuration d'un balayage est un modèle pydantic validé,
chargé depuis un fichier TOML.
"""
import math

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field
from typing import Any, Dict, List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ValidationError, field_validator, model_validator

from core.errors import UsageError
from core.surface import make_surface

CSV_COLUMNS = (
    'k', 'h_max', 'n_vertices', 'sigma1_bar', 'gap', 'beta_total', 'psi_l2', 'psi_linf',
    'quasimode_res', 'window_count', 'dual_dist', 'wall_ms', 'status',
)
INT_COLUMNS = ('k', 'n_vertices', 'window_count')


def validate_ks(ks):
    """Valide la liste des k : entiers ≥ 1 strictement croissants"""
    if not ks:
        raise ValueError("La liste des k est vide")
    if any(k < 1 for k in ks):
        raise ValueError(f"Les k doivent être ≥ 1 : {ks}")
    if any(b <= a for a, b in zip(ks, ks[1:])):
        raise ValueError(f"Les k doivent être strictement croissants : {ks}")
    return ks


def validate_alpha(alpha):
    """Valide l'exposant des rayons (α ≥ 1)"""
    if not alpha >= 1:
        raise ValueError(f"L'exposant α doit être ≥ 1 : {alpha}")
    return alpha


def validate_ring_ratio(ratio):
    """Valide le rapport géométrique des anneaux, dans (1, 2]"""
    if not 1 < ratio <= 2:
        raise ValueError(f"Rapport d'anneaux invalide : {ratio}. Intervalle accepté : (1, 2]")
    return ratio


def _clean(value):
    """Convertit les scalaires numpy et les non-finis pour la sérialisation JSON"""
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


@dataclass(eq=False)
class SpectralResult:
    """Paires propres d'un problème K u = λ B u ; l'entrée 0 est le mode constant"""
    kind: str
    eigenvalues: np.ndarray
    eigenvectors: Optional[np.ndarray]
    measure_mass: float
    residuals: Optional[np.ndarray] = None
    mesh_hash: str = ""
    zero_mode: bool = True
    basis: Optional[Any] = None

    @property
    def normalized(self):
        """λ̄_i = λ_i·masse(B)"""
        return np.asarray(self.eigenvalues) * self.measure_mass

    @property
    def count(self):
        return len(self.eigenvalues) - (1 if self.zero_mode else 0)

    def first_nonzero(self):
        return float(self.normalized[1 if self.zero_mode else 0])

    def to_dict(self):
        return {
            'kind': self.kind,
            'eigenvalues': [float(v) for v in self.eigenvalues],
            'mass': float(self.measure_mass),
            'normalized': [float(v) for v in self.normalized],
            'residuals': None if self.residuals is None else [float(v) for v in self.residuals],
            'mesh_hash': self.mesh_hash,
            'zero_mode': self.zero_mode,
        }

    @classmethod
    def from_dict(cls, data):
        residuals = data.get('residuals')
        return cls(
            kind=data.get('kind', 'laplace'),
            eigenvalues=np.asarray(data['eigenvalues'], dtype=float),
            eigenvectors=None,
            measure_mass=float(data['mass']),
            residuals=None if residuals is None else np.asarray(residuals, dtype=float),
            mesh_hash=data.get('mesh_hash', ''),
            zero_mode=data.get('zero_mode', True),
        )


@dataclass
class CertificateRecord:
    """Inégalité de stabilité sur la sphère : LHS ≤ RHS·(1 + tol)"""
    sigma1: float
    sigma1_bar: float
    measure_mass: float
    domain_area: float
    area_complement: float
    dual_norm_sq: float
    lhs: float
    rhs: float
    tolerance: float
    holds: bool
    pairing: float
    energy_gap: float
    mobius_a: List[float] = field(default_factory=list)
    centering_residual: float = 0.0
    h_max: float = 0.0

    @property
    def slack(self):
        return self.rhs * (1.0 + self.tolerance) - self.lhs

    def to_dict(self):
        data = {key: _clean(value) for key, value in vars(self).items()}
        data['mobius_a'] = [float(v) for v in self.mobius_a]
        data['holds'] = bool(self.holds)
        data['slack'] = _clean(self.slack)
        return data

    @classmethod
    def from_dict(cls, data):
        data = {key: value for key, value in data.items() if key != 'slack'}
        return cls(**data)


@dataclass
class SweepRecord:
    """Une ligne de balayage ; les champs numériques restent vides pour un k en échec"""
    k: int
    h_max: Optional[float] = None
    n_vertices: Optional[int] = None
    sigma1_bar: Optional[float] = None
    gap: Optional[float] = None
    beta_total: Optional[float] = None
    psi_l2: Optional[float] = None
    psi_linf: Optional[float] = None
    quasimode_res: Optional[float] = None
    window_count: Optional[int] = None
    dual_dist: Optional[float] = None
    wall_ms: Optional[float] = None
    status: str = "ok"
    fem_error_bar: Optional[float] = None
    energy_constant: Optional[float] = None
    window_constant: Optional[float] = None
    spectrum: Optional[List[float]] = None
    certificate: Optional[Dict] = None

    @property
    def ok(self):
        return self.status == "ok"

    @classmethod
    def failed(cls, k, error, wall_ms=None):
        return cls(k=k, wall_ms=wall_ms, status=f"error: {type(error).__name__}: {error}")

    def csv_row(self):
        """Valeurs dans l'ordre des colonnes CSV ; réels au format %.12g"""
        row = []
        for column in CSV_COLUMNS:
            value = getattr(self, column)
            if value is None:
                row.append("")
            elif column == 'status':
                row.append(value)
            elif column in INT_COLUMNS:
                row.append(str(int(value)))
            else:
                row.append(f"{float(value):.12g}")
        return row

    def to_dict(self):
        return {key: _clean(value) for key, value in vars(self).items()}

    @classmethod
    def from_dict(cls, data):
        return cls(**{key: data.get(key) for key in cls.__dataclass_fields__ if key in data})


@dataclass
class RateFit:
    name: str
    coefficients: List[float]
    residual: float
    n_params: int

    def to_dict(self):
        return {
            'name': self.name,
            'coefficients': [float(c) for c in self.coefficients],
            'residual': float(self.residual),
            'n_params': self.n_params,
        }


@dataclass
class FitReport:
    """Ajustements du gap contre les modèles de taux et modèle retenu"""
    fits: List[RateFit]
    best: str
    log_coefficient: float
    n_records: int

    def get(self, name):
        for fit in self.fits:
            if fit.name == name:
                return fit
        raise KeyError(name)

    def to_dict(self):
        return {
            'fits': [fit.to_dict() for fit in self.fits],
            'best': self.best,
            'log_coefficient': float(self.log_coefficient),
            'n_records': self.n_records,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            fits=[RateFit(**fit) for fit in data['fits']],
            best=data['best'],
            log_coefficient=data['log_coefficient'],
            n_records=data['n_records'],
        )


# Configuration

class SurfaceConfig(BaseModel):
    kind: Literal['sphere', 'flat-torus'] = 'sphere'
    lattice: Optional[Literal['square', 'equilateral']] = None
    basis: Optional[List[List[float]]] = None

    def build(self):
        return make_surface(self.kind, basis=self.basis, lattice=self.lattice)


class SweepConfig(BaseModel):
    surface: SurfaceConfig = SurfaceConfig()
    ks: List[int]
    alpha: float = 1.5
    seed: int = 0
    h0: float = 0.03
    h_schedule: Optional[List[float]] = None
    eigen_count: int = 10
    ring_ratio: float = 1.4
    rings_min: int = 3
    window_constant: Optional[float] = None
    window_min_k: int = 24
    certify: bool = False
    linear_rtol: Optional[float] = None
    solver_method: Literal['cg', 'direct'] = 'cg'
    workers: Optional[int] = None
    csv_path: Optional[str] = None
    json_path: Optional[str] = None

    @field_validator('ks')
    @classmethod
    def _check_ks(cls, value):
        return validate_ks(value)

    @field_validator('alpha')
    @classmethod
    def _check_alpha(cls, value):
        return validate_alpha(value)

    @field_validator('ring_ratio')
    @classmethod
    def _check_ring_ratio(cls, value):
        return validate_ring_ratio(value)

    @field_validator('h0', 'window_constant')
    @classmethod
    def _check_positive(cls, value):
        if value is not None and not value > 0:
            raise ValueError(f"Valeur strictement positive attendue : {value}")
        return value

    @field_validator('eigen_count', 'rings_min')
    @classmethod
    def _check_count(cls, value):
        if value < 1:
            raise ValueError(f"Entier ≥ 1 attendu : {value}")
        return value

    @model_validator(mode='after')
    def _check_schedule(self):
        if self.h_schedule is not None:
            if len(self.h_schedule) != len(self.ks):
                raise ValueError(f"h_schedule a {len(self.h_schedule)} valeurs pour {len(self.ks)} valeurs de k")
            if any(h <= 0 for h in self.h_schedule):
                raise ValueError("Les pas de h_schedule doivent être strictement positifs")
        return self

    def target_h(self, k):
        """Pas de fond pour k ; les trous sont résolus par la gradation des anneaux"""
        if self.h_schedule is not None:
            return self.h_schedule[self.ks.index(k)]
        return self.h0


def load_sweep_config(path):
    """Charge un SweepConfig depuis un fichier TOML (table [sweep] et [surface] optionnelles)"""
    try:
        with open(path, 'rb') as fh:
            data = tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as e:
        raise UsageError(f"Configuration illisible {path} : {e}") from e
    values = dict(data.get('sweep', data))
    values.pop('sweep', None)
    if 'surface' in data:
        values['surface'] = data['surface']
    try:
        return SweepConfig(**values)
    except ValidationError as e:
        raise UsageError(f"Configuration invalide {path} : {e}") from e
