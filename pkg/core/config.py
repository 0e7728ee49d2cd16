"""
Configuration d'environnement de steklab

Les valeurs sont lues dans les variables STEKLAB_* (après chargement d'un
éventuel fichier .env) et peuvent être surchargées à l'exécution avec
set_config.
"""
import os
import logging

from dotenv import load_dotenv

from core.metaclasses import ConfigMeta

logger = logging.getLogger(__name__)

DEFAULTS = {
    'log_level': 'INFO',
    'workers': 2,
    'max_vertices': 500_000,
    'max_k': 512,
    'linear_rtol': 1e-12,
    'linear_maxiter': 5000,
    'eig_shift': 1e-8,
    'validation_samples': 120_000,
}

_CASTS = {
    'log_level': str,
    'workers': int,
    'max_vertices': int,
    'max_k': int,
    'linear_rtol': float,
    'linear_maxiter': int,
    'eig_shift': float,
    'validation_samples': int,
}


class Settings(metaclass=ConfigMeta):
    """Paramètres globaux, lus depuis l'environnement"""

    required_config_fields = list(DEFAULTS)

    def __init__(self):
        self._config = {}
        self.reload()

    def reload(self):
        """Relit l'environnement et le fichier .env"""
        load_dotenv()
        for key, default in DEFAULTS.items():
            raw = os.environ.get(f"STEKLAB_{key.upper()}")
            if raw is None:
                self._config[key] = default
                continue
            try:
                self._config[key] = _CASTS[key](raw)
            except ValueError:
                logger.warning(f"Valeur invalide pour STEKLAB_{key.upper()} : {raw!r}, défaut {default} utilisé")
                self._config[key] = default
        self.validate_config()

    def __getattr__(self, name):
        config = self.__dict__.get('_config', {})
        if name in config:
            return config[name]
        raise AttributeError(name)

    def as_dict(self):
        return dict(self._config)


def get_settings():
    """Retourne l'instance unique des paramètres"""
    return Settings()
