"""
Décorateurs transversaux : journalisation des étapes, suivi des durées,
validation automatique
"""
import time
import logging
import functools
from datetime import datetime


def log_step(func):
    """Décorateur de fonction pour journaliser une étape de calcul avec sa durée"""
    logger = logging.getLogger(func.__module__)

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        logger.info(f"Début : {func.__name__}")
        start_time = time.perf_counter()
        try:
            result = func(*args, **kwargs)
        except Exception as e:
            logger.warning(f"Échec : {func.__name__} ({type(e).__name__}: {e})")
            raise
        elapsed_ms = (time.perf_counter() - start_time) * 1000.0
        logger.info(f"Fin : {func.__name__} ({elapsed_ms:.1f} ms)")
        return result

    return wrapper


def add_performance_tracking(cls):
    """Décorateur pour le suivi automatique des durées d'étapes"""
    original_init = cls.__init__

    @functools.wraps(original_init)
    def __init__(self, *args, **kwargs):
        original_init(self, *args, **kwargs)
        self._performance_metrics = []

    cls.__init__ = __init__

    def track_performance(self, duration, method_name):
        """Enregistre une métrique de performance"""
        metric = {
            'method': method_name,
            'duration': duration,
            'timestamp': datetime.now()
        }
        self._performance_metrics.append(metric)

    def get_performance_metrics(self):
        """Retourne les métriques de performance"""
        return self._performance_metrics

    def get_total_duration(self):
        """Somme des durées enregistrées"""
        return sum(m['duration'] for m in self._performance_metrics)

    cls._track_performance = track_performance
    cls.get_performance_metrics = get_performance_metrics
    cls.get_total_duration = get_total_duration

    return cls


def auto_validation(cls):
    """Décorateur pour la validation automatique après construction

    Appelle ``validate()`` à la fin de ``__init__`` si la classe la définit.
    """
    original_init = cls.__init__

    @functools.wraps(original_init)
    def __init__(self, *args, **kwargs):
        original_init(self, *args, **kwargs)
        if type(self) is cls and hasattr(self, 'validate'):
            self.validate()

    cls.__init__ = __init__
    return cls
