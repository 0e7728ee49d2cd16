"""
Tests unitaires pour la file de travaux des balayages
"""
import pytest

from core.config import Settings
from core.queue import SweepPool, TaskStatus


def _square(x):
    return x * x


class TestSweepPool:
    """Tests pour SweepPool"""

    def test_results_sorted_by_key(self):
        """Vérifie que les tâches sont rendues dans l'ordre des clés"""
        pool = SweepPool(3)
        for k in (16, 4, 8):
            pool.submit(k, _square, k)
        tasks = pool.run()
        assert [t.key for t in tasks] == [4, 8, 16]
        assert [t.result for t in tasks] == [16, 64, 256]
        assert all(t.status is TaskStatus.COMPLETED for t in tasks)

    def test_failure_is_captured(self):
        """Vérifie qu'une tâche en échec garde son exception sans bloquer les autres"""
        def boom(k):
            raise ValueError(f"k={k}")

        pool = SweepPool(1)
        pool.submit(1, boom, 1)
        pool.submit(2, _square, 2)
        failed, done = pool.run()
        assert failed.status is TaskStatus.FAILED
        assert isinstance(failed.error, ValueError)
        assert done.result == 4
        assert pool.get_stats()['failed'] == 1

    def test_workers_from_settings(self, monkeypatch):
        """Vérifie que le nombre de workers par défaut vient de STEKLAB_WORKERS"""
        monkeypatch.setenv('STEKLAB_WORKERS', '5')
        Settings.reset_instance()
        assert SweepPool().max_workers == 5

    def test_run_only_pending(self):
        """Vérifie qu'une seconde exécution ne relance pas les tâches terminées"""
        pool = SweepPool(1)
        pool.submit(1, _square, 3)
        pool.run()
        assert pool.run() == []
