"""
Tests unitaires pour les décorateurs transversaux
"""
import logging

import pytest

from core.decorators import add_performance_tracking, auto_validation, log_step


class TestLogStep:
    """Tests pour @log_step"""

    def test_logs_start_and_end(self, caplog):
        """Vérifie la journalisation du début et de la fin d'une étape"""

        @log_step
        def assemble(x):
            return 2 * x

        with caplog.at_level(logging.INFO):
            assert assemble(21) == 42

        messages = [record.getMessage() for record in caplog.records]
        assert messages[0] == "Début : assemble"
        assert messages[1].startswith("Fin : assemble (")

    def test_logs_failure_and_reraises(self, caplog):
        """Vérifie que l'échec est journalisé puis propagé"""

        @log_step
        def broken():
            raise RuntimeError("factorisation")

        with caplog.at_level(logging.INFO):
            with pytest.raises(RuntimeError):
                broken()

        assert any("Échec : broken (RuntimeError: factorisation)" in r.getMessage() for r in caplog.records)

    def test_preserves_metadata(self):
        """Vérifie que le nom et la docstring sont préservés"""

        @log_step
        def solve():
            """Résout le système"""

        assert solve.__name__ == 'solve'
        assert solve.__doc__ == "Résout le système"


class TestPerformanceTracking:
    """Tests pour @add_performance_tracking"""

    def test_records_metrics(self):
        """Vérifie l'enregistrement et la somme des durées d'étapes"""

        @add_performance_tracking
        class Pipeline:
            def __init__(self, name):
                self.name = name

        pipeline = Pipeline('sphère')
        pipeline._track_performance(1.5, 'mesh')
        pipeline._track_performance(2.5, 'steklov')

        metrics = pipeline.get_performance_metrics()
        assert [m['method'] for m in metrics] == ['mesh', 'steklov']
        assert pipeline.get_total_duration() == pytest.approx(4.0)
        assert pipeline.name == 'sphère'

    def test_instances_are_independent(self):
        """Vérifie que chaque instance a ses propres métriques"""

        @add_performance_tracking
        class Pipeline:
            def __init__(self):
                pass

        a, b = Pipeline(), Pipeline()
        a._track_performance(1.0, 'packing')
        assert b.get_performance_metrics() == []


class TestAutoValidation:
    """Tests pour @auto_validation"""

    def test_validate_called_after_init(self):
        """Vérifie l'appel de validate() à la fin du constructeur"""

        @auto_validation
        class Grading:
            def __init__(self, h):
                self.h = h

            def validate(self):
                if self.h <= 0:
                    raise ValueError("pas non positif")

        assert Grading(0.1).h == 0.1

        with pytest.raises(ValueError):
            Grading(-1.0)

    def test_without_validate(self):
        """Vérifie qu'une classe sans validate() se construit normalement"""

        @auto_validation
        class Plain:
            def __init__(self):
                self.ready = True

        assert Plain().ready

    def test_subclass_validates_once(self):
        """Vérifie que la validation d'une sous-classe n'est pas déclenchée par le parent"""
        calls = []

        @auto_validation
        class Base:
            def __init__(self):
                pass

            def validate(self):
                calls.append(type(self).__name__)

        class Child(Base):
            pass

        Base()
        Child()
        assert calls == ['Base']
