"""
File de travaux pour l'exécution concurrente des points d'un balayage
"""
import threading
import logging
import uuid
from datetime import datetime
from typing import Any, Callable, Dict, List, Optional
from dataclasses import dataclass, field
from enum import Enum
from concurrent.futures import ThreadPoolExecutor

from core.config import get_settings

logger = logging.getLogger(__name__)


class TaskStatus(Enum):
    """Statut des tâches dans la file"""
    PENDING = "pending"
    RUNNING = "running"
    COMPLETED = "completed"
    FAILED = "failed"


@dataclass
class QueuedTask:
    """Tâche dans la file"""
    id: str
    key: Any
    func: Callable
    args: tuple = field(default_factory=tuple)
    kwargs: dict = field(default_factory=dict)
    status: TaskStatus = TaskStatus.PENDING
    created_at: datetime = field(default_factory=datetime.now)
    started_at: Optional[datetime] = None
    completed_at: Optional[datetime] = None
    result: Any = None
    error: Optional[BaseException] = None


class SweepPool:
    """Pool de threads exécutant des tâches indexées par une clé ordonnable

    Les résultats sont rendus dans l'ordre des clés, quel que soit l'ordre
    d'achèvement. Les tâches sont indépendantes et ne partagent aucun état
    mutable.
    """

    def __init__(self, max_workers: Optional[int] = None):
        self.max_workers = max_workers or get_settings().workers
        self.tasks: Dict[str, QueuedTask] = {}
        self.lock = threading.Lock()

    def submit(self, key, func: Callable, *args, **kwargs) -> str:
        """Ajoute une tâche à la file"""
        task_id = str(uuid.uuid4())
        task = QueuedTask(id=task_id, key=key, func=func, args=args, kwargs=kwargs)
        with self.lock:
            self.tasks[task_id] = task
        logger.debug(f"Tâche {task_id} (clé {key}) ajoutée à la file")
        return task_id

    def _execute(self, task: QueuedTask):
        with self.lock:
            task.status = TaskStatus.RUNNING
            task.started_at = datetime.now()
        try:
            result = task.func(*task.args, **task.kwargs)
        except Exception as e:
            with self.lock:
                task.error = e
                task.status = TaskStatus.FAILED
                task.completed_at = datetime.now()
            logger.error(f"Tâche {task.key} échouée : {e}", exc_info=True)
            return
        with self.lock:
            task.result = result
            task.status = TaskStatus.COMPLETED
            task.completed_at = datetime.now()

    def run(self) -> List[QueuedTask]:
        """Exécute toutes les tâches en attente et les rend triées par clé"""
        with self.lock:
            pending = [t for t in self.tasks.values() if t.status == TaskStatus.PENDING]
        logger.info(f"Exécution de {len(pending)} tâches sur {self.max_workers} workers")

        if self.max_workers <= 1:
            for task in pending:
                self._execute(task)
        else:
            with ThreadPoolExecutor(max_workers=self.max_workers) as executor:
                list(executor.map(self._execute, pending))

        return sorted(pending, key=lambda t: t.key)

    def get_stats(self) -> Dict[str, int]:
        """Nombre de tâches par statut"""
        with self.lock:
            stats = {status.value: 0 for status in TaskStatus}
            for task in self.tasks.values():
                stats[task.status.value] += 1
        return stats
