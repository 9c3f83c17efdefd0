import time
import functools
import logging
from pathlib import Path
from typing import Callable, Dict, Optional, Union
from prometheus_client import CollectorRegistry, Counter, Gauge, Histogram, generate_latest

logger = logging.getLogger(__name__)


class MetricsCollector:
    """Collect solver and training metrics for a run"""

    def __init__(self, registry: Optional[CollectorRegistry] = None):
        self.registry = registry or CollectorRegistry()

        # Solver metrics
        self.nfe_counter = Counter(
            'solver_function_evaluations_total',
            'Total number of vector-field evaluations',
            ['solver'],
            registry=self.registry,
        )

        self.step_counter = Counter(
            'solver_steps_total',
            'Total number of solver steps',
            ['solver', 'outcome'],  # accepted, rejected
            registry=self.registry,
        )

        # Training metrics
        self.epoch_duration = Histogram(
            'training_epoch_duration_seconds',
            'Wall-clock duration of one training epoch',
            ['phase'],  # predictor, corrector
            buckets=(0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 30.0, 60.0, 120.0, 300.0),
            registry=self.registry,
        )

        self.epoch_counter = Counter(
            'training_epochs_total',
            'Total number of completed epochs',
            ['phase'],
            registry=self.registry,
        )

        self.loss_gauge = Gauge(
            'training_last_loss',
            'Most recent epoch loss',
            ['phase', 'split'],  # train, validation
            registry=self.registry,
        )

        self.command_duration = Histogram(
            'command_duration_seconds',
            'Wall-clock duration of CLI commands',
            ['command'],
            buckets=(1.0, 10.0, 60.0, 300.0, 900.0, 3600.0),
            registry=self.registry,
        )

        # Timer storage (not exposed)
        self.timers: Dict[str, float] = {}

    def track_solve(self, solver: str, nfe: int, accepted: int, rejected: int) -> None:
        """Record the cost of one integration"""
        self.nfe_counter.labels(solver=solver).inc(nfe)
        self.step_counter.labels(solver=solver, outcome="accepted").inc(accepted)
        self.step_counter.labels(solver=solver, outcome="rejected").inc(rejected)

    def track_epoch(self, phase: str, duration: float, train_loss: float,
                    val_loss: Optional[float] = None) -> None:
        """Record one finished training epoch"""
        self.epoch_duration.labels(phase=phase).observe(duration)
        self.epoch_counter.labels(phase=phase).inc()
        self.loss_gauge.labels(phase=phase, split="train").set(train_loss)
        if val_loss is not None:
            self.loss_gauge.labels(phase=phase, split="validation").set(val_loss)

    def start_timer(self, name: str) -> float:
        """Start a timer for measuring operation duration"""
        start_time = time.perf_counter()
        self.timers[name] = start_time
        return start_time

    def stop_timer(self, name: str, start_time: Optional[float] = None) -> float:
        """Stop a timer and return the duration"""
        if start_time is None:
            start_time = self.timers.get(name)
            if start_time is None:
                logger.warning(f"Timer {name} was not started")
                return 0.0

        duration = time.perf_counter() - start_time

        # Clean up timer
        if name in self.timers:
            del self.timers[name]

        return duration

    def export(self) -> str:
        """Get all metrics in Prometheus text format"""
        return generate_latest(self.registry).decode('utf-8')

    def write(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.export())
        logger.info(f"Wrote metrics to {path}")
        return path


# Create a global metrics collector instance
metrics_collector = MetricsCollector()


def track_time(command: str):
    """Decorator to time a CLI command"""
    def decorator(func: Callable):
        @functools.wraps(func)
        def wrapper(*args, **kwargs):
            start_time = metrics_collector.start_timer(f"command_{command}")
            try:
                return func(*args, **kwargs)
            finally:
                duration = metrics_collector.stop_timer(f"command_{command}", start_time)
                metrics_collector.command_duration.labels(command=command).observe(duration)
                logger.info(f"Command {command} finished in {duration:.2f}s")
        return wrapper
    return decorator
