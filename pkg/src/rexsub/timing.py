"""Per-task CPU-time accounting."""

from __future__ import annotations

from contextlib import contextmanager
import time

INITIAL_SAMPLING = "Initial Sampling"
FITTING = "Fitting GP(s)"
ROW_EXCHANGES = "Row Exchanges"
CRITERION = "Evaluating Criterion"
TOTAL = "Total"
TASKS = (INITIAL_SAMPLING, FITTING, ROW_EXCHANGES, CRITERION)


class TaskTimer:
    """Accumulates thread CPU seconds per task category.

    Thread CPU time is used so that work done by concurrent workers can be
    measured inside each worker and summed with :meth:`add`.
    """

    def __init__(self):
        self.seconds = {task: 0.0 for task in TASKS}

    @contextmanager
    def task(self, name: str):
        start = time.thread_time()
        try:
            yield
        finally:
            self.add(name, time.thread_time() - start)

    def add(self, name: str, seconds: float):
        if name not in self.seconds:
            raise KeyError(f"unknown task {name!r}")
        self.seconds[name] += seconds

    def merge(self, other: "TaskTimer"):
        for name, sec in other.seconds.items():
            self.seconds[name] += sec

    def as_dict(self) -> dict:
        out = dict(self.seconds)
        out[TOTAL] = sum(self.seconds.values())
        return out
