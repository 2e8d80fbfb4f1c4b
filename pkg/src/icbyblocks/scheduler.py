"""Dependence-driven task execution with futures.

Usage mirrors a task execution policy::

    with TaskPolicy("pool", workers=4) as policy:
        fx = policy.create(work_x)
        fz = policy.create(work_z)
        policy.add_dependence(fz, fx)   # fz runs after fx completes
        policy.spawn(fz)
        policy.spawn(fx)
        policy.wait()

Task bodies are plain callables that must not block on other tasks. The
sequential backend runs everything inside ``wait`` in FIFO order of
readiness; the pooled backend runs tasks on a fixed set of worker threads as
soon as they become ready.
"""

from __future__ import annotations

import enum
import itertools
import threading
from collections import deque
from typing import Callable, Optional


class TaskState(enum.IntEnum):
    CREATED = 0
    WAITING = 1
    READY = 2
    EXECUTING = 3
    COMPLETE = 4


class SchedulerError(RuntimeError):
    pass


class DependenceCycleError(SchedulerError):
    def __init__(self, cycle: list["Future"]):
        names = " -> ".join(f.label or f"task{f.id}" for f in cycle)
        super().__init__(f"dependence cycle among spawned tasks: {names}")
        self.cycle = cycle


class Future:
    """Handle to a task owned by one policy."""

    __slots__ = ("policy", "id", "label", "work", "state", "pending", "dependents",
                 "deps", "spawn_seq", "start_tick", "end_tick", "runs")

    def __init__(self, policy: "TaskPolicy", task_id: int, work: Callable[[], object],
                 label: Optional[str]):
        self.policy = policy
        self.id = task_id
        self.label = label
        self.work = work
        self.state = TaskState.CREATED
        self.pending = 0
        self.dependents: list[Future] = []
        self.deps: list[Future] = []
        self.spawn_seq = -1
        self.start_tick = -1
        self.end_tick = -1
        self.runs = 0

    def done(self) -> bool:
        return self.state is TaskState.COMPLETE

    def __repr__(self) -> str:
        return f"Future({self.label or self.id}, {self.state.name.lower()})"


class TaskPolicy:
    """Owns tasks, wires dependences and schedules them.

    ``backend`` is ``"seq"`` or ``"pool"``. With ``debug=True``, ``wait``
    searches for dependence cycles among unfinished tasks before blocking.
    Either way, ``wait`` raises ``SchedulerError`` instead of hanging when
    spawned tasks can never become ready.
    """

    def __init__(self, backend: str = "seq", workers: int = 1, debug: bool = False):
        if backend not in ("seq", "pool"):
            raise ValueError(f"unknown backend {backend!r}")
        if workers < 1:
            raise ValueError("worker count must be >= 1")
        self.backend = backend
        self.workers = workers if backend == "pool" else 1
        self.debug = debug
        self._lock = threading.Lock()
        self._work_cv = threading.Condition(self._lock)
        self._idle_cv = threading.Condition(self._lock)
        self._ready: deque[Future] = deque()
        self._tasks: list[Future] = []
        self._ids = itertools.count()
        self._spawns = itertools.count()
        self._ticks = itertools.count()
        self._outstanding = 0  # spawned, not complete
        self._running = 0
        self._error: Optional[BaseException] = None
        self._threads: list[threading.Thread] = []
        self._shutdown = False
        self.executed = 0

    # -- lifecycle -----------------------------------------------------
    def __enter__(self) -> "TaskPolicy":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def close(self) -> None:
        with self._lock:
            self._shutdown = True
            self._work_cv.notify_all()
        for t in self._threads:
            t.join()
        self._threads = []

    def _ensure_workers(self) -> None:
        if self._threads or self.backend != "pool":
            return
        if self._shutdown:
            raise SchedulerError("policy is closed")
        for w in range(self.workers):
            t = threading.Thread(target=self._worker, name=f"task-worker-{w}", daemon=True)
            t.start()
            self._threads.append(t)

    # -- task API ------------------------------------------------------
    def create(self, work: Callable[[], object], label: Optional[str] = None) -> Future:
        f = Future(self, next(self._ids), work, label)
        self._tasks.append(f)
        return f

    def add_dependence(self, f: Future, dep: Optional[Future]) -> None:
        """``f`` will not start before ``dep`` completes. ``dep=None`` is a no-op."""
        if dep is None:
            return
        if f.policy is not self or dep.policy is not self:
            raise SchedulerError("dependent tasks must belong to the same policy")
        if f is dep:
            raise SchedulerError("a task cannot depend on itself")
        with self._lock:
            if f.state is not TaskState.CREATED:
                raise SchedulerError("add_dependence after spawn")
            f.deps.append(dep)
            if dep.state is TaskState.COMPLETE:
                return
            dep.dependents.append(f)
            f.pending += 1

    def spawn(self, f: Future) -> None:
        if f.policy is not self:
            raise SchedulerError("future belongs to another policy")
        self._ensure_workers()
        with self._lock:
            if f.state is not TaskState.CREATED:
                raise SchedulerError("task already spawned")
            f.spawn_seq = next(self._spawns)
            self._outstanding += 1
            if f.pending == 0:
                f.state = TaskState.READY
                self._ready.append(f)
                self._work_cv.notify()
            else:
                f.state = TaskState.WAITING

    def wait(self) -> None:
        """Block until every spawned task, including ones readied meanwhile, is complete."""
        if self.debug:
            with self._lock:
                cycle = self._find_cycle()
            if cycle:
                raise DependenceCycleError(cycle)
        if self.backend == "seq":
            self._drain()
        else:
            with self._lock:
                while self._outstanding:
                    if not self._ready and not self._running:
                        break
                    self._idle_cv.wait()
        with self._lock:
            stuck = self._outstanding
        if stuck:
            raise SchedulerError(f"{stuck} spawned task(s) can never become ready "
                                 "(dependence cycle or unspawned dependence)")
        err, self._error = self._error, None
        if err is not None:
            raise err

    # -- execution -----------------------------------------------------
    def _run(self, f: Future) -> None:
        f.start_tick = next(self._ticks)
        if self._error is None:
            try:
                f.work()
            except BaseException as exc:  # noqa: BLE001 - re-raised from wait()
                with self._lock:
                    if self._error is None:
                        self._error = exc
        f.runs += 1

    def _complete(self, f: Future) -> list[Future]:
        # caller holds the lock
        f.end_tick = next(self._ticks)
        f.state = TaskState.COMPLETE
        f.work = None
        self._outstanding -= 1
        self.executed += 1
        woken = []
        for d in f.dependents:
            d.pending -= 1
            if d.pending == 0 and d.state is TaskState.WAITING:
                d.state = TaskState.READY
                woken.append(d)
        f.dependents = []
        return woken

    def _drain(self) -> None:
        while self._ready:
            f = self._ready.popleft()
            f.state = TaskState.EXECUTING
            self._run(f)
            woken = self._complete(f)
            woken.sort(key=lambda t: t.spawn_seq)
            self._ready.extend(woken)

    def _worker(self) -> None:
        while True:
            with self._lock:
                while not self._ready and not self._shutdown:
                    self._work_cv.wait()
                if not self._ready:
                    return
                f = self._ready.popleft()
                f.state = TaskState.EXECUTING
                self._running += 1
            self._run(f)
            with self._lock:
                self._running -= 1
                woken = self._complete(f)
                if woken:
                    woken.sort(key=lambda t: t.spawn_seq)
                    self._ready.extend(woken)
                    self._work_cv.notify(len(woken))
                if not self._outstanding or (not self._ready and not self._running):
                    self._idle_cv.notify_all()

    def _find_cycle(self) -> list[Future]:
        """Iterative DFS over unfinished tasks along dependence edges."""
        color: dict[int, int] = {}
        for root in self._tasks:
            if root.state is TaskState.COMPLETE or root.id in color:
                continue
            stack = [(root, iter(root.deps))]
            path = [root]
            color[root.id] = 1
            while stack:
                node, it = stack[-1]
                nxt = next((d for d in it if d.state is not TaskState.COMPLETE
                            and color.get(d.id) != 2), None)
                if nxt is None:
                    color[node.id] = 2
                    stack.pop()
                    path.pop()
                elif color.get(nxt.id) == 1:
                    return path[path.index(nxt):] + [nxt]
                else:
                    color[nxt.id] = 1
                    stack.append((nxt, iter(nxt.deps)))
                    path.append(nxt)
        return []

    @property
    def tasks(self) -> list[Future]:
        return list(self._tasks)

    def forget_completed(self) -> None:
        """Drop bookkeeping for finished tasks (long-lived policies)."""
        with self._lock:
            self._tasks = [t for t in self._tasks if t.state is not TaskState.COMPLETE]


def wait(policy: TaskPolicy) -> None:
    policy.wait()
