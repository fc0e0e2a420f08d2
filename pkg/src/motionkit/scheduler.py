"""Deterministic multi-rate scheduler on an exact integer time grid.

Virtual time is counted in integer ticks of 1/3000 s, a grid every task
period divides (50, 10, 500, and 100 Hz land on it exactly, as do the
broadcast rates), so tick counts never drift no matter how long a run
is.  Tasks due at the same instant all observe the same mailbox
snapshot: publishes buffer during the instant and commit at its end in
task priority order.  That makes results independent of intra-instant
execution order, so running tasks on a thread pool is bit-identical to
running them sequentially.

Mailboxes are latest-data-wins: non-blocking reads always return the
highest-sequence committed value.  In live (wall-clock) mode the same
mailboxes are shared across task threads with a lock and immediate
commit; see :class:`LiveLoop`.
"""

from __future__ import annotations

import heapq
import json
import threading
import time as _time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

TICKS_PER_SECOND = 3000


class SchedulerError(RuntimeError):
    pass


class TaskFailure(SchedulerError):
    def __init__(self, task: str, tick: int, cause: BaseException):
        super().__init__(f"task {task!r} failed at tick {tick}: {cause!r}")
        self.task = task
        self.tick = tick
        self.cause = cause


def seconds_to_ticks(seconds) -> int:
    """Exact conversion; rejects durations off the 1/3000 s grid."""
    frac = Fraction(seconds).limit_denominator(10**9) if isinstance(seconds, float) else Fraction(seconds)
    ticks = frac * TICKS_PER_SECOND
    if ticks.denominator != 1:
        raise SchedulerError(f"{seconds} s is not a multiple of 1/{TICKS_PER_SECOND} s")
    return int(ticks)


def hz_to_period_ticks(hz: int) -> int:
    if TICKS_PER_SECOND % hz != 0:
        raise SchedulerError(f"{hz} Hz does not divide the {TICKS_PER_SECOND} Hz grid")
    return TICKS_PER_SECOND // hz


@dataclass(frozen=True)
class TaskSpec:
    """Periodic task: smaller priority runs its commits first at shared
    instants. Default order: streamer < input < policy < planner."""

    name: str
    period_ticks: int
    priority: int
    phase_ticks: int = 0

    def __post_init__(self):
        if self.period_ticks <= 0:
            raise SchedulerError("period must be positive")
        if self.phase_ticks < 0:
            raise SchedulerError("phase must be nonnegative")


@dataclass
class _Publish:
    mailbox: str
    value: object
    meta: dict


class Mailbox:
    """Single value cell with a monotone sequence number."""

    def __init__(self, name: str):
        self.name = name
        self._lock = threading.Lock()
        self.seq = 0
        self.value = None
        self.meta: dict = {}
        self.published_tick: int | None = None

    def commit(self, value, tick: int | None, meta: dict | None = None) -> int:
        with self._lock:
            self.seq += 1
            self.value = value
            self.meta = meta or {}
            self.published_tick = tick
            return self.seq

    def read(self):
        """(value, seq): never blocks, returns the latest committed value."""
        with self._lock:
            return self.value, self.seq


@dataclass
class TraceEvent:
    tick: int
    kind: str  # "run" | "publish" | "error"
    task: str
    mailbox: str = ""
    seq: int = 0
    reads: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def row(self) -> dict:
        return {
            "tick": self.tick,
            "time_s": self.tick / TICKS_PER_SECOND,
            "kind": self.kind,
            "task": self.task,
            "mailbox": self.mailbox,
            "seq": self.seq,
            "reads": self.reads,
            "meta": self.meta,
        }


class Trace:
    def __init__(self):
        self.events: list[TraceEvent] = []

    def to_jsonl(self) -> str:
        return "\n".join(json.dumps(e.row(), sort_keys=True, default=str) for e in self.events)

    def to_csv(self, path) -> None:
        import csv

        with open(path, "w", newline="", encoding="utf-8") as f:
            w = csv.writer(f)
            w.writerow(["tick", "time_s", "kind", "task", "mailbox", "seq", "meta"])
            for e in self.events:
                w.writerow([e.tick, e.tick / TICKS_PER_SECOND, e.kind, e.task, e.mailbox, e.seq,
                            json.dumps(e.meta, sort_keys=True, default=str)])

    def digest(self) -> str:
        import hashlib

        return hashlib.sha256(self.to_jsonl().encode("utf-8")).hexdigest()


class TickContext:
    """What a task sees during one instant: frozen reads plus buffered
    publishes.  Publishes become visible only after the instant ends."""

    def __init__(self, tick: int, reads: dict[str, tuple], trace_meta: dict):
        self.tick = tick
        self.time_s = tick / TICKS_PER_SECOND
        self._reads = reads
        self._publishes: list[_Publish] = []
        self._consumed: dict[str, int] = {}
        self.trace_meta = trace_meta
        self.wake_requests: list[str] = []

    def read(self, mailbox: str):
        value, seq = self._reads.get(mailbox, (None, 0))
        self._consumed[mailbox] = seq
        return value, seq

    def publish(self, mailbox: str, value, **meta) -> None:
        self._publishes.append(_Publish(mailbox, value, meta))

    def wake(self, task: str) -> None:
        """Request an extra run of another task at the next instant."""
        self.wake_requests.append(task)


class SimLoop:
    """Deterministic discrete-event loop over [0, duration) virtual seconds."""

    def __init__(self, threads: int = 1, record_trace: bool = True):
        self.tasks: list[tuple[TaskSpec, object]] = []
        self.mailboxes: dict[str, Mailbox] = {}
        self.threads = max(1, threads)
        self.record_trace = record_trace
        self.trace = Trace()
        self.tick_counts: dict[str, int] = {}
        self.stop_flag = None  # object with a .stop attribute, checked between instants
        self.pace = None  # virtual seconds per wall second; None runs unthrottled

    def mailbox(self, name: str) -> Mailbox:
        if name not in self.mailboxes:
            self.mailboxes[name] = Mailbox(name)
        return self.mailboxes[name]

    def add_task(self, spec: TaskSpec, callback) -> None:
        """callback(ctx: TickContext) -> None; publishes via the context."""
        if any(s.name == spec.name for s, _ in self.tasks):
            raise SchedulerError(f"duplicate task {spec.name!r}")
        self.tasks.append((spec, callback))
        self.tick_counts[spec.name] = 0

    def run(self, duration_s) -> Trace:
        end_tick = seconds_to_ticks(duration_s)
        heap: list[tuple[int, int, int]] = []  # (tick, priority, task index)
        specs = [s for s, _ in self.tasks]
        callbacks = [c for _, c in self.tasks]
        by_name = {s.name: i for i, s in enumerate(specs)}
        next_due = [s.phase_ticks for s in specs]
        for i, s in enumerate(specs):
            if s.phase_ticks < end_tick:
                heapq.heappush(heap, (s.phase_ticks, s.priority, i))
        pool = ThreadPoolExecutor(max_workers=self.threads) if self.threads > 1 else None
        wall_start = _time.monotonic()
        try:
            while heap:
                if self.stop_flag is not None and self.stop_flag.stop:
                    break
                tick = heap[0][0]
                if tick >= end_tick:
                    break
                if self.pace is not None:
                    lag = tick / TICKS_PER_SECOND / self.pace - (_time.monotonic() - wall_start)
                    if lag > 0:
                        _time.sleep(lag)
                due: list[tuple[int, int]] = []
                while heap and heap[0][0] == tick:
                    _, prio, idx = heapq.heappop(heap)
                    if next_due[idx] != tick:  # stale entry left by a wake
                        continue
                    due.append((prio, idx))
                    nxt = tick + specs[idx].period_ticks
                    next_due[idx] = nxt
                    if nxt < end_tick:
                        heapq.heappush(heap, (nxt, specs[idx].priority, idx))
                due.sort()

                snapshot = {name: mb.read() for name, mb in self.mailboxes.items()}
                contexts = []
                for prio, idx in due:
                    ctx = TickContext(tick, snapshot, trace_meta={})
                    contexts.append((idx, ctx))

                def run_one(pair):
                    idx, ctx = pair
                    try:
                        callbacks[idx](ctx)
                    except Exception as e:  # noqa: BLE001 - recorded, then aborts
                        return e
                    return None

                if pool is None:
                    errors = [run_one(p) for p in contexts]
                else:
                    errors = list(pool.map(run_one, contexts))

                for (idx, ctx), err in zip(contexts, errors):
                    name = specs[idx].name
                    if err is not None:
                        self.trace.events.append(TraceEvent(tick=tick, kind="error", task=name, meta={"error": repr(err)}))
                        raise TaskFailure(name, tick, err)
                    self.tick_counts[name] += 1
                    if self.record_trace:
                        self.trace.events.append(TraceEvent(
                            tick=tick, kind="run", task=name,
                            reads=dict(ctx._consumed), meta=dict(ctx.trace_meta),
                        ))
                    for pub in ctx._publishes:
                        seq = self.mailbox(pub.mailbox).commit(pub.value, tick, pub.meta)
                        if self.record_trace:
                            self.trace.events.append(TraceEvent(
                                tick=tick, kind="publish", task=name,
                                mailbox=pub.mailbox, seq=seq, meta=dict(pub.meta),
                            ))
                    for wake_name in ctx.wake_requests:
                        widx = by_name.get(wake_name)
                        if widx is None:
                            raise SchedulerError(f"wake request for unknown task {wake_name!r}")
                        wake_tick = tick + 1
                        # pull the task's next run forward; its old heap
                        # entry goes stale and is skipped on pop
                        if wake_tick < end_tick and wake_tick < next_due[widx]:
                            next_due[widx] = wake_tick
                            heapq.heappush(heap, (wake_tick, specs[widx].priority, widx))
        finally:
            if pool is not None:
                pool.shutdown(wait=True)
        return self.trace


class LiveLoop:
    """Wall-clock mode: one thread per task, monotonic deadlines, shared
    locked mailboxes, deadline-miss counters.  Used by the live server."""

    def __init__(self):
        self.tasks: list[tuple[TaskSpec, object]] = []
        self.mailboxes: dict[str, Mailbox] = {}
        self.deadline_misses: dict[str, int] = {}
        self._stop = threading.Event()
        self._threads: list[threading.Thread] = []
        self._wakes: dict[str, threading.Event] = {}

    def mailbox(self, name: str) -> Mailbox:
        if name not in self.mailboxes:
            self.mailboxes[name] = Mailbox(name)
        return self.mailboxes[name]

    def add_task(self, spec: TaskSpec, callback) -> None:
        self.tasks.append((spec, callback))
        self.deadline_misses[spec.name] = 0
        self._wakes[spec.name] = threading.Event()

    def wake(self, task: str) -> None:
        self._wakes[task].set()

    def _runner(self, spec: TaskSpec, callback):
        period_s = spec.period_ticks / TICKS_PER_SECOND
        next_deadline = _time.monotonic() + period_s
        while not self._stop.is_set():
            ctx = LiveContext(self)
            try:
                callback(ctx)
            except Exception:  # noqa: BLE001 - live mode keeps running
                pass
            for wname in ctx.wake_requests:
                self.wake(wname)
            timeout = next_deadline - _time.monotonic()
            if timeout < 0:
                self.deadline_misses[spec.name] += 1
                next_deadline = _time.monotonic() + period_s
                continue
            if self._wakes[spec.name].wait(timeout=timeout):
                self._wakes[spec.name].clear()
            else:
                next_deadline += period_s

    def start(self) -> None:
        for spec, callback in self.tasks:
            t = threading.Thread(target=self._runner, args=(spec, callback), daemon=True, name=spec.name)
            self._threads.append(t)
            t.start()

    def stop(self) -> None:
        self._stop.set()
        for w in self._wakes.values():
            w.set()
        for t in self._threads:
            t.join(timeout=2.0)


class LiveContext:
    """Mailbox access for live tasks: immediate commit, wall timestamps."""

    def __init__(self, loop: LiveLoop):
        self._loop = loop
        self.time_s = _time.monotonic()
        self.tick = None
        self.trace_meta: dict = {}
        self.wake_requests: list[str] = []

    def read(self, mailbox: str):
        return self._loop.mailbox(mailbox).read()

    def publish(self, mailbox: str, value, **meta) -> None:
        self._loop.mailbox(mailbox).commit(value, None, meta)

    def wake(self, task: str) -> None:
        self.wake_requests.append(task)
