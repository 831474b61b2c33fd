"""Comparison-task service: leases, quotas, atomic round advancement.

One task owns one evolution run. Raters sign in with an id, lease one
pair at a time, and submit a choice; the submission that completes a
round atomically applies feedback, breeds the next generation and opens
its assignments. Every state change is appended to a JSONL event log
first, so a service restarted on the same store replays to the exact
pre-restart state and continues appending.
"""

from __future__ import annotations

import dataclasses
import json
import random
import re
import threading
import time
import uuid
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable

from .engine import ComparisonResult, Evolution, GAConfig, Individual
from .genome import GeneSchema, build_schema, render, sample_distinct_designs
from .markup import DesignSpec, MarkupError, parse, spec_to_json, validate

DEFAULT_LEASE_SECONDS = 600.0


@dataclass(frozen=True)
class Budget:
    worker_count: int = 50
    per_worker_quota: int = 5
    unit_pay: float = 0.5

    @property
    def cost_estimate(self) -> float:
        return self.worker_count * self.unit_pay


class SchedulerError(Exception):
    pass


class UnknownTask(SchedulerError):
    pass


class UnknownAssignment(SchedulerError):
    pass


class UnknownDesign(SchedulerError):
    pass


class TaskRejected(SchedulerError):
    def __init__(self, diagnostics: list[dict]):
        super().__init__("; ".join(d["message"] for d in diagnostics))
        self.diagnostics = diagnostics


class QuotaExhausted(SchedulerError):
    pass


class LeaseExpired(SchedulerError):
    pass


class NotLeaseHolder(SchedulerError):
    pass


class AlreadySubmitted(SchedulerError):
    pass


class NotReady(SchedulerError):
    pass


@dataclass
class Assignment:
    assignment_id: str
    task_id: str
    generation: int
    pair_index: int
    pair: tuple[int, int]
    lease: tuple[str, float] | None = None      # (rater_id, expires_at)
    presentation_order: int = 0                 # 0: pair order, 1: swapped
    result: ComparisonResult | None = None
    seen_by: set[str] = field(default_factory=set)

    @property
    def left_right(self) -> tuple[int, int]:
        a, b = self.pair
        return (a, b) if self.presentation_order == 0 else (b, a)


class EventLog:
    """Append-only JSONL log; replay suppresses re-appending."""

    def __init__(self, path: str | Path | None):
        self.path = Path(path) if path else None
        self.replaying = False
        self._handle = None
        if self.path:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self._handle = open(self.path, "a", encoding="utf-8")
        self.events: list[dict] = []

    def stored_events(self) -> list[dict]:
        if not self.path or not self.path.exists():
            return []
        with open(self.path, encoding="utf-8") as fh:
            return [json.loads(line) for line in fh if line.strip()]

    def append(self, event: dict) -> None:
        if self.replaying:
            return
        self.events.append(event)
        if self._handle:
            self._handle.write(json.dumps(event) + "\n")
            self._handle.flush()

    def close(self) -> None:
        if self._handle:
            self._handle.close()
            self._handle = None


@dataclass
class _TaskRuntime:
    task_id: str
    name: str
    spec_html: str
    spec: DesignSpec
    schema: GeneSchema
    config: GAConfig
    budget: Budget
    engine: Evolution
    state: str = "created"
    assignments: dict[str, Assignment] = field(default_factory=dict)
    round_ids: list[str] = field(default_factory=list)
    results_by_rater: Counter = field(default_factory=Counter)
    designs: dict[int, Individual] = field(default_factory=dict)

    @property
    def current_generation(self) -> int:
        if self.state == "completed":
            return self.config.iterations
        return self.engine.generation


class TaskService:
    """Thread-safe task scheduler over an event log.

    All public methods serialize on one lock, which makes submissions
    and lease grants linearizable and round advancement exactly-once.
    The clock is injectable so lease expiry is testable.
    """

    def __init__(self, store_path: str | Path | None = None,
                 clock: Callable[[], float] = time.time,
                 lease_seconds: float = DEFAULT_LEASE_SECONDS):
        self._clock = clock
        self.lease_seconds = lease_seconds
        self._lock = threading.RLock()
        self._tasks: dict[str, _TaskRuntime] = {}
        self._assignment_index: dict[str, str] = {}  # assignment -> task
        self._present_rng = random.Random()
        self._log = EventLog(store_path)
        self._replay()

    def close(self) -> None:
        self._log.close()

    # -- event handling

    def _replay(self) -> None:
        events = self._log.stored_events()
        if not events:
            return
        self._log.replaying = True
        try:
            for event in events:
                kind = event["type"]
                if kind == "task_created":
                    self._build_task(
                        task_id=event["task_id"], name=event["name"],
                        spec_html=event["spec_html"],
                        config=GAConfig(**event["config"]),
                        budget=Budget(**event["budget"]),
                        seeds=[tuple(s) for s in event.get("seeds", [])])
                elif kind == "lease":
                    runtime = self._tasks[event["task_id"]]
                    assignment = runtime.assignments[event["assignment_id"]]
                    assignment.lease = (event["rater_id"], event["expires"])
                    assignment.presentation_order = event["order"]
                    assignment.seen_by.add(event["rater_id"])
                elif kind == "lease_expired":
                    runtime = self._tasks[event["task_id"]]
                    assignment = runtime.assignments[event["assignment_id"]]
                    assignment.lease = None
                elif kind == "choice":
                    runtime = self._tasks[event["task_id"]]
                    assignment = runtime.assignments[event["assignment_id"]]
                    self._apply_choice(runtime, assignment,
                                       event["rater_id"], event["side"])
                # advanced / completed events are derived; replaying the
                # choices reproduces them.
        finally:
            self._log.replaying = False
        self._log.events = events

    def _emit(self, event: dict) -> None:
        event.setdefault("ts", self._clock())
        self._log.append(event)

    # -- task lifecycle

    def create_task(self, spec_html: str, config: GAConfig | None = None,
                    budget: Budget | None = None, name: str = "task",
                    seeds: Iterable[tuple[int, ...]] = ()) -> dict:
        config = config or GAConfig()
        budget = budget or Budget()
        seeds = [tuple(s) for s in seeds]
        with self._lock:
            self._validate_spec(spec_html)
            pairs_per_round = config.population_size // 2
            if budget.worker_count * budget.per_worker_quota < pairs_per_round:
                raise TaskRejected([{
                    "code": "InsufficientWorkers", "element_id": None,
                    "message": (f"{budget.worker_count} worker(s) with quota "
                                f"{budget.per_worker_quota} cannot cover "
                                f"{pairs_per_round} pairs per round"),
                }])
            task_id = uuid.uuid4().hex[:12]
            self._emit({"type": "task_created", "task_id": task_id,
                        "name": name, "spec_html": spec_html,
                        "config": dataclasses.asdict(config),
                        "budget": dataclasses.asdict(budget),
                        "seeds": [list(s) for s in seeds]})
            runtime = self._build_task(task_id, name, spec_html, config,
                                       budget, seeds)
            return self.task_view(runtime.task_id)

    def _validate_spec(self, spec_html: str) -> DesignSpec:
        try:
            spec = parse(spec_html)
        except MarkupError as err:
            raise TaskRejected([{
                "code": type(err).__name__, "element_id": err.element_id,
                "message": str(err)}]) from err
        diagnostics = validate(spec)
        if diagnostics:
            raise TaskRejected([dataclasses.asdict(d) for d in diagnostics])
        return spec

    def _build_task(self, task_id: str, name: str, spec_html: str,
                    config: GAConfig, budget: Budget,
                    seeds: list[tuple[int, ...]]) -> _TaskRuntime:
        spec = parse(spec_html)
        schema = build_schema(spec)
        engine = Evolution(schema, config, seeds=seeds)
        runtime = _TaskRuntime(task_id=task_id, name=name, spec_html=spec_html,
                               spec=spec, schema=schema, config=config,
                               budget=budget, engine=engine)
        self._tasks[task_id] = runtime
        runtime.designs.update({ind.id: ind for ind in engine.population})
        self._open_round(runtime)
        runtime.state = "running"
        return runtime

    def _open_round(self, runtime: _TaskRuntime) -> None:
        runtime.round_ids = []
        generation = runtime.engine.generation
        for index, pair in enumerate(runtime.engine.pairs):
            assignment_id = f"{runtime.task_id}:g{generation}:p{index}"
            assignment = Assignment(assignment_id=assignment_id,
                                    task_id=runtime.task_id,
                                    generation=generation,
                                    pair_index=index, pair=pair)
            runtime.assignments[assignment_id] = assignment
            runtime.round_ids.append(assignment_id)
            self._assignment_index[assignment_id] = runtime.task_id

    # -- views

    def _runtime(self, task_id: str) -> _TaskRuntime:
        runtime = self._tasks.get(task_id)
        if runtime is None:
            raise UnknownTask(f"no task {task_id!r}")
        return runtime

    def task_ids(self) -> list[str]:
        with self._lock:
            return list(self._tasks)

    def task_view(self, task_id: str) -> dict:
        with self._lock:
            runtime = self._runtime(task_id)
            return {
                "task_id": runtime.task_id,
                "name": runtime.name,
                "state": runtime.state,
                "current_generation": runtime.current_generation,
                "iterations": runtime.config.iterations,
                "population_size": runtime.config.population_size,
                "mutation_rate": runtime.config.mutation_rate,
                "rng_seed": runtime.config.rng_seed,
                "budget": dataclasses.asdict(runtime.budget),
                "cost_estimate": runtime.budget.cost_estimate,
                "space_size": _space(runtime.schema),
                "spec_html": runtime.spec_html,
                "spec": spec_to_json(runtime.spec),
            }

    def progress(self, task_id: str) -> dict:
        with self._lock:
            runtime = self._runtime(task_id)
            self._reclaim_expired(runtime)
            engine = runtime.engine
            rated = engine.rated_count
            leased = sum(1 for aid in runtime.round_ids
                         if runtime.assignments[aid].lease is not None
                         and runtime.assignments[aid].result is None)
            total = len(runtime.round_ids)
            snapshot = {
                "task_id": runtime.task_id,
                "name": runtime.name,
                "state": runtime.state,
                "generation": runtime.current_generation,
                "iterations": runtime.config.iterations,
                "workers": runtime.budget.worker_count,
                "pairs_total": total,
                "rated": rated,
                "rated_total": len(engine.results),
                "leased": leased,
                "pending": total - rated - leased,
                "designs": [ind.id for ind in engine.population],
            }
            if runtime.state == "completed":
                snapshot["top"] = [ind.id for ind in engine.top(5)]
            return snapshot

    def design_html(self, task_id: str, individual_id: int) -> str:
        with self._lock:
            runtime = self._runtime(task_id)
            individual = runtime.designs.get(individual_id)
            if individual is None:
                raise UnknownDesign(f"no design {individual_id} in task {task_id}")
            return render(runtime.spec, runtime.schema, individual.sequence)

    def generation_log(self, task_id: str) -> str:
        with self._lock:
            return self._runtime(task_id).engine.history_jsonl()

    # -- rating protocol

    def request_assignment(self, task_id: str, rater_id: str) -> dict | None:
        """Lease the next available pair to a rater; None means no work.

        QuotaExhausted is raised (not returned) so callers can tell a
        finished rater from a drained round.
        """
        if not rater_id:
            raise ValueError("rater_id must be non-empty")
        with self._lock:
            runtime = self._runtime(task_id)
            if runtime.state != "running":
                return None
            self._reclaim_expired(runtime)
            if (runtime.results_by_rater[rater_id]
                    >= runtime.budget.per_worker_quota):
                raise QuotaExhausted(
                    f"rater {rater_id!r} already submitted "
                    f"{runtime.results_by_rater[rater_id]} comparisons")
            for assignment_id in runtime.round_ids:
                assignment = runtime.assignments[assignment_id]
                if (assignment.result is None and assignment.lease is None
                        and rater_id not in assignment.seen_by):
                    expires = self._clock() + self.lease_seconds
                    order = self._present_rng.randrange(2)
                    self._emit({"type": "lease", "task_id": task_id,
                                "assignment_id": assignment_id,
                                "rater_id": rater_id, "expires": expires,
                                "order": order})
                    assignment.lease = (rater_id, expires)
                    assignment.presentation_order = order
                    assignment.seen_by.add(rater_id)
                    return self._assignment_view(runtime, assignment)
            return None

    def submit_choice(self, assignment_id: str, rater_id: str,
                      winner_side: str) -> dict:
        if winner_side not in ("left", "right"):
            raise ValueError("winner_side must be 'left' or 'right'")
        with self._lock:
            task_id = self._assignment_index.get(assignment_id)
            if task_id is None:
                raise UnknownAssignment(f"no assignment {assignment_id!r}")
            runtime = self._tasks[task_id]
            assignment = runtime.assignments[assignment_id]
            if assignment.result is not None:
                raise AlreadySubmitted(f"{assignment_id} already has a result")
            if assignment.lease is None or assignment.lease[0] != rater_id:
                raise NotLeaseHolder(
                    f"{assignment_id} is not leased to {rater_id!r}")
            if self._clock() > assignment.lease[1]:
                self._emit({"type": "lease_expired", "task_id": task_id,
                            "assignment_id": assignment_id,
                            "rater_id": rater_id})
                assignment.lease = None
                raise LeaseExpired(f"lease on {assignment_id} expired")
            self._emit({"type": "choice", "task_id": task_id,
                        "assignment_id": assignment_id,
                        "rater_id": rater_id, "side": winner_side})
            advanced = self._apply_choice(runtime, assignment, rater_id,
                                          winner_side)
            return {"recorded": True, "generation_advanced": advanced,
                    "state": runtime.state,
                    "generation": runtime.current_generation}

    def _apply_choice(self, runtime: _TaskRuntime, assignment: Assignment,
                      rater_id: str, winner_side: str) -> bool:
        left, right = assignment.left_right
        winner_id = left if winner_side == "left" else right
        result = runtime.engine.record_choice(assignment.pair_index,
                                              winner_id, rater_id)
        assignment.result = result
        assignment.lease = None
        runtime.results_by_rater[rater_id] += 1
        if not runtime.engine.round_complete:
            return False
        runtime.state = "between_generations"
        if runtime.engine.advance():
            runtime.designs.update(
                {ind.id: ind for ind in runtime.engine.population})
            self._open_round(runtime)
            runtime.state = "running"
            self._emit({"type": "advanced", "task_id": runtime.task_id,
                        "generation": runtime.engine.generation})
            return True
        runtime.state = "completed"
        self._emit({"type": "completed", "task_id": runtime.task_id})
        return False

    def _reclaim_expired(self, runtime: _TaskRuntime) -> None:
        now = self._clock()
        for assignment_id in runtime.round_ids:
            assignment = runtime.assignments[assignment_id]
            if (assignment.lease is not None and assignment.result is None
                    and now > assignment.lease[1]):
                self._emit({"type": "lease_expired",
                            "task_id": runtime.task_id,
                            "assignment_id": assignment_id,
                            "rater_id": assignment.lease[0]})
                assignment.lease = None

    def _assignment_view(self, runtime: _TaskRuntime,
                         assignment: Assignment) -> dict:
        left, right = assignment.left_right
        return {
            "assignment_id": assignment.assignment_id,
            "task_id": runtime.task_id,
            "generation": assignment.generation,
            "left": left,
            "right": right,
            "expires_at": assignment.lease[1] if assignment.lease else None,
        }

    # -- export / relaunch

    def export(self, task_id: str, k: int = 5) -> tuple[dict, dict[str, str]]:
        """Top-k designs as (manifest, {filename: html}); explore markup
        stripped by rendering."""
        with self._lock:
            runtime = self._runtime(task_id)
            if runtime.state != "completed":
                raise NotReady(f"task {task_id} is {runtime.state}, "
                               "export needs a completed task")
            top = runtime.engine.top(k)
            files: dict[str, str] = {}
            manifest: dict = {"task_id": task_id, "designs": []}
            for rank, individual in enumerate(top, start=1):
                name = f"design-{individual.generation}-{rank}.html"
                files[name] = render(runtime.spec, runtime.schema,
                                     individual.sequence)
                manifest["designs"].append({
                    "file": name, "individual_id": individual.id,
                    "generation": individual.generation, "rank": rank,
                    "sequence": list(individual.sequence)})
            return manifest, files

    def relaunch_task(self, task_id: str, config: GAConfig | None = None,
                      budget: Budget | None = None,
                      name: str | None = None) -> dict:
        """New task over the same spec, seeded with the finished task's
        top designs."""
        with self._lock:
            runtime = self._runtime(task_id)
            if runtime.state != "completed":
                raise NotReady("relaunch needs a completed task")
            seeds = [ind.sequence for ind in runtime.engine.top(5)]
            next_config = config or dataclasses.replace(
                runtime.config, rng_seed=runtime.config.rng_seed + 1)
            return self.create_task(
                runtime.spec_html, config=next_config,
                budget=budget or runtime.budget,
                name=name or f"{runtime.name} (relaunch)", seeds=seeds)

    # -- preview (author view support)

    def preview(self, spec_html: str, sample: int = 4,
                seed: int = 0) -> list[dict]:
        """Render a few distinct sampled variants of an unlaunched spec."""
        with self._lock:
            spec = self._validate_spec(spec_html)
            schema = build_schema(spec)
            pairs = sample_distinct_designs(spec, schema, max(1, sample),
                                            random.Random(seed))
            return [{"sequence": list(sequence), "html": html}
                    for sequence, html in pairs]


def _space(schema: GeneSchema) -> int:
    from .genome import space_size
    return space_size(schema)


# ---------------------------------------------------------------------------
# Event-log audit oracle (used by tests and for debugging stores)


_ASSIGNMENT_ID_RE = re.compile(r"^(?P<task>.+):g(?P<gen>\d+):p(?P<pair>\d+)$")


def audit_events(events: list[dict]) -> list[str]:
    """Replay a log and list every protocol violation found.

    Checks: single active lease per pair, choices only by the current
    lease holder, one result per pair, per-rater quotas, pair counts per
    round, and exactly one advancement per completed round.
    """
    violations: list[str] = []
    quotas: dict[str, int] = {}
    pairs_per_round: dict[str, int] = {}
    iterations: dict[str, int] = {}
    leases: dict[str, str] = {}          # assignment -> rater
    results: dict[str, str] = {}         # assignment -> rater
    rater_counts: Counter = Counter()    # (task, rater)
    round_counts: Counter = Counter()    # (task, generation)
    advances: Counter = Counter()        # (task, generation)
    completed: Counter = Counter()

    for event in events:
        kind = event["type"]
        task = event.get("task_id")
        if kind == "task_created":
            quotas[task] = event["budget"]["per_worker_quota"]
            pairs_per_round[task] = event["config"]["population_size"] // 2
            iterations[task] = event["config"]["iterations"]
        elif kind == "lease":
            aid = event["assignment_id"]
            if aid in leases:
                violations.append(f"double lease on {aid}")
            if aid in results:
                violations.append(f"lease on already-rated {aid}")
            leases[aid] = event["rater_id"]
        elif kind == "lease_expired":
            leases.pop(event["assignment_id"], None)
        elif kind == "choice":
            aid = event["assignment_id"]
            rater = event["rater_id"]
            if leases.get(aid) != rater:
                violations.append(f"choice on {aid} by non-holder {rater}")
            leases.pop(aid, None)
            if aid in results:
                violations.append(f"second result for {aid}")
            results[aid] = rater
            rater_counts[(task, rater)] += 1
            if rater_counts[(task, rater)] > quotas.get(task, 0):
                violations.append(f"quota exceeded by {rater} on {task}")
            m = _ASSIGNMENT_ID_RE.match(aid)
            if m:
                round_counts[(task, int(m.group("gen")))] += 1
        elif kind == "advanced":
            advances[(task, event["generation"])] += 1
            if advances[(task, event["generation"])] > 1:
                violations.append(
                    f"generation {event['generation']} advanced twice on {task}")
        elif kind == "completed":
            completed[task] += 1
            if completed[task] > 1:
                violations.append(f"task {task} completed twice")

    for (task, generation), count in round_counts.items():
        expected = pairs_per_round.get(task)
        if expected is not None and count != expected:
            violations.append(
                f"round {generation} of {task} has {count} results, "
                f"expected {expected}")
    for task, total in iterations.items():
        if completed.get(task):
            got = sum(1 for (t, _g) in round_counts if t == task)
            if got != total:
                violations.append(
                    f"completed task {task} rated {got} rounds, "
                    f"expected {total}")
    return violations
