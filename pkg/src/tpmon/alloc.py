"""Temperature-aware task-to-core allocation.

Mappings are scored at thermal equilibrium against one of two control
targets. ``exhaustive_allocate`` enumerates every placement of the task
power classes; ``greedy_allocate`` places tasks one at a time.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DomainError
from .power import PowerClass, profile_power
from .thermal import PowerLevels, ThermalNetwork, steady_state
from .topology import CoreId

# Objectives closer than this (degC) count as tied; the tie-break key decides.
TIE_TOLERANCE = 1e-9


class ControlTarget(Enum):
    MIN_GLOBAL_MAX_TEMP = "min-max-temp"
    MIN_INTRA_TILE_SPREAD = "min-spread"


@dataclass(frozen=True)
class Task:
    id: str
    level: PowerClass

    def __post_init__(self):
        level = PowerClass.parse(self.level)
        if level is PowerClass.IDLE:
            raise DomainError(f"task {self.id!r}: idle is not a task power class")
        object.__setattr__(self, "level", level)


@dataclass(frozen=True)
class TaskSet:
    tasks: tuple

    def __post_init__(self):
        tasks = tuple(t if isinstance(t, Task) else Task(*t) for t in self.tasks)
        ids = [t.id for t in tasks]
        if len(set(ids)) != len(ids):
            raise DomainError("task ids must be unique")
        object.__setattr__(self, "tasks", tasks)

    def __len__(self):
        return len(self.tasks)

    def __iter__(self):
        return iter(self.tasks)

    @classmethod
    def from_counts(cls, **counts) -> "TaskSet":
        tasks = []
        for level in ("low", "medium", "high"):
            tasks.extend(Task(f"{level}{i}", level) for i in range(counts.get(level, 0)))
        return cls(tuple(tasks))

    @classmethod
    def reference(cls) -> "TaskSet":
        """Four lowest-power and four highest-power tasks."""
        return cls.from_counts(low=4, high=4)

    def by_id(self) -> dict:
        return {t.id: t for t in self.tasks}


Mapping = dict  # task id -> CoreId


@dataclass(frozen=True, eq=False)
class MappingScore:
    temps: np.ndarray
    global_max: float
    tile_spreads: tuple
    target: ControlTarget
    tie_key: tuple  # flat core index of each task, tasks sorted by id

    @property
    def max_spread(self) -> float:
        return max(self.tile_spreads)

    @property
    def objective(self) -> float:
        if self.target is ControlTarget.MIN_GLOBAL_MAX_TEMP:
            return self.global_max
        return self.max_spread

    @property
    def rank(self) -> tuple:
        """Objective components compared in order, before the tie key."""
        if self.target is ControlTarget.MIN_GLOBAL_MAX_TEMP:
            return (self.global_max,)
        return (self.max_spread, self.global_max)


def power_vector(m: Mapping, ts: TaskSet, net: ThermalNetwork, levels: PowerLevels) -> np.ndarray:
    fp = net.floorplan
    tasks = ts.by_id()
    if set(m) != set(tasks):
        raise DomainError("mapping must assign exactly the tasks of the task set")
    p = np.full(fp.n_cores, profile_power(PowerClass.IDLE, levels))
    used = set()
    for task_id, core in m.items():
        i = fp.index(core)
        if i in used:
            raise DomainError(f"core {core} assigned twice")
        used.add(i)
        p[i] = profile_power(tasks[task_id].level, levels)
    return p


def evaluate_mapping(m: Mapping, ts: TaskSet, net: ThermalNetwork, levels: PowerLevels,
                     target: ControlTarget = ControlTarget.MIN_GLOBAL_MAX_TEMP) -> MappingScore:
    fp = net.floorplan
    temps = steady_state(net, power_vector(m, ts, net, levels))
    spreads = tuple(
        float(temps[s].max() - temps[s].min()) for s in map(fp.tile_slice, range(fp.n_tiles))
    )
    return MappingScore(
        temps=temps,
        global_max=float(temps.max()),
        tile_spreads=spreads,
        target=target,
        tie_key=tuple(fp.index(m[t]) for t in sorted(m)),
    )


def best_index(scores) -> int:
    """Index of the best score: tolerant lexicographic rank, then smallest tie key.

    The result does not depend on the order of ``scores``.
    """
    candidates = list(range(len(scores)))
    if not candidates:
        raise DomainError("no candidate mappings")
    for k in range(len(scores[0].rank)):
        low = min(scores[i].rank[k] for i in candidates)
        candidates = [i for i in candidates if scores[i].rank[k] <= low + TIE_TOLERANCE]
    return min(candidates, key=lambda i: scores[i].tie_key)


def _check_fits(ts: TaskSet, net: ThermalNetwork):
    if len(ts) > net.n:
        raise DomainError(f"{len(ts)} tasks do not fit on {net.n} cores")


def class_placements(ts: TaskSet, n_cores: int):
    """Yield every mapping that differs in which cores run which power class.

    Within a class, tasks are placed on the chosen cores in ascending id order.
    """
    groups = {}
    for t in sorted(ts, key=lambda t: t.id):
        groups.setdefault(t.level, []).append(t.id)
    order = [lv for lv in (PowerClass.HIGH, PowerClass.MEDIUM, PowerClass.LOW) if lv in groups]

    def place(k, free):
        if k == len(order):
            yield {}
            return
        ids = groups[order[k]]
        for cores in itertools.combinations(free, len(ids)):
            rest = [c for c in free if c not in cores]
            for tail in place(k + 1, rest):
                yield {**dict(zip(ids, cores)), **tail}

    yield from place(0, list(range(n_cores)))


def exhaustive_allocate(ts: TaskSet, net: ThermalNetwork, levels: PowerLevels,
                        target: ControlTarget = ControlTarget.MIN_GLOBAL_MAX_TEMP):
    _check_fits(ts, net)
    fp = net.floorplan
    mappings = [
        {tid: fp.core(i) for tid, i in flat.items()} for flat in class_placements(ts, fp.n_cores)
    ]
    scores = [evaluate_mapping(m, ts, net, levels, target) for m in mappings]
    best = best_index(scores)
    return mappings[best], scores[best]


def greedy_allocate(ts: TaskSet, net: ThermalNetwork, levels: PowerLevels,
                    target: ControlTarget = ControlTarget.MIN_GLOBAL_MAX_TEMP):
    """Hottest task first, each onto the free core that scores best so far."""
    _check_fits(ts, net)
    fp = net.floorplan
    order = sorted(ts, key=lambda t: (-profile_power(t.level, levels), t.id))
    placed: Mapping = {}
    free = list(range(fp.n_cores))
    for k, task in enumerate(order):
        partial = TaskSet(tuple(order[: k + 1]))
        trials = [{**placed, task.id: fp.core(i)} for i in free]
        scores = [evaluate_mapping(m, partial, net, levels, target) for m in trials]
        # partial mappings share all but one core, so the tie key picks the lowest free core
        choice = best_index(scores)
        placed = trials[choice]
        free.remove(fp.index(placed[task.id]))
    return placed, evaluate_mapping(placed, ts, net, levels, target)


def describe_mapping(m: Mapping, fp) -> list[tuple[str, CoreId, int]]:
    return sorted(((tid, core, fp.index(core)) for tid, core in m.items()), key=lambda r: r[2])
