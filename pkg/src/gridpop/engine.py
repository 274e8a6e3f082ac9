"""Run loop, per-step statistics, auditing, and persistence.

A run is fully determined by (config, params, tables): one PCG64 stream
drives every draw, statistics rows are pure functions of counters, and the
CSV/export writers format numbers identically everywhere.

Audit mode re-derives every cached counter by brute-force sweep at every
step boundary and verifies the structural invariants, population
conservation, and house-count monotonicity.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

from .events import StepEventLog, run_step
from .features import StepSnapshot
from .initialization import build_initial_state
from .params import (
    DataTables,
    ModelParameters,
    SimulationConfig,
    SYNTHETIC_FERTILITY,
)
from .params import FertilityTable
from .population import (
    Gender,
    MaritalStatus,
    Person,
    PopulationStore,
    collect_invariant_violations,
)
from .space import House, Space, load_density_map
from .stochastics import make_rng

logger = logging.getLogger(__name__)

STATISTICS_HEADER = ("time,alive,males,females,married,single,divorced,widowed,"
                     "mean_age,births,deaths,marriages,divorces,orphan_moves,"
                     "divorce_moves,houses,occupied_houses")

EXPORT_HEADER = "# gridpop population export v1"
EXPORT_FIELDS = ("id gender age_steps alive status partner father mother "
                 "children house town_x town_y")


class AuditError(AssertionError):
    """A step boundary violated a structural invariant or counter check."""


@dataclass(frozen=True)
class StepStatistics:
    time: float
    alive: int
    males: int
    females: int
    married: int
    single: int
    divorced: int
    widowed: int
    mean_age: float
    births: int
    deaths: int
    marriages: int
    divorces: int
    orphan_moves: int
    divorce_moves: int
    houses: int
    occupied_houses: int

    def to_csv_row(self) -> str:
        return ",".join([
            f"{self.time:.6f}",
            str(self.alive), str(self.males), str(self.females),
            str(self.married), str(self.single), str(self.divorced), str(self.widowed),
            f"{self.mean_age:.6g}",
            str(self.births), str(self.deaths), str(self.marriages), str(self.divorces),
            str(self.orphan_moves), str(self.divorce_moves),
            str(self.houses), str(self.occupied_houses),
        ])


def collect_step_statistics(store: PopulationStore, space: Space,
                            log: StepEventLog, t: float,
                            audit: bool = False) -> StepStatistics:
    """Aggregate counts for one boundary from the store's cached counters;
    audit mode re-derives them by sweep and insists they agree."""
    if audit:
        _verify_cached_counters(store, space)
    counts = store.alive_status_counts
    mean_age = (store.alive_age_steps_sum / store.alive_count / store.steps_per_year
                if store.alive_count else 0.0)
    return StepStatistics(
        time=t,
        alive=store.alive_count,
        males=store.alive_male,
        females=store.alive_female,
        married=counts[MaritalStatus.MARRIED],
        single=counts[MaritalStatus.SINGLE],
        divorced=counts[MaritalStatus.DIVORCED],
        widowed=counts[MaritalStatus.WIDOWED],
        mean_age=mean_age,
        births=len(log.births),
        deaths=len(log.deaths),
        marriages=len(log.marriages),
        divorces=len(log.divorces),
        orphan_moves=len(log.orphan_moves),
        divorce_moves=len(log.divorce_moves),
        houses=space.house_count,
        occupied_houses=space.occupied_house_count,
    )


def _verify_cached_counters(store: PopulationStore, space: Space) -> None:
    alive = males = females = age_sum = 0
    statuses = {status: 0 for status in MaritalStatus}
    for p in store.persons.values():
        if not p.alive:
            continue
        alive += 1
        if p.gender is Gender.MALE:
            males += 1
        else:
            females += 1
        statuses[p.marital_status] += 1
        age_sum += p.age_steps
    occupied = sum(1 for h in space.houses.values() if h.occupants)
    checks = [
        (store.alive_count, alive, "alive"),
        (store.alive_male, males, "males"),
        (store.alive_female, females, "females"),
        (store.alive_age_steps_sum, age_sum, "age sum"),
        (space.occupied_house_count, occupied, "occupied houses"),
    ] + [(store.alive_status_counts[s], statuses[s], s.value) for s in MaritalStatus]
    bad = [f"{name}: cached {c} != sweep {s}" for c, s, name in checks if c != s]
    if bad:
        raise AuditError("cached statistics diverge: " + "; ".join(bad))


@dataclass
class RunResult:
    statistics: list[StepStatistics]
    store: PopulationStore
    space: Space
    logs: list[StepEventLog] = field(default_factory=list)


def build_space(config: SimulationConfig) -> Space:
    density = None if config.density_map == "default" else load_density_map(config.density_map)
    return Space(density=density, town_grid_cells=config.town_grid_cells)


def load_fertility_table(source: str) -> FertilityTable:
    """Fertility rates from a table file, or the synthetic default profile."""
    if source == SYNTHETIC_FERTILITY:
        return FertilityTable.synthetic()
    return FertilityTable.load(source)


StepHook = Callable[[int, Optional[StepSnapshot], StepEventLog, PopulationStore, Space], None]


def run_simulation(config: SimulationConfig, params: ModelParameters,
                   tables: DataTables, step_hook: Optional[StepHook] = None) -> RunResult:
    """Initialize and advance the model from t0 to t_final.

    Emits one statistics row for the initial state and one per executed
    step (thinned by stats_every, always including the final step). The
    same seed reproduces every output byte.
    """
    config.validate()
    params.validate()
    tables.validate()
    rng = make_rng(config.seed)
    n = config.clock.steps_per_year
    space = build_space(config)
    store = PopulationStore(n)
    build_initial_state(store, space, params, config.clock, rng,
                        max_initial_age=config.max_initial_age)

    if config.audit:
        _audit_boundary(store, space)
    stats = [collect_step_statistics(store, space, StepEventLog(), float(config.t0),
                                     audit=config.audit)]
    result = RunResult(statistics=stats, store=store, space=space)

    total = config.total_steps
    prev_alive = store.alive_count
    prev_houses = space.house_count
    for k in range(total):
        snapshot = StepSnapshot.capture(store, space)
        current_year = config.t0 + k // n
        log = run_step(store, space, params, tables, snapshot, current_year,
                       rng, config.event_order)
        result.logs.append(log)
        if config.audit:
            _audit_boundary(store, space)
            if store.alive_count != prev_alive + len(log.births) - len(log.deaths):
                raise AuditError(f"step {k}: population not conserved")
            if space.house_count < prev_houses:
                raise AuditError(f"step {k}: house count decreased")
        prev_alive = store.alive_count
        prev_houses = space.house_count
        if (k + 1) % config.stats_every == 0 or k == total - 1:
            t = config.t0 + (k + 1) / n
            stats.append(collect_step_statistics(store, space, log, t, audit=config.audit))
        if step_hook is not None:
            step_hook(k, snapshot, log, store, space)
    return result


def _audit_boundary(store: PopulationStore, space: Space) -> None:
    problems = collect_invariant_violations(store, space)
    if problems:
        raise AuditError(f"{len(problems)} invariant violations, first: {problems[0]}")
    _verify_cached_counters(store, space)


# -- persistence -------------------------------------------------------------


def statistics_to_csv(stats: list[StepStatistics]) -> str:
    return "\n".join([STATISTICS_HEADER] + [s.to_csv_row() for s in stats]) + "\n"


def write_statistics(stats: list[StepStatistics], path: str | Path) -> None:
    Path(path).write_text(statistics_to_csv(stats))


def _opt(v) -> str:
    return "-" if v is None else str(v)


def export_population(store: PopulationStore, space: Space, path: str | Path) -> None:
    """One line per person, documented field order; dead persons carry
    'grave' in the house column. Re-importable for auditing."""
    lines = [EXPORT_HEADER,
             f"# steps_per_year={store.steps_per_year}",
             f"# fields: {EXPORT_FIELDS}"]
    for p in store.persons.values():
        children = ",".join(str(c) for c in sorted(p.children)) if p.children else "-"
        if p.house is not None:
            house = str(p.house)
            tx, ty = space.house_town(p.house)
            town_x, town_y = str(tx), str(ty)
        else:
            house = "grave" if not p.alive else "-"
            town_x = town_y = "-"
        lines.append(" ".join([
            str(p.id), p.gender.value, str(p.age_steps), "1" if p.alive else "0",
            p.marital_status.value, _opt(p.partner), _opt(p.father), _opt(p.mother),
            children, house, town_x, town_y,
        ]))
    Path(path).write_text("\n".join(lines) + "\n")


def import_population(path: str | Path) -> tuple[PopulationStore, Space]:
    """Rebuild a store (and a minimal space carrying the exported houses)
    from an export file, for invariant auditing and round-trip checks."""
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != EXPORT_HEADER:
        raise ValueError("not a population export file")
    steps_per_year = None
    for ln in lines[:3]:
        if ln.startswith("# steps_per_year="):
            steps_per_year = int(ln.split("=", 1)[1])
    if steps_per_year is None:
        raise ValueError("export file missing steps_per_year header")
    store = PopulationStore(steps_per_year)
    space = Space()
    max_id = -1
    max_house = -1
    for ln in lines:
        if ln.startswith("#") or not ln.strip():
            continue
        (pid, gender, age_steps, alive, status, partner, father, mother,
         children, house, town_x, town_y) = ln.split(" ")
        p = Person(
            id=int(pid),
            gender=Gender(gender),
            age_steps=int(age_steps),
            alive=alive == "1",
            marital_status=MaritalStatus(status),
            partner=None if partner == "-" else int(partner),
            father=None if father == "-" else int(father),
            mother=None if mother == "-" else int(mother),
            children=set() if children == "-" else {int(c) for c in children.split(",")},
        )
        if house not in ("grave", "-"):
            hid = int(house)
            town = (int(town_x), int(town_y))
            if hid not in space.houses:
                # Bypass new_house: exported coordinates are town-level only.
                space.houses[hid] = House(hid, town, 1, 1)
                space.towns[town].house_ids.append(hid)
                max_house = max(max_house, hid)
            space.houses[hid].occupants.add(p.id)
            p.house = hid
        store.persons[p.id] = p
        max_id = max(max_id, p.id)
    store._next_id = max_id + 1
    space._next_house_id = max_house + 1
    space._occupied_houses = sum(1 for h in space.houses.values() if h.occupants)
    store.recount_caches(space)
    return store, space
