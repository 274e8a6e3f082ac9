"""Agent storage and the kinship graph.

Every person is a record keyed by a monotonically increasing integer id;
dead persons are tombstoned (kept in the store with house=None, the grave)
so that kinship links of the living always resolve. Ages are exact step
counts against the run's clock, so a million steps accumulate no drift.

Person objects are the canonical state. Because ids are dense, the store
also maintains numpy mirrors of the scalar attributes (age, gender, alive,
status, house, town) so the per-step events can gather whole
subpopulations without touching Python objects; audit mode cross-checks
the mirrors against the objects every step.

Mutators preserve the structural invariants checked by
``collect_invariant_violations``; callers are expected to satisfy the
documented preconditions and get a ValueError otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Optional

import numpy as np

if TYPE_CHECKING:
    from .space import Space

PersonId = int

ADULT_AGE_YEARS = 18

_INITIAL_CAPACITY = 1024


class Gender(str, Enum):
    MALE = "male"
    FEMALE = "female"


class MaritalStatus(str, Enum):
    SINGLE = "single"
    MARRIED = "married"
    DIVORCED = "divorced"
    WIDOWED = "widowed"


STATUS_CODE = {
    MaritalStatus.SINGLE: 0,
    MaritalStatus.MARRIED: 1,
    MaritalStatus.DIVORCED: 2,
    MaritalStatus.WIDOWED: 3,
}
MARRIED_CODE = STATUS_CODE[MaritalStatus.MARRIED]
DIVORCED_CODE = STATUS_CODE[MaritalStatus.DIVORCED]


class UnwedReason(Enum):
    DIVORCE = "divorce"
    PARTNER_DEATH = "partner_death"


@dataclass(slots=True)
class Person:
    id: PersonId
    gender: Gender
    age_steps: int
    alive: bool = True
    marital_status: MaritalStatus = MaritalStatus.SINGLE
    partner: Optional[PersonId] = None
    father: Optional[PersonId] = None
    mother: Optional[PersonId] = None
    children: set[PersonId] = field(default_factory=set)
    house: Optional[int] = None  # None = grave for the dead (or unhoused during init staging)

    @property
    def married(self) -> bool:
        return self.marital_status == MaritalStatus.MARRIED

    @property
    def unmarried(self) -> bool:
        return self.marital_status != MaritalStatus.MARRIED


class PopulationStore:
    """All persons of one run, living and dead, in id (= insertion) order."""

    def __init__(self, steps_per_year: int):
        if steps_per_year < 1:
            raise ValueError("steps_per_year must be >= 1")
        self.steps_per_year = steps_per_year
        self.persons: dict[PersonId, Person] = {}
        self._next_id: PersonId = 0
        self.adult_age_steps = ADULT_AGE_YEARS * steps_per_year
        # Cached aggregates over the alive population; audit mode verifies
        # them against a full sweep every step.
        self.alive_count = 0
        self.alive_male = 0
        self.alive_female = 0
        self.alive_status_counts = {status: 0 for status in MaritalStatus}
        self.alive_age_steps_sum = 0
        # Dense numpy mirrors of the scalar person attributes, indexed by id.
        cap = _INITIAL_CAPACITY
        self.age_steps_arr = np.zeros(cap, dtype=np.int64)
        self.male_arr = np.zeros(cap, dtype=bool)
        self.alive_arr = np.zeros(cap, dtype=bool)
        self.status_arr = np.zeros(cap, dtype=np.int8)
        self.house_arr = np.full(cap, -1, dtype=np.int64)
        self.town_x_arr = np.zeros(cap, dtype=np.int16)
        self.town_y_arr = np.zeros(cap, dtype=np.int16)

    def __len__(self) -> int:
        return len(self.persons)

    @property
    def size(self) -> int:
        """Number of ids ever issued; the valid mirror-array prefix."""
        return self._next_id

    def person(self, pid: PersonId) -> Person:
        return self.persons[pid]

    def age_years(self, pid: PersonId) -> float:
        return self.persons[pid].age_steps / self.steps_per_year

    def is_adult(self, person: Person) -> bool:
        return person.age_steps >= self.adult_age_steps

    def alive_ids(self) -> list[PersonId]:
        return np.flatnonzero(self.alive_arr[: self._next_id]).tolist()

    def _grow(self) -> None:
        cap = len(self.age_steps_arr)
        if self._next_id < cap:
            return
        new_cap = cap * 2
        for name in ("age_steps_arr", "male_arr", "alive_arr", "status_arr",
                     "house_arr", "town_x_arr", "town_y_arr"):
            old = getattr(self, name)
            grown = np.zeros(new_cap, dtype=old.dtype)
            if name == "house_arr":
                grown.fill(-1)
            grown[:cap] = old
            setattr(self, name, grown)

    # -- mutators ------------------------------------------------------

    def spawn_person(
        self,
        gender: Gender,
        age_steps: int,
        father: Optional[PersonId] = None,
        mother: Optional[PersonId] = None,
        house: Optional[int] = None,
        space: Optional["Space"] = None,
    ) -> PersonId:
        """Add a new alive, single person; registers kinship and occupancy.

        house may be None only while initialization stages the population;
        every alive person must be housed by the first step boundary.
        """
        if age_steps < 0:
            raise ValueError("age must be non-negative")
        if father is not None:
            f = self.persons.get(father)
            if f is None:
                raise ValueError(f"father id {father} does not resolve")
            if f.gender is not Gender.MALE:
                raise ValueError(f"father {father} is not male")
        if mother is not None:
            m = self.persons.get(mother)
            if m is None:
                raise ValueError(f"mother id {mother} does not resolve")
            if m.gender is not Gender.FEMALE:
                raise ValueError(f"mother {mother} is not female")
        pid = self._next_id
        self._next_id += 1
        self._grow()
        person = Person(id=pid, gender=gender, age_steps=age_steps, house=house)
        self.persons[pid] = person
        if father is not None:
            self.persons[father].children.add(pid)
            person.father = father
        if mother is not None:
            self.persons[mother].children.add(pid)
            person.mother = mother
        self.age_steps_arr[pid] = age_steps
        self.male_arr[pid] = gender is Gender.MALE
        self.alive_arr[pid] = True
        self.status_arr[pid] = STATUS_CODE[MaritalStatus.SINGLE]
        if house is not None:
            if space is None:
                raise ValueError("space required to register occupancy")
            space.add_occupant(house, pid)
            self.house_arr[pid] = house
            town = space.house_town(house)
            self.town_x_arr[pid] = town[0]
            self.town_y_arr[pid] = town[1]
        self.alive_count += 1
        if gender is Gender.MALE:
            self.alive_male += 1
        else:
            self.alive_female += 1
        self.alive_status_counts[MaritalStatus.SINGLE] += 1
        self.alive_age_steps_sum += age_steps
        return pid

    def wed(self, a: PersonId, b: PersonId) -> None:
        """Marry two alive, unmarried, opposite-gender adults."""
        pa, pb = self.persons[a], self.persons[b]
        if not (pa.alive and pb.alive):
            raise ValueError("cannot wed the dead")
        if pa.gender is pb.gender:
            raise ValueError("partners must be of opposite gender")
        if pa.married or pb.married:
            raise ValueError("already married")
        if not (self.is_adult(pa) and self.is_adult(pb)):
            raise ValueError("married persons must be adults")
        self._set_status(pa, MaritalStatus.MARRIED)
        self._set_status(pb, MaritalStatus.MARRIED)
        pa.partner = b
        pb.partner = a

    def unwed(self, a: PersonId, reason: UnwedReason) -> None:
        """Dissolve a marriage; divorce leaves both divorced, a partner's
        death leaves both widowed."""
        pa = self.persons[a]
        if not pa.married or pa.partner is None:
            raise ValueError(f"person {a} is not married")
        pb = self.persons[pa.partner]
        status = MaritalStatus.DIVORCED if reason is UnwedReason.DIVORCE else MaritalStatus.WIDOWED
        self._set_status(pa, status)
        self._set_status(pb, status)
        pa.partner = None
        pb.partner = None

    def kill(self, pid: PersonId, space: "Space") -> None:
        """Mark a person dead: vacate the house (to the grave) and widow
        any partner. Children keep their parent links."""
        person = self.persons[pid]
        if not person.alive:
            raise ValueError(f"person {pid} is already dead")
        if person.married:
            self.unwed(pid, UnwedReason.PARTNER_DEATH)
        self.alive_count -= 1
        if person.gender is Gender.MALE:
            self.alive_male -= 1
        else:
            self.alive_female -= 1
        self.alive_status_counts[person.marital_status] -= 1
        self.alive_age_steps_sum -= person.age_steps
        person.alive = False
        self.alive_arr[pid] = False
        if person.house is not None:
            space.remove_occupant(person.house, pid)
            person.house = None
            self.house_arr[pid] = -1
            self.town_x_arr[pid] = 0
            self.town_y_arr[pid] = 0

    def assign_parents(self, child: PersonId, father: PersonId, mother: PersonId) -> None:
        """Late kinship registration for initialization staging."""
        c = self.persons[child]
        if c.father is not None or c.mother is not None:
            raise ValueError(f"person {child} already has parents")
        f, m = self.persons[father], self.persons[mother]
        if f.gender is not Gender.MALE:
            raise ValueError(f"father {father} is not male")
        if m.gender is not Gender.FEMALE:
            raise ValueError(f"mother {mother} is not female")
        c.father = father
        c.mother = mother
        f.children.add(child)
        m.children.add(child)

    def _set_status(self, person: Person, status: MaritalStatus) -> None:
        if person.alive:
            self.alive_status_counts[person.marital_status] -= 1
            self.alive_status_counts[status] += 1
        person.marital_status = status
        self.status_arr[person.id] = STATUS_CODE[status]

    def recount_caches(self, space: Optional["Space"] = None) -> None:
        """Rebuild cached counters and numpy mirrors from the Person objects.

        Used after staging mutations that bypass the mutators (bulk
        age/gender assignment at init, file import). Pass the space to
        refresh town mirrors of housed persons.
        """
        self.alive_count = 0
        self.alive_male = 0
        self.alive_female = 0
        self.alive_status_counts = {status: 0 for status in MaritalStatus}
        self.alive_age_steps_sum = 0
        while self._next_id >= len(self.age_steps_arr):
            self._grow()
        for p in self.persons.values():
            self.age_steps_arr[p.id] = p.age_steps
            self.male_arr[p.id] = p.gender is Gender.MALE
            self.alive_arr[p.id] = p.alive
            self.status_arr[p.id] = STATUS_CODE[p.marital_status]
            self.house_arr[p.id] = -1 if p.house is None else p.house
            if p.house is not None and space is not None:
                town = space.house_town(p.house)
                self.town_x_arr[p.id] = town[0]
                self.town_y_arr[p.id] = town[1]
            else:
                self.town_x_arr[p.id] = 0
                self.town_y_arr[p.id] = 0
            if not p.alive:
                continue
            self.alive_count += 1
            if p.gender is Gender.MALE:
                self.alive_male += 1
            else:
                self.alive_female += 1
            self.alive_status_counts[p.marital_status] += 1
            self.alive_age_steps_sum += p.age_steps

    # -- kinship helpers -------------------------------------------------

    def sibling_ids(self, pid: PersonId) -> set[PersonId]:
        """Persons sharing at least one parent with pid."""
        person = self.persons[pid]
        sibs: set[PersonId] = set()
        for parent in (person.father, person.mother):
            if parent is not None:
                sibs |= self.persons[parent].children
        sibs.discard(pid)
        return sibs

    def is_orphan(self, person: Person) -> bool:
        """Alive minor with no living parent."""
        if not person.alive or self.is_adult(person):
            return False
        for parent in (person.father, person.mother):
            if parent is not None and self.persons[parent].alive:
                return False
        return True

    def alive_children_count(self, person: Person) -> int:
        return sum(1 for c in person.children if self.persons[c].alive)

    def youngest_alive_child_age_steps(self, person: Person) -> Optional[int]:
        ages = [self.persons[c].age_steps for c in person.children if self.persons[c].alive]
        return min(ages) if ages else None


def collect_invariant_violations(store: PopulationStore, space: "Space") -> list[str]:
    """Full structural sweep over persons and housing; returns findings.

    Checks reference resolution, partnership symmetry, parent/child
    bidirectionality, gender of parents, adult-marriage, dead-in-grave,
    alive-housed, occupancy consistency, kinship acyclicity, and agreement
    between Person objects and the numpy mirrors.
    """
    problems: list[str] = []
    persons = store.persons
    for p in persons.values():
        tag = f"person {p.id}"
        if p.age_steps < 0:
            problems.append(f"{tag}: negative age")
        if p.married != (p.partner is not None):
            problems.append(f"{tag}: married/partner mismatch")
        if p.partner is not None:
            q = persons.get(p.partner)
            if q is None:
                problems.append(f"{tag}: partner does not resolve")
            else:
                if q.partner != p.id:
                    problems.append(f"{tag}: partnership not symmetric")
                if q.gender is p.gender:
                    problems.append(f"{tag}: same-gender partnership")
        if p.married and p.age_steps < store.adult_age_steps:
            problems.append(f"{tag}: married minor")
        for parent_id, want in ((p.father, Gender.MALE), (p.mother, Gender.FEMALE)):
            if parent_id is None:
                continue
            parent = persons.get(parent_id)
            if parent is None:
                problems.append(f"{tag}: parent {parent_id} does not resolve")
                continue
            if parent.gender is not want:
                problems.append(f"{tag}: parent {parent_id} has wrong gender")
            if p.id not in parent.children:
                problems.append(f"{tag}: missing from parent {parent_id} children")
        for c in p.children:
            child = persons.get(c)
            if child is None:
                problems.append(f"{tag}: child {c} does not resolve")
            elif child.father != p.id and child.mother != p.id:
                problems.append(f"{tag}: child {c} does not link back")
        if p.alive:
            if p.house is None:
                problems.append(f"{tag}: alive but unhoused")
            elif p.house not in space.houses:
                problems.append(f"{tag}: house {p.house} does not resolve")
            elif p.id not in space.houses[p.house].occupants:
                problems.append(f"{tag}: not in occupant set of house {p.house}")
        elif p.house is not None:
            problems.append(f"{tag}: dead but housed")
        # Mirror consistency.
        if (store.age_steps_arr[p.id] != p.age_steps
                or store.male_arr[p.id] != (p.gender is Gender.MALE)
                or store.alive_arr[p.id] != p.alive
                or store.status_arr[p.id] != STATUS_CODE[p.marital_status]
                or store.house_arr[p.id] != (-1 if p.house is None else p.house)):
            problems.append(f"{tag}: numpy mirror out of sync")
        if p.house is not None and p.house in space.houses:
            town = space.houses[p.house].town
            if (store.town_x_arr[p.id], store.town_y_arr[p.id]) != town:
                problems.append(f"{tag}: town mirror out of sync")

    # Kinship acyclicity: walk parent links with memoization.
    state: dict[PersonId, int] = {}  # 1 = on current path, 2 = proven acyclic

    def acyclic(pid: PersonId) -> bool:
        stack = [pid]
        path: list[PersonId] = []
        while stack:
            cur = stack[-1]
            if state.get(cur) == 1:
                state[cur] = 2
                stack.pop()
                path.pop()
                continue
            if state.get(cur) == 2:
                stack.pop()
                continue
            state[cur] = 1
            path.append(cur)
            for parent in (persons[cur].father, persons[cur].mother):
                if parent is not None and parent in persons and state.get(parent) != 2:
                    if parent in path:
                        return False
                    stack.append(parent)
        return True

    for pid in persons:
        if state.get(pid) != 2 and not acyclic(pid):
            problems.append(f"person {pid}: ancestry cycle")
            break

    # Occupancy side: every occupant is alive and points back.
    occupant_total = 0
    for house in space.houses.values():
        occupant_total += len(house.occupants)
        for pid in house.occupants:
            p = persons.get(pid)
            if p is None:
                problems.append(f"house {house.id}: occupant {pid} does not resolve")
            elif not p.alive:
                problems.append(f"house {house.id}: dead occupant {pid}")
            elif p.house != house.id:
                problems.append(f"house {house.id}: occupant {pid} points elsewhere")
    alive_total = sum(1 for p in persons.values() if p.alive)
    if occupant_total != alive_total:
        problems.append(f"occupancy bijection broken: {occupant_total} occupants vs {alive_total} alive")
    return problems
