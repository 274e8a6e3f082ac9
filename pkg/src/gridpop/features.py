"""Composable predicate algebra over agents, with one-step temporal operators.

Expressions are trees built from elementary predicates and the operators
``|`` (union), ``&`` (intersection), ``-`` (difference), ``~`` (negation),
plus ``compose``, ``just`` and ``pre``. Evaluation is pure: the same
(person, store, snapshot) always yields the same boolean.

Temporal semantics: ``pre(f)`` evaluates f against the previous step
boundary's snapshot and is False for persons created since; ``just(f)``
is ``f now and not pre(f)``. When no snapshot exists yet (the very first
boundary), the current state doubles as its own past, so ``just`` is
False everywhere and ``pre(f)`` equals ``f``.

Only the snapshot-tracked attributes (age, alive, marital status, house,
town) are stored per step; kinship predicates under ``pre``/``just`` are
reconstructed from snapshot membership, which works because kinship links
never disappear and only ever gain newly created persons.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Optional

import numpy as np

from .population import (
    Gender,
    MaritalStatus,
    PersonId,
    PopulationStore,
    STATUS_CODE,
)

if TYPE_CHECKING:
    from .space import Space

_STATUS_FROM_CODE = {code: status for status, code in STATUS_CODE.items()}


class FeatureError(Exception):
    """Raised for unsupported expression shapes (e.g. nested temporal ops)."""


class StepSnapshot:
    """Immutable copy of the tracked attributes at one step boundary.

    Stored as dense arrays indexed by person id; ids issued after the
    capture are simply beyond `size`, which encodes absence.
    """

    __slots__ = ("size", "steps_per_year", "age_steps", "alive", "status",
                 "house", "town_x", "town_y")

    def __init__(self, size: int, steps_per_year: int, age_steps: np.ndarray,
                 alive: np.ndarray, status: np.ndarray, house: np.ndarray,
                 town_x: np.ndarray, town_y: np.ndarray):
        self.size = size
        self.steps_per_year = steps_per_year
        self.age_steps = age_steps
        self.alive = alive
        self.status = status
        self.house = house
        self.town_x = town_x
        self.town_y = town_y

    @classmethod
    def capture(cls, store: PopulationStore, space: "Space") -> "StepSnapshot":
        n = store.size
        return cls(
            n, store.steps_per_year,
            store.age_steps_arr[:n].copy(),
            store.alive_arr[:n].copy(),
            store.status_arr[:n].copy(),
            store.house_arr[:n].copy(),
            store.town_x_arr[:n].copy(),
            store.town_y_arr[:n].copy(),
        )

    def __contains__(self, pid: PersonId) -> bool:
        return 0 <= pid < self.size

    def house_of(self, pid: PersonId) -> Optional[int]:
        h = int(self.house[pid])
        return None if h == -1 else h

    def town_of(self, pid: PersonId) -> Optional[tuple[int, int]]:
        x = int(self.town_x[pid])
        return None if x == 0 else (x, int(self.town_y[pid]))

    def age_steps_of(self, pid: PersonId) -> int:
        return int(self.age_steps[pid])

    def alive_of(self, pid: PersonId) -> bool:
        return bool(self.alive[pid])

    def status_of(self, pid: PersonId) -> MaritalStatus:
        return _STATUS_FROM_CODE[int(self.status[pid])]


class EvalContext:
    """Store + space + previous-boundary snapshot used during evaluation."""

    __slots__ = ("store", "space", "snapshot")

    def __init__(self, store: PopulationStore, space: "Space",
                 snapshot: Optional[StepSnapshot] = None):
        self.store = store
        self.space = space
        self.snapshot = snapshot


class FeatureExpr:
    """Base node; subclasses implement holds(ctx, pid, past)."""

    def holds(self, ctx: EvalContext, pid: PersonId, past: bool = False) -> bool:
        raise NotImplementedError

    def __or__(self, other: "FeatureExpr") -> "FeatureExpr":
        return Union(self, other)

    def __and__(self, other: "FeatureExpr") -> "FeatureExpr":
        return Intersection(self, other)

    def __sub__(self, other: "FeatureExpr") -> "FeatureExpr":
        return Difference(self, other)

    def __invert__(self) -> "FeatureExpr":
        return Negation(self)

    def compose(self, inner: "FeatureExpr") -> "FeatureExpr":
        return Composition(self, inner)


@dataclass(frozen=True)
class Union(FeatureExpr):
    left: FeatureExpr
    right: FeatureExpr

    def holds(self, ctx, pid, past=False):
        return self.left.holds(ctx, pid, past) or self.right.holds(ctx, pid, past)


@dataclass(frozen=True)
class Intersection(FeatureExpr):
    left: FeatureExpr
    right: FeatureExpr

    def holds(self, ctx, pid, past=False):
        return self.left.holds(ctx, pid, past) and self.right.holds(ctx, pid, past)


@dataclass(frozen=True)
class Difference(FeatureExpr):
    left: FeatureExpr
    right: FeatureExpr

    def holds(self, ctx, pid, past=False):
        return self.left.holds(ctx, pid, past) and not self.right.holds(ctx, pid, past)


@dataclass(frozen=True)
class Negation(FeatureExpr):
    inner: FeatureExpr

    def holds(self, ctx, pid, past=False):
        return not self.inner.holds(ctx, pid, past)


@dataclass(frozen=True)
class Composition(FeatureExpr):
    """Restrict `inner` to persons already satisfying `outer`.

    Extensionally equal to intersection; `inner` is only evaluated when
    `outer` holds (short-circuit).
    """

    outer: FeatureExpr
    inner: FeatureExpr

    def holds(self, ctx, pid, past=False):
        return self.outer.holds(ctx, pid, past) and self.inner.holds(ctx, pid, past)


@dataclass(frozen=True)
class Just(FeatureExpr):
    inner: FeatureExpr

    def holds(self, ctx, pid, past=False):
        if past:
            raise FeatureError("temporal operators cannot be nested (one snapshot is retained)")
        return self.inner.holds(ctx, pid) and not _eval_past(self.inner, ctx, pid)


@dataclass(frozen=True)
class Pre(FeatureExpr):
    inner: FeatureExpr

    def holds(self, ctx, pid, past=False):
        if past:
            raise FeatureError("temporal operators cannot be nested (one snapshot is retained)")
        return _eval_past(self.inner, ctx, pid)


def _eval_past(expr: FeatureExpr, ctx: EvalContext, pid: PersonId) -> bool:
    if ctx.snapshot is None:
        # First boundary: the initial state is its own past.
        return expr.holds(ctx, pid)
    if pid not in ctx.snapshot:
        # Created since the snapshot: every past evaluation is False.
        return False
    return expr.holds(ctx, pid, past=True)


def just(expr: FeatureExpr) -> FeatureExpr:
    return Just(expr)


def pre(expr: FeatureExpr) -> FeatureExpr:
    return Pre(expr)


def compose(outer: FeatureExpr, inner: FeatureExpr) -> FeatureExpr:
    return Composition(outer, inner)


# -- elementary predicates ----------------------------------------------


@dataclass(frozen=True)
class GenderIs(FeatureExpr):
    gender: Gender

    def holds(self, ctx, pid, past=False):
        # Gender never changes, so past evaluation reads the live record.
        return ctx.store.persons[pid].gender is self.gender


@dataclass(frozen=True)
class IsAlive(FeatureExpr):
    def holds(self, ctx, pid, past=False):
        if past:
            return ctx.snapshot.alive_of(pid)
        return ctx.store.persons[pid].alive


@dataclass(frozen=True)
class StatusIs(FeatureExpr):
    status: MaritalStatus

    def holds(self, ctx, pid, past=False):
        if past:
            return ctx.snapshot.status_of(pid) is self.status
        return ctx.store.persons[pid].marital_status is self.status


@dataclass(frozen=True)
class IsMarried(FeatureExpr):
    def holds(self, ctx, pid, past=False):
        if past:
            return ctx.snapshot.status_of(pid) is MaritalStatus.MARRIED
        return ctx.store.persons[pid].married


@dataclass(frozen=True)
class AgeAtLeast(FeatureExpr):
    years: float

    def holds(self, ctx, pid, past=False):
        steps = ctx.snapshot.age_steps_of(pid) if past else ctx.store.persons[pid].age_steps
        return steps >= self.years * ctx.store.steps_per_year


@dataclass(frozen=True)
class AgeOver(FeatureExpr):
    years: float

    def holds(self, ctx, pid, past=False):
        steps = ctx.snapshot.age_steps_of(pid) if past else ctx.store.persons[pid].age_steps
        return steps > self.years * ctx.store.steps_per_year


@dataclass(frozen=True)
class AgeBelow(FeatureExpr):
    years: float

    def holds(self, ctx, pid, past=False):
        steps = ctx.snapshot.age_steps_of(pid) if past else ctx.store.persons[pid].age_steps
        return steps < self.years * ctx.store.steps_per_year


def _existed(ctx: EvalContext, pid: PersonId, past: bool) -> bool:
    return not past or ctx.snapshot is None or pid in ctx.snapshot


@dataclass(frozen=True)
class HasChildren(FeatureExpr):
    def holds(self, ctx, pid, past=False):
        children = ctx.store.persons[pid].children
        if past and ctx.snapshot is not None:
            return any(c in ctx.snapshot for c in children)
        return bool(children)


@dataclass(frozen=True)
class HasAliveChildren(FeatureExpr):
    def holds(self, ctx, pid, past=False):
        children = ctx.store.persons[pid].children
        if past and ctx.snapshot is not None:
            return any(c in ctx.snapshot and ctx.snapshot.alive_of(c) for c in children)
        return any(ctx.store.persons[c].alive for c in children)


@dataclass(frozen=True)
class HasSiblings(FeatureExpr):
    def holds(self, ctx, pid, past=False):
        sibs = ctx.store.sibling_ids(pid)
        if past and ctx.snapshot is not None:
            return any(s in ctx.snapshot for s in sibs)
        return bool(sibs)


@dataclass(frozen=True)
class HasAliveSiblings(FeatureExpr):
    def holds(self, ctx, pid, past=False):
        sibs = ctx.store.sibling_ids(pid)
        if past and ctx.snapshot is not None:
            return any(s in ctx.snapshot and ctx.snapshot.alive_of(s) for s in sibs)
        return any(ctx.store.persons[s].alive for s in sibs)


@dataclass(frozen=True)
class InHouse(FeatureExpr):
    house_id: int

    def holds(self, ctx, pid, past=False):
        if past:
            return ctx.snapshot.house_of(pid) == self.house_id
        return ctx.store.persons[pid].house == self.house_id


@dataclass(frozen=True)
class InTown(FeatureExpr):
    town: tuple[int, int]

    def holds(self, ctx, pid, past=False):
        if past:
            return ctx.snapshot.town_of(pid) == self.town
        house = ctx.store.persons[pid].house
        if house is None:
            return False
        return ctx.space.house_town(house) == self.town


@dataclass(frozen=True)
class Always(FeatureExpr):
    value: bool

    def holds(self, ctx, pid, past=False):
        return self.value


# Ready-made leaves.
MALE = GenderIs(Gender.MALE)
FEMALE = GenderIs(Gender.FEMALE)
ALIVE = IsAlive()
MARRIED = IsMarried()
DIVORCED = StatusIs(MaritalStatus.DIVORCED)
WIDOWED = StatusIs(MaritalStatus.WIDOWED)
HAS_CHILDREN = HasChildren()
HAS_ALIVE_CHILDREN = HasAliveChildren()
HAS_SIBLINGS = HasSiblings()
HAS_ALIVE_SIBLINGS = HasAliveSiblings()
ADULT = AgeAtLeast(18)
TRUE = Always(True)
FALSE = Always(False)


def age_at_least(years: float) -> FeatureExpr:
    return AgeAtLeast(years)


def age_over(years: float) -> FeatureExpr:
    return AgeOver(years)


def age_below(years: float) -> FeatureExpr:
    return AgeBelow(years)


def in_town(town: tuple[int, int]) -> FeatureExpr:
    return InTown(town)


def in_house(house_id: int) -> FeatureExpr:
    return InHouse(house_id)


# -- evaluation entry points ----------------------------------------------


def evaluate(expr: FeatureExpr, ctx: EvalContext, pid: PersonId) -> bool:
    return expr.holds(ctx, pid)


def subpopulation(expr: FeatureExpr, ctx: EvalContext) -> list[PersonId]:
    """Ids of all stored persons satisfying expr, in ascending id order."""
    return [pid for pid in ctx.store.persons if expr.holds(ctx, pid)]
