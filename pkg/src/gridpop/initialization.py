"""Builds the initial state: town quotas, ages, genders, couples, children, housing.

Staging order matters: persons are spawned unhoused into towns, ages and
genders are drawn, couples are formed, every minor is assigned married
parents, and housing is created last so that no initial house is ever
empty. The structural invariants hold once the build completes.
"""

from __future__ import annotations

import logging
import math

import numpy as np

from .events import age_compatibility_array
from .params import ModelParameters
from .population import Gender, PersonId, PopulationStore
from .space import Space, TownKey
from .stochastics import (
    ClockSpec,
    Rng,
    sample_half_normal_age_steps,
    sample_indices_without_replacement,
    shuffle,
    weighted_sample,
)

logger = logging.getLogger(__name__)


class InitializationError(RuntimeError):
    """The population cannot satisfy the initial-state guarantees."""


def init_town_populations(initial_pop: int, space: Space) -> dict[TownKey, int]:
    """Per-town person quotas proportional to density, summing to initial_pop.

    Largest-remainder rounding; ties broken by grid order. Zero-density
    towns get nothing.
    """
    if initial_pop < 1:
        raise ValueError("initial_pop must be >= 1")
    towns = space.inhabitable_towns
    weights = np.array([space.towns[k].density for k in towns], dtype=float)
    quotas = initial_pop * weights / weights.sum()
    counts = np.floor(quotas).astype(int)
    remainder = initial_pop - int(counts.sum())
    if remainder > 0:
        # Stable sort keeps grid order among equal remainders.
        order = np.argsort(-(quotas - counts), kind="stable")
        counts[order[:remainder]] += 1
    return {k: int(c) for k, c in zip(towns, counts)}


def init_ages_and_genders(store: PopulationStore, pids: list[PersonId],
                          clock: ClockSpec, rng: Rng,
                          max_age_years: float = 110.0) -> None:
    """Assign half-normal ages and fair-coin genders to freshly spawned persons."""
    n = len(pids)
    genders = rng.random(n) < 0.5  # True = male
    ages = sample_half_normal_age_steps(rng, clock, size=n, max_age_years=max_age_years)
    for pid, is_male, age in zip(pids, genders, ages):
        p = store.persons[pid]
        p.gender = Gender.MALE if is_male else Gender.FEMALE
        p.age_steps = int(age)
    store.recount_caches()


def init_partnerships(store: PopulationStore, params: ModelParameters, rng: Rng) -> None:
    """Marry off adult males, each selected with probability start_married_rate.

    Every selected male draws a uniform candidate subset of the eligible
    female pool, weights it by age compatibility and picks a wife; she
    leaves the pool. An exhausted pool leaves the remaining males single.
    """
    n = store.steps_per_year
    adult_males = [p.id for p in store.persons.values()
                   if p.alive and p.gender is Gender.MALE and store.is_adult(p)]
    picks = rng.random(len(adult_males)) < params.start_married_rate
    selected = shuffle(rng, [pid for pid, take in zip(adult_males, picks) if take])

    pool = [p.id for p in store.persons.values()
            if p.alive and p.gender is Gender.FEMALE and store.is_adult(p)]
    pool_ids = np.array(pool, dtype=np.int64)
    pool_ages = np.array([store.persons[pid].age_steps for pid in pool], dtype=float) / n
    live = len(pool_ids)
    # Candidate-subset size is fixed from the initial pool size.
    n_cand = max(params.max_num_marr_cand, math.ceil(live / 10))

    for rank, m in enumerate(selected):
        if live == 0:
            logger.warning("eligible female pool exhausted; %d selected males stay single",
                           len(selected) - rank)
            break
        k = min(n_cand, live)
        cand = sample_indices_without_replacement(rng, live, k)
        weights = age_compatibility_array(store.age_years(m), pool_ages[cand])
        j = int(weighted_sample(rng, cand, weights))
        wife = int(pool_ids[j])
        store.wed(m, wife)
        live -= 1
        pool_ids[j] = pool_ids[live]
        pool_ages[j] = pool_ages[live]


def init_children(store: PopulationStore, rng: Rng) -> None:
    """Give every minor a married father (and his wife as mother).

    A father qualifies when both spouses are at least 18 years 9 months
    older than the child and the wife is under 45 + child's age. An empty
    candidate set falls back to the couple with the largest age margin; if
    no couple exists at all, the oldest single adult pair is wed first.
    """
    n = store.steps_per_year
    minors = [p.id for p in store.persons.values() if p.age_steps < store.adult_age_steps]
    if not minors:
        return

    def couple_arrays():
        ids, min_ages, wife_ages = [], [], []
        for p in store.persons.values():
            if p.gender is Gender.MALE and p.married:
                wife = store.persons[p.partner]
                ids.append(p.id)
                min_ages.append(min(p.age_steps, wife.age_steps))
                wife_ages.append(wife.age_steps)
        return (np.array(ids, dtype=np.int64),
                np.array(min_ages, dtype=np.int64),
                np.array(wife_ages, dtype=np.int64))

    men_ids, men_min_age, men_wife_age = couple_arrays()
    if len(men_ids) == 0:
        _wed_oldest_single_pair(store)
        men_ids, men_min_age, men_wife_age = couple_arrays()

    cache: dict[int, np.ndarray] = {}
    for child_id in minors:
        a = store.persons[child_id].age_steps
        candidates = cache.get(a)
        if candidates is None:
            mask = (men_min_age >= a + 18.75 * n) & (men_wife_age < 45 * n + a)
            candidates = np.flatnonzero(mask)
            cache[a] = candidates
        if len(candidates) > 0:
            father = int(men_ids[candidates[int(rng.integers(len(candidates)))]])
        else:
            # Closest couple by age margin; the no-orphan guarantee wins.
            father = int(men_ids[int(np.argmax(men_min_age))])
            logger.warning("no qualifying parents for child %d (age %.2f); "
                           "assigning closest couple", child_id, a / n)
        mother = store.persons[father].partner
        store.assign_parents(child_id, father, mother)


def _wed_oldest_single_pair(store: PopulationStore) -> None:
    males = [p for p in store.persons.values()
             if p.alive and p.gender is Gender.MALE and p.unmarried and store.is_adult(p)]
    females = [p for p in store.persons.values()
               if p.alive and p.gender is Gender.FEMALE and p.unmarried and store.is_adult(p)]
    if not males or not females:
        raise InitializationError("minors present but no married couple can be formed")
    groom = max(males, key=lambda p: (p.age_steps, -p.id))
    bride = max(females, key=lambda p: (p.age_steps, -p.id))
    logger.warning("no married couples; wedding oldest single pair (%d, %d) "
                   "to keep minors parented", groom.id, bride.id)
    store.wed(groom.id, bride.id)


def init_housing(store: PopulationStore, space: Space,
                 town_of: dict[PersonId, TownKey], rng: Rng) -> None:
    """House everyone: singles alone in their town, families with the husband.

    Every house is created on demand and immediately occupied, so the
    initial house set has no vacancies.
    """
    family_house: dict[PersonId, int] = {}
    for p in store.persons.values():
        if p.gender is Gender.MALE and p.married:
            hid = space.find_or_create_empty_house(town_of[p.id], rng)
            space.move_person(store, p.id, hid)
            family_house[p.id] = hid
        elif p.unmarried and store.is_adult(p):
            hid = space.find_or_create_empty_house(town_of[p.id], rng)
            space.move_person(store, p.id, hid)
    for p in store.persons.values():
        if p.gender is Gender.FEMALE and p.married:
            space.move_person(store, p.id, family_house[p.partner])
        elif p.age_steps < store.adult_age_steps and p.unmarried:
            space.move_person(store, p.id, family_house[p.father])


def build_initial_state(store: PopulationStore, space: Space,
                        params: ModelParameters, clock: ClockSpec, rng: Rng,
                        max_initial_age: float = 110.0) -> dict[PersonId, TownKey]:
    """Run the full initialization pipeline on a fresh store.

    Returns the density-weighted town each person was placed in. Families
    consolidate into the husband's town during housing, so final per-town
    headcounts deviate from this placement by the relocated dependents.
    """
    if len(store) != 0:
        raise ValueError("initialization requires an empty store")
    targets = init_town_populations(params.initial_pop, space)
    town_of: dict[PersonId, TownKey] = {}
    for town in space.inhabitable_towns:
        for _ in range(targets[town]):
            pid = store.spawn_person(Gender.MALE, 0)
            town_of[pid] = town
    init_ages_and_genders(store, list(store.persons), clock, rng,
                          max_age_years=max_initial_age)
    init_partnerships(store, params, rng)
    init_children(store, rng)
    init_housing(store, space, town_of, rng)
    return town_of
