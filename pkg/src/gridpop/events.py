"""The per-step population transitions: ageing, deaths, births, divorces, marriages.

Ageing always runs first; the canonical order of the rest is deaths,
births, divorces, marriages (deaths before births prevents same-step
posthumous parenthood). All events within one step share the snapshot
committed at the step's start, so every "just happened" exclusion refers
to the previous boundary.

The yearly hazards and matching weights are exposed as pure functions so
they can be checked against scalar evaluation.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .features import StepSnapshot
from .params import DataTables, ModelParameters, decade_index
from .population import (
    DIVORCED_CODE,
    Gender,
    MARRIED_CODE,
    PersonId,
    PopulationStore,
    UnwedReason,
)
from .space import Space
from .stochastics import Rng, instantaneous_probability_array, weighted_sample

logger = logging.getLogger(__name__)

# exp() argument cap; keeps pathological children counts from overflowing.
_EXP_CAP = 700.0


@dataclass
class StepEventLog:
    """Who was affected by each event kind during one step."""

    births: list[PersonId] = field(default_factory=list)
    deaths: list[PersonId] = field(default_factory=list)
    marriages: list[tuple[PersonId, PersonId]] = field(default_factory=list)
    divorces: list[tuple[PersonId, PersonId]] = field(default_factory=list)
    orphan_moves: list[PersonId] = field(default_factory=list)
    divorce_moves: list[PersonId] = field(default_factory=list)


# -- yearly hazards and matching weights -----------------------------------


def death_yearly_probability(age_years: float, gender: Gender, params: ModelParameters) -> float:
    """Base rate plus an exponentially age-scaled, gender-specific term.

    The raw value can exceed 1 for extreme ages; callers clamp before
    converting to a per-step probability.
    """
    if gender is Gender.MALE:
        return params.base_die_rate + math.exp(age_years / params.male_age_scaling) * params.male_age_die_prob
    return params.base_die_rate + math.exp(age_years / params.female_age_scaling) * params.female_age_die_prob


def death_yearly_probability_array(age_years: np.ndarray, is_male: np.ndarray,
                                   params: ModelParameters) -> np.ndarray:
    scaling = np.where(is_male, params.male_age_scaling, params.female_age_scaling)
    slope = np.where(is_male, params.male_age_die_prob, params.female_age_die_prob)
    return params.base_die_rate + np.exp(age_years / scaling) * slope


def divorce_yearly_probability(age_steps: int, steps_per_year: int,
                               params: ModelParameters, tables: DataTables) -> float:
    idx = decade_index(age_steps, steps_per_year)
    return params.basic_divorce_rate * tables.divorce_modifier_by_decade[idx - 1]


def marriage_yearly_probability(age_steps: int, steps_per_year: int,
                                params: ModelParameters, tables: DataTables) -> float:
    idx = decade_index(age_steps, steps_per_year)
    return params.basic_male_marriage_rate * tables.male_marriage_modifier_by_decade[idx - 1]


def _decade_modifier_array(age_steps: np.ndarray, steps_per_year: int, vec) -> np.ndarray:
    idx = -(-age_steps // (10 * steps_per_year))
    idx = np.clip(idx, 1, 16)
    return np.take(np.asarray(vec, dtype=float), idx - 1)


def age_compatibility(age_m_years: float, age_f_years: float) -> float:
    """Piecewise preference on the age gap: flat near zero, decaying with
    large gaps in either direction; always positive."""
    diff = age_m_years - age_f_years
    if diff >= 5:
        return 1.0 / (diff - 4.0)
    if diff <= -2:
        return -1.0 / (diff + 1.0)
    return 1.0


def age_compatibility_array(age_m_years: float, ages_f_years: np.ndarray) -> np.ndarray:
    diff = age_m_years - ages_f_years
    w = np.ones(len(diff))
    older = diff >= 5
    w[older] = 1.0 / (diff[older] - 4.0)
    younger = diff <= -2
    w[younger] = -1.0 / (diff[younger] + 1.0)
    return w


def geo_factor(distance: int) -> float:
    return math.exp(-4.0 * distance)


def children_factor(n_m: int, n_f: int) -> float:
    return math.exp(min(n_m * n_f - n_m - n_f, _EXP_CAP))


# -- the five events --------------------------------------------------------


def ageing_step(store: PopulationStore, space: Space, rng: Rng, log: StepEventLog) -> None:
    """Advance every living person by one step.

    A person reaching adulthood this step whose parents are both dead and
    who has a living older sibling moves out to an empty house in the same
    town, alone.
    """
    adult_steps = store.adult_age_steps
    n = store.size
    alive = store.alive_arr[:n]
    ages = store.age_steps_arr[:n]
    ages[alive] += 1  # mirror first, then the canonical objects
    for p in store.persons.values():
        if p.alive:
            p.age_steps += 1
    store.alive_age_steps_sum += int(alive.sum())
    new_adults = np.flatnonzero(alive & (ages == adult_steps)).tolist()
    for pid in new_adults:
        p = store.persons[pid]
        parents_dead = all(
            parent is None or not store.persons[parent].alive
            for parent in (p.father, p.mother)
        )
        if not parents_dead:
            continue
        has_older_alive_sibling = any(
            store.persons[s].alive and store.persons[s].age_steps > p.age_steps
            for s in store.sibling_ids(pid)
        )
        if not has_older_alive_sibling:
            continue
        town = space.house_town(p.house)
        space.move_person(store, pid, space.find_or_create_empty_house(town, rng))
        log.orphan_moves.append(pid)


def deaths_step(store: PopulationStore, space: Space, params: ModelParameters,
                rng: Rng, log: StepEventLog) -> None:
    """Kill each living person with the per-step death probability for
    their age and gender, visiting them in shuffled order."""
    n = store.size
    ids = np.flatnonzero(store.alive_arr[:n])
    if len(ids) == 0:
        return
    rng.shuffle(ids)
    ages = store.age_steps_arr[ids] / store.steps_per_year
    is_male = store.male_arr[ids]
    p_yearly = np.clip(death_yearly_probability_array(ages, is_male, params), 0.0, 1.0)
    p_step = instantaneous_probability_array(p_yearly, store.steps_per_year)
    dead = ids[rng.random(len(ids)) < p_step].tolist()
    for pid in dead:
        store.kill(pid, space)
        log.deaths.append(pid)


def births_step(store: PopulationStore, space: Space, params: ModelParameters,
                tables: DataTables, current_year: int, rng: Rng, log: StepEventLog) -> None:
    """Married women under 45 whose youngest living child is over one year
    old (or who have no living children) give birth at the fertility-table
    rate for their age and the calendar year."""
    n = store.steps_per_year
    size = store.size
    candidate_ids = np.flatnonzero(
        store.alive_arr[:size] & ~store.male_arr[:size]
        & (store.status_arr[:size] == MARRIED_CODE)
        & (store.age_steps_arr[:size] < 45 * n)).tolist()
    mothers: list[PersonId] = []
    rates: list[float] = []
    for pid in candidate_ids:
        p = store.persons[pid]
        youngest = store.youngest_alive_child_age_steps(p)
        if youngest is not None and youngest <= n:
            continue
        mothers.append(pid)
        rates.append(tables.fertility.rate(p.age_steps // n, current_year))
    if not mothers:
        return
    p_step = instantaneous_probability_array(np.array(rates), n)
    hits = np.flatnonzero(rng.random(len(mothers)) < p_step)
    for i in hits:
        mother = store.persons[mothers[int(i)]]
        gender = Gender.MALE if rng.random() < 0.5 else Gender.FEMALE
        baby = store.spawn_person(gender, 0, father=mother.partner, mother=mother.id,
                                  house=mother.house, space=space)
        log.births.append(baby)


def divorces_step(store: PopulationStore, space: Space, params: ModelParameters,
                  tables: DataTables, snapshot: StepSnapshot | None,
                  rng: Rng, log: StepEventLog) -> None:
    """Divorce married men (skipping those married since the last boundary)
    at the decade-modified rate; the man moves out alone within his town."""
    n = store.size
    mask = (store.alive_arr[:n] & store.male_arr[:n]
            & (store.status_arr[:n] == MARRIED_CODE))
    if snapshot is not None:
        # Exclude the just-married: anyone not married at the boundary.
        was_married = np.zeros(n, dtype=bool)
        k = min(snapshot.size, n)
        was_married[:k] = snapshot.status[:k] == MARRIED_CODE
        mask &= was_married
    ids = np.flatnonzero(mask)
    if len(ids) == 0:
        return
    rng.shuffle(ids)
    ages = store.age_steps_arr[ids]
    modifiers = _decade_modifier_array(ages, store.steps_per_year, tables.divorce_modifier_by_decade)
    p_step = instantaneous_probability_array(params.basic_divorce_rate * modifiers,
                                             store.steps_per_year)
    hits = ids[rng.random(len(ids)) < p_step].tolist()
    for pid in hits:
        man = store.persons[pid]
        wife = man.partner
        store.unwed(pid, UnwedReason.DIVORCE)
        town = space.house_town(man.house)
        space.move_person(store, pid, space.find_or_create_empty_house(town, rng))
        log.divorces.append((pid, wife))
        log.divorce_moves.append(pid)


def marriages_step(store: PopulationStore, space: Space, params: ModelParameters,
                   tables: DataTables, snapshot: StepSnapshot | None,
                   rng: Rng, log: StepEventLog) -> None:
    """Marry eligible men at the decade-modified rate.

    Eligible men are unmarried adults, excluding those divorced or turned
    adult since the last boundary. A successful man draws a uniform subset
    of unmarried adult women and picks one weighted by distance, children
    and age compatibility; households merge into the larger house.
    """
    n = store.steps_per_year
    adult_steps = store.adult_age_steps
    size = store.size
    mask = (store.alive_arr[:size] & store.male_arr[:size]
            & (store.status_arr[:size] != MARRIED_CODE)
            & (store.age_steps_arr[:size] >= adult_steps))
    if snapshot is not None:
        k = min(snapshot.size, size)
        existed = np.zeros(size, dtype=bool)
        existed[:k] = True
        just_divorced = np.zeros(size, dtype=bool)
        just_divorced[:k] = ((store.status_arr[:k] == DIVORCED_CODE)
                             & (snapshot.status[:k] != DIVORCED_CODE))
        just_adult = np.zeros(size, dtype=bool)
        just_adult[:k] = snapshot.age_steps[:k] < adult_steps
        mask &= existed & ~just_divorced & ~just_adult
    ids = np.flatnonzero(mask)
    if len(ids) == 0:
        return
    rng.shuffle(ids)
    ages = store.age_steps_arr[ids]
    modifiers = _decade_modifier_array(ages, n, tables.male_marriage_modifier_by_decade)
    p_step = instantaneous_probability_array(params.basic_male_marriage_rate * modifiers, n)
    grooms = ids[rng.random(len(ids)) < p_step].tolist()
    if not grooms:
        return

    pool = np.flatnonzero(store.alive_arr[:size] & ~store.male_arr[:size]
                          & (store.status_arr[:size] != MARRIED_CODE)
                          & (store.age_steps_arr[:size] >= adult_steps))
    pool_ages = store.age_steps_arr[pool] / n
    # Child counts cannot change during this event; towns can (household
    # merges move co-residents), so distances read the live mirrors.
    pool_children = np.array([store.alive_children_count(store.persons[int(pid)])
                              for pid in pool], dtype=float)
    live = len(pool)

    for groom_id in grooms:
        if live == 0:
            break
        groom = store.persons[groom_id]
        n_cand = max(params.max_num_marr_cand, math.ceil(live / 10))
        k = min(n_cand, live)
        cand = rng.choice(live, size=k, replace=False)
        cand_pids = pool[cand]
        town_m = space.house_town(groom.house)
        dist = (np.abs(store.town_x_arr[cand_pids].astype(np.int64) - town_m[0])
                + np.abs(store.town_y_arr[cand_pids].astype(np.int64) - town_m[1]))
        nm = store.alive_children_count(groom)
        nf = pool_children[cand]
        children_w = np.exp(np.minimum(nm * nf - nm - nf, _EXP_CAP))
        weights = (np.exp(-4.0 * dist) * children_w
                   * age_compatibility_array(groom.age_steps / n, pool_ages[cand]))
        if float(weights.sum()) <= 0.0:
            logger.debug("all marriage weights zero for man %d; stays single", groom_id)
            continue
        j = int(weighted_sample(rng, cand, weights))
        bride_id = int(pool[j])
        store.wed(groom_id, bride_id)
        _merge_households(store, space, groom_id, bride_id)
        log.marriages.append((groom_id, bride_id))
        live -= 1
        pool[j] = pool[live]
        pool_ages[j] = pool_ages[live]
        pool_children[j] = pool_children[live]


def _merge_households(store: PopulationStore, space: Space,
                      groom: PersonId, bride: PersonId) -> None:
    """Everyone in the smaller house moves into the larger; ties favour
    the groom's house."""
    house_m = store.persons[groom].house
    house_f = store.persons[bride].house
    if house_m == house_f:
        return
    occ_m = space.houses[house_m].occupants
    occ_f = space.houses[house_f].occupants
    if len(occ_m) >= len(occ_f):
        movers, target = occ_f, house_m
    else:
        movers, target = occ_m, house_f
    for pid in sorted(movers):
        space.move_person(store, pid, target)


# -- one whole step ----------------------------------------------------------


def run_step(store: PopulationStore, space: Space, params: ModelParameters,
             tables: DataTables, snapshot: StepSnapshot | None, current_year: int,
             rng: Rng, order) -> StepEventLog:
    """Apply all five events in the configured order (ageing first)."""
    log = StepEventLog()
    for name in order:
        if name == "ageing":
            ageing_step(store, space, rng, log)
        elif name == "deaths":
            deaths_step(store, space, params, rng, log)
        elif name == "births":
            births_step(store, space, params, tables, current_year, rng, log)
        elif name == "divorces":
            divorces_step(store, space, params, tables, snapshot, rng, log)
        elif name == "marriages":
            marriages_step(store, space, params, tables, snapshot, rng, log)
        else:
            raise ValueError(f"unknown event {name!r}")
    return log
