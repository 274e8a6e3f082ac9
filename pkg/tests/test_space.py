"""Town grid, density weights, distances, house allocation."""

import math

import numpy as np
import pytest

from conftest import housed
from gridpop.population import Gender, PopulationStore
from gridpop.space import (
    DEFAULT_DENSITY,
    GRID_COLS,
    GRID_ROWS,
    Space,
    load_density_map,
    manhattan_distance,
)
from gridpop.stochastics import make_rng


class TestDensityGrid:
    def test_dimensions_and_inhabitable_count(self, space):
        assert len(space.towns) == GRID_ROWS * GRID_COLS == 96
        assert len(space.inhabitable_towns) == 48

    def test_total_by_independent_summation(self, space):
        total = sum(v for row in DEFAULT_DENSITY for v in row)
        assert space.density_total == pytest.approx(total)
        assert total == pytest.approx(21.3)

    def test_values_in_unit_interval(self):
        assert all(0.0 <= v <= 1.0 for row in DEFAULT_DENSITY for v in row)

    def test_override_file_round_trip(self, tmp_path):
        path = tmp_path / "density.txt"
        path.write_text("\n".join(" ".join(str(v) for v in row) for row in DEFAULT_DENSITY))
        grid = load_density_map(path)
        assert np.array_equal(grid, np.asarray(DEFAULT_DENSITY))

    def test_override_file_errors(self, tmp_path):
        bad = tmp_path / "bad.txt"
        bad.write_text("0.1 0.2\n")
        with pytest.raises(ValueError):
            load_density_map(bad)
        bad.write_text("\n".join(" ".join("2.0" for _ in range(8)) for _ in range(12)))
        with pytest.raises(ValueError):
            load_density_map(bad)


class TestManhattanDistance:
    def test_same_town(self):
        assert manhattan_distance((5, 5), (5, 5)) == 0

    def test_corners(self):
        assert manhattan_distance((1, 1), (12, 8)) == 11 + 7 == 18

    def test_symmetric_over_all_inhabitable_pairs(self, space):
        for a in space.inhabitable_towns:
            for b in space.inhabitable_towns:
                assert manhattan_distance(a, b) == manhattan_distance(b, a)
                assert manhattan_distance(a, b) >= 0


class TestSampleTownWeighted:
    def test_single_nonzero_cell(self):
        grid = np.zeros((12, 8))
        grid[3, 2] = 0.7
        sp = Space(density=grid)
        rng = make_rng(1)
        assert all(sp.sample_town_weighted(rng) == (4, 3) for _ in range(200))

    def test_default_map_frequency(self, space):
        # Town (4,3) has density 1.0; expected frequency 1.0 / sum(all cells).
        rng = make_rng(42)
        n = 1_000_000
        total = sum(v for row in DEFAULT_DENSITY for v in row)
        p = 1.0 / total
        hits = sum(space.sample_town_weighted(rng) == (4, 3) for _ in range(n))
        sigma = math.sqrt(p * (1 - p) / n)
        assert abs(hits / n - p) < 3 * sigma

    def test_zero_density_never_drawn(self, space):
        rng = make_rng(43)
        zero_cells = {k for k, t in space.towns.items() if not t.inhabitable}
        assert (1, 1) in zero_cells
        for _ in range(100_000):
            assert space.sample_town_weighted(rng) not in zero_cells

    def test_all_zero_map_rejected(self):
        with pytest.raises(ValueError):
            Space(density=np.zeros((12, 8))).sample_town_weighted(make_rng(0))


class TestHouses:
    def test_reuses_existing_empty(self, rng):
        sp = Space()
        empties = [sp.new_house((4, 3), rng) for _ in range(3)]
        for _ in range(50):
            assert sp.find_or_create_empty_house((4, 3), rng) in empties
        assert sp.house_count == 3

    def test_uniform_among_empties(self):
        sp = Space()
        rng = make_rng(17)
        empties = [sp.new_house((4, 3), rng) for _ in range(3)]
        counts = {h: 0 for h in empties}
        n = 30_000
        for _ in range(n):
            counts[sp.find_or_create_empty_house((4, 3), rng)] += 1
        for h in empties:
            assert abs(counts[h] / n - 1 / 3) < 3 * math.sqrt((1 / 3) * (2 / 3) / n)

    def test_creates_when_none_empty(self, rng):
        sp = Space()
        store = PopulationStore(12)
        hid = sp.new_house((4, 3), rng)
        housed(store, sp, Gender.MALE, 30, house=hid, rng=rng)
        before = sp.house_count
        new = sp.find_or_create_empty_house((4, 3), rng)
        assert new != hid
        assert sp.house_count == before + 1

    def test_house_in_requested_town(self, rng):
        sp = Space()
        for _ in range(300):
            town = sp.sample_town_weighted(rng)
            hid = sp.find_or_create_empty_house(town, rng)
            assert sp.houses[hid].town == town
            assert 1 <= sp.houses[hid].local_x <= sp.town_grid_cells
            assert 1 <= sp.houses[hid].local_y <= sp.town_grid_cells

    def test_uninhabitable_town_rejected(self, rng):
        sp = Space()
        with pytest.raises(ValueError):
            sp.new_house((1, 1), rng)


class TestMovePerson:
    def test_occupancy_bijection_preserved(self, store, space, rng):
        pids = [housed(store, space, Gender.MALE, 30, rng=rng) for _ in range(10)]
        for pid in pids[:5]:
            space.move_person(store, pid, space.find_or_create_empty_house((4, 3), rng))
        total = sum(len(h.occupants) for h in space.houses.values())
        assert total == len(pids)

    def test_move_to_same_house_is_noop(self, store, space, rng):
        pid = housed(store, space, Gender.MALE, 30, rng=rng)
        house = store.persons[pid].house
        space.move_person(store, pid, house)
        assert store.persons[pid].house == house
        assert space.houses[house].occupants == {pid}

    def test_dead_person_rejected(self, store, space, rng):
        pid = housed(store, space, Gender.MALE, 30, rng=rng)
        store.kill(pid, space)
        with pytest.raises(ValueError):
            space.move_person(store, pid, space.find_or_create_empty_house((4, 3), rng))

    def test_house_count_monotone(self, store, space, rng):
        counts = []
        for _ in range(20):
            pid = housed(store, space, Gender.FEMALE, 25, rng=rng)
            store.kill(pid, space)
            counts.append(space.house_count)
        assert counts == sorted(counts)
