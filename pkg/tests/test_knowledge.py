"""Neighbor knowledge sets, sufficiency condition and peer discovery."""

import numpy as np
import pytest

from apgame.harness import ScenarioConfig, generate_topology
from apgame.knowledge import (
    DiscoveryState,
    KnowledgeBase,
    candidate_test,
    discovery_complete,
    discovery_tick,
    knowledge_snapshot_csv,
    nearest_cover_set,
    sufficiency_check,
)
from apgame.model import OFF, AccessPoint, AllocationState


def make_ap(i, x, y, radius=10.0, coord=40.0, channels=(0, 1)):
    return AccessPoint(
        id=i,
        position=(x, y),
        coverage_radius=radius,
        coordination_radius=coord,
        sinr_target=2.0,
        max_power=0.1,
        channels=frozenset(channels),
    )


def line_topology(xs, coord=40.0):
    return [make_ap(i, float(x), 0.0, coord=coord) for i, x in enumerate(xs)]


class TestCandidateTest:
    def test_overlap_geometry(self):
        a = make_ap(0, 0.0, 0.0, coord=40.0)
        assert candidate_test(a, make_ap(1, 79.0, 0.0, coord=40.0))
        assert not candidate_test(a, make_ap(2, 81.0, 0.0, coord=40.0))

    def test_colocated_pair(self):
        a = make_ap(0, 5.0, 5.0)
        b = make_ap(1, 5.0, 5.0)
        assert candidate_test(a, b)

    def test_self_comparison_rejected(self):
        a = make_ap(0, 0.0, 0.0)
        with pytest.raises(ValueError):
            candidate_test(a, a)


class TestNearestCoverSet:
    def test_all_off_is_empty(self):
        topo = line_topology([0, 10, 20])
        assert nearest_cover_set(0, topo, AllocationState.all_off(3)) == set()

    def test_two_nearest_cover_both_channels(self):
        # others at distances 10/20/30 on channels 0/1/0
        topo = line_topology([0, 10, 20, 30])
        state = AllocationState(
            np.array([OFF, 0, 1, 0]), np.array([0.0, 0.01, 0.01, 0.01])
        )
        assert nearest_cover_set(0, topo, state) == {1, 2}

    def test_matches_bruteforce_prefix_scan(self):
        rng = np.random.default_rng(2)
        cfg = ScenarioConfig(num_aps=20, num_channels=4, area_width=300.0,
                             area_height=300.0, seed=2)
        topo, _ = generate_topology(cfg, rng)
        channels = rng.integers(0, 4, size=20).astype(np.int64)
        powers = rng.uniform(0.001, 0.1, size=20)
        powers[rng.integers(20)] = 0.0
        channels[powers == 0.0] = OFF
        state = AllocationState(channels, powers)
        for i in range(20):
            got = nearest_cover_set(i, topo, state)
            # oracle: scan every prefix of the distance-sorted order and take
            # the first whose active members use all busy channels
            busy = {
                int(channels[j]) for j in range(20)
                if j != i and powers[j] > 0 and channels[j] != OFF
            }
            order = sorted(
                (j for j in range(20) if j != i),
                key=lambda j: np.hypot(
                    topo[i].position[0] - topo[j].position[0],
                    topo[i].position[1] - topo[j].position[1],
                ),
            )
            expect = set()
            if busy:
                seen = set()
                for j in order:
                    expect.add(j)
                    if powers[j] > 0:
                        seen.add(int(channels[j]))
                    if busy <= seen:
                        break
            assert got == expect


class TestSufficiency:
    def test_full_knowledge_is_sufficient(self):
        topo = line_topology([0, 10, 20])
        state = AllocationState(np.array([0, 1, 0]), np.array([0.01] * 3))
        kb = KnowledgeBase(
            known=[{1, 2}, {0, 2}, {0, 1}],
            candidates=[{1, 2}, {0, 2}, {0, 1}],
        )
        assert all(sufficiency_check(i, kb, topo, state) for i in range(3))

    def test_empty_knowledge_with_transmitters_fails(self):
        topo = line_topology([0, 10, 20])
        state = AllocationState(np.array([0, 1, 0]), np.array([0.01] * 3))
        kb = KnowledgeBase(known=[set(), set(), set()],
                           candidates=[{1, 2}, {0, 2}, {0, 1}])
        assert not sufficiency_check(0, kb, topo, state)

    def test_completed_discovery_is_mostly_sufficient_when_dense(self):
        # dense enough that the nearest user of every busy channel sits
        # inside coordination range for nearly every AP
        hits = total = 0
        for seed in range(20):
            rng = np.random.default_rng((31, seed))
            cfg = ScenarioConfig(num_aps=100, num_channels=3, area_width=300.0,
                                 area_height=300.0, seed=31)
            topo, _ = generate_topology(cfg, rng)
            kb = KnowledgeBase.complete(topo)
            channels = rng.integers(0, 3, size=100).astype(np.int64)
            state = AllocationState(channels, np.full(100, 0.01))
            hits += sum(sufficiency_check(i, kb, topo, state) for i in range(100))
            total += 100
        assert hits / total >= 0.95


class TestDiscovery:
    def test_single_ap_never_changes(self):
        topo = [make_ap(0, 0.0, 0.0)]
        kb = KnowledgeBase.from_topology(topo)
        ds = DiscoveryState(rng=np.random.default_rng(0))
        for _ in range(5):
            discovery_tick(ds, kb, topo)
        assert kb.known == [set()]
        assert ds.tick == 5

    def test_two_candidates_meet_quickly_and_symmetrically(self):
        ticks_needed = []
        for seed in range(50):
            topo = line_topology([0, 30])
            kb = KnowledgeBase.from_topology(topo)
            ds = DiscoveryState(rng=np.random.default_rng(seed))
            while not discovery_complete(kb, topo)[0]:
                discovery_tick(ds, kb, topo)
            assert kb.known[0] == {1} and kb.known[1] == {0}
            ticks_needed.append(ds.tick)
        # with two nodes the only possible probe is the peer: one tick
        assert max(ticks_needed) == 1

    def test_knowledge_monotone_and_sound(self):
        rng = np.random.default_rng(4)
        cfg = ScenarioConfig(num_aps=40, num_channels=3, area_width=300.0,
                             area_height=300.0, seed=4)
        topo, _ = generate_topology(cfg, rng)
        kb = KnowledgeBase.from_topology(topo)
        ds = DiscoveryState(rng=rng)
        prev = [set() for _ in range(40)]
        for _ in range(30):
            discovery_tick(ds, kb, topo)
            for i in range(40):
                assert prev[i] <= kb.known[i]          # never shrinks
                assert kb.known[i] <= kb.candidates[i]  # soundness
                prev[i] = set(kb.known[i])

    def test_deterministic_given_seed(self):
        def run(seed):
            rng = np.random.default_rng(seed)
            cfg = ScenarioConfig(num_aps=30, num_channels=3, area_width=250.0,
                                 area_height=250.0, seed=seed)
            topo, _ = generate_topology(cfg, np.random.default_rng(7))
            kb = KnowledgeBase.from_topology(topo)
            ds = DiscoveryState(rng=rng)
            for _ in range(40):
                discovery_tick(ds, kb, topo)
            return kb.known, ds.exchange_log

        known_a, log_a = run(123)
        known_b, log_b = run(123)
        assert known_a == known_b and log_a == log_b

    def test_completion_reached_and_counts_drop(self):
        rng = np.random.default_rng(5)
        cfg = ScenarioConfig(num_aps=50, num_channels=3, seed=5)
        topo, _ = generate_topology(cfg, rng)
        kb = KnowledgeBase.from_topology(topo)
        ds = DiscoveryState(rng=rng)
        counts = []
        while not discovery_complete(kb, topo)[0]:
            discovery_tick(ds, kb, topo)
            counts.append(discovery_complete(kb, topo)[1])
            assert ds.tick < 10_000
        assert counts[-1] == 0
        assert all(a >= b for a, b in zip(counts, counts[1:]))

    def test_isolated_ap_never_counts_as_missing(self):
        topo = line_topology([0, 30, 5000])  # third AP has no candidates
        kb = KnowledgeBase.from_topology(topo)
        assert kb.candidates[2] == set()
        complete, missing = discovery_complete(kb, topo)
        assert not complete and missing == 2  # only the near pair is missing
        kb.known[0].add(1)
        kb.known[1].add(0)
        assert discovery_complete(kb, topo) == (True, 0)

    def test_active_subset_restricts_sampling(self):
        topo = line_topology([0, 20, 40])
        kb = KnowledgeBase.from_topology(topo)
        ds = DiscoveryState(rng=np.random.default_rng(0))
        for _ in range(30):
            discovery_tick(ds, kb, topo, active={0, 1})
        assert 2 not in kb.known[0] and 2 not in kb.known[1]
        assert kb.known[2] == set()

    def test_snapshot_csv_format(self, tmp_path):
        topo = line_topology([0, 30])
        kb = KnowledgeBase.complete(topo)
        state = AllocationState(np.array([0, 1]), np.array([0.01, 0.01]))
        out = tmp_path / "snap.csv"
        knowledge_snapshot_csv(kb, topo, state, out)
        lines = out.read_text().splitlines()
        assert lines[0] == "ap_id,known_count,candidate_count,sufficient_flag"
        assert lines[1] == "0,1,1,1"
        assert len(lines) == 3
