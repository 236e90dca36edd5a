"""Neighbor knowledge sets and the simulated peer-discovery mechanism.

Each AP accumulates a known set of candidate neighbors by random sampling of
the network plus transitive gossip: when two candidates meet they exchange
their current known lists and keep whatever passes the candidate test. One
tick models one second of protocol time.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model import OFF, AccessPoint, AllocationState, distance


def candidate_test(i: AccessPoint, j: AccessPoint) -> bool:
    """True iff the coordination areas of the two APs overlap."""
    if i.id == j.id:
        raise ValueError("candidate_test requires two distinct APs")
    return distance(i, j) < i.coordination_radius + j.coordination_radius


@dataclass
class KnowledgeBase:
    """Per-AP known neighbor sets plus the ground-truth candidate sets.

    ``known[i]`` only ever contains candidates of i (soundness) and never
    shrinks. Peer metadata (position, radius, current channel) is read from
    the shared topology and allocation state: channel updates are pushed
    instantly once a neighbor is known.
    """

    known: list[set[int]]
    candidates: list[set[int]]

    @classmethod
    def from_topology(cls, topology: list[AccessPoint]) -> "KnowledgeBase":
        n = len(topology)
        candidates: list[set[int]] = [set() for _ in range(n)]
        for i in range(n):
            for j in range(i + 1, n):
                if candidate_test(topology[i], topology[j]):
                    candidates[i].add(j)
                    candidates[j].add(i)
        return cls(known=[set() for _ in range(n)], candidates=candidates)

    @classmethod
    def complete(cls, topology: list[AccessPoint]) -> "KnowledgeBase":
        """Knowledge as if discovery had already finished."""
        kb = cls.from_topology(topology)
        kb.known = [set(c) for c in kb.candidates]
        return kb


@dataclass
class DiscoveryState:
    """Tick counter plus the seeded sampling stream and contact log."""

    rng: np.random.Generator
    samples_per_tick: int = 1
    tick: int = 0
    exchange_log: list[tuple[int, int, int]] = field(default_factory=list)


def nearest_cover_set(
    i: int,
    topology: list[AccessPoint],
    state: AllocationState,
) -> set[int]:
    """Smallest distance-prefix of other APs jointly using every busy channel.

    A channel counts as busy when some other AP transmits on it; channels
    unused by everyone else impose no requirement. Returns the prefix as a
    set of AP ids (possibly empty).
    """
    needed = {
        int(state.channels[j])
        for j in range(len(topology))
        if j != i and state.channels[j] != OFF and state.powers[j] > 0
    }
    if not needed:
        return set()
    order = sorted(
        (j for j in range(len(topology)) if j != i),
        key=lambda j: (distance(topology[i], topology[j]), j),
    )
    prefix: set[int] = set()
    for j in order:
        prefix.add(j)
        if state.powers[j] > 0:
            needed.discard(int(state.channels[j]))
        if not needed:
            return prefix
    return prefix


def sufficiency_check(
    i: int,
    knowledge: KnowledgeBase,
    topology: list[AccessPoint],
    state: AllocationState,
) -> bool:
    """True iff i already knows its nearest channel-covering neighbor set."""
    return nearest_cover_set(i, topology, state) <= knowledge.known[i]


def _learn(kb: KnowledgeBase, topology: list[AccessPoint], owner: int, peer: int) -> None:
    if candidate_test(topology[owner], topology[peer]):
        kb.known[owner].add(peer)


def discovery_tick(
    dstate: DiscoveryState,
    knowledge: KnowledgeBase,
    topology: list[AccessPoint],
    active: set[int] | None = None,
) -> KnowledgeBase:
    """One second of sampling: every active AP probes random peers.

    A probe that hits a candidate makes the pair mutually known and triggers
    an exchange of their current known lists; received entries are kept when
    they pass the candidate test.
    """
    ids = sorted(active) if active is not None else list(range(len(topology)))
    n = len(ids)
    if n > 1:
        rng = dstate.rng
        for pos, i in enumerate(ids):
            for _ in range(dstate.samples_per_tick):
                draw = int(rng.integers(n - 1))
                j = ids[draw if draw < pos else draw + 1]
                if not candidate_test(topology[i], topology[j]):
                    continue
                knowledge.known[i].add(j)
                knowledge.known[j].add(i)
                dstate.exchange_log.append((dstate.tick, i, j))
                for c in list(knowledge.known[j]):
                    if c != i:
                        _learn(knowledge, topology, i, c)
                for c in list(knowledge.known[i]):
                    if c != j:
                        _learn(knowledge, topology, j, c)
    dstate.tick += 1
    return knowledge


def discovery_complete(
    knowledge: KnowledgeBase,
    topology: list[AccessPoint],
    active: set[int] | None = None,
) -> tuple[bool, int]:
    """Whether every AP knows all its candidates, plus the count still missing.

    APs without candidates never count as missing.
    """
    ids = sorted(active) if active is not None else range(len(topology))
    active_set = set(ids)
    missing = 0
    for i in ids:
        wanted = knowledge.candidates[i] & active_set
        if not wanted <= knowledge.known[i]:
            missing += 1
    return missing == 0, missing


def knowledge_snapshot_csv(
    knowledge: KnowledgeBase,
    topology: list[AccessPoint],
    state: AllocationState,
    path: str | Path,
) -> None:
    """Dump one row per AP: id, known count, candidate count, sufficiency flag."""
    lines = ["ap_id,known_count,candidate_count,sufficient_flag"]
    for i in range(len(topology)):
        flag = int(sufficiency_check(i, knowledge, topology, state))
        lines.append(f"{i},{len(knowledge.known[i])},{len(knowledge.candidates[i])},{flag}")
    Path(path).write_text("\n".join(lines) + "\n")
