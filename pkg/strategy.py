from abc import ABC, abstractmethod
from typing import List

import numpy as np

from bipartite_graph import FIRM, INSTITUTION, BipartiteCreditNetwork
import crs


class AttackStrategy(ABC):
    name = None
    adaptive = False

    @abstractmethod
    def removal_order(self, net: BipartiteCreditNetwork, side: str) -> List[str]:
        """Vertices of ``side`` in the order they are deleted."""

    def next_target(self, net: BipartiteCreditNetwork, side: str) -> str:
        """Next vertex to delete from the current (already attacked) network."""
        return self.removal_order(net, side)[0]


def side_vertices(net: BipartiteCreditNetwork, side: str) -> List[str]:
    if side == INSTITUTION:
        return list(net.institutions)
    if side == FIRM:
        return list(net.firms)
    raise ValueError(f"Side must be '{INSTITUTION}' or '{FIRM}', got {side}.")


class CRSAttackStrategy(AttackStrategy):
    name = 'crs'

    def __init__(self, params: dict = None):
        self.params = params or {}
        self.adaptive = self.params.get('adaptive', False)  # Recompute CRS after every removal
        self.shock = self.params.get('shock', 1.0)

    def removal_order(self, net: BipartiteCreditNetwork, side: str) -> List[str]:
        # Descending CRS on the given network, ties by vertex id; isolated vertices last.
        ranked = [e.vertex for e in crs.crs_all(net, shock=self.shock) if e.side == side]
        ranked_set = set(ranked)
        rest = sorted(v for v in side_vertices(net, side) if v not in ranked_set)
        return ranked + rest


class RandomAttackStrategy(AttackStrategy):
    name = 'random'

    def __init__(self, params: dict = None):
        self.params = params or {}
        self.seed = self.params.get('seed', 0)

    def removal_order(self, net: BipartiteCreditNetwork, side: str) -> List[str]:
        # Uniform draws without replacement, fully determined by the seed.
        rng = np.random.default_rng(self.seed)
        vertices = side_vertices(net, side)
        return [vertices[i] for i in rng.permutation(len(vertices))]
