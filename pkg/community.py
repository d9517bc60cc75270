# community.py

import itertools
import logging
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Tuple

import networkx as nx
import pandas as pd

from bipartite_graph import FIRM, INSTITUTION, BipartiteCreditNetwork, as_graph, connected_components
from errors import ModularityError

GIRVAN_NEWMAN = 'girvan_newman'
GREEDY = 'greedy'


@dataclass
class Partition:
    assignment: Dict[str, int]
    method: Optional[str] = None

    @classmethod
    def from_communities(cls, communities: Iterable[Iterable], method: str = None) -> 'Partition':
        # Community ids follow the order of each community's smallest vertex.
        ordered = sorted((sorted(c) for c in communities if c), key=lambda c: c[0])
        assignment = {v: cid for cid, members in enumerate(ordered) for v in members}
        return cls(assignment=dict(sorted(assignment.items())), method=method)

    @property
    def n_communities(self) -> int:
        return len(set(self.assignment.values()))

    def communities(self) -> List[List]:
        groups = {}
        for vertex, cid in self.assignment.items():
            groups.setdefault(cid, []).append(vertex)
        return [sorted(groups[cid]) for cid in sorted(groups)]

    def same(self, u, v) -> bool:
        return self.assignment[u] == self.assignment[v]

    def sort_key(self) -> tuple:
        return tuple(self.assignment[v] for v in sorted(self.assignment))


@dataclass
class CommunitySummary:
    n_communities: int
    largest_share: float
    largest_size: int
    representative_institution_type: Optional[str]
    representative_industry: Optional[str]
    period: Optional[int] = None


def modularity(net, p: Partition) -> float:
    """
    Q = 1/2M * sum_ij [a_ij - k_i k_j / 2M] * delta(c_i, c_j) on the unweighted
    bipartite graph with the configuration null model.
    """
    graph = as_graph(net)
    if graph.number_of_edges() == 0:
        raise ModularityError("Modularity is undefined for a network without edges.")
    missing = [v for v in graph.nodes() if v not in p.assignment]
    if missing:
        raise ModularityError(f"Partition does not cover vertices {missing[:5]}.")
    return float(nx.community.modularity(graph, p.communities(), weight=None))


def _best(graph: nx.Graph, partitions: Iterable[Partition]) -> Tuple[Partition, float]:
    # Highest Q, then fewer communities, then the lexicographically smallest assignment.
    best, best_key = None, None
    for partition in partitions:
        q = modularity(graph, partition)
        key = (-round(q, 12), partition.n_communities, partition.sort_key())
        if best_key is None or key < best_key:
            best, best_key = (partition, q), key
    return best


def girvan_newman(net, max_splits: int = None) -> Tuple[Partition, float]:
    """
    Divisive Girvan-Newman: remove the edge of highest edge betweenness until the
    graph splits, record each split, return the recorded partition of highest Q.
    The intact component partition is the first record.
    """
    graph = as_graph(net)
    initial = Partition.from_communities(connected_components(graph), method=GIRVAN_NEWMAN)
    splits = nx.community.girvan_newman(graph)
    if max_splits is not None:
        splits = itertools.islice(splits, max_splits)
    recorded = itertools.chain([initial], (Partition.from_communities(s, method=GIRVAN_NEWMAN) for s in splits))
    return _best(graph, recorded)


def greedy(net) -> Tuple[Partition, float]:
    """Agglomerative Q maximisation (Clauset-Newman-Moore)."""
    graph = as_graph(net)
    communities = nx.community.greedy_modularity_communities(graph, weight=None)
    partition = Partition.from_communities(communities, method=GREEDY)
    return partition, modularity(graph, partition)


def detect_communities(net, method: str = 'auto', edge_threshold: int = 5000, max_splits: int = None) -> Tuple[Partition, float]:
    """
    Community detection on the bipartite network.

    Args:
        method (str): 'girvan_newman', 'greedy', or 'auto' (Girvan-Newman up to
            ``edge_threshold`` edges, greedy above it).
        max_splits (int): Optional cap on the number of Girvan-Newman splits examined.

    Returns:
        tuple: (Partition, Q). ``Partition.method`` records the detector used.
    """
    graph = as_graph(net)
    if graph.number_of_edges() == 0:
        raise ModularityError("Community detection needs at least one edge.")
    if method == 'auto':
        method = GIRVAN_NEWMAN if graph.number_of_edges() <= edge_threshold else GREEDY
        if method == GREEDY:
            logging.warning(f"{graph.number_of_edges()} edges exceed {edge_threshold}; using greedy modularity instead of Girvan-Newman.")
    if method == GIRVAN_NEWMAN:
        return girvan_newman(graph, max_splits=max_splits)
    if method == GREEDY:
        return greedy(graph)
    raise ValueError(f"Unknown community detection method {method}.")


def _representative(net: BipartiteCreditNetwork, members: set, side: str) -> Optional[str]:
    totals = {}
    for u, v, w in net.graph.subgraph(members).edges(data='weight'):
        vertex = u if net.side_of(u) == side else v
        label = net.label_of(vertex)
        totals[label] = totals.get(label, 0.0) + w
    if not totals:
        return None
    return min(totals, key=lambda label: (-totals[label], label))


def summarize_largest(net: BipartiteCreditNetwork, p: Partition) -> CommunitySummary:
    """
    Largest community by vertex count (ties: larger internal credit, then smaller
    smallest vertex id) and its representative lender type and borrower industry,
    i.e. the labels with the largest summed credit inside it.
    """
    communities = p.communities()
    if not communities:
        raise ModularityError("Cannot summarise an empty partition.")

    def internal_weight(members):
        return net.graph.subgraph(members).size(weight='weight')

    largest = min(communities, key=lambda c: (-len(c), -internal_weight(c), c[0]))
    members = set(largest)
    return CommunitySummary(
        n_communities=len(communities),
        largest_share=len(largest) / len(p.assignment),
        largest_size=len(largest),
        representative_institution_type=_representative(net, members, INSTITUTION),
        representative_industry=_representative(net, members, FIRM),
        period=net.period,
    )


def partition_frame(p: Partition, period: int = None) -> pd.DataFrame:
    frame = pd.DataFrame(sorted(p.assignment.items()), columns=['vertex', 'community'])
    frame.insert(1, 'period', period)
    return frame
