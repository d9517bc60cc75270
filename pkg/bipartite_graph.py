# bipartite_graph.py

import json
import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Sequence

import networkx as nx
import numpy as np
import pandas as pd

from errors import NetworkConstructionError, UnknownVertexError
from ingest import LoanRecord

INSTITUTION = 'institution'
FIRM = 'firm'


def _sorted_graph(graph: nx.Graph, weighted: bool = False) -> nx.Graph:
    # Rebuild with sorted insertion order so every downstream iteration is reproducible.
    result = nx.Graph()
    for node in sorted(graph.nodes()):
        result.add_node(node, **graph.nodes[node])
    edges = sorted(tuple(sorted((u, v))) for u, v in graph.edges())
    for u, v in edges:
        if weighted:
            result.add_edge(u, v, weight=graph.edges[u, v]['weight'])
        else:
            result.add_edge(u, v)
    return result


class BipartiteCreditNetwork:
    def __init__(self, period: int, graph: nx.Graph):
        """
        Two-mode credit network for one period.

        Args:
            period (int): Year the network describes.
            graph (nx.Graph): Nodes carry ``side`` (institution | firm), ``bipartite``
                (0 | 1) and ``label`` (lender type or borrower industry); edges carry
                ``weight``, the aggregated credit amount w_BF(i, j) > 0.
        """
        self.period = period
        self.graph = graph
        self.institutions = sorted(v for v, side in graph.nodes(data='side') if side == INSTITUTION)
        self.firms = sorted(v for v, side in graph.nodes(data='side') if side == FIRM)

    @property
    def M(self) -> int:
        return self.graph.number_of_edges()

    @property
    def total_weight(self) -> float:
        return float(sum(w for _, _, w in self.graph.edges(data='weight')))

    def side_of(self, vertex) -> str:
        if vertex not in self.graph:
            raise UnknownVertexError(f"Vertex {vertex} is not in the {self.period} network.")
        return self.graph.nodes[vertex]['side']

    def label_of(self, vertex) -> str:
        self.side_of(vertex)
        return self.graph.nodes[vertex]['label']

    def labels(self, side: str) -> Dict[str, str]:
        vertices = self.institutions if side == INSTITUTION else self.firms
        return {v: self.graph.nodes[v]['label'] for v in vertices}

    def weight(self, institution, firm) -> float:
        if self.graph.has_edge(institution, firm):
            return float(self.graph.edges[institution, firm]['weight'])
        return 0.0

    def adjacency(self) -> np.ndarray:
        """Unweighted a_BF as a dense |B| x |F| array (rows: institutions)."""
        return (self.weight_matrix() > 0).astype(float)

    def weight_matrix(self) -> np.ndarray:
        """Weighted w_BF as a dense |B| x |F| array (rows: institutions)."""
        if not self.institutions or not self.firms:
            return np.zeros((len(self.institutions), len(self.firms)))
        return nx.bipartite.biadjacency_matrix(
            self.graph, row_order=self.institutions, column_order=self.firms, weight='weight'
        ).toarray().astype(float)

    def edge_frame(self) -> pd.DataFrame:
        rows = []
        for u, v, w in self.graph.edges(data='weight'):
            institution, firm = (u, v) if self.graph.nodes[u]['side'] == INSTITUTION else (v, u)
            rows.append((institution, firm, float(w)))
        rows.sort()
        return pd.DataFrame(rows, columns=['institution', 'firm', 'weight'])

    def without(self, vertices: Iterable) -> 'BipartiteCreditNetwork':
        """Copy of the network with ``vertices`` and their incident edges removed."""
        graph = self.graph.copy()
        graph.remove_nodes_from(list(vertices))
        return BipartiteCreditNetwork(self.period, graph)

    def copy(self) -> 'BipartiteCreditNetwork':
        return BipartiteCreditNetwork(self.period, self.graph.copy())

    def summary(self) -> dict:
        return {
            'period': self.period,
            'institutions': len(self.institutions),
            'firms': len(self.firms),
            'edges': self.M,
            'total_weight': self.total_weight,
        }

    def __repr__(self):
        return f"BipartiteCreditNetwork(period={self.period}, |B|={len(self.institutions)}, |F|={len(self.firms)}, M={self.M})"


@dataclass
class ProjectedNetwork:
    side: str
    graph: nx.Graph
    period: int = None

    @property
    def vertices(self) -> List:
        return list(self.graph.nodes())

    @property
    def edges(self) -> List:
        return list(self.graph.edges())


@dataclass
class ShortestPathRow:
    source: object
    distance: Dict[object, float] = field(default_factory=dict)
    sigma: Dict[object, int] = field(default_factory=dict)


@dataclass
class DistanceMatrix:
    rows: Dict[object, ShortestPathRow]
    # Unreachable pairs are stored as inf; consumers apply their own convention.
    unreachable: str = 'inf'

    def d(self, i, j) -> float:
        return self.rows[i].distance[j]

    def sigma(self, i, j) -> int:
        return self.rows[i].sigma.get(j, 0)


def as_graph(g) -> nx.Graph:
    if isinstance(g, (BipartiteCreditNetwork, ProjectedNetwork)):
        return g.graph
    if isinstance(g, nx.Graph):
        return g
    raise TypeError(f"Expected a network or graph, got {type(g).__name__}.")


def build_bipartite(records: Sequence[LoanRecord], period: int = None) -> BipartiteCreditNetwork:
    """
    Build the two-mode network for one period, summing same-pair loans.

    Args:
        records (list): Preprocessed LoanRecords that share one period.
        period (int): Period for an empty record set.
    """
    periods = {r.period for r in records}
    if len(periods) > 1:
        raise NetworkConstructionError(f"Records span several periods: {sorted(periods)}.")
    if periods:
        period = periods.pop()

    lender_types, borrower_industries, weights = {}, {}, {}
    for record in records:
        lender_types.setdefault(record.lender_id, record.lender_type)
        borrower_industries.setdefault(record.borrower_id, record.borrower_industry)
        key = (record.lender_id, record.borrower_id)
        weights[key] = weights.get(key, 0.0) + float(record.amount)

    shared = set(lender_types) & set(borrower_industries)
    if shared:
        raise NetworkConstructionError(f"Ids used both as lender and borrower: {sorted(shared)[:5]}.")

    graph = nx.Graph()
    for vertex in sorted(lender_types):
        graph.add_node(vertex, side=INSTITUTION, bipartite=0, label=lender_types[vertex])
    for vertex in sorted(borrower_industries):
        graph.add_node(vertex, side=FIRM, bipartite=1, label=borrower_industries[vertex])
    for (institution, firm), weight in sorted(weights.items()):
        if weight > 0:
            graph.add_edge(institution, firm, weight=weight)

    network = BipartiteCreditNetwork(period, graph)
    logging.info(f"Built {network!r}.")
    return network


def build_networks(slices: Dict[int, Sequence[LoanRecord]]) -> Dict[int, BipartiteCreditNetwork]:
    return {period: build_bipartite(records, period) for period, records in slices.items()}


def _project(net: BipartiteCreditNetwork, side: str) -> ProjectedNetwork:
    nodes = net.institutions if side == INSTITUTION else net.firms
    projected = nx.bipartite.projected_graph(net.graph, nodes)
    return ProjectedNetwork(side=side, graph=_sorted_graph(projected), period=net.period)


def project_institutions(net: BipartiteCreditNetwork) -> ProjectedNetwork:
    """a_BB: institutions linked when they lent to at least one common firm."""
    return _project(net, INSTITUTION)


def project_firms(net: BipartiteCreditNetwork) -> ProjectedNetwork:
    """a_FF: firms linked when they borrowed from at least one common institution."""
    return _project(net, FIRM)


def connected_components(g) -> List[List]:
    """Components as sorted vertex lists, ordered by their smallest vertex id."""
    components = [sorted(c) for c in nx.connected_components(as_graph(g))]
    return sorted(components, key=lambda c: c[0])


def shortest_paths(g, source) -> ShortestPathRow:
    """
    Breadth-first hop distances and shortest-path counts from ``source``.
    Unreachable vertices get distance inf and sigma 0.
    """
    graph = as_graph(g)
    if source not in graph:
        raise UnknownVertexError(f"Source {source} is not in the graph.")
    predecessors, levels = nx.predecessor(graph, source, return_seen=True)

    sigma = {source: 1}
    for vertex in sorted(levels, key=levels.get):
        if vertex != source:
            sigma[vertex] = sum(sigma[p] for p in predecessors[vertex])

    distance = {v: float('inf') for v in graph.nodes()}
    distance.update({v: float(d) for v, d in levels.items()})
    for v in graph.nodes():
        sigma.setdefault(v, 0)
    return ShortestPathRow(source=source, distance=distance, sigma=sigma)


def distance_matrix(g) -> DistanceMatrix:
    graph = as_graph(g)
    return DistanceMatrix(rows={v: shortest_paths(graph, v) for v in graph.nodes()})


def write_edgelist(g, path) -> None:
    """'u v w' lines for a bipartite network, 'u v' lines for a projection."""
    if isinstance(g, BipartiteCreditNetwork):
        frame = g.edge_frame()
    else:
        edges = sorted(tuple(sorted(e)) for e in as_graph(g).edges())
        frame = pd.DataFrame(edges, columns=['u', 'v'])
    frame.to_csv(path, sep=' ', header=False, index=False, lineterminator='\n', float_format='%.12g')
    logging.info(f"Edge list written to {path}")


def write_summaries(networks: Dict[int, BipartiteCreditNetwork], path) -> None:
    with open(path, 'w', encoding='utf-8') as f:
        json.dump([networks[t].summary() for t in sorted(networks)], f, indent=2, sort_keys=True)
    logging.info(f"Network summaries written to {path}")
