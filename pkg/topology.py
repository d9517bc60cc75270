# topology.py

import logging
from dataclasses import asdict, dataclass
from multiprocessing import Pool
from typing import Dict, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
import pandas as pd
from scipy import stats

from bipartite_graph import FIRM, INSTITUTION, BipartiteCreditNetwork, as_graph, project_firms, project_institutions
from errors import UndefinedMetricError


@dataclass
class VertexMetrics:
    vertex: str
    side: str
    label: str
    degree: int
    strength: float
    relative_strength: float
    betweenness: Optional[float] = None
    closeness: Optional[float] = None
    local_clustering: Optional[float] = None
    isolated: bool = False


@dataclass
class GraphMetrics:
    global_clustering: float
    assortativity: Optional[float]
    assortativity_defined: bool
    edges: int
    vertices: int


# Degree, Strength and Relative Strength Calculation
def vertex_metrics(net: BipartiteCreditNetwork) -> Dict[str, VertexMetrics]:
    """
    Degree ND, strength NS and relative strength RNS of every vertex.

    RNS_Bi sums institution i's share of each borrower's total borrowing;
    RNS_Fj sums firm j's share of each lender's total lending.
    """
    weights = net.weight_matrix()
    adjacency = weights > 0
    lending = weights.sum(axis=1)
    borrowing = weights.sum(axis=0)

    with np.errstate(divide='ignore', invalid='ignore'):
        share_of_borrower = np.where(adjacency, weights / borrowing[np.newaxis, :], 0.0)
        share_of_lender = np.where(adjacency, weights / lending[:, np.newaxis], 0.0)

    metrics = {}
    for i, vertex in enumerate(net.institutions):
        degree = int(adjacency[i].sum())
        metrics[vertex] = VertexMetrics(
            vertex=vertex, side=INSTITUTION, label=net.label_of(vertex),
            degree=degree, strength=float(lending[i]),
            relative_strength=float(share_of_borrower[i].sum()), isolated=degree == 0,
        )
    for j, vertex in enumerate(net.firms):
        degree = int(adjacency[:, j].sum())
        metrics[vertex] = VertexMetrics(
            vertex=vertex, side=FIRM, label=net.label_of(vertex),
            degree=degree, strength=float(borrowing[j]),
            relative_strength=float(share_of_lender[:, j].sum()), isolated=degree == 0,
        )
    return metrics


def full_vertex_metrics(net: BipartiteCreditNetwork, processes: int = 1) -> Dict[str, VertexMetrics]:
    """vertex_metrics plus betweenness and closeness on the bipartite graph and
    local clustering on the vertex's own projection."""
    metrics = vertex_metrics(net)
    between = betweenness(net, processes=processes)
    close = closeness(net)
    local = {}
    for projection in (project_institutions(net), project_firms(net)):
        local.update(clustering(projection)[0])
    for vertex, m in metrics.items():
        m.betweenness = between[vertex]
        m.closeness = close[vertex]
        m.local_clustering = local.get(vertex, 0.0)
    return metrics


def metrics_frame(metrics: Dict[str, VertexMetrics], period: int = None) -> pd.DataFrame:
    frame = pd.DataFrame([asdict(m) for m in metrics.values()])
    if period is not None:
        frame.insert(0, 'period', period)
    return frame


# Pearson Correlation
def pearson(xs: Sequence[float], ys: Sequence[float]) -> float:
    return pearson_test(xs, ys)[0]


def pearson_test(xs: Sequence[float], ys: Sequence[float]) -> Tuple[float, float]:
    xs, ys = np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)
    if xs.shape != ys.shape or xs.size < 2:
        raise UndefinedMetricError("Pearson correlation needs two equal-length samples of size >= 2.")
    if np.std(xs) == 0 or np.std(ys) == 0:
        raise UndefinedMetricError("Pearson correlation is undefined for a zero-variance sample.")
    result = stats.pearsonr(xs, ys)
    return float(np.clip(result[0], -1.0, 1.0)), float(result[1])


def degree_strength_correlation(metrics: Dict[str, VertexMetrics], side: str) -> Tuple[float, float]:
    members = [m for m in metrics.values() if m.side == side and not m.isolated]
    return pearson_test([m.degree for m in members], [m.strength for m in members])


# Clustering Coefficient
def clustering(g) -> Tuple[Dict[str, float], float]:
    """Per-vertex CC_G(i) (0 when degree <= 1) and CC_G, the mean over all N vertices."""
    graph = as_graph(g)
    local = nx.clustering(graph)
    overall = float(np.mean(list(local.values()))) if local else 0.0
    return {v: float(c) for v, c in local.items()}, overall


# Degree Assortativity
def assortativity(g) -> float:
    """
    Degree assortativity r_G with each undirected edge contributing its endpoint
    degrees once:

        r = (<k_i k_j> - <(k_i + k_j)/2>^2) / (<(k_i^2 + k_j^2)/2> - <(k_i + k_j)/2>^2)
    """
    graph = as_graph(g)
    if graph.number_of_edges() == 0:
        raise UndefinedMetricError("Assortativity needs at least one edge.")
    degree = dict(graph.degree())
    ends = np.array([(degree[u], degree[v]) for u, v in graph.edges()], dtype=float)
    ki, kj = ends[:, 0], ends[:, 1]
    mean_half_sum = np.mean(0.5 * (ki + kj))
    numerator = np.mean(ki * kj) - mean_half_sum ** 2
    denominator = np.mean(0.5 * (ki ** 2 + kj ** 2)) - mean_half_sum ** 2
    if np.isclose(denominator, 0.0, atol=1e-12):
        raise UndefinedMetricError("Assortativity is undefined for a degree-regular graph.")
    return float(numerator / denominator)


# Betweenness Centrality
def _betweenness_chunk(graph: nx.Graph, sources: list) -> Dict[str, float]:
    return nx.betweenness_centrality_subset(graph, sources=sources, targets=list(graph.nodes()), normalized=False)


def betweenness(g, processes: int = 1) -> Dict[str, float]:
    """
    Unnormalised betweenness: sum over unordered pairs {i, j}, i, j != k, of
    sigma(i, k, j) / sigma(i, j). Unreachable pairs contribute 0.
    """
    graph = as_graph(g)
    if processes <= 1 or graph.number_of_nodes() < 2 * processes:
        return {v: float(b) for v, b in nx.betweenness_centrality(graph, normalized=False).items()}

    nodes = list(graph.nodes())
    chunks = [nodes[i::processes] for i in range(processes)]
    with Pool(processes=processes) as pool:
        partials = pool.starmap(_betweenness_chunk, [(graph, chunk) for chunk in chunks])
    totals = dict.fromkeys(nodes, 0.0)
    for partial in partials:
        for vertex, value in partial.items():
            totals[vertex] += value
    return totals


# Closeness Centrality
def closeness(g) -> Dict[str, float]:
    """
    Closeness_i = N / sum_j d_ij with d_ij = 0 for unreachable pairs.
    An isolated vertex (sum 0) gets 0; see isolated_vertices().
    """
    graph = as_graph(g)
    n = graph.number_of_nodes()
    result = {}
    for vertex in graph.nodes():
        total = sum(nx.single_source_shortest_path_length(graph, vertex).values())
        result[vertex] = n / total if total > 0 else 0.0
    return result


def isolated_vertices(g) -> set:
    return set(nx.isolates(as_graph(g)))


# Skewness
def skewness(values: Sequence[float]) -> float:
    values = np.asarray(values, dtype=float)
    if values.size < 3:
        raise UndefinedMetricError("Skewness needs at least three values.")
    if np.std(values) == 0:
        raise UndefinedMetricError("Skewness is undefined for a zero-variance sample.")
    return float(stats.skew(values, bias=False))


def graph_metrics(g) -> GraphMetrics:
    graph = as_graph(g)
    _, overall = clustering(graph)
    try:
        r = assortativity(graph)
        defined = True
    except UndefinedMetricError as e:
        logging.warning(f"Assortativity undefined: {e}")
        r, defined = None, False
    return GraphMetrics(
        global_clustering=overall,
        assortativity=r,
        assortativity_defined=defined,
        edges=graph.number_of_edges(),
        vertices=graph.number_of_nodes(),
    )


def rank_by_label(metrics: Dict[str, VertexMetrics], side: str, value: str = 'relative_strength', how: str = 'mean') -> pd.Series:
    """Aggregate a metric over vertices sharing a label, highest first."""
    if how not in ('mean', 'sum'):
        raise ValueError(f"Aggregation must be 'mean' or 'sum', got {how}.")
    frame = pd.DataFrame([asdict(m) for m in metrics.values() if m.side == side])
    if frame.empty:
        return pd.Series(dtype=float)
    grouped = frame.groupby('label')[value].agg(how)
    return grouped.sort_values(ascending=False, kind='mergesort')
