# robustness.py

import math
import logging
from dataclasses import dataclass, field
from multiprocessing import Pool
from typing import Dict, List

import igraph
import networkx as nx
import numpy as np
import pandas as pd

from bipartite_graph import BipartiteCreditNetwork, as_graph
from strategy import AttackStrategy, CRSAttackStrategy, RandomAttackStrategy, side_vertices

METRICS = ['slcs', 'nc', 'gd', 'apl']


@dataclass
class ConnectivitySnapshot:
    slcs: int
    nc: int
    gd: float
    apl: float
    has_pairs: bool = True


@dataclass
class AttackTrace:
    strategy: str
    side: str
    removed: List[str] = field(default_factory=list)
    snapshots: List[ConnectivitySnapshot] = field(default_factory=list)
    percent_change: Dict[str, float] = field(default_factory=dict)

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for step, snapshot in enumerate(self.snapshots):
            rows.append({
                'strategy': self.strategy,
                'step': step,
                'removed': self.removed[step - 1] if step > 0 else '',
                **{m: getattr(snapshot, m) for m in METRICS},
            })
        return pd.DataFrame(rows, columns=['strategy', 'step', 'removed'] + METRICS)


def _to_igraph(graph: nx.Graph) -> igraph.Graph:
    index = {v: i for i, v in enumerate(graph.nodes())}
    return igraph.Graph(n=len(index), edges=[(index[u], index[v]) for u, v in graph.edges()])


def connectivity(g) -> ConnectivitySnapshot:
    """
    SLCS (largest component size), NC (component count), GD (edge density) and
    APL (mean hop distance over reachable unordered pairs).

    GD is M / (|B| |F|) for a bipartite network and 2m / (n (n - 1)) otherwise.
    Without any reachable pair APL is reported as 0 with ``has_pairs`` False.
    """
    graph = as_graph(g)
    n = graph.number_of_nodes()
    if n == 0:
        return ConnectivitySnapshot(slcs=0, nc=0, gd=0.0, apl=0.0, has_pairs=False)

    mirror = _to_igraph(graph)
    sizes = mirror.connected_components().sizes()
    slcs, nc = int(max(sizes)), len(sizes)

    m = graph.number_of_edges()
    if isinstance(g, BipartiteCreditNetwork):
        cells = len(g.institutions) * len(g.firms)
    else:
        cells = n * (n - 1) / 2
    gd = m / cells if cells else 0.0

    if m == 0:
        return ConnectivitySnapshot(slcs=slcs, nc=nc, gd=float(gd), apl=0.0, has_pairs=False)
    # Breadth-first from every vertex in C; unreachable pairs are left out of the mean.
    apl = mirror.average_path_length(directed=False, unconn=True)
    return ConnectivitySnapshot(slcs=slcs, nc=nc, gd=float(gd), apl=float(apl))


def percent_change(baseline: ConnectivitySnapshot, final: ConnectivitySnapshot) -> Dict[str, float]:
    # (baseline - final) / baseline: losses are positive, growth is negative.
    result = {}
    for metric in METRICS:
        before, after = getattr(baseline, metric), getattr(final, metric)
        result[metric] = 100.0 * (before - after) / before if before else 0.0
    return result


def make_strategy(name: str, seed: int = 0, adaptive: bool = False, shock: float = 1.0) -> AttackStrategy:
    if name == 'crs':
        return CRSAttackStrategy(params={'adaptive': adaptive, 'shock': shock})
    if name == 'random':
        return RandomAttackStrategy(params={'seed': seed})
    raise ValueError(f"Unknown attack strategy {name}.")


class AttackSimulator:
    def __init__(self, net: BipartiteCreditNetwork, side: str, strategy: AttackStrategy, fraction: float = 0.05):
        """
        Delete vertices of one side one at a time and record connectivity.

        Args:
            net (BipartiteCreditNetwork): Intact network; it is never modified.
            side (str): 'institution' or 'firm'.
            strategy (AttackStrategy): Removal order.
            fraction (float): Share of the side to delete, in (0, 1].
        """
        if not 0.0 < fraction <= 1.0:
            raise ValueError(f"Attack fraction must lie in (0, 1], got {fraction}.")
        if not side_vertices(net, side):
            raise ValueError(f"The {side} side of the {net.period} network is empty.")
        self.net = net
        self.side = side
        self.strategy = strategy
        self.fraction = fraction
        self.n_remove = math.ceil(fraction * len(side_vertices(net, side)))

    def run_attack(self) -> AttackTrace:
        logging.info(f"Running {self.strategy.name} attack on {self.n_remove} {self.side} vertices of {self.net.period}.")
        working = self.net.copy()
        trace = AttackTrace(strategy=self.strategy.name, side=self.side)
        trace.snapshots.append(connectivity(working))

        order = None if self.strategy.adaptive else self.strategy.removal_order(self.net, self.side)
        for step in range(self.n_remove):
            target = self.strategy.next_target(working, self.side) if self.strategy.adaptive else order[step]
            working.graph.remove_node(target)
            working = BipartiteCreditNetwork(working.period, working.graph)
            trace.removed.append(target)
            trace.snapshots.append(connectivity(working))

        trace.percent_change = percent_change(trace.snapshots[0], trace.snapshots[-1])
        return trace


def attack(net: BipartiteCreditNetwork, side: str, strategy: str = 'crs', fraction: float = 0.05,
           seed: int = 0, adaptive: bool = False, shock: float = 1.0) -> AttackTrace:
    return AttackSimulator(net, side, make_strategy(strategy, seed=seed, adaptive=adaptive, shock=shock), fraction).run_attack()


def _run_trial(args) -> Dict[str, float]:
    net, side, strategy, fraction, seed, adaptive, shock = args
    return attack(net, side, strategy, fraction, seed=seed, adaptive=adaptive, shock=shock).percent_change


def compare_strategies(net: BipartiteCreditNetwork, side: str, fraction: float = 0.05, n_random_trials: int = 20,
                       seed: int = 0, adaptive: bool = False, shock: float = 1.0, processes: int = 1) -> pd.DataFrame:
    """
    Mean percent change of each connectivity index under the CRS attack and under
    random attacks (trial t uses seed + t).

    Returns:
        pd.DataFrame: Rows 'crs' and 'random', columns slcs, nc, gd, apl, plus the
        standard error of the random mean per index (``<metric>_se``).
    """
    if n_random_trials < 1:
        raise ValueError("At least one random trial is required.")
    jobs = [(net, side, 'crs', fraction, seed, adaptive, shock)]
    jobs += [(net, side, 'random', fraction, seed + t, False, shock) for t in range(n_random_trials)]

    if processes > 1:
        with Pool(processes=processes) as pool:
            results = pool.map(_run_trial, jobs)
    else:
        results = [_run_trial(job) for job in jobs]

    crs_row = results[0]
    random_frame = pd.DataFrame(results[1:], columns=METRICS)
    random_row = random_frame.mean().to_dict()
    table = pd.DataFrame([crs_row, random_row], index=['crs', 'random'], columns=METRICS)
    standard_errors = (random_frame.std(ddof=1) / np.sqrt(n_random_trials)).fillna(0.0) if n_random_trials > 1 else pd.Series(0.0, index=METRICS)
    for metric in METRICS:
        table[f'{metric}_se'] = [0.0, float(standard_errors[metric])]
    table.index.name = 'strategy'
    return table
