# reports.py

import logging
from typing import Dict, List, Sequence

import numpy as np
import pandas as pd

import community
import crs
import topology
from bipartite_graph import FIRM, INSTITUTION, BipartiteCreditNetwork, project_firms, project_institutions
from errors import CreditNetworkError, UndefinedMetricError
from ingest import LoanRecord
from panel import fit_exponential_trend
from powerlaw_fit import CONTINUOUS, DISCRETE, fit_power_law

NATIONAL_PREFIXES = ('state-owned', 'policy', 'nationwide joint-stock')
SIDES = (INSTITUTION, FIRM)


def is_national(lender_type: str) -> bool:
    """Nationally-operated lenders: state-owned commercial, policy and nationwide joint-stock banks."""
    return lender_type.strip().lower().startswith(NATIONAL_PREFIXES)


# Relative Strength Ranking
def relative_strength_ranking(metrics: Dict[int, Dict[str, topology.VertexMetrics]],
                              how: Sequence[str] = ('mean', 'sum')) -> pd.DataFrame:
    """Top lender type and top borrower industry by relative strength per period."""
    rows = []
    for period in sorted(metrics):
        for aggregation in how:
            row = {'period': period, 'aggregation': aggregation}
            for side, prefix in ((INSTITUTION, 'institution'), (FIRM, 'firm')):
                ranking = topology.rank_by_label(metrics[period], side, how=aggregation)
                row[f'{prefix}_label'] = ranking.index[0] if len(ranking) else None
                row[f'{prefix}_rs'] = float(ranking.iloc[0]) if len(ranking) else np.nan
            rows.append(row)
    return pd.DataFrame(rows, columns=['period', 'aggregation', 'institution_label', 'institution_rs', 'firm_label', 'firm_rs'])


def label_rankings(metrics: Dict[int, Dict[str, topology.VertexMetrics]], how: str = 'mean') -> pd.DataFrame:
    rows = []
    for period in sorted(metrics):
        for side in SIDES:
            ranking = topology.rank_by_label(metrics[period], side, how=how)
            for rank, (label, value) in enumerate(ranking.items(), start=1):
                rows.append({'period': period, 'side': side, 'rank': rank, 'label': label, 'relative_strength': float(value)})
    return pd.DataFrame(rows, columns=['period', 'side', 'rank', 'label', 'relative_strength'])


# Projection Metrics
def projection_metrics_table(networks: Dict[int, BipartiteCreditNetwork]) -> pd.DataFrame:
    rows = []
    for period in sorted(networks):
        for projection in (project_institutions(networks[period]), project_firms(networks[period])):
            g = topology.graph_metrics(projection)
            rows.append({
                'period': period,
                'projection': projection.side,
                'vertices': g.vertices,
                'edges': g.edges,
                'clustering': g.global_clustering,
                'assortativity': g.assortativity if g.assortativity_defined else np.nan,
                'assortativity_defined': g.assortativity_defined,
            })
    return pd.DataFrame(rows)


# Degree-Strength Correlation
def correlation_table(metrics: Dict[int, Dict[str, topology.VertexMetrics]]) -> pd.DataFrame:
    """Pearson r and two-sided p-value of degree against strength per side, per period and pooled."""
    rows = []
    pooled = {side: ([], []) for side in SIDES}
    for period in sorted(metrics):
        for side in SIDES:
            members = [m for m in metrics[period].values() if m.side == side and not m.isolated]
            pooled[side][0].extend(m.degree for m in members)
            pooled[side][1].extend(m.strength for m in members)
            rows.append(_correlation_row(period, side, [m.degree for m in members], [m.strength for m in members]))
    for side in SIDES:
        rows.append(_correlation_row('pooled', side, *pooled[side]))
    return pd.DataFrame(rows, columns=['period', 'side', 'n', 'pearson_r', 'p_value'])


def _correlation_row(period, side, degrees, strengths) -> dict:
    try:
        r, p = topology.pearson_test(degrees, strengths)
    except UndefinedMetricError as e:
        logging.warning(f"Degree-strength correlation for {side} in {period} undefined: {e}")
        r, p = np.nan, np.nan
    return {'period': period, 'side': side, 'n': len(degrees), 'pearson_r': r, 'p_value': p}


# Power-Law Fits
def power_law_table(metrics: Dict[int, Dict[str, topology.VertexMetrics]], min_tail: int = 10,
                    bootstrap: int = 0, seed: int = 0) -> List[dict]:
    """
    Power-law fits of degree (discrete) and strength (continuous) per side and period.
    A period where no cutoff qualifies gets an entry with its error instead of a fit.
    """
    entries = []
    for period in sorted(metrics):
        for side in SIDES:
            members = [m for m in metrics[period].values() if m.side == side and not m.isolated]
            for quantity, mode in (('degree', DISCRETE), ('strength', CONTINUOUS)):
                entry = {'period': period, 'side': side, 'quantity': quantity}
                try:
                    fit = fit_power_law([getattr(m, quantity) for m in members], mode=mode,
                                        min_tail=min_tail, bootstrap=bootstrap, seed=seed)
                    entry.update(fit.to_dict())
                except CreditNetworkError as e:
                    entry['error'] = str(e)
                entries.append(entry)
    return entries


# Community Summaries
def community_table(networks: Dict[int, BipartiteCreditNetwork], method: str = 'auto', edge_threshold: int = 5000,
                    max_splits: int = None):
    """Per-period community count, largest community share and its representative labels."""
    rows, partitions = [], []
    for period in sorted(networks):
        net = networks[period]
        if net.M == 0:
            logging.warning(f"Period {period} has no edges; community detection skipped.")
            continue
        partition, q = community.detect_communities(net, method=method, edge_threshold=edge_threshold, max_splits=max_splits)
        summary = community.summarize_largest(net, partition)
        rows.append({
            'period': period,
            'method': partition.method,
            'modularity': q,
            'communities': summary.n_communities,
            'largest_share': summary.largest_share,
            'largest_size': summary.largest_size,
            'representative_institution_type': summary.representative_institution_type,
            'representative_industry': summary.representative_industry,
        })
        partitions.append(community.partition_frame(partition, period))
    frame = pd.concat(partitions, ignore_index=True) if partitions else pd.DataFrame(columns=['vertex', 'period', 'community'])
    return pd.DataFrame(rows), frame


# CRS Tables
def crs_rankings(networks: Dict[int, BipartiteCreditNetwork], shock=1.0) -> Dict[int, List[crs.CRSEntry]]:
    return {period: crs.crs_all(networks[period], shock=shock) for period in sorted(networks)}


def crs_ranking_frame(rankings: Dict[int, List[crs.CRSEntry]]) -> pd.DataFrame:
    frames = [crs.crs_frame(rankings[period], period) for period in sorted(rankings)]
    if not frames:
        return crs.crs_frame([], None)
    return pd.concat(frames, ignore_index=True)


def top_entities_table(rankings: Dict[int, List[crs.CRSEntry]]) -> pd.DataFrame:
    rows = []
    for period in sorted(rankings):
        for side in SIDES:
            entry = crs.top_entry(rankings[period], side)
            if entry is not None:
                rows.append({'period': period, 'side': side, 'vertex': entry.vertex, 'label': entry.label, 'crs': entry.crs})
    return pd.DataFrame(rows, columns=['period', 'side', 'vertex', 'label', 'crs'])


def group_crs_table(rankings: Dict[int, List[crs.CRSEntry]]) -> pd.DataFrame:
    """Mean CRS per lender type and per borrower industry, ranked within each period."""
    rows = []
    for period in sorted(rankings):
        for attribute in (crs.LENDER_TYPE, crs.BORROWER_INDUSTRY):
            means = crs.group_average_crs(rankings[period], attribute)
            for rank, (label, value) in enumerate(means.items(), start=1):
                rows.append({'period': period, 'attribute': attribute, 'rank': rank, 'label': label, 'mean_crs': value})
    return pd.DataFrame(rows, columns=['period', 'attribute', 'rank', 'label', 'mean_crs'])


def crs_skewness_table(rankings: Dict[int, List[crs.CRSEntry]]) -> pd.DataFrame:
    rows = []
    for period in sorted(rankings):
        for side in SIDES:
            values = [e.crs for e in rankings[period] if e.side == side]
            try:
                value = topology.skewness(values)
            except UndefinedMetricError as e:
                logging.warning(f"CRS skewness for {side} in {period} undefined: {e}")
                value = np.nan
            rows.append({'period': period, 'side': side, 'n': len(values), 'skewness': value})
    return pd.DataFrame(rows, columns=['period', 'side', 'n', 'skewness'])


def max_crs_trend(rankings: Dict[int, List[crs.CRSEntry]]) -> Dict[str, float]:
    """Exponential growth parameter of the per-period maximum CRS for each side (None below 3 periods)."""
    trends = {}
    for side in SIDES:
        series = {}
        for period in sorted(rankings):
            entry = crs.top_entry(rankings[period], side)
            if entry is not None:
                series[period] = entry.crs
        try:
            trends[side] = fit_exponential_trend(series)
        except CreditNetworkError as e:
            logging.warning(f"Maximum-CRS trend for {side} not fitted: {e}")
            trends[side] = None
    return trends


# National Credit Share
def national_share_table(slices: Dict[int, Sequence[LoanRecord]]) -> pd.DataFrame:
    """Share of loan records and of loan amount provided by nationally-operated lenders."""
    rows = []
    for period in sorted(slices):
        records = slices[period]
        national = [r for r in records if is_national(r.lender_type)]
        total_amount = sum(r.amount for r in records)
        rows.append({
            'period': period,
            'records': len(records),
            'national_records': len(national),
            'share_by_count': len(national) / len(records) if records else np.nan,
            'share_by_amount': sum(r.amount for r in national) / total_amount if total_amount else np.nan,
        })
    return pd.DataFrame(rows, columns=['period', 'records', 'national_records', 'share_by_count', 'share_by_amount'])


# Plot Series
def plot_series(networks: Dict[int, BipartiteCreditNetwork],
                metrics: Dict[int, Dict[str, topology.VertexMetrics]],
                rankings: Dict[int, List[crs.CRSEntry]],
                slices: Dict[int, Sequence[LoanRecord]],
                fits: List[dict] = None) -> pd.DataFrame:
    """One row per period with every figure-style series; plotting is left to the reader."""
    if not networks:
        return pd.DataFrame(columns=['period'])
    projections = projection_metrics_table(networks).set_index(['period', 'projection'])
    shares = national_share_table(slices).set_index('period')
    exponents = {}
    for entry in fits or []:
        if 'alpha' in entry:
            exponents[(entry['period'], entry['side'], entry['quantity'])] = entry['alpha']

    rows = []
    for period in sorted(networks):
        net = networks[period]
        row = {
            'period': period,
            'institutions': len(net.institutions),
            'firms': len(net.firms),
            'edges': net.M,
            'credit_amount': net.total_weight,
        }
        for side in SIDES:
            members = [m for m in metrics[period].values() if m.side == side]
            scores = [e.crs for e in rankings.get(period, []) if e.side == side]
            row[f'{side}_mean_degree'] = float(np.mean([m.degree for m in members])) if members else np.nan
            row[f'{side}_mean_strength'] = float(np.mean([m.strength for m in members])) if members else np.nan
            row[f'{side}_mean_relative_strength'] = float(np.mean([m.relative_strength for m in members])) if members else np.nan
            row[f'{side}_degree_alpha'] = exponents.get((period, side, 'degree'), np.nan)
            row[f'{side}_strength_alpha'] = exponents.get((period, side, 'strength'), np.nan)
            row[f'{side}_clustering'] = projections.loc[(period, side), 'clustering']
            row[f'{side}_assortativity'] = projections.loc[(period, side), 'assortativity']
            row[f'{side}_mean_crs'] = float(np.mean(scores)) if scores else np.nan
            row[f'{side}_max_crs'] = float(np.max(scores)) if scores else np.nan
        row['national_share_by_count'] = shares.loc[period, 'share_by_count'] if period in shares.index else np.nan
        row['national_share_by_amount'] = shares.loc[period, 'share_by_amount'] if period in shares.index else np.nan
        rows.append(row)
    return pd.DataFrame(rows)
