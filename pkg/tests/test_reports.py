import math

import pytest

import reports
import topology
from bipartite_graph import FIRM, INSTITUTION
from conftest import loan, random_network
from synth import LENDER_TYPES


@pytest.fixture
def g0_metrics(g0):
    return {2003: topology.vertex_metrics(g0)}


def test_national_lenders():
    assert [t for t in LENDER_TYPES if reports.is_national(t)] == [
        'state-owned commercial bank', 'policy bank', 'nationwide joint-stock bank']
    assert reports.is_national(' Policy ')
    assert not reports.is_national('urban commercial bank')


def test_relative_strength_ranking(g0_metrics):
    table = reports.relative_strength_ranking(g0_metrics).set_index('aggregation')
    assert table.loc['mean', 'institution_label'] == 'state-owned'
    assert table.loc['mean', 'institution_rs'] == pytest.approx(1.2)
    assert table.loc['sum', 'firm_label'] == 'cement'
    assert table.loc['sum', 'firm_rs'] == pytest.approx(4 / 3)


def test_label_rankings(g0_metrics):
    table = reports.label_rankings(g0_metrics, how='mean')
    firms = table[table['side'] == FIRM]
    assert list(firms['label']) == ['cement', 'real-estate']
    assert list(firms['rank']) == [1, 2]


def test_correlation_table(g0_metrics):
    table = reports.correlation_table(g0_metrics)
    assert len(table) == 4
    row = table[(table['period'] == 2003) & (table['side'] == INSTITUTION)].iloc[0]
    assert row['pearson_r'] == pytest.approx(-1.0)
    assert row['n'] == 2
    pooled = table[table['period'] == 'pooled']
    assert set(pooled['side']) == {INSTITUTION, FIRM}


def test_power_law_table_reports_unfittable_periods(g0_metrics):
    entries = reports.power_law_table(g0_metrics)
    assert len(entries) == 4
    assert all('error' in e and 'alpha' not in e for e in entries)


def test_community_table(g0):
    summary, partitions = reports.community_table({2003: g0})
    assert list(summary['period']) == [2003]
    assert summary.loc[0, 'communities'] >= 1
    assert sorted(partitions['vertex']) == ['B1', 'B2', 'F1', 'F2']


def test_crs_tables_for_g0(g0):
    rankings = reports.crs_rankings({2003: g0})
    top = reports.top_entities_table(rankings).set_index('side')
    assert top.loc[INSTITUTION, 'vertex'] == 'B2'
    assert top.loc[FIRM, 'vertex'] == 'F2'
    groups = reports.group_crs_table(rankings)
    assert list(groups.loc[groups['attribute'] == 'lender_type', 'label']) == ['policy', 'state-owned']
    skew = reports.crs_skewness_table(rankings)
    assert skew['skewness'].isna().all()
    assert reports.max_crs_trend(rankings) == {INSTITUTION: None, FIRM: None}
    assert len(reports.crs_ranking_frame(rankings)) == 4


def test_max_crs_trend_over_three_periods():
    networks = {period: random_network(period, 8, 8, p=0.3, period=period) for period in (2003, 2004, 2005)}
    trends = reports.max_crs_trend(reports.crs_rankings(networks))
    assert all(isinstance(value, float) for value in trends.values())


def test_national_share_table(g0_records):
    records = g0_records + [loan('B3', 'F1', 50.0, lender_type='urban commercial bank')]
    table = reports.national_share_table({2003: records})
    assert table.loc[0, 'national_records'] == 3
    assert table.loc[0, 'share_by_count'] == pytest.approx(0.75)
    assert table.loc[0, 'share_by_amount'] == pytest.approx(350 / 400)


def test_plot_series_for_g0(g0, g0_records, g0_metrics):
    rankings = reports.crs_rankings({2003: g0})
    series = reports.plot_series({2003: g0}, g0_metrics, rankings, {2003: g0_records})
    row = series.iloc[0]
    assert (row['institutions'], row['firms'], row['edges']) == (2, 2, 3)
    assert row['institution_mean_degree'] == pytest.approx(1.5)
    assert row['institution_max_crs'] == pytest.approx(440 / 350)
    assert row['national_share_by_count'] == 1.0
    assert math.isnan(row['institution_degree_alpha'])
    assert reports.plot_series({}, {}, {}, {}).columns.tolist() == ['period']
