import json

import pandas as pd
import pytest

from main import parse_periods, run


@pytest.fixture
def synth_ledger(tmp_path):
    config = tmp_path / 'synth.json'
    config.write_text(json.dumps({'n_institutions': 25, 'n_firms': 60, 'n_periods': 3, 'first_period': 2003}), encoding='utf-8')
    assert run(['synth', '--config', str(config), '--seed', '7', '--out', str(tmp_path / 'synth')]) == 0
    return tmp_path / 'synth' / 'ledger.csv'


def test_parse_periods():
    assert parse_periods('2003') == (2003, 2003)
    assert parse_periods('2000:2014') == (2000, 2014)


def test_ingest_writes_ledger_and_exclusions(tmp_path, g0_csv):
    assert run(['ingest', '--in', str(g0_csv), '--out', str(tmp_path)]) == 0
    assert len(pd.read_csv(tmp_path / 'ledger.csv')) == 3
    assert json.loads((tmp_path / 'exclusions.json').read_text())['retained'] == 3


def test_build_writes_edge_lists(tmp_path, g0_csv):
    assert run(['build', '--in', str(g0_csv), '--out', str(tmp_path)]) == 0
    assert (tmp_path / 'bipartite_2003.txt').read_text() == "B1 F1 100\nB1 F2 50\nB2 F2 200\n"
    assert (tmp_path / 'institutions_2003.txt').read_text() == "B1 B2\n"


def test_metrics_on_g0(tmp_path, g0_csv):
    assert run(['metrics', '--in', str(g0_csv), '--out', str(tmp_path)]) == 0
    vertex_metrics = pd.read_csv(tmp_path / 'vertex_metrics.csv')
    assert len(vertex_metrics) == 4
    assert vertex_metrics.columns[0] == 'period'
    assert (tmp_path / 'label_rankings_sum.csv').exists()


def test_crs_on_g0_with_theta_schedule(tmp_path, g0_csv):
    theta = tmp_path / 'theta.csv'
    theta.write_text("period,entity,theta,capital\n2004,B2,0.2,10\n", encoding='utf-8')
    out = tmp_path / 'out'
    assert run(['crs', '--in', str(g0_csv), '--out', str(out), '--theta', str(theta)]) == 0
    ranking = pd.read_csv(out / 'crs.csv')
    assert list(ranking['vertex']) == ['F2', 'B2', 'B1', 'F1']
    assert ranking.loc[1, 'crs'] == pytest.approx(440 / 350, abs=1e-9)
    floors = pd.read_csv(out / 'capital_floors.csv')
    assert floors.loc[0, 'largest_credit_floor'] == pytest.approx(1000.0)


def test_attack_output_is_reproducible(tmp_path, g0_csv):
    outputs = []
    for name in ('first', 'second'):
        out = tmp_path / name
        argv = ['attack', '--in', str(g0_csv), '--out', str(out), '--strategy', 'random',
                '--fraction', '0.5', '--trials', '3', '--seed', '1']
        assert run(argv) == 0
        outputs.append(((out / 'attack_trace.csv').read_bytes(), (out / 'attack_table.csv').read_bytes()))
    assert outputs[0] == outputs[1]
    table = json.loads((tmp_path / 'first' / 'attack_table.json').read_text())
    assert set(table['2003']) == {'crs', 'random'}


def test_synth_then_crs(tmp_path, synth_ledger):
    assert json.loads((synth_ledger.parent / 'synth_config.json').read_text())['seed'] == 7
    out = tmp_path / 'crs'
    assert run(['crs', '--in', str(synth_ledger), '--out', str(out), '--periods', '2004:2005']) == 0
    ranking = pd.read_csv(out / 'crs.csv')
    assert sorted(ranking['period'].unique()) == [2004, 2005]
    assert (ranking['crs'] > 0).all()


def test_panel_and_report_on_synthetic_ledger(tmp_path, synth_ledger):
    out = tmp_path / 'panel'
    assert run(['panel', '--in', str(synth_ledger), '--out', str(out), '--subset-start', '2004']) == 0
    assert len(pd.read_csv(out / 'panel.csv')) > 0
    assert json.loads((out / 'regression_institution.json').read_text())[0]['label'] == 'base'
    assert run(['report', '--in', str(synth_ledger), '--out', str(tmp_path / 'report')]) == 0
    assert (tmp_path / 'report' / 'plot_series.csv').exists()


def test_run_config_supplies_defaults(tmp_path, g0_csv):
    config = tmp_path / 'run.json'
    config.write_text(json.dumps({'periods': '2003', 'shock': 0.5}), encoding='utf-8')
    assert run(['crs', '--in', str(g0_csv), '--out', str(tmp_path / 'out'), '--config', str(config)]) == 0
    ranking = pd.read_csv(tmp_path / 'out' / 'crs.csv')
    assert ranking.loc[ranking['vertex'] == 'B2', 'crs'].iloc[0] == pytest.approx(0.5 * 440 / 350, abs=1e-9)
    config.write_text(json.dumps({'colour': 'red'}), encoding='utf-8')
    assert run(['crs', '--in', str(g0_csv), '--out', str(tmp_path / 'out'), '--config', str(config)]) == 2


def test_usage_errors(tmp_path):
    assert run(['explode']) == 2
    assert run(['crs', '--out', str(tmp_path)]) == 1
    assert run(['crs', '--periods', '2005:2003']) == 2


def test_malformed_ledger_exits_with_one(tmp_path):
    ledger = tmp_path / 'bad.csv'
    ledger.write_text("period,lender\n2003,B1\n", encoding='utf-8')
    assert run(['crs', '--in', str(ledger), '--out', str(tmp_path / 'out')]) == 1
