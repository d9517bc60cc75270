import json
from collections import Counter

import numpy as np
import pytest

import synth
from bipartite_graph import build_networks
from errors import SynthConfigError
from ingest import parse_loans, slice_periods, write_ledger
from powerlaw_fit import DISCRETE, fit_power_law
from synth import SynthConfig, generate


def small_config(**overrides):
    values = dict(n_institutions=30, n_firms=80, n_periods=3, first_period=2003, seed=42)
    values.update(overrides)
    return SynthConfig(**values)


def test_single_pair_gives_single_loan():
    records = generate(SynthConfig(n_institutions=1, n_firms=1, mean_degree=1.0, n_periods=1))
    assert len(records) == 1
    assert (records[0].lender_id, records[0].borrower_id) == ('B0001', 'F0001')
    assert records[0].amount >= 100.0


def test_ledger_is_byte_identical_for_equal_seeds(tmp_path):
    write_ledger(generate(small_config()), tmp_path / 'a.csv')
    write_ledger(generate(small_config()), tmp_path / 'b.csv')
    write_ledger(generate(small_config(seed=43)), tmp_path / 'c.csv')
    assert (tmp_path / 'a.csv').read_bytes() == (tmp_path / 'b.csv').read_bytes()
    assert (tmp_path / 'a.csv').read_bytes() != (tmp_path / 'c.csv').read_bytes()


def test_written_ledger_reads_back(tmp_path):
    records = generate(small_config())
    write_ledger(records, tmp_path / 'ledger.csv')
    parsed = parse_loans(tmp_path / 'ledger.csv')
    assert [(r.period, r.lender_id, r.borrower_id) for r in parsed] == [(r.period, r.lender_id, r.borrower_id) for r in records]
    assert [r.amount for r in parsed] == [r.amount for r in records]


def test_periods_do_not_depend_on_period_count():
    one = generate(small_config(n_periods=1))
    three = generate(small_config(n_periods=3))
    assert one == [r for r in three if r.period == 2003]


def test_stub_lists_balance():
    config = small_config()
    for seed in range(20):
        rng = np.random.default_rng(seed)
        institution_stubs, firm_stubs = synth.balanced_stubs(config, rng)
        assert institution_stubs.size == firm_stubs.size
        assert institution_stubs.size <= round(config.mean_degree * config.n_firms)
        edges = synth.match_stubs(rng, institution_stubs, firm_stubs)
        assert Counter(edges['institution']) == Counter(institution_stubs.tolist())
        assert Counter(edges['firm']) == Counter(firm_stubs.tolist())


def test_generated_networks_are_simple_with_fixed_labels():
    records = generate(small_config())
    pairs = Counter((r.period, r.lender_id, r.borrower_id) for r in records)
    assert max(pairs.values()) == 1
    lender_types = {}
    for r in records:
        assert lender_types.setdefault(r.lender_id, r.lender_type) == r.lender_type
        assert r.lender_type in synth.LENDER_TYPES
        assert r.borrower_industry in synth.INDUSTRIES
        assert r.amount >= 100.0
    networks = build_networks(slice_periods(records))
    assert sorted(networks) == [2003, 2004, 2005]


def test_truncated_degrees_stay_in_support():
    degrees = synth.truncated_power_law_degrees(np.random.default_rng(0), 5000, 2.0, 50)
    assert degrees.min() >= 1 and degrees.max() <= 50


@pytest.mark.parametrize('overrides', [
    {'mean_degree': 40.0},
    {'mean_degree': 0.0},
    {'firm_exponent': 1.0},
    {'n_firms': 0},
    {'n_periods': 0},
    {'weight_scale': -1.0},
    {'industry_weights': [1.0]},
    {'lender_type_weights': [-1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0]},
])
def test_infeasible_configs(overrides):
    with pytest.raises(SynthConfigError):
        small_config(**overrides)


def test_config_json(tmp_path):
    config = small_config()
    path = tmp_path / 'config.json'
    path.write_text(json.dumps(config.to_dict()), encoding='utf-8')
    assert SynthConfig.from_json(path) == config
    with pytest.raises(SynthConfigError):
        SynthConfig.from_dict({'n_banks': 3})


@pytest.mark.slow
def test_degree_exponents_are_recovered_at_full_size():
    config = SynthConfig(seed=3)
    networks = build_networks(slice_periods(generate(config)))
    assert len(networks) == 15
    for vertices, target in ((lambda net: net.institutions, 2.0), (lambda net: net.firms, 2.5)):
        alphas = []
        for net in networks.values():
            degrees = [net.graph.degree(v) for v in vertices(net)]
            alphas.append(fit_power_law(degrees, mode=DISCRETE).alpha)
        assert np.median(alphas) == pytest.approx(target, abs=0.25)


@pytest.mark.slow
def test_large_degree_tails_fit_closely():
    distances = []
    for seed in range(20):
        net = build_networks(slice_periods(generate(SynthConfig(n_periods=1, seed=seed))))[2000]
        degrees = [net.graph.degree(v) for v in net.firms]
        fit = fit_power_law(degrees, mode=DISCRETE, min_tail=1_000)
        assert fit.n_tail >= 1_000
        distances.append(fit.ks)
    assert np.mean(distances) < 0.1
