# main.py

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import pandas as pd

import reports
import topology
from bipartite_graph import FIRM, INSTITUTION, build_networks, project_firms, project_institutions, write_edgelist, write_summaries
from crs import CapitalPolicy
from ingest import LedgerManager, write_ledger
from panel import build_panel, regression_table, render_table, table_json
from robustness import attack, compare_strategies
from synth import SynthConfig, generate

LOG_FORMAT = '%(asctime)s - %(levelname)s - %(message)s'
SIDE_CHOICES = {'institutions': INSTITUTION, 'institution': INSTITUTION, 'firms': FIRM, 'firm': FIRM}


def setup_logging(verbose: bool = False, quiet: bool = False) -> None:
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr, force=True)


def parse_periods(text: str):
    """'2003' or '2000:2014' (inclusive) -> (first, last)."""
    first, _, last = text.partition(':')
    try:
        window = (int(first), int(last or first))
    except ValueError:
        raise argparse.ArgumentTypeError(f"Invalid period range {text!r}; use YYYY or YYYY:YYYY.")
    if window[0] > window[1]:
        raise argparse.ArgumentTypeError(f"Empty period range {text!r}.")
    return window


def _clean(value):
    # JSON has no NaN or infinity.
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    return value


def write_csv(frame: pd.DataFrame, path: Path) -> None:
    frame.to_csv(path, index=False, float_format='%.12g', lineterminator='\n')
    logging.info(f"Wrote {path}")


def write_json(payload, path: Path) -> None:
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(_clean(payload), f, indent=2, sort_keys=True)
        f.write('\n')
    logging.info(f"Wrote {path}")


def write_text(text: str, path: Path) -> None:
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        f.write(text)
    logging.info(f"Wrote {path}")


def load_networks(args):
    if not args.input:
        raise ValueError(f"The {args.command} command needs --in LEDGER.")
    manager = LedgerManager(alias_path=args.alias, period_range=args.periods)
    slices, report = manager.load_periods(args.input)
    return slices, build_networks(slices), report


def all_metrics(networks, processes: int = 1):
    return {period: topology.full_vertex_metrics(net, processes=processes) for period, net in networks.items()}


def metrics_table(metrics) -> pd.DataFrame:
    frames = [topology.metrics_frame(metrics[period], period) for period in sorted(metrics)]
    return pd.concat(frames, ignore_index=True) if frames else pd.DataFrame()


# Subcommands
def cmd_ingest(args, out: Path) -> None:
    manager = LedgerManager(alias_path=args.alias, period_range=args.periods)
    records, report = manager.load(args.input)
    write_ledger(records, out / 'ledger.csv')
    write_json(report.to_dict(), out / 'exclusions.json')


def cmd_build(args, out: Path) -> None:
    _, networks, _ = load_networks(args)
    for period, net in networks.items():
        write_edgelist(net, out / f'bipartite_{period}.txt')
        write_edgelist(project_institutions(net), out / f'institutions_{period}.txt')
        write_edgelist(project_firms(net), out / f'firms_{period}.txt')
    write_summaries(networks, out / 'networks.json')


def cmd_metrics(args, out: Path) -> None:
    _, networks, _ = load_networks(args)
    metrics = all_metrics(networks, args.processes)
    write_csv(metrics_table(metrics), out / 'vertex_metrics.csv')
    write_csv(reports.projection_metrics_table(networks), out / 'graph_metrics.csv')
    write_csv(reports.correlation_table(metrics), out / 'correlations.csv')
    write_csv(reports.relative_strength_ranking(metrics), out / 'relative_strength_top.csv')
    for how in ('mean', 'sum'):
        write_csv(reports.label_rankings(metrics, how=how), out / f'label_rankings_{how}.csv')


def cmd_fit(args, out: Path) -> None:
    _, networks, _ = load_networks(args)
    metrics = {period: topology.vertex_metrics(net) for period, net in networks.items()}
    write_json(reports.power_law_table(metrics, min_tail=args.min_tail, bootstrap=args.bootstrap, seed=args.seed),
               out / 'powerlaw.json')


def cmd_communities(args, out: Path) -> None:
    _, networks, _ = load_networks(args)
    summary, partitions = reports.community_table(networks, method=args.method, edge_threshold=args.edge_threshold,
                                                  max_splits=args.max_splits)
    write_csv(summary, out / 'communities.csv')
    write_csv(partitions, out / 'partitions.csv')


def cmd_crs(args, out: Path) -> None:
    _, networks, _ = load_networks(args)
    rankings = reports.crs_rankings(networks, shock=args.shock)
    write_csv(reports.crs_ranking_frame(rankings), out / 'crs.csv')
    write_csv(reports.top_entities_table(rankings), out / 'crs_top.csv')
    write_csv(reports.group_crs_table(rankings), out / 'crs_groups.csv')
    write_csv(reports.crs_skewness_table(rankings), out / 'crs_skewness.csv')
    write_json(reports.max_crs_trend(rankings), out / 'crs_trend.json')
    if args.theta:
        floors = CapitalPolicy.from_csv(args.theta).report(networks)
        write_csv(pd.DataFrame(floors), out / 'capital_floors.csv')


def cmd_attack(args, out: Path) -> None:
    _, networks, _ = load_networks(args)
    side = SIDE_CHOICES[args.side]
    traces, tables = [], {}
    for period, net in networks.items():
        trace = attack(net, side, args.strategy, args.fraction, seed=args.seed, adaptive=args.adaptive, shock=args.shock)
        frame = trace.to_frame()
        frame.insert(0, 'period', period)
        traces.append(frame)
        table = compare_strategies(net, side, args.fraction, n_random_trials=args.trials, seed=args.seed,
                                   adaptive=args.adaptive, shock=args.shock, processes=args.processes)
        tables[period] = table
    write_csv(pd.concat(traces, ignore_index=True) if traces else pd.DataFrame(), out / 'attack_trace.csv')
    summary = pd.concat(tables, names=['period']).reset_index() if tables else pd.DataFrame()
    write_csv(summary, out / 'attack_table.csv')
    write_json({str(period): table.to_dict(orient='index') for period, table in tables.items()}, out / 'attack_table.json')


def cmd_panel(args, out: Path) -> None:
    _, networks, _ = load_networks(args)
    metrics = metrics_table(all_metrics(networks, args.processes))
    scores = reports.crs_ranking_frame(reports.crs_rankings(networks, shock=args.shock))
    panel = build_panel(metrics, scores)
    write_csv(panel.frame, out / 'panel.csv')
    for side in (INSTITUTION, FIRM):
        results = regression_table(panel, side, subset_start=args.subset_start)
        write_text(render_table(results), out / f'regression_{side}.txt')
        write_text(table_json(results), out / f'regression_{side}.json')


def cmd_synth(args, out: Path) -> None:
    config = SynthConfig.from_json(args.config) if args.config else SynthConfig()
    if args.seed is not None:
        config.seed = args.seed
    write_ledger(generate(config), out / 'ledger.csv')
    write_json(config.to_dict(), out / 'synth_config.json')


def cmd_report(args, out: Path) -> None:
    slices, networks, report = load_networks(args)
    metrics = {period: topology.vertex_metrics(net) for period, net in networks.items()}
    rankings = reports.crs_rankings(networks, shock=args.shock)
    fits = reports.power_law_table(metrics, min_tail=args.min_tail)
    write_csv(reports.plot_series(networks, metrics, rankings, slices, fits), out / 'plot_series.csv')
    write_csv(reports.national_share_table(slices), out / 'national_share.csv')
    write_json(report.to_dict(), out / 'exclusions.json')


COMMANDS = {
    'ingest': cmd_ingest,
    'build': cmd_build,
    'metrics': cmd_metrics,
    'fit': cmd_fit,
    'communities': cmd_communities,
    'crs': cmd_crs,
    'attack': cmd_attack,
    'panel': cmd_panel,
    'synth': cmd_synth,
    'report': cmd_report,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--in', dest='input', help='Loan ledger (CSV).')
    common.add_argument('--out', default='out', help='Output directory.')
    common.add_argument('--config', help='JSON run config (a SynthConfig for synth); flags override it.')
    common.add_argument('--periods', type=parse_periods, help='Analysis window, YYYY or YYYY:YYYY.')
    common.add_argument('--alias', help='Lender alias table (raw_name, canonical_name).')
    common.add_argument('--processes', type=int, default=1)
    common.add_argument('--shock', type=float, default=1.0, help='Initial default shock in (0, 1].')
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument('--verbose', action='store_true')
    verbosity.add_argument('--quiet', action='store_true')

    parser = argparse.ArgumentParser(prog='creditnet', description='Bipartite credit-network risk analytics.')
    subparsers = parser.add_subparsers(dest='command', required=True)
    commands = {name: subparsers.add_parser(name, parents=[common]) for name in COMMANDS}

    for name in ('fit', 'report'):
        commands[name].add_argument('--min-tail', type=int, default=10)
    commands['fit'].add_argument('--bootstrap', type=int, default=0, help='Goodness-of-fit resamples (0 disables).')
    commands['fit'].add_argument('--seed', type=int, default=0)

    commands['communities'].add_argument('--method', choices=['auto', 'girvan_newman', 'greedy'], default='auto')
    commands['communities'].add_argument('--edge-threshold', type=int, default=5000)
    commands['communities'].add_argument('--max-splits', type=int, default=None)

    commands['crs'].add_argument('--theta', help='Theta schedule CSV (period, entity, theta[, capital]).')

    commands['attack'].add_argument('--side', choices=sorted(SIDE_CHOICES), default='institutions')
    commands['attack'].add_argument('--strategy', choices=['crs', 'random'], default='crs')
    commands['attack'].add_argument('--fraction', type=float, default=0.05)
    commands['attack'].add_argument('--trials', type=int, default=20)
    commands['attack'].add_argument('--seed', type=int, default=0)
    commands['attack'].add_argument('--adaptive', action='store_true', help='Recompute CRS after every removal.')

    commands['panel'].add_argument('--subset-start', type=int, default=2009)

    commands['synth'].add_argument('--seed', type=int, default=None)
    return parser, commands


def parse_args(argv=None):
    parser, commands = build_parser()
    args = parser.parse_args(argv)
    if args.config and args.command != 'synth':
        with open(args.config, 'r', encoding='utf-8') as f:
            values = json.load(f)
        unknown = sorted(set(values) - set(vars(args)))
        if unknown:
            parser.error(f"Unknown run-config keys: {unknown}")
        if isinstance(values.get('periods'), str):
            values['periods'] = parse_periods(values['periods'])
        elif isinstance(values.get('periods'), list):
            values['periods'] = tuple(values['periods'])
        commands[args.command].set_defaults(**values)
        args = parser.parse_args(argv)
    return args


def run(argv=None) -> int:
    try:
        args = parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    setup_logging(args.verbose, args.quiet)

    try:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](args, out)
    except ValueError as ve:
        logging.error(f"Validation error: {ve}")
        return 1
    except Exception as e:
        logging.error(f"An unexpected error occurred: {e}")
        return 1
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
