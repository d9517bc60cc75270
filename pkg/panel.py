# panel.py

import json
import logging
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import stats

from errors import PanelError

BASE_REGRESSORS = ['degree', 'strength', 'betweenness', 'closeness']
LAG_REGRESSORS = ['degree_lag', 'strength_lag']
PANEL_COLUMNS = ['entity', 'period', 'side', 'label', 'crs'] + BASE_REGRESSORS + LAG_REGRESSORS


@dataclass
class PanelDataset:
    frame: pd.DataFrame

    def for_side(self, side: str) -> 'PanelDataset':
        return PanelDataset(self.frame[self.frame['side'] == side].reset_index(drop=True))

    @property
    def entities(self) -> List[str]:
        return sorted(self.frame['entity'].unique())

    def __len__(self):
        return len(self.frame)


@dataclass
class RegressionResult:
    dependent: str
    regressors: List[str]
    coefficients: Dict[str, float]
    std_errors: Dict[str, float]
    t_stats: Dict[str, float]
    p_values: Dict[str, float]
    n_obs: int
    n_entities: int
    r_squared: float
    adj_r_squared: float
    dropped: List[str] = field(default_factory=list)
    period_range: Optional[Tuple[int, int]] = None
    label: str = ''

    def to_dict(self) -> dict:
        result = asdict(self)
        result['period_range'] = list(self.period_range) if self.period_range else None
        return result


def _check_unique(frame: pd.DataFrame, name: str) -> None:
    duplicated = frame.duplicated(['vertex', 'period'])
    if duplicated.any():
        first = frame.loc[duplicated, ['vertex', 'period']].iloc[0]
        raise PanelError(f"Duplicate ({first['vertex']}, {first['period']}) in the {name} table.")


def build_panel(metrics: pd.DataFrame, scores: pd.DataFrame) -> PanelDataset:
    """
    Join per-period vertex metrics with per-period CRS and add first-order lags.

    Args:
        metrics (pd.DataFrame): Rows of metrics_frame (vertex, period, side, label,
            degree, strength, betweenness, closeness, ...).
        scores (pd.DataFrame): Rows of crs_frame (period, vertex, crs, ...).

    Returns:
        PanelDataset: One row per (entity, period); degree_lag and strength_lag hold
        the same entity's values at period - 1 and are NaN otherwise.
    """
    _check_unique(metrics, 'metrics')
    _check_unique(scores, 'CRS')

    merged = metrics[['vertex', 'period', 'side', 'label'] + BASE_REGRESSORS].merge(
        scores[['vertex', 'period', 'crs']], on=['vertex', 'period'], how='inner')
    merged = merged.rename(columns={'vertex': 'entity'})

    lagged = metrics[['vertex', 'period', 'degree', 'strength']].rename(
        columns={'vertex': 'entity', 'degree': 'degree_lag', 'strength': 'strength_lag'})
    lagged['period'] = lagged['period'] + 1
    panel = merged.merge(lagged, on=['entity', 'period'], how='left')

    panel = panel[PANEL_COLUMNS].sort_values(['entity', 'period'], kind='mergesort').reset_index(drop=True)
    logging.info(f"Panel built with {len(panel)} rows over {panel['entity'].nunique()} entities.")
    return PanelDataset(panel)


def _demean(frame: pd.DataFrame, columns: Sequence[str]) -> pd.DataFrame:
    means = frame.groupby('entity')[list(columns)].transform('mean')
    return frame[list(columns)] - means


def _independent_columns(design: pd.DataFrame, order: Sequence[str]) -> Tuple[List[str], List[str]]:
    # Greedy rank check: a column is kept only if it raises the rank of what is kept.
    kept, dropped = [], []
    rank = 0
    for column in order:
        candidate = design[kept + [column]].to_numpy()
        new_rank = np.linalg.matrix_rank(candidate)
        if new_rank > rank:
            kept.append(column)
            rank = new_rank
        else:
            dropped.append(column)
    return kept, dropped


def fit_fixed_effects(panel: PanelDataset, regressors: Sequence[str], subset: Tuple[int, int] = None,
                      dependent: str = 'crs', time_effects: bool = True, label: str = '') -> RegressionResult:
    """
    Within (entity fixed-effect) OLS with period indicators and homoskedastic errors.

    Rows missing the dependent variable or any regressor are dropped listwise, then
    entities with a single observation. Regressors that are collinear with the
    fixed effects or with earlier columns are dropped and listed in ``dropped``.

    Args:
        panel (PanelDataset): Output of build_panel.
        regressors (list): Column names.
        subset (tuple): Optional inclusive (first, last) period range.
        dependent (str): Dependent column.
        time_effects (bool): Include period indicators (first period omitted).
        label (str): Model name for reports.
    """
    frame = panel.frame
    if subset is not None:
        frame = frame[(frame['period'] >= subset[0]) & (frame['period'] <= subset[1])]
    frame = frame.dropna(subset=[dependent] + list(regressors))
    counts = frame['entity'].value_counts()
    frame = frame[frame['entity'].isin(counts[counts >= 2].index)]
    frame = frame.sort_values(['entity', 'period'], kind='mergesort').reset_index(drop=True)

    n_entities = frame['entity'].nunique()
    if n_entities < 2:
        raise PanelError(f"Need at least 2 entities with 2 or more observations, got {n_entities}.")

    design = frame[['entity'] + list(regressors)].astype({r: float for r in regressors})
    dummies = []
    if time_effects:
        indicators = pd.get_dummies(frame['period'], prefix='period', drop_first=True, dtype=float)
        dummies = list(indicators.columns)
        design = pd.concat([design, indicators], axis=1)
    design[dependent] = frame[dependent].astype(float)

    demeaned = _demean(design, list(regressors) + dummies + [dependent])
    y = demeaned.pop(dependent).to_numpy()

    # Period indicators enter first so that regressors absorbed by the effects are the ones dropped.
    kept, dropped = _independent_columns(demeaned, dummies + list(regressors))
    kept_regressors = [r for r in regressors if r in kept]
    dropped_regressors = [r for r in regressors if r in dropped]
    for regressor in dropped_regressors:
        logging.warning(f"Regressor {regressor} is collinear with the fixed effects or other regressors; dropped.")

    X = demeaned[kept].to_numpy()
    n_obs, k = X.shape
    dof = n_obs - n_entities - k
    if dof <= 0:
        raise PanelError(f"Too few observations ({n_obs}) for {k} columns and {n_entities} entity effects.")

    beta, _, _, _ = np.linalg.lstsq(X, y, rcond=None)
    residuals = y - X @ beta
    rss = float(residuals @ residuals)
    tss = float(y @ y)
    sigma2 = rss / dof
    covariance = sigma2 * np.linalg.pinv(X.T @ X)
    std_errors = np.sqrt(np.clip(np.diag(covariance), 0.0, None))
    with np.errstate(divide='ignore', invalid='ignore'):
        t_stats = np.where(std_errors > 0, beta / std_errors, np.inf * np.sign(beta))
    p_values = 2.0 * stats.t.sf(np.abs(t_stats), dof)

    r_squared = 1.0 - rss / tss if tss > 0 else 0.0
    adj_r_squared = 1.0 - (1.0 - r_squared) * (n_obs - 1) / dof

    index = {column: i for i, column in enumerate(kept)}
    period_range = (int(frame['period'].min()), int(frame['period'].max()))
    logging.info(f"Fixed-effect fit {label or dependent}: N={n_obs}, entities={n_entities}, adj. R2={adj_r_squared:.4f}")
    return RegressionResult(
        dependent=dependent,
        regressors=kept_regressors,
        coefficients={r: float(beta[index[r]]) for r in kept_regressors},
        std_errors={r: float(std_errors[index[r]]) for r in kept_regressors},
        t_stats={r: float(t_stats[index[r]]) for r in kept_regressors},
        p_values={r: float(p_values[index[r]]) for r in kept_regressors},
        n_obs=int(n_obs),
        n_entities=int(n_entities),
        r_squared=float(r_squared),
        adj_r_squared=float(adj_r_squared),
        dropped=dropped_regressors,
        period_range=period_range,
        label=label,
    )


def fit_exponential_trend(series) -> float:
    """
    Growth parameter b of value_t = a * exp(b * t), the OLS slope of ln(value) on period.

    Args:
        series: pd.Series indexed by period, a {period: value} mapping, or (period, value) pairs.
    """
    if isinstance(series, (pd.Series, Mapping)):
        pairs = list(series.items())
    else:
        pairs = list(series)
    if len(pairs) < 3:
        raise PanelError(f"Exponential trend needs at least 3 points, got {len(pairs)}.")
    periods = np.array([p for p, _ in pairs], dtype=float)
    values = np.array([v for _, v in pairs], dtype=float)
    if np.any(values <= 0):
        raise PanelError("Exponential trend needs strictly positive values.")
    slope, _ = np.polyfit(periods - periods.mean(), np.log(values), 1)
    return float(slope)


def regression_table(panel: PanelDataset, side: str, subset_start: int = 2009,
                     regressors: Sequence[str] = BASE_REGRESSORS) -> List[RegressionResult]:
    """Base model, model with lags, and the base model refitted from ``subset_start`` on, for one side."""
    data = panel.for_side(side)
    last = int(data.frame['period'].max()) if len(data) else subset_start
    specs = [
        ('base', list(regressors), None),
        ('lags', list(regressors) + LAG_REGRESSORS, None),
        (f'from_{subset_start}', list(regressors), (subset_start, last)),
    ]
    results = []
    for label, columns, subset in specs:
        try:
            results.append(fit_fixed_effects(data, columns, subset=subset, label=label))
        except PanelError as e:
            logging.warning(f"Model {label} for side {side} skipped: {e}")
    return results


def render_table(results: Sequence[RegressionResult]) -> str:
    """Aligned text: coefficient rows with t-statistics in parentheses, then N and adjusted R2."""
    if not results:
        return ''
    names = []
    for result in results:
        names.extend(r for r in result.regressors + result.dropped if r not in names)
    width = max([len(n) for n in names] + [len('Adj. R-Squared')]) + 2
    column = 16
    lines = [''.ljust(width) + ''.join(r.label.rjust(column) for r in results)]
    for name in names:
        coefficients, t_stats = [], []
        for result in results:
            if name in result.coefficients:
                coefficients.append(f"{result.coefficients[name]:.6g}")
                t_stats.append(f"({result.t_stats[name]:.3f})")
            elif name in result.dropped:
                coefficients.append('dropped')
                t_stats.append('')
            else:
                coefficients.append('')
                t_stats.append('')
        lines.append(name.ljust(width) + ''.join(c.rjust(column) for c in coefficients))
        lines.append(''.ljust(width) + ''.join(t.rjust(column) for t in t_stats))
    lines.append('N'.ljust(width) + ''.join(str(r.n_obs).rjust(column) for r in results))
    lines.append('Adj. R-Squared'.ljust(width) + ''.join(f"{r.adj_r_squared:.4f}".rjust(column) for r in results))
    return '\n'.join(lines) + '\n'


def table_json(results: Sequence[RegressionResult]) -> str:
    return json.dumps([r.to_dict() for r in results], indent=2, sort_keys=True) + '\n'
