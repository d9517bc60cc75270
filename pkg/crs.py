# crs.py

import logging
from dataclasses import asdict, dataclass
from typing import Dict, List, Mapping, Optional, Union

import numpy as np
import pandas as pd

from bipartite_graph import FIRM, INSTITUTION, BipartiteCreditNetwork
from errors import DiffusionError

LENDER_TYPE = 'lender_type'
BORROWER_INDUSTRY = 'borrower_industry'


@dataclass
class RiskDiffusion:
    """
    Risk diffusion matrix P split in its two directions.

    toward_institutions[i, k] = C_BiFk / C_Bi (rows sum to 1 per active institution)
    toward_firms[k, i]        = C_BiFk / C_Fk (rows sum to 1 per active firm)
    """
    institutions: List[str]
    firms: List[str]
    toward_institutions: np.ndarray
    toward_firms: np.ndarray
    lending: np.ndarray
    borrowing: np.ndarray

    @classmethod
    def from_network(cls, net: BipartiteCreditNetwork) -> 'RiskDiffusion':
        weights = net.weight_matrix()
        lending = weights.sum(axis=1)
        borrowing = weights.sum(axis=0)
        with np.errstate(divide='ignore', invalid='ignore'):
            toward_institutions = np.where(lending[:, np.newaxis] > 0, weights / lending[:, np.newaxis], 0.0)
            toward_firms = np.where(borrowing[:, np.newaxis] > 0, weights.T / borrowing[:, np.newaxis], 0.0)
        return cls(
            institutions=list(net.institutions),
            firms=list(net.firms),
            toward_institutions=toward_institutions,
            toward_firms=toward_firms,
            lending=lending,
            borrowing=borrowing,
        )

    def as_mappings(self) -> Dict[str, Dict[tuple, float]]:
        b_index, f_index = np.nonzero(self.toward_institutions)
        return {
            'toward_institutions': {(self.institutions[i], self.firms[k]): float(self.toward_institutions[i, k]) for i, k in zip(b_index, f_index)},
            'toward_firms': {(self.firms[k], self.institutions[i]): float(self.toward_firms[k, i]) for i, k in zip(b_index, f_index)},
        }


@dataclass
class RiskState:
    origin: str
    origin_side: str
    gamma_institutions: Dict[str, float]
    gamma_firms: Dict[str, float]
    risk_b: float
    risk_f: float
    crs: float
    shock: float = 1.0
    clamped: bool = False


@dataclass
class CRSEntry:
    vertex: str
    side: str
    label: str
    crs: float
    risk_b: float
    risk_f: float


def _check_shock(shock: float) -> None:
    if not 0.0 < shock <= 1.0:
        raise ValueError(f"Initial shock must lie in (0, 1], got {shock}.")


def _clamp(values: np.ndarray):
    clamped = bool(np.any(values > 1.0) or np.any(values < 0.0))
    return np.clip(values, 0.0, 1.0), clamped


def propagate_default(net: BipartiteCreditNetwork, origin: str, shock: float = 1.0, diffusion: RiskDiffusion = None) -> RiskState:
    """
    Two-wave default propagation from a single origin.

    Institution origin i: gamma_Bi = shock; first wave gamma_Fk = w_FkBi * shock;
    second wave gamma_Bj = sum_k w_BjFk * gamma_Fk for j != i. A firm origin runs
    the mirror image. No third wave. All gamma are clamped to [0, 1].

    Risk_B and Risk_F weight gamma by total lending / borrowing; CRS = Risk_B + Risk_F.
    """
    _check_shock(shock)
    side = net.side_of(origin)
    if net.graph.degree(origin) == 0:
        raise DiffusionError(f"Origin {origin} is isolated; no diffusion is defined.")
    diffusion = diffusion or RiskDiffusion.from_network(net)

    if side == INSTITUTION:
        i = diffusion.institutions.index(origin)
        gamma_f, first_clamped = _clamp(diffusion.toward_firms[:, i] * shock)
        gamma_b = diffusion.toward_institutions @ gamma_f
        gamma_b[i] = shock
        gamma_b, second_clamped = _clamp(gamma_b)
    else:
        k = diffusion.firms.index(origin)
        gamma_b, first_clamped = _clamp(diffusion.toward_institutions[:, k] * shock)
        gamma_f = diffusion.toward_firms @ gamma_b
        gamma_f[k] = shock
        gamma_f, second_clamped = _clamp(gamma_f)
    clamped = first_clamped or second_clamped
    if clamped:
        logging.warning(f"Contamination clamped to [0, 1] for origin {origin} in {net.period}.")

    risk_b = float(diffusion.lending @ gamma_b / diffusion.lending.sum())
    risk_f = float(diffusion.borrowing @ gamma_f / diffusion.borrowing.sum())
    return RiskState(
        origin=origin,
        origin_side=side,
        gamma_institutions=dict(zip(diffusion.institutions, gamma_b.tolist())),
        gamma_firms=dict(zip(diffusion.firms, gamma_f.tolist())),
        risk_b=risk_b,
        risk_f=risk_f,
        crs=risk_b + risk_f,
        shock=shock,
        clamped=clamped,
    )


def _shock_vector(vertices: List[str], shock: Union[float, Mapping[str, float]]) -> np.ndarray:
    if isinstance(shock, Mapping):
        values = np.array([shock.get(v, 1.0) for v in vertices], dtype=float)
    else:
        values = np.full(len(vertices), float(shock))
    for value in values:
        _check_shock(value)
    return values


def crs_all(net: BipartiteCreditNetwork, shock: Union[float, Mapping[str, float]] = 1.0) -> List[CRSEntry]:
    """
    CRS of every non-isolated vertex, highest first (ties by vertex id).

    All origins of one side are propagated at once: column o of the first-wave
    matrix is origin o's contamination of the opposite side.
    """
    if net.M == 0:
        return []
    diffusion = RiskDiffusion.from_network(net)
    total_lending = diffusion.lending.sum()
    total_borrowing = diffusion.borrowing.sum()
    entries = []

    shocks_b = _shock_vector(diffusion.institutions, shock)
    first_f = np.clip(diffusion.toward_firms * shocks_b[np.newaxis, :], 0.0, 1.0)
    second_b = diffusion.toward_institutions @ first_f
    np.fill_diagonal(second_b, shocks_b)
    second_b = np.clip(second_b, 0.0, 1.0)
    risk_b = diffusion.lending @ second_b / total_lending
    risk_f = diffusion.borrowing @ first_f / total_borrowing
    for i, vertex in enumerate(diffusion.institutions):
        if diffusion.lending[i] > 0:
            entries.append(CRSEntry(vertex, INSTITUTION, net.label_of(vertex), float(risk_b[i] + risk_f[i]), float(risk_b[i]), float(risk_f[i])))

    shocks_f = _shock_vector(diffusion.firms, shock)
    first_b = np.clip(diffusion.toward_institutions * shocks_f[np.newaxis, :], 0.0, 1.0)
    second_f = diffusion.toward_firms @ first_b
    np.fill_diagonal(second_f, shocks_f)
    second_f = np.clip(second_f, 0.0, 1.0)
    risk_b = diffusion.lending @ first_b / total_lending
    risk_f = diffusion.borrowing @ second_f / total_borrowing
    for k, vertex in enumerate(diffusion.firms):
        if diffusion.borrowing[k] > 0:
            entries.append(CRSEntry(vertex, FIRM, net.label_of(vertex), float(risk_b[k] + risk_f[k]), float(risk_b[k]), float(risk_f[k])))

    entries.sort(key=lambda e: (-e.crs, e.vertex))
    logging.info(f"CRS computed for {len(entries)} vertices in {net.period}.")
    return entries


def crs_frame(ranking: List[CRSEntry], period: int = None) -> pd.DataFrame:
    frame = pd.DataFrame([asdict(e) for e in ranking], columns=['vertex', 'side', 'label', 'crs', 'risk_b', 'risk_f'])
    frame.insert(0, 'period', period)
    return frame


def group_average_crs(ranking: List[CRSEntry], attribute: str = LENDER_TYPE) -> Dict[str, float]:
    """Mean CRS per lender type (institutions) or borrower industry (firms), highest first."""
    if attribute not in (LENDER_TYPE, BORROWER_INDUSTRY):
        raise ValueError(f"Attribute must be {LENDER_TYPE} or {BORROWER_INDUSTRY}, got {attribute}.")
    side = INSTITUTION if attribute == LENDER_TYPE else FIRM
    frame = pd.DataFrame([asdict(e) for e in ranking if e.side == side], columns=['vertex', 'side', 'label', 'crs', 'risk_b', 'risk_f'])
    if frame.empty:
        return {}
    means = frame.groupby('label')['crs'].mean().sort_values(ascending=False, kind='mergesort')
    return {label: float(value) for label, value in means.items()}


def top_entry(ranking: List[CRSEntry], side: str) -> Optional[CRSEntry]:
    for entry in ranking:
        if entry.side == side:
            return entry
    return None


# Capital floors
def _check_floor_inputs(c_prev: float, theta: float, exposure: float) -> None:
    if theta <= 0 or theta > 1:
        raise ValueError(f"Reserve rate theta must lie in (0, 1], got {theta}.")
    if c_prev < 0 or exposure < 0:
        raise ValueError("Capital and exposures must be non-negative.")


def capital_floor(c_prev: float, theta: float, L_prev: float) -> float:
    """Reserve capital no less than theta times last period's credit exposure."""
    _check_floor_inputs(c_prev, theta, L_prev)
    return max(c_prev, theta * L_prev)


def capital_exposure_floor(c_prev: float, theta: float, max_edge: float) -> float:
    """Reserve capital no less than the largest single credit divided by theta."""
    _check_floor_inputs(c_prev, theta, max_edge)
    return max(c_prev, max_edge / theta)


class CapitalPolicy:
    def __init__(self, schedule: pd.DataFrame):
        """
        Capital floors for a theta schedule.

        Args:
            schedule (pd.DataFrame): Columns period, entity, theta and optionally
                capital (reserve capital at t-1, default 0).
        """
        required = {'period', 'entity', 'theta'}
        missing = required - set(schedule.columns)
        if missing:
            raise ValueError(f"Theta schedule is missing columns {sorted(missing)}.")
        self.schedule = schedule.copy()
        if 'capital' not in self.schedule:
            self.schedule['capital'] = 0.0
        self.schedule['entity'] = self.schedule['entity'].astype(str)

    @classmethod
    def from_csv(cls, path) -> 'CapitalPolicy':
        return cls(pd.read_csv(path, skipinitialspace=True))

    @staticmethod
    def _exposures(net: Optional[BipartiteCreditNetwork], entity: str):
        if net is None or entity not in net.graph:
            return 0.0, 0.0
        weights = [w for _, _, w in net.graph.edges(entity, data='weight')]
        return float(sum(weights)), float(max(weights, default=0.0))

    def report(self, networks: Dict[int, BipartiteCreditNetwork]) -> List[dict]:
        """Both floors per schedule row, using the entity's exposures at t-1."""
        rows = []
        for row in self.schedule.sort_values(['period', 'entity'], kind='mergesort').itertuples(index=False):
            exposure, max_edge = self._exposures(networks.get(int(row.period) - 1), row.entity)
            rows.append({
                'period': int(row.period),
                'entity': row.entity,
                'theta': float(row.theta),
                'capital_prev': float(row.capital),
                'exposure_prev': exposure,
                'max_edge_prev': max_edge,
                'exposure_floor': capital_floor(float(row.capital), float(row.theta), exposure),
                'largest_credit_floor': capital_exposure_floor(float(row.capital), float(row.theta), max_edge),
            })
        logging.info(f"Capital floors computed for {len(rows)} schedule rows.")
        return rows
