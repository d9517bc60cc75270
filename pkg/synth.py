# synth.py

import json
import logging
from dataclasses import asdict, dataclass, field, fields
from typing import List, Tuple

import numpy as np
import pandas as pd

from errors import SynthConfigError
from ingest import LoanRecord

LENDER_TYPES = [
    'state-owned commercial bank',
    'policy bank',
    'nationwide joint-stock bank',
    'urban commercial bank',
    'rural cooperative bank',
    'foreign bank',
    'trust and financial firm',
]
LENDER_TYPE_WEIGHTS = [0.02, 0.01, 0.03, 0.20, 0.20, 0.13, 0.41]

INDUSTRIES = [
    'real estate development and operation',
    'cement manufacturing',
    'metal products',
    'medicine manufacturing',
    'coal mining and dressing',
    'electric power and heat supply',
    'chemical materials manufacturing',
    'civil engineering construction',
    'electronic equipment manufacturing',
    'wholesale trade',
]
INDUSTRY_WEIGHTS = [0.16, 0.08, 0.1, 0.1, 0.08, 0.1, 0.12, 0.08, 0.1, 0.08]


@dataclass
class SynthConfig:
    n_institutions: int = 607
    n_firms: int = 1777
    institution_exponent: float = 2.0
    firm_exponent: float = 2.5
    mean_degree: float = 2.0          # target mean number of lenders per firm
    weight_shape: float = 1.5         # Pareto tail index of loan amounts
    weight_scale: float = 100.0       # smallest loan amount
    n_periods: int = 15
    first_period: int = 2000
    seed: int = 0
    currency: str = 'CNY'
    lender_types: List[str] = field(default_factory=lambda: list(LENDER_TYPES))
    lender_type_weights: List[float] = field(default_factory=lambda: list(LENDER_TYPE_WEIGHTS))
    industries: List[str] = field(default_factory=lambda: list(INDUSTRIES))
    industry_weights: List[float] = field(default_factory=lambda: list(INDUSTRY_WEIGHTS))

    def __post_init__(self):
        self.validate()

    @classmethod
    def from_dict(cls, values: dict) -> 'SynthConfig':
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise SynthConfigError(f"Unknown synthetic config keys: {unknown}")
        return cls(**values)

    @classmethod
    def from_json(cls, path) -> 'SynthConfig':
        with open(path, 'r', encoding='utf-8') as f:
            return cls.from_dict(json.load(f))

    def to_dict(self) -> dict:
        return asdict(self)

    def validate(self) -> None:
        if self.n_institutions < 1 or self.n_firms < 1:
            raise SynthConfigError("Both sides need at least one vertex.")
        if self.institution_exponent <= 1 or self.firm_exponent <= 1:
            raise SynthConfigError("Degree exponents must exceed 1.")
        if self.mean_degree <= 0:
            raise SynthConfigError("Mean degree must be positive.")
        if self.mean_degree > self.n_institutions:
            raise SynthConfigError(
                f"Mean firm degree {self.mean_degree} exceeds the number of institutions {self.n_institutions}.")
        if self.weight_shape <= 0 or self.weight_scale <= 0:
            raise SynthConfigError("Pareto shape and scale must be positive.")
        if self.n_periods < 1:
            raise SynthConfigError("At least one period is required.")
        for labels, weights, name in ((self.lender_types, self.lender_type_weights, 'lender type'),
                                      (self.industries, self.industry_weights, 'industry')):
            if not labels or len(labels) != len(weights):
                raise SynthConfigError(f"Each {name} label needs exactly one sampling weight.")
            if min(weights) < 0 or sum(weights) <= 0:
                raise SynthConfigError(f"{name.capitalize()} weights must be non-negative with a positive sum.")


def truncated_power_law_degrees(rng: np.random.Generator, size: int, exponent: float, k_max: int) -> np.ndarray:
    """Degrees drawn from p(k) ~ k^-exponent on 1..k_max."""
    support = np.arange(1, k_max + 1)
    probabilities = support.astype(float) ** -exponent
    return rng.choice(support, size=size, p=probabilities / probabilities.sum())


def _trim(rng: np.random.Generator, stubs: np.ndarray, keep: int) -> np.ndarray:
    if stubs.size == keep:
        return stubs
    chosen = np.sort(rng.choice(stubs.size, size=keep, replace=False))
    return stubs[chosen]


def balanced_stubs(config: SynthConfig, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """
    Institution and firm stub lists of equal length.

    Each side draws a degree sequence; the matched total is the smallest of both
    sides' stub counts and round(mean_degree * n_firms). Stubs above it are
    removed uniformly at random.
    """
    institution_degrees = truncated_power_law_degrees(rng, config.n_institutions, config.institution_exponent, config.n_firms)
    firm_degrees = truncated_power_law_degrees(rng, config.n_firms, config.firm_exponent, config.n_institutions)
    institution_stubs = np.repeat(np.arange(config.n_institutions), institution_degrees)
    firm_stubs = np.repeat(np.arange(config.n_firms), firm_degrees)
    target = max(1, int(round(config.mean_degree * config.n_firms)))
    total = min(institution_stubs.size, firm_stubs.size, target)
    return _trim(rng, institution_stubs, total), _trim(rng, firm_stubs, total)


def match_stubs(rng: np.random.Generator, institution_stubs: np.ndarray, firm_stubs: np.ndarray) -> pd.DataFrame:
    """Random bipartite stub matching; returns the edge multiset (institution, firm)."""
    return pd.DataFrame({
        'institution': institution_stubs,
        'firm': rng.permutation(firm_stubs),
    })


def _ids(prefix: str, n: int) -> List[str]:
    width = max(4, len(str(n)))
    return [f"{prefix}{i + 1:0{width}d}" for i in range(n)]


def generate(config: SynthConfig) -> List[LoanRecord]:
    """
    Seeded ledger of scale-free bipartite credit networks, one per period.

    Labels are fixed per entity across periods. Each period has its own child seed,
    so the ledger depends only on the configuration.
    """
    config.validate()
    label_seed, *period_seeds = np.random.SeedSequence(config.seed).spawn(config.n_periods + 1)
    label_rng = np.random.default_rng(label_seed)
    lender_weights = np.asarray(config.lender_type_weights, dtype=float)
    industry_weights = np.asarray(config.industry_weights, dtype=float)
    lender_types = label_rng.choice(len(config.lender_types), size=config.n_institutions, p=lender_weights / lender_weights.sum())
    industries = label_rng.choice(len(config.industries), size=config.n_firms, p=industry_weights / industry_weights.sum())
    institution_ids = _ids('B', config.n_institutions)
    firm_ids = _ids('F', config.n_firms)

    records = []
    for offset, period_seed in enumerate(period_seeds):
        period = config.first_period + offset
        rng = np.random.default_rng(period_seed)
        institution_stubs, firm_stubs = balanced_stubs(config, rng)
        edges = match_stubs(rng, institution_stubs, firm_stubs)
        edges['amount'] = config.weight_scale * (1.0 + rng.pareto(config.weight_shape, size=len(edges)))
        # Parallel stubs collapse into one loan with the summed amount.
        collapsed = edges.groupby(['institution', 'firm'], sort=True)['amount'].sum().reset_index()
        for row in collapsed.itertuples(index=False):
            records.append(LoanRecord(
                period=period,
                lender_id=institution_ids[row.institution],
                lender_name=f"Institution {institution_ids[row.institution]}",
                lender_type=config.lender_types[lender_types[row.institution]],
                borrower_id=firm_ids[row.firm],
                borrower_name=f"Firm {firm_ids[row.firm]}",
                borrower_industry=config.industries[industries[row.firm]],
                amount=float(row.amount),
                currency=config.currency,
                special_treatment=False,
            ))
        logging.debug(f"Synthetic period {period}: {len(edges)} stubs matched into {len(collapsed)} loans.")
    logging.info(f"Generated {len(records)} synthetic loan records over {config.n_periods} periods.")
    return records
