"""Future cancer risk from a posterior genotype distribution."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import registry
from .engine import genotype_curves
from .errors import GridEmpty
from .genotype import GenotypeSpace
from .model_db import CRUDE, NET, ModelDatabase
from .registry import FEMALE, MALE


@dataclass
class RiskCurve:
    proband_id: int
    cancer: str
    by_age: list[int]
    estimate: np.ndarray
    lower: np.ndarray = None
    upper: np.ndarray = None

    def __post_init__(self):
        self.estimate = np.asarray(self.estimate, dtype=float)
        if self.lower is None:
            self.lower = self.estimate.copy()
        if self.upper is None:
            self.upper = self.estimate.copy()

    def rows(self) -> list[dict]:
        return [
            {"ByAge": int(a), "estimate": float(e), "lower": float(lo), "upper": float(up)}
            for a, e, lo, up in zip(self.by_age, self.estimate, self.lower, self.upper)
        ]


def risk_grid(cur_age: int, age_by: int, age_max: int) -> list[int]:
    """Reporting ages ``cur_age + age_by * j``, with a final point at
    ``age_max`` when the last interval is partial."""
    if age_by < 1:
        raise ValueError("age_by must be >= 1")
    if cur_age >= age_max:
        raise GridEmpty(f"current age {cur_age} leaves no horizon before age {age_max}")
    grid = list(range(cur_age + age_by, age_max + 1, age_by))
    if not grid or grid[-1] != age_max:
        grid.append(age_max)
    return grid


def genotype_risks(member, db: ModelDatabase, space: GenotypeSpace, cancer: str, sex: int,
                   grid: list[int], mode: str = "crude", conditional: bool = True) -> np.ndarray:
    """(G, len(grid)) probability of developing ``cancer`` in (C, age] per genotype.

    With ``conditional`` the increments are divided by the genotype's
    probability of being event-free at the current age C.
    """
    G = len(space)
    if not registry.sex_possible(cancer, sex):
        return np.zeros((G, len(grid)))
    kind = NET if mode == "net" else CRUDE
    curves = genotype_curves(member, db, space, cancer, sex, kind)
    cum = np.cumsum(curves, axis=1)
    cur = member.cur_age
    before = cum[:, cur - 1] if cur >= 1 else np.zeros(G)
    ahead = cum[:, np.asarray(grid) - 1] - before[:, None]
    if not conditional:
        return np.clip(ahead, 0.0, 1.0)
    event_free = 1.0 - before
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(event_free[:, None] > 0, ahead / event_free[:, None], 0.0)
    return np.clip(out, 0.0, 1.0)


def future_risk(posterior, member, db: ModelDatabase, space: GenotypeSpace, cancer: str,
                mode: str = "crude", age_by: int = 5, conditional: bool = True) -> RiskCurve:
    """Cumulative risk of ``cancer`` on the reporting grid, mixing the
    genotype-specific risks with the posterior weights.

    ``mode='crude'`` accounts for death from other causes; ``'net'`` does not.
    """
    if mode not in ("crude", "net"):
        raise ValueError(f"mode must be 'crude' or 'net', got {mode!r}")
    if member.affection(cancer).affected:
        raise ValueError(f"member {member.id} is already affected with {cancer}")
    if member.cur_age is None:
        raise ValueError(f"member {member.id} has no current age")
    weights = getattr(posterior, "estimate", posterior)
    weights = np.asarray(weights, dtype=float)
    grid = risk_grid(member.cur_age, age_by, db.age_max)
    sexes = (member.sex,) if member.sex in (FEMALE, MALE) else (FEMALE, MALE)
    est = np.zeros(len(grid))
    for sex in sexes:
        est += weights @ genotype_risks(member, db, space, cancer, sex, grid, mode, conditional)
    est /= len(sexes)
    return RiskCurve(member.id, cancer, grid, np.clip(est, 0.0, 1.0))
