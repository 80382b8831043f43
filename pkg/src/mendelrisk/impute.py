"""Multiple imputation of missing current and diagnosis ages.

Every replicate draws from its own random stream keyed by
``(seed, replicate)``, so replicates can run in any order or in parallel
without changing the aggregate.
"""

from __future__ import annotations

import logging
import os
from collections import defaultdict, deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .engine import PosteriorDistribution, genotype_curves, peel
from .errors import NoAgesAnywhere
from .genotype import GenotypeSpace, founder_prior
from .model_db import ModelDatabase, ModelSpec
from .pedigree import Affection, Pedigree
from .registry import FEMALE, MALE
from .risk import RiskCurve, future_risk

log = logging.getLogger(__name__)

GENERATION_GAP = 28
AGE_JITTER = 5


@dataclass(frozen=True)
class ImputationPlan:
    """Missing-age fields to fill: ``(member_id, "cur_age")`` or
    ``(member_id, "age_dx", cancer)``."""

    targets: tuple[tuple, ...]
    iterations: int = 20
    seed: int = 0

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")


def make_plan(ped: Pedigree, iterations: int = 20, seed: int = 0) -> ImputationPlan:
    targets = []
    for m in sorted(ped, key=lambda x: x.id):
        if m.is_pseudo:
            continue
        if m.cur_age is None:
            targets.append((m.id, "cur_age"))
        for cancer in sorted(m.affections):
            a = m.affections[cancer]
            if a.affected and a.age_dx is None:
                targets.append((m.id, "age_dx", cancer))
    return ImputationPlan(tuple(targets), iterations, seed)


def replicate_rng(seed: int, replicate: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(replicate,)))


def generations(ped: Pedigree) -> dict[int, int]:
    """Generation level per member: children one below parents, spouses level."""
    children = defaultdict(list)
    spouses = defaultdict(set)
    for m in ped:
        for p in (m.mother_id, m.father_id):
            if p is not None:
                children[p].append(m.id)
        if m.mother_id is not None and m.father_id is not None:
            spouses[m.mother_id].add(m.father_id)
            spouses[m.father_id].add(m.mother_id)
    by_id = ped.by_id
    level: dict[int, int] = {}
    for start in sorted(by_id):
        if start in level:
            continue
        level[start] = 0
        queue = deque([start])
        while queue:
            i = queue.popleft()
            m = by_id[i]
            nbrs = [(p, -1) for p in (m.mother_id, m.father_id) if p is not None]
            nbrs += [(c, 1) for c in children[i]] + [(s, 0) for s in sorted(spouses[i])]
            for j, step in nbrs:
                if j not in level:
                    level[j] = level[i] + step
                    queue.append(j)
    return level


def _age_candidates(ped: Pedigree, target: int, level: dict[int, int]) -> list[int]:
    known = {m.id: m.cur_age for m in ped if m.cur_age is not None and not m.is_pseudo}
    same = [a for i, a in known.items() if level.get(i) == level[target]]
    if same:
        return sorted(same)
    return sorted(a + GENERATION_GAP * (level[i] - level[target]) for i, a in known.items())


def _lower_age_bound(member) -> int:
    ages = [a.age_dx for a in member.affections.values() if a.affected and a.age_dx is not None]
    ages += [iv.age for iv in member.interventions if iv.age is not None]
    return max([1, *ages])


def _diagnosis_weights(member, db: ModelDatabase, space: GenotypeSpace, cancer: str) -> np.ndarray:
    prior = founder_prior(space, db.allele_frequencies(member.ancestry))
    sexes = (member.sex,) if member.sex in (FEMALE, MALE) else (FEMALE, MALE)
    w = np.zeros(db.age_max)
    for sex in sexes:
        w += prior @ genotype_curves(member, db, space, cancer, sex)
    return w


def sample_missing_ages(ped: Pedigree, db: ModelDatabase, plan: ImputationPlan, replicate: int,
                        space: GenotypeSpace | None = None) -> Pedigree:
    """Complete one copy of ``ped`` for imputation replicate ``replicate``.

    Current ages come from relatives' known ages, shifted 28 years per
    generation when no same-generation relative has a known age. Diagnosis
    ages come from the prior-weighted penetrance truncated at the current age.
    """
    if not plan.targets:
        return ped
    if space is None:
        from .genotype import enumerate_space

        space = enumerate_space(len(db.genes), min(2, len(db.genes)), db.genes)
    rng = replicate_rng(plan.seed, replicate)
    members = ped.by_id
    level = generations(ped)

    age_targets = [t for t in plan.targets if t[1] == "cur_age"]
    if age_targets and not any(m.cur_age is not None for m in ped if not m.is_pseudo):
        raise NoAgesAnywhere("no member has a known current age")
    sampled = {}
    for mid, _ in age_targets:
        cands = _age_candidates(ped, mid, level)
        age = int(rng.choice(cands)) + int(rng.integers(-AGE_JITTER, AGE_JITTER + 1))
        lo = min(_lower_age_bound(members[mid]), db.age_max)
        sampled[mid] = int(np.clip(age, lo, db.age_max))
    for mid, age in sampled.items():
        members[mid] = replace(members[mid], cur_age=age)

    for target in plan.targets:
        if target[1] != "age_dx":
            continue
        mid, _, cancer = target
        m = members[mid]
        cur = min(m.cur_age, db.age_max)
        if cancer in db.cancers:
            w = _diagnosis_weights(m, db, space, cancer)[:cur]
        else:
            w = np.zeros(cur)
        if not w.sum() > 0:
            w = np.ones(cur)
        age = int(rng.choice(np.arange(1, cur + 1), p=w / w.sum()))
        aff = dict(m.affections)
        aff[cancer] = Affection(True, age)
        members[mid] = replace(m, affections=aff)

    return ped.with_members(members[m.id] for m in ped)


@dataclass
class ReplicateResult:
    posteriors: dict[int, np.ndarray]
    risks: dict[int, dict[str, RiskCurve]]
    skipped: list[dict] = field(default_factory=list)


def run_replicate(ped: Pedigree, db: ModelDatabase, space: GenotypeSpace, spec: ModelSpec,
                  plan: ImputationPlan, replicate: int, conditional: bool = True) -> ReplicateResult:
    filled = sample_missing_ages(ped, db, plan, replicate, space)
    posteriors = peel(filled, db, space)
    by_id = filled.by_id
    mode = "net" if spec.net_future_risk else "crude"
    risks: dict[int, dict[str, RiskCurve]] = {}
    skipped = []
    for pid, post in posteriors.items():
        member = by_id[pid]
        risks[pid] = {}
        for cancer in db.cancers:
            if member.affection(cancer).affected:
                skipped.append({"proband": pid, "cancer": cancer, "reason": "already affected"})
                continue
            if member.cur_age >= db.age_max:
                skipped.append({"proband": pid, "cancer": cancer, "reason": "no horizon before maximum age"})
                continue
            risks[pid][cancer] = future_risk(post, member, db, space, cancer, mode, spec.age_by, conditional)
    return ReplicateResult(posteriors, risks, skipped)


def _bands(stack: np.ndarray):
    est = stack.mean(axis=0)
    lo, hi = stack.min(axis=0), stack.max(axis=0)
    return np.clip(est, lo, hi), lo, hi


def aggregate(results: list[ReplicateResult], labels: tuple[str, ...]):
    """Mean / min / max over replicates, in the order given."""
    first = results[0]
    posteriors = {}
    for pid in first.posteriors:
        est, lo, hi = _bands(np.stack([r.posteriors[pid] for r in results]))
        posteriors[pid] = PosteriorDistribution(pid, labels, est, lo, hi)
    risks = {}
    for pid, curves in first.risks.items():
        risks[pid] = {}
        for cancer, curve in curves.items():
            reps = [r.risks[pid].get(cancer) for r in results]
            if any(c is None for c in reps):
                continue
            # an imputed proband age shifts the grid; align on horizon index
            n = min(len(c.by_age) for c in reps)
            est, lo, hi = _bands(np.stack([c.estimate[:n] for c in reps]))
            risks[pid][cancer] = RiskCurve(pid, cancer, curve.by_age[:n], est, lo, hi)
    return posteriors, risks


def run_with_imputation(ped: Pedigree, db: ModelDatabase, space: GenotypeSpace, spec: ModelSpec,
                        conditional: bool = True, parallel: bool | None = None):
    """Peel and project risk once per imputation replicate and aggregate.

    Returns ``(posteriors, risks, info)`` where ``posteriors`` maps proband
    id to :class:`PosteriorDistribution`, ``risks`` maps proband id to
    ``{cancer: RiskCurve}`` and ``info`` records the plan and skipped risks.
    """
    plan = make_plan(ped, spec.impute_iterations, spec.seed)
    n_rep = spec.impute_iterations if plan.targets else 1
    parallel = spec.parallel if parallel is None else parallel

    def one(rep: int) -> ReplicateResult:
        return run_replicate(ped, db, space, spec, plan, rep, conditional)

    if parallel and n_rep > 1:
        workers = min(n_rep, os.cpu_count() or 1)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, range(n_rep)))
    else:
        results = [one(r) for r in range(n_rep)]

    posteriors, risks = aggregate(results, space.labels)
    info = {
        "replicates": n_rep,
        "imputed": [list(t) for t in plan.targets],
        "skipped_risks": results[0].skipped,
    }
    return posteriors, risks, info
