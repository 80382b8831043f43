"""Run-time benchmarks over gene count, paring level and pedigree size."""

from __future__ import annotations

import csv
import gc
import io
import time
from dataclasses import dataclass, replace
from importlib import resources

import numpy as np

from .genotype import enumerate_space, space_size
from .model_db import ModelSpec, build_database, synthesize_database
from .pedigree import Affection, MemberRecord, Pedigree, load_pedigree
from .pipeline import prepare
from .impute import run_with_imputation

FIELDS = ("K", "T", "members", "mean_seconds", "genotype_count")


def sample_path(name: str):
    return resources.files("mendelrisk") / "data" / f"{name}.csv"


def load_sample(name: str = "small_fam") -> Pedigree:
    with resources.as_file(sample_path(name)) as path:
        return load_pedigree(path)


def chain_pedigree(n_members: int, seed: int = 0, cancers=("BC", "OC")) -> Pedigree:
    """A single line of descent: each child marries a founder spouse and
    has one child. The last child is the proband."""
    if n_members < 3:
        raise ValueError("a chain needs at least 3 members")
    rng = np.random.default_rng(seed)
    members = []

    def person(mid, mother=None, father=None, sex=None, proband=False):
        sex = int(rng.integers(0, 2)) if sex is None else sex
        age = int(rng.integers(20, 85))
        aff = {}
        for c in cancers:
            hit = rng.random() < 0.15 and not (c == "OC" and sex == 1)
            aff[c] = Affection(True, int(rng.integers(20, age + 1))) if hit else Affection(False)
        return MemberRecord(mid, mother, father, sex, proband, age, False, aff)

    members.append(person(1, sex=0))
    members.append(person(2, sex=1))
    child = person(3, 1, 2)
    members.append(child)
    mother, father = 1, 2
    nid = 4
    while nid + 1 <= n_members:
        spouse = person(nid, sex=1 - child.sex)
        mother, father = (child.id, spouse.id) if child.sex == 0 else (spouse.id, child.id)
        child = person(nid + 1, mother, father)
        members += [spouse, child]
        nid += 2
    members[-1] = replace(members[-1], is_proband=True)
    if nid == n_members:
        members.append(person(nid, mother, father))
    return Pedigree(tuple(members), tuple(cancers))


def balanced_tree_pedigree(generations: int, children: int = 2, seed: int = 0) -> Pedigree:
    """Every non-founder marries a founder spouse and has ``children`` kids."""
    rng = np.random.default_rng(seed)
    members = [MemberRecord(1, sex=0, cur_age=90), MemberRecord(2, sex=1, cur_age=90)]
    couples = [(1, 2)]
    nid = 3
    for g in range(generations):
        nxt = []
        for mother, father in couples:
            for _ in range(children):
                sex = int(rng.integers(0, 2))
                kid = MemberRecord(nid, mother, father, sex, cur_age=max(1, 85 - 25 * (g + 1)))
                members.append(kid)
                nid += 1
                if g + 1 < generations:
                    spouse = MemberRecord(nid, sex=1 - sex, cur_age=kid.cur_age)
                    members.append(spouse)
                    nxt.append((kid.id, nid) if sex == 0 else (nid, kid.id))
                    nid += 1
        couples = nxt
    members[-1] = replace(members[-1], is_proband=True)
    return Pedigree(tuple(members), ())


@dataclass
class BenchRow:
    K: int
    T: int
    members: int
    mean_seconds: float
    genotype_count: int


def time_run(ped: Pedigree, K: int, T: int, repeats: int = 10, iterations: int = 10,
             seed: int = 0) -> BenchRow:
    full = synthesize_database(K, ("BC", "OC"), seed=seed)
    spec = ModelSpec(("BC", "OC"), full.genes, T, impute_iterations=iterations, parallel=False, seed=seed)
    db = build_database(full, spec)
    space = enumerate_space(K, T, db.genes)
    prepared, _ = prepare(ped)
    run_with_imputation(prepared, db, space, spec)  # warm-up, builds the kernel
    times = []
    # as in timeit, keep the collector from landing inside a timed run
    gc_was_enabled = gc.isenabled()
    gc.disable()
    try:
        for _ in range(repeats):
            t0 = time.perf_counter()
            run_with_imputation(prepared, db, space, spec)
            times.append(time.perf_counter() - t0)
    finally:
        if gc_was_enabled:
            gc.enable()
    count = len(space)
    assert count == space_size(K, T)
    return BenchRow(K, T, len(prepared), float(np.mean(times)), count)


def sweep(genes=(2, 6, 10, 14, 18, 22), paring=(2,), members=(), repeats: int = 10,
          iterations: int = 10, pedigree: Pedigree | None = None, fixed_K: int = 6,
          fixed_T: int = 2, seed: int = 0) -> list[BenchRow]:
    """Gene/paring sweep on ``pedigree`` (default: the small sample) plus a
    pedigree-size sweep on chain pedigrees at (fixed_K, fixed_T)."""
    rows = []
    base = pedigree if pedigree is not None else load_sample("small_fam")
    for T in paring:
        for K in genes:
            if T > K:
                continue
            rows.append(time_run(base, K, T, repeats, iterations, seed))
    for n in members:
        rows.append(time_run(chain_pedigree(n, seed), fixed_K, fixed_T, repeats, iterations, seed))
    return rows


def rows_to_csv(rows: list[BenchRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(FIELDS)
    for r in rows:
        w.writerow([r.K, r.T, r.members, f"{r.mean_seconds:.6f}", r.genotype_count])
    return buf.getvalue()


def linear_fit_r2(x, y) -> tuple[float, float, float]:
    """Least-squares ``y = a + b x``; returns (a, b, R^2)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    b, a = np.polyfit(x, y, 1)
    resid = y - (a + b * x)
    ss_tot = ((y - y.mean()) ** 2).sum()
    r2 = 1.0 - (resid**2).sum() / ss_tot if ss_tot > 0 else 1.0
    return float(a), float(b), float(r2)
