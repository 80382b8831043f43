from dataclasses import replace

import numpy as np
import pytest

from mendelrisk.bench import load_sample
from mendelrisk.engine import peel
from mendelrisk.errors import NoAgesAnywhere
from mendelrisk.genotype import enumerate_space
from mendelrisk.impute import (
    GENERATION_GAP,
    ImputationPlan,
    generations,
    make_plan,
    run_replicate,
    run_with_imputation,
    sample_missing_ages,
)
from mendelrisk.model_db import ModelSpec, build_database, synthesize_database
from mendelrisk.pedigree import Affection, MemberRecord, Pedigree, check_pedigree
from mendelrisk.pipeline import prepare

GENES = ("BRCA1", "BRCA2", "ATM", "MSH2")


@pytest.fixture(scope="module")
def setup():
    full = synthesize_database(GENES, ("BC", "OC"), "peaked", 11)
    spec = ModelSpec(("BC", "OC"), GENES, impute_iterations=6, seed=3)
    db = build_database(full, spec)
    space = enumerate_space(4, 2, GENES)
    ped, _ = prepare(load_sample("small_fam"))
    return db, space, spec, ped


def complete(ped):
    return ped.with_members(
        replace(m, cur_age=m.cur_age or 50,
                affections={c: Affection(a.affected, a.age_dx or (45 if a.affected else None))
                            for c, a in m.affections.items()})
        for m in ped
    )


class TestPlan:
    def test_targets(self, setup):
        _, _, _, ped = setup
        plan = make_plan(ped, 20, 0)
        assert plan.targets == ((6, "cur_age"), (18, "age_dx", "OC"))

    def test_iterations_positive(self):
        with pytest.raises(ValueError):
            ImputationPlan((), 0)

    def test_generations(self):
        levels = generations(load_sample("small_fam"))
        assert levels[1] == levels[2] == levels[18] == levels[19]
        assert levels[5] == levels[9] == levels[1] + 1
        assert levels[13] == levels[10] == levels[1] + 2
        assert levels[16] == levels[1] + 3


class TestSampling:
    def test_no_targets_unchanged(self, setup):
        db, space, _, ped = setup
        full = complete(ped)
        plan = make_plan(full, 5, 1)
        for rep in range(3):
            assert sample_missing_ages(full, db, plan, rep, space) is full

    def test_deterministic(self, setup):
        db, space, _, ped = setup
        plan = make_plan(ped, 20, 9)
        a = sample_missing_ages(ped, db, plan, 3, space)
        b = sample_missing_ages(ped, db, plan, 3, space)
        assert a.members == b.members

    def test_diagnosis_age_bounded_by_current_age(self, setup):
        db, space, _, _ = setup
        ped = Pedigree((MemberRecord(1, sex=0, is_proband=True, cur_age=60,
                                     affections={"BC": Affection(True, None)}),), ("BC",))
        plan = make_plan(ped, 200, 4)
        ages = [sample_missing_ages(ped, db, plan, r, space).by_id[1].affection("BC").age_dx for r in range(200)]
        assert min(ages) >= 1 and max(ages) <= 60
        assert len(set(ages)) > 10

    def test_current_age_from_relatives(self, setup):
        db, space, _, _ = setup
        # only the grandparents have ages; the grandchild is two generations down
        ped = Pedigree((
            MemberRecord(1, sex=0, cur_age=80), MemberRecord(2, sex=1, cur_age=80),
            MemberRecord(3, 1, 2, 0), MemberRecord(4, sex=1),
            MemberRecord(5, 3, 4, 1, True),
        ), ())
        plan = make_plan(ped, 50, 0)
        for r in range(50):
            filled = sample_missing_ages(ped, db, plan, r, space)
            assert abs(filled.by_id[5].cur_age - (80 - 2 * GENERATION_GAP)) <= 5
            assert abs(filled.by_id[3].cur_age - (80 - GENERATION_GAP)) <= 5

    def test_current_age_not_below_diagnosis(self, setup):
        db, space, _, _ = setup
        ped = Pedigree((MemberRecord(1, sex=0, cur_age=20), MemberRecord(2, sex=1, cur_age=20),
                        MemberRecord(3, 1, 2, 0, True, None, affections={"BC": Affection(True, 70)})), ("BC",))
        plan = make_plan(ped, 10, 0)
        for r in range(10):
            assert sample_missing_ages(ped, db, plan, r, space).by_id[3].cur_age >= 70

    def test_no_ages_anywhere(self, setup):
        db, space, _, _ = setup
        ped = Pedigree((MemberRecord(1, sex=0), MemberRecord(2, sex=1), MemberRecord(3, 1, 2, 0, True)), ())
        with pytest.raises(NoAgesAnywhere):
            sample_missing_ages(ped, db, make_plan(ped), 0, space)


class TestAggregation:
    def test_complete_pedigree_degenerate_bands(self, setup):
        db, space, spec, ped = setup
        full = complete(ped)
        posts, risks, info = run_with_imputation(full, db, space, spec)
        assert info["replicates"] == 1
        for p in posts.values():
            np.testing.assert_array_equal(p.lower, p.estimate)
            np.testing.assert_array_equal(p.upper, p.estimate)
            np.testing.assert_array_equal(p.estimate, peel(full, db, space)[p.proband_id])
        for curves in risks.values():
            for c in curves.values():
                np.testing.assert_array_equal(c.lower, c.estimate)
                np.testing.assert_array_equal(c.upper, c.estimate)

    def test_mean_of_two_replicates(self, setup):
        db, space, _, ped = setup
        spec = ModelSpec(("BC", "OC"), GENES, impute_iterations=2, seed=17, parallel=False)
        posts, risks, _ = run_with_imputation(ped, db, space, spec)
        plan = make_plan(ped, 2, 17)
        runs = [peel(sample_missing_ages(ped, db, plan, r, space), db, space)[5] for r in range(2)]
        np.testing.assert_allclose(posts[5].estimate, (runs[0] + runs[1]) / 2, rtol=0, atol=1e-15)
        np.testing.assert_array_equal(posts[5].lower, np.minimum(*runs))
        np.testing.assert_array_equal(posts[5].upper, np.maximum(*runs))
        reps = [run_replicate(ped, db, space, spec, plan, r) for r in range(2)]
        bc = [r.risks[5]["BC"].estimate for r in reps]
        np.testing.assert_allclose(risks[5]["BC"].estimate, (bc[0] + bc[1]) / 2, atol=1e-15)

    def test_parallel_bit_identical(self, setup):
        db, space, spec, ped = setup
        seq = run_with_imputation(ped, db, space, spec, parallel=False)
        par = run_with_imputation(ped, db, space, spec, parallel=True)
        for pid in seq[0]:
            for attr in ("estimate", "lower", "upper"):
                np.testing.assert_array_equal(getattr(seq[0][pid], attr), getattr(par[0][pid], attr))
        for pid in seq[1]:
            for cancer, curve in seq[1][pid].items():
                other = par[1][pid][cancer]
                assert curve.by_age == other.by_age
                for attr in ("estimate", "lower", "upper"):
                    np.testing.assert_array_equal(getattr(curve, attr), getattr(other, attr))

    def test_bands_contain_estimate(self, setup):
        db, space, spec, ped = setup
        posts, risks, _ = run_with_imputation(ped, db, space, spec)
        for p in posts.values():
            assert (p.lower <= p.estimate).all() and (p.estimate <= p.upper).all()
            assert abs(p.estimate.sum() - 1) < 1e-9
        for curves in risks.values():
            for c in curves.values():
                assert (c.lower <= c.estimate).all() and (c.estimate <= c.upper).all()

    def test_imputed_proband_age(self, setup):
        db, space, _, ped = setup
        ped = ped.with_members(replace(m, is_proband=m.id == 6) for m in ped)
        ped, _ = check_pedigree(ped)
        spec = ModelSpec(("BC", "OC"), GENES, impute_iterations=5, seed=2)
        posts, risks, _ = run_with_imputation(ped, db, space, spec)
        assert set(posts) == {6}
        for c in risks[6].values():
            assert len(c.by_age) == len(c.estimate)
            assert (np.diff(c.estimate) >= -1e-15).all()
