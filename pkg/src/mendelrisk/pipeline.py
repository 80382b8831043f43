"""End-to-end run producing the result document."""

from __future__ import annotations

import csv
import io
import logging

from . import registry
from .errors import PedigreeCheckError
from .genotype import enumerate_space
from .impute import run_with_imputation
from .model_db import ModelDatabase, ModelSpec, build_database
from .pedigree import Pedigree, check_pedigree, detect_loops, prune_disconnected

log = logging.getLogger(__name__)

RESULT_SCHEMA = "mendelrisk.result/v1"


def model_banner(db: ModelDatabase) -> str:
    names = [registry.cancer_name(c) for c in db.cancers]
    return (
        f"Your model has {len(names)} cancers - {','.join(names)} "
        f"and {len(db.genes)} genes - {','.join(db.genes)}"
    )


def prepare(ped: Pedigree):
    """check + prune + loop detection; raises on any fatal condition."""
    checked, report = check_pedigree(ped)
    report.raise_if_fatal()
    pruned, prune_report = prune_disconnected(checked)
    report.extend(prune_report)
    if detect_loops(pruned):
        report.fail("LoopDetected", "the pedigree contains a loop, which is not supported")
        raise PedigreeCheckError(report)
    return pruned, report


def run_pipeline(ped: Pedigree, full_db: ModelDatabase, spec: ModelSpec,
                 conditional: bool = True) -> dict:
    pruned, report = prepare(ped)
    db = build_database(full_db, spec)
    absent = [c for c in db.cancers if c not in pruned.cancer_tags]
    if absent:
        report.warn("CancerColumnsAbsent", [], f"no isAff columns for {', '.join(absent)}; members treated as unaffected")
    space = enumerate_space(len(db.genes), spec.max_mut, db.genes)
    log.info(model_banner(db))

    posteriors, risks, info = run_with_imputation(pruned, db, space, spec, conditional)
    return {
        "schema": RESULT_SCHEMA,
        "model": {
            "cancers": [registry.cancer_name(c) for c in db.cancers],
            "genes": list(db.genes),
            "max_mut": spec.max_mut,
            "genotypes": len(space),
            "net": spec.net_future_risk,
            "age_by": spec.age_by,
            "iterations": spec.impute_iterations,
            "seed": spec.seed,
            "conditional": conditional,
        },
        "check_report": report.to_dict(),
        "imputation": info,
        "posterior.prob": {str(pid): posteriors[pid].rows() for pid in sorted(posteriors)},
        "future.risk": {
            str(pid): {registry.cancer_name(c): curve.rows() for c, curve in risks[pid].items()}
            for pid in sorted(risks)
        },
    }


def document_to_csv(doc: dict) -> str:
    """Flatten a result document to one long-format table."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["section", "proband", "cancer", "key", "estimate", "lower", "upper"])
    for pid, rows in doc["posterior.prob"].items():
        for r in rows:
            w.writerow(["posterior", pid, "", r["genes"], repr(r["estimate"]), repr(r["lower"]), repr(r["upper"])])
    for pid, by_cancer in doc["future.risk"].items():
        for cancer, rows in by_cancer.items():
            for r in rows:
                w.writerow(["risk", pid, cancer, r["ByAge"], repr(r["estimate"]), repr(r["lower"]), repr(r["upper"])])
    return buf.getvalue()
