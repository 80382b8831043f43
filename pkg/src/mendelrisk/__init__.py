"""Multi-gene carrier probabilities and future cancer risk from family pedigrees."""

from .engine import PosteriorDistribution, brute_force_posterior, member_likelihood, peel
from .genotype import (
    GenotypeSpace,
    constrain_by_tests,
    enumerate_space,
    founder_prior,
    transmission,
)
from .impute import ImputationPlan, make_plan, run_with_imputation, sample_missing_ages
from .model_db import (
    ModelDatabase,
    ModelSpec,
    apply_risk_modifiers,
    build_database,
    load_database,
    penetrance_lookup,
    save_database,
    synthesize_database,
)
from .pedigree import (
    CheckReport,
    MemberRecord,
    Pedigree,
    check_pedigree,
    detect_loops,
    load_pedigree,
    parse_pedigree,
    prune_disconnected,
)
from .pipeline import run_pipeline
from .risk import RiskCurve, future_risk, risk_grid

__version__ = "0.1.0"

__all__ = [
    "CheckReport",
    "GenotypeSpace",
    "ImputationPlan",
    "MemberRecord",
    "ModelDatabase",
    "ModelSpec",
    "Pedigree",
    "PosteriorDistribution",
    "RiskCurve",
    "apply_risk_modifiers",
    "brute_force_posterior",
    "build_database",
    "check_pedigree",
    "constrain_by_tests",
    "detect_loops",
    "enumerate_space",
    "founder_prior",
    "future_risk",
    "load_database",
    "load_pedigree",
    "make_plan",
    "member_likelihood",
    "parse_pedigree",
    "peel",
    "penetrance_lookup",
    "prune_disconnected",
    "risk_grid",
    "run_pipeline",
    "run_with_imputation",
    "sample_missing_ages",
    "save_database",
    "synthesize_database",
    "transmission",
]
