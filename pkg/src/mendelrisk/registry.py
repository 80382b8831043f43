"""Nomenclature for cancers, genes, races, ancestries and interventions.

Cancer tags are the two- to four-letter short names used in pedigree
columns (``isAffBC``/``AgeBC``); long names are accepted wherever a tag is
expected and are used as keys in result documents.
"""

from __future__ import annotations

from .errors import UnknownTag

CANCERS: dict[str, str] = {
    "BRA": "Brain",
    "BC": "Breast",
    "CER": "Cervical",
    "COL": "Colorectal",
    "ENDO": "Endometrial",
    "GAS": "Gastric",
    "KID": "Kidney",
    "LEUK": "Leukemia",
    "MELA": "Melanoma",
    "OC": "Ovarian",
    "OST": "Osteosarcoma",
    "PANC": "Pancreas",
    "PROS": "Prostate",
    "SMA": "Small intestine",
    "STS": "Soft Tissue Sarcoma",
    "THY": "Thyroid",
    "UB": "Urinary Bladder",
    "HEP": "Hepatobiliary",
}

GENES: tuple[str, ...] = (
    "APC", "ATM", "BARD1", "BMPR1A", "BRCA1", "BRCA2", "BRIP1", "CDH1",
    "CDK4", "CDKN2A", "CHEK2", "EPCAM", "MLH1", "MSH2", "MSH6", "MUTYH",
    "NBN", "PALB2", "PMS2", "PTEN", "RAD51C", "RAD51D", "SMAD4", "STK11",
    "TP53",
)

RACES: tuple[str, ...] = (
    "All_Races", "AIAN", "Asian", "Black", "White", "Hispanic", "WH", "WNH",
)
DEFAULT_RACE = "All_Races"

ANCESTRIES: tuple[str, ...] = ("AJ", "nonAJ", "Italian")
DEFAULT_ANCESTRY = "nonAJ"

INTERVENTIONS: tuple[str, ...] = ("Mastectomy", "Hysterectomy", "Oophorectomy")

MARKERS: tuple[str, ...] = ("CK14", "CK5.6", "ER", "PR", "HER2", "MSI")

FEMALE, MALE = 0, 1
SEX_LABELS = ("Female", "Male")

# cancers restricted to one sex; anything absent is allowed for both
SEX_SPECIFIC: dict[str, frozenset[int]] = {
    "PROS": frozenset({MALE}),
    "OC": frozenset({FEMALE}),
    "CER": frozenset({FEMALE}),
    "ENDO": frozenset({FEMALE}),
}

_LONG_TO_TAG = {v.lower(): k for k, v in CANCERS.items()}


def cancer_tag(name: str) -> str:
    """Resolve a short tag or long cancer name to its short tag."""
    if name in CANCERS:
        return name
    tag = _LONG_TO_TAG.get(name.lower())
    if tag is None:
        if name.upper() in CANCERS:
            return name.upper()
        raise UnknownTag(f"unknown cancer {name!r}")
    return tag


def cancer_name(tag: str) -> str:
    return CANCERS.get(tag, tag)


def allowed_sexes(tag: str, overrides: dict[str, frozenset[int]] | None = None):
    table = SEX_SPECIFIC if overrides is None else {**SEX_SPECIFIC, **overrides}
    return table.get(tag, frozenset({FEMALE, MALE}))


def sex_possible(tag: str, sex: int | None) -> bool:
    """True when ``sex`` can develop the cancer (unknown sex always can)."""
    if sex is None:
        return True
    return sex in allowed_sexes(tag)
