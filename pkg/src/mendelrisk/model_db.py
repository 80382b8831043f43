"""Penetrance / allele-frequency database and model options.

Penetrance is stored as a per-year probability on a 6-d grid
``(cancer, config, race, sex, age, type)``. The config axis holds the
noncarrier curve followed by one curve per gene; ``type`` is ``Net``
(density of the cancer age with no competing death) or ``Crude`` (yearly
increments of P(T* <= t, cancer first)).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from . import registry
from .errors import InvalidParing, OutOfRangeAge, UnknownTag
from .registry import FEMALE, MALE

SCHEMA_ID = "mendelrisk.database/v1"
PENET_TYPES = ("Net", "Crude")
NET, CRUDE = 0, 1
DEFAULT_AGE_MAX = 94


@dataclass(frozen=True, eq=False)
class ModelDatabase:
    cancers: tuple[str, ...]
    genes: tuple[str, ...]
    penetrance: np.ndarray
    allele_freq: np.ndarray
    riskmod: np.ndarray
    races: tuple[str, ...] = registry.RACES
    ancestries: tuple[str, ...] = registry.ANCESTRIES
    interventions: tuple[str, ...] = registry.INTERVENTIONS
    age_max: int = DEFAULT_AGE_MAX

    def __post_init__(self):
        for name in ("penetrance", "allele_freq", "riskmod"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        want = (len(self.cancers), len(self.configs), len(self.races), 2, self.age_max, 2)
        if self.penetrance.shape != want:
            raise ValueError(f"penetrance shape {self.penetrance.shape}, expected {want}")
        if self.allele_freq.shape != (len(self.genes), len(self.ancestries)):
            raise ValueError(f"allele_freq shape {self.allele_freq.shape} does not match genes x ancestries")
        if self.riskmod.shape != (len(self.interventions), len(self.cancers), len(self.configs)):
            raise ValueError(f"riskmod shape {self.riskmod.shape} does not match interventions x cancers x configs")

    @property
    def configs(self) -> tuple[str, ...]:
        return ("noncarrier",) + tuple(self.genes)

    def cancer_index(self, cancer: str) -> int:
        try:
            return self.cancers.index(cancer)
        except ValueError:
            try:
                return self.cancers.index(registry.cancer_tag(cancer))
            except (ValueError, UnknownTag):
                raise UnknownTag(f"cancer {cancer!r} is not in the database") from None

    def race_index(self, race: str | None) -> int:
        if race is None:
            race = registry.DEFAULT_RACE
        try:
            return self.races.index(race)
        except ValueError:
            raise UnknownTag(f"race {race!r} is not in the database") from None

    def ancestry_index(self, ancestry: str | None) -> int:
        if ancestry is None:
            ancestry = registry.DEFAULT_ANCESTRY
        try:
            return self.ancestries.index(ancestry)
        except ValueError:
            raise UnknownTag(f"ancestry {ancestry!r} is not in the database") from None

    def allele_frequencies(self, ancestry: str | None = None) -> np.ndarray:
        return self.allele_freq[:, self.ancestry_index(ancestry)]

    def validate(self, atol: float = 1e-12) -> None:
        """Raise ValueError if a database invariant is violated."""
        pen = self.penetrance
        if (pen < 0).any() or (pen > 1).any():
            raise ValueError("penetrance values must lie in [0, 1]")
        net_cum = np.cumsum(pen[..., NET], axis=-1)
        crude_cum = np.cumsum(pen[..., CRUDE], axis=-1)
        if (net_cum[..., -1] > 1 + atol).any():
            raise ValueError("net penetrance sums above 1 for some slice")
        if (crude_cum > net_cum + atol).any():
            raise ValueError("crude cumulative risk exceeds net cumulative risk for some slice")
        if not ((self.allele_freq > 0) & (self.allele_freq < 0.5)).all():
            raise ValueError("allele frequencies must lie in (0, 0.5)")
        if (self.riskmod < 0).any():
            raise ValueError("risk-modifier ratios must be nonnegative")


@dataclass(frozen=True)
class ModelSpec:
    """User-selected model options.

    ``max_mut=None`` falls back to 2 (or K when fewer than two genes).
    """

    cancers: tuple[str, ...]
    genes: tuple[str, ...]
    max_mut: int | None = None
    net_future_risk: bool = False
    age_by: int = 5
    impute_iterations: int = 20
    parallel: bool = True
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "cancers", tuple(self.cancers))
        object.__setattr__(self, "genes", tuple(self.genes))
        if not self.genes:
            raise ValueError("at least one gene is required")
        if not self.cancers:
            raise ValueError("at least one cancer is required")
        if self.max_mut is None:
            object.__setattr__(self, "max_mut", min(2, len(self.genes)))
        if not 1 <= self.max_mut <= len(self.genes):
            raise InvalidParing(
                f"max_mut must be between 1 and the number of genes ({len(self.genes)}), got {self.max_mut}"
            )
        if self.age_by < 1:
            raise ValueError("age_by must be >= 1")
        if self.impute_iterations < 1:
            raise ValueError("impute_iterations must be >= 1")


def build_database(full: ModelDatabase, spec: ModelSpec) -> ModelDatabase:
    """Restrict ``full`` to the cancers and genes requested in ``spec``."""
    c_idx = [full.cancer_index(c) for c in spec.cancers]
    g_idx = []
    for g in spec.genes:
        if g not in full.genes:
            raise UnknownTag(f"gene {g!r} is not in the database")
        g_idx.append(full.genes.index(g))
    cfg_idx = [0] + [k + 1 for k in g_idx]
    pen = full.penetrance[np.ix_(c_idx, cfg_idx)]
    return replace(
        full,
        cancers=tuple(full.cancers[i] for i in c_idx),
        genes=tuple(full.genes[k] for k in g_idx),
        penetrance=pen,
        allele_freq=full.allele_freq[g_idx],
        riskmod=full.riskmod[:, c_idx][:, :, cfg_idx],
    )


# ---------------------------------------------------------------------------
# curves


def hazard_from_density(density: np.ndarray) -> np.ndarray:
    """Discrete hazard h_t = d_t / P(T >= t) along the last axis."""
    d = np.asarray(density, dtype=float)
    at_risk = 1.0 - np.cumsum(d, axis=-1) + d
    with np.errstate(divide="ignore", invalid="ignore"):
        h = np.where(at_risk > 0, d / at_risk, 0.0)
    return np.clip(h, 0.0, 1.0)


def density_from_hazard(hazard: np.ndarray) -> np.ndarray:
    h = np.asarray(hazard, dtype=float)
    surv = np.cumprod(1.0 - h, axis=-1)
    before = np.concatenate([np.ones_like(surv[..., :1]), surv[..., :-1]], axis=-1)
    return h * before


def _sex_index(sex) -> int:
    if sex in (FEMALE, "Female", "female"):
        return 0
    if sex in (MALE, "Male", "male"):
        return 1
    raise ValueError(f"sex must be female (0) or male (1), got {sex!r}")


def dominant_configs(db: ModelDatabase, carriers: np.ndarray, cancer: str, race, sex) -> np.ndarray:
    """Config index used for each carrier vector (rows of ``carriers``).

    Noncarriers map to 0; otherwise the carried gene with the largest
    lifetime net risk for this cancer, race and sex (first gene on ties).
    """
    c, r, s = db.cancer_index(cancer), db.race_index(race), _sex_index(sex)
    lifetime = db.penetrance[c, 1:, r, s, :, NET].sum(axis=-1)
    bits = np.asarray(carriers, dtype=bool).reshape(-1, len(db.genes))
    scored = np.where(bits, lifetime[None, :], -np.inf)
    idx = np.argmax(scored, axis=1) + 1
    return np.where(bits.any(axis=1), idx, 0)


def _resolve_config(db: ModelDatabase, config, cancer, race, sex) -> int:
    if isinstance(config, str):
        if config in db.configs:
            return db.configs.index(config)
        names = config.split(".")
        unknown = [n for n in names if n not in db.genes]
        if unknown:
            raise UnknownTag(f"genes {unknown} are not in the database")
        config = [int(g in names) for g in db.genes]
    if isinstance(config, (int, np.integer)):
        if not 0 <= config < len(db.configs):
            raise UnknownTag(f"config index {config} out of range")
        return int(config)
    return int(dominant_configs(db, np.asarray(config)[None, :], cancer, race, sex)[0])


def penetrance_curve(db: ModelDatabase, cancer, config, race, sex, kind: str = "net") -> np.ndarray:
    """Yearly penetrance over ages 1..age_max."""
    k = NET if kind.lower() == "net" else CRUDE
    if kind.lower() not in ("net", "crude"):
        raise ValueError(f"kind must be 'net' or 'crude', got {kind!r}")
    cfg = _resolve_config(db, config, cancer, race, sex)
    return db.penetrance[db.cancer_index(cancer), cfg, db.race_index(race), _sex_index(sex), :, k]


def penetrance_lookup(db: ModelDatabase, cancer, config, race, sex, age: int, kind: str = "net") -> float:
    """P(T = age | config, race, sex) for ``kind='net'``; the crude yearly
    increment for ``kind='crude'``. Missing race falls back to All_Races."""
    if not 1 <= age <= db.age_max:
        raise OutOfRangeAge(f"age {age} outside [1, {db.age_max}]")
    return float(penetrance_curve(db, cancer, config, race, sex, kind)[age - 1])


def modifier_ratios(db: ModelDatabase, member, cancer, cfg: int) -> list[tuple[float, int]]:
    out = []
    c = db.cancer_index(cancer)
    for iv in member.interventions:
        if iv.kind not in db.interventions:
            continue
        ratio = float(db.riskmod[db.interventions.index(iv.kind), c, cfg])
        age = iv.age if iv.age is not None else member.cur_age
        if ratio != 1.0 and age is not None:
            out.append((ratio, age))
    return out


def modify_curve(curve: np.ndarray, ratios: Sequence[tuple[float, int]]) -> np.ndarray:
    """Scale the discrete hazard by each ratio from its age on and rebuild
    the density."""
    if not ratios:
        return np.asarray(curve, dtype=float)
    h = hazard_from_density(curve)
    for ratio, age in ratios:
        h[max(age, 1) - 1:] *= ratio
    return density_from_hazard(np.clip(h, 0.0, 1.0))


def apply_risk_modifiers(db: ModelDatabase, member, cancer, config, sex, kind: str = "net") -> np.ndarray:
    """Penetrance curve for ``member`` after its prophylactic interventions.

    Pairs without a configured ratio pass through unchanged.
    """
    cfg = _resolve_config(db, config, cancer, member.race, sex)
    curve = penetrance_curve(db, cancer, cfg, member.race, sex, kind)
    return modify_curve(curve, modifier_ratios(db, member, cancer, cfg))


# ---------------------------------------------------------------------------
# synthesis


def other_death_hazard(age_max: int = DEFAULT_AGE_MAX, scale: float = 1.0) -> np.ndarray:
    ages = np.arange(1, age_max + 1)
    return np.clip(scale * 2e-4 * np.exp(0.08 * (ages - 1)), 0.0, 0.5)


def crude_from_net(net: np.ndarray, other_death: np.ndarray) -> np.ndarray:
    """Yearly increments of P(T* <= t, J = 1) given a net density and an
    independent other-cause death hazard."""
    alive = np.cumprod(1.0 - other_death)
    alive_before = np.concatenate([[1.0], alive[:-1]])
    return net * alive_before


def _as_tag(name: str) -> str:
    try:
        return registry.cancer_tag(name)
    except UnknownTag:
        return name


_PROFILES = ("constant-hazard", "ramp", "peaked")


def _profile_shape(profile: str, age_max: int) -> np.ndarray:
    ages = np.arange(1, age_max + 1, dtype=float)
    if profile == "constant-hazard":
        return np.ones(age_max)
    if profile == "ramp":
        return 2.0 * ages / age_max
    if profile == "peaked":
        return 3.0 * np.exp(-0.5 * ((ages - 55.0) / 15.0) ** 2)
    raise ValueError(f"profile must be one of {_PROFILES}, got {profile!r}")


def synthesize_database(
    genes: int | Sequence[str] = 4,
    cancers: int | Sequence[str] = 2,
    profile: str = "constant-hazard",
    seed: int = 0,
    *,
    base_hazard: float | None = None,
    other_death: float = 1.0,
    age_max: int = DEFAULT_AGE_MAX,
) -> ModelDatabase:
    """Random but valid database for tests, demos and benchmarks.

    Carrier hazards are a relative-risk multiple (> 1) of the noncarrier
    hazard; crude slices come from the net density and a Gompertz-like
    other-cause death hazard scaled by ``other_death`` (0 disables it).
    ``base_hazard`` fixes the noncarrier hazard of every cancer.
    """
    if isinstance(genes, int):
        if genes < 1:
            raise ValueError("need at least one gene")
        genes = registry.GENES[:genes] if genes <= len(registry.GENES) else tuple(
            f"G{k + 1}" for k in range(genes)
        )
    if isinstance(cancers, int):
        if cancers < 1:
            raise ValueError("need at least one cancer")
        tags = tuple(registry.CANCERS)
        cancers = tags[:cancers] if cancers <= len(tags) else tuple(f"C{r + 1}" for r in range(cancers))
    genes = tuple(genes)
    cancers = tuple(_as_tag(c) for c in cancers)
    K, R = len(genes), len(cancers)
    rng = np.random.default_rng(seed)
    shape = _profile_shape(profile, age_max)

    races = registry.RACES
    race_mult = np.concatenate([[1.0], rng.uniform(0.7, 1.3, len(races) - 1)])
    base = rng.uniform(5e-4, 3e-3, R) if base_hazard is None else np.full(R, float(base_hazard))
    rr = rng.uniform(1.5, 12.0, (R, K))
    odeath = other_death_hazard(age_max, other_death)

    pen = np.zeros((R, K + 1, len(races), 2, age_max, 2))
    for r, tag in enumerate(cancers):
        allowed = registry.allowed_sexes(tag)
        for s in (0, 1):
            if s not in allowed:
                continue
            sex_mult = 0.01 if (tag == "BC" and s == MALE) else 1.0
            for ri in range(len(races)):
                h0 = base[r] * sex_mult * race_mult[ri]
                hazards = [h0] + [h0 * rr[r, k] for k in range(K)]
                for cfg, h in enumerate(hazards):
                    hz = np.clip(h * shape, 0.0, 0.95)
                    net = density_from_hazard(hz)
                    pen[r, cfg, ri, s, :, NET] = net
                    pen[r, cfg, ri, s, :, CRUDE] = crude_from_net(net, odeath)

    freqs = np.empty((K, len(registry.ANCESTRIES)))
    non_aj = rng.uniform(2e-4, 4e-3, K)
    freqs[:, registry.ANCESTRIES.index("nonAJ")] = non_aj
    freqs[:, registry.ANCESTRIES.index("AJ")] = np.minimum(non_aj * rng.uniform(0.5, 5.0, K), 0.45)
    freqs[:, registry.ANCESTRIES.index("Italian")] = np.minimum(non_aj * rng.uniform(0.5, 2.0, K), 0.45)

    riskmod = np.ones((len(registry.INTERVENTIONS), R, K + 1))
    defaults = {("Mastectomy", "BC"): 0.1, ("Oophorectomy", "OC"): 0.2,
                ("Oophorectomy", "BC"): 0.6, ("Hysterectomy", "ENDO"): 0.1}
    for (kind, tag), ratio in defaults.items():
        if tag in cancers:
            riskmod[registry.INTERVENTIONS.index(kind), cancers.index(tag), :] = ratio

    db = ModelDatabase(
        cancers=cancers, genes=genes, penetrance=pen, allele_freq=freqs,
        riskmod=riskmod, age_max=age_max,
    )
    db.validate()
    return db


# ---------------------------------------------------------------------------
# serialization


def database_to_dict(db: ModelDatabase) -> dict:
    return {
        "schema": SCHEMA_ID,
        "age_max": db.age_max,
        "penetrance": {
            "axes": ["cancer", "config", "race", "sex", "age", "penet_type"],
            "cancer": list(db.cancers),
            "config": list(db.configs),
            "race": list(db.races),
            "sex": list(registry.SEX_LABELS),
            "age": list(range(1, db.age_max + 1)),
            "penet_type": list(PENET_TYPES),
            "values": db.penetrance.tolist(),
        },
        "allele_freq": {
            "axes": ["gene", "ancestry"],
            "gene": list(db.genes),
            "ancestry": list(db.ancestries),
            "values": db.allele_freq.tolist(),
        },
        "riskmod": {
            "axes": ["intervention", "cancer", "config"],
            "intervention": list(db.interventions),
            "cancer": list(db.cancers),
            "config": list(db.configs),
            "values": db.riskmod.tolist(),
        },
    }


def database_from_dict(doc: dict) -> ModelDatabase:
    try:
        pen = doc["penetrance"]
        af = doc["allele_freq"]
        rm = doc.get("riskmod")
        configs = list(pen["config"])
        genes = tuple(af["gene"])
        if configs[0] != "noncarrier" or tuple(configs[1:]) != genes:
            raise ValueError("penetrance config axis must be 'noncarrier' followed by the allele_freq genes")
        if list(pen.get("sex", registry.SEX_LABELS)) != list(registry.SEX_LABELS):
            raise ValueError("sex axis must be ['Female', 'Male']")
        if list(pen.get("penet_type", PENET_TYPES)) != list(PENET_TYPES):
            raise ValueError("penet_type axis must be ['Net', 'Crude']")
        cancers = tuple(pen["cancer"])
        interventions = tuple(rm["intervention"]) if rm else registry.INTERVENTIONS
        riskmod = (
            np.asarray(rm["values"], dtype=float) if rm
            else np.ones((len(interventions), len(cancers), len(configs)))
        )
        return ModelDatabase(
            cancers=cancers,
            genes=genes,
            penetrance=np.asarray(pen["values"], dtype=float),
            allele_freq=np.asarray(af["values"], dtype=float),
            riskmod=riskmod,
            races=tuple(pen["race"]),
            ancestries=tuple(af["ancestry"]),
            interventions=interventions,
            age_max=int(doc.get("age_max", DEFAULT_AGE_MAX)),
        )
    except (KeyError, TypeError, IndexError) as exc:
        raise ValueError(f"malformed database document: {exc!r}") from exc


def save_database(db: ModelDatabase, path) -> None:
    with open(path, "w") as fh:
        json.dump(database_to_dict(db), fh)


def load_database(path) -> ModelDatabase:
    with open(path) as fh:
        db = database_from_dict(json.load(fh))
    db.validate()
    return db
