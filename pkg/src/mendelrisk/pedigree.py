"""Pedigree data model, file parsing and the consistency checks.

Column names follow the conventional layout: ``ID``, ``MotherID``,
``FatherID``, ``Sex`` (0 female, 1 male, NA unknown), ``isProband``,
``CurAge``, ``isDead``, ``isAff<TAG>``/``Age<TAG>`` pairs per cancer,
``race``, ``Ancestry``, ``Twins``, ``riskmod``/``InterAge`` and one column
per tested gene.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from collections import defaultdict
from dataclasses import dataclass, field, replace
from typing import Any, Iterable, Mapping

from . import registry
from .errors import MalformedInput, MissingColumn, OrphanAgeColumn
from .registry import FEMALE, MALE

log = logging.getLogger(__name__)

REQUIRED_COLUMNS = ("ID", "MotherID", "FatherID", "Sex", "isProband", "CurAge", "isDead")
OPTIONAL_COLUMNS = ("race", "Ancestry", "Twins", "riskmod", "InterAge")
NA_TOKENS = frozenset({"", "NA", "N/A", "NaN", "nan", "None", "null", "."})


@dataclass(frozen=True)
class Affection:
    affected: bool
    age_dx: int | None = None


@dataclass(frozen=True)
class Intervention:
    kind: str
    age: int | None


@dataclass(frozen=True)
class MemberRecord:
    id: int
    mother_id: int | None = None
    father_id: int | None = None
    sex: int | None = None
    is_proband: bool = False
    cur_age: int | None = None
    is_dead: bool | None = None
    affections: Mapping[str, Affection] = field(default_factory=dict)
    race: str | None = None
    ancestry: str | None = None
    twin_group: int = 0
    interventions: tuple[Intervention, ...] = ()
    germline_results: Mapping[str, int | None] = field(default_factory=dict)
    is_pseudo: bool = False

    @property
    def is_founder(self) -> bool:
        return self.mother_id is None and self.father_id is None

    def affection(self, cancer: str) -> Affection:
        return self.affections.get(cancer, Affection(False, None))


@dataclass(frozen=True)
class Pedigree:
    members: tuple[MemberRecord, ...]
    cancer_tags: tuple[str, ...] = ()
    notes: tuple[dict, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(self.members))

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    @property
    def by_id(self) -> dict[int, MemberRecord]:
        return {m.id: m for m in self.members}

    @property
    def probands(self) -> list[MemberRecord]:
        return [m for m in self.members if m.is_proband]

    def with_members(self, members: Iterable[MemberRecord]) -> "Pedigree":
        return replace(self, members=tuple(members))


@dataclass
class CheckReport:
    warnings: list[dict] = field(default_factory=list)
    repairs: list[dict] = field(default_factory=list)
    fatal: dict | None = None

    def warn(self, code: str, member_ids: Iterable[int], message: str) -> None:
        ids = sorted(member_ids)
        self.warnings.append({"code": code, "member_ids": ids, "message": message})
        log.warning("%s %s: %s", code, ids, message)

    def repair(self, code: str, member_ids: Iterable[int], description: str) -> None:
        self.repairs.append(
            {"code": code, "member_ids": sorted(member_ids), "description": description}
        )

    def fail(self, code: str, message: str) -> None:
        self.fatal = {"code": code, "message": message}

    def extend(self, other: "CheckReport") -> "CheckReport":
        self.warnings.extend(other.warnings)
        self.repairs.extend(other.repairs)
        if self.fatal is None:
            self.fatal = other.fatal
        return self

    def raise_if_fatal(self) -> None:
        if self.fatal is not None:
            from .errors import PedigreeCheckError

            raise PedigreeCheckError(self)

    def to_dict(self) -> dict:
        return {"warnings": self.warnings, "repairs": self.repairs, "fatal": self.fatal}


# ---------------------------------------------------------------------------
# parsing


def _is_na(value) -> bool:
    if value is None:
        return True
    if isinstance(value, float) and value != value:
        return True
    return isinstance(value, str) and value.strip() in NA_TOKENS


def _int(value, column: str, row: int) -> int | None:
    if _is_na(value):
        return None
    if isinstance(value, bool):
        return int(value)
    try:
        f = float(value)
    except (TypeError, ValueError):
        raise MalformedInput(f"row {row}, column {column}: cannot parse {value!r} as integer")
    if f != int(f):
        raise MalformedInput(f"row {row}, column {column}: {value!r} is not an integer")
    return int(f)


def _flag(value, column: str, row: int) -> bool | None:
    v = _int(value, column, row)
    if v is None:
        return None
    if v not in (0, 1):
        raise MalformedInput(f"row {row}, column {column}: expected 0/1, got {value!r}")
    return bool(v)


def _text(value) -> str | None:
    return None if _is_na(value) else str(value).strip()


def _split_list(value) -> list:
    if _is_na(value):
        return []
    if isinstance(value, (list, tuple)):
        return [v for v in value if not _is_na(v)]
    return [p.strip() for p in str(value).split(";") if p.strip() and p.strip() not in NA_TOKENS]


def _interventions(raw_kinds, raw_ages, row: int) -> tuple[Intervention, ...]:
    kinds = _split_list(raw_kinds)
    ages = _split_list(raw_ages)
    out = []
    for j, item in enumerate(kinds):
        item = str(item)
        if "@" in item:
            kind, _, age_text = item.partition("@")
            age = _int(age_text, "riskmod", row)
        else:
            kind = item
            age = _int(ages[j], "InterAge", row) if j < len(ages) else None
        kind = kind.strip()
        if kind not in registry.INTERVENTIONS:
            raise MalformedInput(f"row {row}: unknown intervention {kind!r}")
        out.append(Intervention(kind, age))
    return tuple(out)


def _classify_columns(columns: list[str], extra_genes: Iterable[str] = ()):
    missing = [c for c in REQUIRED_COLUMNS if c not in columns]
    if missing:
        raise MissingColumn(f"required column(s) absent: {', '.join(missing)}")
    aff = [c[len("isAff"):] for c in columns if c.startswith("isAff")]
    ages = [
        c[len("Age"):]
        for c in columns
        if c.startswith("Age") and c not in ("CurAge", "InterAge")
    ]
    orphans = sorted(set(ages) - set(aff))
    if orphans:
        raise OrphanAgeColumn(f"Age column(s) without isAff partner: {', '.join('Age' + t for t in orphans)}")
    known_genes = set(registry.GENES) | set(extra_genes)
    used = set(REQUIRED_COLUMNS) | set(OPTIONAL_COLUMNS)
    used |= {"isAff" + t for t in aff} | {"Age" + t for t in ages}
    genes = [c for c in columns if c in known_genes and c not in used]
    markers = [c for c in columns if c in registry.MARKERS]
    unknown = [c for c in columns if c not in used and c not in genes and c not in markers]
    return aff, genes, markers, unknown


def _rows_to_pedigree(columns: list[str], rows: list[Mapping[str, Any]], extra_genes=()) -> Pedigree:
    cancers, genes, markers, unknown = _classify_columns(columns, extra_genes)
    notes = []
    if markers:
        notes.append({
            "code": "IgnoredMarkerColumns",
            "member_ids": [],
            "message": f"marker columns are not modelled and were ignored: {', '.join(markers)}",
        })
    if unknown:
        notes.append({
            "code": "UnknownColumns",
            "member_ids": [],
            "message": f"unrecognised columns ignored: {', '.join(unknown)}",
        })
    members = []
    for i, row in enumerate(rows, start=1):
        mid = _int(row.get("ID"), "ID", i)
        if mid is None:
            raise MalformedInput(f"row {i}: ID is missing")
        sex = _int(row.get("Sex"), "Sex", i)
        if sex not in (None, FEMALE, MALE):
            raise MalformedInput(f"row {i}: Sex must be 0, 1 or NA, got {row.get('Sex')!r}")
        affections = {}
        for tag in cancers:
            affected = _flag(row.get("isAff" + tag), "isAff" + tag, i)
            age = _int(row.get("Age" + tag), "Age" + tag, i)
            affections[tag] = Affection(bool(affected), age if affected else None)
        race = _text(row.get("race"))
        if race is not None and race not in registry.RACES:
            raise MalformedInput(f"row {i}: unknown race {race!r}")
        ancestry = _text(row.get("Ancestry"))
        if ancestry is not None and ancestry not in registry.ANCESTRIES:
            raise MalformedInput(f"row {i}: unknown ancestry {ancestry!r}")
        results = {}
        for gene in genes:
            r = _flag(row.get(gene), gene, i)
            results[gene] = None if r is None else int(r)
        members.append(MemberRecord(
            id=mid,
            mother_id=_int(row.get("MotherID"), "MotherID", i),
            father_id=_int(row.get("FatherID"), "FatherID", i),
            sex=sex,
            is_proband=bool(_flag(row.get("isProband"), "isProband", i)),
            cur_age=_int(row.get("CurAge"), "CurAge", i),
            is_dead=_flag(row.get("isDead"), "isDead", i),
            affections=affections,
            race=race,
            ancestry=ancestry,
            twin_group=_int(row.get("Twins"), "Twins", i) or 0,
            interventions=_interventions(row.get("riskmod"), row.get("InterAge"), i),
            germline_results=results,
        ))
    return Pedigree(tuple(members), tuple(cancers), tuple(notes))


def parse_pedigree(source, format: str = "csv", extra_genes: Iterable[str] = ()) -> Pedigree:
    """Parse a pedigree from a byte/text stream, bytes or str.

    ``extra_genes`` names additional columns to read as germline results,
    for databases carrying genes outside the standard registry.
    """
    if hasattr(source, "read"):
        source = source.read()
    if isinstance(source, bytes):
        try:
            source = source.decode("utf-8-sig")
        except UnicodeDecodeError as exc:
            raise MalformedInput(f"pedigree is not valid UTF-8: {exc}") from exc

    if format == "csv":
        reader = csv.DictReader(io.StringIO(source))
        if reader.fieldnames is None:
            raise MissingColumn("empty member table: no header row")
        columns = [c.strip() for c in reader.fieldnames]
        rows = []
        for i, r in enumerate(reader, start=1):
            if None in r or any(v is None for v in r.values()):
                raise MalformedInput(f"row {i}: wrong number of fields")
            rows.append({k.strip(): v for k, v in r.items()})
        return _rows_to_pedigree(columns, rows, extra_genes)

    if format == "json":
        try:
            doc = json.loads(source)
        except json.JSONDecodeError as exc:
            raise MalformedInput(f"invalid JSON: {exc}") from exc
        rows = doc.get("members") if isinstance(doc, dict) else doc
        if not isinstance(rows, list) or not all(isinstance(r, dict) for r in rows):
            raise MalformedInput("JSON pedigree must be a list of member objects or {'members': [...]}")
        if not rows:
            raise MissingColumn("empty member table")
        columns = list(dict.fromkeys(k for r in rows for k in r))
        return _rows_to_pedigree(columns, rows, extra_genes)

    raise ValueError(f"unsupported pedigree format {format!r}")


def load_pedigree(path, extra_genes: Iterable[str] = ()) -> Pedigree:
    fmt = "json" if str(path).lower().endswith(".json") else "csv"
    with open(path, "rb") as fh:
        return parse_pedigree(fh, fmt, extra_genes)


def pedigree_rows(ped: Pedigree) -> list[dict]:
    """Inverse of parsing: one column dict per member (JSON mirror shape)."""
    genes = sorted({g for m in ped for g in m.germline_results})
    rows = []
    for m in ped:
        row = {
            "ID": m.id,
            "MotherID": m.mother_id,
            "FatherID": m.father_id,
            "Sex": m.sex,
            "isProband": int(m.is_proband),
            "CurAge": m.cur_age,
            "isDead": None if m.is_dead is None else int(m.is_dead),
        }
        for tag in ped.cancer_tags:
            a = m.affection(tag)
            row["isAff" + tag] = int(a.affected)
            row["Age" + tag] = a.age_dx
        row["race"] = m.race
        row["Ancestry"] = m.ancestry
        row["Twins"] = m.twin_group
        row["riskmod"] = [f"{iv.kind}@{iv.age}" if iv.age is not None else iv.kind for iv in m.interventions]
        for g in genes:
            row[g] = m.germline_results.get(g)
        rows.append(row)
    return rows


# ---------------------------------------------------------------------------
# checks


def _ancestor_cycle(members: Mapping[int, MemberRecord]) -> list[int]:
    """Members that are their own ancestors (empty when the graph is acyclic)."""
    state: dict[int, int] = {}
    bad: set[int] = set()
    for start in members:
        if start in state:
            continue
        stack = [(start, iter(_parents(members[start])))]
        state[start] = 1
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                state[node] = 2
                stack.pop()
                continue
            if nxt not in members:
                continue
            if state.get(nxt) == 1:
                bad.update(n for n, _ in stack)
            elif nxt not in state:
                state[nxt] = 1
                stack.append((nxt, iter(_parents(members[nxt]))))
    return sorted(bad)


def _parents(m: MemberRecord) -> list[int]:
    return [p for p in (m.mother_id, m.father_id) if p is not None]


def check_pedigree(ped: Pedigree) -> tuple[Pedigree, CheckReport]:
    """Validate and, where safe, repair a parsed pedigree.

    Steps run in a fixed order: identifiers and structure, parent sex,
    sex-specific cancers, pseudo-parents for single-parent members, twins,
    missing ages, diagnosis and intervention ages, ancestry consistency.
    Processing stops at the first fatal condition.
    """
    report = CheckReport()
    for note in ped.notes:
        report.warnings.append(dict(note))

    if len(ped) == 0:
        report.fail("EmptyPedigree", "the pedigree has no members")
        return ped, report

    # (1) identifiers and structure
    ids = [m.id for m in ped]
    bad_ids = sorted({i for i in ids if i <= 0})
    if bad_ids:
        report.fail("InvalidID", f"IDs must be strictly positive: {bad_ids}")
        return ped, report
    dupes = sorted({i for i in ids if ids.count(i) > 1})
    if dupes:
        report.fail("DuplicateID", f"IDs are not unique: {dupes}")
        return ped, report
    members = {m.id: m for m in ped}
    for m in ped:
        missing = [p for p in _parents(m) if p not in members]
        if missing:
            report.fail("MissingParent", f"member {m.id} references unknown parent(s) {missing}")
            return ped, report
        if m.mother_id is not None and m.mother_id == m.father_id:
            report.fail("SameParent", f"member {m.id} has the same mother and father")
            return ped, report
    cyc = _ancestor_cycle(members)
    if cyc:
        report.fail("AncestorCycle", f"members are their own ancestors: {cyc}")
        return ped, report
    if not any(m.is_proband for m in ped):
        report.fail("NoProband", "no member has isProband = 1")
        return ped, report

    # (2) parent sex
    mothers = {m.mother_id for m in ped if m.mother_id is not None}
    fathers = {m.father_id for m in ped if m.father_id is not None}
    both = sorted(mothers & fathers)
    if both:
        report.fail("ParentRoleConflict", f"members used as both mother and father: {both}")
        return ped, report
    for pid, role, want in [(p, "mother", FEMALE) for p in sorted(mothers)] + [
        (p, "father", MALE) for p in sorted(fathers)
    ]:
        parent = members[pid]
        if parent.sex is None:
            members[pid] = replace(parent, sex=want)
            report.warn("ParentSexSet", [pid], f"{role} {pid} had unknown sex; set to {registry.SEX_LABELS[want].lower()}")
            report.repair("ParentSexSet", [pid], f"Sex set to {want}")
        elif parent.sex != want:
            report.fail("ParentSexConflict", f"{role} {pid} has sex {registry.SEX_LABELS[parent.sex].lower()}")
            return ped, report

    # (3) sex-specific cancers
    for mid in sorted(members):
        m = members[mid]
        cleared = [
            tag for tag, a in m.affections.items()
            if a.affected and not registry.sex_possible(tag, m.sex)
        ]
        if cleared:
            aff = dict(m.affections)
            for tag in cleared:
                aff[tag] = Affection(False, None)
            members[mid] = replace(m, affections=aff)
            report.warn("SexSpecificCancer", [mid], f"cancers impossible for this sex cleared: {', '.join(cleared)}")
            report.repair("SexSpecificCancer", [mid], f"cleared {', '.join(cleared)}")

    # (4) pseudo-parents
    next_id = max(members) + 1
    pseudo_for: dict[tuple[str, int], int] = {}
    for mid in sorted(members):
        m = members[mid]
        if (m.mother_id is None) == (m.father_id is None):
            continue
        known = m.mother_id if m.mother_id is not None else m.father_id
        missing_role = "father" if m.mother_id is not None else "mother"
        key = (missing_role, known)
        if key not in pseudo_for:
            spouse = members[known]
            pseudo = MemberRecord(
                id=next_id,
                sex=MALE if missing_role == "father" else FEMALE,
                race=spouse.race,
                ancestry=spouse.ancestry,
                is_pseudo=True,
            )
            members[next_id] = pseudo
            pseudo_for[key] = next_id
            report.warn("PseudoParentAdded", [next_id], f"pseudo-{missing_role} {next_id} added as mate of {known}")
            report.repair("PseudoParentAdded", [next_id, known], f"founder {next_id} created as {missing_role} of children of {known}")
            next_id += 1
        pid = pseudo_for[key]
        if missing_role == "father":
            members[mid] = replace(m, father_id=pid)
        else:
            members[mid] = replace(m, mother_id=pid)
        report.repair("ParentLinked", [mid], f"{missing_role} set to pseudo-parent {pid}")

    # (5) twins
    groups: dict[int, list[MemberRecord]] = defaultdict(list)
    for m in members.values():
        if m.twin_group:
            groups[m.twin_group].append(m)
    for gid in sorted(groups):
        grp = groups[gid]
        gids = [m.id for m in grp]
        if len(grp) < 2:
            report.fail("TwinGroupSize", f"twin group {gid} has a single member {gids}")
            return ped, report
        if len({(m.mother_id, m.father_id) for m in grp}) > 1:
            report.fail("TwinParents", f"twin group {gid} members {gids} have different parents")
            return ped, report
        if len({m.sex for m in grp}) > 1:
            report.fail("TwinSex", f"twin group {gid} members {gids} have different sexes")
            return ped, report

    # (6) missing ages
    for mid in sorted(members):
        m = members[mid]
        if m.is_pseudo or m.cur_age is not None:
            continue
        if m.is_dead:
            report.warn("DeathAgeImputed", [mid], "dead member with unknown age; age will be imputed")
        else:
            report.warn("CurAgeImputed", [mid], "unknown current age; age will be imputed")

    # (7) diagnosis / intervention ages beyond censoring age
    for mid in sorted(members):
        m = members[mid]
        if m.cur_age is None:
            continue
        aff = dict(m.affections)
        late = [t for t, a in aff.items() if a.affected and a.age_dx is not None and a.age_dx > m.cur_age]
        for t in late:
            aff[t] = Affection(True, m.cur_age)
        ivs = list(m.interventions)
        late_iv = [j for j, iv in enumerate(ivs) if iv.age is not None and iv.age > m.cur_age]
        undated = [j for j, iv in enumerate(ivs) if iv.age is None]
        for j in late_iv + undated:
            ivs[j] = Intervention(ivs[j].kind, m.cur_age)
        if late or late_iv or undated:
            members[mid] = replace(m, affections=aff, interventions=tuple(ivs))
        if late:
            report.warn("AgeDxClamped", [mid], f"diagnosis age after current age for {', '.join(late)}; clamped to {m.cur_age}")
            report.repair("AgeDxClamped", [mid], f"Age{'/Age'.join(late)} set to {m.cur_age}")
        if late_iv or undated:
            kinds = ", ".join(ivs[j].kind for j in late_iv + undated)
            report.warn("InterAgeSet", [mid], f"intervention age missing or after current age ({kinds}); set to {m.cur_age}")
            report.repair("InterAgeSet", [mid], f"InterAge set to {m.cur_age} for {kinds}")

    # (8) ancestry consistency: warn only
    for mid in sorted(members):
        m = members[mid]
        if m.is_founder or m.ancestry is None:
            continue
        parent_anc = {members[p].ancestry for p in _parents(m)}
        if None not in parent_anc and m.ancestry not in parent_anc:
            report.warn("AncestryMismatch", [mid], f"ancestry {m.ancestry} matches neither parent")

    out = ped.with_members(members[i] for i in sorted(members))
    out = replace(out, notes=())
    return out, report


# ---------------------------------------------------------------------------
# structure


class _DisjointSet:
    def __init__(self):
        self.parent: dict = {}

    def find(self, x):
        self.parent.setdefault(x, x)
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a, b) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[ra] = rb
        return True


def mating_edges(ped: Pedigree) -> list[tuple[tuple, tuple]]:
    """Edges of the marriage graph: individual nodes ``('i', id)`` joined
    to mating nodes ``('m', mother, father)`` for both spouses and every
    child."""
    edges = []
    seen_spouse = set()
    for m in ped:
        if m.is_founder:
            continue
        mating = ("m", m.mother_id, m.father_id)
        if mating not in seen_spouse:
            seen_spouse.add(mating)
            for p in _parents(m):
                edges.append((("i", p), mating))
        edges.append((("i", m.id), mating))
    return edges


def detect_loops(ped: Pedigree) -> bool:
    """True when the marriage graph (individuals plus one node per mating
    pair) contains a cycle."""
    ds = _DisjointSet()
    return any(not ds.union(a, b) for a, b in mating_edges(ped))


def components(ped: Pedigree) -> list[set[int]]:
    ds = _DisjointSet()
    for m in ped:
        ds.find(m.id)
        for p in _parents(m):
            ds.union(m.id, p)
    comps: dict[int, set[int]] = defaultdict(set)
    for m in ped:
        comps[ds.find(m.id)].add(m.id)
    return sorted(comps.values(), key=min)


def prune_disconnected(ped: Pedigree) -> tuple[Pedigree, CheckReport]:
    """Drop members with no parent/child/mating path to any proband."""
    report = CheckReport()
    probands = {m.id for m in ped.probands}
    keep: set[int] = set()
    for comp in components(ped):
        if comp & probands:
            keep |= comp
    removed = sorted(m.id for m in ped if m.id not in keep)
    assert probands <= keep
    if removed:
        report.warn("Disconnected", removed, "members unconnected to any proband were removed")
        report.repair("Disconnected", removed, "removed from pedigree")
    return ped.with_members(m for m in ped if m.id in keep), report
