"""Posterior carrier probabilities by peeling over nuclear families.

The loop-free pedigree is a tree of individuals and nuclear families
(mother, father, children). Each family contributes the factor
``prod_children P(child | mother, father)``; each individual a unary term
made of its phenotype likelihood and, for founders, the population prior.
Two sweeps of sum-product message passing (towards a proband root, then
back out) yield every proband's marginal from one set of messages.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from . import registry
from .errors import InfeasiblePedigree, LoopDetected, TooLarge
from .genotype import (
    GenotypeSpace,
    constrain_by_tests,
    founder_prior,
    transmission,
    transmission_kernel,
)
from .model_db import ModelDatabase, dominant_configs, modifier_ratios, modify_curve, NET
from .pedigree import Pedigree, detect_loops
from .registry import FEMALE, MALE

BRUTE_FORCE_LIMIT = 10**8


@dataclass
class PosteriorDistribution:
    proband_id: int
    labels: tuple[str, ...]
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
            {"genes": lab, "estimate": float(e), "lower": float(lo), "upper": float(up)}
            for lab, e, lo, up in zip(self.labels, self.estimate, self.lower, self.upper)
        ]


def _carrier_matrix(space: GenotypeSpace, db: ModelDatabase) -> np.ndarray:
    """Space genotypes expressed over the database gene axis."""
    missing = [g for g in space.genes if g not in db.genes]
    if missing:
        raise ValueError(f"genes {missing} are not in the database")
    out = np.zeros((len(space), len(db.genes)), dtype=bool)
    for k, gene in enumerate(space.genes):
        out[:, db.genes.index(gene)] = space.vectors[:, k].astype(bool)
    return out


def genotype_curves(member, db: ModelDatabase, space: GenotypeSpace, cancer: str, sex: int,
                    kind: int = NET) -> np.ndarray:
    """(G, age_max) penetrance curves for ``member`` after risk modifiers."""
    carriers = _carrier_matrix(space, db)
    cfgs = dominant_configs(db, carriers, cancer, member.race, sex)
    c = db.cancer_index(cancer)
    r = db.race_index(member.race)
    s = 0 if sex == FEMALE else 1
    curves = {}
    for cfg in np.unique(cfgs):
        base = db.penetrance[c, cfg, r, s, :, kind]
        curves[cfg] = modify_curve(base, modifier_ratios(db, member, cancer, int(cfg)))
    return np.stack([curves[cfg] for cfg in cfgs])


def member_likelihood(member, db: ModelDatabase, space: GenotypeSpace) -> np.ndarray:
    """P(observed cancer history | genotype, sex) for every genotype.

    Unaffected: ``1 - sum_{s<=C} P(T = s)``; affected at age a: ``P(T = a)``.
    Unknown sex averages the female and male products. Germline test
    results zero out contradicting genotypes.
    """
    G = len(space)
    if member.is_pseudo:
        return np.ones(G)
    if member.cur_age is None:
        raise ValueError(f"member {member.id} has no current age; impute first")
    cur = min(max(member.cur_age, 1), db.age_max)
    sexes = (member.sex,) if member.sex in (FEMALE, MALE) else (FEMALE, MALE)
    total = np.zeros(G)
    for sex in sexes:
        lik = np.ones(G)
        for cancer in db.cancers:
            aff = member.affection(cancer)
            if not registry.sex_possible(cancer, sex):
                if aff.affected:
                    lik[:] = 0.0
                continue
            curves = genotype_curves(member, db, space, cancer, sex)
            if aff.affected:
                if aff.age_dx is None:
                    raise ValueError(f"member {member.id} has no diagnosis age for {cancer}; impute first")
                age = min(max(aff.age_dx, 1), db.age_max)
                lik *= curves[:, age - 1]
            else:
                lik *= np.clip(1.0 - curves[:, :cur].sum(axis=1), 0.0, 1.0)
        total += lik
    total /= len(sexes)
    return total * constrain_by_tests(space, member)


# ---------------------------------------------------------------------------
# peeling


@dataclass
class _Family:
    key: tuple[int, int]
    mother: int
    father: int
    children: list[int] = field(default_factory=list)

    @property
    def members(self) -> list[int]:
        return [self.mother, self.father, *self.children]


def _twin_representatives(ped: Pedigree) -> dict[int, int]:
    groups = defaultdict(list)
    for m in ped:
        if m.twin_group:
            groups[m.twin_group].append(m.id)
    rep = {m.id: m.id for m in ped}
    for ids in groups.values():
        for i in ids:
            rep[i] = min(ids)
    return rep


def _families(ped: Pedigree, rep: dict[int, int]) -> dict[tuple[int, int], _Family]:
    fams: dict[tuple[int, int], _Family] = {}
    for m in sorted(ped, key=lambda x: x.id):
        if m.is_founder:
            continue
        if m.mother_id is None or m.father_id is None:
            raise ValueError(f"member {m.id} has a single parent; run check_pedigree first")
        key = (rep[m.mother_id], rep[m.father_id])
        fam = fams.setdefault(key, _Family(key, key[0], key[1]))
        child = rep[m.id]
        if child not in fam.children:
            fam.children.append(child)
    return fams


class Peeler:
    """One peeling run over a checked, loop-free pedigree.

    Attributes after :meth:`run`:
        posteriors: proband id -> normalized genotype distribution.
        log_likelihood: log P(observed data) summed over proband components.
    """

    def __init__(self, ped: Pedigree, db: ModelDatabase, space: GenotypeSpace):
        if detect_loops(ped):
            raise LoopDetected("pedigree contains a loop")
        self.ped = ped
        self.db = db
        self.space = space
        self.G = len(space)
        self.kernel = transmission_kernel(space)
        self.kernel_t = self.kernel.T.tocsr()
        self.rep = _twin_representatives(ped)
        self.fams = _families(ped, self.rep)
        by_id = ped.by_id

        self.unary: dict[int, np.ndarray] = {}
        for m in sorted(ped, key=lambda x: x.id):
            v = self.rep[m.id]
            lik = member_likelihood(m, db, space)
            if v not in self.unary:
                self.unary[v] = np.ones(self.G)
                if by_id[v].is_founder:
                    self.unary[v] = founder_prior(space, db.allele_frequencies(by_id[v].ancestry))
            self.unary[v] = self.unary[v] * lik

        self.adj: dict[tuple, list[tuple]] = defaultdict(list)
        for v in sorted(self.unary):
            self.adj.setdefault(("v", v), [])
        for key in sorted(self.fams):
            fnode = ("f", key)
            for v in self.fams[key].members:
                self.adj[fnode].append(("v", v))
                self.adj[("v", v)].append(fnode)
        n_nodes = len(self.adj)
        n_edges = sum(len(a) for a in self.adj.values()) // 2
        if n_edges != n_nodes - len(self._components()):
            raise LoopDetected("family graph is not a forest")

        self.msg: dict[tuple, np.ndarray] = {}
        self.log_scale: dict[tuple, float] = {}
        self.posteriors: dict[int, np.ndarray] = {}
        self.log_likelihood = 0.0

    def _components(self) -> list[list[tuple]]:
        seen, comps = set(), []
        for start in self.adj:
            if start in seen:
                continue
            comp, stack = [], [start]
            seen.add(start)
            while stack:
                n = stack.pop()
                comp.append(n)
                for nb in self.adj[n]:
                    if nb not in seen:
                        seen.add(nb)
                        stack.append(nb)
            comps.append(comp)
        return comps

    def _store(self, src, dst, vec: np.ndarray) -> None:
        top = vec.max()
        if not top > 0 or not np.isfinite(top):
            raise InfeasiblePedigree(f"zero-probability configuration around {src[1]} -> {dst[1]}")
        self.msg[(src, dst)] = vec / top
        self.log_scale[(src, dst)] = math.log(top)

    def _var_out(self, v: int, dst) -> np.ndarray:
        out = self.unary[v].copy()
        for nb in self.adj[("v", v)]:
            if nb != dst:
                out *= self.msg[(nb, ("v", v))]
        return out

    def _pair_sums(self, fam: _Family, child: int) -> np.ndarray:
        # S[m, f] = sum_c P(c | m, f) * mu_{c -> F}(c)
        incoming = self.msg[(("v", child), ("f", fam.key))]
        return (self.kernel @ incoming).reshape(self.G, self.G)

    def _fam_out(self, fam: _Family, targets: list[int]) -> dict[int, np.ndarray]:
        fnode = ("f", fam.key)
        sums = {
            c: self._pair_sums(fam, c)
            for c in fam.children
            if (("v", c), fnode) in self.msg
        }
        out = {}
        for t in targets:
            prod = np.ones((self.G, self.G))
            for c in fam.children:
                if c != t:
                    prod *= sums[c]
            if t == fam.mother:
                out[t] = prod @ self.msg[(("v", fam.father), fnode)]
            elif t == fam.father:
                out[t] = self.msg[(("v", fam.mother), fnode)] @ prod
            else:
                parents = np.outer(self.msg[(("v", fam.mother), fnode)], self.msg[(("v", fam.father), fnode)])
                out[t] = self.kernel_t @ (parents * prod).ravel()
        return out

    def _send(self, src, dst) -> None:
        if src[0] == "v":
            self._store(src, dst, self._var_out(src[1], dst))
        else:
            vec = self._fam_out(self.fams[src[1]], [dst[1]])[dst[1]]
            self._store(src, dst, vec)

    def run(self) -> dict[int, np.ndarray]:
        probands = sorted(m.id for m in self.ped if m.is_proband)
        proband_vars = {("v", self.rep[p]) for p in probands}
        for comp in self._components():
            roots = sorted(n for n in comp if n in proband_vars)
            if not roots:
                continue
            root = roots[0]
            order, parent = [root], {root: None}
            for node in order:
                for nb in sorted(self.adj[node], key=str):
                    if nb not in parent:
                        parent[nb] = node
                        order.append(nb)
            # towards the root
            upward_log = 0.0
            for node in reversed(order[1:]):
                self._send(node, parent[node])
                upward_log += self.log_scale[(node, parent[node])]
            belief = self._belief(root[1])
            self.log_likelihood += upward_log + math.log(belief.sum())
            # away from the root, only as far as needed for the probands
            needed = set()
            for pv in proband_vars & set(comp):
                n = pv
                while parent[n] is not None:
                    needed.add((parent[n], n))
                    n = parent[n]
            for node in order:
                kids = [nb for nb in self.adj[node] if parent.get(nb) == node and (node, nb) in needed]
                if not kids:
                    continue
                if node[0] == "v":
                    for k in kids:
                        self._send(node, k)
                else:
                    outs = self._fam_out(self.fams[node[1]], [k[1] for k in kids])
                    for k in kids:
                        self._store(node, k, outs[k[1]])
        for p in probands:
            b = self._belief(self.rep[p])
            self.posteriors[p] = b / b.sum()
        return self.posteriors

    def _belief(self, v: int) -> np.ndarray:
        b = self.unary[v].copy()
        for nb in self.adj[("v", v)]:
            b *= self.msg[(nb, ("v", v))]
        if not b.sum() > 0:
            raise InfeasiblePedigree(f"zero-probability data for member {v}")
        return b


def peel(ped: Pedigree, db: ModelDatabase, space: GenotypeSpace) -> dict[int, np.ndarray]:
    """Posterior genotype distribution of every proband."""
    return Peeler(ped, db, space).run()


# ---------------------------------------------------------------------------
# oracle


def _expand(arr: np.ndarray, axes: list[int], n: int) -> np.ndarray:
    """Reshape ``arr`` (one dim per entry of ``axes``) to broadcast over n dims."""
    arr = np.transpose(arr, np.argsort(axes))
    shape = [1] * n
    for d, ax in enumerate(sorted(axes)):
        shape[ax] = arr.shape[d]
    return arr.reshape(shape)


def dense_transmission(space: GenotypeSpace) -> np.ndarray:
    """(G, G, G) array [mother, father, child] from the scalar kernel."""
    G = len(space)
    out = np.zeros((G, G, G))
    for m in range(G):
        for f in range(G):
            for c in range(G):
                out[m, f, c] = transmission(space, space.vectors[c], space.vectors[m], space.vectors[f])
    return out


def brute_force_posterior(ped: Pedigree, db: ModelDatabase, space: GenotypeSpace) -> dict[int, np.ndarray]:
    """Exact posteriors by enumerating every joint genotype assignment."""
    members = sorted(ped, key=lambda m: m.id)
    n, G = len(members), len(space)
    if G**n > BRUTE_FORCE_LIMIT:
        raise TooLarge(f"{G}^{n} joint assignments exceed {BRUTE_FORCE_LIMIT}")
    axis = {m.id: i for i, m in enumerate(members)}
    trans = dense_transmission(space)
    first_twin: dict[int, int] = {}
    joint = np.ones((G,) * n)
    for m in members:
        i = axis[m.id]
        joint = joint * _expand(member_likelihood(m, db, space), [i], n)
        if m.twin_group and m.twin_group in first_twin:
            j = axis[first_twin[m.twin_group]]
            joint = joint * _expand(np.eye(G), [j, i], n)
            continue
        if m.twin_group:
            first_twin[m.twin_group] = m.id
        if m.is_founder:
            prior = founder_prior(space, db.allele_frequencies(m.ancestry))
            joint = joint * _expand(prior, [i], n)
        else:
            joint = joint * _expand(trans, [axis[m.mother_id], axis[m.father_id], i], n)
    out = {}
    for m in members:
        if not m.is_proband:
            continue
        i = axis[m.id]
        marg = joint.sum(axis=tuple(a for a in range(n) if a != i))
        if not marg.sum() > 0:
            raise InfeasiblePedigree("zero-probability data")
        out[m.id] = marg / marg.sum()
    return out
