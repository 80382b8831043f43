"""Pared genotype space, founder priors and Mendelian transmission.

A genotype is a binary carrier vector over K genes. Paring keeps only the
vectors carrying at most ``T`` simultaneous mutations. Priors and
transmission probabilities are conditioned on the pared space, so with
``T == K`` they coincide with the unrestricted product forms.
"""

from __future__ import annotations

import itertools
import threading
from dataclasses import dataclass, field
from math import comb
from typing import Mapping, Sequence

import numpy as np
from scipy import sparse

from .errors import AllZeroMask, InvalidParing

# child carrier probability given the number of carrier parents (0, 1, 2)
_CARRY = (0.0, 0.5, 0.75)


@dataclass(frozen=True, eq=False)
class GenotypeSpace:
    """Ordered set of admissible carrier vectors.

    Attributes:
        genes: gene tags, one per bit.
        max_mut: paring parameter T.
        vectors: (G, K) uint8 array; row 0 is the noncarrier vector.
        masks: (G,) uint64 bitmasks, bit k set when gene k is carried.
    """

    genes: tuple[str, ...]
    max_mut: int
    vectors: np.ndarray
    masks: np.ndarray
    labels: tuple[str, ...]
    index: Mapping[tuple[int, ...], int] = field(repr=False)

    @property
    def K(self) -> int:
        return len(self.genes)

    @property
    def T(self) -> int:
        return self.max_mut

    def __len__(self) -> int:
        return len(self.labels)

    def ordinal(self, vector: Sequence[int]) -> int:
        return self.index[tuple(int(b) for b in vector)]


def space_size(K: int, T: int) -> int:
    return sum(comb(K, j) for j in range(T + 1))


def enumerate_space(K: int, T: int, genes: Sequence[str] | None = None) -> GenotypeSpace:
    """All carrier vectors with popcount <= T.

    Order is noncarrier first, then by popcount; within a popcount the gene
    index tuples are sorted on their reversed form, which lists
    ``BRCA1.BRCA2, BRCA1.ATM, BRCA2.ATM, ...`` for genes
    ``BRCA1, BRCA2, ATM, ...``.
    """
    if genes is None:
        genes = tuple(f"G{k + 1}" for k in range(K))
    genes = tuple(genes)
    if len(genes) != K:
        raise ValueError(f"{len(genes)} gene tags given for K={K}")
    if not 1 <= T <= K:
        raise InvalidParing(f"paring parameter must satisfy 1 <= T <= K, got T={T}, K={K}")

    combos: list[tuple[int, ...]] = []
    for j in range(T + 1):
        level = sorted(itertools.combinations(range(K), j), key=lambda c: c[::-1])
        combos.extend(level)

    G = len(combos)
    vectors = np.zeros((G, K), dtype=np.uint8)
    masks = np.zeros(G, dtype=np.uint64)
    labels = []
    for g, combo in enumerate(combos):
        vectors[g, list(combo)] = 1
        masks[g] = sum(1 << k for k in combo)
        labels.append(".".join(genes[k] for k in combo) if combo else "noncarrier")
    vectors.setflags(write=False)
    masks.setflags(write=False)
    index = {tuple(int(b) for b in row): g for g, row in enumerate(vectors)}
    return GenotypeSpace(genes, T, vectors, masks, tuple(labels), index)


def carrier_probability(freqs) -> np.ndarray:
    """Hardy-Weinberg probability of carrying at least one variant allele."""
    f = np.asarray(freqs, dtype=float)
    return 1.0 - (1.0 - f) ** 2


def founder_prior(space: GenotypeSpace, freqs) -> np.ndarray:
    p = carrier_probability(freqs)
    if p.shape != (space.K,):
        raise ValueError(f"expected {space.K} allele frequencies, got shape {p.shape}")
    bits = space.vectors.astype(bool)
    # evaluate p^G (1-p)^(1-G) without 0**0 surprises
    terms = np.where(bits, p[None, :], 1.0 - p[None, :])
    prior = terms.prod(axis=1)
    return prior / prior.sum()


def _child_weight(child: Sequence[int], mother: Sequence[int], father: Sequence[int]) -> float:
    w = 1.0
    for c, m, f in zip(child, mother, father):
        q = _CARRY[int(m) + int(f)]
        w *= q if c else 1.0 - q
        if w == 0.0:
            break
    return w


def transmission(space: GenotypeSpace, child, mother, father) -> float:
    """P(child | mother, father) restricted to the pared space.

    Straight per-gene product, normalised by summing the same product over
    every admissible child vector.
    """
    num = _child_weight(child, mother, father)
    if num == 0.0:
        return 0.0
    z = sum(_child_weight(v, mother, father) for v in space.vectors)
    return num / z


_kernel_cache: dict[tuple[tuple[str, ...], int], sparse.csr_matrix] = {}
_kernel_lock = threading.Lock()


def transmission_kernel(space: GenotypeSpace) -> sparse.csr_matrix:
    """Sparse (G*G, G) matrix; row ``m*G + f`` holds P(child | m, f).

    A child can only carry genes present in one of its parents, so each row
    has at most ``sum_{j<=T} C(2T, j)`` nonzeros.
    """
    key = (space.genes, space.max_mut)
    with _kernel_lock:
        cached = _kernel_cache.get(key)
    if cached is not None:
        return cached

    G = len(space)
    masks = space.masks
    rows, cols, vals = [], [], []
    child = masks[None, :]
    for m in range(G):
        union = (masks[m] | masks)[:, None]
        both = (masks[m] & masks)[:, None]
        n_single = np.bitwise_count(union ^ both).astype(float)
        admissible = (child & ~union) == 0
        w = (
            0.75 ** np.bitwise_count(child & both)
            * 0.25 ** np.bitwise_count(both & ~child)
            * 0.5**n_single
        )
        w = np.where(admissible, w, 0.0)
        w /= w.sum(axis=1, keepdims=True)
        f_idx, c_idx = np.nonzero(w)
        rows.append(m * G + f_idx)
        cols.append(c_idx)
        vals.append(w[f_idx, c_idx])
    kernel = sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(G * G, G),
    )
    with _kernel_lock:
        _kernel_cache[key] = kernel
    return kernel


def constrain_by_tests(space: GenotypeSpace, member) -> np.ndarray:
    """0/1 mask removing genotypes that contradict germline test results.

    Results on genes outside the space are ignored; tests are error-free.
    """
    mask = np.ones(len(space))
    for gene, result in member.germline_results.items():
        if result is None or gene not in space.genes:
            continue
        k = space.genes.index(gene)
        mask *= space.vectors[:, k] == int(result)
    if not mask.any():
        raise AllZeroMask(
            f"test results of member {member.id} are incompatible with at most "
            f"{space.max_mut} simultaneous mutations"
        )
    return mask
