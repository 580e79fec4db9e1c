"""Exact tables over all spin patterns of one ``len_plus`` block.

Everything downstream that sums over block configurations (transfer chains,
interface weights, contour sums) works from these tables: the pattern list,
per-pattern internal energy, the adjacent-block coupling matrix, per-pattern
phase labels, and the spin-flip involution.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import DomainError
from .model import ModelParams
from .phases import theta_labels


@dataclass(eq=False)
class BlockTable:
    """All 2**len_plus block patterns with their energies and labels.

    ``w_pair[a, b]`` is the coupling energy between adjacent blocks with the
    pattern ``a`` on the left and ``b`` on the right; blocks further apart
    never interact because the coupling range divides ``len_plus``.
    """

    params: ModelParams
    patterns: np.ndarray  # (S, len_plus) int8
    theta: np.ndarray  # (S,) int8
    h_intra: np.ndarray  # (S,)
    w_pair: np.ndarray  # (S, S)
    magnetization: np.ndarray  # (S,)
    flip: np.ndarray  # (S,) index of the spin-flipped pattern
    states_by_theta: dict = field(default_factory=dict)

    @property
    def n_states(self) -> int:
        return self.patterns.shape[0]

    def sector(self, label: int) -> np.ndarray:
        """Indices of patterns whose block label equals ``label``."""
        return self.states_by_theta[int(label)]

    def pattern_index(self, block_sigma) -> int:
        """Index of an explicit +-1 pattern (site 0 is the low bit)."""
        s = np.asarray(block_sigma)
        if s.shape != (self.params.len_plus,) or not np.all(np.abs(s) == 1):
            raise DomainError("expected one +-1 block pattern")
        bits = (s > 0).astype(np.int64)
        return int(np.dot(bits, 1 << np.arange(self.params.len_plus)))


@lru_cache(maxsize=32)
def build_block_table(params: ModelParams) -> BlockTable:
    """Assemble the exact per-block tables for one parameter set."""
    ell = params.len_plus
    S = 2**ell
    codes = np.arange(S, dtype=np.int64)
    bits = (codes[:, None] >> np.arange(ell)[None, :]) & 1
    patterns = (2 * bits - 1).astype(np.int8)
    pf = patterns.astype(np.float64)

    j = params.couplings
    rng = params.range
    h_intra = np.zeros(S)
    for d in range(1, min(rng, ell - 1) + 1):
        h_intra -= j[d - 1] * np.sum(pf[:, :-d] * pf[:, d:], axis=1)

    w_pair = np.zeros((S, S))
    for d in range(1, rng + 1):
        for a in range(d):
            # left-block site at depth a from its right edge pairs with the
            # right-block site at depth d-1-a from its left edge
            w_pair -= j[d - 1] * np.outer(pf[:, ell - 1 - a], pf[:, d - 1 - a])

    theta = np.empty(S, dtype=np.int8)
    for s in range(S):
        theta[s] = theta_labels(patterns[s], params)[0]

    flip_codes = (S - 1) ^ codes  # complement every bit
    table = BlockTable(
        params=params,
        patterns=patterns,
        theta=theta,
        h_intra=h_intra,
        w_pair=w_pair,
        magnetization=pf.mean(axis=1),
        flip=flip_codes,
        states_by_theta={
            v: np.nonzero(theta == v)[0] for v in (-1, 0, 1)
        },
    )
    assert np.all(theta[flip_codes] == -theta)
    assert np.allclose(h_intra[flip_codes], h_intra)
    assert np.allclose(w_pair[np.ix_(flip_codes, flip_codes)], w_pair)
    return table


def gauge_state(table: BlockTable) -> int:
    """Deterministic reference pattern: the highest-magnetization block
    labeled +1, ties broken by the lowest pattern index."""
    cand = table.sector(1)
    if cand.size == 0:
        raise DomainError("no block pattern carries the +1 label")
    top = table.magnetization[cand].max()
    return int(cand[table.magnetization[cand] == top].min())
