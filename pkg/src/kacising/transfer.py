"""Exact restricted block sums via masked transfer chains.

A window of n blocks between two fixed boundary blocks is summed one block
at a time.  The chain state is ``(t, s)`` where ``s`` is the newest block
pattern and ``t`` the label of the block before it; carrying ``t`` lets each
step evaluate the three-block-deep label of the previous position once its
right neighbor is known.  Constraints are per-position masks on the block
label and on the deep label, so every named ensemble (solid plus regions,
interfaces, exact label strings) is one mask table.

Sums include the internal energy of every window block and every coupling
bond touching the window, including the two bonds into the fixed boundary
blocks; the boundary blocks' internal energies are excluded.

Ring sums use the same step as a dense transfer matrix with a seam
consistency factor and a final trace.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .blocks import BlockTable, build_block_table
from .errors import (
    DomainError,
    EmptyEnsembleError,
    EnumerationCapError,
    SizeError,
    TorusTooSmall,
)
from .model import ModelParams, torus_energy_batch
from .phases import big_theta_labels, classify_torus

MAX_DENSE_STATES = 2048  # pair-coupling matrices beyond this are refused
MAX_RING_STATES = 1024  # dense ring transfer matrices are 3x larger

_VAL_TO_IDX = {-1: 0, 0: 1, 1: 2}


def _big_table() -> np.ndarray:
    """deep_label_index[t, a, c] for label indices t, a, c (value + 1)."""
    tab = np.ones((3, 3, 3), dtype=np.int8)
    for v in range(3):
        tab[v, v, v] = v
    return tab


_BIG = _big_table()


@dataclass(eq=False)
class EnsembleConstraint:
    """Per-position masks; column k of each array is for label value k-1."""

    n: int
    allowed_theta: np.ndarray  # (n, 3) bool
    allowed_big: np.ndarray  # (n, 3) bool


def make_constraint(n: int, theta_at=None, big_at=None) -> EnsembleConstraint:
    """Build masks from {position: iterable of allowed values} maps.

    Positions are 1-based; unmentioned positions allow everything.
    """
    if n < 0:
        raise DomainError("window length must be nonnegative")
    th = np.ones((n, 3), dtype=bool)
    bg = np.ones((n, 3), dtype=bool)
    for target, spec in ((th, theta_at), (bg, big_at)):
        for pos, vals in (spec or {}).items():
            if not 1 <= pos <= n:
                raise DomainError(f"position {pos} outside window of {n}")
            target[pos - 1] = False
            for v in vals:
                target[pos - 1, _VAL_TO_IDX[int(v)]] = True
    return EnsembleConstraint(n=n, allowed_theta=th, allowed_big=bg)


def free_constraint(n: int) -> EnsembleConstraint:
    return make_constraint(n)


def plus_interval(n: int) -> EnsembleConstraint:
    """Solid plus region: labeled +1 at both ends, never deep-minus inside."""
    if n < 1:
        raise DomainError("plus region needs at least one block")
    theta_at = {1: (1,), n: (1,)}
    big_at = {k: (0, 1) for k in range(2, n)}
    return make_constraint(n, theta_at, big_at)


def minus_interval(n: int) -> EnsembleConstraint:
    if n < 1:
        raise DomainError("minus region needs at least one block")
    theta_at = {1: (-1,), n: (-1,)}
    big_at = {k: (0, -1) for k in range(2, n)}
    return make_constraint(n, theta_at, big_at)


def iface_pm(n: int) -> EnsembleConstraint:
    """Interface: labels +1 then -1 at the ends, deep label zero throughout."""
    if n < 2:
        raise DomainError("an interface needs at least two blocks")
    theta_at = {1: (1,), n: (-1,)}
    big_at = {k: (0,) for k in range(1, n + 1)}
    return make_constraint(n, theta_at, big_at)


def iface_mp(n: int) -> EnsembleConstraint:
    if n < 2:
        raise DomainError("an interface needs at least two blocks")
    theta_at = {1: (-1,), n: (1,)}
    big_at = {k: (0,) for k in range(1, n + 1)}
    return make_constraint(n, theta_at, big_at)


def fixed_theta(labels) -> EnsembleConstraint:
    """Pin the exact label string; deep labels stay free."""
    labels = list(labels)
    return make_constraint(len(labels), {k + 1: (v,) for k, v in enumerate(labels)})


def stack_constraints(*parts: EnsembleConstraint) -> EnsembleConstraint:
    """Concatenate windows left to right into one constraint."""
    if not parts:
        raise DomainError("nothing to stack")
    return EnsembleConstraint(
        n=sum(p.n for p in parts),
        allowed_theta=np.concatenate([p.allowed_theta for p in parts]),
        allowed_big=np.concatenate([p.allowed_big for p in parts]),
    )


class _Engine:
    """Shared tables for one parameter set at one inverse temperature."""

    def __init__(self, params: ModelParams):
        table = build_block_table(params)
        S = table.n_states
        if S > MAX_DENSE_STATES:
            raise SizeError(
                f"{S} block states exceed the dense-chain cap {MAX_DENSE_STATES}"
            )
        self.table = table
        self.S = S
        beta = params.beta
        self.B = np.exp(-beta * table.w_pair)
        self.bolH = np.exp(-beta * table.h_intra)
        self.tidx = (table.theta.astype(np.int64) + 1)
        self.sel = [np.nonzero(self.tidx == a)[0] for a in range(3)]

    def start(self, s_left: int, theta_row, n_batch_all: bool = False) -> np.ndarray:
        """State after placing the first block."""
        S = self.S
        gate = self.bolH * theta_row[self.tidx]
        if n_batch_all:
            v = np.zeros((S, 3, S))
            v[np.arange(S), self.tidx, :] = self.B * gate[None, :]
        else:
            v = np.zeros((1, 3, S))
            v[0, self.tidx[s_left], :] = self.B[s_left, :] * gate
        return v

    def advance(self, v: np.ndarray, big_row, theta_row) -> np.ndarray:
        """One chain step: place the next block, scoring the previous deep label."""
        out = np.zeros_like(v)
        gate = self.bolH * theta_row[self.tidx]
        for t in range(3):
            for a in range(3):
                sel = self.sel[a]
                if sel.size == 0 or not v[:, t, sel].any():
                    continue
                cmask = big_row[_BIG[t, a, self.tidx]]
                if not cmask.any():
                    continue
                out[:, a, :] += (v[:, t, sel] @ self.B[sel, :]) * cmask[None, :]
        out *= gate[None, None, :]
        return out

    def close(self, v: np.ndarray, big_row, s_right=None) -> np.ndarray:
        """Attach the right boundary, scoring the last deep label."""
        cols = self.B if s_right is None else self.B[:, [s_right]]
        out = np.zeros((v.shape[0], cols.shape[1]))
        for t in range(3):
            for a in range(3):
                sel = self.sel[a]
                if sel.size == 0 or not v[:, t, sel].any():
                    continue
                if s_right is None:
                    cmask = big_row[_BIG[t, a, self.tidx]]
                    out += (v[:, t, sel] @ cols[sel, :]) * cmask[None, :]
                elif big_row[_BIG[t, a, self.tidx[s_right]]]:
                    out += v[:, t, sel] @ cols[sel, :]
        return out[:, 0] if s_right is not None else out


@lru_cache(maxsize=16)
def _engine(params: ModelParams) -> _Engine:
    return _Engine(params)


def restricted_log_z_all_pairs(params: ModelParams, cons: EnsembleConstraint) -> np.ndarray:
    """log of the constrained window sum for every boundary pair (s_left, s_right).

    Entries are -inf where the ensemble is empty.
    """
    eng = _engine(params)
    if cons.n == 0:
        return -params.beta * eng.table.w_pair
    v = eng.start(0, cons.allowed_theta[0], n_batch_all=True)
    scale = 0.0
    for k in range(1, cons.n):
        v = eng.advance(v, cons.allowed_big[k - 1], cons.allowed_theta[k])
        m = v.max()
        if m == 0.0:
            return np.full((eng.S, eng.S), -np.inf)
        v /= m
        scale += math.log(m)
    out = eng.close(v, cons.allowed_big[cons.n - 1])
    with np.errstate(divide="ignore"):
        return np.log(out) + scale


def restricted_log_z(
    params: ModelParams, cons: EnsembleConstraint, s_left: int, s_right: int
) -> float:
    """log of one constrained window sum; raises EmptyEnsembleError on zero."""
    eng = _engine(params)
    if cons.n == 0:
        return float(-params.beta * eng.table.w_pair[s_left, s_right])
    v = eng.start(s_left, cons.allowed_theta[0])
    scale = 0.0
    for k in range(1, cons.n):
        v = eng.advance(v, cons.allowed_big[k - 1], cons.allowed_theta[k])
        m = v.max()
        if m == 0.0:
            raise EmptyEnsembleError("no configuration satisfies the constraint")
        v /= m
        scale += math.log(m)
    val = float(eng.close(v, cons.allowed_big[cons.n - 1], s_right=s_right)[0])
    if val == 0.0:
        raise EmptyEnsembleError("no configuration satisfies the constraint")
    return math.log(val) + scale


def window_log_z(params: ModelParams, n: int, s_left: int, s_right: int) -> float:
    """Unconstrained window sum between two fixed boundary blocks."""
    return restricted_log_z(params, free_constraint(n), s_left, s_right)


def window_state_distribution(
    params: ModelParams,
    cons: EnsembleConstraint,
    s_left: int,
    s_right: int,
    position: int,
) -> np.ndarray:
    """Marginal distribution of the block at a 1-based window position."""
    if not 1 <= position <= cons.n:
        raise DomainError(f"position {position} outside window of {cons.n}")
    eng = _engine(params)
    fwd = eng.start(s_left, cons.allowed_theta[0])
    for k in range(1, position):
        fwd = eng.advance(fwd, cons.allowed_big[k - 1], cons.allowed_theta[k])
        m = fwd.max()
        if m == 0.0:
            raise EmptyEnsembleError("no configuration satisfies the constraint")
        fwd /= m
    # bwd[t, s]: completion weight from state (t, s) at `position`
    bwd = np.zeros((3, eng.S))
    for t in range(3):
        for a in range(3):
            sel = eng.sel[a]
            if big := cons.allowed_big[cons.n - 1][_BIG[t, a, eng.tidx[s_right]]]:
                bwd[t, sel] += big * eng.B[sel, s_right]
    for k in range(cons.n - 1, position - 1, -1):
        gate = eng.bolH * cons.allowed_theta[k][eng.tidx]
        nxt = np.zeros_like(bwd)
        for t in range(3):
            for a in range(3):
                sel = eng.sel[a]
                cmask = cons.allowed_big[k - 1][_BIG[t, a, eng.tidx]]
                nxt[t, sel] = eng.B[sel, :] @ (gate * cmask * bwd[a, :])
        bwd = nxt
        m = bwd.max()
        if m == 0.0:
            raise EmptyEnsembleError("no configuration satisfies the constraint")
        bwd /= m
    weights = np.einsum("ts,ts->s", fwd[0], bwd)
    total = weights.sum()
    if total <= 0.0:
        raise EmptyEnsembleError("no configuration satisfies the constraint")
    return weights / total


def _ring_matrix(params: ModelParams, theta_row, big_row) -> np.ndarray:
    eng = _engine(params)
    S = eng.S
    if S > MAX_RING_STATES:
        raise SizeError(f"{S} block states exceed the ring cap {MAX_RING_STATES}")
    gate = eng.bolH * theta_row[eng.tidx]
    T = np.zeros((3 * S, 3 * S))
    for t in range(3):
        for a in range(3):
            sel = eng.sel[a]
            if sel.size == 0:
                continue
            cmask = big_row[_BIG[t, a, eng.tidx]]
            block = eng.B[sel, :] * (gate * cmask)[None, :]
            T[t * S + sel, a * S : (a + 1) * S] = block
    return T


def torus_log_z(params: ModelParams, n_blocks: int, theta_allowed=(-1, 0, 1), big_allowed=(-1, 0, 1)) -> float:
    """log of the ring sum over n_blocks with uniform label masks."""
    if n_blocks < 3:
        raise TorusTooSmall("ring sums need at least three blocks")
    theta_row = np.zeros(3, dtype=bool)
    for v in theta_allowed:
        theta_row[_VAL_TO_IDX[int(v)]] = True
    big_row = np.zeros(3, dtype=bool)
    for v in big_allowed:
        big_row[_VAL_TO_IDX[int(v)]] = True
    T = _ring_matrix(params, theta_row, big_row)
    M = T.copy()
    scale = 0.0
    for _ in range(n_blocks - 1):
        M = M @ T
        m = M.max()
        if m == 0.0:
            raise EmptyEnsembleError("ring ensemble is empty")
        M /= m
        scale += math.log(m)
    tr = float(np.trace(M))
    if tr <= 0.0:
        raise EmptyEnsembleError("ring ensemble is empty")
    return math.log(tr) + scale


def signed_log_sum(terms, zero_tol: float = 1e-12) -> float:
    """log of a signed combination sum(coef * exp(logv)).

    Combinations that cancel to within ``zero_tol`` of the total magnitude
    count as an empty ensemble and give -inf; genuinely negative results
    raise, since every sector sum is a sum of Boltzmann weights.
    """
    finite = [(c, lv) for c, lv in terms if lv != -np.inf]
    if not finite:
        return -np.inf
    shift = max(lv for _, lv in finite)
    acc = sum(c * math.exp(lv - shift) for c, lv in finite)
    mag = sum(abs(c) * math.exp(lv - shift) for c, lv in finite)
    if acc > zero_tol * mag:
        return shift + math.log(acc)
    if acc > -zero_tol * mag:
        return -np.inf
    raise EmptyEnsembleError("signed combination is negative beyond rounding")


def pbc_sector_log_z(params: ModelParams, n_blocks: int) -> dict:
    """Ring sum split by sector of the deep-label chain.

    'free' is the full sum; 'zero', 'plus', 'minus', 'mixed' partition it:
    deep labels all zero, some plus and none minus, the mirror, and both
    signs present.  The last three come from inclusion-exclusion of masked
    ring sums.
    """
    free = torus_log_z(params, n_blocks)
    zero = torus_log_z(params, n_blocks, big_allowed=(0,))
    ge = torus_log_z(params, n_blocks, big_allowed=(0, 1))
    le = torus_log_z(params, n_blocks, big_allowed=(0, -1))
    plus = signed_log_sum([(1.0, ge), (-1.0, zero)])
    minus = signed_log_sum([(1.0, le), (-1.0, zero)])
    mixed = signed_log_sum([(1.0, free), (-1.0, ge), (-1.0, le), (1.0, zero)])
    return {
        "free": free,
        "zero": zero,
        "plus": plus,
        "minus": minus,
        "mixed": mixed,
    }


@lru_cache(maxsize=8)
def _torus_label_masses(params: ModelParams, n_blocks: int):
    """Boltzmann mass per block-label chain, by exact spin enumeration.

    Returns (masses over base-3 chain codes, realized code list).
    """
    ell = params.len_plus
    L = n_blocks * ell
    if L > 24:
        raise EnumerationCapError(f"2**{L} ring configurations is beyond the budget")
    table = build_block_table(params)
    theta = table.theta.astype(np.int64)
    n_codes = 3**n_blocks
    masses = np.zeros(n_codes)
    mask = (1 << ell) - 1
    pow3 = 3 ** np.arange(n_blocks, dtype=np.int64)
    chunk = 1 << 20
    for lo in range(0, 1 << L, chunk):
        codes = np.arange(lo, min(lo + chunk, 1 << L), dtype=np.int64)
        spins = (2 * ((codes[:, None] >> np.arange(L)[None, :]) & 1) - 1).astype(np.int8)
        energy = torus_energy_batch(spins, params)
        block_codes = (codes[:, None] >> (ell * np.arange(n_blocks))[None, :]) & mask
        label_code = ((theta[block_codes] + 1) * pow3[None, :]).sum(axis=1)
        masses += np.bincount(label_code, weights=np.exp(-params.beta * energy), minlength=n_codes)
    realized = np.nonzero(masses)[0]
    return masses, realized


def decode_label_chain(code: int, n_blocks: int) -> np.ndarray:
    """Base-3 chain code back to a label array in {-1, 0, +1}."""
    out = np.empty(n_blocks, dtype=np.int8)
    for i in range(n_blocks):
        out[i] = code % 3 - 1
        code //= 3
    return out


def torus_event_probability(
    params: ModelParams, n_blocks: int, event_fn, sector: str | None = None
) -> float:
    """Exact ring probability of an event of the block-label chain.

    ``event_fn`` maps a label array to bool; ``sector`` conditions on the
    classification of the chain ('mixed', 'plus', 'minus', 'zero').
    """
    masses, realized = _torus_label_masses(params, n_blocks)
    num = 0.0
    den = 0.0
    for code in realized:
        th = decode_label_chain(int(code), n_blocks)
        if sector is not None and classify_torus(th) != sector:
            continue
        den += masses[code]
        if event_fn(th):
            num += masses[code]
    if den == 0.0:
        raise EmptyEnsembleError(f"sector {sector!r} carries no mass")
    return num / den


def torus_sector_masses(params: ModelParams, n_blocks: int) -> dict:
    """Sector masses from exact spin enumeration (cross-check route)."""
    masses, realized = _torus_label_masses(params, n_blocks)
    out = {"free": masses.sum(), "zero": 0.0, "plus": 0.0, "minus": 0.0, "mixed": 0.0}
    for code in realized:
        th = decode_label_chain(int(code), n_blocks)
        out[classify_torus(th)] += masses[code]
    return out
