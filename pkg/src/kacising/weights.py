"""Rod weights: segment factor tables, rod chains, and the exact
decomposition of the mixed-sector ring sum they reproduce.

A mixed ring decomposes into atoms cycling plus run, interface, minus run,
interface; consecutive atoms share their junction blocks, and each unique
factorization assigns one matrix factor per atom, indexed by junction
states:

* plus run of length p: a (plus x plus)-sector matrix; the identity-like
  length-1 case is diagonal, length 2 is the bare adjacency residual, and
  length >= 3 is exp of the fitted window residual at depth p - 2,
* interface of length a: the interface factor matrix (plus x minus),
* minus runs and the rising interfaces mirror the first two.

Every factor subtracts its own share of the bulk pressure: p - 2 blocks for
a phase run (its two outermost blocks belong to the neighboring interface
factors), a + 2 for an interface.  A full ring of span L therefore carries
exactly L pressure units, and the global factor exp(beta p_plus L len_plus)
restores the absolute normalization.

Long plus runs split their factor into a constant floor (exp of the
smallest residual) plus a nonnegative remainder.  Expanding every long plus
run this way and collecting terms by which runs took the floor turns the
ring sum into: sequences of rods, where each rod starts at a floor-taking
("marked") run whose scalar factor decouples the chain, plus one all-
remainder term with no mark.  Rod weights and both assemblies are computed
here by dynamic programming over total span; the reconstruction identity
against the directly computed ring sum is exact up to roundoff.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .blocks import build_block_table
from .boundary import BoundaryFit, interface_log_matrix
from .errors import DomainError, SizeError
from .model import ModelParams
from .phases import MARK_MIN_PLUS, rod_span, validate_rod
from .transfer import (
    minus_interval,
    pbc_sector_log_z,
    restricted_log_z_all_pairs,
)

MIN_ROW_SPAN = 6  # (p, a, m, b) >= (1, 2, 1, 2)
MIN_ROD_SPAN = MARK_MIN_PLUS + 5  # leading plus run >= 3


@dataclass(eq=False)
class VTables:
    """Segment factor matrices for every atom length up to the caps."""

    params: ModelParams
    fit: BoundaryFit
    plus_idx: np.ndarray
    minus_idx: np.ndarray
    p_max: int
    a_max: int
    _k_plus: list
    _a_scalar: np.ndarray
    _v2: list
    _v3: list
    _v4: list

    def k_plus(self, p: int) -> np.ndarray:
        """Plus-run factor with the floor removed for p >= 3."""
        if not 1 <= p <= self.p_max:
            raise DomainError(f"plus-run length {p} outside table (1..{self.p_max})")
        return self._k_plus[p - 1]

    def a_scalar(self, p: int) -> float:
        """Floor factor of a marked plus run."""
        if not MARK_MIN_PLUS <= p <= self.p_max:
            raise DomainError(f"marked run length {p} outside table")
        return float(self._a_scalar[p - MARK_MIN_PLUS])

    def v2(self, a: int) -> np.ndarray:
        if not 2 <= a <= self.a_max:
            raise DomainError(f"interface length {a} outside table (2..{self.a_max})")
        return self._v2[a - 2]

    def v3(self, m: int) -> np.ndarray:
        if not 1 <= m <= self.p_max:
            raise DomainError(f"minus-run length {m} outside table (1..{self.p_max})")
        return self._v3[m - 1]

    def v4(self, b: int) -> np.ndarray:
        if not 2 <= b <= self.a_max:
            raise DomainError(f"interface length {b} outside table (2..{self.a_max})")
        return self._v4[b - 2]


def build_v_tables(
    params: ModelParams, fit: BoundaryFit, p_max: int, a_max: int
) -> VTables:
    """Assemble all segment matrices from the boundary fit."""
    if p_max - 2 > fit.n_max:
        raise SizeError(
            f"phase runs to {p_max} need window residuals to {p_max - 2}, "
            f"fit stops at {fit.n_max}"
        )
    table = build_block_table(params)
    P = table.sector(1)
    M = table.sector(-1)
    beta, ell = params.beta, params.len_plus
    unit = beta * fit.p_plus * ell

    k_plus = []
    diag1 = np.exp(
        beta * table.h_intra[P] + unit - fit.f1[P] - fit.f2[P]
    )
    k_plus.append(np.diag(diag1))
    if p_max >= 2:
        k_plus.append(np.exp(fit.g[0][np.ix_(P, P)]))
    for p in range(3, p_max + 1):
        k_plus.append(
            np.exp(fit.g[p - 2][np.ix_(P, P)]) - math.exp(fit.a_floor[p - 2])
        )
    a_scalar = np.exp(fit.a_floor[np.arange(MARK_MIN_PLUS, p_max + 1) - 2])

    # minus-run factors, computed directly (mirror symmetry is a test, not
    # an input)
    logzm = [restricted_log_z_all_pairs(params, minus_interval(1))]
    for m in range(2, p_max - 1):
        logzm.append(restricted_log_z_all_pairs(params, minus_interval(m)))
    f3, f4 = fit.f3, fit.f4
    v3 = []
    diag1m = np.exp(beta * table.h_intra[M] + unit - f3[M] - f4[M])
    v3.append(np.diag(diag1m))
    if p_max >= 2:
        g3_0 = -beta * table.w_pair - f3[:, None] - f4[None, :]
        v3.append(np.exp(g3_0[np.ix_(M, M)]))
    for m in range(3, p_max + 1):
        g3 = logzm[m - 3] - beta * fit.p_plus * (m - 2) * ell - f3[:, None] - f4[None, :]
        v3.append(np.exp(g3[np.ix_(M, M)]))

    v2 = [np.exp(interface_log_matrix(fit, a)) for a in range(2, a_max + 1)]
    v4 = []
    from .transfer import iface_mp  # local import to keep module top tidy

    for b in range(2, a_max + 1):
        raw = restricted_log_z_all_pairs(params, iface_mp(b))
        v = (
            raw
            - beta * (table.h_intra[:, None] + table.h_intra[None, :])
            + f4[:, None]
            + fit.f1[None, :]
            - beta * fit.p_plus * (b + 2) * ell
        )
        v4.append(np.exp(v[np.ix_(M, P)]))

    return VTables(
        params=params,
        fit=fit,
        plus_idx=P,
        minus_idx=M,
        p_max=p_max,
        a_max=a_max,
        _k_plus=k_plus,
        _a_scalar=a_scalar,
        _v2=v2,
        _v3=v3,
        _v4=v4,
    )


def rod_weight(vt: VTables, rod) -> float:
    """Weight of one explicit rod (pressure-neutral).

    The leading marked run contributes its scalar floor; the chain of the
    remaining factors is contracted with ones on both ends, which is what
    the rank-one structure of the floor term leaves behind.
    """
    validate_rod(rod)
    p1 = rod[0][0]
    acc = None
    for ell_idx, (p, a, m, b) in enumerate(rod):
        if ell_idx == 0:
            seg = vt.v2(a) @ vt.v3(m) @ vt.v4(b)
        else:
            seg = vt.k_plus(p) @ vt.v2(a) @ vt.v3(m) @ vt.v4(b)
        acc = seg if acc is None else acc @ seg
    one = np.ones(len(vt.plus_idx))
    return float(vt.a_scalar(p1) * (one @ acc @ one))


@dataclass(eq=False)
class WeightTable:
    """Span-resolved rod weights and the row factors behind them."""

    vt: VTables
    span_max: int
    w_span: np.ndarray  # (span_max + 1,); total rod weight at each span
    row_sum: list  # (span_max + 1) list of (plus x plus) row-factor sums
    lead_row: list  # (span_max + 1) list of row vectors: ones @ (v2 v3 v4) sums
    rest: list  # (span_max + 1) list of vectors: row chains applied to ones


def build_weight_table(vt: VTables, span_max: int) -> WeightTable:
    """All rod weights grouped by span, by convolution over segment lengths."""
    need_p = span_max - 5
    need_a = span_max - 4
    if need_p > vt.p_max or need_a > vt.a_max:
        raise SizeError(
            f"span {span_max} needs phase runs to {need_p} and interfaces to "
            f"{need_a}; tables stop at {vt.p_max}, {vt.a_max}"
        )
    nP, nM = len(vt.plus_idx), len(vt.minus_idx)
    zPP = np.zeros((nP, nP))
    zPM = np.zeros((nP, nM))
    one = np.ones(nP)

    # am[j] = sum over a + m = j of v2(a) v3(m)
    am = [np.zeros((nP, nM)) for _ in range(span_max + 1)]
    for a in range(2, min(vt.a_max, span_max) + 1):
        v2a = vt.v2(a)
        for m in range(1, min(vt.p_max, span_max - a) + 1):
            am[a + m] += v2a @ vt.v3(m)
    # amb[j] = sum over a + m + b = j of v2 v3 v4
    amb = [zPP.copy() for _ in range(span_max + 1)]
    for j in range(3, span_max + 1):
        if not am[j].any():
            continue
        for b in range(2, min(vt.a_max, span_max - j) + 1):
            amb[j + b] += am[j] @ vt.v4(b)
    # row_sum[j] = sum over p + a + m + b = j of k(p) v2 v3 v4
    row_sum = [zPP.copy() for _ in range(span_max + 1)]
    for j in range(5, span_max + 1):
        if not amb[j].any():
            continue
        for p in range(1, min(vt.p_max, span_max - j) + 1):
            row_sum[j + p] += vt.k_plus(p) @ amb[j]
    lead_row = [one @ amb[j] for j in range(span_max + 1)]

    rest = [np.zeros(nP) for _ in range(span_max + 1)]
    rest[0] = one.copy()
    for ell in range(MIN_ROW_SPAN, span_max + 1):
        acc = np.zeros(nP)
        for j in range(MIN_ROW_SPAN, ell + 1):
            if row_sum[j].any() and rest[ell - j].any():
                acc += row_sum[j] @ rest[ell - j]
        rest[ell] = acc

    w_span = np.zeros(span_max + 1)
    for total in range(MIN_ROD_SPAN, span_max + 1):
        acc = 0.0
        for p1 in range(MARK_MIN_PLUS, min(vt.p_max, total - 5) + 1):
            afac = vt.a_scalar(p1)
            for j in range(5, total - p1 + 1):
                lr = lead_row[j]
                if lr.any():
                    acc += afac * float(lr @ rest[total - p1 - j])
        w_span[total] = acc
    return WeightTable(
        vt=vt, span_max=span_max, w_span=w_span, row_sum=row_sum,
        lead_row=lead_row, rest=rest,
    )


def marked_ring_sum(wt: WeightTable, L: int) -> float:
    """Sum over rod sequences tiling a ring of L blocks.

    Each ordered sequence carries the span of its first rod as placement
    multiplicity; this counts every marked ring decomposition exactly once.
    """
    if L > wt.span_max:
        raise SizeError(f"ring of {L} blocks exceeds the span table {wt.span_max}")
    d = np.zeros(L + 1)
    d[0] = 1.0
    for n in range(MIN_ROD_SPAN, L + 1):
        d[n] = float(np.dot(wt.w_span[MIN_ROD_SPAN : n + 1], d[n - MIN_ROD_SPAN :: -1][: n - MIN_ROD_SPAN + 1]))
    total = 0.0
    for ell in range(MIN_ROD_SPAN, L + 1):
        if wt.w_span[ell]:
            total += ell * wt.w_span[ell] * d[L - ell]
    return total


def markless_ring_sum(wt: WeightTable, L: int) -> float:
    """Sum over row sequences tiling the ring with no marked run anywhere.

    Junction states stay coupled around the whole ring, so this is a trace
    over chained row factors, first-row span as placement multiplicity.
    """
    if L > wt.span_max:
        raise SizeError(f"ring of {L} blocks exceeds the span table {wt.span_max}")
    nP = len(wt.vt.plus_idx)
    c = [np.zeros((nP, nP)) for _ in range(L + 1)]
    c[0] = np.eye(nP)
    for n in range(MIN_ROW_SPAN, L + 1):
        acc = np.zeros((nP, nP))
        for j in range(MIN_ROW_SPAN, n + 1):
            if wt.row_sum[j].any() and c[n - j].any():
                acc += wt.row_sum[j] @ c[n - j]
        c[n] = acc
    total = 0.0
    for j in range(MIN_ROW_SPAN, L + 1):
        if wt.row_sum[j].any():
            total += j * float(np.trace(wt.row_sum[j] @ c[L - j]))
    return total


def ring_reconstruction(wt: WeightTable, L: int) -> dict:
    """Mixed-sector ring sum, rebuilt from rod weights vs computed directly.

    Returns both routes and their relative gap; the identity is exact, so
    the gap is pure roundoff.
    """
    vt = wt.vt
    params = vt.params
    marked = marked_ring_sum(wt, L)
    markless = markless_ring_sum(wt, L)
    pressure = params.beta * vt.fit.p_plus * L * params.len_plus
    rhs_log = pressure + math.log(marked + markless)
    lhs_log = pbc_sector_log_z(params, L)["mixed"]
    return {
        "direct_log": lhs_log,
        "rebuilt_log": rhs_log,
        "marked": marked,
        "markless": markless,
        "rel_gap": abs(math.expm1(rhs_log - lhs_log)),
    }


def enumerate_rods(span_max: int, p_max: int, a_max: int):
    """Yield every rod (tuple of quadruples) with span <= span_max."""

    def rows_from(remaining, first):
        lo_p = MARK_MIN_PLUS if first else 1
        for p in range(lo_p, min(p_max, remaining - 5) + 1):
            for a in range(2, min(a_max, remaining - p - 3) + 1):
                for m in range(1, min(p_max, remaining - p - a - 2) + 1):
                    for b in range(2, min(a_max, remaining - p - a - m) + 1):
                        yield (p, a, m, b)

    def extend(rod, used):
        yield rod
        for row in rows_from(span_max - used, first=False):
            yield from extend(rod + (row,), used + sum(row))

    for row in rows_from(span_max, first=True):
        yield from extend((row,), sum(row))


def total_rod_weight_check(vt: VTables, wt: WeightTable, span_max: int) -> float:
    """Largest per-span gap between enumerated rod weights and the DP table."""
    sums = np.zeros(span_max + 1)
    for rod in enumerate_rods(span_max, vt.p_max, vt.a_max):
        sums[rod_span(rod)] += rod_weight(vt, rod)
    gaps = np.abs(sums - wt.w_span[: span_max + 1])
    scale = np.maximum(np.abs(sums), 1e-300)
    return float((gaps / scale).max())
