"""Pressure and boundary-term fit for solid-phase windows, and the
interface weights built on top of it.

Solid plus windows factorize at large length: the log of the window sum is
``beta * p_plus * n * len_plus`` (bulk pressure) plus one additive term per
boundary block, up to a residual that decays with the window length.  The
fit pins the two boundary terms with a reference block ``r``:

* ``p_plus`` from the finite difference of window sums between two depths,
* ``f2(s)`` and ``f1(s)`` from windows with one boundary at ``r``, split
  symmetrically so ``f1(r) = f2(r)``,
* the residual ``g[n](s, s')`` of every shorter window, which is exact by
  construction and whose decay measures how fast boundary influence dies.

``a_floor[n]`` is the smallest residual over plus-labeled boundary pairs;
subtracting its exponential from a window factor leaves a nonnegative
remainder used by the rod weight expansion.

Minus-phase mirrors come from the global spin flip, which the block tables
satisfy exactly.

Interface factors attach the fitted boundary terms to an interface window
and charge it the pressure of its own blocks plus the two junction blocks,
whose internal energies it also owns.  Their total strength over all
interface lengths has a geometric tail; the same number is recovered
gauge-free from a ratio of two long constrained windows (one forced to hold
an interface, one solid), which is the surface-tension route.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .blocks import build_block_table, gauge_state
from .errors import DomainError, TruncationError
from .model import ModelParams
from .transfer import (
    fixed_theta,
    free_constraint,
    iface_pm,
    minus_interval,
    plus_interval,
    restricted_log_z,
    restricted_log_z_all_pairs,
    stack_constraints,
    window_state_distribution,
)


@dataclass(eq=False)
class BoundaryFit:
    """Fitted pressure, boundary terms, and residual tables."""

    params: ModelParams
    ref: int
    n_min: int
    n_max: int
    p_plus: float
    f1: np.ndarray  # (S,)
    f2: np.ndarray  # (S,)
    g: np.ndarray  # (n_max + 1, S, S); g[n] is the residual at window length n
    a_floor: np.ndarray  # (n_max + 1,)

    @property
    def f3(self) -> np.ndarray:
        """Left boundary term of minus windows (mirror of f1)."""
        return self.f1[build_block_table(self.params).flip]

    @property
    def f4(self) -> np.ndarray:
        """Right boundary term of minus windows (mirror of f2)."""
        return self.f2[build_block_table(self.params).flip]

    def g_mirror(self, n: int) -> np.ndarray:
        """Residual of minus windows (mirror of g)."""
        flip = build_block_table(self.params).flip
        return self.g[n][np.ix_(flip, flip)]

    def residual_sup(self, n: int) -> float:
        """Largest |residual| over plus-labeled boundary pairs at length n."""
        P = build_block_table(self.params).sector(1)
        return float(np.abs(self.g[n][np.ix_(P, P)]).max())


def fit_boundary(
    params: ModelParams,
    n_min: int = 8,
    n_max: int = 16,
    ref: int | None = None,
) -> BoundaryFit:
    """Fit pressure and boundary terms from solid plus windows."""
    if not 1 <= n_min < n_max:
        raise DomainError("need 1 <= n_min < n_max")
    table = build_block_table(params)
    if ref is None:
        ref = gauge_state(table)
    beta, ell = params.beta, params.len_plus
    logzp = [restricted_log_z_all_pairs(params, free_constraint(0))]
    for n in range(1, n_max + 1):
        logzp.append(restricted_log_z_all_pairs(params, plus_interval(n)))
    p_plus = (logzp[n_max][ref, ref] - logzp[n_min][ref, ref]) / (
        beta * ell * (n_max - n_min)
    )
    f_half = 0.5 * (logzp[n_max][ref, ref] - beta * ell * n_max * p_plus)
    f2 = logzp[n_max][ref, :] - beta * ell * n_max * p_plus - f_half
    f1 = logzp[n_max][:, ref] - beta * ell * n_max * p_plus - f_half
    g = np.empty((n_max + 1, table.n_states, table.n_states))
    for n in range(n_max + 1):
        g[n] = logzp[n] - beta * ell * n * p_plus - f1[:, None] - f2[None, :]
    P = table.sector(1)
    a_floor = np.array([g[n][np.ix_(P, P)].min() for n in range(n_max + 1)])
    return BoundaryFit(
        params=params,
        ref=int(ref),
        n_min=n_min,
        n_max=n_max,
        p_plus=float(p_plus),
        f1=f1,
        f2=f2,
        g=g,
        a_floor=a_floor,
    )


def interface_log_matrix(fit: BoundaryFit, u: int, sectors: bool = True):
    """Log interface factors for a length-u interface window.

    Rows are the plus-labeled junction block left of the window, columns the
    minus-labeled junction right of it (full-state matrix if ``sectors`` is
    False, with impossible pairs at -inf).
    """
    if u < 2:
        raise DomainError("interfaces have at least two blocks")
    p = fit.params
    raw = restricted_log_z_all_pairs(p, iface_pm(u))
    table = build_block_table(p)
    v = (
        raw
        - p.beta * (table.h_intra[:, None] + table.h_intra[None, :])
        + fit.f2[:, None]
        + fit.f3[None, :]
        - p.beta * fit.p_plus * (u + 2) * p.len_plus
    )
    if not sectors:
        return v
    return v[np.ix_(table.sector(1), table.sector(-1))]


def interface_strength(fit: BoundaryFit, u: int) -> float:
    """Total interface factor at one interface length."""
    v = interface_log_matrix(fit, u)
    finite = v[np.isfinite(v)]
    return float(np.exp(finite).sum()) if finite.size else 0.0


def _sum_with_geometric_tail(values_fn, rel_tol: float, u_cap: int, what: str) -> tuple:
    """Sum values_fn(u) for u >= 2 until a geometric tail bound is certified.

    The per-length strengths approach geometric decay with an odd-even
    ripple, so the certified ratio is the largest over the last few shells.
    Returns (total including tail estimate, list of summed values).
    """
    per: list = []
    total = 0.0
    for u in range(2, u_cap + 1):
        cur = values_fn(u)
        per.append(cur)
        total += cur
        if len(per) >= 4 and all(v > 0.0 for v in per[-4:]):
            ratio = max(per[-k] / per[-k - 1] for k in range(1, 4))
            if ratio < 1.0:
                tail = cur * ratio / (1.0 - ratio)
                if tail <= rel_tol * total:
                    return total + tail, per
    raise TruncationError(f"{what} not certified to {rel_tol} within {u_cap} lengths")


def interface_total(
    fit: BoundaryFit, rel_tol: float = 1e-12, u_cap: int = 256
) -> tuple:
    """Sum interface strengths over all lengths with a geometric tail bound.

    Returns (total, per-length list starting at u=2); raises TruncationError
    when decay cannot be certified within the cap.
    """
    return _sum_with_geometric_tail(
        lambda u: interface_strength(fit, u), rel_tol, u_cap, "interface strengths"
    )


def forced_interface_log_ratio(
    params: ModelParams, bulk: int, u: int, ref: int | None = None
) -> float:
    """Gauge-free interface factor from a ratio of two long windows.

    Numerator: a window of ``2*bulk + u + 2`` blocks forced to hold one
    interface of length u between two solid regions of depth ``bulk``, with
    plus boundary ``ref`` on the left and its spin flip on the right.
    Denominator: the same window solid plus, with the right boundary flipped
    back.  As ``bulk`` grows this ratio converges to the fitted interface
    strength at length u, without using any fitted quantity.
    """
    table = build_block_table(params)
    if ref is None:
        ref = gauge_state(table)
    flip_ref = int(table.flip[ref])
    cons = stack_constraints(
        plus_interval(bulk),
        fixed_theta([1]),
        iface_pm(u),
        fixed_theta([-1]),
        minus_interval(bulk),
    )
    num = restricted_log_z(params, cons, ref, flip_ref)
    den = restricted_log_z(params, plus_interval(2 * bulk + u + 2), ref, ref)
    return num - den


def surface_tension(
    params: ModelParams,
    bulk: int,
    rel_tol: float = 1e-10,
    u_cap: int = 256,
    ref: int | None = None,
) -> float:
    """Interface free-energy cost per interface, gauge-free route.

    Sums the forced-interface ratios over interface lengths (geometric tail
    like :func:`interface_total`) and returns -log(total) / beta.
    """
    total, _ = _sum_with_geometric_tail(
        lambda u: math.exp(forced_interface_log_ratio(params, bulk, u, ref)),
        rel_tol,
        u_cap,
        "forced-interface ratios",
    )
    return -math.log(total) / params.beta


def boundary_influence_decay(
    params: ModelParams, lengths, ref: int | None = None
) -> dict:
    """Total-variation influence of the left boundary on the center block.

    For each window length, the largest TV distance between center-block
    marginals as the left boundary ranges over plus-labeled blocks, with the
    right boundary fixed at the reference.
    """
    table = build_block_table(params)
    if ref is None:
        ref = gauge_state(table)
    P = [int(s) for s in table.sector(1)]
    out = {}
    for n in lengths:
        if n < 3:
            raise DomainError("influence probe needs at least three blocks")
        cons = plus_interval(n)
        pos = (n + 1) // 2
        dists = [
            window_state_distribution(params, cons, b, ref, pos) for b in P
        ]
        worst = 0.0
        for i in range(len(dists)):
            for j in range(i + 1, len(dists)):
                worst = max(worst, 0.5 * float(np.abs(dists[i] - dists[j]).sum()))
        out[int(n)] = worst
    return out
