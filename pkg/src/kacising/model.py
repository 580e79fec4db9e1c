"""Model parameters, mean-field thermodynamics, and lattice energies.

The chain is the 1D Ising model with a normalized finite-range coupling:
the bond strength between sites at distance d is ``j(d) = c * K(d / range)``
for ``1 <= d <= range``, with the shape ``K`` taken from a fixed kernel menu
and ``c`` chosen so that every site's total coupling to the rest of the
lattice is exactly 1.  With that normalization the mean-field free energy
``f(m) = -m^2/2 - S(m)/beta`` and its minimizer ``m = tanh(beta*m)`` are
kernel-independent.

Lengths form a divisibility hierarchy: ``len_cg | len_minus | range |
len_plus``.  Empirical magnetizations are tested on ``len_minus`` blocks
against the band ``|mean -+ m_beta| <= zeta``; phase labels on ``len_plus``
blocks are built from those in :mod:`kacising.phases`.
"""

from __future__ import annotations

import hashlib
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    BoundaryError,
    DivisibilityError,
    DomainError,
    EnumerationCapError,
    ParamError,
    PeriodicSupportWarning,
    TorusTooSmall,
)

PARAM_KEYS = ("beta", "zeta", "len_cg", "len_minus", "range", "len_plus", "kernel")

KERNELS = ("triangle", "box")

# block-state enumeration is 2**len_plus; keep it exact
MAX_LEN_PLUS = 14


def entropy(m):
    """Binary spin entropy S(m), elementwise; S(0) = log 2, S(+-1) = 0."""
    m = np.asarray(m, dtype=float)
    if np.any(np.abs(m) > 1.0):
        raise DomainError("entropy needs |m| <= 1")
    a = (1.0 - m) / 2.0
    b = (1.0 + m) / 2.0
    sa = np.where(a > 0.0, -a * np.log(np.where(a > 0.0, a, 1.0)), 0.0)
    sb = np.where(b > 0.0, -b * np.log(np.where(b > 0.0, b, 1.0)), 0.0)
    out = sa + sb
    return out if out.ndim else float(out)


def mf_free_energy(m, beta: float):
    """Mean-field free energy density f(m) = -m^2/2 - S(m)/beta."""
    if beta <= 0.0:
        raise DomainError("beta must be positive")
    m = np.asarray(m, dtype=float)
    out = -0.5 * m * m - entropy(m) / beta
    return out if out.ndim else float(out)


def mf_free_energy_prime(m, beta: float):
    """d/dm of the mean-field free energy: -m + atanh(m)/beta."""
    if beta <= 0.0:
        raise DomainError("beta must be positive")
    m = np.asarray(m, dtype=float)
    if np.any(np.abs(m) >= 1.0):
        raise DomainError("derivative needs |m| < 1")
    out = -m + np.arctanh(m) / beta
    return out if out.ndim else float(out)


def solve_magnetization(beta: float) -> float:
    """Positive root of m = tanh(beta*m).

    Exists only for beta > 1; bisection bracketed on (0, 1) then polished
    with Newton steps to residual below 1e-14.
    """
    if not beta > 1.0:
        raise DomainError("spontaneous magnetization needs beta > 1")
    lo, hi = 1e-12, 1.0 - 1e-16
    if math.tanh(beta * lo) - lo <= 0.0:  # pragma: no cover - beta>1 guarantees
        raise DomainError("bracket failed at lower end")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if math.tanh(beta * mid) - mid > 0.0:
            lo = mid
        else:
            hi = mid
    m = 0.5 * (lo + hi)
    for _ in range(4):
        t = math.tanh(beta * m)
        denom = beta * (1.0 - t * t) - 1.0
        if denom == 0.0:
            break
        m -= (t - m) / denom
    return m


def coupling_table(range_: int, kernel: str) -> np.ndarray:
    """Bond strengths j(d), d = 1..range, normalized so sum over y != x is 1."""
    if kernel not in KERNELS:
        raise ParamError(f"unknown kernel {kernel!r}; choose from {KERNELS}")
    d = np.arange(1, range_ + 1, dtype=float)
    if kernel == "triangle":
        raw = 1.0 - d / range_
    else:
        raw = np.ones_like(d)
    total = 2.0 * raw.sum()
    if total <= 0.0:
        raise ParamError(
            "coupling table vanishes; triangle kernel needs range >= 2"
        )
    return raw / total


@dataclass(frozen=True)
class ModelParams:
    """Validated model parameters plus derived quantities.

    Use :func:`build_params`; the constructor does not validate.
    """

    beta: float
    zeta: float
    len_cg: int
    len_minus: int
    range: int
    len_plus: int
    kernel: str
    m_beta: float
    couplings: tuple

    def to_record(self) -> dict:
        """Flat key-value record with exactly the serializable keys."""
        return {
            "beta": self.beta,
            "zeta": self.zeta,
            "len_cg": self.len_cg,
            "len_minus": self.len_minus,
            "range": self.range,
            "len_plus": self.len_plus,
            "kernel": self.kernel,
        }

    @property
    def blocks_per_plus(self) -> int:
        return self.len_plus // self.len_minus

    def key(self) -> str:
        """Stable content hash of the serializable record."""
        text = "\n".join(f"{k}={self.to_record()[k]!r}" for k in PARAM_KEYS)
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def achievable_means(n_sites: int) -> np.ndarray:
    """Empirical means realizable by n_sites spins: -1 + 2k/n."""
    return -1.0 + 2.0 * np.arange(n_sites + 1) / n_sites


def build_params(
    beta: float,
    zeta: float,
    len_cg: int,
    len_minus: int,
    range: int,
    len_plus: int,
    kernel: str = "triangle",
) -> ModelParams:
    """Validate and assemble :class:`ModelParams`.

    Checks: positive integer lengths with len_cg | len_minus | range |
    len_plus; len_plus within the exact-enumeration cap; beta > 1 and
    0 < zeta < m_beta (the two phase bands are disjoint); and the plus band
    must be reachable by some empirical mean of a len_minus block.
    """
    for name, val in (
        ("len_cg", len_cg),
        ("len_minus", len_minus),
        ("range", range),
        ("len_plus", len_plus),
    ):
        if not isinstance(val, (int, np.integer)) or val < 1:
            raise ParamError(f"{name} must be a positive integer, got {val!r}")
    if len_minus % len_cg or range % len_minus or len_plus % range:
        raise DivisibilityError(
            "need len_cg | len_minus | range | len_plus, got "
            f"{len_cg} | {len_minus} | {range} | {len_plus}"
        )
    if len_plus > MAX_LEN_PLUS:
        raise EnumerationCapError(
            f"len_plus = {len_plus} exceeds the exact cap {MAX_LEN_PLUS}"
        )
    if not beta > 1.0:
        raise ParamError("beta must exceed 1 (two-phase regime)")
    if not zeta > 0.0:
        raise ParamError("zeta must be positive")
    m_beta = solve_magnetization(beta)
    if not zeta < m_beta:
        raise ParamError(
            f"zeta = {zeta} must stay below m_beta = {m_beta:.6f} "
            "so the two bands are disjoint"
        )
    gaps = np.abs(achievable_means(len_minus) - m_beta)
    if gaps.min() > zeta:
        raise ParamError(
            "plus band unreachable: no empirical mean of a "
            f"{len_minus}-site block lies within {zeta} of m_beta = {m_beta:.6f}"
        )
    j = coupling_table(range, kernel)
    return ModelParams(
        beta=float(beta),
        zeta=float(zeta),
        len_cg=int(len_cg),
        len_minus=int(len_minus),
        range=int(range),
        len_plus=int(len_plus),
        kernel=kernel,
        m_beta=m_beta,
        couplings=tuple(float(x) for x in j),
    )


def params_from_record(record: dict) -> ModelParams:
    """Rebuild params from a flat record (inverse of ``to_record``)."""
    missing = [k for k in PARAM_KEYS if k not in record]
    if missing:
        raise ParamError(f"record is missing keys {missing}")
    return build_params(
        beta=float(record["beta"]),
        zeta=float(record["zeta"]),
        len_cg=int(record["len_cg"]),
        len_minus=int(record["len_minus"]),
        range=int(record["range"]),
        len_plus=int(record["len_plus"]),
        kernel=str(record["kernel"]),
    )


def _as_spins(sigma) -> np.ndarray:
    arr = np.asarray(sigma)
    if arr.ndim != 1 or arr.size == 0:
        raise DomainError("spin configuration must be a nonempty 1D array")
    if not np.all(np.abs(arr) == 1):
        raise DomainError("spins must be +-1")
    return arr.astype(np.int8)


def window_energy(sigma, params: ModelParams, left_bc=None, right_bc=None) -> float:
    """Energy of all bonds meeting a finite window.

    Includes every pair inside the window plus every pair linking the window
    to the fixed exterior spins.  Bonds entirely inside the boundary are a
    constant for a fixed boundary and are excluded.  ``left_bc`` and
    ``right_bc`` are ordered as on the lattice, so the last entry of
    ``left_bc`` and the first entry of ``right_bc`` sit adjacent to the
    window.  Each must supply at least ``range`` sites when given.
    """
    s = _as_spins(sigma)
    j = np.asarray(params.couplings)
    rng = params.range
    n = s.size
    e = 0.0
    for d in range(1, min(rng, n - 1) + 1):
        e -= j[d - 1] * float(np.dot(s[:-d], s[d:]))
    for name, bc, flipidx in (("left_bc", left_bc, True), ("right_bc", right_bc, False)):
        if bc is None:
            continue
        b = _as_spins(bc)
        if b.size < rng:
            raise BoundaryError(
                f"{name} must supply at least range = {rng} sites, got {b.size}"
            )
        # cross bonds: distance from window edge into the boundary
        if flipidx:
            edge = b[::-1]  # edge[0] adjacent to window start
            win = s
        else:
            edge = b
            win = s[::-1]  # win[0] adjacent to window end
        for d in range(1, rng + 1):
            # pairs (window site at depth a, boundary site at depth d-1-a)
            for a in range(0, min(d, n)):
                depth_b = d - 1 - a
                if depth_b < 0 or depth_b >= rng:
                    continue
                e -= j[d - 1] * float(win[a]) * float(edge[depth_b])
    return e


def torus_energy(sigma, params: ModelParams) -> float:
    """Energy on a ring; each unordered pair counted once.

    Requires L > 2*range so that no pair interacts along both windings;
    warns when the support still wraps more than a third of the ring.
    """
    s = _as_spins(sigma)
    return float(torus_energy_batch(s[None, :], params)[0])


def torus_energy_batch(sigmas, params: ModelParams) -> np.ndarray:
    """Vectorized :func:`torus_energy` over rows of ``sigmas``."""
    arr = np.asarray(sigmas)
    if arr.ndim != 2:
        raise DomainError("expected a (n_configs, n_sites) array")
    L = arr.shape[1]
    rng = params.range
    if L <= 2 * rng:
        raise TorusTooSmall(f"torus length {L} must exceed 2*range = {2 * rng}")
    if L <= 3 * rng:
        warnings.warn(
            f"coupling support ({rng}) wraps more than a third of the torus ({L})",
            PeriodicSupportWarning,
            stacklevel=2,
        )
    j = params.couplings
    work = arr.astype(np.float64)
    e = np.zeros(arr.shape[0])
    for d in range(1, rng + 1):
        e -= j[d - 1] * np.sum(work * np.roll(work, -d, axis=1), axis=1)
    return e


def enumerate_spin_rings(n_sites: int) -> np.ndarray:
    """All 2**n spin rings as a (2**n, n) +-1 int8 array (site 0 = low bit)."""
    if n_sites > 24:
        raise EnumerationCapError(f"2**{n_sites} configurations is beyond the budget")
    codes = np.arange(2**n_sites, dtype=np.int64)
    bits = (codes[:, None] >> np.arange(n_sites)[None, :]) & 1
    return (2 * bits - 1).astype(np.int8)
