"""Block phase labels and the interval decomposition of a ring.

Three nested labels are built from a spin configuration:

* ``eta``: one label per ``len_minus`` block; +-1 when the empirical mean
  lies within ``zeta`` of ``+-m_beta``, else 0.
* ``theta``: one label per ``len_plus`` block; +-1 when every sub-block
  ``eta`` agrees, else 0.
* ``big_theta``: +-1 at block i when theta is +-1 at i-1, i, i+1; else 0.
  A block with ``big_theta != 0`` sits strictly inside a phase.

A ring whose ``big_theta`` chain shows both signs splits uniquely into a
cyclic alternation of four atom kinds: a plus region, a plus-to-minus
interface, a minus region, a minus-to-plus interface.  Phase atoms run from
the first to the last block of a maximal same-sign group of ``big_theta``
(zero dips inside a group are phase interior); interfaces are the blocks
strictly between opposite-sign groups and always have length >= 2.

Rods chop the atom cycle at marks placed on the left endpoint of every
plus atom of length >= 3; each rod is a tuple of quadruples
``(plus, iface_pm, minus, iface_mp)`` of atom lengths, one quadruple per
turn of the kind cycle.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import (
    AlignmentError,
    BoundaryError,
    DomainError,
    NoAnchorError,
    NoPhaseError,
    SinglePhaseError,
)
from .model import ModelParams

KIND_CYCLE = ("plus", "iface_pm", "minus", "iface_mp")

MARK_MIN_PLUS = 3  # plus atoms at least this long carry a mark


class Atom(NamedTuple):
    kind: str
    left: int
    length: int


@dataclass(frozen=True)
class PhaseLabels:
    eta: np.ndarray
    theta: np.ndarray
    big_theta: np.ndarray


@dataclass(frozen=True)
class IntervalPartition:
    """Cyclic atom decomposition; atoms are listed from the one covering
    block 0 and their lengths sum to ``n_blocks``."""

    n_blocks: int
    atoms: tuple

    def lengths(self, kind: str) -> tuple:
        return tuple(a.length for a in self.atoms if a.kind == kind)

    def atom_at(self, block: int) -> Atom:
        b = block % self.n_blocks
        for a in self.atoms:
            if (b - a.left) % self.n_blocks < a.length:
                return a
        raise DomainError("atoms do not cover the ring")  # pragma: no cover


@dataclass(frozen=True)
class RodSequence:
    """Rods of a ring decomposition; ``marks[k]`` is the block index of the
    left endpoint of rod k's leading plus atom."""

    n_blocks: int
    marks: tuple
    rods: tuple


def _theta_values(theta) -> np.ndarray:
    th = np.asarray(theta)
    if th.ndim != 1 or th.size == 0:
        raise DomainError("theta chain must be a nonempty 1D array")
    if not np.all(np.isin(th, (-1, 0, 1))):
        raise DomainError("theta labels must be -1, 0, or +1")
    return th.astype(np.int8)


def eta_labels(sigma, params: ModelParams) -> np.ndarray:
    """Per-``len_minus``-block labels from the empirical magnetization."""
    s = np.asarray(sigma)
    if s.ndim != 1 or s.size % params.len_minus:
        raise AlignmentError(
            f"{s.size} sites do not tile into len_minus = {params.len_minus} blocks"
        )
    means = s.reshape(-1, params.len_minus).mean(axis=1)
    out = np.zeros(means.size, dtype=np.int8)
    out[np.abs(means - params.m_beta) <= params.zeta] = 1
    out[np.abs(means + params.m_beta) <= params.zeta] = -1
    return out


def theta_labels(sigma, params: ModelParams) -> np.ndarray:
    """Per-``len_plus``-block labels: the unanimous ``eta`` sign, else 0."""
    s = np.asarray(sigma)
    if s.ndim != 1 or s.size % params.len_plus:
        raise AlignmentError(
            f"{s.size} sites do not tile into len_plus = {params.len_plus} blocks"
        )
    sub = eta_labels(s, params).reshape(-1, params.blocks_per_plus)
    out = np.zeros(sub.shape[0], dtype=np.int8)
    out[np.all(sub == 1, axis=1)] = 1
    out[np.all(sub == -1, axis=1)] = -1
    return out


def big_theta_labels(theta, cyclic: bool = True, left=None, right=None) -> np.ndarray:
    """Three-block-deep labels; needs neighbors, so either cyclic or with
    explicit single ``left``/``right`` boundary labels."""
    th = _theta_values(theta)
    if cyclic:
        tl = np.roll(th, 1)
        tr = np.roll(th, -1)
    else:
        if left is None or right is None:
            raise BoundaryError("non-cyclic labels need left and right neighbors")
        tl = np.concatenate(([np.int8(left)], th[:-1]))
        tr = np.concatenate((th[1:], [np.int8(right)]))
    agree = (tl == th) & (th == tr) & (th != 0)
    return np.where(agree, th, 0).astype(np.int8)


def label_torus(sigma, params: ModelParams) -> PhaseLabels:
    """All three label layers of a ring configuration."""
    return PhaseLabels(
        eta=eta_labels(sigma, params),
        theta=(th := theta_labels(sigma, params)),
        big_theta=big_theta_labels(th, cyclic=True),
    )


def classify_torus(theta) -> str:
    """Ring sector from the deep labels: 'mixed', 'plus', 'minus', 'zero'."""
    big = big_theta_labels(_theta_values(theta), cyclic=True)
    has_p = bool(np.any(big == 1))
    has_m = bool(np.any(big == -1))
    if has_p and has_m:
        return "mixed"
    if has_p:
        return "plus"
    if has_m:
        return "minus"
    return "zero"


def decompose(theta) -> IntervalPartition:
    """Unique atom decomposition of a mixed-sector ring.

    Raises NoPhaseError when no block is strictly inside a phase and
    SinglePhaseError when only one phase appears (no interface exists).
    """
    th = _theta_values(theta)
    n = th.size
    big = big_theta_labels(th, cyclic=True)
    nz = np.nonzero(big)[0]
    if nz.size == 0:
        raise NoPhaseError("no block is strictly inside a phase")
    vals = big[nz]
    if np.all(vals == vals[0]):
        raise SinglePhaseError("only one phase present; ring has no interface")
    starts = np.nonzero(vals != np.roll(vals, 1))[0]
    atoms = []
    k_groups = starts.size
    for k in range(k_groups):
        i0 = starts[k]
        i1 = starts[(k + 1) % k_groups]
        first = int(nz[i0])
        last = int(nz[(i1 - 1) % nz.size])
        sign = int(vals[i0])
        length = (last - first) % n + 1
        atoms.append(Atom("plus" if sign > 0 else "minus", first, length))
        nxt = int(nz[i1])
        gap_left = (last + 1) % n
        gap_len = (nxt - 1 - last) % n
        assert gap_len >= 2, "interfaces are at least two blocks by construction"
        atoms.append(Atom("iface_pm" if sign > 0 else "iface_mp", gap_left, gap_len))
    return _anchored(n, atoms)


def _anchored(n_blocks: int, atoms: list) -> IntervalPartition:
    """Rotate the cyclic atom list to start at the atom covering block 0."""
    for idx, a in enumerate(atoms):
        if (0 - a.left) % n_blocks < a.length:
            ordered = tuple(atoms[idx:] + atoms[:idx])
            break
    else:  # pragma: no cover
        raise DomainError("atoms do not cover block 0")
    assert sum(a.length for a in ordered) == n_blocks
    return IntervalPartition(n_blocks=n_blocks, atoms=ordered)


def rod_span(rod) -> int:
    """Total block count of a rod."""
    return int(sum(sum(row) for row in rod))


def validate_rod(rod, canonical: bool = False) -> None:
    """Structural checks on one rod; canonical rods also cap later plus runs."""
    if not rod:
        raise DomainError("rod must contain at least one quadruple")
    for ell, row in enumerate(rod):
        if len(row) != 4:
            raise DomainError(f"row {ell} is not a quadruple: {row!r}")
        p, a, m, b = row
        if min(p, m) < 1 or min(a, b) < 2:
            raise DomainError(
                f"row {ell} violates atom minima (phase >= 1, interface >= 2): {row!r}"
            )
        if ell == 0 and p < MARK_MIN_PLUS:
            raise DomainError(f"leading plus run must be >= {MARK_MIN_PLUS}, got {p}")
        if canonical and ell > 0 and p >= MARK_MIN_PLUS:
            raise DomainError(
                f"canonical rods keep later plus runs short, row {ell} has {p}"
            )
    if rod_span(rod) < 8:
        raise DomainError("rod spans fewer than 8 blocks")  # pragma: no cover


def rod_atoms(rod) -> tuple:
    """Atoms of one rod as (kind, offset, length), offset from the rod start."""
    out = []
    pos = 0
    for row in rod:
        for kind, length in zip(KIND_CYCLE, row):
            out.append((kind, pos, int(length)))
            pos += int(length)
    return tuple(out)


def mark_rods(part: IntervalPartition) -> RodSequence:
    """Cut the atom cycle at every long plus atom's left endpoint.

    The result is canonical: each rod leads with a plus run >= 3 and every
    later plus run in the same rod is shorter.  Raises NoAnchorError when no
    plus atom is long enough to carry a mark.
    """
    idxs = [
        i
        for i, a in enumerate(part.atoms)
        if a.kind == "plus" and a.length >= MARK_MIN_PLUS
    ]
    if not idxs:
        raise NoAnchorError(
            f"no plus atom of length >= {MARK_MIN_PLUS}; cannot place marks"
        )
    n_atoms = len(part.atoms)
    assert n_atoms % 4 == 0
    rods = []
    marks = []
    for j, i0 in enumerate(idxs):
        i1 = idxs[(j + 1) % len(idxs)]
        span = (i1 - i0) % n_atoms or n_atoms
        assert span % 4 == 0
        rows = []
        for r in range(span // 4):
            quad = []
            for t, kind in enumerate(KIND_CYCLE):
                atom = part.atoms[(i0 + 4 * r + t) % n_atoms]
                assert atom.kind == kind
                quad.append(atom.length)
            rows.append(tuple(quad))
        rod = tuple(rows)
        validate_rod(rod, canonical=True)
        rods.append(rod)
        marks.append(part.atoms[i0].left)
    return RodSequence(n_blocks=part.n_blocks, marks=tuple(marks), rods=tuple(rods))


def assemble_rods(seq: RodSequence) -> IntervalPartition:
    """Lay the rods back onto the ring; inverse of :func:`mark_rods`."""
    if not seq.rods or len(seq.rods) != len(seq.marks):
        raise DomainError("rod sequence needs matching rods and marks")
    atoms = []
    pos = seq.marks[0]
    for k, rod in enumerate(seq.rods):
        if pos % seq.n_blocks != seq.marks[k]:
            raise DomainError(f"rod {k} does not start at its mark")
        for kind, off, length in rod_atoms(rod):
            atoms.append(Atom(kind, (pos + off) % seq.n_blocks, length))
        pos += rod_span(rod)
    if (pos - seq.marks[0]) != seq.n_blocks:
        raise DomainError("rods do not tile the ring exactly once")
    return _anchored(seq.n_blocks, atoms)
