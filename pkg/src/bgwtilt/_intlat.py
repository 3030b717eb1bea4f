"""Exact integer linear algebra helpers (rank, lattice saturation).

Everything here works on small matrices with Python integers, so results
are exact; no floating point is involved.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Sequence


def integer_rank(rows: Sequence[Sequence[int]]) -> int:
    """Rank of an integer matrix, computed exactly over the rationals."""
    work = [[Fraction(x) for x in row] for row in rows]
    if not work:
        return 0
    ncols = len(work[0])
    rank = 0
    col = 0
    while rank < len(work) and col < ncols:
        pivot = next((r for r in range(rank, len(work)) if work[r][col] != 0), None)
        if pivot is None:
            col += 1
            continue
        work[rank], work[pivot] = work[pivot], work[rank]
        pv = work[rank][col]
        for r in range(rank + 1, len(work)):
            if work[r][col] != 0:
                factor = work[r][col] / pv
                work[r] = [a - factor * b for a, b in zip(work[r], work[rank])]
        rank += 1
        col += 1
    return rank


def lattice_is_full(vectors: Iterable[Sequence[int]], dim: int) -> bool:
    """Whether the integer lattice generated by ``vectors`` is all of Z^dim.

    Uses column-style Hermite reduction: the lattice equals Z^dim iff the
    reduction produces a unit diagonal.
    """
    basis: list[list[int]] = []
    for v in vectors:
        vec = [int(x) for x in v]
        if len(vec) != dim:
            raise ValueError("vector dimension mismatch")
        if any(vec):
            basis.append(vec)
    if not basis:
        return dim == 0
    # Bring the generator list to upper-triangular Hermite-like form by
    # gcd elimination on each coordinate in turn.
    pivots: list[list[int]] = []
    for col in range(dim):
        carrier = None
        rest = []
        for vec in basis:
            if vec[col] != 0:
                if carrier is None:
                    carrier = vec
                else:
                    # gcd step: combine carrier and vec to reduce position col
                    a, b = carrier[col], vec[col]
                    while b:
                        q = a // b
                        carrier, vec = vec, [x - q * y for x, y in zip(carrier, vec)]
                        a, b = carrier[col], vec[col]
                    if any(vec):
                        rest.append(vec)
            else:
                if any(vec):
                    rest.append(vec)
        if carrier is None:
            return False
        pivots.append(carrier)
        basis = rest
    # Lattice is Z^dim iff the triangular pivot entries are all +-1.
    det = 1
    for col, vec in enumerate(pivots):
        det *= vec[col]
    return abs(det) == 1
