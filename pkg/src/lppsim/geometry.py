"""Order relations and surgery on staircases.

All relations are evaluated on grid indices of the unscaled staircases.
For a staircase write [a(m), b(m)] for its interval on line m.

* strict precedence ``s1 ≺ s2``: no point of s1 lies strictly to the right
  of a point of s2 at the same height, i.e. b1(m) <= a2(m) on every line.
  This forces x1 <= x2, y1 <= y2 and horizontal separateness.
* weak precedence ``s1 ⪯ s2``: every point of s2 has a point of s1 at the
  same height weakly to its left, i.e. a1(m) <= a2(m) on every line and
  b1(m) <= b2(m) below the top line.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .environment import Environment
from .errors import ParameterError
from .lpp import LEFTMOST, MultiStaircase, Staircase, multi_geodesic
from .scaled import (CompatibleTriple, Zigzag, _multi_weight_unscaled, _snap_tuple,
                     farthest_point, interpolant, make_zigzag, mesh_index, polymer,
                     scaled_position, snap_point, staircase_interval)

STRICT = "strict"
WEAK = "weak"


@dataclass(frozen=True)
class OrderWitness:
    relation: str
    holds: bool
    violation: tuple | None = None   # (line, grid index) of the first failure

    def __post_init__(self):
        if not self.holds and self.violation is None:
            raise ParameterError("a failed relation needs a violation")

    def __bool__(self):
        return self.holds


def _stair(z) -> Staircase:
    return z.staircase if isinstance(z, Zigzag) else z


def _same_lines(s1: Staircase, s2: Staircase):
    if (s1.i, s1.j) != (s2.i, s2.j):
        raise ParameterError(f"line ranges differ: {s1.i}..{s1.j} vs {s2.i}..{s2.j}")


def precedes_strict(z1, z2) -> OrderWitness:
    s1, s2 = _stair(z1), _stair(z2)
    _same_lines(s1, s2)
    p1, p2 = s1.positions, s2.positions
    for q in range(s1.j - s1.i + 1):
        if p1[q + 1] > p2[q]:
            return OrderWitness(STRICT, False, (s1.i + q, p2[q]))
    return OrderWitness(STRICT, True)


def precedes_weak(z1, z2) -> OrderWitness:
    s1, s2 = _stair(z1), _stair(z2)
    _same_lines(s1, s2)
    p1, p2 = s1.positions, s2.positions
    for q in range(s1.j - s1.i + 1):
        if p1[q] > p2[q]:
            return OrderWitness(WEAK, False, (s1.i + q, p2[q]))
    return OrderWitness(WEAK, True)


def staircase_meet(s1: Staircase, s2: Staircase) -> Staircase:
    """Leftmost of the two paths at every height."""
    _same_lines(s1, s2)
    pos = np.minimum(s1.positions, s2.positions)
    return Staircase(int(pos[0]), s1.i, int(pos[-1]), s1.j, tuple(int(v) for v in pos[1:-1]))


def staircase_join(s1: Staircase, s2: Staircase) -> Staircase:
    """Rightmost of the two paths at every height."""
    _same_lines(s1, s2)
    pos = np.maximum(s1.positions, s2.positions)
    return Staircase(int(pos[0]), s1.i, int(pos[-1]), s1.j, tuple(int(v) for v in pos[1:-1]))


def split_staircase(s: Staircase, line: int, g: int) -> tuple:
    """Pieces of ``s`` before and after the point (g, line), which must lie on s."""
    a, b = s.segment(line)
    if not a <= g <= b:
        raise ParameterError(f"point ({g}, {line}) does not lie on the staircase")
    q = line - s.i
    first = Staircase(s.x, s.i, g, line, s.jumps[:q])
    second = Staircase(g, line, s.y, s.j, s.jumps[q:])
    return first, second


def concatenate_staircases(s1: Staircase, s2: Staircase) -> Staircase:
    if (s1.y, s1.j) != (s2.x, s2.i):
        raise ParameterError(f"end ({s1.y}, {s1.j}) differs from start ({s2.x}, {s2.i})")
    return Staircase(s1.x, s1.i, s2.y, s2.j, s1.jumps + s2.jumps)


def split_polymer(env: Environment, triple: CompatibleTriple, x: float, y: float, t: float,
                  tie_rule: str = LEFTMOST) -> tuple:
    """Split the polymer from (x, t1) to (y, t2) at (ρ(t), t)."""
    line = mesh_index(triple.n, t)
    if not triple.i < line < triple.j:
        raise ParameterError(f"split time {t} must lie strictly inside ({triple.t1}, {triple.t2})")
    z = polymer(env, triple, x, y, tie_rule)
    s = z.staircase
    n = triple.n
    xs = scaled_position(n, float(env.grid.position(s.x)), s.i)
    ys = scaled_position(n, float(env.grid.position(s.y)), s.j)
    ref = interpolant(xs, triple.t1, ys, triple.t2, line / n)
    lo, hi = staircase_interval(env, n, s, line)
    a, b = s.segment(line)
    g = a if farthest_point((lo, hi), ref) == lo and lo != hi else b
    first, second = split_staircase(s, line, g)
    return make_zigzag(env, n, first), make_zigzag(env, n, second)


def concatenate(z1: Zigzag, z2: Zigzag) -> Zigzag:
    if z1.triple.n != z2.triple.n:
        raise ParameterError("zigzags use different n")
    s = concatenate_staircases(z1.staircase, z2.staircase)
    n = z1.triple.n
    return Zigzag(CompatibleTriple(n, s.i / n, s.j / n), s, z1.weight + z2.weight)


def _check_dominated(a: tuple, b: tuple, name: str):
    if len(a) != len(b) or any(p > q for p, q in zip(a, b)):
        raise ParameterError(f"{name}: {a} is not componentwise below {b}")


def monotone_coupling_check(env: Environment, k: int, lower: tuple, upper: tuple, i: int, j: int,
                            tie_rule: str = LEFTMOST) -> tuple:
    """Compare the multi-geodesics for two componentwise ordered endpoint pairs.

    ``lower`` = (ū, x̄) and ``upper`` = (v̄, ȳ) are (start tuple, end tuple)
    pairs of grid indices with ū <= v̄ and x̄ <= ȳ.  Returns (holds, witness)
    where the witness is the first failing component and its OrderWitness.
    """
    (us, xs), (vs, ys) = lower, upper
    if not len(us) == len(xs) == len(vs) == len(ys) == k:
        raise ParameterError(f"endpoint tuples must have length {k}")
    _check_dominated(tuple(us), tuple(vs), "start tuples")
    _check_dominated(tuple(xs), tuple(ys), "end tuples")
    low = multi_geodesic(env, us, xs, i, j, tie_rule)
    high = multi_geodesic(env, vs, ys, i, j, tie_rule)
    for p in range(k):
        w = precedes_weak(low.paths[p], high.paths[p])
        if not w:
            return False, (p, w)
    return True, None


@dataclass(frozen=True)
class DiagonalBouquet:
    paths: tuple                    # Staircase per component
    separate: OrderWitness          # consecutive strict precedence
    diagonal_weight: float          # Σ_i Wgt(ρ_{i,i})
    multi_weight: float             # Wgt_{n,k}(x·1 -> ū)
    multi: MultiStaircase | None    # the tuple as a MultiStaircase when separate


def diagonal_bouquet(env: Environment, triple: CompatibleTriple, k: int, x: float, us,
                     tie_rule: str = LEFTMOST) -> DiagonalBouquet:
    """Component i of the k-watermelon multi-geodesic from x·1 to u_i·1, for each i."""
    n, i, j = triple.n, triple.i, triple.j
    gx = snap_point(env, n, x, triple.t1)[0]
    us = tuple(float(u) for u in np.broadcast_to(us, (k,)))
    gus = _snap_tuple(env, n, us, triple.t2)
    comps = []
    for p in range(k):
        ms = multi_geodesic(env, (gx,) * k, (gus[p],) * k, i, j, tie_rule)
        comps.append(ms.paths[p])
    witness = OrderWitness(STRICT, True)
    for p in range(k - 1):
        w = precedes_strict(comps[p], comps[p + 1])
        if not w:
            witness = w
            break
    diag = sum(make_zigzag(env, n, s).weight for s in comps)
    multi = _multi_weight_unscaled(env, n, (gx,) * k, i, gus, j)
    ms = MultiStaircase(tuple(comps)) if witness.holds else None
    return DiagonalBouquet(tuple(comps), witness, float(diag), float(multi), ms)


__all__ = [
    "OrderWitness", "precedes_strict", "precedes_weak", "staircase_meet", "staircase_join",
    "split_staircase", "concatenate_staircases", "split_polymer", "concatenate",
    "monotone_coupling_check", "DiagonalBouquet", "diagonal_bouquet",
]
