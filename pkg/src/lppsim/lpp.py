"""Unscaled last passage percolation on a grid environment.

Positions are grid indices of ``env.grid``.  A staircase from (x, i) to
(y, j) occupies the interval [z_m, z_{m+1}] on line m, with z_i = x and
z_{j+1} = y, and collects B(m, z_{m+1}) - B(m, z_m) there.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _kernels
from .environment import Environment
from .errors import DomainError, InfeasibleError, ParameterError, SizeError, ValidationError

LEFTMOST = "leftmost"
RIGHTMOST = "rightmost"
TIE_RULES = (LEFTMOST, RIGHTMOST)

# Relative slack under which two DP candidates count as tied during
# backtracking.  Only float summation noise should fall inside it.
TIE_RTOL = 1e-11


@dataclass(frozen=True)
class Staircase:
    x: int
    i: int
    y: int
    j: int
    jumps: tuple = ()

    def __post_init__(self):
        jumps = tuple(int(z) for z in self.jumps)
        object.__setattr__(self, "jumps", jumps)
        if self.j < self.i:
            raise ValidationError(f"staircase ends on line {self.j} below start line {self.i}")
        if len(jumps) != self.j - self.i:
            raise ValidationError(f"expected {self.j - self.i} jumps, got {len(jumps)}")
        pos = self.positions
        if any(pos[q] > pos[q + 1] for q in range(len(pos) - 1)):
            raise ValidationError(f"jump positions not nondecreasing: {pos}")

    @property
    def positions(self) -> tuple:
        """(z_i, z_{i+1}, ..., z_{j+1}) = (x, jumps..., y)."""
        return (self.x, *self.jumps, self.y)

    @property
    def lines(self) -> range:
        return range(self.i, self.j + 1)

    def segment(self, line: int) -> tuple:
        """Grid interval [a, b] occupied on ``line``."""
        if not self.i <= line <= self.j:
            raise DomainError(f"line {line} outside [{self.i}, {self.j}]")
        pos = self.positions
        return pos[line - self.i], pos[line - self.i + 1]

    def segments(self) -> np.ndarray:
        """Array of shape (lines, 2) with the interval on each line."""
        pos = np.array(self.positions)
        return np.stack([pos[:-1], pos[1:]], axis=1)


def horizontally_separate(s1: Staircase, s2: Staircase) -> bool:
    """No positive-length horizontal interval shared, on any common line."""
    lo, hi = max(s1.i, s2.i), min(s1.j, s2.j)
    for m in range(lo, hi + 1):
        a1, b1 = s1.segment(m)
        a2, b2 = s2.segment(m)
        if min(b1, b2) > max(a1, a2):
            return False
    return True


@dataclass(frozen=True)
class MultiStaircase:
    """Ordered k-tuple of pairwise horizontally separate staircases.

    Path p+1 lies to the right of path p on every line: the right end of
    path p's interval is at most the left end of path p+1's interval.
    """

    paths: tuple

    def __post_init__(self):
        paths = tuple(self.paths)
        object.__setattr__(self, "paths", paths)
        if not paths:
            raise ValidationError("a multi-staircase needs at least one path")
        i, j = paths[0].i, paths[0].j
        if any(p.i != i or p.j != j for p in paths):
            raise ValidationError("all paths must share the same line range")
        for p in range(len(paths) - 1):
            left, right = paths[p].positions, paths[p + 1].positions
            for q in range(j - i + 1):
                if left[q + 1] > right[q]:
                    raise ValidationError(
                        f"paths {p} and {p + 1} are not separate on line {i + q}")

    @property
    def k(self) -> int:
        return len(self.paths)

    @property
    def starts(self) -> tuple:
        return tuple(p.x for p in self.paths)

    @property
    def ends(self) -> tuple:
        return tuple(p.y for p in self.paths)


def _check_lines(env: Environment, i: int, j: int):
    if j < i:
        raise InfeasibleError(f"end line {j} is below start line {i}")
    if not (env.has_line(i) and env.has_line(j)):
        raise DomainError(f"lines {i}..{j} outside environment range "
                          f"[{env.line_min}, {env.line_max}]")


def _check_index(env: Environment, g: int):
    if not 0 <= g <= env.grid.num_cells:
        raise DomainError(f"grid index {g} outside [0, {env.grid.num_cells}]")


def staircase_energy(env: Environment, s: Staircase) -> float:
    _check_lines(env, s.i, s.j)
    pos = s.positions
    for g in (pos[0], pos[-1]):
        _check_index(env, g)
    rows = env.rows(s.i, s.j)
    seg = s.segments()
    r = np.arange(rows.shape[0])
    return float(np.sum(rows[r, seg[:, 1]] - rows[r, seg[:, 0]]))


def _tie_mask(vals: np.ndarray):
    best = np.max(vals)
    if not np.isfinite(best):
        return best, None
    return best, vals >= best - TIE_RTOL * (1.0 + abs(best))


# ---------------------------------------------------------------------------
# single path


def _sweep(rows: np.ndarray, starts: np.ndarray, keep: bool = False):
    """Forward line sweep from several starting cells on the first row.

    ``rows`` holds B on the lines i..j restricted to a window of cells.
    Returns the (S, N) table of maximal energies from each start to every
    cell of the last row, and optionally the per-line inputs needed for
    backtracking (the table entering each line).
    """
    lines, ncell = rows.shape
    f = np.full((len(starts), ncell), -np.inf)
    f[np.arange(len(starts)), starts] = 0.0
    before = [] if keep else None
    for r in range(lines):
        if keep:
            before.append(f)
        b = rows[r]
        f = np.maximum.accumulate(f - b, axis=1) + b
    return f, before


def last_passage_table(env: Environment, starts: Sequence[int], i: int, j: int) -> np.ndarray:
    """M¹ from (s, i) to (g, j) for each start s and every grid index g.

    Entries with g < s are -inf.
    """
    _check_lines(env, i, j)
    starts = np.asarray(starts, dtype=np.int64)
    for s in starts:
        _check_index(env, int(s))
    lo = int(starts.min())
    f, _ = _sweep(env.rows(i, j)[:, lo:], starts - lo)
    out = np.full((len(starts), env.grid.num_points), -np.inf)
    out[:, lo:] = f
    return out


def last_passage(env: Environment, start: tuple, end: tuple) -> float:
    (x, i), (y, j) = start, end
    _check_lines(env, i, j)
    _check_index(env, x)
    _check_index(env, y)
    if y < x:
        raise InfeasibleError(f"end index {y} lies left of start index {x}")
    f, _ = _sweep(env.rows(i, j)[:, x:y + 1], np.array([0]))
    return float(f[0, -1])


def _pick(cands: np.ndarray, tie_rule: str) -> int:
    best, mask = _tie_mask(cands)
    idx = np.flatnonzero(mask)
    return int(idx[0] if tie_rule == LEFTMOST else idx[-1])


def _backtrack_single(rows: np.ndarray, before: list, end: int, tie_rule: str) -> list:
    """Jump positions (window indices) z_{i+1..j} ending at ``end``."""
    jumps = []
    b = end
    for r in range(rows.shape[0] - 1, 0, -1):
        cand = before[r][0, :b + 1] - rows[r, :b + 1]
        b = _pick(cand, tie_rule)
        jumps.append(b)
    return jumps[::-1]


def _check_tie_rule(tie_rule: str):
    if tie_rule not in TIE_RULES:
        raise ParameterError(f"tie_rule must be one of {TIE_RULES}, got {tie_rule!r}")


def geodesic(env: Environment, start: tuple, end: tuple, tie_rule: str = LEFTMOST) -> Staircase:
    _check_tie_rule(tie_rule)
    (x, i), (y, j) = start, end
    _check_lines(env, i, j)
    _check_index(env, x)
    _check_index(env, y)
    if y < x:
        raise InfeasibleError(f"end index {y} lies left of start index {x}")
    rows = env.rows(i, j)[:, x:y + 1]
    _, before = _sweep(rows, np.array([0]), keep=True)
    jumps = _backtrack_single(rows, before, y - x, tie_rule)
    return Staircase(x, i, y, j, tuple(z + x for z in jumps))


def geodesics_from(env: Environment, start: tuple, ends: Sequence[int], j: int,
                   tie_rule: str = LEFTMOST) -> list:
    """Geodesics from one start to several ends on line j, sharing one sweep."""
    _check_tie_rule(tie_rule)
    x, i = start
    _check_lines(env, i, j)
    ends = [int(e) for e in ends]
    for g in (x, *ends):
        _check_index(env, g)
    if min(ends) < x:
        raise InfeasibleError("an end index lies left of the start index")
    hi = max(ends)
    rows = env.rows(i, j)[:, x:hi + 1]
    _, before = _sweep(rows, np.array([0]), keep=True)
    return [Staircase(x, i, e, j, tuple(z + x for z in _backtrack_single(rows, before, e - x, tie_rule)))
            for e in ends]


# ---------------------------------------------------------------------------
# k paths


def _check_tuple(env: Environment, t: Sequence[int], name: str) -> tuple:
    t = tuple(int(v) for v in t)
    if not t:
        raise ParameterError(f"{name} must be nonempty")
    if any(t[p] > t[p + 1] for p in range(len(t) - 1)):
        raise ValidationError(f"{name} must be nondecreasing, got {t}")
    for g in t:
        _check_index(env, g)
    return t


def _order_masks(k: int, n: int) -> list:
    """mask[p] marks tuples with index_p < index_{p-1} (p >= 1)."""
    masks = [None]
    for p in range(1, k):
        shape_prev = [1] * k
        shape_prev[p - 1] = n
        shape_cur = [1] * k
        shape_cur[p] = n
        m = np.arange(n).reshape(shape_cur) < np.arange(n).reshape(shape_prev)
        masks.append(np.broadcast_to(m, (n,) * k))
    return masks


def _axis_view(b: np.ndarray, k: int, p: int) -> np.ndarray:
    shape = [1] * k
    shape[p] = b.shape[0]
    return b.reshape(shape)


def _multi_step(f: np.ndarray, b: np.ndarray, masks: list) -> np.ndarray:
    """One line of the k-path recursion.

    ``f`` is indexed by the entry positions a_1..a_k on this line (the exit
    positions of the previous line); the result is indexed by the exit
    positions b_1..b_k.  Constraints: a_p <= b_p and b_{p-1} <= a_p.
    """
    k = f.ndim
    g = f.copy()
    for p in range(k):
        g -= _axis_view(b, k, p)
    for p in range(k):
        if p > 0:
            np.putmask(g, masks[p], -np.inf)
        g = np.maximum.accumulate(g, axis=p)
    for p in range(k):
        g += _axis_view(b, k, p)
    return g


def _multi_sweep(rows: np.ndarray, starts: tuple, keep: bool = False, compiled: bool = True):
    lines, ncell = rows.shape
    k = len(starts)
    fast = compiled and k == 2 and _kernels.step_two is not None
    masks = None if fast else _order_masks(k, ncell)
    f = np.full((ncell,) * k, -np.inf)
    f[starts] = 0.0
    run = np.empty(ncell)
    before = [] if keep else None
    for r in range(lines):
        if keep:
            before.append(f)
        if fast:
            f = _kernels.step_two(f, np.ascontiguousarray(rows[r]), np.empty_like(f), run)
        else:
            f = _multi_step(f, rows[r], masks)
    return f, before


def _window(x: tuple, y: tuple) -> tuple:
    if any(b < a for a, b in zip(x, y)):
        raise InfeasibleError(f"an end of {y} lies left of its start in {x}")
    return min(x), max(y)


def multi_last_passage(env: Environment, xs: Sequence[int], ys: Sequence[int],
                       i: int, j: int) -> float:
    """Mᵏ: maximal total energy of k ordered separate paths x_p -> y_p."""
    _check_lines(env, i, j)
    xs = _check_tuple(env, xs, "start tuple")
    ys = _check_tuple(env, ys, "end tuple")
    if len(xs) != len(ys):
        raise ParameterError("start and end tuples differ in length")
    if len(xs) == 1:
        if ys[0] < xs[0]:
            raise InfeasibleError("end lies left of start")
        return last_passage(env, (xs[0], i), (ys[0], j))
    lo, hi = _window(xs, ys)
    rows = env.rows(i, j)[:, lo:hi + 1]
    f, _ = _multi_sweep(rows, tuple(v - lo for v in xs))
    val = f[tuple(v - lo for v in ys)]
    if not np.isfinite(val):
        raise InfeasibleError(f"no separate {len(xs)}-path system from {xs} to {ys} "
                              f"on lines {i}..{j}")
    return float(val)


def multi_last_passage_from(env: Environment, xs: Sequence[int], i: int, j: int, hi: int) -> tuple:
    """Mᵏ from the start tuple to every end tuple with entries in [min(xs), hi].

    Returns (lo, table) where ``table[y_1 - lo, ..., y_k - lo]`` is the value
    (−inf where infeasible).
    """
    _check_lines(env, i, j)
    xs = _check_tuple(env, xs, "start tuple")
    _check_index(env, hi)
    lo = xs[0]
    if hi < xs[-1]:
        raise InfeasibleError("window ends left of a start")
    rows = env.rows(i, j)[:, lo:hi + 1]
    if len(xs) == 1:
        f, _ = _sweep(rows, np.array([0]))
        return lo, f[0]
    f, _ = _multi_sweep(rows, tuple(v - lo for v in xs))
    return lo, f


def _watermelon_rows(rows: np.ndarray, k: int) -> np.ndarray:
    """Mᵏ from the first cell of ``rows`` (k times) to each cell (k times)."""
    if k == 1:
        f, _ = _sweep(rows, np.array([0]))
        return f[0]
    f, _ = _multi_sweep(rows, (0,) * k)
    d = np.arange(rows.shape[1])
    return f[(d,) * k]


def watermelon_table(env: Environment, x: int, k: int, i: int, j: int, hi: int | None = None) -> np.ndarray:
    """Mᵏ(x·1 -> y·1) for every grid index y (−inf where infeasible).

    Only indices up to ``hi`` (default: the whole grid) are evaluated.
    """
    _check_lines(env, i, j)
    _check_index(env, x)
    hi = env.grid.num_cells if hi is None else int(hi)
    _check_index(env, hi)
    out = np.full(env.grid.num_points, -np.inf)
    if hi >= x:
        out[x:hi + 1] = _watermelon_rows(env.rows(i, j)[:, x:hi + 1], k)
    return out


def watermelon_table_backward(env: Environment, y: int, k: int, i: int, j: int,
                              lo: int | None = None) -> np.ndarray:
    """Mᵏ(x·1 -> y·1) for every grid index x in [lo, y], via the half-turn reflection."""
    _check_lines(env, i, j)
    _check_index(env, y)
    lo = 0 if lo is None else int(lo)
    _check_index(env, lo)
    out = np.full(env.grid.num_points, -np.inf)
    if y >= lo:
        rows = -env.rows(i, j)[::-1, y:lo - 1 if lo > 0 else None:-1]
        out[lo:y + 1] = _watermelon_rows(rows, k)[::-1]
    return out


def _backtrack_multi(rows: np.ndarray, before: list, end: tuple, tie_rule: str) -> list:
    k = len(end)
    b = end
    jumps = []
    for r in range(rows.shape[0] - 1, 0, -1):
        lo = [0] + list(b[:-1])
        box = tuple(slice(lo[p], b[p] + 1) for p in range(k))
        g = before[r][box].copy()
        for p in range(k):
            g -= _axis_view(rows[r, lo[p]:b[p] + 1], k, p)
        _, mask = _tie_mask(g)
        idx = np.argwhere(mask)
        pick = idx[0] if tie_rule == LEFTMOST else idx[-1]
        b = tuple(int(pick[p]) + lo[p] for p in range(k))
        jumps.append(b)
    return jumps[::-1]


def multi_geodesic(env: Environment, xs: Sequence[int], ys: Sequence[int], i: int, j: int,
                   tie_rule: str = LEFTMOST) -> MultiStaircase:
    _check_tie_rule(tie_rule)
    _check_lines(env, i, j)
    xs = _check_tuple(env, xs, "start tuple")
    ys = _check_tuple(env, ys, "end tuple")
    if len(xs) != len(ys):
        raise ParameterError("start and end tuples differ in length")
    k = len(xs)
    if k == 1:
        return MultiStaircase((geodesic(env, (xs[0], i), (ys[0], j), tie_rule),))
    lo, hi = _window(xs, ys)
    rows = env.rows(i, j)[:, lo:hi + 1]
    f, before = _multi_sweep(rows, tuple(v - lo for v in xs), keep=True)
    if not np.isfinite(f[tuple(v - lo for v in ys)]):
        raise InfeasibleError(f"no separate {k}-path system from {xs} to {ys} on lines {i}..{j}")
    steps = _backtrack_multi(rows, before, tuple(v - lo for v in ys), tie_rule)
    paths = tuple(Staircase(xs[p], i, ys[p], j, tuple(s[p] + lo for s in steps)) for p in range(k))
    return MultiStaircase(paths)


def multi_energy(env: Environment, ms: MultiStaircase) -> float:
    return float(sum(staircase_energy(env, p) for p in ms.paths))


# ---------------------------------------------------------------------------
# exhaustive oracle

BRUTE_MAX_LINES = 3
BRUTE_MAX_CELLS = 8
BRUTE_MAX_K = 3


def _enumerate_paths(rows: np.ndarray, x: int, y: int):
    lines = rows.shape[0]
    combos = list(itertools.combinations_with_replacement(range(x, y + 1), lines - 1))
    pos = np.array([(x, *c, y) for c in combos], dtype=np.int64).reshape(len(combos), lines + 1)
    a, b = pos[:, :-1], pos[:, 1:]
    r = np.arange(lines)
    energy = np.sum(rows[r, b] - rows[r, a], axis=1)
    return a, b, energy


def _separate(a1, b1, a2, b2) -> np.ndarray:
    over = np.minimum(b1[:, None, :], b2[None, :, :]) - np.maximum(a1[:, None, :], a2[None, :, :])
    return np.all(over <= 0, axis=2)


def brute_force_multi(env: Environment, xs: Sequence[int], ys: Sequence[int], i: int, j: int) -> float:
    """Maximum total energy by exhaustive enumeration.

    Every path is enumerated independently and a k-tuple is admissible when
    its paths are pairwise horizontally separate; no left-to-right ordering
    is imposed, so agreement with the DP also checks that ordering loses
    nothing.
    """
    _check_lines(env, i, j)
    xs = _check_tuple(env, xs, "start tuple")
    ys = _check_tuple(env, ys, "end tuple")
    k = len(xs)
    if len(ys) != k:
        raise ParameterError("start and end tuples differ in length")
    if j - i > BRUTE_MAX_LINES or k > BRUTE_MAX_K or max(ys) - min(xs) > BRUTE_MAX_CELLS:
        raise SizeError(f"exhaustive search limited to j-i <= {BRUTE_MAX_LINES}, "
                        f"k <= {BRUTE_MAX_K}, window <= {BRUTE_MAX_CELLS} cells")
    if any(ys[p] < xs[p] for p in range(k)):
        raise InfeasibleError("an end lies left of its start")
    rows = env.rows(i, j)
    paths = [_enumerate_paths(rows, xs[p], ys[p]) for p in range(k)]
    if k == 1:
        return float(paths[0][2].max())
    sep = {(p, q): _separate(paths[p][0], paths[p][1], paths[q][0], paths[q][1])
           for p in range(k) for q in range(p + 1, k)}
    e = [pp[2] for pp in paths]
    if k == 2:
        tot = np.where(sep[0, 1], e[0][:, None] + e[1][None, :], -np.inf)
    else:
        ok = sep[0, 1][:, :, None] & sep[0, 2][:, None, :] & sep[1, 2][None, :, :]
        tot = np.where(ok, e[0][:, None, None] + e[1][None, :, None] + e[2][None, None, :], -np.inf)
    best = tot.max()
    if not np.isfinite(best):
        raise InfeasibleError(f"no separate {k}-path system from {xs} to {ys}")
    return float(best)
