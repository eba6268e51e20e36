"""Scaled coordinates: the map R_n, zigzag and polymer weights, proper weights.

A scaled point (x, t) has unscaled preimage (n t + 2 n^{2/3} x, n t).  Weights
are computed from unscaled quantities, using the identity
2 n^{2/3} (y - x) = (Y - X) - (j - i) for snapped endpoints, so that no
rounding from the scaled coordinates enters the centering.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .environment import Environment
from .errors import DomainError, InfeasibleError, ParameterError
from .lpp import (LEFTMOST, RIGHTMOST, Staircase, geodesic, last_passage, multi_last_passage,
                  staircase_energy)

MESH_TOL = 1e-9
SQRT2 = float(np.sqrt(2.0))


def n13(n) -> float:
    return float(np.cbrt(n))


def n23(n) -> float:
    return float(np.cbrt(n)) ** 2


def mesh_index(n: int, t: float, what: str = "time") -> int:
    """n*t as an integer, or ParameterError when it is not one."""
    v = n * t
    r = round(v)
    if abs(v - r) > MESH_TOL * max(1.0, abs(v)):
        raise ParameterError(f"{what} {t} is not on the 1/{n} mesh (n*t = {v})")
    return int(r)


@dataclass(frozen=True)
class CompatibleTriple:
    n: int
    t1: float
    t2: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ParameterError(f"n must be an integer >= 1, got {self.n}")
        if not self.t1 < self.t2:
            raise ParameterError(f"need t1 < t2, got {self.t1}, {self.t2}")
        mesh_index(self.n, self.t1, "t1")
        mesh_index(self.n, self.t2, "t2")

    @property
    def i(self) -> int:
        return mesh_index(self.n, self.t1)

    @property
    def j(self) -> int:
        return mesh_index(self.n, self.t2)

    @property
    def t12(self) -> float:
        return self.t2 - self.t1

    @property
    def weight_scale(self) -> float:
        """2^{-1/2} n^{-1/3}, the factor converting energy to weight."""
        return 1.0 / (SQRT2 * n13(self.n))

    def line(self, t: float) -> int:
        return mesh_index(self.n, t)


@dataclass(frozen=True)
class ScaledPoint:
    x: float
    t: float


def scale_point(n: int, v: tuple) -> ScaledPoint:
    v1, v2 = v
    return ScaledPoint(0.5 * (v1 - v2) / n23(n), v2 / n)


def unscale_point(n: int, p) -> tuple:
    x, t = (p.x, p.t) if isinstance(p, ScaledPoint) else p
    return n * t + 2.0 * n23(n) * x, n * t


def scaled_position(n: int, grid_pos: float, line: int) -> float:
    """Scaled spatial coordinate of the unscaled point (grid_pos, line)."""
    return 0.5 * (grid_pos - line) / n23(n)


def snap_point(env: Environment, n: int, x: float, t: float) -> tuple:
    """Grid index, line and snapped scaled coordinate of the point (x, t)."""
    line = mesh_index(n, t)
    pos = line + 2.0 * n23(n) * x
    g = env.grid.snap(pos)
    return g, line, scaled_position(n, float(env.grid.position(g)), line)


def interpolant(x: float, t1: float, y: float, t2: float, t: float) -> float:
    """Value at time t of the segment from (x, t1) to (y, t2)."""
    if t == t1:
        return x
    if t == t2:
        return y
    return ((t2 - t) * x + (t - t1) * y) / (t2 - t1)


def energy_to_weight(n: int, energy: float, lines: int, displacement: float, k: int = 1) -> float:
    """Scaled weight of k paths spanning ``lines`` line gaps.

    ``displacement`` is the summed unscaled horizontal displacement Σ(Y_p - X_p);
    this equals 2^{-1/2}n^{-1/3}(E - 2k(j-i) - 2n^{2/3}Σ(y_p - x_p)).
    """
    return (energy - k * lines - displacement) / (SQRT2 * n13(n))


@dataclass(frozen=True)
class Zigzag:
    """A staircase viewed in scaled coordinates, with its weight."""

    triple: CompatibleTriple
    staircase: Staircase
    weight: float

    def start(self, env: Environment) -> float:
        s = self.staircase
        return scaled_position(self.triple.n, float(env.grid.position(s.x)), s.i)

    def end(self, env: Environment) -> float:
        s = self.staircase
        return scaled_position(self.triple.n, float(env.grid.position(s.y)), s.j)


def _staircase_weight(env: Environment, n: int, s: Staircase) -> float:
    disp = float(env.grid.position(s.y) - env.grid.position(s.x))
    return energy_to_weight(n, staircase_energy(env, s), s.j - s.i, disp)


def zigzag_weight(env: Environment, n: int, s: Staircase) -> float:
    return _staircase_weight(env, n, s)


def make_zigzag(env: Environment, n: int, s: Staircase) -> Zigzag:
    triple = CompatibleTriple(n, s.i / n, s.j / n)
    return Zigzag(triple, s, _staircase_weight(env, n, s))


def _feasible_pair(triple: CompatibleTriple, x: float, y: float):
    if y < x - 0.5 * n13(triple.n) * triple.t12 - 1e-12 * (1 + abs(x)):
        raise InfeasibleError(f"({y}, {triple.t2}) is not northeast of ({x}, {triple.t1}) "
                              f"in unscaled coordinates")


def _endpoints(env: Environment, triple: CompatibleTriple, x: float, y: float) -> tuple:
    _feasible_pair(triple, x, y)
    gx, i, _ = snap_point(env, triple.n, x, triple.t1)
    gy, j, _ = snap_point(env, triple.n, y, triple.t2)
    if gy < gx:
        raise InfeasibleError("snapped endpoints are not northeasterly ordered")
    return gx, i, gy, j


def polymer_weight(env: Environment, triple: CompatibleTriple, x: float, y: float) -> float:
    gx, i, gy, j = _endpoints(env, triple, x, y)
    m = last_passage(env, (gx, i), (gy, j))
    disp = float(env.grid.position(gy) - env.grid.position(gx))
    return energy_to_weight(triple.n, m, j - i, disp)


def polymer(env: Environment, triple: CompatibleTriple, x: float, y: float,
            tie_rule: str = LEFTMOST) -> Zigzag:
    gx, i, gy, j = _endpoints(env, triple, x, y)
    s = geodesic(env, (gx, i), (gy, j), tie_rule)
    return Zigzag(triple, s, _staircase_weight(env, triple.n, s))


def _as_tuple(v, k: int) -> tuple:
    if np.ndim(v) == 0:
        return (float(v),) * k
    v = tuple(float(a) for a in v)
    if len(v) != k:
        raise ParameterError(f"expected {k} coordinates, got {len(v)}")
    return v


def _snap_tuple(env: Environment, n: int, xs: tuple, t: float) -> tuple:
    gs = tuple(snap_point(env, n, x, t)[0] for x in xs)
    if any(gs[p] > gs[p + 1] for p in range(len(gs) - 1)):
        raise ParameterError(f"coordinates {xs} are not nondecreasing")
    return gs


def _multi_weight_unscaled(env: Environment, n: int, gxs: tuple, i: int, gys: tuple, j: int) -> float:
    k = len(gxs)
    m = multi_last_passage(env, gxs, gys, i, j)
    disp = float(np.sum(env.grid.position(np.array(gys)) - env.grid.position(np.array(gxs))))
    return energy_to_weight(n, m, j - i, disp, k)


def multi_polymer_weight(env: Environment, triple: CompatibleTriple, k: int,
                         xs, ys) -> float:
    """Weight of the best k ordered separate zigzags; scalars mean k equal coordinates."""
    xs, ys = _as_tuple(xs, k), _as_tuple(ys, k)
    for a, b in zip(xs, ys):
        _feasible_pair(triple, a, b)
    gxs = _snap_tuple(env, triple.n, xs, triple.t1)
    gys = _snap_tuple(env, triple.n, ys, triple.t2)
    return _multi_weight_unscaled(env, triple.n, gxs, triple.i, gys, triple.j)


def _check_proper(triple: CompatibleTriple):
    if triple.j - triple.i < 2:
        raise InfeasibleError("proper weights need n*t12 >= 2")


def proper_multi_weight_forward(env: Environment, triple: CompatibleTriple, k: int,
                                x: float, us) -> float:
    """Best k-path weight from x·1 at t1 to ū at t2, each path arriving on a sloping segment.

    Evaluated as the k-path weight from (x, t1) to (ū + 2^{-1}n^{-2/3}, t2 - 1/n).
    """
    _check_proper(triple)
    us = _as_tuple(us, k)
    gx = snap_point(env, triple.n, x, triple.t1)[0]
    gus = _snap_tuple(env, triple.n, us, triple.t2)
    return _multi_weight_unscaled(env, triple.n, (gx,) * k, triple.i, gus, triple.j - 1)


def proper_multi_weight_backward(env: Environment, triple: CompatibleTriple, k: int,
                                 vs, y: float) -> float:
    """Mirror of the forward proper weight: each path leaves v̄ on a sloping segment.

    Evaluated as the k-path weight from (v̄ - 2^{-1}n^{-2/3}, t1 + 1/n) to (y, t2).
    """
    _check_proper(triple)
    vs = _as_tuple(vs, k)
    gy = snap_point(env, triple.n, y, triple.t2)[0]
    gvs = _snap_tuple(env, triple.n, vs, triple.t1)
    return _multi_weight_unscaled(env, triple.n, gvs, triple.i + 1, (gy,) * k, triple.j)


def staircase_interval(env: Environment, n: int, s: Staircase, line: int) -> tuple:
    """Scaled horizontal interval occupied by ``s`` on ``line``."""
    a, b = s.segment(line)
    pa, pb = env.grid.position(a), env.grid.position(b)
    return scaled_position(n, float(pa), line), scaled_position(n, float(pb), line)


def farthest_point(interval: tuple, ref: float) -> float:
    """Endpoint of ``interval`` farthest from ``ref``; ties go to the right end."""
    lo, hi = interval
    return lo if ref - lo > hi - ref else hi


def staircase_at_time(env: Environment, triple: CompatibleTriple, s: Staircase, t: float) -> float:
    """ρ(t) for the zigzag of ``s``: farthest point of its slice from the interpolant."""
    n = triple.n
    line = mesh_index(n, t)
    if not s.i <= line <= s.j:
        raise DomainError(f"time {t} outside the path's lifetime")
    x = scaled_position(n, float(env.grid.position(s.x)), s.i)
    y = scaled_position(n, float(env.grid.position(s.y)), s.j)
    ref = interpolant(x, s.i / n, y, s.j / n, line / n)
    return farthest_point(staircase_interval(env, n, s, line), ref)


def polymer_at_time(env: Environment, triple: CompatibleTriple, x: float, y: float, t: float,
                    tie_rule: str = LEFTMOST) -> float:
    if not triple.t1 - MESH_TOL <= t <= triple.t2 + MESH_TOL:
        raise ParameterError(f"time {t} outside [{triple.t1}, {triple.t2}]")
    mesh_index(triple.n, t)
    z = polymer(env, triple, x, y, tie_rule)
    return staircase_at_time(env, triple, z.staircase, t)


__all__ = [
    "CompatibleTriple", "ScaledPoint", "Zigzag", "LEFTMOST", "RIGHTMOST",
    "scale_point", "unscale_point", "snap_point", "scaled_position", "mesh_index",
    "interpolant", "energy_to_weight", "zigzag_weight", "make_zigzag",
    "polymer_weight", "polymer", "multi_polymer_weight",
    "proper_multi_weight_forward", "proper_multi_weight_backward",
    "staircase_interval", "farthest_point", "staircase_at_time", "polymer_at_time",
]
