"""Indicators of the named polymer events on a sampled environment.

Intervals are pairs (lo, hi) of scaled coordinates; a bare number is a
point.  Intervals are discretized by ``endpoint_grid`` equally spaced points
(ends included), each snapped to the environment grid.
"""
from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import asdict, dataclass, field, fields
from typing import Iterable, Sequence

import numpy as np

from .environment import Environment, GridSpec, generate_environment
from .errors import InfeasibleError, ParameterError
from .ensembles import forward_ensemble
from .geometry import precedes_strict
from .lpp import (LEFTMOST, RIGHTMOST, geodesic, geodesics_from, last_passage_table,
                  multi_geodesic, multi_last_passage_from)
from .scaled import (CompatibleTriple, SQRT2, energy_to_weight, interpolant, make_zigzag,
                     mesh_index, multi_polymer_weight, n13, n23, polymer_weight,
                     proper_multi_weight_backward, proper_multi_weight_forward,
                     scaled_position, snap_point, staircase_at_time)

DEFAULT_ENDPOINT_GRID = 5
DEFAULT_TOL = 1e-9
CSV_VERSION = "lppsim-events-csv 1"

MAX_DISJOINT = "MaxDisjtPoly"
NEAR_POLY = "NearPoly"
POLY_DEV_REG = "PolyDevReg"
POLY_WGT_REG = "PolyWgtReg"
LOC_WGT_REG = "LocWgtReg"
FOR_BOUQ_REG = "ForBouqReg"
BACK_BOUQ_REG = "BackBouqReg"
FAV_SUR_CON = "FavSurCon"
FLUC = "Fluc"
EVENT_NAMES = (MAX_DISJOINT, NEAR_POLY, POLY_DEV_REG, POLY_WGT_REG, LOC_WGT_REG,
               FOR_BOUQ_REG, BACK_BOUQ_REG, FAV_SUR_CON, FLUC)


# ---------------------------------------------------------------------------
# interval helpers


def as_interval(v) -> tuple:
    if v is None:
        raise ParameterError("missing interval")
    if np.ndim(v) == 0:
        return float(v), float(v)
    lo, hi = (float(a) for a in v)
    if hi < lo:
        raise ParameterError(f"interval ({lo}, {hi}) has negative length")
    return lo, hi


def interval_indices(env: Environment, n: int, interval, t: float,
                     endpoint_grid: int = DEFAULT_ENDPOINT_GRID) -> np.ndarray:
    """Sorted distinct grid indices discretizing ``interval`` at time t."""
    lo, hi = as_interval(interval)
    if endpoint_grid < 1:
        raise ParameterError("endpoint_grid must be >= 1")
    pts = [lo] if lo == hi or endpoint_grid == 1 else np.linspace(lo, hi, endpoint_grid)
    g = np.unique([snap_point(env, n, p, t)[0] for p in pts])
    if g.size == 0:
        raise ParameterError("empty discretized interval")
    return g


def _scaled(env: Environment, n: int, g, line: int):
    return 0.5 * (env.grid.position(g) - line) / n23(n)


@dataclass(frozen=True)
class IntervalSet:
    """Finite union of intervals; each piece is (lo, hi, lo_closed, hi_closed).

    An infinite end admits the matching infinity, so that the unbounded
    deviations reported at endpoint times fall in the outer pieces.
    """

    pieces: tuple = ()

    @classmethod
    def real_line(cls) -> "IntervalSet":
        return cls(((-math.inf, math.inf, False, False),))

    @classmethod
    def empty(cls) -> "IntervalSet":
        return cls(())

    @classmethod
    def outside(cls, r: float, closed: bool = False) -> "IntervalSet":
        """(-inf, -r) ∪ (r, inf), or the closed variant."""
        return cls(((-math.inf, -r, False, closed), (r, math.inf, closed, False)))

    def contains(self, v: float) -> bool:
        for lo, hi, lc, hc in self.pieces:
            above = v >= lo if lc or lo == -math.inf else v > lo
            below = v <= hi if hc or hi == math.inf else v < hi
            if above and below:
                return True
        return False


# ---------------------------------------------------------------------------
# disjoint polymers


def _certificates(env: Environment, triple: CompatibleTriple, gi: np.ndarray, gj: np.ndarray,
                  k: int, tol: float) -> Iterable[tuple]:
    """Yield certified (ū, v̄) in lexicographic order."""
    i, j = triple.i, triple.j
    hi = int(gj[-1])
    m1 = last_passage_table(env, gi, i, j)
    row = {int(g): r for r, g in enumerate(gi)}
    for us in itertools.combinations_with_replacement(gi.tolist(), k):
        if us[-1] > hi:
            continue
        lo, table = multi_last_passage_from(env, us, i, j, hi)
        for vs in itertools.combinations_with_replacement(gj.tolist(), k):
            if any(v < u for u, v in zip(us, vs)):
                continue
            val = table[tuple(v - lo for v in vs)]
            if not np.isfinite(val):
                continue
            single = sum(m1[row[u], v] for u, v in zip(us, vs))
            if val >= single - tol * (1.0 + abs(val)):
                yield us, vs


def disjoint_certificate(env: Environment, triple: CompatibleTriple, I, J, k: int,
                         endpoint_grid: int = DEFAULT_ENDPOINT_GRID, tol: float = DEFAULT_TOL):
    """Lexicographically minimal grid tuples (ū, v̄) whose k-path maximum splits into geodesics.

    ``tol`` is relative: the certificate is Mᵏ >= Σ M¹ - tol (1 + |Mᵏ|).
    Returns None when no tuple is certified.
    """
    gi = interval_indices(env, triple.n, I, triple.t1, endpoint_grid)
    gj = interval_indices(env, triple.n, J, triple.t2, endpoint_grid)
    return next(iter(_certificates(env, triple, gi, gj, k, tol)), None)


def max_disjoint(env: Environment, triple: CompatibleTriple, I, J, k_max: int,
                 endpoint_grid: int = DEFAULT_ENDPOINT_GRID, tol: float = DEFAULT_TOL,
                 method: str = "certificate") -> int:
    """Largest k <= k_max with k separate polymers between I at t1 and J at t2.

    ``method="certificate"`` searches all grid tuples.  ``method="extremal"``
    (k_max = 2 only) tests whether the leftmost polymer between the left
    corners strictly precedes the rightmost polymer between the right
    corners; by monotonicity and the sandwich property this is equivalent,
    and it costs two single-path sweeps.
    """
    if int(k_max) != k_max or k_max < 1:
        raise ParameterError("k_max must be a positive integer")
    gi = interval_indices(env, triple.n, I, triple.t1, endpoint_grid)
    gj = interval_indices(env, triple.n, J, triple.t2, endpoint_grid)
    if gj[-1] < gi[0]:
        raise InfeasibleError("no polymer joins the two intervals")
    if k_max == 1:
        return 1
    if method == "extremal":
        if k_max != 2:
            raise ParameterError("the extremal method handles k_max = 2 only")
        if gj[0] < gi[0] or gj[-1] < gi[-1]:
            raise InfeasibleError("corner polymers are not northeasterly")
        left = geodesic(env, (int(gi[0]), triple.i), (int(gj[0]), triple.j), LEFTMOST)
        right = geodesic(env, (int(gi[-1]), triple.i), (int(gj[-1]), triple.j), RIGHTMOST)
        return 2 if precedes_strict(left, right).holds else 1
    if method != "certificate":
        raise ParameterError(f"unknown method {method!r}")
    best = 1
    for k in range(2, k_max + 1):
        if next(iter(_certificates(env, triple, gi, gj, k, tol)), None) is None:
            break
        best = k
    return best


# ---------------------------------------------------------------------------
# NearPoly


def near_poly_gap(env: Environment, triple: CompatibleTriple, k: int, x: float, y: float) -> float:
    """t12^{-1/3}(k Wgt - Wgt_k) for the watermelon x·1 -> y·1; NearPoly is gap <= η."""
    w1 = polymer_weight(env, triple, x, y)
    wk = multi_polymer_weight(env, triple, k, x, y)
    return (k * w1 - wk) / triple.t12 ** (1.0 / 3.0)


def near_poly(env: Environment, triple: CompatibleTriple, k: int, x: float, y: float,
              eta: float) -> bool:
    w1 = polymer_weight(env, triple, x, y)
    wk = multi_polymer_weight(env, triple, k, x, y)
    return bool(wk >= k * w1 - triple.t12 ** (1.0 / 3.0) * eta)


# ---------------------------------------------------------------------------
# deviation events


def _dev_scale(triple: CompatibleTriple, t: float) -> float:
    return min(t - triple.t1, triple.t2 - t) ** (2.0 / 3.0)


def normalized_deviations(env: Environment, triple: CompatibleTriple, x, y, times: Sequence[float],
                          endpoint_grid: int = DEFAULT_ENDPOINT_GRID,
                          tie_rules=(LEFTMOST, RIGHTMOST)) -> np.ndarray:
    """X = ((t-t1)∧(t2-t))^{-2/3}(ρ(t) - ℓ(t)) over evaluated polymers and times.

    Every grid endpoint pair in I × J and every tie rule contributes one
    polymer.  At an endpoint time the scale vanishes and X is 0 or ±inf.
    """
    n, i, j = triple.n, triple.i, triple.j
    lines = [mesh_index(n, t) for t in times]
    for line, t in zip(lines, times):
        if not i <= line <= j:
            raise ParameterError(f"time {t} outside [{triple.t1}, {triple.t2}]")
    gi = interval_indices(env, n, x, triple.t1, endpoint_grid)
    gj = interval_indices(env, n, y, triple.t2, endpoint_grid)
    out = []
    for g in gi:
        ends = [int(e) for e in gj if e >= g]
        if len(ends) < len(gj):
            raise InfeasibleError("an endpoint pair is not northeasterly")
        for rule in tie_rules:
            for s in geodesics_from(env, (int(g), i), ends, j, rule):
                for line in lines:
                    t = line / n
                    dev = staircase_at_time(env, triple, s, t) - interpolant(
                        _scaled(env, n, s.x, i), triple.t1, _scaled(env, n, s.y, j), triple.t2, t)
                    scale = _dev_scale(triple, t)
                    if scale > 0:
                        out.append(dev / scale)
                    else:
                        out.append(0.0 if dev == 0 else math.copysign(math.inf, dev))
    return np.array(out)


def _time_of(triple: CompatibleTriple, a: float) -> float:
    if not 0 <= a <= 1:
        raise ParameterError(f"a must lie in [0, 1], got {a}")
    t = (1 - a) * triple.t1 + a * triple.t2
    mesh_index(triple.n, t, "deviation time")
    return t


def poly_dev_reg(env: Environment, triple: CompatibleTriple, x, y, a: float, r: float,
                 endpoint_grid: int = DEFAULT_ENDPOINT_GRID) -> bool:
    """|ρ(t) - ℓ(t)| <= r t12^{2/3}(a∧(1-a))^{2/3} at t = (1-a)t1 + a t2, for every evaluated polymer."""
    t = _time_of(triple, a)
    xs = normalized_deviations(env, triple, x, y, [t], endpoint_grid)
    return bool(np.all(np.abs(xs) <= r))


def poly_dev_reg_times(env: Environment, triple: CompatibleTriple, x, y, times: Sequence[float],
                       r: float, endpoint_grid: int = DEFAULT_ENDPOINT_GRID) -> bool:
    """Deviation bound r((t-t1)∧(t2-t))^{2/3} at each listed time."""
    xs = normalized_deviations(env, triple, x, y, times, endpoint_grid)
    return bool(np.all(np.abs(xs) <= r))


def fluc(env: Environment, triple: CompatibleTriple, x, y, a: float, K: IntervalSet,
         endpoint_grid: int = DEFAULT_ENDPOINT_GRID) -> bool:
    """Some evaluated polymer has normalized deviation X in K."""
    t = _time_of(triple, a)
    if not isinstance(K, IntervalSet):
        K = IntervalSet(tuple(tuple(p) for p in K))
    xs = normalized_deviations(env, triple, x, y, [t], endpoint_grid)
    return any(K.contains(float(v)) for v in xs)


# ---------------------------------------------------------------------------
# weight events


def weight_table(env: Environment, triple: CompatibleTriple, I, J,
                 endpoint_grid: int = DEFAULT_ENDPOINT_GRID) -> tuple:
    """(start coordinates, end coordinates, Wgt matrix) over the discretized rectangle.

    Pairs joined by no path (end left of start) hold NaN and are skipped by
    the events built on this table.
    """
    n, i, j = triple.n, triple.i, triple.j
    gi = interval_indices(env, n, I, triple.t1, endpoint_grid)
    gj = interval_indices(env, n, J, triple.t2, endpoint_grid)
    if gj[-1] < gi[0]:
        raise InfeasibleError("no pair in the rectangle is joined by a path")
    m = last_passage_table(env, gi, i, j)[:, gj]
    disp = env.grid.position(gj)[None, :] - env.grid.position(gi)[:, None]
    w = energy_to_weight(n, m, j - i, disp)
    w[gj[None, :] < gi[:, None]] = np.nan
    return _scaled(env, n, gi, i), _scaled(env, n, gj, j), w


def poly_wgt_reg(env: Environment, triple: CompatibleTriple, I, J, r: float,
                 endpoint_grid: int = DEFAULT_ENDPOINT_GRID) -> bool:
    """|t12^{-1/3}Wgt + 2^{-1/2}t12^{-4/3}(end - start)^2| <= r over the rectangle."""
    xs, ys, w = weight_table(env, triple, I, J, endpoint_grid)
    t12 = triple.t12
    stat = w / t12 ** (1.0 / 3.0) + (ys[None, :] - xs[:, None]) ** 2 / (SQRT2 * t12 ** (4.0 / 3.0))
    return bool(np.all(np.abs(stat[np.isfinite(stat)]) <= r))


def weight_difference_sup(env: Environment, n: int, I, J,
                          endpoint_grid: int = DEFAULT_ENDPOINT_GRID) -> float:
    """sup |Wgt(x2, y2) - Wgt(x1, y1)| over grid endpoints, lifetime [0, 1]."""
    _, _, w = weight_table(env, CompatibleTriple(n, 0.0, 1.0), I, J, endpoint_grid)
    return float(np.nanmax(w) - np.nanmin(w))


def loc_wgt_reg(env: Environment, n: int, I, J, eps: float, r: float,
                endpoint_grid: int = DEFAULT_ENDPOINT_GRID) -> bool:
    """Weight differences over I × J (lifetime [0, 1]) at most r ε^{1/2}."""
    for name, iv in (("I", I), ("J", J)):
        lo, hi = as_interval(iv)
        if abs((hi - lo) - eps) > 1e-9 * max(1.0, eps):
            raise ParameterError(f"|{name}| = {hi - lo} differs from eps = {eps}")
    return weight_difference_sup(env, n, I, J, endpoint_grid) <= r * math.sqrt(eps)


FORWARD = "forward"
BACKWARD = "backward"


def bouquet_statistic(env: Environment, triple: CompatibleTriple, k: int, direction: str,
                      anchor: float, tup) -> float:
    """Normalized proper weight plus its parabolic correction.

    forward: (t12-1/n)^{-1/3}PropWgt + 2^{-1/2}Σ(t12-1/n)^{-4/3}(u_i + 2^{-1}n^{-2/3} - x)^2
    backward: same with (v_i - 2^{-1}n^{-2/3} - y)^2.  Snapped coordinates are used.
    """
    n = triple.n
    d = triple.t12 - 1.0 / n
    if d <= 0:
        raise InfeasibleError("bouquet events need n t12 >= 2")
    tup = np.broadcast_to(np.asarray(tup, dtype=float), (k,))
    half = 0.5 / n23(n)
    if direction == FORWARD:
        xa = snap_point(env, n, anchor, triple.t1)[2]
        us = np.array([snap_point(env, n, u, triple.t2)[2] for u in tup])
        prop = proper_multi_weight_forward(env, triple, k, anchor, tup)
        par = np.sum((us + half - xa) ** 2)
    elif direction == BACKWARD:
        ya = snap_point(env, n, anchor, triple.t2)[2]
        vs = np.array([snap_point(env, n, v, triple.t1)[2] for v in tup])
        prop = proper_multi_weight_backward(env, triple, k, tup, anchor)
        par = np.sum((vs - half - ya) ** 2)
    else:
        raise ParameterError(f"direction must be forward or backward, got {direction!r}")
    return prop / d ** (1.0 / 3.0) + par / (SQRT2 * d ** (4.0 / 3.0))


def bouquet_reg(env: Environment, triple: CompatibleTriple, k: int, direction: str,
                anchor: float, tup, r: float) -> bool:
    return bool(abs(bouquet_statistic(env, triple, k, direction, anchor, tup)) <= r)


# ---------------------------------------------------------------------------
# favourable surgical conditions


def _fsc_lifetime(n: int, eps: float) -> float:
    h = eps ** 1.5
    mesh_index(n, h, "eps^{3/2}")
    return h


def fav_sur_con_components(env: Environment, n: int, k: int, x: float, y: float, eps: float,
                           r: float, endpoint_grid: int = DEFAULT_ENDPOINT_GRID,
                           us=None, vs=None) -> dict:
    """The six constituent indicators, keyed by name.

    When ``us``/``vs`` are not given they are taken from the lexicographically
    minimal separate certificate between I = [x-ε, x+ε] at time 0 and
    J = [y-ε, y+ε] at time 1; without a certificate the left ends of I and J
    are used.
    """
    h = _fsc_lifetime(n, eps)
    I = (x - eps, x + eps)
    J = (y - eps, y + eps)
    I_plus = (x - (r + 1) * eps, x + (r + 1) * eps)
    J_plus = (y - (r + 1) * eps, y + (r + 1) * eps)
    if us is None or vs is None:
        cert = disjoint_certificate(env, CompatibleTriple(n, 0.0, 1.0), I, J, k, endpoint_grid)
        if cert is None:
            g_us = g_vs = None
        else:
            g_us, g_vs = cert
        if us is None:
            us = [_scaled(env, n, g, 0) for g in g_us] if g_us else [I[0]] * k
        if vs is None:
            vs = [_scaled(env, n, g, n) for g in g_vs] if g_vs else [J[0]] * k
    outer = CompatibleTriple(n, -h, 1.0 + h)
    return {
        LOC_WGT_REG: loc_wgt_reg(env, n, I_plus, J_plus, 2 * (r + 1) * eps, r, endpoint_grid),
        POLY_DEV_REG: poly_dev_reg_times(env, outer, x, y, [0.0, 1.0], r, endpoint_grid=1),
        FOR_BOUQ_REG: bouquet_reg(env, CompatibleTriple(n, -h, 0.0), k, FORWARD, x, us, r),
        BACK_BOUQ_REG: bouquet_reg(env, CompatibleTriple(n, 1.0, 1.0 + h), k, BACKWARD, y, vs, r),
        "PolyWgtReg_before": poly_wgt_reg(env, CompatibleTriple(n, -h, 0.0), x, I_plus, r * r,
                                          endpoint_grid),
        "PolyWgtReg_after": poly_wgt_reg(env, CompatibleTriple(n, 1.0, 1.0 + h), J_plus, y, r * r,
                                         endpoint_grid),
    }


def fav_sur_con(env: Environment, n: int, k: int, x: float, y: float, eps: float, r: float,
                endpoint_grid: int = DEFAULT_ENDPOINT_GRID, us=None, vs=None) -> bool:
    return all(fav_sur_con_components(env, n, k, x, y, eps, r, endpoint_grid, us, vs).values())


# ---------------------------------------------------------------------------
# watermelon component bounds


def watermelon_component_bounds(env: Environment, triple: CompatibleTriple, k: int,
                                x: float, y: float) -> tuple:
    """(component weights, lower bound, upper bound) for the k-watermelon x·1 -> y·1.

    The bounds are L(1,y) - Σ_{j>=2}(L(1,y) - L(j,y)) and L(1,y) in terms of
    the forward ensemble rooted at (x, t1).
    """
    n = triple.n
    gx = snap_point(env, n, x, triple.t1)[0]
    gy, _, ys = snap_point(env, n, y, triple.t2)
    ms = multi_geodesic(env, (gx,) * k, (gy,) * k, triple.i, triple.j)
    comps = np.array([make_zigzag(env, n, s).weight for s in ms.paths])
    ens = forward_ensemble(env, triple, x, k, [ys])
    curves = ens.values[:, 0]
    upper = curves[0]
    lower = curves[0] - np.sum(curves[0] - curves[1:])
    return comps, float(lower), float(upper)


# ---------------------------------------------------------------------------
# specs and batches


@dataclass(frozen=True)
class EventSpec:
    name: str
    n: int
    t1: float = 0.0
    t2: float = 1.0
    x: float | None = None
    y: float | None = None
    I: tuple | None = None
    J: tuple | None = None
    k: int | None = None
    eps: float | None = None
    eta: float | None = None
    a: float | None = None
    r: float | None = None
    K: tuple | None = None
    direction: str | None = None
    tuple_: tuple | None = None
    endpoint_grid: int = DEFAULT_ENDPOINT_GRID
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        if self.name not in EVENT_NAMES:
            raise ParameterError(f"unknown event {self.name!r}; choose from {EVENT_NAMES}")
        req, opt = _PARAMS[self.name]
        given = {f.name for f in fields(self) if f.name in _GEOMETRY and getattr(self, f.name) is not None}
        missing = {p for p in req if p not in given and not (p == "x" and "I" in given)
                   and not (p == "y" and "J" in given)}
        if missing:
            raise ParameterError(f"{self.name} needs {sorted(missing)}")
        extra = given - set(req) - set(opt)
        if extra:
            raise ParameterError(f"{self.name} does not take {sorted(extra)}")
        for name in ("I", "J"):
            v = getattr(self, name)
            if v is not None:
                as_interval(v)
        if self.name in (LOC_WGT_REG, FAV_SUR_CON) and (self.t1, self.t2) != (0.0, 1.0):
            raise ParameterError(f"{self.name} has lifetime [0, 1]")
        CompatibleTriple(self.n, self.t1, self.t2)

    @property
    def triple(self) -> CompatibleTriple:
        return CompatibleTriple(self.n, self.t1, self.t2)


_GEOMETRY = {"x", "y", "I", "J", "k", "eps", "eta", "a", "r", "K", "direction", "tuple_"}
_PARAMS = {
    MAX_DISJOINT: ({"I", "J", "k"}, set()),
    NEAR_POLY: ({"k", "x", "y", "eta"}, set()),
    POLY_DEV_REG: ({"x", "y", "a", "r"}, {"I", "J"}),
    POLY_WGT_REG: ({"x", "y", "r"}, {"I", "J"}),
    LOC_WGT_REG: ({"I", "J", "eps", "r"}, set()),
    FOR_BOUQ_REG: ({"k", "x", "tuple_", "r"}, set()),
    BACK_BOUQ_REG: ({"k", "y", "tuple_", "r"}, set()),
    FAV_SUR_CON: ({"k", "x", "y", "eps", "r"}, set()),
    FLUC: ({"x", "y", "a", "K"}, {"I", "J"}),
}


def _point_or_interval(spec: EventSpec, point: str, interval: str):
    iv = getattr(spec, interval)
    return iv if iv is not None else getattr(spec, point)


def evaluate_event(env: Environment, spec: EventSpec) -> tuple:
    """(value, indicator).  value is the disjoint count for MaxDisjtPoly, else the indicator."""
    tr = spec.triple
    g = spec.endpoint_grid
    if spec.name == MAX_DISJOINT:
        count = max_disjoint(env, tr, spec.I, spec.J, spec.k, g, spec.tol)
        return count, count >= spec.k
    if spec.name == NEAR_POLY:
        ind = near_poly(env, tr, spec.k, spec.x, spec.y, spec.eta)
    elif spec.name == POLY_DEV_REG:
        ind = poly_dev_reg(env, tr, _point_or_interval(spec, "x", "I"),
                           _point_or_interval(spec, "y", "J"), spec.a, spec.r, g)
    elif spec.name == POLY_WGT_REG:
        ind = poly_wgt_reg(env, tr, _point_or_interval(spec, "x", "I"),
                           _point_or_interval(spec, "y", "J"), spec.r, g)
    elif spec.name == LOC_WGT_REG:
        ind = loc_wgt_reg(env, spec.n, spec.I, spec.J, spec.eps, spec.r, g)
    elif spec.name == FOR_BOUQ_REG:
        ind = bouquet_reg(env, tr, spec.k, FORWARD, spec.x, spec.tuple_, spec.r)
    elif spec.name == BACK_BOUQ_REG:
        ind = bouquet_reg(env, tr, spec.k, BACKWARD, spec.y, spec.tuple_, spec.r)
    elif spec.name == FAV_SUR_CON:
        ind = fav_sur_con(env, spec.n, spec.k, spec.x, spec.y, spec.eps, spec.r, g)
    else:
        ind = fluc(env, tr, _point_or_interval(spec, "x", "I"), _point_or_interval(spec, "y", "J"),
                   spec.a, IntervalSet(tuple(tuple(p) for p in spec.K)), g)
    return ind, ind


def _extent(*vals) -> list:
    out = []
    for v in vals:
        if v is not None:
            out.extend(np.atleast_1d(np.asarray(v, dtype=float)).tolist())
    return out


def spec_window(spec: EventSpec) -> tuple:
    """(line_min, line_max, position_lo, position_hi) needed to evaluate ``spec``."""
    n = spec.n
    c = 2.0 * n23(n)
    t1, t2 = spec.t1, spec.t2
    xs = _extent(spec.x, spec.I)
    ys = _extent(spec.y, spec.J)
    if spec.name == FOR_BOUQ_REG:
        ys = _extent(spec.tuple_)
    elif spec.name == BACK_BOUQ_REG:
        xs = _extent(spec.tuple_)
    elif spec.name == FAV_SUR_CON:
        w = (spec.r + 1) * spec.eps
        t1, t2 = -spec.eps ** 1.5, 1.0 + spec.eps ** 1.5
        xs = [spec.x - w, spec.x + w]
        ys = [spec.y - w, spec.y + w]
    i, j = mesh_index(n, t1), mesh_index(n, t2)
    lo = i + c * min(xs) if xs else i
    hi = j + c * max(ys) if ys else j
    return i, j, min(lo, hi), max(lo, hi)


def environment_for_spec(spec: EventSpec, seed: int, delta: float) -> Environment:
    i, j, lo, hi = spec_window(spec)
    grid = GridSpec.covering(lo, hi, delta, pad=1)
    return generate_environment(seed, i, j, grid)


EVENT_COLUMNS = ["event", "seed", "n", "t1", "t2", "x", "y", "I", "J", "k", "eps", "eta", "a",
                 "r", "K", "direction", "tuple_", "endpoint_grid", "tol", "delta", "value",
                 "indicator"]


def format_interval_set(pieces) -> str:
    """Interval notation, e.g. ``(-inf,-2.0]U[2.0,inf)``."""
    return "U".join(("[" if lc else "(") + f"{lo!r},{hi!r}" + ("]" if hc else ")")
                    for lo, hi, lc, hc in pieces)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (tuple, list)):
        return " ".join(_fmt(a) for a in v)
    if isinstance(v, bool):
        return str(int(v))
    return repr(v) if isinstance(v, float) else str(v)


def evaluate_batch(specs: Sequence[EventSpec], seeds: Sequence[int], delta: float) -> list:
    """Rows (dict per column) for every spec and seed, in input order."""
    rows = []
    for spec in specs:
        for seed in seeds:
            env = environment_for_spec(spec, seed, delta)
            value, ind = evaluate_event(env, spec)
            row = {"event": spec.name, "seed": seed, "delta": delta,
                   "value": value, "indicator": bool(ind)}
            row.update({f.name: getattr(spec, f.name) for f in fields(spec) if f.name != "name"})
            rows.append(row)
    return rows


def events_to_csv(rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    buf.write(f"# {CSV_VERSION}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(EVENT_COLUMNS)
    for row in rows:
        cells = [_fmt(row.get(c)) for c in EVENT_COLUMNS]
        if row.get("K") is not None:
            cells[EVENT_COLUMNS.index("K")] = format_interval_set(row["K"])
        w.writerow(cells)
    return buf.getvalue()
