"""Scaled forward/backward line ensembles, normalization and regularity audits."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .environment import Environment
from .errors import InfeasibleError, ParameterError, StatisticsError
from .lpp import watermelon_table, watermelon_table_backward
from .scaled import (CompatibleTriple, ScaledPoint, energy_to_weight, n13, snap_point)

FORWARD = "forward"
BACKWARD = "backward"
NORMALIZED_FORWARD = "normalized_forward"
NORMALIZED_BACKWARD = "normalized_backward"
KINDS = (FORWARD, BACKWARD, NORMALIZED_FORWARD, NORMALIZED_BACKWARD)

CSV_VERSION = "lppsim-ensemble-csv 1"
REPORT_VERSION = "lppsim-regularity-report 1"

DEFAULT_C_AUDIT = 0.05
DEFAULT_BIG_C_AUDIT = 50.0
DEFAULT_C_LATTICE = (0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0)
DEFAULT_BIG_C_LATTICE = (1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0)


def parabola(z):
    """Q(z) = 2^{-1/2} z^2."""
    return np.asarray(z) ** 2 / np.sqrt(2.0)


@dataclass(frozen=True, eq=False)
class LineEnsemble:
    kind: str
    triple: CompatibleTriple
    root: ScaledPoint
    domain: np.ndarray
    values: np.ndarray
    delta: float = float("nan")

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown ensemble kind {self.kind!r}")
        d = np.array(self.domain, dtype=float)
        v = np.array(self.values, dtype=float)
        if v.ndim != 2 or v.shape[1] != d.size:
            raise ParameterError("values must have shape (curve_count, len(domain))")
        d.flags.writeable = False
        v.flags.writeable = False
        object.__setattr__(self, "domain", d)
        object.__setattr__(self, "values", v)

    @property
    def curve_count(self) -> int:
        return self.values.shape[0]

    @property
    def normalized(self) -> bool:
        return self.kind.startswith("normalized")

    @property
    def num_curves_full(self) -> int:
        """N = n t12 + 1, the curve count of the complete ensemble."""
        return self.triple.j - self.triple.i + 1

    def curve(self, k: int) -> np.ndarray:
        """Curve k, counted from 1."""
        if not 1 <= k <= self.curve_count:
            raise ParameterError(f"curve index {k} outside 1..{self.curve_count}")
        return self.values[k - 1]

    def partial_sums(self) -> np.ndarray:
        return np.cumsum(self.values, axis=0)

    def ordering_violation(self) -> float:
        """Largest amount by which a lower curve exceeds the curve above it."""
        if self.curve_count < 2:
            return 0.0
        return float(max(0.0, np.max(self.values[1:] - self.values[:-1])))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# {CSV_VERSION}; kind={self.kind}; n={self.triple.n}; t1={self.triple.t1}; "
                  f"t2={self.triple.t2}; root=({self.root.x}, {self.root.t}); delta={self.delta}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["curve_index", "z", "value"])
        for k in range(self.curve_count):
            for z, v in zip(self.domain, self.values[k]):
                w.writerow([k + 1, repr(float(z)), repr(float(v))])
        return buf.getvalue()


def _check_kmax(triple: CompatibleTriple, k_max: int):
    if int(k_max) != k_max or not 1 <= k_max <= triple.j - triple.i + 1:
        raise ParameterError(f"k_max must lie in 1..{triple.j - triple.i + 1}, got {k_max}")


def _curves(n: int, tables: list, lines: int, disp: np.ndarray) -> np.ndarray:
    weights = np.array([energy_to_weight(n, t, lines, k * disp, k)
                        for k, t in enumerate(tables, start=1)])
    if not np.all(np.isfinite(weights)):
        raise InfeasibleError("a watermelon in the ensemble is infeasible")
    return np.diff(weights, axis=0, prepend=0.0)


def forward_ensemble(env: Environment, triple: CompatibleTriple, x: float, k_max: int,
                     y_samples: Sequence[float]) -> LineEnsemble:
    """Curves whose partial sums are the k-watermelon weights from (x, t1) to (y, t2)."""
    _check_kmax(triple, k_max)
    n, i, j = triple.n, triple.i, triple.j
    gx, _, xs = snap_point(env, n, x, triple.t1)
    snapped = [snap_point(env, n, y, triple.t2) for y in y_samples]
    if not snapped:
        raise ParameterError("no samples")
    gys = np.array([s[0] for s in snapped])
    if gys.min() < gx:
        raise InfeasibleError("a sample lies southwest of the root")
    tables = [watermelon_table(env, gx, k, i, j, hi=int(gys.max()))[gys] for k in range(1, k_max + 1)]
    disp = env.grid.position(gys) - env.grid.position(gx)
    values = _curves(n, tables, j - i, disp)
    return LineEnsemble(FORWARD, triple, ScaledPoint(xs, triple.t1),
                        np.array([s[2] for s in snapped]), values, env.grid.delta)


def backward_ensemble(env: Environment, triple: CompatibleTriple, y: float, k_max: int,
                      x_samples: Sequence[float]) -> LineEnsemble:
    """Curves whose partial sums are the k-watermelon weights from (x, t1) to (y, t2)."""
    _check_kmax(triple, k_max)
    n, i, j = triple.n, triple.i, triple.j
    gy, _, ys = snap_point(env, n, y, triple.t2)
    snapped = [snap_point(env, n, x, triple.t1) for x in x_samples]
    if not snapped:
        raise ParameterError("no samples")
    gxs = np.array([s[0] for s in snapped])
    if gxs.max() > gy:
        raise InfeasibleError("a sample lies northeast of the root")
    tables = [watermelon_table_backward(env, gy, k, i, j, lo=int(gxs.min()))[gxs]
              for k in range(1, k_max + 1)]
    disp = env.grid.position(gy) - env.grid.position(gxs)
    values = _curves(n, tables, j - i, disp)
    return LineEnsemble(BACKWARD, triple, ScaledPoint(ys, triple.t2),
                        np.array([s[2] for s in snapped]), values, env.grid.delta)


def unscaled_forward_curves(env: Environment, x: int, i: int, j: int, k_max: int,
                            ends: Sequence[int]) -> np.ndarray:
    """Unscaled curves: partial sums over k give Mᵏ(x·1 at i -> v·1 at j)."""
    ends = np.asarray(ends)
    tables = np.array([watermelon_table(env, x, k, i, j, hi=int(ends.max()))[ends]
                       for k in range(1, k_max + 1)])
    return np.diff(tables, axis=0, prepend=0.0)


def scale_unscaled_curves(curves: np.ndarray, n: int, lines: int, displacement: np.ndarray) -> np.ndarray:
    """Affine map from unscaled curves to scaled curves.

    Each curve becomes 2^{-1/2}n^{-1/3}(L - lines - displacement), the
    per-curve share of the weight centering.
    """
    return (curves - lines - np.asarray(displacement)) / (np.sqrt(2.0) * n13(n))


def normalize_ensemble(ens: LineEnsemble) -> LineEnsemble:
    """NrL(k, z) = t12^{-1/3} L(k, root + t12^{2/3} z), with z measured away from the root."""
    if ens.normalized:
        raise ParameterError("ensemble is already normalized")
    t12 = ens.triple.t12
    z = (ens.domain - ens.root.x) / t12 ** (2.0 / 3.0)
    kind = NORMALIZED_FORWARD if ens.kind == FORWARD else NORMALIZED_BACKWARD
    return LineEnsemble(kind, ens.triple, ens.root, z, ens.values / t12 ** (1.0 / 3.0), ens.delta)


def tail_bound(c: float, big_c: float, s) -> np.ndarray:
    return big_c * np.exp(-c * np.asarray(s, dtype=float) ** 1.5)


def collapse_envelope(z, eta: float, num_curves: int) -> np.ndarray:
    """Even function, affine on [0, inf), used by the collapse-near-infinity audit."""
    z0 = eta * num_curves ** (1.0 / 9.0)
    slope = -5.0 * 2.0 ** -1.5 * eta * num_curves ** (1.0 / 9.0)
    value0 = (-2.0 ** -0.5 + 2.0 ** -2.5) * eta ** 2 * num_curves ** (2.0 / 9.0)
    return value0 + slope * (np.abs(np.asarray(z, dtype=float)) - z0)


@dataclass
class RegularityReport:
    c_audit: float
    big_c_audit: float
    sample_count: int
    s_grid: list
    z_points: list
    bound: list
    lower_tail: list            # [s][z] frequency of NrL(1,z)+Q(z) <= -s
    upper_tail: list            # [s][z] frequency of NrL(1,z)+Q(z) >= s
    curve_lower_tail: dict      # k -> [s][z] frequency of NrL(k,z)+Q(z) <= -s
    interval_infimum: dict      # k -> [s] frequency of inf over window <= -s
    interval_supremum: list     # [s] frequency of sup over window of NrL(1)+Q >= s
    collapse_eta: float
    collapse_exceedance: float
    one_point_dominated: bool
    dominating_pairs: list = field(default_factory=list)

    def to_json(self) -> str:
        d = asdict(self)
        d["curve_lower_tail"] = {str(k): v for k, v in self.curve_lower_tail.items()}
        d["interval_infimum"] = {str(k): v for k, v in self.interval_infimum.items()}
        d["version"] = REPORT_VERSION
        return json.dumps(d, indent=2, sort_keys=True)


MIN_AUDIT_SAMPLES = 30


def regularity_report(samples: Sequence[LineEnsemble], c_audit: float = DEFAULT_C_AUDIT,
                      big_c_audit: float = DEFAULT_BIG_C_AUDIT, z_window=(0.0, 0.0),
                      s_grid: Sequence[float] = (1.0, 2.0, 3.0, 4.0),
                      eta: float | None = None,
                      lattice=(DEFAULT_C_LATTICE, DEFAULT_BIG_C_LATTICE)) -> RegularityReport:
    """Empirical tail frequencies of normalized ensembles against C exp(-c s^{3/2}).

    Pointwise checks use every domain sample inside ``z_window``; interval
    checks take the infimum or supremum over those samples.  The collapse
    audit uses the whole domain outside [-eta N^{1/9}, eta N^{1/9}].
    """
    samples = list(samples)
    if len(samples) < MIN_AUDIT_SAMPLES:
        raise StatisticsError(f"need at least {MIN_AUDIT_SAMPLES} samples, got {len(samples)}")
    if any(not e.normalized for e in samples):
        raise ParameterError("regularity audits take normalized ensembles")
    dom = samples[0].domain
    if any(e.domain.shape != dom.shape or not np.allclose(e.domain, dom, atol=1e-12) for e in samples):
        raise ParameterError("all samples must share one domain")
    lo, hi = z_window
    sel = np.flatnonzero((dom >= lo - 1e-12) & (dom <= hi + 1e-12))
    if sel.size == 0:
        raise ParameterError(f"no domain sample inside window {z_window}")
    z = dom[sel]
    q = parabola(z)
    s = np.asarray(s_grid, dtype=float)
    kmax = min(e.curve_count for e in samples)
    vals = np.stack([e.values[:kmax, sel] for e in samples]) + q       # (S, k, z)
    top = vals[:, 0, :]
    lower = (top[None, :, :] <= -s[:, None, None]).mean(axis=1)         # (s, z)
    upper = (top[None, :, :] >= s[:, None, None]).mean(axis=1)
    curve_lower = {k: (vals[None, :, k - 1, :] <= -s[:, None, None]).mean(axis=1).tolist()
                   for k in range(2, kmax + 1)}
    inf_freq = {k: (vals[:, k - 1, :].min(axis=1)[None, :] <= -s[:, None]).mean(axis=1).tolist()
                for k in range(1, kmax + 1)}
    sup_freq = (top.max(axis=1)[None, :] >= s[:, None]).mean(axis=1)

    eta = c_audit if eta is None else eta
    ncurves = samples[0].num_curves_full
    zc = eta * ncurves ** (1.0 / 9.0)
    outside = np.abs(dom) > zc
    if outside.any():
        env_vals = collapse_envelope(dom[outside], eta, ncurves)
        exceed = np.mean([np.any(e.values[0, outside] > env_vals) for e in samples])
    else:
        exceed = 0.0

    worst = np.maximum(lower.max(axis=1), upper.max(axis=1))
    dominated = bool(np.all(worst <= tail_bound(c_audit, big_c_audit, s)))
    pairs = [[c, bc] for c in lattice[0] for bc in lattice[1]
             if np.all(worst <= tail_bound(c, bc, s))]
    return RegularityReport(
        c_audit=c_audit, big_c_audit=big_c_audit, sample_count=len(samples),
        s_grid=s.tolist(), z_points=z.tolist(), bound=tail_bound(c_audit, big_c_audit, s).tolist(),
        lower_tail=lower.tolist(), upper_tail=upper.tolist(), curve_lower_tail=curve_lower,
        interval_infimum=inf_freq, interval_supremum=sup_freq.tolist(),
        collapse_eta=eta, collapse_exceedance=float(exceed),
        one_point_dominated=dominated, dominating_pairs=pairs)
