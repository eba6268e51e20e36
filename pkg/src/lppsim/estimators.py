"""Monte Carlo drivers, frequency tables and exponent regression."""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy import stats

from .environment import Environment, GridSpec, generate_environment
from .ensembles import (DEFAULT_BIG_C_AUDIT, DEFAULT_C_AUDIT, FORWARD, LineEnsemble,
                        forward_ensemble, normalize_ensemble, regularity_report)
from .errors import LPPError, ParameterError, StatisticsError
from .events import (max_disjoint, near_poly_gap, normalized_deviations,
                     weight_difference_sup)
from .lpp import LEFTMOST, RIGHTMOST, geodesic, last_passage
from .scaled import CompatibleTriple, ScaledPoint, mesh_index, n23

TRANSVERSAL = "transversal_fluctuation"
WEIGHT_SD = "weight_sd"
WEIGHT_DIFFERENCE = "weight_difference"
DISJOINT_RARITY = "disjoint_rarity"
NEAR_POLY_RARITY = "near_poly_rarity"
DEV_REG_TAIL = "dev_reg_tail"
REGULARITY_AUDIT = "regularity_audit"
EXPERIMENT_KINDS = (TRANSVERSAL, WEIGHT_SD, WEIGHT_DIFFERENCE, DISJOINT_RARITY,
                    NEAR_POLY_RARITY, DEV_REG_TAIL, REGULARITY_AUDIT)

FIXED = "fixed"
SCALED = "scaled"
GRID_POLICIES = (FIXED, SCALED)

TABLE_VERSION = "lppsim-estimate-table 1"
FIT_VERSION = "lppsim-exponent-fit 1"

# the swept parameter of each kind besides n
_SWEPT = {
    TRANSVERSAL: None,
    WEIGHT_SD: None,
    WEIGHT_DIFFERENCE: "eps",
    DISJOINT_RARITY: "eps",
    NEAR_POLY_RARITY: "eta",
    DEV_REG_TAIL: "r",
    REGULARITY_AUDIT: None,
}


def derive_seed(master_seed: int, replicate: int) -> int:
    """Seed of replicate ``replicate``: first 64-bit word of SeedSequence([master, replicate])."""
    if master_seed < 0 or replicate < 0:
        raise ParameterError("seeds and replicate indices must be nonnegative")
    ss = np.random.SeedSequence([int(master_seed), int(replicate)])
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class ExperimentConfig:
    """One Monte Carlo experiment.

    ``delta`` is the grid spacing for the ``fixed`` policy; under the
    ``scaled`` policy the spacing at n is delta (n / delta_ref_n)^{2/3},
    which keeps the spacing constant in scaled units.
    """

    kind: str
    master_seed: int = 0
    replicate_count: int = 100
    n: tuple = (100,)
    eps: tuple = ()
    eta: tuple = ()
    r: tuple = ()
    a: float = 0.5
    k: int = 2
    grid_policy: str = FIXED
    delta: float = 0.25
    delta_ref_n: int = 100
    tolerances: tuple = (1e-9,)
    endpoint_grid: int = 5
    method: str = "auto"
    z_samples: tuple = (0.0,)
    s_grid: tuple = (1.0, 2.0, 3.0, 4.0)
    c_audit: float = DEFAULT_C_AUDIT
    big_c_audit: float = DEFAULT_BIG_C_AUDIT
    threads: int = 1

    def __post_init__(self):
        for name in ("n", "eps", "eta", "r", "tolerances", "z_samples", "s_grid"):
            object.__setattr__(self, name, tuple(np.atleast_1d(getattr(self, name)).tolist()))
        if self.kind not in EXPERIMENT_KINDS:
            raise ParameterError(f"unknown experiment kind {self.kind!r}")
        if self.replicate_count < 1:
            raise ParameterError("replicate_count must be >= 1")
        if self.master_seed < 0:
            raise ParameterError("master_seed must be nonnegative")
        if not self.n or any(int(v) != v or v < 2 for v in self.n):
            raise ParameterError("n sweep must be a nonempty list of integers >= 2")
        swept = _SWEPT[self.kind]
        if swept and not getattr(self, swept):
            raise ParameterError(f"{self.kind} needs a nonempty {swept} sweep")
        if any(v <= 0 for v in self.eps):
            raise ParameterError("eps values must be positive")
        if self.grid_policy not in GRID_POLICIES:
            raise ParameterError(f"grid_policy must be one of {GRID_POLICIES}")
        if not self.delta > 0:
            raise ParameterError("delta must be positive")
        if self.k < 1:
            raise ParameterError("k must be >= 1")
        if self.threads < 1:
            raise ParameterError("threads must be >= 1")
        if not self.tolerances:
            raise ParameterError("tolerances must be nonempty")
        if self.method not in ("auto", "certificate", "extremal"):
            raise ParameterError(f"unknown method {self.method!r}")
        if self.kind == REGULARITY_AUDIT and self.replicate_count < 30:
            raise StatisticsError("a regularity audit needs at least 30 replicates")

    def grid_delta(self, n: int) -> float:
        if self.grid_policy == FIXED:
            return self.delta
        return self.delta * (n / self.delta_ref_n) ** (2.0 / 3.0)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ParameterError(f"unknown config keys {sorted(unknown)}")
        if "kind" not in d:
            raise ParameterError("config needs a kind")
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class EstimateRow:
    kind: str
    n: int
    param: str
    value: float
    tol: float
    delta: float
    replicates: int
    statistic: str
    estimate: float
    ci_lo: float
    ci_hi: float
    stderr: float
    status: str = "ok"


TABLE_COLUMNS = [f for f in EstimateRow.__dataclass_fields__]


@dataclass
class EstimateTable:
    rows: list
    config: ExperimentConfig | None = None
    samples: dict = field(default_factory=dict)    # (n, param value, tol) -> raw statistics
    reports: dict = field(default_factory=dict)    # n -> RegularityReport

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# {TABLE_VERSION}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TABLE_COLUMNS)
        for row in self.rows:
            w.writerow([_cell(getattr(row, c)) for c in TABLE_COLUMNS])
        return buf.getvalue()

    def ok_rows(self, statistic: str | None = None, tol: float | None = None) -> list:
        return [r for r in self.rows if r.status == "ok"
                and (statistic is None or r.statistic == statistic)
                and (tol is None or r.tol == tol)]


def _cell(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


# ---------------------------------------------------------------------------
# interval estimates


def wilson_interval(successes: int, trials: int, confidence: float = 0.95) -> tuple:
    if trials < 1:
        raise StatisticsError("no trials")
    ci = stats.binomtest(int(successes), int(trials)).proportion_ci(confidence, method="wilson")
    return float(ci.low), float(ci.high)


def _frequency_row(kind, n, param, value, tol, delta, hits: np.ndarray, statistic: str) -> EstimateRow:
    m = len(hits)
    s = int(np.count_nonzero(hits))
    p = s / m
    lo, hi = wilson_interval(s, m)
    se = math.sqrt(p * (1 - p) / m)
    return EstimateRow(kind, n, param, value, tol, delta, m, statistic, p, min(lo, p), max(hi, p), se)


def _mean_row(kind, n, param, value, tol, delta, xs: np.ndarray, statistic: str) -> EstimateRow:
    m = len(xs)
    mean = float(np.mean(xs))
    se = float(np.std(xs, ddof=1) / math.sqrt(m)) if m > 1 else math.nan
    half = 1.96 * se if m > 1 else 0.0
    return EstimateRow(kind, n, param, value, tol, delta, m, statistic, mean, mean - half, mean + half, se)


def _sd_row(kind, n, param, value, tol, delta, xs: np.ndarray, statistic: str) -> EstimateRow:
    """Sample standard deviation with a chi-square 95% interval."""
    m = len(xs)
    if m < 2:
        return EstimateRow(kind, n, param, value, tol, delta, m, statistic, math.nan, math.nan,
                           math.nan, math.nan, "needs >= 2 replicates")
    sd = float(np.std(xs, ddof=1))
    lo = sd * math.sqrt((m - 1) / stats.chi2.ppf(0.975, m - 1))
    hi = sd * math.sqrt((m - 1) / stats.chi2.ppf(0.025, m - 1))
    return EstimateRow(kind, n, param, value, tol, delta, m, statistic, sd, lo, hi,
                       sd / math.sqrt(2 * (m - 1)))


# ---------------------------------------------------------------------------
# per-replicate statistics


def _environment(seed: int, n: int, lo: float, hi: float, delta: float) -> Environment:
    return generate_environment(seed, 0, n, GridSpec.covering(lo, hi, delta, pad=1))


def mid_height_deviation(env: Environment, n: int, tie_rule: str = LEFTMOST) -> tuple:
    """(signed deviation, energy) of the geodesic (0, 0) -> (n, n) at line floor(n/2).

    The deviation is measured from n/2 at the end of the geodesic's segment
    farthest from n/2, ties to the right.
    """
    try:
        g0, gn = env.grid.snap(0.0), env.grid.snap(float(n))
    except LPPError as exc:
        raise ParameterError(f"grid window does not contain 0 and {n}") from exc
    if not (env.has_line(0) and env.has_line(n)):
        raise ParameterError(f"environment lacks lines 0..{n}")
    s = geodesic(env, (g0, 0), (gn, n), tie_rule)
    a, b = s.segment(n // 2)
    pa, pb = float(env.grid.position(a)), float(env.grid.position(b))
    ref = n / 2.0
    dev = pa - ref if ref - pa > pb - ref else pb - ref
    return dev, last_passage(env, (g0, 0), (gn, n))


def transversal_fluctuation_stat(env: Environment, n: int, tie_rule: str = LEFTMOST) -> float:
    """|position at line floor(n/2) - n/2| for the geodesic (0, 0) -> (n, n)."""
    return abs(mid_height_deviation(env, n, tie_rule)[0])


def _replicate(args) -> np.ndarray:
    """Statistics of one replicate at one n; the layout depends on the kind."""
    cfg, n, seed = args
    delta = cfg.grid_delta(n)
    c = 2.0 * n23(n)
    tr = CompatibleTriple(n, 0.0, 1.0)
    if cfg.kind in (TRANSVERSAL, WEIGHT_SD):
        env = _environment(seed, n, 0.0, n, delta)
        dev, energy = mid_height_deviation(env, n)
        return np.array([dev, energy])
    if cfg.kind == WEIGHT_DIFFERENCE:
        w = 0.5 * c * max(cfg.eps)
        env = _environment(seed, n, -w, n + w, delta)
        return np.array([weight_difference_sup(env, n, (-e / 2, e / 2), (-e / 2, e / 2),
                                               cfg.endpoint_grid) for e in cfg.eps])
    if cfg.kind == DISJOINT_RARITY:
        w = c * max(cfg.eps)
        env = _environment(seed, n, -w, n + w, delta)
        method = cfg.method
        if method == "auto":
            method = "extremal" if cfg.k == 2 else "certificate"
        tols = cfg.tolerances if method == "certificate" else cfg.tolerances[:1]
        out = np.empty((len(cfg.eps), len(cfg.tolerances)))
        for p, e in enumerate(cfg.eps):
            for q, tol in enumerate(tols):
                out[p, q] = max_disjoint(env, tr, (-e, e), (-e, e), cfg.k, cfg.endpoint_grid,
                                         tol, method)
            out[p, len(tols):] = out[p, 0]
        return out
    if cfg.kind == NEAR_POLY_RARITY:
        env = _environment(seed, n, 0.0, n, delta)
        return np.array([near_poly_gap(env, tr, cfg.k, 0.0, 0.0)])
    if cfg.kind == DEV_REG_TAIL:
        env = _environment(seed, n, 0.0, n, delta)
        t = cfg.a
        xs = normalized_deviations(env, tr, 0.0, 0.0, [t], endpoint_grid=1,
                                   tie_rules=(LEFTMOST, RIGHTMOST))
        return np.array([np.max(np.abs(xs))])
    # regularity audit: snapped domain stacked on the curve values
    zs = np.asarray(cfg.z_samples, dtype=float)
    env = _environment(seed, n, min(0.0, n + c * zs.min()), n + c * max(0.0, zs.max()), delta)
    ens = forward_ensemble(env, tr, 0.0, cfg.k, zs)
    return np.vstack([ens.domain, ens.values])


def _run_replicates(cfg: ExperimentConfig, n: int) -> list:
    args = [(cfg, n, derive_seed(cfg.master_seed, r)) for r in range(cfg.replicate_count)]
    if cfg.threads == 1 or len(args) == 1:
        return [_replicate(a) for a in args]
    chunk = max(1, len(args) // (4 * cfg.threads))
    with ProcessPoolExecutor(max_workers=cfg.threads) as pool:
        return list(pool.map(_replicate, args, chunksize=chunk))


def _check_point(cfg: ExperimentConfig, n: int):
    """Raise ParameterError when the sweep point at n cannot be evaluated."""
    if cfg.kind == DEV_REG_TAIL:
        if not 0 < cfg.a < 1:
            raise ParameterError(f"a = {cfg.a} must lie in (0, 1)")
        mesh_index(n, cfg.a, "a")
    if cfg.kind in (NEAR_POLY_RARITY, DISJOINT_RARITY, REGULARITY_AUDIT) and cfg.k > n + 1:
        raise ParameterError(f"k = {cfg.k} exceeds n + 1")


def run_experiment(cfg: ExperimentConfig) -> EstimateTable:
    """Estimate table for every sweep point; rejected points carry their reason as status."""
    table = EstimateTable([], cfg)
    kind = cfg.kind
    for n in (int(v) for v in cfg.n):
        delta = cfg.grid_delta(n)
        swept = _SWEPT[kind]
        values = getattr(cfg, swept) if swept else (math.nan,)
        try:
            _check_point(cfg, n)
            res = _run_replicates(cfg, n)
        except LPPError as exc:
            for v in values:
                table.rows.append(EstimateRow(kind, n, swept or "", v, math.nan, delta, 0,
                                              "", math.nan, math.nan, math.nan, math.nan,
                                              f"rejected: {exc}"))
            continue
        res = np.stack(res)
        tol0 = cfg.tolerances[0]
        if kind == TRANSVERSAL:
            dev = res[:, 0]
            table.samples[(n, math.nan, tol0)] = dev
            table.rows.append(_sd_row(kind, n, "", math.nan, math.nan, delta, dev, "sd_deviation"))
            table.rows.append(_mean_row(kind, n, "", math.nan, math.nan, delta, np.abs(dev),
                                        "mean_abs_deviation"))
        elif kind == WEIGHT_SD:
            centered = res[:, 1] - 2.0 * n
            table.samples[(n, math.nan, tol0)] = centered
            table.rows.append(_sd_row(kind, n, "", math.nan, math.nan, delta, centered, "sd_energy"))
            table.rows.append(_mean_row(kind, n, "", math.nan, math.nan, delta, centered,
                                        "mean_centered_energy"))
        elif kind == WEIGHT_DIFFERENCE:
            for p, e in enumerate(cfg.eps):
                table.samples[(n, e, tol0)] = res[:, p]
                table.rows.append(_mean_row(kind, n, "eps", e, math.nan, delta, res[:, p],
                                            "mean_sup_difference"))
        elif kind == DISJOINT_RARITY:
            for p, e in enumerate(cfg.eps):
                for q, tol in enumerate(cfg.tolerances):
                    counts = res[:, p, q]
                    table.samples[(n, e, tol)] = counts
                    table.rows.append(_frequency_row(kind, n, "eps", e, tol, delta,
                                                     counts >= cfg.k, f"P(count>={cfg.k})"))
        elif kind == NEAR_POLY_RARITY:
            gaps = res[:, 0]
            for e in cfg.eta:
                table.samples[(n, e, tol0)] = gaps
                table.rows.append(_frequency_row(kind, n, "eta", e, math.nan, delta,
                                                 gaps <= e, "P(NearPoly)"))
        elif kind == DEV_REG_TAIL:
            worst = res[:, 0]
            for r in cfg.r:
                table.samples[(n, r, tol0)] = worst
                table.rows.append(_frequency_row(kind, n, "r", r, math.nan, delta,
                                                 worst > r, "P(not PolyDevReg)"))
        else:
            tr = CompatibleTriple(n, 0.0, 1.0)
            ens = [normalize_ensemble(LineEnsemble(FORWARD, tr, ScaledPoint(0.0, 0.0), v[0], v[1:], delta))
                   for v in res]
            rep = regularity_report(ens, cfg.c_audit, cfg.big_c_audit,
                                    z_window=(min(cfg.z_samples), max(cfg.z_samples)),
                                    s_grid=cfg.s_grid)
            table.reports[n] = rep
            for p, s in enumerate(rep.s_grid):
                worst = max(max(rep.lower_tail[p]), max(rep.upper_tail[p]))
                hits = int(round(worst * rep.sample_count))
                row = _frequency_row(kind, n, "s", s, math.nan, delta,
                                     np.arange(rep.sample_count) < hits, "worst_one_point_tail")
                table.rows.append(row)
            table.rows.append(EstimateRow(kind, n, "", math.nan, math.nan, delta, rep.sample_count,
                                          "dominating_pairs", float(len(rep.dominating_pairs)),
                                          math.nan, math.nan, math.nan))
    return table


# ---------------------------------------------------------------------------
# regression


@dataclass(frozen=True)
class ExponentFit:
    slope: float
    intercept: float
    slope_stderr: float
    r_squared: float
    points_used: int
    log_log: bool = True

    def __post_init__(self):
        if self.points_used < 2:
            raise StatisticsError("a fit needs at least two points")
        if self.slope_stderr < 0:
            raise StatisticsError("negative standard error")

    def to_json(self) -> str:
        d = asdict(self)
        d["version"] = FIT_VERSION
        return json.dumps(d, indent=2, sort_keys=True)


def fit_exponent(pairs: Sequence[tuple], log_log: bool = True) -> ExponentFit:
    """Ordinary least squares of value on scale, on log-log axes by default."""
    pairs = [(float(s), float(v)) for s, v in pairs]
    if len(pairs) < 2:
        raise ParameterError("need at least two (scale, value) pairs")
    x = np.array([p[0] for p in pairs])
    y = np.array([p[1] for p in pairs])
    if log_log:
        if np.any(x <= 0) or np.any(y <= 0):
            raise ParameterError("log-log fits need positive scales and values")
        x, y = np.log(x), np.log(y)
    if np.ptp(x) == 0:
        raise ParameterError("scales must not all coincide")
    if np.ptp(y) == 0:
        return ExponentFit(0.0, float(y[0]), 0.0, 1.0, len(x), log_log)
    res = stats.linregress(x, y)
    stderr = float(res.stderr) if len(x) > 2 else 0.0
    return ExponentFit(float(res.slope), float(res.intercept), stderr, float(res.rvalue ** 2),
                       len(x), log_log)


def fit_table(table: EstimateTable, statistic: str | None = None, tol: float | None = None) -> ExponentFit:
    """Log-log fit of estimate against n (no swept parameter) or the swept parameter.

    Rows with a zero estimate are dropped, since they have no logarithm.
    """
    rows = table.ok_rows(statistic, tol)
    if not rows:
        raise StatisticsError("no usable rows")
    if statistic is None:
        first = rows[0].statistic
        rows = [r for r in rows if r.statistic == first]
    use_n = not rows[0].param
    pairs = [((r.n if use_n else r.value), r.estimate) for r in rows if r.estimate > 0]
    if len(pairs) < 2:
        raise StatisticsError("fewer than two rows with a positive estimate")
    return fit_exponent(pairs)


__all__ = [
    "ExperimentConfig", "EstimateRow", "EstimateTable", "ExponentFit", "EXPERIMENT_KINDS",
    "derive_seed", "wilson_interval", "run_experiment", "fit_exponent", "fit_table",
    "transversal_fluctuation_stat", "mid_height_deviation",
]
