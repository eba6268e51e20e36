"""Quick oracle suite run by ``lppsim selftest``.

Each check compares a fast routine with an independent recomputation on a
few seeded instances and reports one line.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .environment import GridSpec, generate_environment, inject_environment
from .ensembles import forward_ensemble
from .errors import InfeasibleError
from .geometry import precedes_weak, staircase_join, staircase_meet
from .lpp import (LEFTMOST, RIGHTMOST, Staircase, brute_force_multi, geodesic, last_passage,
                  multi_last_passage, staircase_energy)
from .scaled import CompatibleTriple, multi_polymer_weight


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _small_env(rng, lines: int, cells: int):
    vals = np.cumsum(rng.standard_normal((lines, cells)), axis=1)
    return inject_environment(vals, 0, lines - 1, GridSpec(0.0, 1.0, cells - 1))


def _sorted_tuple(rng, k: int, lo: int, hi: int) -> tuple:
    return tuple(sorted(int(v) for v in rng.integers(lo, hi + 1, size=k)))


def _or_inf(fn, *args) -> float:
    try:
        return fn(*args)
    except InfeasibleError:
        return -np.inf


def check_dp_vs_brute(count: int = 60, seed: int = 1) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(count):
        k = int(rng.integers(1, 4))
        lines = int(rng.integers(1, 4))
        env = _small_env(rng, lines, 8)
        xs = _sorted_tuple(rng, k, 0, 3)
        ys = tuple(max(a, b) for a, b in zip(_sorted_tuple(rng, k, 3, 7), xs))
        ys = tuple(sorted(ys))
        fast = _or_inf(multi_last_passage, env, xs, ys, 0, lines - 1)
        slow = _or_inf(brute_force_multi, env, xs, ys, 0, lines - 1)
        if fast != slow:
            worst = max(worst, abs(fast - slow))
    return CheckResult("dp_vs_brute_force", worst <= 1e-9, f"max error {worst:.3g}")


def check_subadditivity(count: int = 100, seed: int = 2) -> CheckResult:
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(count):
        env = _small_env(rng, 6, 14)
        xs = _sorted_tuple(rng, 2, 0, 5)
        ys = _sorted_tuple(rng, 2, 8, 13)
        mk = multi_last_passage(env, xs, ys, 0, 5)
        singles = sum(last_passage(env, (x, 0), (y, 5)) for x, y in zip(xs, ys))
        bad += mk > singles + 1e-9
    return CheckResult("subadditivity", bad == 0, f"{bad} violations")


def check_geodesic_energy(count: int = 50, seed: int = 3) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(count):
        env = _small_env(rng, 10, 30)
        x, y = sorted(int(v) for v in rng.integers(0, 30, size=2))
        for rule in (LEFTMOST, RIGHTMOST):
            s = geodesic(env, (x, 0), (y, 9), rule)
            worst = max(worst, abs(staircase_energy(env, s) - last_passage(env, (x, 0), (y, 9))))
    return CheckResult("geodesic_energy", worst <= 1e-9, f"max error {worst:.3g}")


def check_sandwich(count: int = 50, seed: int = 4) -> CheckResult:
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(count):
        env = _small_env(rng, 5, 10)
        left = geodesic(env, (0, 0), (9, 4), LEFTMOST)
        right = geodesic(env, (0, 0), (9, 4), RIGHTMOST)
        bad += not precedes_weak(left, right).holds
    return CheckResult("sandwich", bad == 0, f"{bad} violations")


def check_meet_join(count: int = 100, seed: int = 5) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(count):
        env = _small_env(rng, 5, 12)
        paths = []
        for _ in range(2):
            pos = sorted(int(v) for v in rng.integers(0, 12, size=6))
            paths.append(Staircase(pos[0], 0, pos[-1], 4, tuple(pos[1:-1])))
        s1, s2 = paths
        lhs = staircase_energy(env, staircase_meet(s1, s2)) + staircase_energy(env, staircase_join(s1, s2))
        rhs = staircase_energy(env, s1) + staircase_energy(env, s2)
        worst = max(worst, abs(lhs - rhs))
    return CheckResult("meet_join_exchange", worst <= 1e-9, f"max error {worst:.3g}")


def check_ensemble_identity(seed: int = 7) -> CheckResult:
    n = 16
    tr = CompatibleTriple(n, 0.0, 1.0)
    env = generate_environment(seed, 0, n, GridSpec.covering(-10, n + 20, 0.5, pad=1))
    ys = [0.0, 0.1, 0.3]
    ens = forward_ensemble(env, tr, 0.0, 2, ys)
    worst = 0.0
    for p, y in enumerate(ys):
        for k in (1, 2):
            direct = multi_polymer_weight(env, tr, k, 0.0, y)
            worst = max(worst, abs(ens.partial_sums()[k - 1, p] - direct))
    ordered = bool(np.all(ens.values[0] >= ens.values[1] - 1e-9))
    return CheckResult("ensemble_identity", worst <= 1e-9 and ordered,
                       f"max error {worst:.3g}, ordered={ordered}")


CHECKS = (check_dp_vs_brute, check_subadditivity, check_geodesic_energy, check_sandwich,
          check_meet_join, check_ensemble_identity)


def run_selftest() -> list:
    return [check() for check in CHECKS]
