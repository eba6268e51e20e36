"""Discretized Brownian environment B(line, position).

Each line carries a Brownian motion sampled on a uniform grid and pinned to
zero at ``anchor_index``.  Increments come from a counter-based generator
(numpy's Philox4x64) keyed by (seed, line) with the counter derived from the
absolute cell index ``round(x0 / delta) + g``.  Enlarging the window or the
line range therefore leaves previously generated increments untouched, as
long as the anchor sits at the same absolute position.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import ndtri

from .errors import DomainError, ParameterError

_U64 = 1 << 64
_LINE_OFFSET = 1 << 62
_BLOCK_OFFSET = 1 << 62
_DUMP_MAGIC = b"LPPENV"
_DUMP_VERSION = 1
_DUMP_HEADER = struct.Struct("<6sHBBQqqddqq")


@dataclass(frozen=True)
class GridSpec:
    """Uniform spatial grid ``x0 + g * delta`` for ``g`` in ``[0, num_cells]``."""

    x0: float
    delta: float
    num_cells: int
    anchor_index: int = 0

    def __post_init__(self):
        if not np.isfinite(self.x0):
            raise ParameterError("grid x0 must be finite")
        if not (np.isfinite(self.delta) and self.delta > 0):
            raise ParameterError(f"grid delta must be positive, got {self.delta}")
        if int(self.num_cells) != self.num_cells or self.num_cells < 1:
            raise ParameterError(f"num_cells must be an integer >= 1, got {self.num_cells}")
        if not 0 <= self.anchor_index <= self.num_cells:
            raise ParameterError("anchor_index must lie in [0, num_cells]")

    @property
    def num_points(self) -> int:
        return self.num_cells + 1

    @property
    def x_max(self) -> float:
        return self.x0 + self.num_cells * self.delta

    @property
    def first_cell(self) -> int:
        """Absolute index of the cell starting at x0."""
        return int(round(self.x0 / self.delta))

    def position(self, g):
        return self.x0 + np.asarray(g) * self.delta

    def positions(self) -> np.ndarray:
        return self.x0 + np.arange(self.num_points) * self.delta

    def snap(self, pos: float) -> int:
        """Nearest grid index to ``pos``; exact halves go toward -inf.

        Raises DomainError when the snapped index falls outside the window.
        """
        u = (pos - self.x0) / self.delta
        r = round(u)
        if abs(u - r) <= 1e-9 * max(1.0, abs(u)):
            g = int(r)
        else:
            g = int(np.ceil(u - 0.5))
        if not 0 <= g <= self.num_cells:
            raise DomainError(f"position {pos} lies outside the grid window "
                              f"[{self.x0}, {self.x_max}]")
        return g

    @classmethod
    def covering(cls, lo: float, hi: float, delta: float, pad: int = 0) -> "GridSpec":
        """Smallest grid aligned to multiples of ``delta`` containing [lo, hi]."""
        g_lo = int(np.floor(lo / delta + 1e-9)) - pad
        g_hi = int(np.ceil(hi / delta - 1e-9)) + pad
        return cls(x0=g_lo * delta, delta=delta, num_cells=max(1, g_hi - g_lo))


@dataclass(frozen=True, eq=False)
class Environment:
    """Table of values B(line, x0 + g*delta), lines ``line_min..line_max``.

    ``seed`` is None for injected (deterministic) environments.
    """

    seed: int | None
    line_min: int
    line_max: int
    grid: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.line_min > self.line_max:
            raise ParameterError("line_min must not exceed line_max")
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (self.num_lines, self.grid.num_points):
            raise ParameterError(f"values shape {v.shape} does not match "
                                 f"({self.num_lines}, {self.grid.num_points})")
        if v is self.values:
            v = v.copy()
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def num_lines(self) -> int:
        return self.line_max - self.line_min + 1

    def has_line(self, line: int) -> bool:
        return self.line_min <= line <= self.line_max

    def row(self, line: int) -> np.ndarray:
        if not self.has_line(line):
            raise DomainError(f"line {line} outside [{self.line_min}, {self.line_max}]")
        return self.values[line - self.line_min]

    def rows(self, line_lo: int, line_hi: int) -> np.ndarray:
        if not (self.has_line(line_lo) and self.has_line(line_hi)):
            raise DomainError(f"lines {line_lo}..{line_hi} outside "
                              f"[{self.line_min}, {self.line_max}]")
        return self.values[line_lo - self.line_min: line_hi - self.line_min + 1]

    def value(self, line: int, g: int) -> float:
        if not 0 <= g <= self.grid.num_cells:
            raise DomainError(f"grid index {g} outside [0, {self.grid.num_cells}]")
        return float(self.row(line)[g])

    def __eq__(self, other):
        if not isinstance(other, Environment):
            return NotImplemented
        return (self.seed == other.seed and self.line_min == other.line_min
                and self.line_max == other.line_max and self.grid == other.grid
                and np.array_equal(self.values, other.values))

    __hash__ = None


def standard_normals(seed: int, line: int, first_cell: int, count: int) -> np.ndarray:
    """Standard Gaussians for absolute cells ``first_cell .. first_cell+count-1``.

    Cell c reads lane ``c % 4`` of Philox block ``c // 4`` under key
    (seed, line).  Uniforms use the top 53 bits, shifted off zero, and are
    mapped through the Gaussian quantile function.
    """
    block_lo = first_cell // 4
    block_hi = (first_cell + count - 1) // 4
    key = np.array([seed % _U64, (line + _LINE_OFFSET) % _U64], dtype=np.uint64)
    ctr = np.array([(block_lo + _BLOCK_OFFSET) % _U64, 0, 0, 0], dtype=np.uint64)
    raw = np.random.Philox(key=key, counter=ctr).random_raw(4 * (block_hi - block_lo + 1))
    raw = raw[first_cell - 4 * block_lo: first_cell - 4 * block_lo + count]
    u = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53
    return ndtri(u)


def _pin(increments: np.ndarray, anchor: int) -> np.ndarray:
    """Cumulative values from row-wise increments, zero at ``anchor``."""
    lines, cells = increments.shape
    out = np.zeros((lines, cells + 1))
    if anchor < cells:
        out[:, anchor + 1:] = np.cumsum(increments[:, anchor:], axis=1)
    if anchor > 0:
        left = np.cumsum(increments[:, :anchor][:, ::-1], axis=1)[:, ::-1]
        out[:, :anchor] = -left
    return out


def generate_environment(seed: int, line_min: int, line_max: int, grid: GridSpec) -> Environment:
    if line_min > line_max:
        raise ParameterError("line_min must not exceed line_max")
    seed = int(seed) % _U64
    scale = np.sqrt(grid.delta)
    inc = np.empty((line_max - line_min + 1, grid.num_cells))
    for r, line in enumerate(range(line_min, line_max + 1)):
        inc[r] = standard_normals(seed, line, grid.first_cell, grid.num_cells)
    inc *= scale
    return Environment(seed, line_min, line_max, grid, _pin(inc, grid.anchor_index))


def brownian_value(env: Environment, line: int, g: int) -> float:
    return env.value(line, g)


def inject_environment(values, line_min: int, line_max: int, grid: GridSpec) -> Environment:
    """Deterministic environment with prescribed values.

    ``values`` is either an array of shape (lines, num_cells+1) or a callable
    ``f(line, positions) -> array``.  No pinning is applied.
    """
    if callable(values):
        pos = grid.positions()
        table = np.array([np.broadcast_to(np.asarray(values(line, pos), dtype=np.float64), pos.shape)
                          for line in range(line_min, line_max + 1)])
    else:
        table = np.array(values, dtype=np.float64)
    return Environment(None, line_min, line_max, grid, table)


def zero_environment(line_min: int, line_max: int, grid: GridSpec) -> Environment:
    return inject_environment(lambda line, x: np.zeros_like(x), line_min, line_max, grid)


def identity_environment(line_min: int, line_max: int, grid: GridSpec) -> Environment:
    """B(k, x) = x on every line."""
    return inject_environment(lambda line, x: x, line_min, line_max, grid)


def reflect_environment(env: Environment) -> Environment:
    """Half-turn rotation: B'(k, z) = -B(-k, -z).

    A staircase from (x, i) to (y, j) in ``env`` maps to one from (-y, -j) to
    (-x, -i) in the result with identical energy.  The negation makes this a
    pathwise identity rather than one in law.
    """
    g = env.grid
    grid = GridSpec(x0=-g.x_max, delta=g.delta, num_cells=g.num_cells,
                    anchor_index=g.num_cells - g.anchor_index)
    table = -env.values[::-1, ::-1]
    return Environment(None, -env.line_max, -env.line_min, grid, table)


def environment_to_bytes(env: Environment) -> bytes:
    g = env.grid
    has_seed = env.seed is not None
    header = _DUMP_HEADER.pack(_DUMP_MAGIC, _DUMP_VERSION, int(has_seed), 0,
                               env.seed % _U64 if has_seed else 0,
                               env.line_min, env.line_max, g.x0, g.delta,
                               g.num_cells, g.anchor_index)
    return header + env.values.astype("<f8").tobytes(order="C")


def environment_from_bytes(data: bytes) -> Environment:
    if len(data) < _DUMP_HEADER.size:
        raise ParameterError("environment dump truncated")
    magic, version, has_seed, _, seed, lo, hi, x0, delta, cells, anchor = \
        _DUMP_HEADER.unpack_from(data)
    if magic != _DUMP_MAGIC:
        raise ParameterError("not an environment dump")
    if version != _DUMP_VERSION:
        raise ParameterError(f"unsupported environment dump version {version}")
    grid = GridSpec(x0=x0, delta=delta, num_cells=cells, anchor_index=anchor)
    payload = np.frombuffer(data, dtype="<f8", offset=_DUMP_HEADER.size)
    expected = (hi - lo + 1) * (cells + 1)
    if payload.size != expected:
        raise ParameterError(f"payload has {payload.size} values, expected {expected}")
    seed_val = seed if has_seed else None
    return Environment(seed_val, lo, hi, grid, payload.reshape(hi - lo + 1, cells + 1).astype(np.float64))


def save_environment(env: Environment, path) -> None:
    Path(path).write_bytes(environment_to_bytes(env))


def load_environment(path) -> Environment:
    return environment_from_bytes(Path(path).read_bytes())
