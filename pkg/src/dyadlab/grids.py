"""Dyadic grids on the unit torus: cubes, Haar signatures, and index maps.

A grid of depth ``N`` in dimension ``d`` partitions the torus [0,1)^d into
2**(k*d) cubes at each level k = 0..N. Cancellative Haar functions live on
cubes at levels 0..N-1 (a cube needs children to oscillate on); the single
noncancellative root Haar is the constant function.

Shifted grids carry per-level offsets omega_j in {0,1}^d for j = 1..N: a
level-k cube is translated by sum_{j>k} 2**-j * omega_j, wrapped on the
torus. All offsets are whole numbers of finest cells, so every shifted cube
is an exact union of sample cells.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

#: Hard cap on the sample count of a single function.
MAX_SAMPLES = 1 << 24


class InvalidIndexError(ValueError):
    """Cube or Haar index outside the grid."""


class DepthError(ValueError):
    """Operation requires levels deeper than the grid provides."""


class GridMismatchError(ValueError):
    """Operands live on different grids."""


class WrongKindError(ValueError):
    """Operator kind does not match the requested operation."""


def _normalize_omega(omega, d, N):
    if omega is None:
        return None
    om = tuple(tuple(int(x) for x in level) for level in omega)
    if len(om) != N:
        raise ValueError(f"omega needs exactly {N} per-level entries, got {len(om)}")
    for level in om:
        if len(level) != d or any(x not in (0, 1) for x in level):
            raise ValueError("omega entries must lie in {0,1}^d")
    if all(x == 0 for level in om for x in level):
        return None
    return om


@dataclass(frozen=True)
class GridSpec:
    """Dyadic grid of depth N on [0,1)^d; finest cells have side 2**-N."""

    d: int
    N: int
    omega: tuple = None

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("dimension must be >= 1")
        if self.N < 1:
            raise ValueError("depth must be >= 1")
        if (1 << (self.N * self.d)) > MAX_SAMPLES:
            raise ValueError("grid exceeds the configured memory budget")
        object.__setattr__(self, "omega", _normalize_omega(self.omega, self.d, self.N))

    @property
    def n_side(self) -> int:
        return 1 << self.N

    @property
    def n_samples(self) -> int:
        return 1 << (self.N * self.d)

    @property
    def n_sig(self) -> int:
        """Number of cancellative signatures per cube."""
        return (1 << self.d) - 1

    @property
    def cell_volume(self) -> float:
        return 2.0 ** (-self.N * self.d)

    def n_cubes(self, level: int) -> int:
        return 1 << (level * self.d)

    def volume(self, level: int) -> float:
        return 2.0 ** (-level * self.d)

    # -- cube algebra -----------------------------------------------------

    def validate_cube(self, cube: "DyadicCube") -> None:
        if not (0 <= cube.level <= self.N):
            raise InvalidIndexError(f"cube level {cube.level} outside 0..{self.N}")
        if len(cube.pos) != self.d:
            raise InvalidIndexError("cube position has wrong dimension")
        n = 1 << cube.level
        if any(not (0 <= p < n) for p in cube.pos):
            raise InvalidIndexError(f"cube position {cube.pos} outside level {cube.level}")

    def ancestor(self, cube: "DyadicCube", k: int) -> "DyadicCube":
        """The k-th dyadic ancestor of ``cube`` in this grid."""
        self.validate_cube(cube)
        if k < 0 or k > cube.level:
            raise DepthError(f"ancestor depth {k} exceeds cube level {cube.level}")
        pos = np.array(cube.pos, dtype=np.int64)
        level = cube.level
        for _ in range(k):
            off = self._omega_level(level)
            pos = ((pos - off) % (1 << level)) >> 1
            level -= 1
        return DyadicCube(level, tuple(int(p) for p in pos))

    def children(self, cube: "DyadicCube") -> list["DyadicCube"]:
        self.validate_cube(cube)
        if cube.level >= self.N:
            raise DepthError("finest cubes have no children")
        off = self._omega_level(cube.level + 1)
        n = 1 << (cube.level + 1)
        out = []
        for bits in range(1 << self.d):
            side = [(bits >> (self.d - 1 - a)) & 1 for a in range(self.d)]
            pos = tuple(int((2 * p + s + o) % n) for p, s, o in zip(cube.pos, side, off))
            out.append(DyadicCube(cube.level + 1, pos))
        return out

    def _omega_level(self, level: int) -> np.ndarray:
        """Offset bits used when pairing level ``level`` cubes into parents."""
        if self.omega is None or level < 1:
            return np.zeros(self.d, dtype=np.int64)
        return np.asarray(self.omega[level - 1], dtype=np.int64)

    def start_cells(self, level: int) -> np.ndarray:
        """Per-axis cell offset of cube position 0 at ``level``."""
        start = np.zeros(self.d, dtype=np.int64)
        if self.omega is not None:
            for j in range(level + 1, self.N + 1):
                start += (1 << (self.N - j)) * np.asarray(self.omega[j - 1], dtype=np.int64)
        return start % self.n_side

    # -- signatures -------------------------------------------------------

    def sig_int(self, sig) -> int:
        if len(sig) != self.d or any(x not in (0, 1) for x in sig):
            raise InvalidIndexError(f"bad signature {sig}")
        e = 0
        for x in sig:
            e = (e << 1) | int(x)
        return e

    def int_sig(self, e: int) -> tuple:
        return tuple((e >> (self.d - 1 - a)) & 1 for a in range(self.d))

    @property
    def noncanc_int(self) -> int:
        return (1 << self.d) - 1

    # -- stacked coefficient layout ----------------------------------------
    # Layout: [mean, level 0 (cube-major, signature-minor), level 1, ...].
    # Only cancellative signatures are stored; total size equals n_samples.

    def level_offset(self, level: int) -> int:
        off = 1
        for l in range(level):
            off += self.n_cubes(l) * self.n_sig
        return off

    def level_block(self, stacked: np.ndarray, level: int) -> np.ndarray:
        """View of the level's coefficients, shape (n_cubes, n_sig, *passive)."""
        off = self.level_offset(level)
        cnt = self.n_cubes(level) * self.n_sig
        return stacked[off:off + cnt].reshape((self.n_cubes(level), self.n_sig) + stacked.shape[1:])

    def flat_pos(self, pos, level: int) -> int:
        return int(np.ravel_multi_index(tuple(int(p) for p in pos), (1 << level,) * self.d))

    def pos_from_flat(self, flat: int, level: int) -> tuple:
        return tuple(int(x) for x in np.unravel_index(flat, (1 << level,) * self.d))

    def stacked_index(self, idx: "HaarIndex") -> int:
        """Position of a cancellative Haar coefficient in the stacked layout."""
        if not idx.cancellative:
            raise InvalidIndexError("stacked layout stores cancellative coefficients only")
        if idx.cube.level >= self.N:
            raise InvalidIndexError("cancellative indices require level < N")
        self.validate_cube(idx.cube)
        return (self.level_offset(idx.cube.level)
                + self.flat_pos(idx.cube.pos, idx.cube.level) * self.n_sig
                + self.sig_int(idx.sig))


@dataclass(frozen=True)
class DyadicCube:
    """A cube 2**-level * ([0,1)^d + pos) of a (possibly shifted) dyadic grid."""

    level: int
    pos: tuple

    def __post_init__(self):
        object.__setattr__(self, "pos", tuple(int(p) for p in self.pos))


@dataclass(frozen=True)
class HaarIndex:
    """A cube together with a signature in {0,1}^d selecting one Haar function."""

    cube: DyadicCube
    sig: tuple

    def __post_init__(self):
        object.__setattr__(self, "sig", tuple(int(s) for s in self.sig))

    @property
    def cancellative(self) -> bool:
        return any(s == 0 for s in self.sig)


def ancestor(grid: GridSpec, cube: DyadicCube, k: int) -> DyadicCube:
    """Convenience wrapper for :meth:`GridSpec.ancestor`."""
    return grid.ancestor(cube, k)


# ---------------------------------------------------------------------------
# Cached vectorized index maps.


class _GridIndex:
    """Vectorized cube-index machinery for one grid; cached per GridSpec."""

    def __init__(self, grid: GridSpec):
        self.grid = grid
        self._anc = {}
        self._desc = {}
        self._cells = {}
        self._signs = {}
        self._rows = {}

    def sig_rows(self, level: int, sig_int: int) -> np.ndarray:
        """Stacked indices of one signature's coefficients at ``level``."""
        key = (level, sig_int)
        if key not in self._rows:
            g = self.grid
            rows = g.level_offset(level) + np.arange(g.n_cubes(level)) * g.n_sig \
                + sig_int
            rows.setflags(write=False)
            self._rows[key] = rows
        return self._rows[key]

    def coords(self, level: int) -> np.ndarray:
        """(d, n_cubes) coordinate array of all cubes at ``level``."""
        n = 1 << level
        flat = np.arange(self.grid.n_cubes(level))
        return np.array(np.unravel_index(flat, (n,) * self.grid.d))

    def ancestor_flat(self, level: int, k: int) -> np.ndarray:
        """Flat index of the k-th ancestor for every cube at ``level``."""
        key = (level, k)
        if key not in self._anc:
            if k < 0 or k > level:
                raise DepthError(f"ancestor depth {k} exceeds level {level}")
            c = self.coords(level)
            lvl = level
            for _ in range(k):
                off = self.grid._omega_level(lvl)[:, None]
                c = ((c - off) % (1 << lvl)) >> 1
                lvl -= 1
            self._anc[key] = np.ravel_multi_index(tuple(c), ((1 << lvl),) * self.grid.d)
        return self._anc[key]

    def desc_groups(self, kappa: int, depth: int) -> np.ndarray:
        """Cubes at level kappa+depth grouped by ancestor at kappa.

        Returns an int array of shape (n_cubes(kappa), 2**(d*depth)) whose
        row ``q`` lists the flat indices of the descendants of cube ``q``.
        """
        key = (kappa, depth)
        if key not in self._desc:
            anc = self.ancestor_flat(kappa + depth, depth)
            order = np.argsort(anc, kind="stable")
            self._desc[key] = order.reshape(self.grid.n_cubes(kappa), -1)
        return self._desc[key]

    def cells(self, level: int) -> np.ndarray:
        """(n_cubes, cells_per_cube) flat sample-cell indices of each cube."""
        if level not in self._cells:
            g = self.grid
            step = 1 << (g.N - level)
            side = g.n_side
            start = g.start_cells(level)
            c = self.coords(level)
            acc = None
            for a in range(g.d):
                axis_cells = (start[a] + c[a][:, None] * step + np.arange(step)) % side
                weighted = axis_cells * (side ** (g.d - 1 - a))
                if acc is None:
                    acc = weighted
                else:
                    acc = (acc[:, :, None] + weighted[:, None, :]).reshape(acc.shape[0], -1)
            self._cells[level] = acc
        return self._cells[level]

    def ancestor_haar_signs(self, level: int, k: int, sig) -> np.ndarray:
        """Sign of the k-th ancestor's Haar function sampled inside each cube.

        For every cube I at ``level`` (k >= 1), samples h^sig of I^(k) at the
        first cell of I and strips the amplitude, leaving the +-1 factor.
        """
        key = (level, k, tuple(sig))
        if key not in self._signs:
            g = self.grid
            anc = self.ancestor_flat(level, k)
            c = self.coords(level)
            anc_c = np.array(np.unravel_index(anc, (1 << (level - k),) * g.d))
            start = g.start_cells(level)
            astart = g.start_cells(level - k)
            step = 1 << (g.N - level)
            astep = 1 << (g.N - (level - k))
            signs = np.ones(g.n_cubes(level))
            for a in range(g.d):
                cube_cell = (start[a] + c[a] * step) % g.n_side
                anc_cell = (astart[a] + anc_c[a] * astep) % g.n_side
                rel = (cube_cell - anc_cell) % g.n_side
                if sig[a] == 0:
                    signs = signs * np.where(rel < astep // 2, 1.0, -1.0)
            signs.setflags(write=False)
            self._signs[key] = signs
        return self._signs[key]


@functools.lru_cache(maxsize=None)
def grid_index(grid: GridSpec) -> _GridIndex:
    return _GridIndex(grid)
