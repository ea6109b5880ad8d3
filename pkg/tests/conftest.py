import numpy as np
import pytest

from dyadlab import (DyadicCube, DyadicFunction, HaarIndex, haar_function)
from dyadlab.grids import grid_index


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def all_cubes(grid):
    for lvl in range(grid.N):
        for flat in range(grid.n_cubes(lvl)):
            yield DyadicCube(lvl, grid.pos_from_flat(flat, lvl))


def all_cancellative_indices(grid):
    for cube in all_cubes(grid):
        for e in range(grid.n_sig):
            yield HaarIndex(cube, grid.int_sig(e))


def dense_matrix(op, grid):
    """Sample-space matrix of any operator with .apply, column by column."""
    n = grid.n_samples
    cols = []
    apply_ = op.apply if hasattr(op, "apply") else op
    for k in range(n):
        e = np.zeros(n)
        e[k] = 1.0
        cols.append(apply_(DyadicFunction(grid, e)).samples)
    return np.column_stack(cols)


def dense_shift_matrix_oracle(S):
    """Literal triple sum over stored coefficients with sampled Haar functions.

    Independent of the coefficient-space fast path: every entry contributes
    a_IJK <., h_I> h_J via explicit quadrature outer products.
    """
    g = S.grid
    idx = grid_index(g)
    n = g.n_samples
    M = np.zeros((n, n))
    if S.cancellative:
        for kappa, block in enumerate(S.blocks):
            gi = idx.desc_groups(kappa, S.i)
            gj = idx.desc_groups(kappa, S.j)
            nz = np.argwhere(block != 0.0)
            for (kk, a_slot, asig, b_slot, bsig) in nz:
                a = block[kk, a_slot, asig, b_slot, bsig]
                hI = haar_function(g, HaarIndex(
                    DyadicCube(kappa + S.i, g.pos_from_flat(int(gi[kk, a_slot]),
                                                            kappa + S.i)),
                    g.int_sig(int(asig))))
                hJ = haar_function(g, HaarIndex(
                    DyadicCube(kappa + S.j, g.pos_from_flat(int(gj[kk, b_slot]),
                                                            kappa + S.j)),
                    g.int_sig(int(bsig))))
                M += a * np.outer(hJ.samples, hI.samples) * g.cell_volume
    else:
        acoef = S.symbol_coefficients()
        non = (1,) * g.d
        for lvl in range(g.N):
            for m in range(g.n_cubes(lvl)):
                cube = DyadicCube(lvl, g.pos_from_flat(m, lvl))
                h1 = haar_function(g, HaarIndex(cube, non))
                for e in range(g.n_sig):
                    h = haar_function(g, HaarIndex(cube, g.int_sig(e)))
                    a = acoef[lvl][m, e]
                    if S.orientation == "analysis":
                        M += a * np.outer(h.samples, h1.samples) * g.cell_volume
                    else:
                        M += a * np.outer(h1.samples, h.samples) * g.cell_volume
    return M


def strictly_inside(grid, inner, outer):
    if inner.level <= outer.level:
        return False
    return grid.ancestor(inner, inner.level - outer.level) == outer
