import pytest

from dyadlab import DyadicCube, GridSpec, HaarIndex, ancestor
from dyadlab.grids import DepthError, InvalidIndexError, grid_index


def test_grid_validation():
    with pytest.raises(ValueError):
        GridSpec(0, 3)
    with pytest.raises(ValueError):
        GridSpec(1, 0)
    with pytest.raises(ValueError):
        GridSpec(3, 9)  # memory budget
    with pytest.raises(ValueError):
        GridSpec(1, 3, omega=((1,),))  # wrong omega length
    with pytest.raises(ValueError):
        GridSpec(1, 2, omega=((2,), (0,)))


def test_zero_omega_normalizes_to_none():
    assert GridSpec(1, 3, omega=((0,), (0,), (0,))) == GridSpec(1, 3)


def test_cube_counts_and_volume():
    g = GridSpec(2, 3)
    assert g.n_samples == 64
    assert g.n_cubes(2) == 16
    assert g.volume(2) == 2.0 ** -4
    assert g.n_sig == 3


def test_ancestor_child_roundtrip():
    g = GridSpec(2, 3)
    for lvl in (1, 2, 3):
        for flat in range(g.n_cubes(lvl)):
            cube = DyadicCube(lvl, g.pos_from_flat(flat, lvl))
            parent = g.ancestor(cube, 1)
            assert cube in g.children(parent)
    cube = DyadicCube(2, (1, 2))
    assert g.ancestor(cube, 0) == cube
    assert g.ancestor(cube, 2) == DyadicCube(0, (0, 0))


def test_ancestor_quarter_interval_example():
    # [1/4, 1/2) at level 2, k=2 -> [0, 1)
    g = GridSpec(1, 3)
    assert ancestor(g, DyadicCube(2, (1,)), 2) == DyadicCube(0, (0,))


def test_ancestor_out_of_range():
    g = GridSpec(1, 3)
    with pytest.raises(DepthError):
        g.ancestor(DyadicCube(1, (0,)), 2)
    with pytest.raises(InvalidIndexError):
        g.ancestor(DyadicCube(1, (5,)), 0)


def test_each_cube_has_unique_parent_and_2d_children():
    g = GridSpec(2, 2)
    for flat in range(g.n_cubes(1)):
        cube = DyadicCube(1, g.pos_from_flat(flat, 1))
        kids = g.children(cube)
        assert len(kids) == 4
        assert len(set(kids)) == 4
        for kid in kids:
            assert g.ancestor(kid, 1) == cube


def test_signature_encoding():
    g = GridSpec(3, 1)
    assert g.sig_int((0, 1, 0)) == 2
    assert g.int_sig(5) == (1, 0, 1)
    assert g.noncanc_int == 7
    assert not HaarIndex(DyadicCube(0, (0, 0, 0)), (1, 1, 1)).cancellative
    assert HaarIndex(DyadicCube(0, (0, 0, 0)), (1, 0, 1)).cancellative


def test_omega_ancestor_consistency():
    g = GridSpec(1, 3, omega=((1,), (0,), (1,)))
    idx = grid_index(g)
    for lvl in (1, 2, 3):
        anc = idx.ancestor_flat(lvl, 1)
        for flat in range(g.n_cubes(lvl)):
            cube = DyadicCube(lvl, g.pos_from_flat(flat, lvl))
            assert g.flat_pos(g.ancestor(cube, 1).pos, lvl - 1) == anc[flat]


def test_omega_cells_partition_each_level():
    g = GridSpec(1, 3, omega=((1,), (1,), (1,)))
    idx = grid_index(g)
    for lvl in range(g.N + 1):
        cells = idx.cells(lvl)
        assert sorted(cells.reshape(-1).tolist()) == list(range(g.n_samples))


def test_shifted_level_offsets():
    # omega_2 = 1 shifts the level-1 partition by 2**-2 (one cell at N=2)
    g = GridSpec(1, 2, omega=((0,), (1,)))
    assert g.start_cells(1).tolist() == [1]
    assert g.start_cells(2).tolist() == [0]  # finest cells never move


def test_desc_groups_cover_levels():
    g = GridSpec(2, 3)
    idx = grid_index(g)
    groups = idx.desc_groups(1, 2)
    assert groups.shape == (g.n_cubes(1), 16)
    assert sorted(groups.reshape(-1).tolist()) == list(range(g.n_cubes(3)))
