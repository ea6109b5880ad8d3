import numpy as np

from dyadlab import (GridSpec, OmegaSample, average_operator,
                     commutator_bound_study, hilbert_pattern_builder,
                     hilbert_pattern_shift, mc_representation_demo,
                     random_function, sample_omega, shifted_grid,
                     toeplitz_deviation)
from dyadlab.montecarlo import _bonferroni_z, wrap_builder
from conftest import dense_matrix


BASE = GridSpec(1, 5)


def test_sample_omega_deterministic():
    a = sample_omega(BASE, 42)
    b = sample_omega(BASE, 42)
    assert a == b
    assert len(a.offsets) == BASE.N
    assert all(x in (0, 1) for lvl in a.offsets for x in lvl)


def test_shifted_grid_identity_and_offsets():
    zero = OmegaSample(tuple((0,) for _ in range(BASE.N)), 0)
    assert shifted_grid(BASE, zero) == BASE
    # omega_2 = 1 shifts the level-1 partition by 2**-2
    g = GridSpec(1, 2, omega=((0,), (1,)))
    assert g.start_cells(1).tolist() == [1]


def test_pattern_coefficients_at_admissible_bound():
    S = hilbert_pattern_shift(BASE)
    for block in S.blocks:
        vals = np.abs(block[block != 0.0])
        assert np.allclose(vals, 2.0 ** -0.5)
    # signs alternate between the two children
    assert np.allclose(block[..., 0, 0] + block[..., 1, 0], 0.0)


def test_pattern_matrix_matches_generic_apply(rng):
    builder = hilbert_pattern_builder(BASE)
    handle = builder(sample_omega(BASE, 9))
    M = handle.matrix()
    M2 = dense_matrix(handle, handle.grid)
    assert np.max(np.abs(M - M2)) < 1e-12


def test_average_operator_trivial_cases():
    g = GridSpec(1, 2)

    def zero_builder(om):
        return np.zeros((4, 4))
    zero_builder.grid = g
    m, se, stats = average_operator(zero_builder, 10, 3)
    assert np.all(m == 0) and np.all(se == 0)

    fixed = np.arange(16.0).reshape(4, 4)

    def fixed_builder(om):
        return fixed
    fixed_builder.grid = g
    m, se, stats = average_operator(fixed_builder, 10, 3)
    assert np.max(np.abs(m - fixed)) == 0.0
    assert np.max(se) == 0.0
    assert stats["used"] == 10 and stats["skipped"] == 0


def test_average_operator_linearity():
    g = GridSpec(1, 2)
    rng = np.random.default_rng(0)
    A = rng.standard_normal((4, 4))
    B = rng.standard_normal((4, 4))

    def build_a(om):
        return A * om.offsets[0][0]
    def build_b(om):
        return B * om.offsets[1][0]
    def build_sum(om):
        return 2.0 * A * om.offsets[0][0] + B * om.offsets[1][0]
    for b in (build_a, build_b, build_sum):
        b.grid = g
    ma, _, _ = average_operator(build_a, 60, 5)
    mb, _, _ = average_operator(build_b, 60, 5)
    ms, _, _ = average_operator(build_sum, 60, 5)
    assert np.max(np.abs(ms - (2.0 * ma + mb))) < 1e-12


def test_average_operator_skips_failures():
    g = GridSpec(1, 2)
    calls = {"n": 0}

    def flaky(om):
        calls["n"] += 1
        if calls["n"] % 3 == 0:
            raise RuntimeError("boom")
        return np.eye(4)
    flaky.grid = g
    m, se, stats = average_operator(flaky, 9, 1)
    assert stats["skipped"] == 3 and stats["used"] == 6
    assert np.max(np.abs(m - np.eye(4))) == 0.0


def test_toeplitz_deviation_is_linear_and_zero_on_circulant():
    n = 8
    col = np.arange(n, dtype=float)
    circ = np.array([[col[(r - c) % n] for c in range(n)] for r in range(n)])
    assert np.max(np.abs(toeplitz_deviation(circ))) < 1e-13
    A = np.random.default_rng(3).standard_normal((n, n))
    B = np.random.default_rng(4).standard_normal((n, n))
    lhs = toeplitz_deviation(2.0 * A + B)
    rhs = 2.0 * toeplitz_deviation(A) + toeplitz_deviation(B)
    assert np.max(np.abs(lhs - rhs)) < 1e-12


def test_bonferroni_threshold_monotone():
    assert _bonferroni_z(1) < _bonferroni_z(100) < _bonferroni_z(10000) < 6.0


def test_representation_demo_small():
    # reduced sample count keeps the test quick; statistics still separate the
    # averaged matrix (noise-level deviations) from a single grid
    rep = mc_representation_demo(GridSpec(1, 4), samples=800, rng_seed=11)
    assert rep["toeplitz"]["pass"]
    assert rep["antisymmetry"]["pass"]
    assert rep["single_omega_not_toeplitz"]
    assert rep["single_omega_max_dev"] > 10 * rep["averaged_max_dev"]


def test_single_omega_matrix_not_toeplitz():
    builder = hilbert_pattern_builder(GridSpec(1, 5))
    M = builder(sample_omega(GridSpec(1, 5), 2)).matrix()
    assert np.max(np.abs(toeplitz_deviation(M))) > 1e-2


def test_wrap_builder_transform():
    builder = hilbert_pattern_builder(GridSpec(1, 4))
    sym = wrap_builder(builder, lambda M: M + M.T)
    om = sample_omega(GridSpec(1, 4), 6)
    direct = builder(om).matrix()
    assert np.max(np.abs(sym(om) - (direct + direct.T))) < 1e-14


def test_bound_study_report(rng):
    rep = commutator_bound_study(1.0, 2, 2, trials=2, rng_seed=13,
                                 grid=GridSpec(1, 5))
    assert rep["bound_ok"]
    assert len(rep["reports"]) == 9
    assert rep["max_ratio"] > 0
    # constant-symbol commutators measure zero
    from dyadlab import multiplication_commutator, random_shift, DyadicFunction
    g = GridSpec(1, 5)
    const = DyadicFunction(g, np.ones(g.n_samples))
    S = random_shift(g, 1, 1, rng)
    assert multiplication_commutator(const, S, random_function(g, rng)).norm() < 1e-13
