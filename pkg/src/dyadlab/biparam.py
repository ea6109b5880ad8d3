"""Tensor-product grids and bi-parameter operators.

Functions of two variables are sample matrices (variable 1 slow). Per-variable
Haar transforms act along one axis with the other axis passive, so the full
transform is the composition in either order.

The operator family combines one "atom" per variable: a B_k-type diagonal
paraproduct atom or a P-type cube/subcube atom (possibly adjoint). This
realizes B_{k,l}, BP_k, PB_l, PP, the partial adjoints PP_1 / PP_2, and the
full adjoint, all evaluated in coefficient space with per-level contractions
and strict-subcube accumulation matrices.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from .grids import GridMismatchError, GridSpec, grid_index
from .haar import (DyadicFunction, fold_noncancellative, forward_stacked,
                   inverse_stacked, scaling_levels)
from .paraproducts import strict_matrix, symbol_stacked

_MAGIC_2P = b"DYF2"


@dataclass(frozen=True)
class ProductGrid:
    grid1: GridSpec
    grid2: GridSpec

    @property
    def shape(self) -> tuple:
        return (self.grid1.n_samples, self.grid2.n_samples)

    def swap(self) -> "ProductGrid":
        return ProductGrid(self.grid2, self.grid1)


@dataclass(frozen=True)
class ProductFunction:
    """Function on torus1 x torus2 sampled on the finest rectangles."""

    pgrid: ProductGrid
    samples: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=float).reshape(self.pgrid.shape)
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    @property
    def cell_volume(self) -> float:
        return self.pgrid.grid1.cell_volume * self.pgrid.grid2.cell_volume

    def norm(self) -> float:
        return float(np.sqrt(np.sum(self.samples ** 2) * self.cell_volume))

    def mean(self) -> float:
        return float(np.mean(self.samples))

    def transpose(self) -> "ProductFunction":
        return ProductFunction(self.pgrid.swap(), self.samples.T)

    def __add__(self, other):
        self._check(other)
        return ProductFunction(self.pgrid, self.samples + other.samples)

    def __sub__(self, other):
        self._check(other)
        return ProductFunction(self.pgrid, self.samples - other.samples)

    def __mul__(self, scalar):
        return ProductFunction(self.pgrid, self.samples * float(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return ProductFunction(self.pgrid, -self.samples)

    def _check(self, other):
        if not isinstance(other, ProductFunction) or other.pgrid != self.pgrid:
            raise GridMismatchError("operands live on different product grids")

    def to_json(self) -> str:
        g1, g2 = self.pgrid.grid1, self.pgrid.grid2
        return json.dumps({"d1": g1.d, "N1": g1.N, "d2": g2.d, "N2": g2.N,
                           "samples": self.samples.reshape(-1).tolist()})

    @classmethod
    def from_json(cls, text: str) -> "ProductFunction":
        obj = json.loads(text)
        pg = ProductGrid(GridSpec(int(obj["d1"]), int(obj["N1"])),
                         GridSpec(int(obj["d2"]), int(obj["N2"])))
        return cls(pg, np.asarray(obj["samples"], dtype=float))

    def to_bytes(self) -> bytes:
        """20-byte header (magic DYF2, u32 d1,N1,d2,N2) + LE float64, var 1 slow."""
        g1, g2 = self.pgrid.grid1, self.pgrid.grid2
        if g1.omega is not None or g2.omega is not None:
            raise ValueError("binary format covers standard grids only")
        header = _MAGIC_2P + struct.pack("<IIII", g1.d, g1.N, g2.d, g2.N)
        return header + self.samples.astype("<f8").tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "ProductFunction":
        if data[:4] != _MAGIC_2P:
            raise ValueError("bad magic, expected DYF2")
        d1, N1, d2, N2 = struct.unpack("<IIII", data[4:20])
        pg = ProductGrid(GridSpec(d1, N1), GridSpec(d2, N2))
        return cls(pg, np.frombuffer(data[20:], dtype="<f8").copy())


def tensor_function(f1: DyadicFunction, f2: DyadicFunction) -> ProductFunction:
    pg = ProductGrid(f1.grid, f2.grid)
    return ProductFunction(pg, np.outer(f1.samples, f2.samples))


def random_product_function(pg: ProductGrid, rng) -> ProductFunction:
    return ProductFunction(pg, rng.standard_normal(pg.shape))


# -- transforms --------------------------------------------------------------


def forward2(pf: ProductFunction) -> np.ndarray:
    """Full stacked coefficient matrix (variable 1 rows, variable 2 columns)."""
    a = forward_stacked(pf.pgrid.grid1, pf.samples)
    return forward_stacked(pf.pgrid.grid2, a.T).T


def inverse2(pg: ProductGrid, stacked: np.ndarray) -> ProductFunction:
    a = inverse_stacked(pg.grid2, stacked.T).T
    return ProductFunction(pg, inverse_stacked(pg.grid1, a))


def forward_var(pf_samples: np.ndarray, grid: GridSpec, var: int) -> np.ndarray:
    """Partial Haar transform in one variable only."""
    if var == 1:
        return forward_stacked(grid, pf_samples)
    return forward_stacked(grid, pf_samples.T).T


def inner_product2(f: ProductFunction, g: ProductFunction) -> float:
    f._check(g)
    return float(np.sum(f.samples * g.samples) * f.cell_volume)


def pointwise_multiply2(f: ProductFunction, g: ProductFunction) -> ProductFunction:
    f._check(g)
    return ProductFunction(f.pgrid, f.samples * g.samples)


# -- variable-wise shift application and iterated commutators ----------------


def apply_in_variable(S, var: int, f: ProductFunction) -> ProductFunction:
    """Apply a one-parameter operator along every slice of the passive variable."""
    pg = f.pgrid
    grid = pg.grid1 if var == 1 else pg.grid2
    if S.grid != grid:
        raise GridMismatchError(f"operator grid does not match variable {var}")
    if var == 1:
        y = S.apply_stacked(forward_stacked(grid, f.samples))
        return ProductFunction(pg, inverse_stacked(grid, y))
    y = S.apply_stacked(forward_stacked(grid, f.samples.T))
    return ProductFunction(pg, inverse_stacked(grid, y).T)


def iterated_commutator(b: ProductFunction, S1, S2, f: ProductFunction) -> ProductFunction:
    """[[M_b, S1], S2] f expanded into the four signed compositions."""
    b._check(f)

    def bracket1(g):
        return pointwise_multiply2(b, apply_in_variable(S1, 1, g)) - \
            apply_in_variable(S1, 1, pointwise_multiply2(b, g))

    return bracket1(apply_in_variable(S2, 2, f)) - \
        apply_in_variable(S2, 2, bracket1(f))


# -- atom machinery -----------------------------------------------------------


@dataclass(frozen=True)
class BAtom:
    """One-variable B_k atom: diagonal in the cube, b paired at the ancestor."""
    k: int
    sig_b: int
    sig_in: int
    sig_out: int
    beta: tuple = None  # per-level arrays (index = level) or None for all +1

    def beta_level(self, grid: GridSpec, level: int):
        if self.beta is None:
            return 1.0
        return self.beta[level]


@dataclass(frozen=True)
class PAtom:
    """One-variable P atom; ``adjoint`` swaps input and output roles."""
    adjoint: bool = False


def _sig_rows(g: GridSpec, lvl: int, sig_int: int) -> np.ndarray:
    return grid_index(g).sig_rows(lvl, sig_int)


class _BiView:
    """Cached input blocks of a stacked matrix, noncancellative pairings included."""

    def __init__(self, pg: ProductGrid, X: np.ndarray):
        self.pg = pg
        self.X = X
        self._sc1 = None
        self._sc2 = None
        self._sc12 = {}

    def sc1(self):
        if self._sc1 is None:
            self._sc1 = scaling_levels(self.pg.grid1, self.X)
        return self._sc1

    def sc2(self):
        if self._sc2 is None:
            self._sc2 = scaling_levels(self.pg.grid2, self.X.T)
        return self._sc2

    def sc12(self, l1: int):
        if l1 not in self._sc12:
            self._sc12[l1] = scaling_levels(self.pg.grid2, self.sc1()[l1].T)
        return self._sc12[l1]

    def rows1(self, l1: int, s1: int) -> np.ndarray:
        """(n_cubes1(l1), n2tot) input block in variable 1, all var-2 columns."""
        g1 = self.pg.grid1
        if s1 == g1.noncanc_int:
            return self.sc1()[l1]
        return self.X[_sig_rows(g1, l1, s1), :]

    def block(self, l1: int, s1: int, l2: int, s2: int) -> np.ndarray:
        g1, g2 = self.pg.grid1, self.pg.grid2
        nc1 = s1 == g1.noncanc_int
        nc2 = s2 == g2.noncanc_int
        if not nc1 and not nc2:
            return self.X[np.ix_(_sig_rows(g1, l1, s1), _sig_rows(g2, l2, s2))]
        if nc1 and not nc2:
            return self.sc1()[l1][:, _sig_rows(g2, l2, s2)]
        if not nc1 and nc2:
            return self.sc2()[l2][:, _sig_rows(g1, l1, s1)].T
        return self.sc12(l1)[l2].T


class _Accum:
    """Stacked output accumulator that folds noncancellative-signature pieces."""

    def __init__(self, pg: ProductGrid):
        self.pg = pg
        self.out = np.zeros(pg.shape)
        self.nc1 = {}
        self.nc2 = {}
        self.nc12 = {}

    def add(self, l1, s1, l2, s2, C):
        g1, g2 = self.pg.grid1, self.pg.grid2
        nc1 = s1 == g1.noncanc_int
        nc2 = s2 == g2.noncanc_int
        if not nc1 and not nc2:
            self.out[np.ix_(_sig_rows(g1, l1, s1), _sig_rows(g2, l2, s2))] += C
        elif nc1 and not nc2:
            buf = self.nc1.setdefault(l1, np.zeros((g1.n_cubes(l1), g2.n_samples)))
            buf[:, _sig_rows(g2, l2, s2)] += C
        elif not nc1 and nc2:
            buf = self.nc2.setdefault(l2, np.zeros((g2.n_cubes(l2), g1.n_samples)))
            buf[:, _sig_rows(g1, l1, s1)] += C.T
        else:
            buf = self.nc12.setdefault((l1, l2),
                                       np.zeros((g1.n_cubes(l1), g2.n_cubes(l2))))
            buf += C

    def add_rows1(self, l1, s1, C):
        """Add a full-width var-2 contribution (already in stacked columns)."""
        g1 = self.pg.grid1
        if s1 == g1.noncanc_int:
            buf = self.nc1.setdefault(l1, np.zeros((g1.n_cubes(l1),
                                                    self.pg.grid2.n_samples)))
            buf += C
        else:
            self.out[_sig_rows(g1, l1, s1), :] += C

    def total(self) -> np.ndarray:
        g1, g2 = self.pg.grid1, self.pg.grid2
        for (l1, l2), C in self.nc12.items():
            folded = fold_noncancellative(g2, {l2: C.T}).T
            buf = self.nc1.setdefault(l1, np.zeros((g1.n_cubes(l1), g2.n_samples)))
            buf += folded
        out = self.out
        for l2, buf in self.nc2.items():
            out += fold_noncancellative(g2, {l2: buf}).T
        for l1, buf in self.nc1.items():
            out += fold_noncancellative(g1, {l1: buf})
        return out


def pair_apply(pg: ProductGrid, bC: np.ndarray, X: np.ndarray, atom1, atom2,
               sym1: np.ndarray = None, sym2: np.ndarray = None,
               sym12: np.ndarray = None, view: "_BiView" = None,
               out_acc: "_Accum" = None, weight: float = 1.0,
               b_cache: dict = None) -> np.ndarray:
    """Evaluate the tensor of two one-variable atoms on stacked matrices.

    ``sym1``/``sym2`` are stacked symbol coefficients for P atoms acting in
    that variable; ``sym12`` is the stacked matrix of a product symbol when
    both atoms are P-type. With ``out_acc`` the weighted contribution is
    accumulated in place (shared across terms) and None is returned;
    ``b_cache`` memoizes ancestor gathers of the fixed symbol coefficients.
    """
    if view is None:
        view = _BiView(pg, X)
    acc = out_acc if out_acc is not None else _Accum(pg)
    if isinstance(atom1, PAtom) and isinstance(atom2, PAtom):
        acc.out += weight * _pp_pair(pg, bC, X, atom1, atom2, sym12)
    elif isinstance(atom1, PAtom):
        # mirror: swap variables, reuse the (B, P) kernel, transpose back
        full = pair_apply(pg.swap(), bC.T, X.T, atom2, atom1,
                          sym1=sym2, sym2=sym1, sym12=None, view=None)
        acc.out += weight * full.T
    elif isinstance(atom2, PAtom):
        _bp_pair(pg, bC, X, atom1, atom2, sym2, view, acc, weight, b_cache)
    else:
        _bb_pair(pg, bC, X, atom1, atom2, view, acc, weight, b_cache)
    if out_acc is None:
        return acc.total()
    return None


def _b_gather(pg, bC, a1, a2, l1, l2, b_cache):
    key = ("bb", a1.k, a1.sig_b, a2.k, a2.sig_b, l1, l2)
    if b_cache is not None and key in b_cache:
        return b_cache[key]
    g1, g2 = pg.grid1, pg.grid2
    i1, i2 = grid_index(g1), grid_index(g2)
    rows = i1.sig_rows(l1 - a1.k, a1.sig_b)[i1.ancestor_flat(l1, a1.k)]
    cols = i2.sig_rows(l2 - a2.k, a2.sig_b)[i2.ancestor_flat(l2, a2.k)]
    out = bC[np.ix_(rows, cols)]
    if b_cache is not None:
        b_cache[key] = out
    return out


def _bb_pair(pg, bC, X, a1: BAtom, a2: BAtom, view: _BiView,
             acc: "_Accum", weight: float, b_cache: dict) -> None:
    g1, g2 = pg.grid1, pg.grid2
    for l1 in range(a1.k, g1.N):
        c1 = np.asarray(a1.beta_level(g1, l1)) \
            * (weight * 2.0 ** ((l1 - a1.k) * g1.d / 2.0))
        for l2 in range(a2.k, g2.N):
            c2 = np.asarray(a2.beta_level(g2, l2)) * 2.0 ** ((l2 - a2.k) * g2.d / 2.0)
            Bg = _b_gather(pg, bC, a1, a2, l1, l2, b_cache)
            Xin = view.block(l1, a1.sig_in, l2, a2.sig_in)
            C = (c1 * (Bg * Xin).T).T * c2
            acc.add(l1, a1.sig_out, l2, a2.sig_out, C)


def _bp_pair(pg, bC, X, a1: BAtom, p2: PAtom, sym2, view: _BiView,
             acc: "_Accum", weight: float, b_cache: dict) -> None:
    if sym2 is None:
        raise ValueError("P atom in variable 2 needs its symbol")
    g1, g2 = pg.grid1, pg.grid2
    i1 = grid_index(g1)
    A2 = strict_matrix(g2)
    for l1 in range(a1.k, g1.N):
        key = ("bp", a1.k, a1.sig_b, l1)
        if b_cache is not None and key in b_cache:
            Bg = b_cache[key]
        else:
            rows_b1 = i1.sig_rows(l1 - a1.k, a1.sig_b)[i1.ancestor_flat(l1, a1.k)]
            Bg = bC[rows_b1, :]
            if b_cache is not None:
                b_cache[key] = Bg
        c1 = np.asarray(a1.beta_level(g1, l1)) \
            * (weight * 2.0 ** ((l1 - a1.k) * g1.d / 2.0))
        Xin = view.rows1(l1, a1.sig_in)
        if not p2.adjoint:
            W = Bg * Xin
            W[:, 0] = 0.0
            C = (W @ A2.T) * sym2[None, :]
        else:
            D = (Xin * sym2[None, :]) @ A2
            C = Bg * D
        acc.add_rows1(l1, a1.sig_out, (C.T * c1).T)


def _pp_pair(pg, bC, X, p1: PAtom, p2: PAtom, sym12) -> np.ndarray:
    if sym12 is None:
        raise ValueError("P x P atoms need the product symbol")
    A1 = strict_matrix(pg.grid1)
    A2 = strict_matrix(pg.grid2)
    if not p1.adjoint and not p2.adjoint:
        W = bC * X
        return sym12 * (A1 @ W @ A2.T)
    if p1.adjoint and p2.adjoint:
        W = sym12 * X
        return bC * (A1.T @ W @ A2)
    if p1.adjoint and not p2.adjoint:
        # out[(I1),(J2)] = sum A1[J1,I1] A2[J2,I2] a[J1,J2] b[I1,I2] X[J1,I2]
        return np.einsum("ji,lk,jl,ik,jk->il", A1, A2, sym12, bC, X, optimize=True)
    # out[(J1),(I2)] = sum A1[J1,I1] A2[J2,I2] a[J1,J2] b[I1,I2] X[I1,J2]
    return np.einsum("ji,lk,jl,ik,il->jk", A1, A2, sym12, bC, X, optimize=True)


# -- public bi-parameter operator surface -------------------------------------


@dataclass(frozen=True)
class BiparamOperatorSpec:
    """Parameters of one bi-parameter operator of kind Bkl/PP/PP1/PP2/BPk/PBl.

    Signature fields are {0,1}^d tuples per variable; ``None`` means the
    all-zero (cancellative) signature. Symbols: ``a`` (ProductFunction) for
    the PP family, ``a2``/``a1`` (DyadicFunction) for BPk/PBl. ``p_adjoint``
    tags the adjoint variant of the P factor in BPk/PBl.
    """

    kind: str
    k: int = 0
    l: int = 0
    sig_b1: tuple = None
    sig_in1: tuple = None
    sig_out1: tuple = None
    sig_b2: tuple = None
    sig_in2: tuple = None
    sig_out2: tuple = None
    beta1: object = None
    beta2: object = None
    a: "ProductFunction" = None
    a1: DyadicFunction = None
    a2: DyadicFunction = None
    p_adjoint: bool = False

    def validate(self, pg: ProductGrid):
        if self.kind not in ("Bkl", "PP", "PP1", "PP2", "PPstar", "BPk", "PBl"):
            raise ValueError(f"unknown bi-parameter kind {self.kind}")
        if self.kind in ("PP", "PP1", "PP2", "PPstar") and self.a is None:
            raise ValueError(f"{self.kind} needs the product symbol a")
        if self.kind == "BPk" and self.a2 is None:
            raise ValueError("BPk needs the variable-2 symbol a2")
        if self.kind == "PBl" and self.a1 is None:
            raise ValueError("PBl needs the variable-1 symbol a1")


def _sig_or_zero(g: GridSpec, sig) -> int:
    if sig is None:
        return 0
    return g.sig_int(tuple(sig))


def _beta_levels(g: GridSpec, beta, kmin: int):
    if beta is None:
        return None
    if isinstance(beta, dict):
        out = []
        for lvl in range(g.N):
            arr = np.ones(g.n_cubes(lvl))
            for cube, val in beta.items():
                if cube.level == lvl:
                    arr[g.flat_pos(cube.pos, lvl)] = val
            out.append(arr)
        return tuple(out)
    return tuple(np.asarray(b, dtype=float) for b in beta)


def _check_atom_sigs(g: GridSpec, k: int, sb: int, si: int, so: int, what: str):
    non = g.noncanc_int
    if sb == non:
        raise ValueError(f"{what}: b-side signature must be cancellative")
    n_non = (si == non) + (so == non)
    if n_non > 1 or (n_non and k != 0):
        raise ValueError(f"{what}: at most one noncancellative signature, only at depth 0")


def apply_biparam(spec: BiparamOperatorSpec, b: ProductFunction,
                  f: ProductFunction) -> ProductFunction:
    """Literal evaluation of the defining Haar sums of the requested kind."""
    pg = f.pgrid
    if b.pgrid != pg:
        raise GridMismatchError("b and f live on different product grids")
    spec.validate(pg)
    g1, g2 = pg.grid1, pg.grid2
    bC = forward2(b)
    X = forward2(f)
    sym1 = sym2 = sym12 = None
    if spec.kind == "Bkl":
        sb1, si1, so1 = (_sig_or_zero(g1, spec.sig_b1), _sig_or_zero(g1, spec.sig_in1),
                         _sig_or_zero(g1, spec.sig_out1))
        sb2, si2, so2 = (_sig_or_zero(g2, spec.sig_b2), _sig_or_zero(g2, spec.sig_in2),
                         _sig_or_zero(g2, spec.sig_out2))
        _check_atom_sigs(g1, spec.k, sb1, si1, so1, "variable 1")
        _check_atom_sigs(g2, spec.l, sb2, si2, so2, "variable 2")
        a1 = BAtom(spec.k, sb1, si1, so1, _beta_levels(g1, spec.beta1, spec.k))
        a2 = BAtom(spec.l, sb2, si2, so2, _beta_levels(g2, spec.beta2, spec.l))
    elif spec.kind == "BPk":
        sb1, si1, so1 = (_sig_or_zero(g1, spec.sig_b1), _sig_or_zero(g1, spec.sig_in1),
                         _sig_or_zero(g1, spec.sig_out1))
        _check_atom_sigs(g1, spec.k, sb1, si1, so1, "variable 1")
        a1 = BAtom(spec.k, sb1, si1, so1, _beta_levels(g1, spec.beta1, spec.k))
        a2 = PAtom(adjoint=spec.p_adjoint)
        sym2 = symbol_stacked(spec.a2)
    elif spec.kind == "PBl":
        sb2, si2, so2 = (_sig_or_zero(g2, spec.sig_b2), _sig_or_zero(g2, spec.sig_in2),
                         _sig_or_zero(g2, spec.sig_out2))
        _check_atom_sigs(g2, spec.l, sb2, si2, so2, "variable 2")
        a1 = PAtom(adjoint=spec.p_adjoint)
        a2 = BAtom(spec.l, sb2, si2, so2, _beta_levels(g2, spec.beta2, spec.l))
        sym1 = symbol_stacked(spec.a1)
    else:
        flags = {"PP": (False, False), "PP1": (True, False),
                 "PP2": (False, True), "PPstar": (True, True)}[spec.kind]
        a1, a2 = PAtom(flags[0]), PAtom(flags[1])
        sym12 = forward2(spec.a)
        sym12 = sym12.copy()
        sym12[0, :] = 0.0
        sym12[:, 0] = 0.0
    out = pair_apply(pg, bC, X, a1, a2, sym1=sym1, sym2=sym2, sym12=sym12)
    return inverse2(pg, out)
