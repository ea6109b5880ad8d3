"""Dyadic shift operators, multiplication commutators, operator-norm estimation.

A shift of parameters (i, j) moves Haar coefficients from cubes I at depth i
below K to cubes J at depth j below K, one block per K, with entries bounded
by |I|**(1/2) |J|**(1/2) / |K|. Blocks are stored per K-level as dense arrays
over (K, I-slot, I-signature, J-slot, J-signature); application runs in
coefficient space (transform in, per-level contractions, transform out).

Each K determines its own block, so after an additional per-block Frobenius
normalization every cancellative shift is an exact L2 contraction.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .grids import (DepthError, GridMismatchError, GridSpec, WrongKindError,
                    grid_index)
from .haar import (DyadicFunction, forward_stacked, fold_noncancellative,
                   inverse_stacked, pointwise_multiply, scaling_levels)

CANCELLATIVE = "cancellative"
NONCANCELLATIVE = "noncancellative"
ANALYSIS = "analysis"
SYNTHESIS = "synthesis"


def max_k_level(grid: GridSpec, i: int, j: int) -> int:
    """Deepest admissible K-level: both Haar slots must stay cancellative."""
    return grid.N - 1 - max(i, j)


@dataclass(frozen=True)
class ShiftOperator:
    """Dyadic shift S^(i,j); cancellative, or a symbol-driven paraproduct.

    Cancellative: ``blocks[kappa]`` has shape
    (n_cubes(kappa), 2**(d*i), n_sig, 2**(d*j), n_sig).

    Noncancellative (i = j = 0 only): built from a symbol ``a`` of dyadic BMO
    norm <= 1 via a_I = <a, h_I> |I|**(-1/2). Orientation ``analysis`` pairs
    the input against noncancellative Haars (f -> sum a_I <f,h_I^1> h_I);
    ``synthesis`` is its adjoint.
    """

    grid: GridSpec
    i: int
    j: int
    kind: str
    blocks: tuple = None
    symbol: DyadicFunction = None
    orientation: str = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind == CANCELLATIVE:
            if self.blocks is None:
                raise ValueError("cancellative shift needs coefficient blocks")
        elif self.kind == NONCANCELLATIVE:
            if self.i != 0 or self.j != 0:
                raise WrongKindError("noncancellative shifts require i = j = 0")
            if self.orientation not in (ANALYSIS, SYNTHESIS):
                raise WrongKindError(f"bad orientation {self.orientation}")
            if self.symbol is None or self.symbol.grid != self.grid:
                raise GridMismatchError("symbol must live on the operator grid")
        else:
            raise WrongKindError(f"unknown shift kind {self.kind}")

    # -- construction helpers ---------------------------------------------

    @property
    def cancellative(self) -> bool:
        return self.kind == CANCELLATIVE

    def symbol_coefficients(self) -> list:
        """Per-level arrays a_I = <a,h_I^sig> |I|**(-1/2), shape (n_cubes, n_sig)."""
        g = self.grid
        sc = forward_stacked(g, self.symbol.samples)
        out = []
        for lvl in range(g.N):
            out.append(g.level_block(sc, lvl) * 2.0 ** (lvl * g.d / 2.0))
        return out

    # -- application -------------------------------------------------------

    def apply_stacked(self, x: np.ndarray) -> np.ndarray:
        """Apply to a stacked coefficient array (n_samples, *passive)."""
        g = self.grid
        out = np.zeros_like(x)
        if self.cancellative:
            idx = grid_index(g)
            for kappa, block in enumerate(self.blocks):
                if block is None:
                    continue
                gi = idx.desc_groups(kappa, self.i)
                gj = idx.desc_groups(kappa, self.j)
                fin = g.level_block(x, kappa + self.i)[gi]
                res = np.einsum("kabcd,kab...->kcd...", block, fin)
                g.level_block(out, kappa + self.j)[gj] += res
        else:
            acoef = self.symbol_coefficients()
            if self.orientation == ANALYSIS:
                scal = scaling_levels(g, x)
                for lvl in range(g.N):
                    blk = g.level_block(out, lvl)
                    a = acoef[lvl].reshape(acoef[lvl].shape + (1,) * (x.ndim - 1))
                    blk += a * scal[lvl][:, None]
            else:
                contribs = {}
                for lvl in range(g.N):
                    fin = g.level_block(x, lvl)
                    a = acoef[lvl].reshape(acoef[lvl].shape + (1,) * (x.ndim - 1))
                    contribs[lvl] = (a * fin).sum(axis=1)
                out += fold_noncancellative(g, contribs)
        return out

    def adjoint_stacked(self, x: np.ndarray) -> np.ndarray:
        return self.adjoint().apply_stacked(x)

    def apply(self, f: DyadicFunction) -> DyadicFunction:
        if f.grid != self.grid:
            raise GridMismatchError("function grid does not match operator grid")
        y = self.apply_stacked(forward_stacked(self.grid, f.samples))
        return DyadicFunction(self.grid, inverse_stacked(self.grid, y))

    def __call__(self, f: DyadicFunction) -> DyadicFunction:
        return self.apply(f)

    def adjoint(self) -> "ShiftOperator":
        if self.cancellative:
            blocks = tuple(None if b is None else
                           np.ascontiguousarray(b.transpose(0, 3, 4, 1, 2))
                           for b in self.blocks)
            return ShiftOperator(self.grid, self.j, self.i, CANCELLATIVE,
                                 blocks=blocks, meta=dict(self.meta))
        flip = SYNTHESIS if self.orientation == ANALYSIS else ANALYSIS
        return ShiftOperator(self.grid, 0, 0, NONCANCELLATIVE, symbol=self.symbol,
                             orientation=flip, meta=dict(self.meta))

    def as_handle(self) -> "LinearOperatorHandle":
        params = {"i": self.i, "j": self.j, "kind": self.kind}
        if not self.cancellative:
            params["orientation"] = self.orientation
        return LinearOperatorHandle(self.grid, self.apply, adjoint=self.adjoint().apply,
                                    kind="shift", params=params)

    def coefficient_count(self) -> int:
        if not self.cancellative:
            return sum(int(np.count_nonzero(np.ones_like(a))) for a in self.symbol_coefficients())
        return sum(0 if b is None else b.size for b in self.blocks)

    # -- serialization -----------------------------------------------------

    def to_json(self) -> str:
        g = self.grid
        obj = {"grid": {"d": g.d, "N": g.N}, "i": self.i, "j": self.j, "kind": self.kind}
        if g.omega is not None:
            obj["grid"]["omega"] = [list(level) for level in g.omega]
        if self.cancellative:
            idx = grid_index(g)
            entries = []
            for kappa, block in enumerate(self.blocks):
                if block is None:
                    continue
                gi = idx.desc_groups(kappa, self.i)
                gj = idx.desc_groups(kappa, self.j)
                nz = np.argwhere(block != 0.0)
                for (kk, a_slot, asig, b_slot, bsig) in nz:
                    entries.append({
                        "K": {"level": kappa, "pos": list(g.pos_from_flat(int(kk), kappa))},
                        "I": {"level": kappa + self.i,
                              "pos": list(g.pos_from_flat(int(gi[kk, a_slot]), kappa + self.i)),
                              "sig": list(g.int_sig(int(asig)))},
                        "J": {"level": kappa + self.j,
                              "pos": list(g.pos_from_flat(int(gj[kk, b_slot]), kappa + self.j)),
                              "sig": list(g.int_sig(int(bsig)))},
                        "a": float(block[kk, a_slot, asig, b_slot, bsig]),
                    })
            obj["entries"] = entries
        else:
            obj["orientation"] = self.orientation
            obj["symbol"] = json.loads(self.symbol.to_json())
        return json.dumps(obj)

    @classmethod
    def from_json(cls, text: str) -> "ShiftOperator":
        obj = json.loads(text)
        gspec = obj["grid"]
        omega = tuple(tuple(l) for l in gspec["omega"]) if "omega" in gspec else None
        grid = GridSpec(int(gspec["d"]), int(gspec["N"]), omega)
        i, j = int(obj["i"]), int(obj["j"])
        if obj["kind"] == NONCANCELLATIVE:
            symbol = DyadicFunction.from_json(json.dumps(obj["symbol"]))
            return cls(grid, i, j, NONCANCELLATIVE, symbol=symbol,
                       orientation=obj["orientation"])
        blocks = _empty_blocks(grid, i, j)
        idx = grid_index(grid)
        rev = {}
        for kappa in range(len(blocks)):
            gi = idx.desc_groups(kappa, i)
            gj = idx.desc_groups(kappa, j)
            rev[kappa] = ({int(v): (k, s) for (k, s), v in np.ndenumerate(gi)},
                          {int(v): (k, s) for (k, s), v in np.ndenumerate(gj)})
        for e in obj["entries"]:
            kappa = int(e["K"]["level"])
            kk = grid.flat_pos(e["K"]["pos"], kappa)
            fi = grid.flat_pos(e["I"]["pos"], kappa + i)
            fj = grid.flat_pos(e["J"]["pos"], kappa + j)
            ri, rj = rev[kappa]
            k1, a_slot = ri[fi]
            k2, b_slot = rj[fj]
            assert k1 == kk and k2 == kk
            blocks[kappa][kk, a_slot, grid.sig_int(e["I"]["sig"]),
                          b_slot, grid.sig_int(e["J"]["sig"])] = float(e["a"])
        return cls(grid, i, j, CANCELLATIVE,
                   blocks=tuple(b for b in blocks))


def _empty_blocks(grid: GridSpec, i: int, j: int) -> list:
    kmax = max_k_level(grid, i, j)
    if kmax < 0:
        raise DepthError(f"shift parameters ({i},{j}) too deep for N={grid.N}")
    out = []
    for kappa in range(kmax + 1):
        out.append(np.zeros((grid.n_cubes(kappa), 1 << (grid.d * i), grid.n_sig,
                             1 << (grid.d * j), grid.n_sig)))
    return out


def random_shift(grid: GridSpec, i: int, j: int, rng_seed, kind: str = CANCELLATIVE,
                 orientation: str = ANALYSIS) -> ShiftOperator:
    """Random admissible shift; deterministic given the seed.

    Cancellative entries are uniform in [-bound, bound] with
    bound = |I|**(1/2) |J|**(1/2) / |K|, then each K-block is divided by its
    Frobenius norm when that norm exceeds 1 (in one dimension it never does),
    so the operator is always an L2 contraction. Noncancellative shifts draw
    a Gaussian symbol rescaled to dyadic BMO norm exactly 1.
    """
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else \
        np.random.default_rng(rng_seed)
    if kind == NONCANCELLATIVE:
        if i != 0 or j != 0:
            raise WrongKindError("noncancellative shifts require i = j = 0")
        from .norms import dyadic_bmo_norm
        raw = DyadicFunction(grid, rng.standard_normal(grid.n_samples))
        b = dyadic_bmo_norm(raw)
        symbol = raw * (1.0 / b)
        return ShiftOperator(grid, 0, 0, NONCANCELLATIVE, symbol=symbol,
                             orientation=orientation,
                             meta={"symbol_scale": 1.0 / b})
    blocks = _empty_blocks(grid, i, j)
    bound = 2.0 ** (-grid.d * (i + j) / 2.0)
    for kappa, block in enumerate(blocks):
        draw = rng.uniform(-bound, bound, size=block.shape)
        fro = np.sqrt((draw ** 2).sum(axis=(1, 2, 3, 4), keepdims=True))
        draw /= np.maximum(fro, 1.0)
        block[...] = draw
    return ShiftOperator(grid, i, j, CANCELLATIVE, blocks=tuple(blocks))


def expected_coefficient_count(grid: GridSpec, i: int, j: int) -> int:
    """Entry count of a fully populated cancellative shift."""
    kmax = max_k_level(grid, i, j)
    per_k = (1 << (grid.d * i)) * grid.n_sig * (1 << (grid.d * j)) * grid.n_sig
    return sum(grid.n_cubes(kappa) * per_k for kappa in range(kmax + 1))


def apply_shift(S: ShiftOperator, f: DyadicFunction) -> DyadicFunction:
    """Haar-coefficient-space evaluation of S f."""
    return S.apply(f)


def noncancellative_shift(grid: GridSpec, symbol: DyadicFunction,
                          orientation: str = ANALYSIS) -> ShiftOperator:
    """Paraproduct shift with an explicit symbol (dyadic BMO norm <= 1)."""
    from .norms import dyadic_bmo_norm
    b = dyadic_bmo_norm(symbol)
    if b > 1.0 + 1e-9:
        raise ValueError(f"symbol BMO norm {b} exceeds 1")
    return ShiftOperator(grid, 0, 0, NONCANCELLATIVE, symbol=symbol,
                         orientation=orientation)


# ---------------------------------------------------------------------------
# Generic operator handles, commutators, power iteration.


@dataclass
class LinearOperatorHandle:
    """Opaque evaluator f -> Tf on a fixed grid, with optional adjoint/matrix."""

    grid: GridSpec
    apply: callable
    adjoint: callable = None
    matrix_fn: callable = None
    kind: str = "generic"
    params: dict = field(default_factory=dict)

    def __call__(self, f: DyadicFunction) -> DyadicFunction:
        return self.apply(f)

    def matrix(self) -> np.ndarray:
        """Dense sample-space matrix, assembled column by column if needed."""
        if self.matrix_fn is not None:
            return self.matrix_fn()
        n = self.grid.n_samples
        cols = []
        for k in range(n):
            e = np.zeros(n)
            e[k] = 1.0
            cols.append(self.apply(DyadicFunction(self.grid, e)).samples)
        return np.column_stack(cols)


def multiplication_commutator(b: DyadicFunction, T, f: DyadicFunction) -> DyadicFunction:
    """[M_b, T] f = b * (T f) - T(b * f); products exact on samples."""
    if b.grid != f.grid:
        raise GridMismatchError("b and f live on different grids")
    Tf = T(f) if callable(T) else T.apply(f)
    Tbf = T(pointwise_multiply(b, f)) if callable(T) else T.apply(pointwise_multiply(b, f))
    return pointwise_multiply(b, Tf) - Tbf


def commutator_handle(b: DyadicFunction, T) -> LinearOperatorHandle:
    return LinearOperatorHandle(b.grid, lambda f: multiplication_commutator(b, T, f),
                                kind="commutator")


@dataclass(frozen=True)
class PowerIterationResult:
    value: float
    iterations: int
    converged: bool
    rel_change: float


def power_iteration(T, iters: int = 500, tol: float = 1e-6,
                    rng_seed: int = 0) -> PowerIterationResult:
    """Top singular value of T via power iteration on T^T T."""
    grid = T.grid
    apply_ = T.apply if hasattr(T, "apply") else T
    if isinstance(T, ShiftOperator):
        adj_ = T.adjoint().apply
    else:
        adj = getattr(T, "adjoint", None)
        if adj is None:
            raise ValueError("power iteration needs an adjoint evaluator")
        adj_ = adj if callable(adj) else adj.apply
    rng = np.random.default_rng(rng_seed)
    x = rng.standard_normal(grid.n_samples)
    x /= np.linalg.norm(x)
    prev = 0.0
    rel = np.inf
    for it in range(1, iters + 1):
        v = apply_(DyadicFunction(grid, x))
        sigma = v.norm() / np.sqrt(np.sum(x ** 2) * grid.cell_volume)
        w = adj_(v)
        nw = np.linalg.norm(w.samples)
        if nw == 0.0 or sigma == 0.0:
            return PowerIterationResult(0.0, it, True, 0.0)
        x = w.samples / nw
        rel = abs(sigma - prev) / max(sigma, 1e-300)
        if rel < tol:
            return PowerIterationResult(float(sigma), it, True, float(rel))
        prev = sigma
    return PowerIterationResult(float(prev), iters, False, float(rel))


def operator_norm(T, iters: int = 500, tol: float = 1e-6, rng_seed: int = 0) -> float:
    """L2 -> L2 operator norm estimate; warns if power iteration stalls."""
    res = power_iteration(T, iters=iters, tol=tol, rng_seed=rng_seed)
    if not res.converged:
        warnings.warn(f"power iteration did not converge (rel change {res.rel_change:.2e}); "
                      "returning last iterate", RuntimeWarning)
    return res.value
