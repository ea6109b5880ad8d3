"""Exact finite decompositions of multiplication commutators with dyadic shifts.

For a cancellative shift S of parameters (i, j), the commutator [M_b, S]
equals a finite signed sum of paraproduct terms

    B_k(b, S f)  for 0 <= k <= j      and      S(B_k(b, f))  for 0 <= k <= i,

where the k = 0 terms carry one noncancellative signature (they absorb the
averages over ancestors, torus mean mode included) and the k >= 1 terms are
martingale transforms whose +-1 beta sequences are sampled Haar-product
constants. For a noncancellative shift the list uses B_0 terms together with
the cube/subcube operator P (analysis orientation) or its adjoint (synthesis
orientation). The bi-parameter decomposition is the product of the
per-variable constructions; its terms combine a one-variable atom per
variable with optional inner/outer shift compositions.

Everything here is exact linear algebra on the finite torus: the identity
``sum of terms == commutator`` holds to floating-point roundoff, which the
verification harness checks against independently evaluated commutators.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .grids import GridSpec, WrongKindError, grid_index
from .haar import (DyadicFunction, forward_stacked, inverse_stacked,
                   random_function, scaling_levels)
from .paraproducts import (BkOperator, bk_stacked, p_stacked, pstar_stacked,
                           symbol_stacked)
from .biparam import (BAtom, PAtom, ProductFunction, _Accum, _BiView,
                      forward2, inverse2, iterated_commutator, pair_apply,
                      random_product_function)
from .shifts import ANALYSIS, ShiftOperator, multiplication_commutator
from .norms import dyadic_bmo_norm, rect_bmo_norm


@dataclass(frozen=True)
class Term:
    """One summand of a decomposition.

    ``atom1``/``atom2`` are per-variable kernels (BAtom or PAtom); ``inner*``
    applies that variable's shift to the input first, ``outer*`` wraps it
    around the output. One-parameter terms use variable 1 only.
    """

    weight: float
    kind: str
    provenance: str
    atom1: object
    atom2: object = None
    inner1: bool = False
    outer1: bool = False
    inner2: bool = False
    outer2: bool = False

    def describe(self) -> dict:
        out = {"weight": self.weight, "kind": self.kind,
               "provenance": self.provenance}
        for slot, atom in (("1", self.atom1), ("2", self.atom2)):
            if atom is None:
                continue
            if isinstance(atom, BAtom):
                out[f"atom{slot}"] = {"type": "B", "k": atom.k, "sig_b": atom.sig_b,
                                      "sig_in": atom.sig_in, "sig_out": atom.sig_out}
            else:
                out[f"atom{slot}"] = {"type": "P", "adjoint": atom.adjoint}
        out["inner"] = [self.inner1, self.inner2]
        out["outer"] = [self.outer1, self.outer2]
        return out


@dataclass
class TermList:
    """Ordered decomposition terms bound to the symbol b and the shift(s)."""

    arity: int
    b: object
    shifts: tuple
    terms: list
    case: str
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.arity == 1:
            self._bc = forward_stacked(self.b.grid, self.b.samples)
        else:
            self._bc = forward2(self.b)

    @property
    def term_count(self) -> int:
        return len(self.terms)

    def drop(self, index: int) -> "TermList":
        """Copy with one term removed (harness sanity checks)."""
        terms = [t for n, t in enumerate(self.terms) if n != index]
        return TermList(self.arity, self.b, self.shifts, terms,
                        self.case, dict(self.meta))

    def evaluate(self, f):
        return evaluate_terms(self, f)

    def to_json(self) -> str:
        obj = {"arity": self.arity, "case": self.case, "meta": self.meta,
               "terms": [t.describe() for t in self.terms],
               "b": json.loads(self.b.to_json()),
               "shifts": [json.loads(S.to_json()) for S in self.shifts]}
        return json.dumps(obj)


# ---------------------------------------------------------------------------
# Per-variable atom lists.


def _beta_from_sig(grid: GridSpec, k: int, sig_b: int):
    """Per-level +-1 sequences: the ancestor Haar sampled inside each cube."""
    if k == 0:
        return None
    idx = grid_index(grid)
    sig = grid.int_sig(sig_b)
    arrs = []
    for lvl in range(grid.N):
        if lvl < k:
            arrs.append(np.ones(grid.n_cubes(lvl)))
        else:
            arrs.append(idx.ancestor_haar_signs(lvl, k, sig))
    return tuple(arrs)


def _cancellative_var_atoms(grid: GridSpec, i: int, j: int) -> list:
    """(weight, atom, inner, outer, provenance) for one cancellative variable."""
    non = grid.noncanc_int
    cancs = range(grid.n_sig)
    out = []
    for eps in cancs:
        out.append((1.0, BAtom(0, eps, non, eps), True, False, "b_mul:tail"))
    for eps in cancs:
        for eps2 in cancs:
            out.append((1.0, BAtom(0, eps, eps2, non ^ (eps ^ eps2)), True, False,
                        "b_mul:same_cube"))
    for k in range(1, j + 1):
        for eps in cancs:
            beta = _beta_from_sig(grid, k, eps)
            for eps2 in cancs:
                out.append((1.0, BAtom(k, eps, eps2, eps2, beta), True, False,
                            f"b_mul:depth_{k}"))
    for eps in cancs:
        out.append((-1.0, BAtom(0, eps, non, eps), False, True, "mul_S:tail"))
    for eps in cancs:
        for eps2 in cancs:
            out.append((-1.0, BAtom(0, eps, eps2, non ^ (eps ^ eps2)), False, True,
                        "mul_S:same_cube"))
    for k in range(1, i + 1):
        for eps in cancs:
            beta = _beta_from_sig(grid, k, eps)
            for eps2 in cancs:
                out.append((-1.0, BAtom(k, eps, eps2, eps2, beta), False, True,
                            f"mul_S:depth_{k}"))
    return out


def _noncancellative_var_atoms(grid: GridSpec, orientation: str) -> list:
    non = grid.noncanc_int
    cancs = range(grid.n_sig)
    out = []
    if orientation == ANALYSIS:
        for eps in cancs:
            for eps2 in cancs:
                out.append((1.0, BAtom(0, eps, eps2, non ^ (eps ^ eps2)), True, False,
                            "b_mul:same_cube"))
        for eps in cancs:
            out.append((1.0, BAtom(0, eps, non, eps), True, False, "b_mul:tail"))
        for eps in cancs:
            out.append((-1.0, BAtom(0, eps, eps, non), False, True, "mul_S:same_cube"))
        out.append((1.0, PAtom(adjoint=False), False, False, "b_mul:diagonal"))
    else:
        for eps in cancs:
            out.append((1.0, BAtom(0, eps, non, eps), True, False, "b_mul:tail"))
        for eps in cancs:
            for eps2 in cancs:
                out.append((-1.0, BAtom(0, eps, non ^ (eps ^ eps2), eps2), False, True,
                            "mul_S:same_cube"))
        for eps in cancs:
            out.append((-1.0, BAtom(0, eps, eps, non), False, True, "mul_S:tail"))
        out.append((-1.0, PAtom(adjoint=True), False, False, "b_mul:diagonal"))
    return out


def _var_atoms(grid: GridSpec, S: ShiftOperator) -> list:
    if S.cancellative:
        return _cancellative_var_atoms(grid, S.i, S.j)
    return _noncancellative_var_atoms(grid, S.orientation)


def _count_constant(grid: GridSpec, S: ShiftOperator) -> int:
    """Constant C of the count law |terms| <= C (1 + max(i,j)) per variable."""
    nsig = grid.n_sig
    if S.cancellative:
        return 2 * (nsig + nsig * nsig)
    return nsig * nsig + 2 * nsig + 1


# ---------------------------------------------------------------------------
# One-parameter decompositions.


def _one_param_terms(b: DyadicFunction, S: ShiftOperator, kinds: tuple) -> TermList:
    post_kind, pre_kind = kinds
    terms = []
    for weight, atom, inner, outer, prov in _var_atoms(b.grid, S):
        if isinstance(atom, PAtom):
            kind = "Pstar_term" if atom.adjoint else "P_term"
        else:
            kind = post_kind if inner or not outer else pre_kind
        terms.append(Term(weight, kind, prov, atom, inner1=inner, outer1=outer))
    case = "cancellative" if S.cancellative else f"noncancellative-{S.orientation}"
    C = _count_constant(b.grid, S)
    meta = {"term_count": len(terms), "count_constant": C,
            "count_bound": C * (1 + max(S.i, S.j)), "i": S.i, "j": S.j,
            "d": b.grid.d, "N": b.grid.N}
    return TermList(1, b, (S,), terms, case, meta)


def decompose_cancellative(b: DyadicFunction, S: ShiftOperator) -> TermList:
    """Term list with sum(terms)(f) = [M_b, S] f for every f, S cancellative."""
    if not S.cancellative:
        raise WrongKindError("decompose_cancellative needs a cancellative shift")
    if b.grid != S.grid:
        raise WrongKindError("b must live on the shift grid")
    return _one_param_terms(b, S, ("Bk_of_Sf", "S_of_Bk"))


def decompose_noncancellative(b: DyadicFunction, S: ShiftOperator) -> TermList:
    """Term list for a symbol-driven shift, either orientation."""
    if S.cancellative:
        raise WrongKindError("decompose_noncancellative needs a noncancellative shift")
    if b.grid != S.grid:
        raise WrongKindError("b must live on the shift grid")
    return _one_param_terms(b, S, ("B0_of_S00f", "S00_of_B0"))


def decompose(b: DyadicFunction, S: ShiftOperator) -> TermList:
    return decompose_cancellative(b, S) if S.cancellative \
        else decompose_noncancellative(b, S)


# ---------------------------------------------------------------------------
# Bi-parameter decomposition.


def _pair_kind(atom1, atom2, outer1, outer2) -> str:
    if isinstance(atom1, BAtom) and isinstance(atom2, BAtom):
        return "S_of_Bkl" if (outer1 or outer2) else "Bkl_of_Sf"
    if isinstance(atom1, BAtom):
        return "BPk"
    if isinstance(atom2, BAtom):
        return "PBl"
    key = (atom1.adjoint, atom2.adjoint)
    return {(False, False): "PP_term", (True, False): "PP1_term",
            (False, True): "PP2_term", (True, True): "PPstar_term"}[key]


def decompose_biparam(b: ProductFunction, S1: ShiftOperator,
                      S2: ShiftOperator) -> TermList:
    """Product of the per-variable constructions for [[M_b, S1], S2]."""
    pg = b.pgrid
    if S1.grid != pg.grid1:
        raise WrongKindError("S1 must act on variable 1 of b's product grid")
    if S2.grid != pg.grid2:
        raise WrongKindError("S2 must act on variable 2 of b's product grid")
    L1 = _var_atoms(pg.grid1, S1)
    L2 = _var_atoms(pg.grid2, S2)
    terms = []
    for w1, a1, in1, out1, prov1 in L1:
        for w2, a2, in2, out2, prov2 in L2:
            kind = _pair_kind(a1, a2, out1, out2)
            terms.append(Term(w1 * w2, kind, f"{prov1}|{prov2}", a1, a2,
                              inner1=in1, outer1=out1, inner2=in2, outer2=out2))
    C = _count_constant(pg.grid1, S1) * _count_constant(pg.grid2, S2)
    meta = {"term_count": len(terms), "count_constant": C,
            "count_bound": C * (1 + max(S1.i, S1.j)) * (1 + max(S2.i, S2.j)),
            "i1": S1.i, "j1": S1.j, "i2": S2.i, "j2": S2.j,
            "N1": pg.grid1.N, "N2": pg.grid2.N}
    case = f"biparam-{S1.kind}-{S2.kind}"
    return TermList(2, b, (S1, S2), terms, case, meta)


# ---------------------------------------------------------------------------
# Evaluation and verification.


def _atom_bkop(grid: GridSpec, atom: BAtom) -> BkOperator:
    return BkOperator(grid, atom.k, grid.int_sig(atom.sig_b),
                      grid.int_sig(atom.sig_in), grid.int_sig(atom.sig_out),
                      beta=atom.beta)


def _evaluate_one_param(tl: TermList, f: DyadicFunction) -> DyadicFunction:
    g = tl.b.grid
    S = tl.shifts[0]
    base = forward_stacked(g, f.samples)
    inputs = {False: base}
    scal = {}
    sym = None if S.cancellative else symbol_stacked(S.symbol)
    acc = np.zeros_like(base)
    for term in tl.terms:
        if term.inner1 and True not in inputs:
            inputs[True] = S.apply_stacked(base)
        x = inputs[term.inner1]
        if isinstance(term.atom1, PAtom):
            if term.atom1.adjoint:
                y = pstar_stacked(g, tl._bc, sym, x)
            else:
                y = p_stacked(g, tl._bc, sym, x)
        else:
            key = term.inner1
            if term.atom1.sig_in == g.noncanc_int and key not in scal:
                scal[key] = scaling_levels(g, x)
            y = bk_stacked(_atom_bkop(g, term.atom1), tl._bc, x, scal.get(key))
        if term.outer1:
            y = S.apply_stacked(y)
        acc += term.weight * y
    return DyadicFunction(g, inverse_stacked(g, acc))


def _evaluate_biparam(tl: TermList, f: ProductFunction) -> ProductFunction:
    pg = tl.b.pgrid
    S1, S2 = tl.shifts
    base = forward2(f)
    inputs = {(False, False): base}
    views = {}
    sym1 = None if S1.cancellative else symbol_stacked(S1.symbol)
    sym2 = None if S2.cancellative else symbol_stacked(S2.symbol)
    sym12 = None
    if sym1 is not None and sym2 is not None:
        sym12 = np.outer(sym1, sym2)

    def get_input(key):
        if key not in inputs:
            in1, in2 = key
            if (False, in2) not in inputs:
                inputs[(False, in2)] = S2.apply_stacked(base.T).T
            if key not in inputs:
                inputs[key] = S1.apply_stacked(inputs[(False, in2)])
        return inputs[key]

    if not hasattr(tl, "_b_cache"):
        tl._b_cache = {}
    # terms sharing the same outer-shift composition accumulate together, so
    # noncancellative-signature folding and shift application happen once per
    # group rather than once per term
    groups = {}
    for term in tl.terms:
        key_in = (term.inner1, term.inner2)
        x = get_input(key_in)
        if key_in not in views:
            views[key_in] = _BiView(pg, x)
        key_out = (term.outer1, term.outer2)
        acc = groups.get(key_out)
        if acc is None:
            acc = groups[key_out] = _Accum(pg)
        pair_apply(pg, tl._bc, x, term.atom1, term.atom2,
                   sym1=sym1, sym2=sym2, sym12=sym12, view=views[key_in],
                   out_acc=acc, weight=term.weight, b_cache=tl._b_cache)
    total = np.zeros(pg.shape)
    for (o1, o2), acc in groups.items():
        y = acc.total()
        if o1:
            y = S1.apply_stacked(y)
        if o2:
            y = S2.apply_stacked(y.T).T
        total += y
    return inverse2(pg, total)


def evaluate_terms(tl: TermList, f):
    """Sum of all terms applied to ``f`` (coefficient-space, one inverse at the end)."""
    if tl.arity == 1:
        return _evaluate_one_param(tl, f)
    return _evaluate_biparam(tl, f)


def _trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed,
                                                        spawn_key=(trial,)))


def verify_identity(b, shifts, trials: int, rng_seed: int,
                    tol: float = 1e-9) -> dict:
    """Check sum(terms)(f) == commutator(f) on random inputs.

    Residuals are measured relative to bmo(b) * ||f||. Returns the report
    dict {case, d, N, i, j, term_count, max_residual, pass, seed}.
    """
    if isinstance(shifts, ShiftOperator):
        shifts = (shifts,)
    if len(shifts) == 1:
        S = shifts[0]
        tl = decompose(b, S)
        g = b.grid
        scale = dyadic_bmo_norm(b)
        max_res = 0.0
        for t in range(trials):
            rng = _trial_rng(rng_seed, t)
            f = random_function(g, rng)
            direct = multiplication_commutator(b, S, f)
            approx = evaluate_terms(tl, f)
            denom = scale * f.norm()
            diff = (direct - approx).norm()
            max_res = max(max_res, diff / denom if denom > 0 else diff)
        report = {"case": tl.case, "d": g.d, "N": g.N, "i": S.i, "j": S.j,
                  "term_count": tl.term_count, "max_residual": max_res,
                  "pass": bool(max_res < tol), "seed": rng_seed, "trials": trials}
        return report
    S1, S2 = shifts
    tl = decompose_biparam(b, S1, S2)
    pg = b.pgrid
    scale = rect_bmo_norm(b)
    max_res = 0.0
    for t in range(trials):
        rng = _trial_rng(rng_seed, t)
        f = random_product_function(pg, rng)
        direct = iterated_commutator(b, S1, S2, f)
        approx = evaluate_terms(tl, f)
        denom = scale * f.norm()
        diff = (direct - approx).norm()
        max_res = max(max_res, diff / denom if denom > 0 else diff)
    report = {"case": tl.case, "d": [pg.grid1.d, pg.grid2.d],
              "N": [pg.grid1.N, pg.grid2.N],
              "i": [S1.i, S2.i], "j": [S1.j, S2.j],
              "term_count": tl.term_count, "max_residual": max_res,
              "pass": bool(max_res < tol), "seed": rng_seed, "trials": trials}
    return report
