"""Expression core for indexed field densities.

Expressions are immutable trees built from indexed field atoms, Clifford
chain items, coupling constants, partial derivatives, products and sums.
Coefficients are exact Gaussian rationals; no floats enter the symbolic
layer.  ``canonicalize`` maps every expression to a unique normal form:
sums flattened and sorted, products flattened with commuting factors in a
fixed class order, like terms collected, and dummy indices renamed to a
canonical sequence.  Structural equality of canonical forms is the
engine's notion of equality.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from fractions import Fraction
from typing import Callable, Iterable, Optional, Union

from .errors import IndexClash, MalformedChain, MalformedIndex

# Spacetime dimension.  A single module constant so tests can probe how
# derived coefficients depend on it (trace rules read it at call time).
SPACETIME_DIM = 4


class Alphabet(IntEnum):
    SPACETIME = 0
    FRAME = 1


class Variance(IntEnum):
    UP = 0
    DOWN = 1


@dataclass(frozen=True, slots=True)
class Index:
    label: str
    alphabet: Alphabet
    variance: Variance

    def key(self) -> tuple:
        return (int(self.alphabet), int(self.variance), self.label)

    def flipped(self) -> "Index":
        v = Variance.DOWN if self.variance == Variance.UP else Variance.UP
        return Index(self.label, self.alphabet, v)


def st_up(label: str) -> Index:
    return Index(label, Alphabet.SPACETIME, Variance.UP)


def st_lo(label: str) -> Index:
    return Index(label, Alphabet.SPACETIME, Variance.DOWN)


def fr_up(label: str) -> Index:
    return Index(label, Alphabet.FRAME, Variance.UP)


def fr_lo(label: str) -> Index:
    return Index(label, Alphabet.FRAME, Variance.DOWN)


class CRat:
    """Gaussian rational coefficient (exact real and imaginary parts)."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        object.__setattr__(self, "re", Fraction(re))
        object.__setattr__(self, "im", Fraction(im))

    def __setattr__(self, *a):
        raise AttributeError("CRat is immutable")

    @staticmethod
    def of(v) -> "CRat":
        if isinstance(v, CRat):
            return v
        return CRat(Fraction(v))

    def __add__(self, o):
        o = CRat.of(o)
        return CRat(self.re + o.re, self.im + o.im)

    def __sub__(self, o):
        o = CRat.of(o)
        return CRat(self.re - o.re, self.im - o.im)

    def __mul__(self, o):
        o = CRat.of(o)
        return CRat(self.re * o.re - self.im * o.im,
                    self.re * o.im + self.im * o.re)

    def __neg__(self):
        return CRat(-self.re, -self.im)

    def __truediv__(self, o):
        o = CRat.of(o)
        n = o.re * o.re + o.im * o.im
        if n == 0:
            raise ZeroDivisionError("division by zero coefficient")
        return CRat((self.re * o.re + self.im * o.im) / n,
                    (self.im * o.re - self.re * o.im) / n)

    def __pow__(self, k: int):
        if k < 0:
            return CRat(1) / self ** (-k)
        out = CRat(1)
        b = self
        while k:
            if k & 1:
                out = out * b
            b = b * b
            k >>= 1
        return out

    def __eq__(self, o):
        o = CRat.of(o)
        return self.re == o.re and self.im == o.im

    def __hash__(self):
        return hash((self.re, self.im))

    def is_zero(self) -> bool:
        return self.re == 0 and self.im == 0

    def to_complex(self) -> complex:
        return complex(float(self.re), float(self.im))

    def __repr__(self):
        return f"CRat({self.re!r}, {self.im!r})"


I_UNIT = CRat(0, 1)


class Kind(Enum):
    METRIC = "g"
    INV_METRIC = "ginv"
    MINKOWSKI = "eta"
    MINKOWSKI_UP = "etainv"
    DELTA = "delta"
    DET_FACTOR = "detg"
    TETRAD = "eps"
    INV_TETRAD = "epsinv"
    SCALAR = "phi"
    EM_VECTOR = "A"
    YM_VECTOR = "W"
    WEYL_VECTOR = "S"
    LOG_DERIV = "D"
    STRUCTURE_CONST = "structf"
    LAMBDA_POWER = "Lam"
    FERMION = "Psi"
    FERMION_BAR = "Psibar"


# class order: couplings < Lambda powers < det factor < metric-like <
# tetrad-like < bosonic fields < derivative subtrees < spinor chains
_CLASS_OF_KIND = {
    Kind.LAMBDA_POWER: 1,
    Kind.DET_FACTOR: 2,
    Kind.METRIC: 3,
    Kind.INV_METRIC: 3,
    Kind.MINKOWSKI: 3,
    Kind.MINKOWSKI_UP: 3,
    Kind.DELTA: 3,
    Kind.TETRAD: 4,
    Kind.INV_TETRAD: 4,
    Kind.SCALAR: 5,
    Kind.EM_VECTOR: 5,
    Kind.YM_VECTOR: 5,
    Kind.WEYL_VECTOR: 5,
    Kind.LOG_DERIV: 5,
    Kind.STRUCTURE_CONST: 5,
    Kind.FERMION: 5,
    Kind.FERMION_BAR: 5,
}

_KIND_RANK = {k: i for i, k in enumerate(Kind)}

# constant tensors: partial derivatives of these vanish
_CONSTANT_KINDS = {Kind.MINKOWSKI, Kind.MINKOWSKI_UP, Kind.DELTA,
                   Kind.STRUCTURE_CONST}

# (alphabet, variance) slot pattern per kind; None entries are free-form
_SLOT_PATTERN = {
    Kind.METRIC: ((Alphabet.SPACETIME, Variance.DOWN),) * 2,
    Kind.INV_METRIC: ((Alphabet.SPACETIME, Variance.UP),) * 2,
    Kind.MINKOWSKI: ((Alphabet.FRAME, Variance.DOWN),) * 2,
    Kind.MINKOWSKI_UP: ((Alphabet.FRAME, Variance.UP),) * 2,
    Kind.DET_FACTOR: (),
    Kind.TETRAD: ((Alphabet.FRAME, Variance.UP),
                  (Alphabet.SPACETIME, Variance.DOWN)),
    Kind.INV_TETRAD: ((Alphabet.FRAME, Variance.DOWN),
                      (Alphabet.SPACETIME, Variance.UP)),
    Kind.SCALAR: (),
    Kind.EM_VECTOR: ((Alphabet.SPACETIME, Variance.DOWN),),
    Kind.YM_VECTOR: ((Alphabet.FRAME, Variance.UP),
                     (Alphabet.SPACETIME, Variance.DOWN)),
    Kind.WEYL_VECTOR: ((Alphabet.SPACETIME, Variance.DOWN),),
    Kind.LOG_DERIV: ((Alphabet.SPACETIME, Variance.DOWN),),
    Kind.STRUCTURE_CONST: ((Alphabet.FRAME, Variance.UP),) * 3,
    Kind.LAMBDA_POWER: (),
    Kind.FERMION: (),
    Kind.FERMION_BAR: (),
}

# symmetric two-slot atoms (slot swap is a sign-free identity)
_SYMMETRIC_KINDS = {Kind.METRIC, Kind.INV_METRIC, Kind.MINKOWSKI,
                    Kind.MINKOWSKI_UP}


class Expr:
    """Base class; arithmetic operators build loose trees for canonicalize."""

    __slots__ = ()

    def __add__(self, other):
        return Sum((self, _as_expr(other)))

    def __radd__(self, other):
        return Sum((_as_expr(other), self))

    def __sub__(self, other):
        return Sum((self, Product(CRat(-1), (_as_expr(other),), None)))

    def __rsub__(self, other):
        return Sum((_as_expr(other), Product(CRat(-1), (self,), None)))

    def __mul__(self, other):
        return Product(CRat(1), (self, _as_expr(other)), None)

    def __rmul__(self, other):
        if isinstance(other, (int, Fraction, CRat)):
            return Product(CRat.of(other), (self,), None)
        return Product(CRat(1), (_as_expr(other), self), None)

    def __neg__(self):
        return Product(CRat(-1), (self,), None)

    def __pow__(self, n):
        if not isinstance(n, int) or n < 1:
            raise TypeError("expression powers are positive integers")
        return Product(CRat(1), (self,) * n, None)


def _as_expr(v) -> Expr:
    if isinstance(v, Expr):
        return v
    if isinstance(v, (int, Fraction, CRat)):
        return Product(CRat.of(v), (), None)
    raise TypeError(f"cannot coerce {v!r} to Expr")


@dataclass(frozen=True, slots=True)
class FieldAtom(Expr):
    kind: Kind
    indices: tuple[Index, ...] = ()
    exponent: Optional[Fraction] = None  # LAMBDA_POWER only

    def __post_init__(self):
        if self.kind == Kind.DELTA:
            # flexible alphabet, fixed (upper, lower) slot order
            if len(self.indices) != 2:
                raise MalformedIndex("delta takes 2 indices")
            up, dn = self.indices
            if up.variance != Variance.UP or dn.variance != Variance.DOWN \
                    or up.alphabet != dn.alphabet:
                raise MalformedIndex("delta slots must be (upper, lower) "
                                     "in one alphabet")
            if self.exponent is not None:
                raise MalformedIndex("exponent only valid on Lambda powers")
            return
        pat = _SLOT_PATTERN[self.kind]
        if len(pat) != len(self.indices):
            raise MalformedIndex(
                f"{self.kind.value} takes {len(pat)} indices, "
                f"got {len(self.indices)}")
        for ix, (alph, var) in zip(self.indices, pat):
            if ix.alphabet != alph or ix.variance != var:
                raise MalformedIndex(
                    f"bad slot {ix.label} on {self.kind.value}")
        if self.kind == Kind.LAMBDA_POWER:
            if self.exponent is None:
                raise MalformedIndex("Lambda power needs an exponent")
        elif self.exponent is not None:
            raise MalformedIndex("exponent only valid on Lambda powers")


class CliffordKind(Enum):
    GAMMA = "gamma"
    SIGMA = "sigma"
    IDENTITY = "one"


@dataclass(frozen=True, slots=True)
class CliffordAtom(Expr):
    ckind: CliffordKind
    indices: tuple[Index, ...] = ()

    def __post_init__(self):
        n = {CliffordKind.GAMMA: 1, CliffordKind.SIGMA: 2,
             CliffordKind.IDENTITY: 0}[self.ckind]
        if len(self.indices) != n:
            raise MalformedIndex(f"{self.ckind.value} takes {n} indices")
        for ix in self.indices:
            if ix.alphabet != Alphabet.FRAME:
                raise MalformedIndex(
                    f"{self.ckind.value} carries frame indices only")


@dataclass(frozen=True, slots=True)
class Coupling(Expr):
    name: str
    power: int = 1

    def __post_init__(self):
        if self.name not in ("lambda", "f", "e", "g"):
            raise MalformedIndex(f"unknown coupling {self.name!r}")


@dataclass(frozen=True, slots=True)
class Partial(Expr):
    index: Index
    operand: Expr

    def __post_init__(self):
        if self.index.alphabet != Alphabet.SPACETIME or \
                self.index.variance != Variance.DOWN:
            raise MalformedIndex("derivative index must be spacetime-lower")


@dataclass(frozen=True, slots=True)
class SpinorChain(Expr):
    """Ordered spinor-space factors: optional Psibar, Clifford items,
    optional Psi.  Fermion endpoints may sit under derivatives."""

    items: tuple[Expr, ...]


@dataclass(frozen=True, slots=True)
class Product(Expr):
    coeff: CRat
    factors: tuple[Expr, ...]
    chain: Optional[SpinorChain]


@dataclass(frozen=True, slots=True)
class Sum(Expr):
    terms: tuple[Expr, ...]


ZERO = Sum(())
ONE = Product(CRat(1), (), None)


# ---------------------------------------------------------------------------
# atom builders (fixed variance patterns; callers pass labels)

def metric(a: str, b: str) -> Expr:
    return FieldAtom(Kind.METRIC, (st_lo(a), st_lo(b)))


def inv_metric(a: str, b: str) -> Expr:
    return FieldAtom(Kind.INV_METRIC, (st_up(a), st_up(b)))


def minkowski(a: str, b: str) -> Expr:
    return FieldAtom(Kind.MINKOWSKI, (fr_lo(a), fr_lo(b)))


def minkowski_up(a: str, b: str) -> Expr:
    return FieldAtom(Kind.MINKOWSKI_UP, (fr_up(a), fr_up(b)))


def delta(up_label: str, down_label: str,
          alphabet: Alphabet = Alphabet.SPACETIME) -> Expr:
    # internal atom produced by contraction; slots fixed as (upper, lower)
    return FieldAtom(Kind.DELTA,
                     (Index(up_label, alphabet, Variance.UP),
                      Index(down_label, alphabet, Variance.DOWN)))


def det_factor() -> Expr:
    return FieldAtom(Kind.DET_FACTOR)


def tetrad(a: str, mu: str) -> Expr:
    return FieldAtom(Kind.TETRAD, (fr_up(a), st_lo(mu)))


def inv_tetrad(a: str, mu: str) -> Expr:
    return FieldAtom(Kind.INV_TETRAD, (fr_lo(a), st_up(mu)))


def scalar_field() -> Expr:
    return FieldAtom(Kind.SCALAR)


def em_vector(mu: str) -> Expr:
    return FieldAtom(Kind.EM_VECTOR, (st_lo(mu),))


def ym_vector(a: str, mu: str) -> Expr:
    return FieldAtom(Kind.YM_VECTOR, (fr_up(a), st_lo(mu)))


def weyl_vector(mu: str) -> Expr:
    return FieldAtom(Kind.WEYL_VECTOR, (st_lo(mu),))


def log_deriv(mu: str) -> Expr:
    return FieldAtom(Kind.LOG_DERIV, (st_lo(mu),))


def structure_const(a: str, b: str, c: str) -> Expr:
    return FieldAtom(Kind.STRUCTURE_CONST, (fr_up(a), fr_up(b), fr_up(c)))


def lam(k) -> Expr:
    return FieldAtom(Kind.LAMBDA_POWER, (), Fraction(k))


def coupling(name: str, power: int = 1) -> Expr:
    return Coupling(name, power)


def fermion() -> Expr:
    return FieldAtom(Kind.FERMION)


def fermion_bar() -> Expr:
    return FieldAtom(Kind.FERMION_BAR)


def gamma(label: str, up: bool = True) -> Expr:
    return CliffordAtom(CliffordKind.GAMMA,
                        (fr_up(label) if up else fr_lo(label),))


def sigma(l1: str, l2: str, up1: bool = True, up2: bool = True) -> Expr:
    i1 = fr_up(l1) if up1 else fr_lo(l1)
    i2 = fr_up(l2) if up2 else fr_lo(l2)
    return CliffordAtom(CliffordKind.SIGMA, (i1, i2))


def identity_spinor() -> Expr:
    return CliffordAtom(CliffordKind.IDENTITY)


def d(label: str, operand: Expr) -> Expr:
    return Partial(st_lo(label), operand)


# ---------------------------------------------------------------------------
# structural keys

def _atom_key(a: FieldAtom) -> tuple:
    exp = (0, 0) if a.exponent is None else \
        (a.exponent.numerator, a.exponent.denominator)
    return (2, _CLASS_OF_KIND[a.kind], _KIND_RANK[a.kind], exp,
            tuple(ix.key() for ix in a.indices))


def _clifford_key(a: CliffordAtom) -> tuple:
    rank = {CliffordKind.IDENTITY: 0, CliffordKind.GAMMA: 1,
            CliffordKind.SIGMA: 2}[a.ckind]
    return (4, rank, tuple(ix.key() for ix in a.indices))


def _factor_key(f: Expr) -> tuple:
    if isinstance(f, Coupling):
        return (0, 0, f.name, f.power)
    if isinstance(f, FieldAtom):
        return _atom_key(f)
    if isinstance(f, Partial):
        idxs, atom = _deriv_split(f)
        return (6, _node_key_inner(atom), tuple(ix.key() for ix in idxs))
    raise TypeError(f"unexpected factor {f!r}")


def _node_key_inner(f: Expr) -> tuple:
    if isinstance(f, FieldAtom):
        return _atom_key(f)
    if isinstance(f, CliffordAtom):
        return _clifford_key(f)
    if isinstance(f, Partial):
        idxs, atom = _deriv_split(f)
        return (6, _node_key_inner(atom), tuple(ix.key() for ix in idxs))
    raise TypeError(f"unexpected node {f!r}")


def _chain_key(c: Optional[SpinorChain]) -> tuple:
    if c is None:
        return ()
    return tuple(_node_key_inner(it) for it in c.items)


def term_key(p: Product) -> tuple:
    return (tuple(_factor_key(f) for f in p.factors), _chain_key(p.chain))


def _deriv_split(p: Partial) -> tuple[tuple[Index, ...], Expr]:
    idxs = []
    node: Expr = p
    while isinstance(node, Partial):
        idxs.append(node.index)
        node = node.operand
    return tuple(idxs), node


def _deriv_join(idxs: Iterable[Index], atom: Expr) -> Expr:
    out = atom
    for ix in reversed(list(idxs)):
        out = Partial(ix, out)
    return out


# ---------------------------------------------------------------------------
# slot traversal

def _slots_of_factor(f: Expr) -> list[Index]:
    if isinstance(f, Coupling):
        return []
    if isinstance(f, FieldAtom):
        return list(f.indices)
    if isinstance(f, Partial):
        idxs, atom = _deriv_split(f)
        return list(idxs) + _slots_of_factor(atom)
    if isinstance(f, CliffordAtom):
        return list(f.indices)
    raise TypeError(f"unexpected factor {f!r}")


def _term_slot_list(factors, chain) -> list[Index]:
    out = []
    for f in factors:
        out.extend(_slots_of_factor(f))
    if chain is not None:
        for it in chain.items:
            out.extend(_slots_of_factor(it))
    return out


def _rename_in_factor(f: Expr, ren: dict[str, str]):
    """Apply a dummy relabeling; returns (node, sign) after re-normalizing
    symmetric or antisymmetric slot order."""
    if isinstance(f, Coupling):
        return f, 1
    if isinstance(f, FieldAtom):
        idxs = tuple(Index(ren.get(ix.label, ix.label), ix.alphabet,
                           ix.variance) for ix in f.indices)
        return _normalize_atom(FieldAtom(f.kind, idxs, f.exponent))
    if isinstance(f, CliffordAtom):
        idxs = tuple(Index(ren.get(ix.label, ix.label), ix.alphabet,
                           ix.variance) for ix in f.indices)
        return _normalize_clifford(CliffordAtom(f.ckind, idxs))
    if isinstance(f, Partial):
        idxs, atom = _deriv_split(f)
        new_idxs = [Index(ren.get(ix.label, ix.label), ix.alphabet,
                          ix.variance) for ix in idxs]
        inner, sign = _rename_in_factor(atom, ren)
        if inner is None:
            return None, 0
        return _deriv_join(new_idxs, inner), sign
    raise TypeError(f"unexpected factor {f!r}")


def _normalize_atom(a: FieldAtom):
    """Sort symmetric slot pairs; returns (atom, sign) or (None, 0) if the
    atom vanishes identically."""
    if a.kind in _SYMMETRIC_KINDS:
        i, j = a.indices
        if j.key() < i.key():
            a = FieldAtom(a.kind, (j, i), a.exponent)
    return a, 1


def _normalize_clifford(a: CliffordAtom):
    if a.ckind == CliffordKind.SIGMA:
        i, j = a.indices
        if i.label == j.label:
            # equal labels: antisymmetry (same variance) or the eta trace
            # of an antisymmetric object (mixed variance) both vanish
            return None, 0
        if j.key() < i.key():
            return CliffordAtom(a.ckind, (j, i)), -1
    return a, 1


# ---------------------------------------------------------------------------
# flattening

_TMP_COUNTER = itertools.count()


def _flatten(e: Expr) -> list[tuple[CRat, list, Optional[list]]]:
    """Distribute sums and derivatives; returns raw (coeff, factors, chain
    items) triples with derivatives applied to single atoms."""
    if isinstance(e, Sum):
        out = []
        for t in e.terms:
            out.extend(_flatten(t))
        return out
    if isinstance(e, Product):
        terms = [(e.coeff, [], None)]
        for f in e.factors:
            sub = _flatten(f)
            new_terms = []
            for (c1, fs1, ch1) in terms:
                for (c2, fs2, ch2) in sub:
                    new_terms.append(
                        (c1 * c2, fs1 + fs2, _merge_chain(ch1, ch2)))
            terms = new_terms
        if e.chain is not None:
            sub = _flatten_chain(e.chain)
            new_terms = []
            for (c1, fs1, ch1) in terms:
                for (c2, fs2, ch2) in sub:
                    new_terms.append(
                        (c1 * c2, fs1 + fs2, _merge_chain(ch1, ch2)))
            terms = new_terms
        return [t for t in terms if not t[0].is_zero()]
    if isinstance(e, (FieldAtom,)):
        if e.kind in (Kind.FERMION, Kind.FERMION_BAR):
            return [(CRat(1), [], [e])]
        return [(CRat(1), [e], None)]
    if isinstance(e, CliffordAtom):
        return [(CRat(1), [], [e])]
    if isinstance(e, Coupling):
        return [(CRat(1), [e], None)]
    if isinstance(e, Partial):
        return _flatten_partial(e.index, e.operand)
    if isinstance(e, SpinorChain):
        return _flatten_chain(e)
    raise TypeError(f"cannot flatten {e!r}")


def _flatten_chain(ch: SpinorChain):
    terms = [(CRat(1), [], None)]
    for item in ch.items:
        sub = _flatten(item)
        new_terms = []
        for (c1, fs1, ch1) in terms:
            for (c2, fs2, ch2) in sub:
                new_terms.append((c1 * c2, fs1 + fs2, _merge_chain(ch1, ch2)))
        terms = new_terms
    return terms


def _merge_chain(a: Optional[list], b: Optional[list]) -> Optional[list]:
    if a is None:
        return b
    if b is None:
        return a
    return a + b


def _is_spinor_item(f: Expr) -> bool:
    if isinstance(f, CliffordAtom):
        return True
    if isinstance(f, FieldAtom):
        return f.kind in (Kind.FERMION, Kind.FERMION_BAR)
    if isinstance(f, Partial):
        return _is_spinor_item(f.operand)
    return False


def _flatten_partial(ix: Index, operand: Expr):
    """Leibniz expansion; the derivative lands on single atoms."""
    out = []
    for coeff, factors, chain in _flatten(operand):
        parts = list(factors)
        chain_items = list(chain) if chain is not None else None
        produced_any = False
        for pos, f in enumerate(parts):
            dterm = _derive_factor(ix, f)
            if dterm is None:
                continue
            produced_any = True
            for (dc, dfs, dch) in dterm:
                nf = parts[:pos] + dfs + parts[pos + 1:]
                out.append((coeff * dc, nf, _merge_chain(
                    list(chain_items) if chain_items else None, dch)
                    if dch is not None or chain_items is not None
                    else None))
        if chain_items is not None:
            for pos, it in enumerate(chain_items):
                if isinstance(it, CliffordAtom):
                    continue  # constant matrices
                produced_any = True
                nch = chain_items[:pos] + [Partial(ix, it)] \
                    + chain_items[pos + 1:]
                out.append((coeff, list(parts), nch))
        if not produced_any:
            # derivative of a constant term
            continue
    return out


def _derive_factor(ix: Index, f: Expr):
    """Returns flattened terms for the derivative of one factor, or None
    when the factor is constant."""
    if isinstance(f, Coupling):
        return None
    if isinstance(f, FieldAtom):
        if f.kind in _CONSTANT_KINDS:
            return None
        if f.kind == Kind.LAMBDA_POWER:
            if f.exponent == 0:
                return None
            # chain rule: the log derivative atom carries d ln(Lambda)
            return [(CRat(f.exponent), [f, FieldAtom(
                Kind.LOG_DERIV, (ix,))], None)]
        return [(CRat(1), [Partial(ix, f)], None)]
    if isinstance(f, Partial):
        return [(CRat(1), [Partial(ix, f)], None)]
    raise TypeError(f"cannot differentiate {f!r}")


# ---------------------------------------------------------------------------
# per-term canonicalization

_PERM_CAP = 100_000


def _collect_scalars(factors: list) -> tuple[list, Optional[Fraction],
                                             dict[str, int]]:
    kept = []
    lam_exp: Optional[Fraction] = None
    coup: dict[str, int] = {}
    for f in factors:
        if isinstance(f, FieldAtom) and f.kind == Kind.LAMBDA_POWER:
            lam_exp = (lam_exp or Fraction(0)) + f.exponent
        elif isinstance(f, Coupling):
            coup[f.name] = coup.get(f.name, 0) + f.power
        else:
            kept.append(f)
    return kept, lam_exp, coup


def _validate_chain(items: list) -> None:
    for pos, it in enumerate(items):
        base = it
        while isinstance(base, Partial):
            base = base.operand
        if isinstance(base, FieldAtom):
            if base.kind == Kind.FERMION_BAR and pos != 0:
                raise MalformedChain("conjugate spinor must open its block")
            if base.kind == Kind.FERMION and pos != len(items) - 1:
                raise MalformedChain("spinor must close its block")
        elif not isinstance(base, CliffordAtom):
            raise MalformedChain(f"bad chain item {it!r}")
    n_bar = sum(1 for it in items if _endpoint_kind(it) == Kind.FERMION_BAR)
    n_psi = sum(1 for it in items if _endpoint_kind(it) == Kind.FERMION)
    if n_bar > 1 or n_psi > 1:
        raise MalformedChain("at most one spinor bilinear per term")
    if n_bar != n_psi:
        raise MalformedChain("spinor blocks must be closed bilinears")


def _endpoint_kind(it: Expr) -> Optional[Kind]:
    base = it
    while isinstance(base, Partial):
        base = base.operand
    if isinstance(base, FieldAtom):
        return base.kind
    return None


def _strip_identities(items: list) -> list:
    kept = [it for it in items
            if not (isinstance(it, CliffordAtom)
                    and it.ckind == CliffordKind.IDENTITY)]
    if kept:
        return kept
    if items:
        has_fermion = any(_endpoint_kind(it) is not None for it in items)
        if not has_fermion:
            return [identity_spinor()]
    return kept


def _coarse_key(f: Expr, dummies: set[str]) -> tuple:
    """Factor key with dummy labels erased, for tie-group detection."""
    def ix_coarse(ix: Index):
        # dummies erase to "", frees keep a prefixed name: both str, so
        # mixed dummy/free keys stay sortable
        lab = "" if ix.label in dummies else "f:" + ix.label
        return (int(ix.alphabet), int(ix.variance), lab)

    if isinstance(f, Coupling):
        return (0, f.name, f.power)
    if isinstance(f, FieldAtom):
        exp = (0, 0) if f.exponent is None else \
            (f.exponent.numerator, f.exponent.denominator)
        return (2, _CLASS_OF_KIND[f.kind], _KIND_RANK[f.kind], exp,
                tuple(ix_coarse(ix) for ix in f.indices))
    if isinstance(f, Partial):
        idxs, atom = _deriv_split(f)
        return (6, _coarse_key(atom, dummies),
                tuple(ix_coarse(ix) for ix in idxs))
    raise TypeError(f"unexpected factor {f!r}")


def _slot_classes(f: Expr) -> list[str]:
    """Equivalence class per slot: slots that denote the same position up
    to a flip candidate (symmetric pairs, sigma orientation, commuting
    derivative indices) share a class, so adjacency refinement cannot
    depend on which orientation the input happened to use."""
    if isinstance(f, Coupling):
        return []
    if isinstance(f, FieldAtom):
        if f.kind in _SYMMETRIC_KINDS:
            return ["s", "s"]
        return [str(i) for i in range(len(f.indices))]
    if isinstance(f, CliffordAtom):
        if f.ckind == CliffordKind.SIGMA:
            return ["s", "s"]
        return [str(i) for i in range(len(f.indices))]
    if isinstance(f, Partial):
        idxs, atom = _deriv_split(f)
        return ["d"] * len(idxs) + ["a" + c for c in _slot_classes(atom)]
    raise TypeError(f"unexpected factor {f!r}")


def _refined_groups(factors: list, chain_items: Optional[list],
                    dummies: set[str]) -> list[list[Expr]]:
    """Partition factors into permutable tie groups: start from the
    dummy-blind coarse key and iteratively split by the colors reached
    through dummy contractions.  Nodes that remain tied are (at worst)
    automorphic images, so the candidate enumeration stays tiny even for
    terms like the quartic Yang-Mills self-interaction."""
    keys = [_coarse_key(f, dummies) for f in factors]
    rank_of = {k: r for r, k in enumerate(sorted(set(keys)))}
    color = [rank_of[k] for k in keys]

    # adjacency over dummy labels; chain nodes have fixed negative colors
    ends: dict[str, list[tuple[int, str]]] = {}
    for i, f in enumerate(factors):
        classes = _slot_classes(f)
        for ix, cls in zip(_slots_of_factor(f), classes):
            if ix.label in dummies:
                ends.setdefault(ix.label, []).append((i, cls))
    if chain_items:
        for j, it in enumerate(chain_items):
            classes = _slot_classes(it)
            for ix, cls in zip(_slots_of_factor(it), classes):
                if ix.label in dummies:
                    ends.setdefault(ix.label, []).append((-(j + 1), cls))

    def node_color(n: int) -> int:
        return color[n] if n >= 0 else n - len(factors)

    for _ in range(len(factors) + 1):
        sigs = []
        for i in range(len(factors)):
            adj = []
            for lab, occ in ends.items():
                if len(occ) != 2:
                    continue
                (na, ca), (nb, cb) = occ
                if na == i:
                    adj.append((ca, node_color(nb), cb))
                if nb == i:
                    adj.append((cb, node_color(na), ca))
            sigs.append((color[i], tuple(sorted(adj))))
        new_rank = {s: r for r, s in enumerate(sorted(set(sigs)))}
        new_color = [new_rank[s] for s in sigs]
        if len(set(new_color)) == len(set(color)):
            color = new_color
            break
        color = new_color

    buckets: dict[int, list[Expr]] = {}
    for i, f in enumerate(factors):
        buckets.setdefault(color[i], []).append(f)
    return [buckets[c] for c in sorted(buckets)]


def _flip_candidates(f: Expr, dummies: set[str]) -> list[Expr]:
    """Slot orderings of one factor that denote the same object (metric
    symmetry, sigma antisymmetry, derivative commutation)."""
    if isinstance(f, FieldAtom) and f.kind in _SYMMETRIC_KINDS:
        i, j = f.indices
        if i.label in dummies or j.label in dummies:
            return [f, FieldAtom(f.kind, (j, i), f.exponent)]
        return [f]
    if isinstance(f, Partial):
        idxs, atom = _deriv_split(f)
        atoms = _flip_candidates(atom, dummies) \
            if isinstance(atom, FieldAtom) else [atom]
        if len(idxs) > 1 and any(ix.label in dummies for ix in idxs):
            perms = itertools.permutations(idxs)
        else:
            perms = [idxs]
        return [_deriv_join(p, a) for p in perms for a in atoms]
    return [f]


def _chain_flip_candidates(items: list, dummies: set[str]):
    """Sigma slot orientations inside a chain (sign-tracked)."""
    options = []
    for it in items:
        if isinstance(it, CliffordAtom) and it.ckind == CliffordKind.SIGMA:
            i, j = it.indices
            if i.label in dummies or j.label in dummies:
                options.append([(it, 1),
                                (CliffordAtom(it.ckind, (j, i)), -1)])
                continue
        options.append([(it, 1)])
    return options


def _canonical_dummy_names(walk: list[Index], dummies: set[str],
                           free_labels: set[str]) -> dict[str, str]:
    ren: dict[str, str] = {}
    counters = {Alphabet.SPACETIME: 0, Alphabet.FRAME: 0}
    prefix = {Alphabet.SPACETIME: "mu", Alphabet.FRAME: "fa"}
    for ix in walk:
        if ix.label in dummies and ix.label not in ren:
            while True:
                cand = f"{prefix[ix.alphabet]}{counters[ix.alphabet]}"
                counters[ix.alphabet] += 1
                if cand not in free_labels:
                    break
            ren[ix.label] = cand
    return ren


_TERM_CACHE: dict = {}
_TERM_CACHE_LIMIT = 200_000
_VANISHES = object()


def _canonical_term(coeff: CRat, factors: list, chain_items: Optional[list]):
    """Unique representative of one product term.  Returns (coeff, Product
    skeleton) or None when the term vanishes.  Results are cached by the
    raw factor skeleton; the coefficient passes through linearly."""
    if coeff.is_zero():
        return None
    cache_key = (tuple(factors),
                 tuple(chain_items) if chain_items is not None else None)
    hit = _TERM_CACHE.get(cache_key)
    if hit is not None:
        if hit is _VANISHES:
            return None
        sign_c, skel = hit
        return (coeff * sign_c, skel)
    res = _canonical_term_uncached(coeff, factors, chain_items)
    if len(_TERM_CACHE) >= _TERM_CACHE_LIMIT:
        _TERM_CACHE.clear()
    if res is None:
        _TERM_CACHE[cache_key] = _VANISHES
    else:
        c, skel = res
        # c == coeff * sign with sign in {1, -1, i, -i} factored by walks
        _TERM_CACHE[cache_key] = (c / coeff, skel)
    return res


def _canonical_term_uncached(coeff: CRat, factors: list,
                             chain_items: Optional[list]):
    if chain_items is not None:
        chain_items = _strip_identities(chain_items)
        if not chain_items:
            chain_items = None
        else:
            _validate_chain(chain_items)

    factors, lam_exp, coup = _collect_scalars(factors)
    scalar_factors: list[Expr] = []
    for name in sorted(coup):
        if coup[name] != 0:
            scalar_factors.append(Coupling(name, coup[name]))
    if lam_exp is not None and lam_exp != 0:
        scalar_factors.append(FieldAtom(Kind.LAMBDA_POWER, (), lam_exp))

    # pre-normalize atoms first: identically vanishing atoms (equal-label
    # sigma slots) zero the term before index pairing is judged
    sign0 = 1
    norm_factors = []
    for f in factors:
        nf, s = _rename_in_factor(f, {})
        if nf is None:
            return None
        sign0 *= s
        norm_factors.append(nf)
    factors = norm_factors
    if chain_items is not None:
        new_items = []
        for it in chain_items:
            ni, s = _rename_in_factor(it, {})
            if ni is None:
                return None
            sign0 *= s
            new_items.append(ni)
        chain_items = new_items

    # index occurrence accounting
    slots = _term_slot_list(factors, SpinorChain(tuple(chain_items))
                            if chain_items else None)
    by_label: dict[str, list[Index]] = {}
    for ix in slots:
        by_label.setdefault(ix.label, []).append(ix)
    dummies: set[str] = set()
    free_labels: set[str] = set()
    for lab, occ in by_label.items():
        if len(occ) == 1:
            free_labels.add(lab)
        elif len(occ) == 2:
            a, b = occ
            if a.alphabet != b.alphabet:
                raise MalformedIndex(
                    f"repeated index {lab!r} mixes alphabets")
            if {a.variance, b.variance} != {Variance.UP, Variance.DOWN}:
                raise MalformedIndex(
                    f"repeated index {lab!r} must pair upper with lower")
            dummies.add(lab)
        else:
            raise MalformedIndex(f"index {lab!r} appears {len(occ)} times")

    # group tied factors: coarse key refined by contraction adjacency
    groups = _refined_groups(factors, chain_items, dummies)

    group_orderings = []
    n_cand = 1
    for g in groups:
        if len(g) == 1:
            group_orderings.append([tuple(g)])
        else:
            perms = list(itertools.permutations(g))
            group_orderings.append(perms)
            n_cand *= len(perms)

    flip_space = []
    for g in groups:
        for f in g:
            opts = _flip_candidates(f, dummies)
            n_cand *= len(opts)
    if n_cand > _PERM_CAP:
        raise MalformedIndex("term too symmetric to canonicalize")

    chain_opts = _chain_flip_candidates(chain_items, dummies) \
        if chain_items is not None else []
    for o in chain_opts:
        n_cand *= len(o)
    if n_cand > _PERM_CAP:
        raise MalformedIndex("term too symmetric to canonicalize")

    best = None  # (key, sign, factors, chain)
    zero = False
    for ordering in itertools.product(*group_orderings):
        base_seq = [f for grp in ordering for f in grp]
        flip_opts = [_flip_candidates(f, dummies) for f in base_seq]
        for flipped in itertools.product(*flip_opts):
            chain_variants = itertools.product(*chain_opts) \
                if chain_opts else [()]
            for chain_pick in chain_variants:
                ch_items = [it for it, _ in chain_pick] or None
                ch_sign = 1
                for _, s in chain_pick:
                    ch_sign *= s
                walk = _term_slot_list(
                    list(flipped),
                    SpinorChain(tuple(ch_items)) if ch_items else None)
                ren = _canonical_dummy_names(walk, dummies, free_labels)
                sign = sign0 * ch_sign
                out_factors = []
                dead = False
                for f in flipped:
                    nf, s = _rename_in_factor(f, ren)
                    if nf is None:
                        dead = True
                        break
                    sign *= s
                    out_factors.append(nf)
                if dead:
                    continue
                out_chain = None
                if ch_items is not None:
                    out_items = []
                    for it in ch_items:
                        ni, s = _rename_in_factor(it, ren)
                        if ni is None:
                            dead = True
                            break
                        sign *= s
                        out_items.append(ni)
                    if dead:
                        continue
                    out_chain = SpinorChain(tuple(out_items))
                out_factors.sort(key=_factor_key)
                key = (tuple(_factor_key(f) for f in out_factors),
                       _chain_key(out_chain))
                if best is None or key < best[0]:
                    best = (key, sign, out_factors, out_chain)
                    zero = False
                elif key == best[0] and sign != best[1]:
                    zero = True
    if best is None or zero:
        return None

    _, sign, out_factors, out_chain = best
    all_factors = sorted(scalar_factors + out_factors, key=_factor_key)
    return (coeff * CRat(sign), Product(CRat(1), tuple(all_factors),
                                        out_chain))


def canonicalize(e: Expr) -> Sum:
    """Normal form: a Sum of coefficient-carrying Products with sorted
    factors, canonical dummy labels and like terms collected."""
    raw = _flatten(_as_expr(e))
    bucket: dict[tuple, tuple[CRat, Product]] = {}
    for coeff, factors, chain in raw:
        res = _canonical_term(coeff, factors, chain)
        if res is None:
            continue
        c, skel = res
        k = term_key(skel)
        if k in bucket:
            c0, _ = bucket[k]
            bucket[k] = (c0 + c, skel)
        else:
            bucket[k] = (c, skel)
    terms = []
    for k in sorted(bucket):
        c, skel = bucket[k]
        if c.is_zero():
            continue
        terms.append(Product(c, skel.factors, skel.chain))
    out = Sum(tuple(terms))
    _check_sum_frees(out)
    return out


def _term_free_indices(p: Product):
    slots = _term_slot_list(p.factors, p.chain)
    by_label: dict[str, list[Index]] = {}
    for ix in slots:
        by_label.setdefault(ix.label, []).append(ix)
    return frozenset(occ[0] for occ in by_label.values() if len(occ) == 1)


def _check_sum_frees(s: Sum) -> None:
    frees = None
    for t in s.terms:
        f = _term_free_indices(t)
        if frees is None:
            frees = f
        elif frees != f:
            raise MalformedIndex(
                "terms of a sum carry different free indices")


def free_indices(e: Expr) -> frozenset[Index]:
    s = canonicalize(e)
    if not s.terms:
        return frozenset()
    return _term_free_indices(s.terms[0])


def is_zero(e: Expr) -> bool:
    return not canonicalize(e).terms


def equal(a: Expr, b: Expr) -> bool:
    """Structural equality of canonical forms."""
    return canonicalize(a) == canonicalize(b)


# ---------------------------------------------------------------------------
# substitution

@dataclass(frozen=True, slots=True)
class AtomRule:
    """Atom-level rewrite: every atom of ``kind`` is replaced by
    ``build(atom)``, an expression with the same free indices (or zero)."""
    kind: Kind
    build: Callable[[FieldAtom], Expr]


def _fresh_label() -> str:
    return f"tmp{next(_TMP_COUNTER)}"


def _freshen_dummies(e: Expr, keep: frozenset[str]) -> Expr:
    """Rename replacement-internal dummies so splicing cannot clash with
    the surrounding term."""
    s = canonicalize(e)
    new_terms = []
    for t in s.terms:
        slots = _term_slot_list(t.factors, t.chain)
        by_label: dict[str, int] = {}
        for ix in slots:
            by_label[ix.label] = by_label.get(ix.label, 0) + 1
        ren = {lab: _fresh_label() for lab, n in by_label.items()
               if n == 2 and lab not in keep}
        fs = []
        sign = 1
        for f in t.factors:
            nf, sg = _rename_in_factor(f, ren)
            sign *= sg
            fs.append(nf)
        ch = None
        if t.chain is not None:
            items = []
            for it in t.chain.items:
                ni, sg = _rename_in_factor(it, ren)
                sign *= sg
                items.append(ni)
            ch = SpinorChain(tuple(items))
        new_terms.append(Product(t.coeff * CRat(sign), tuple(fs), ch))
    return Sum(tuple(new_terms))


def _rule_applies(rule: AtomRule, atom: FieldAtom) -> Expr:
    rep = rule.build(atom)
    rep_free = free_indices(rep)
    want = frozenset(atom.indices)
    if rep_free != want and not is_zero(rep):
        raise IndexClash(
            f"replacement for {atom.kind.value} changes free indices")
    return _freshen_dummies(rep, frozenset(ix.label for ix in want))


def substitute(e: Expr, rule: AtomRule) -> Sum:
    """Replace every atom matching the rule, including under derivatives,
    then canonicalize."""
    s = canonicalize(e)

    def map_factor(f: Expr) -> Expr:
        if isinstance(f, FieldAtom) and f.kind == rule.kind:
            return _rule_applies(rule, f)
        if isinstance(f, Partial):
            return Partial(f.index, map_factor(f.operand))
        return f

    new_terms = []
    for t in s.terms:
        parts: list[Expr] = [Product(t.coeff, (), None)]
        for f in t.factors:
            parts.append(map_factor(f))
        if t.chain is not None:
            parts.append(SpinorChain(tuple(
                map_factor(it) for it in t.chain.items)))
        new_terms.append(Product(CRat(1), tuple(parts), None))
    return canonicalize(Sum(tuple(new_terms)))


def rewrite_terms(e: Expr, fn: Callable[[Product], Optional[Expr]]) -> Sum:
    """Map each canonical term through fn (None keeps the term)."""
    s = canonicalize(e)
    out = []
    for t in s.terms:
        r = fn(t)
        out.append(t if r is None else r)
    return canonicalize(Sum(tuple(out)))


def count_atoms(e: Expr, kind: Kind) -> int:
    """Total occurrences of an atom kind across all canonical terms."""
    s = canonicalize(e)
    n = 0

    def walk(f: Expr) -> int:
        if isinstance(f, FieldAtom):
            return 1 if f.kind == kind else 0
        if isinstance(f, Partial):
            return walk(f.operand)
        return 0

    for t in s.terms:
        for f in t.factors:
            n += walk(f)
        if t.chain is not None:
            for it in t.chain.items:
                n += walk(it)
    return n


def set_coupling(e: Expr, name: str, value) -> Sum:
    """Fold a named coupling into the numeric coefficients.

    value may be an int, Fraction, or CRat.  A zero value against a
    negative power is rejected."""
    val = value if isinstance(value, CRat) else CRat.of(Fraction(value))
    s = canonicalize(e)
    out = []
    for t in s.terms:
        coeff = t.coeff
        kept = []
        for f in t.factors:
            if isinstance(f, Coupling) and f.name == name:
                if f.power < 0 and val.is_zero():
                    raise ZeroDivisionError(
                        f"coupling {name!r} at power {f.power} set to zero")
                coeff = coeff * val ** f.power
            else:
                kept.append(f)
        out.append(Product(coeff, tuple(kept), t.chain))
    return canonicalize(Sum(tuple(out)))
