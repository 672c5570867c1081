"""Gamma-matrix algebra on spinor chains.

The generators satisfy {gamma^a, gamma^b} = 2 eta^{ab} with mostly-minus
signature, and sigma^{ab} = (1/4)[gamma^a, gamma^b].  Chains are reduced
by eliminating contracted gamma pairs through anticommutation; an
adjacent contracted pair counts the spacetime dimension.  Distinct free
gammas are bubble-sorted by label, except that chains of five or more
distinct gammas are left in input order.  Dummy-labeled gammas keep
their position relative to the tensors they contract with."""

from __future__ import annotations

from fractions import Fraction

from . import exprs as ex
from .exprs import (
    Alphabet,
    CliffordAtom,
    CliffordKind,
    CRat,
    Expr,
    Index,
    Product,
    SpinorChain,
    Sum,
    Variance,
    canonicalize,
)


def _is_gamma(it) -> bool:
    return isinstance(it, CliffordAtom) and it.ckind == CliffordKind.GAMMA


def expand_sigma(e: Expr) -> Sum:
    """Rewrite every sigma as the normalized gamma commutator."""
    s = canonicalize(e)
    out = []
    for t in s.terms:
        has_sigma = t.chain is not None and any(
            isinstance(it, CliffordAtom) and it.ckind == CliffordKind.SIGMA
            for it in t.chain.items)
        if not has_sigma:
            out.append(t)
            continue
        quarter = CRat(Fraction(1, 4))
        branches = [(CRat(1), [])]
        for it in t.chain.items:
            if isinstance(it, CliffordAtom) and \
                    it.ckind == CliffordKind.SIGMA:
                gi = CliffordAtom(CliffordKind.GAMMA, (it.indices[0],))
                gj = CliffordAtom(CliffordKind.GAMMA, (it.indices[1],))
                opts = [(quarter, [gi, gj]), (-quarter, [gj, gi])]
            else:
                opts = [(CRat(1), [it])]
            branches = [(c1 * c2, l1 + l2)
                        for c1, l1 in branches for c2, l2 in opts]
        for c, items in branches:
            out.append(Product(t.coeff * c, t.factors,
                               SpinorChain(tuple(items))))
    return canonicalize(Sum(tuple(out)))


def _pairing_atom(a: Index, b: Index):
    """Half the anticommutator of two gammas with the given slots."""
    if a.variance == Variance.UP and b.variance == Variance.UP:
        return ex.minkowski_up(a.label, b.label)
    if a.variance == Variance.DOWN and b.variance == Variance.DOWN:
        return ex.minkowski(a.label, b.label)
    if a.variance == Variance.UP:
        return ex.delta(a.label, b.label, Alphabet.FRAME)
    return ex.delta(b.label, a.label, Alphabet.FRAME)


def _reduce(items: list, free: set) -> list[tuple[CRat, list, list]]:
    """Returns (coefficient, emitted bosonic factors, chain items)
    branches for one chain."""
    gpos = [i for i, it in enumerate(items) if _is_gamma(it)]

    pair = None
    for k, p in enumerate(gpos):
        lab = items[p].indices[0].label
        for q in gpos[k + 1:]:
            if items[q].indices[0].label == lab:
                pair = (p, q)
                break
        if pair:
            break
    if pair:
        p, q = pair
        if q == p + 1:
            rest = items[:p] + items[q + 1:]
            dim = CRat(ex.SPACETIME_DIM)
            return [(dim * c, fs, its) for c, fs, its in _reduce(rest, free)]
        return _swap(items, q - 1, q, free)

    if len(gpos) >= 5:
        return [(CRat(1), [], items)]
    for k in range(len(gpos) - 1):
        p, q = gpos[k], gpos[k + 1]
        if q != p + 1:
            continue
        a, b = items[p].indices[0], items[q].indices[0]
        if a.label in free and b.label in free and \
                (b.label, int(b.variance)) < (a.label, int(a.variance)):
            return _swap(items, p, q, free)
    return [(CRat(1), [], items)]


def _swap(items: list, i: int, j: int, free: set):
    """Anticommute adjacent gammas at i, j = i+1."""
    a, b = items[i].indices[0], items[j].indices[0]
    ip = _pairing_atom(a, b)
    rest = items[:i] + items[j + 1:]
    swapped = items[:i] + [items[j], items[i]] + items[j + 1:]
    out = []
    for c, fs, its in _reduce(rest, free):
        out.append((c * CRat(2), fs + [ip], its))
    for c, fs, its in _reduce(swapped, free):
        out.append((c * CRat(-1), fs, its))
    return out


def gamma_canonicalize(e: Expr) -> Sum:
    """Expand sigmas, resolve contracted gamma pairs, and order free
    gammas.  Emitted eta and delta factors are left for the contraction
    engine."""
    s = expand_sigma(e)
    out = []
    for t in s.terms:
        if t.chain is None or not any(_is_gamma(it) for it in t.chain.items):
            out.append(t)
            continue
        counts: dict[str, int] = {}
        for ix in ex._term_slot_list(t.factors, t.chain):
            counts[ix.label] = counts.get(ix.label, 0) + 1
        free = {lab for lab, n in counts.items() if n == 1}
        for c, extra, its in _reduce(list(t.chain.items), free):
            chain = SpinorChain(tuple(its)) if its \
                else SpinorChain((ex.identity_spinor(),))
            out.append(Product(t.coeff * c,
                               t.factors + tuple(extra), chain))
    return canonicalize(Sum(tuple(out)))
