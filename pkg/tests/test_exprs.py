"""Canonical forms, arithmetic, and substitution in the expression core."""

import random
import re
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

import strategies as gen
from weylcheck import dsl
from weylcheck import exprs as ex
from weylcheck.errors import IndexClash, MalformedIndex
from weylcheck.exprs import CRat, I_UNIT, Product, SpinorChain, Sum


def test_canonicalize_idempotent_on_builtins(builtins_all):
    for L in builtins_all.values():
        c = ex.canonicalize(L.parsed)
        assert ex.canonicalize(c) == c


@given(st.integers(0, 10_000))
def test_canonicalize_idempotent_on_generated(seed):
    s = gen.random_expr(seed)
    assert ex.canonicalize(s) == s


@given(st.integers(0, 10_000))
def test_like_terms_double(seed):
    s = gen.random_expr(seed)
    doubled = Sum(tuple(Product(t.coeff * CRat(2), t.factors, t.chain)
                        for t in s.terms))
    assert ex.canonicalize(s + s) == ex.canonicalize(doubled)


@given(st.integers(0, 10_000))
def test_self_difference_vanishes(seed):
    s = gen.random_expr(seed)
    assert ex.is_zero(s - s)


@given(st.integers(0, 10_000))
def test_factor_order_irrelevant(seed):
    s = gen.random_expr(seed)
    rng = random.Random(seed + 1)
    shuffled = []
    for t in s.terms:
        fs = list(t.factors)
        rng.shuffle(fs)
        shuffled.append(Product(t.coeff, tuple(fs), t.chain))
    assert ex.canonicalize(Sum(tuple(shuffled))) == s


@given(st.integers(0, 10_000))
def test_dummy_names_irrelevant(seed):
    """Renaming dummy labels in the source text cannot change the
    canonical form."""
    s = gen.random_expr(seed)
    doc = dsl.render(dsl.make_def("gen", s))
    renamed = re.sub(r"\b(mu|fa)(\d+)\b", r"w\2\1", doc)
    assert dsl.parse(renamed).parsed == s


@given(st.integers(0, 10_000), st.integers(0, 10_000))
def test_addition_canonical_agnostic(seed_a, seed_b):
    a = gen.random_expr(seed_a, require_scalar=True)
    b = gen.random_expr(seed_b, require_scalar=True)
    assert ex.canonicalize(a + b) == \
        ex.canonicalize(ex.canonicalize(a) + ex.canonicalize(b))


def test_power_expands():
    phi = ex.scalar_field()
    assert ex.equal(phi ** 4, phi * phi * phi * phi)
    assert ex.equal(phi ** 1, phi)


def test_sigma_antisymmetry():
    bar, psi = ex.fermion_bar(), ex.fermion()

    def chain(*items):
        return Product(CRat(1), (), SpinorChain(tuple(items)))

    s_ab = chain(bar, ex.sigma("a", "b", up1=False, up2=False), psi)
    s_ba = chain(bar, ex.sigma("b", "a", up1=False, up2=False), psi)
    assert ex.is_zero(s_ab + s_ba)
    assert ex.equal(s_ab, Product(CRat(-1), (), s_ba.chain))
    # contracted slots of one sigma: an antisymmetric trace
    assert ex.is_zero(chain(bar, ex.sigma("a", "a", up1=True, up2=False),
                            psi))


def test_structure_constants_are_opaque():
    """No permutation symmetry is imposed symbolically; densities use a
    single orientation so cancellations stay structural."""
    close = (ex.minkowski("a", "z0") * ex.minkowski("b", "z1")
             * ex.minkowski("c", "z2"))
    f_abc = ex.structure_const("a", "b", "c") * close
    f_bac = ex.structure_const("b", "a", "c") * close
    assert not ex.is_zero(f_abc + f_bac)
    assert not ex.equal(f_abc, f_bac)


def test_metric_symmetry():
    assert ex.equal(ex.metric("a", "b"), ex.metric("b", "a"))
    assert ex.equal(ex.inv_metric("a", "b"), ex.inv_metric("b", "a"))
    assert ex.equal(ex.minkowski("a", "b"), ex.minkowski("b", "a"))


def test_crat_arithmetic():
    assert I_UNIT * I_UNIT == CRat(-1)
    assert CRat(2) ** -1 == CRat(Fraction(1, 2))
    assert (CRat(1, Fraction(1)) * CRat(1, Fraction(-1))
            == CRat(2))  # (1+i)(1-i) = 2
    assert CRat(3).is_zero() is False
    assert CRat(0).is_zero() is True


def test_repeated_same_variance_rejected():
    bad = ex.metric("a", "b") * ex.metric("a", "c")
    with pytest.raises(MalformedIndex):
        ex.canonicalize(bad)


def test_triple_label_rejected():
    bad = (ex.inv_metric("a", "b") * ex.metric("a", "c")
           * ex.em_vector("a"))
    with pytest.raises(MalformedIndex):
        ex.canonicalize(bad)


def test_mixed_free_indices_rejected():
    with pytest.raises(MalformedIndex):
        ex.canonicalize(ex.em_vector("m") + ex.weyl_vector("n"))


def test_free_indices():
    e = ex.inv_metric("m", "n") * ex.d("m", ex.scalar_field())
    frees = ex.free_indices(e)
    assert {ix.label for ix in frees} == {"n"}
    assert ex.free_indices(ex.scalar_field() ** 2) == frozenset()


def test_set_coupling_folds_value():
    phi = ex.scalar_field()
    e = Product(CRat(2), (ex.coupling("f", 2), phi), None)
    got = ex.set_coupling(e, "f", Fraction(1, 2))
    assert got == ex.canonicalize(Product(CRat(Fraction(1, 2)), (phi,), None))


def test_set_coupling_zero_kills_terms():
    phi = ex.scalar_field()
    e = ex.coupling("f") * phi + phi * phi
    got = ex.set_coupling(e, "f", 0)
    assert got == ex.canonicalize(phi * phi)


def test_set_coupling_zero_at_negative_power_raises():
    e = ex.coupling("f", -1) * ex.scalar_field()
    with pytest.raises(ZeroDivisionError):
        ex.set_coupling(e, "f", 0)


def test_set_coupling_other_names_untouched():
    e = ex.coupling("e") * ex.coupling("g") * ex.scalar_field()
    got = ex.set_coupling(e, "f", 0)
    assert got == ex.canonicalize(e)


def test_substitute_replaces_under_derivative():
    rule = ex.AtomRule(ex.Kind.SCALAR,
                       lambda a: Product(CRat(2), (ex.scalar_field(),), None))
    e = ex.inv_metric("m", "n") * ex.d("m", ex.scalar_field()) \
        * ex.d("n", ex.scalar_field())
    got = ex.substitute(e, rule)
    assert got == ex.canonicalize(Product(CRat(4), tuple(
        ex.canonicalize(e).terms[0].factors), None))


def test_substitute_to_zero():
    rule = ex.AtomRule(ex.Kind.WEYL_VECTOR, lambda a: Sum(()))
    e = ex.weyl_vector("m") * ex.em_vector("n") * ex.inv_metric("m", "n") \
        + ex.scalar_field() ** 2
    assert ex.substitute(e, rule) == ex.canonicalize(ex.scalar_field() ** 2)


def test_substitute_index_mismatch_raises():
    rule = ex.AtomRule(ex.Kind.EM_VECTOR, lambda a: ex.scalar_field())
    e = ex.em_vector("m") * ex.weyl_vector("n") * ex.inv_metric("m", "n")
    with pytest.raises(IndexClash):
        ex.substitute(e, rule)


def test_derivative_chain_rule():
    phi = ex.scalar_field()
    prod = ex.d("m", phi * phi)
    expanded = Product(CRat(2), (phi, ex.d("m", phi)), None)
    assert ex.equal(prod, expanded)


def test_count_atoms():
    e = ex.weyl_vector("m") * ex.weyl_vector("n") * ex.inv_metric("m", "n")
    assert ex.count_atoms(e, ex.Kind.WEYL_VECTOR) == 2
    assert ex.count_atoms(e, ex.Kind.SCALAR) == 0
