"""Covariantization of derivatives against the scale gauge vector S and
the decoupling checks built on it.

Each derivative of a weighted field is shifted by that field's weight:
d_mu X -> (d_mu + w f S_mu) X.  The gauge potentials A and W are exempt.
Covariantizing the Maxwell, Yang-Mills, and Dirac densities returns them
unchanged (the mesons and the fermion do not feel S), while the scalar
picks up exactly the cross and quadratic S terms of its gauged form."""

from __future__ import annotations

from fractions import Fraction
from typing import Union

from . import densities, dsl
from . import exprs as ex
from .errors import UncoveredDerivative
from .exprs import (
    CliffordAtom,
    CliffordKind,
    Coupling,
    CRat,
    Expr,
    FieldAtom,
    Kind,
    Partial,
    Product,
    SpinorChain,
    Sum,
    canonicalize,
    equal,
)
from .report import Mode, OracleSummary, TraceStep, VerificationReport
from .simplify import full_simplify
from .tensor import contract_pairs

COVARIANT_SHIFT = {
    Kind.METRIC: Fraction(2),
    Kind.INV_METRIC: Fraction(-2),
    Kind.TETRAD: Fraction(1),
    Kind.INV_TETRAD: Fraction(-1),
    Kind.SCALAR: Fraction(-1),
    Kind.FERMION: Fraction(-3, 2),
    Kind.FERMION_BAR: Fraction(-3, 2),
}

EXEMPT_KINDS = {Kind.EM_VECTOR, Kind.YM_VECTOR}


def _covariantize_partial(f: Partial) -> Expr:
    idxs, atom = ex._deriv_split(f)
    kind = atom.kind
    if kind in EXEMPT_KINDS:
        return f
    if kind not in COVARIANT_SHIFT:
        raise UncoveredDerivative(
            f"no covariantization rule for a derivative of "
            f"{kind.value!r}")
    if len(idxs) > 1:
        raise UncoveredDerivative(
            f"nested derivative of {kind.value!r} has no single-shift rule")
    c = COVARIANT_SHIFT[kind]
    ix = idxs[0]
    shift = Product(CRat.of(c),
                    (Coupling("f"), ex.weyl_vector(ix.label), atom), None)
    return Sum((f, shift))


def gauge_covariantize(L: Union[Expr, "dsl.LagrangianDef"]) -> Sum:
    """Apply the derivative shifts across a canonical density."""
    e = L.parsed if isinstance(L, dsl.LagrangianDef) else L
    s = canonicalize(e)
    out = []
    for t in s.terms:
        pieces: list[Expr] = []
        items = list(t.factors) + (list(t.chain.items) if t.chain else [])
        for f in items:
            if isinstance(f, Partial):
                pieces.append(_covariantize_partial(f))
            else:
                pieces.append(f)
        out.append(Product(t.coeff, tuple(pieces), None))
    return canonicalize(Sum(tuple(out)))


def _sigma_terms(s: Sum) -> Sum:
    picked = []
    for t in s.terms:
        if t.chain and any(isinstance(it, CliffordAtom)
                           and it.ckind == CliffordKind.SIGMA
                           for it in t.chain.items):
            picked.append(t)
    return Sum(tuple(picked))


def _kinetic_terms(s: Sum) -> Sum:
    picked = []
    for t in s.terms:
        if t.chain and any(isinstance(it, Partial) for it in t.chain.items):
            picked.append(t)
    return Sum(tuple(picked))


def verify_fermion_decoupling() -> VerificationReport:
    """The Dirac density is unchanged by covariantization: the shifts
    entering through the spin-connection terms reduce, by the
    gamma-sigma contraction, to exactly minus the shift from the
    derivative of the fermion."""
    L = densities.dirac().parsed
    cov = gauge_covariantize(L)
    residual = full_simplify(cov - L)

    sig = _sigma_terms(L)
    sig_extra = contract_pairs(canonicalize(gauge_covariantize(sig) - sig))
    sig_reduced = full_simplify(sig_extra)

    kin = _kinetic_terms(L)
    kin_extra = full_simplify(canonicalize(gauge_covariantize(kin) - kin))

    combined = full_simplify(sig_reduced + kin_extra)
    trace = (
        TraceStep("spin-connection-shift", dsl.render_expr(sig),
                  dsl.render_expr(sig_extra)),
        TraceStep("gamma-sigma-reduction", dsl.render_expr(sig_extra),
                  dsl.render_expr(sig_reduced)),
        TraceStep("derivative-shift", dsl.render_expr(kin),
                  dsl.render_expr(kin_extra)),
        TraceStep("cancellation",
                  "(" + dsl.render_expr(sig_reduced) + ") + ("
                  + dsl.render_expr(kin_extra) + ")",
                  dsl.render_expr(combined)),
    )
    return VerificationReport(
        claim="decoupling:fermion",
        mode=Mode.DECOUPLING,
        passed=not residual.terms and not combined.terms,
        residual=dsl.render_expr(residual),
        trace=trace,
        oracle=OracleSummary(),
    )


def verify_gauge_decoupling() -> VerificationReport:
    """Maxwell and Yang-Mills densities are bit-identical under
    covariantization: their potentials carry weight 0 and their field
    strengths contain no other derivatives."""
    trace = []
    ok = True
    residuals = []
    for name in ("maxwell", "yangmills"):
        L = densities.builtin(name).parsed
        cov = gauge_covariantize(L)
        same = cov == L
        ok = ok and same
        residuals.append(canonicalize(cov - L))
        trace.append(TraceStep(f"covariantize-{name}",
                               dsl.render_expr(L), dsl.render_expr(cov)))
    residual = canonicalize(Sum(tuple(t for r in residuals
                                      for t in r.terms)))
    return VerificationReport(
        claim="decoupling:gauge",
        mode=Mode.DECOUPLING,
        passed=ok and not residual.terms,
        residual=dsl.render_expr(residual),
        trace=tuple(trace),
        oracle=OracleSummary(),
    )


def expected_scalar_coupling() -> Sum:
    """The S terms the paper's gauged scalar density adds: the
    symmetrized cross term and the quadratic term."""
    cross = Product(CRat(-1),
                    (Coupling("f"), ex.inv_metric("mu", "nu"),
                     ex.weyl_vector("mu"), ex.scalar_field(),
                     ex.d("nu", ex.scalar_field())), None)
    quad = Product(CRat(Fraction(1, 2)),
                   (Coupling("f", 2), ex.inv_metric("mu", "nu"),
                    ex.weyl_vector("mu"), ex.weyl_vector("nu"),
                    ex.scalar_field(), ex.scalar_field()), None)
    return canonicalize(cross + quad)


def verify_scalar_coupling() -> VerificationReport:
    """The scalar does couple: covariantizing its density adds exactly
    the predicted S terms, and they vanish again at f = 0."""
    L = densities.scalar().parsed
    cov = gauge_covariantize(L)
    diff = full_simplify(cov - L)
    expected = expected_scalar_coupling()
    mismatch = canonicalize(diff - expected)
    f_zero = ex.set_coupling(diff, "f", 0)
    passed = (bool(diff.terms) and not mismatch.terms
              and not f_zero.terms)
    trace = (
        TraceStep("covariantize-scalar", dsl.render_expr(L),
                  dsl.render_expr(cov)),
        TraceStep("coupling-terms", dsl.render_expr(diff),
                  dsl.render_expr(expected)),
        TraceStep("f-to-zero", dsl.render_expr(diff),
                  dsl.render_expr(f_zero)),
    )
    return VerificationReport(
        claim="decoupling:scalar",
        mode=Mode.DECOUPLING,
        passed=passed,
        residual=dsl.render_expr(mismatch),
        trace=trace,
        oracle=OracleSummary(),
    )


def verify_gamma_sigma() -> VerificationReport:
    """The contraction identity behind fermion decoupling: gamma^c
    sigma_cb reduces to (3/2) gamma_b."""
    lhs = Product(CRat(1), (),
                  SpinorChain((ex.gamma("c"),
                               ex.sigma("c", "b", up1=False, up2=False))))
    rhs = Product(CRat(Fraction(3, 2)), (),
                  SpinorChain((ex.gamma("b", up=False),)))
    reduced = full_simplify(lhs)
    residual = full_simplify(lhs - rhs)
    trace = (
        TraceStep("gamma-sigma-reduction", dsl.render_expr(canonicalize(lhs)),
                  dsl.render_expr(reduced)),
    )
    return VerificationReport(
        claim="identity:gamma-sigma",
        mode=Mode.IDENTITY,
        passed=not residual.terms,
        residual=dsl.render_expr(residual),
        trace=trace,
        oracle=OracleSummary(),
    )
