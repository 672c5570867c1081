"""Weight inference and global/local scale transformations.

A global transformation multiplies each field by Lam to its weight.  A
local one places the factor under any derivative acting on the field,
so flattening's chain rule emits D (the gradient of ln Lam), and shifts
the gauge vector S by -(1/f) D.  A density is invariant when Lam^4
times its transform equals the original."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Optional, Union

from . import dsl
from . import exprs as ex
from .exprs import (
    Coupling,
    CRat,
    Expr,
    FieldAtom,
    Kind,
    Partial,
    Product,
    Sum,
    canonicalize,
)
from .report import Mode, OracleSummary, TraceStep, VerificationReport
from .simplify import full_simplify


@dataclass(frozen=True)
class WeylWeight:
    value: Fraction
    homogeneous: bool = True


class SpecialWeight(Enum):
    MIXED = "mixed"
    INHOMOGENEOUS = "inhomogeneous"


MIXED = SpecialWeight.MIXED
INHOMOGENEOUS = SpecialWeight.INHOMOGENEOUS

WeightTable = dict  # Kind -> WeylWeight


def default_weight_table() -> WeightTable:
    w = lambda n, d=1: WeylWeight(Fraction(n, d))
    return {
        Kind.METRIC: w(2),
        Kind.INV_METRIC: w(-2),
        Kind.DET_FACTOR: w(4),
        Kind.TETRAD: w(1),
        Kind.INV_TETRAD: w(-1),
        Kind.SCALAR: w(-1),
        Kind.EM_VECTOR: w(0),
        Kind.YM_VECTOR: w(0),
        Kind.FERMION: w(-3, 2),
        Kind.FERMION_BAR: w(-3, 2),
        Kind.WEYL_VECTOR: WeylWeight(Fraction(0), homogeneous=False),
        Kind.MINKOWSKI: w(0),
        Kind.MINKOWSKI_UP: w(0),
        Kind.DELTA: w(0),
        Kind.STRUCTURE_CONST: w(0),
        Kind.LAMBDA_POWER: w(0),
        Kind.LOG_DERIV: w(0),
    }


_DEFAULT = default_weight_table()


def _atom_weight(f: Expr, table: WeightTable) -> WeylWeight:
    if isinstance(f, FieldAtom):
        return table[f.kind]
    if isinstance(f, Partial):
        _, atom = ex._deriv_split(f)
        return _atom_weight(atom, table)
    # couplings and Clifford atoms
    return WeylWeight(Fraction(0))


def infer_weight(e: Expr, table: Optional[WeightTable] = None,
                 strict: bool = False
                 ) -> Union[WeylWeight, SpecialWeight]:
    """Weight of a canonical expression: per-term sum of atom weights,
    the common value across terms.  Returns MIXED when terms disagree
    and, under strict, INHOMOGENEOUS when any S atom is present."""
    table = table or _DEFAULT
    s = canonicalize(e)
    if not s.terms:
        return WeylWeight(Fraction(0))
    values = []
    homogeneous = True
    for t in s.terms:
        total = Fraction(0)
        items = list(t.factors) + (list(t.chain.items) if t.chain else [])
        for f in items:
            w = _atom_weight(f, table)
            total += w.value
            homogeneous = homogeneous and w.homogeneous
        values.append(total)
    if strict and not homogeneous:
        return INHOMOGENEOUS
    if any(v != values[0] for v in values[1:]):
        return MIXED
    return WeylWeight(values[0], homogeneous)


def _scaled_atom_local(f: FieldAtom, table: WeightTable,
                       power: Fraction) -> Expr:
    if f.kind == Kind.WEYL_VECTOR:
        shift = Product(CRat.of(-power),
                        (Coupling("f", -1), ex.log_deriv(f.indices[0].label)),
                        None)
        return Sum((f, shift))
    w = table[f.kind].value
    if w == 0 or f.kind == Kind.LAMBDA_POWER:
        return f
    return Product(CRat(1), (ex.lam(power * w), f), None)


def _transform_term(t: Product, table: WeightTable, power: Fraction,
                    local: bool) -> Expr:
    pieces: list[Expr] = []
    items = list(t.factors) + (list(t.chain.items) if t.chain else [])
    for f in items:
        if isinstance(f, (Coupling, ex.CliffordAtom)):
            pieces.append(f)
        elif isinstance(f, FieldAtom):
            if local:
                pieces.append(_scaled_atom_local(f, table, power))
            else:
                w = table[f.kind].value
                if w != 0 and f.kind != Kind.LAMBDA_POWER:
                    pieces.append(ex.lam(power * w))
                pieces.append(f)
        elif isinstance(f, Partial):
            idxs, atom = ex._deriv_split(f)
            if local:
                inner = _scaled_atom_local(atom, table, power)
                pieces.append(ex._deriv_join(idxs, inner))
            else:
                w = table[atom.kind].value
                if w != 0 and atom.kind != Kind.LAMBDA_POWER:
                    pieces.append(ex.lam(power * w))
                pieces.append(f)
        else:
            raise TypeError(f"unexpected factor {f!r}")
    return Product(t.coeff, tuple(pieces), None)


def _apply_scale(e: Expr, table: Optional[WeightTable], power,
                 local: bool) -> Sum:
    table = table or _DEFAULT
    power = Fraction(power)
    s = canonicalize(e)
    out = [_transform_term(t, table, power, local) for t in s.terms]
    return canonicalize(Sum(tuple(out)))


def apply_global_scale(e: Expr, table: Optional[WeightTable] = None,
                       power=1) -> Sum:
    """Multiply every weighted atom by Lam^(power * weight); constant
    Lam, so derivatives pass through and S is untouched."""
    return _apply_scale(e, table, power, local=False)


def apply_local_scale(e: Expr, table: Optional[WeightTable] = None,
                      power=1) -> Sum:
    """Spacetime-dependent rescaling: weighted atoms pick up Lam^(pw)
    inside derivatives (the chain rule emits D terms) and S shifts by
    -(power/f) D."""
    return _apply_scale(e, table, power, local=True)


def check_invariance(L, mode: Mode,
                     table: Optional[WeightTable] = None
                     ) -> VerificationReport:
    """Residual of Lam^4 * transform(L) - L, fully simplified.  Passes
    iff the residual is exactly zero."""
    if isinstance(L, dsl.LagrangianDef):
        name, expr = L.name, L.parsed
    else:
        name, expr = "expr", canonicalize(L)
    if mode == Mode.GLOBAL:
        transformed = apply_global_scale(expr, table)
    elif mode == Mode.LOCAL:
        transformed = apply_local_scale(expr, table)
    else:
        raise ValueError(f"check_invariance expects Global or Local, "
                         f"got {mode}")
    rescaled = canonicalize(ex.lam(Fraction(4)) * transformed)
    residual = full_simplify(rescaled - expr)
    trace = (
        TraceStep(f"apply-{mode.value}-scale", dsl.render_expr(expr),
                  dsl.render_expr(transformed)),
        TraceStep("rescale-by-Lam4", dsl.render_expr(transformed),
                  dsl.render_expr(rescaled)),
        TraceStep("residual", dsl.render_expr(canonicalize(rescaled - expr)),
                  dsl.render_expr(residual)),
    )
    return VerificationReport(
        claim=f"invariance:{name}:{mode.value}",
        mode=mode,
        passed=not residual.terms,
        residual=dsl.render_expr(residual),
        trace=trace,
        oracle=OracleSummary(),
    )


def drop_log_derivative(e) -> ex.Sum:
    """Set D_mu to zero: the constant-Lambda limit of a local transform."""
    rule = ex.AtomRule(ex.Kind.LOG_DERIV, lambda atom: ex.Sum(()))
    return ex.substitute(e, rule)
