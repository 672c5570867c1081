"""Text format for Lagrangian densities.

A source file is a sequence of `;`-terminated statements:

    # Klein-Gordon kinetic term with a quartic self-interaction
    indices spacetime mu nu ;
    fields ginv phi ;
    name scalar ;
    density 1/2 * ginv[mu,nu] * d[mu](phi) * d[nu](phi) - lambda * phi^4 ;

Factors are joined with `*`.  Atoms take comma-separated index labels in
brackets; Clifford indices may carry a leading `-` for a lowered slot.
`d[mu](...)` is the partial derivative.  `lambda`, `f`, `e` and bare `g`
are coupling constants; `g[mu,nu]` is the metric.  `Lam^k` is the formal
scale factor with rational exponent k.  `phi^4` abbreviates a repeated
index-free factor.  The Kronecker delta is internal to the contraction
engine and is not accepted as input."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Union

from . import exprs as ex
from .errors import IndexArityMismatch, ParseError, UndeclaredField
from .exprs import (
    Alphabet,
    CliffordAtom,
    CliffordKind,
    Coupling,
    CRat,
    Expr,
    FieldAtom,
    Index,
    Kind,
    Partial,
    Product,
    Sum,
    Variance,
    canonicalize,
)

_KIND_BY_NAME = {k.value: k for k in Kind}
_CLIFFORD_BY_NAME = {"gamma": CliffordKind.GAMMA, "sigma": CliffordKind.SIGMA,
                     "one": CliffordKind.IDENTITY}
_COUPLING_NAMES = ("lambda", "f", "e", "g")


@dataclass(frozen=True, eq=False)
class LagrangianDef:
    name: str
    source: str
    parsed: Sum
    declared: tuple[Kind, ...]

    def __eq__(self, other) -> bool:
        # source text is presentation, not identity
        if not isinstance(other, LagrangianDef):
            return NotImplemented
        return (self.name == other.name and self.parsed == other.parsed
                and self.declared == other.declared)

    def __hash__(self) -> int:
        return hash((self.name, self.parsed, self.declared))

    def free_indices(self) -> list:
        return ex.free_indices(self.parsed)


# ---------------------------------------------------------------------------
# tokenizer

_SYMBOLS = set(";,[]()*+-^/")


@dataclass(frozen=True)
class _Tok:
    kind: str  # ident | int | sym | eof
    text: str
    line: int
    col: int


def _tokenize(src: str) -> list[_Tok]:
    toks = []
    line, col = 1, 1
    i, n = 0, len(src)
    while i < n:
        ch = src[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "#":
            while i < n and src[i] != "\n":
                i += 1
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (src[j].isalnum() or src[j] == "_"):
                j += 1
            toks.append(_Tok("ident", src[i:j], line, col))
            col += j - i
            i = j
            continue
        if ch.isdigit():
            j = i
            while j < n and src[j].isdigit():
                j += 1
            toks.append(_Tok("int", src[i:j], line, col))
            col += j - i
            i = j
            continue
        if ch in _SYMBOLS:
            toks.append(_Tok("sym", ch, line, col))
            i += 1
            col += 1
            continue
        raise ParseError(f"unexpected character {ch!r}", line, col)
    toks.append(_Tok("eof", "", line, col))
    return toks


# ---------------------------------------------------------------------------
# parser

class _Parser:
    def __init__(self, src: str):
        self.toks = _tokenize(src)
        self.pos = 0
        self.index_alphabet: dict[str, Alphabet] = {}
        self.fields: set[Kind] = set()
        self.name: Optional[str] = None
        self.density: Optional[Expr] = None

    def peek(self) -> _Tok:
        return self.toks[self.pos]

    def advance(self) -> _Tok:
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def fail(self, msg: str, tok: Optional[_Tok] = None):
        t = tok or self.peek()
        raise ParseError(msg, t.line, t.col)

    def expect_sym(self, s: str) -> _Tok:
        t = self.peek()
        if t.kind != "sym" or t.text != s:
            self.fail(f"expected {s!r}", t)
        return self.advance()

    def expect_ident(self) -> _Tok:
        t = self.peek()
        if t.kind != "ident":
            self.fail("expected a name", t)
        return self.advance()

    def at_sym(self, s: str) -> bool:
        t = self.peek()
        return t.kind == "sym" and t.text == s

    # -- statements ---------------------------------------------------------

    def run(self) -> tuple[str, Expr, tuple[Kind, ...]]:
        while self.peek().kind != "eof":
            head = self.expect_ident()
            if head.text == "indices":
                self.stmt_indices()
            elif head.text == "fields":
                self.stmt_fields()
            elif head.text == "name":
                t = self.expect_ident()
                if self.name is not None:
                    self.fail("duplicate name statement", head)
                # hyphenated names: WORD (- WORD)*
                parts = [t.text]
                while self.at_sym("-"):
                    self.advance()
                    parts.append(self.expect_ident().text)
                self.name = "-".join(parts)
                self.expect_sym(";")
            elif head.text == "density":
                if self.density is not None:
                    self.fail("duplicate density statement", head)
                self.density = self.parse_expr()
                self.expect_sym(";")
            else:
                self.fail(f"unknown statement {head.text!r}", head)
        if self.density is None:
            self.fail("missing density statement")
        declared = tuple(sorted(self.fields, key=lambda k: k.value))
        return self.name or "user", self.density, declared

    def stmt_indices(self):
        alph_tok = self.expect_ident()
        try:
            alph = {"spacetime": Alphabet.SPACETIME,
                    "frame": Alphabet.FRAME}[alph_tok.text]
        except KeyError:
            self.fail("expected 'spacetime' or 'frame'", alph_tok)
        labels = []
        while not self.at_sym(";"):
            labels.append(self.expect_ident())
        self.advance()
        if not labels:
            self.fail("empty indices statement", alph_tok)
        for t in labels:
            if t.text in self.index_alphabet:
                self.fail(f"index {t.text!r} declared twice", t)
            self.index_alphabet[t.text] = alph

    def stmt_fields(self):
        got = False
        while not self.at_sym(";"):
            t = self.expect_ident()
            got = True
            if t.text == "delta":
                self.fail("delta is internal to the contraction engine", t)
            kind = _KIND_BY_NAME.get(t.text)
            if kind is None:
                raise UndeclaredField(f"unknown field {t.text!r}",
                                      t.line, t.col)
            self.fields.add(kind)
        self.advance()
        if not got:
            self.fail("empty fields statement")

    # -- expressions --------------------------------------------------------

    def parse_expr(self) -> Expr:
        terms = []
        sign = 1
        if self.at_sym("-"):
            self.advance()
            sign = -1
        elif self.at_sym("+"):
            self.advance()
        terms.append(self.parse_term(sign))
        while self.at_sym("+") or self.at_sym("-"):
            op = self.advance()
            terms.append(self.parse_term(1 if op.text == "+" else -1))
        return Sum(tuple(terms))

    def parse_term(self, sign: int) -> Expr:
        coeff = CRat(sign)
        factors: list[Expr] = []
        while True:
            piece = self.parse_factor()
            if isinstance(piece, CRat):
                coeff = coeff * piece
            else:
                factors.extend(piece if isinstance(piece, list) else [piece])
            if self.at_sym("*"):
                self.advance()
                continue
            break
        return Product(coeff, tuple(factors), None)

    def parse_factor(self) -> Union[CRat, Expr, list]:
        t = self.peek()
        if t.kind == "int":
            return self.parse_rational()
        if t.kind == "sym" and t.text == "(":
            return self.parse_complex_literal()
        if t.kind == "ident":
            if t.text == "i":
                self.advance()
                return ex.I_UNIT
            if t.text == "d" and self.toks[self.pos + 1].text == "[":
                return self.parse_derivative()
            return self.parse_atom()
        self.fail("expected a factor", t)

    def parse_rational(self) -> CRat:
        t = self.advance()
        num = int(t.text)
        if self.at_sym("/"):
            self.advance()
            den_t = self.peek()
            if den_t.kind != "int":
                self.fail("expected a denominator", den_t)
            self.advance()
            if int(den_t.text) == 0:
                self.fail("zero denominator", den_t)
            return CRat(Fraction(num, int(den_t.text)))
        return CRat(Fraction(num))

    def parse_signed_rational(self) -> Fraction:
        neg = False
        if self.at_sym("-"):
            self.advance()
            neg = True
        t = self.peek()
        if t.kind != "int":
            self.fail("expected a number", t)
        v = self.parse_rational().re
        return -v if neg else v

    def parse_complex_literal(self) -> CRat:
        self.expect_sym("(")
        re = self.parse_signed_rational()
        sign_t = self.peek()
        if not (self.at_sym("+") or self.at_sym("-")):
            self.fail("expected '+' or '-' in complex literal", sign_t)
        s = 1 if self.advance().text == "+" else -1
        t = self.peek()
        if t.kind != "int":
            self.fail("expected a number", t)
        im = self.parse_rational().re
        self.expect_sym("*")
        i_t = self.expect_ident()
        if i_t.text != "i":
            self.fail("expected 'i'", i_t)
        self.expect_sym(")")
        return CRat(re, s * im)

    def parse_derivative(self) -> Expr:
        self.advance()  # d
        self.expect_sym("[")
        lab_t = self.expect_ident()
        self.expect_sym("]")
        alph = self.index_alphabet.get(lab_t.text)
        if alph is None:
            self.fail(f"undeclared index {lab_t.text!r}", lab_t)
        if alph != Alphabet.SPACETIME:
            self.fail("derivative index must be spacetime", lab_t)
        self.expect_sym("(")
        inner = self.parse_expr()
        self.expect_sym(")")
        return Partial(Index(lab_t.text, Alphabet.SPACETIME, Variance.DOWN),
                       inner)

    def parse_index(self, clifford: bool) -> tuple[str, bool, _Tok]:
        lowered = False
        if self.at_sym("-"):
            t = self.advance()
            if not clifford:
                self.fail("explicit variance marks are only valid on "
                          "gamma and sigma", t)
            lowered = True
        t = self.expect_ident()
        return t.text, lowered, t

    def parse_bracket_list(self, clifford: bool):
        out = []
        self.expect_sym("[")
        while True:
            out.append(self.parse_index(clifford))
            if self.at_sym(","):
                self.advance()
                continue
            break
        self.expect_sym("]")
        return out

    def parse_exponent(self) -> Fraction:
        self.expect_sym("^")
        if self.at_sym("("):
            self.advance()
            v = self.parse_signed_rational()
            if self.at_sym("/"):
                self.advance()
                t = self.peek()
                if t.kind != "int":
                    self.fail("expected a denominator", t)
                self.advance()
                v = v / int(t.text)
            self.expect_sym(")")
            return v
        neg = False
        if self.at_sym("-"):
            self.advance()
            neg = True
        t = self.peek()
        if t.kind != "int":
            self.fail("expected an exponent", t)
        self.advance()
        v = Fraction(int(t.text))
        return -v if neg else v

    def parse_atom(self) -> Union[Expr, list, CRat]:
        name_t = self.advance()
        name = name_t.text
        has_brackets = self.at_sym("[")

        if name == "delta":
            self.fail("delta is internal to the contraction engine", name_t)

        if name in _CLIFFORD_BY_NAME:
            ck = _CLIFFORD_BY_NAME[name]
            if ck == CliffordKind.IDENTITY:
                if has_brackets:
                    raise IndexArityMismatch("one takes no indices",
                                             name_t.line, name_t.col)
                return CliffordAtom(ck, ())
            if not has_brackets:
                raise IndexArityMismatch(f"{name} needs indices",
                                         name_t.line, name_t.col)
            raw = self.parse_bracket_list(clifford=True)
            want = 1 if ck == CliffordKind.GAMMA else 2
            if len(raw) != want:
                raise IndexArityMismatch(
                    f"{name} takes {want} indices, got {len(raw)}",
                    name_t.line, name_t.col)
            idxs = []
            for lab, lowered, tok in raw:
                alph = self.index_alphabet.get(lab)
                if alph is None:
                    self.fail(f"undeclared index {lab!r}", tok)
                if alph != Alphabet.FRAME:
                    self.fail(f"{name} carries frame indices", tok)
                idxs.append(Index(lab, Alphabet.FRAME,
                                  Variance.DOWN if lowered else Variance.UP))
            return CliffordAtom(ck, tuple(idxs))

        if name in _COUPLING_NAMES and not (name == "g" and has_brackets):
            power = 1
            if self.at_sym("^"):
                v = self.parse_exponent()
                if v.denominator != 1:
                    self.fail("coupling exponents are integers", name_t)
                power = int(v)
            return Coupling(name, power)

        kind = _KIND_BY_NAME.get(name)
        if kind is None:
            raise UndeclaredField(f"unknown field {name!r}",
                                  name_t.line, name_t.col)
        if kind not in self.fields:
            raise UndeclaredField(f"field {name!r} used but not declared",
                                  name_t.line, name_t.col)

        pattern = ex._SLOT_PATTERN[kind]
        if not has_brackets:
            raw = []
        else:
            raw = self.parse_bracket_list(clifford=False)
        if len(raw) != len(pattern):
            raise IndexArityMismatch(
                f"{name} takes {len(pattern)} indices, got {len(raw)}",
                name_t.line, name_t.col)
        idxs = []
        for (lab, _low, tok), (alph, var) in zip(raw, pattern):
            declared = self.index_alphabet.get(lab)
            if declared is None:
                self.fail(f"undeclared index {lab!r}", tok)
            if declared != alph:
                self.fail(f"index {lab!r} has the wrong alphabet for "
                          f"{name}", tok)
            idxs.append(Index(lab, alph, var))

        if kind == Kind.LAMBDA_POWER:
            expo = Fraction(1)
            if self.at_sym("^"):
                expo = self.parse_exponent()
            return FieldAtom(kind, (), expo)

        atom = FieldAtom(kind, tuple(idxs))
        if self.at_sym("^"):
            if idxs:
                self.fail("exponent on an indexed atom", name_t)
            v = self.parse_exponent()
            if v.denominator != 1 or v <= 0:
                self.fail("repetition exponents are positive integers",
                          name_t)
            return [atom] * int(v)
        return atom


def parse(src: str) -> LagrangianDef:
    if not src.strip():
        raise ParseError("empty source", 1, 1)
    p = _Parser(src)
    name, density, declared = p.run()
    return LagrangianDef(name, src, canonicalize(density), declared)


# ---------------------------------------------------------------------------
# renderer

def _rat(fr: Fraction) -> str:
    if fr.denominator == 1:
        return str(fr.numerator)
    return f"{fr.numerator}/{fr.denominator}"


def _coeff_chunks(c: CRat, has_other: bool) -> tuple[int, list[str]]:
    if c.im == 0:
        sign = -1 if c.re < 0 else 1
        mag = abs(c.re)
        if mag == 1 and has_other:
            return sign, []
        return sign, [_rat(mag)]
    if c.re == 0:
        sign = -1 if c.im < 0 else 1
        mag = abs(c.im)
        chunks = [] if mag == 1 else [_rat(mag)]
        return sign, chunks + ["i"]
    op = "+" if c.im > 0 else "-"
    return 1, [f"({_rat(c.re)}{op}{_rat(abs(c.im))}*i)"]


def _exponent_text(expo: Fraction) -> str:
    if expo == 1:
        return ""
    if expo.denominator == 1:
        return f"^{expo.numerator}"
    return f"^({_rat(expo)})"


def _index_text(ix: Index, clifford: bool) -> str:
    if clifford and ix.variance == Variance.DOWN:
        return f"-{ix.label}"
    return ix.label


def _factor_chunk(f: Expr) -> str:
    if isinstance(f, Coupling):
        return f.name if f.power == 1 else f"{f.name}^{f.power}"
    if isinstance(f, FieldAtom):
        if f.kind == Kind.LAMBDA_POWER:
            return "Lam" + _exponent_text(f.exponent)
        base = f.kind.value
        if f.indices:
            labs = ",".join(_index_text(ix, False) for ix in f.indices)
            return f"{base}[{labs}]"
        return base
    if isinstance(f, CliffordAtom):
        name = {CliffordKind.GAMMA: "gamma", CliffordKind.SIGMA: "sigma",
                CliffordKind.IDENTITY: "one"}[f.ckind]
        if not f.indices:
            return name
        labs = ",".join(_index_text(ix, True) for ix in f.indices)
        return f"{name}[{labs}]"
    if isinstance(f, Partial):
        return f"d[{f.index.label}]({_factor_chunk(f.operand)})"
    raise TypeError(f"cannot render {f!r}")


def _term_chunks(t: Product) -> tuple[int, list[str]]:
    items = list(t.factors) + (list(t.chain.items) if t.chain else [])
    sign, chunks = _coeff_chunks(t.coeff, bool(items))
    i = 0
    while i < len(items):
        f = items[i]
        if isinstance(f, FieldAtom) and not f.indices \
                and f.kind != Kind.LAMBDA_POWER:
            j = i
            while j < len(items) and items[j] == f:
                j += 1
            n = j - i
            chunks.append(_factor_chunk(f) + (f"^{n}" if n > 1 else ""))
            i = j
            continue
        chunks.append(_factor_chunk(f))
        i += 1
    return sign, chunks


def render_expr(e: Expr) -> str:
    s = canonicalize(e)
    if not s.terms:
        return "0"
    parts = []
    for k, t in enumerate(s.terms):
        sign, chunks = _term_chunks(t)
        txt = " * ".join(chunks)
        if k == 0:
            parts.append(("-" if sign < 0 else "") + txt)
        else:
            parts.append((" - " if sign < 0 else " + ") + txt)
    return "".join(parts)


def render(L: LagrangianDef) -> str:
    st, fr = set(), set()
    for t in L.parsed.terms:
        for ix in ex._term_slot_list(t.factors, t.chain):
            (st if ix.alphabet == Alphabet.SPACETIME else fr).add(ix.label)
    lines = []
    if st:
        lines.append("indices spacetime " + " ".join(sorted(st)) + " ;")
    if fr:
        lines.append("indices frame " + " ".join(sorted(fr)) + " ;")
    if L.declared:
        lines.append("fields " + " ".join(k.value for k in L.declared)
                     + " ;")
    lines.append(f"name {L.name} ;")
    lines.append(f"density {render_expr(L.parsed)} ;")
    return "\n".join(lines) + "\n"


def used_kinds(e: Expr) -> tuple[Kind, ...]:
    kinds: set[Kind] = set()

    def visit(f):
        if isinstance(f, FieldAtom):
            kinds.add(f.kind)
        elif isinstance(f, Partial):
            visit(f.operand)

    s = canonicalize(e)
    for t in s.terms:
        for f in t.factors:
            visit(f)
        if t.chain:
            for it in t.chain.items:
                visit(it)
    return tuple(sorted(kinds, key=lambda k: k.value))


def make_def(name: str, e: Expr) -> LagrangianDef:
    """Wrap a programmatically built density, deriving declarations and
    source text from the expression itself."""
    parsed = canonicalize(e)
    L = LagrangianDef(name, "", parsed, used_kinds(parsed))
    return LagrangianDef(name, render(L), parsed, L.declared)
