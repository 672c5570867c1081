"""Combined simplification: canonicalize, contract, reduce gammas, to a
fixpoint."""

from __future__ import annotations

from .clifford import gamma_canonicalize
from .exprs import Expr, Sum, canonicalize
from .tensor import contract_pairs


def full_simplify(e: Expr) -> Sum:
    """Alternate contraction and gamma reduction until stable.  Each
    round strictly shrinks a termination measure, so the cap is never
    reached on well-formed input."""
    cur = canonicalize(e)
    for _ in range(30):
        nxt = contract_pairs(cur)
        nxt = gamma_canonicalize(nxt)
        nxt = contract_pairs(nxt)
        if nxt == cur:
            return cur
        cur = nxt
    raise RuntimeError("simplification did not stabilize")
