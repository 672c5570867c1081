"""Numeric oracle: seeded assignments, the evaluator, and the check
catalog that pins every rewrite rule to floating-point agreement."""

import time
from fractions import Fraction

import numpy as np
import pytest

import strategies as gen
from weylcheck import exprs as ex
from weylcheck import oracle
from weylcheck.errors import SingularAssignment, UnboundIndex
from weylcheck.oracle import (
    Assignment,
    catalog,
    evaluate,
    evaluate_components,
    relative_deviation,
    run_oracle,
)
from weylcheck.scale import WeylWeight, apply_global_scale, infer_weight


def test_full_run_passes_within_budget():
    t0 = time.time()
    r = run_oracle(trials=100, seed=0)
    elapsed = time.time() - t0
    assert r.passed, r.residual
    assert elapsed < 60.0
    assert r.claim == "oracle:rewrite-rules"
    assert r.oracle.trials == 100
    assert r.oracle.seed == 0
    assert r.oracle.maxdev is not None and r.oracle.maxdev < 1e-9


def test_catalog_names_unique_and_typed():
    checks = catalog()
    names = [c.name for c in checks]
    assert len(names) == len(set(names))
    assert len(checks) >= 40
    assert any(c.pure for c in checks)
    assert any(not c.pure for c in checks)
    for c in checks:
        assert c.tolerance == (1e-12 if c.pure else 1e-9)
        group = c.name.split("/")[0]
        assert group in {"tensor", "clifford", "scale", "gauge", "oracle"}


def test_assignment_deterministic():
    a = Assignment((3, 17))
    b = Assignment((3, 17))
    assert np.array_equal(a.E0, b.E0)
    assert np.array_equal(a.x, b.x)
    assert a.detg0 == b.detg0
    c = Assignment((3, 18))
    assert not np.array_equal(a.E0, c.E0)


def test_assignment_tetrad_well_conditioned():
    for trial in range(10):
        a = Assignment((0, trial))
        assert abs(np.linalg.det(a.E0)) > 0.1
        assert np.linalg.cond(a.G0) < 1e3


def test_assignment_exhaustion_raises(monkeypatch):
    monkeypatch.setattr(oracle, "_MAX_RESAMPLE", 0)
    with pytest.raises(SingularAssignment):
        Assignment((0, 0))


def test_structure_constants_antisymmetric():
    a = Assignment((1, 1))
    f = a.structf
    assert np.allclose(f, -np.transpose(f, (1, 0, 2)))
    assert np.allclose(f, -np.transpose(f, (0, 2, 1)))
    assert np.allclose(f, np.transpose(f, (1, 2, 0)))


def test_tetrad_scale_rescales_determinant():
    a = Assignment((2, 5))
    b = Assignment(a.key, tetrad_scale=1.5)
    assert abs(b.detg0 - 1.5 ** 4 * a.detg0) < 1e-9 * abs(a.detg0)
    assert np.allclose(b.G0, 1.5 ** 2 * a.G0)


def test_metric_inverse_numeric_identity():
    a = Assignment((4, 0))
    e = ex.inv_metric("m", "n") * ex.metric("n", "z")
    for i in range(4):
        for j in range(4):
            v = evaluate(e, a, {"m": i, "z": j})
            assert abs(v - (1.0 if i == j else 0.0)) < 1e-9


def test_full_metric_trace_is_dimension():
    a = Assignment((4, 1))
    v = evaluate(ex.inv_metric("m", "n") * ex.metric("m", "n"), a, {})
    assert abs(v - 4.0) < 1e-9


def test_unbound_index_raises():
    a = Assignment((4, 2))
    with pytest.raises(UnboundIndex):
        evaluate(ex.em_vector("m"), a, {})
    with pytest.raises(UnboundIndex):
        evaluate(ex.em_vector("m"), a, {"m": 7})


def test_lambda_powers_compose_pointwise():
    a = Assignment((4, 3))
    phi = ex.scalar_field()
    lhs = evaluate(ex.lam(Fraction(2)) * ex.lam(Fraction(3)) * phi, a, {})
    rhs = a.lam(Fraction(5)) * evaluate(phi, a, {})
    assert relative_deviation(lhs, rhs) < 1e-12


def test_derivative_values_match_polynomial_jets():
    a = Assignment((4, 4))
    # d_m phi evaluated against the sampled polynomial's gradient
    for m in range(4):
        v = evaluate(ex.d("m", ex.scalar_field()), a, {"m": m})
        assert relative_deviation(v, a.tensor_jet(ex.Kind.SCALAR, 1)[m]) \
            < 1e-12


def test_evaluate_components_shares_free_structure():
    a = Assignment((4, 5))
    e = ex.em_vector("m") + ex.weyl_vector("m")
    arr, labels, state = evaluate_components(e, a)
    assert arr.shape == (4,)
    assert labels == ("m",)
    assert state == "scalar"
    want = (a.tensor_jet(ex.Kind.EM_VECTOR, 0)
            + a.tensor_jet(ex.Kind.WEYL_VECTOR, 0))
    assert np.allclose(arr, want)


def test_relative_deviation_scale_free():
    assert relative_deviation(1.0, 1.0) == 0.0
    big = relative_deviation(1e12, 1e12 + 1e3)
    small = relative_deviation(1e-12, 2e-12)
    assert big < 1e-8
    assert small < 1e-11  # absolute floor keeps tiny values forgiving


def test_global_homogeneity_on_generated():
    """Pointwise, a weight-w expression rescales by exp(w ell); checked
    on generated scalars with a well-defined weight."""
    checked = 0
    worst = 0.0
    for seed in range(120):
        s = gen.random_expr(seed, require_scalar=True)
        w = infer_weight(s)
        if not isinstance(w, WeylWeight):
            continue
        a = Assignment((7, seed))
        base = evaluate(s, a, {})
        scaled = evaluate(apply_global_scale(s), a, {})
        dev = relative_deviation(scaled, a.lam(w.value) * base)
        worst = max(worst, dev)
        checked += 1
    assert checked >= 40
    assert worst < 1e-9, worst


def test_chain_evaluation_matches_direct_matrices():
    a = Assignment((4, 6))
    from weylcheck.exprs import CRat, Product, SpinorChain
    e = Product(CRat(1), (), SpinorChain(
        (ex.fermion_bar(), ex.gamma("a", up=False), ex.fermion())))
    psi = a.tensor_jet(ex.Kind.FERMION, 0)
    bar = a.tensor_jet(ex.Kind.FERMION_BAR, 0)
    for i in range(4):
        want = bar @ oracle.GAMMA_LO[i] @ psi
        got = evaluate(e, a, {"a": i})
        assert relative_deviation(got, want) < 1e-12
