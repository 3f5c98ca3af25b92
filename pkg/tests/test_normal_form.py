import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cascade_lab.normal_form import (
    MajorantParams, NormalFormError, SmallDivisorError, TaylorFourierPoly, conserved_functional,
    degree, divisor_of, lie_series, majorant_norm, normal_hamiltonian, poisson_bracket,
    random_admissible_poly, random_poly, selection_bracket, solve_homological,
)
from cascade_lab.resonance import MonomialIndex
from cascade_lab.spectrum import FrequencyModel, make_sites

from oracles import evaluate, sympy_bracket, to_sympy

S12 = make_sites((1, 2), 1)
FAR = make_sites((5, 6), 1)  # outside the window of random_poly
seeds = st.integers(0, 2 ** 32 - 1)


def fm(lam=(0.6, 0.8), eps=0.1):
    return FrequencyModel(S12, np.array(lam), eps)


def mono(c=1.0, ell=(0, 0), l=(0, 0), alpha=None, beta=None):
    return TaylorFourierPoly.monomial(c, ell, l, alpha, beta, d=2)


def triple(seed, count=8):
    rng = np.random.default_rng(seed)
    return [random_poly(rng, count=count) for _ in range(3)]


# ---------------------------------------------------------------- degree and algebra

def test_degree_examples():
    assert degree(MonomialIndex.make((0,), (0,), {(3, 3): 1}, {(3, 3): 1})) == 0
    assert degree(MonomialIndex.make((0,), (0,), {(3, 3): 4})) == 2
    assert degree(MonomialIndex.make((0,), (1,))) == 0


def test_action_bracket():
    j = (3, 4)
    out = poisson_bracket(mono(alpha={j: 1}, beta={j: 1}), mono(alpha={j: 1}))
    assert out == mono(1j, alpha={j: 1})


def test_mass_commutation_rule():
    rng = np.random.default_rng(3)
    F = random_poly(rng, count=15)
    M = conserved_functional("mass", FAR, F.modes())
    got = poisson_bracket(M, F)
    assert (got - selection_bracket("mass", F, FAR)).max_abs() <= 1e-12
    for k, v in F:
        modes, sig = k.modes_and_signs()
        eta = sum(sig) + sum(k.ell)
        assert got.terms.get(k, 0) == pytest.approx(1j * eta * v)


@pytest.mark.parametrize("kind", ["mass", "px", "py"])
def test_selection_bracket_matches_bracket(kind):
    rng = np.random.default_rng(11)
    F = random_poly(rng, count=20)
    C = conserved_functional(kind, FAR, F.modes())
    assert (poisson_bracket(C, F) - selection_bracket(kind, F, FAR)).max_abs() <= 1e-12


def test_bracket_matches_symbolic():
    rng = np.random.default_rng(5)
    for trial in range(4):
        F = random_poly(rng, count=3, window=1)
        G = random_poly(rng, count=3, window=1)
        modes = sorted(set(F.modes()) | set(G.modes()))
        ref, syms = sympy_bracket(F, G, 2, modes)
        got = to_sympy(poisson_bracket(F, G), 2, modes)[0]
        pt = np.random.default_rng(trial)
        for _ in range(3):
            r = pt.integers(1 << 30)
            a = evaluate(ref, syms, np.random.default_rng(r))
            b = evaluate(got, syms, np.random.default_rng(r))
            assert abs(a - b) <= 1e-10 * (1 + abs(a))


@given(seeds)
def test_antisymmetry_and_self_bracket(seed):
    F, G, _ = triple(seed)
    assert (poisson_bracket(F, G) + poisson_bracket(G, F)).max_abs() <= 1e-12
    assert poisson_bracket(F, F).max_abs() <= 1e-12


@given(seeds, st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False))
def test_bilinearity(seed, c):
    F, G, H = triple(seed)
    lhs = poisson_bracket(F.scale(c) + G, H)
    rhs = poisson_bracket(F, H).scale(c) + poisson_bracket(G, H)
    assert (lhs - rhs).max_abs() <= 1e-12 * (1 + abs(c)) * 10


@given(seeds)
def test_leibniz(seed):
    F, G, H = triple(seed)
    res = poisson_bracket(F * G, H) - (F * poisson_bracket(G, H) + poisson_bracket(F, H) * G)
    assert res.max_abs() <= 1e-12


@settings(max_examples=15)
@given(seeds)
def test_jacobi(seed):
    F, G, H = triple(seed, count=20)
    res = (poisson_bracket(poisson_bracket(F, G), H) + poisson_bracket(poisson_bracket(G, H), F)
           + poisson_bracket(poisson_bracket(H, F), G))
    assert res.max_abs() <= 1e-12


@given(seeds)
def test_degree_additivity(seed):
    F, G, _ = triple(seed)
    for k1, _c1 in F:
        for k2, _c2 in G:
            B = poisson_bracket(TaylorFourierPoly({k1: 1.0}, d=2), TaylorFourierPoly({k2: 1.0}, d=2))
            assert all(k.degree() == k1.degree() + k2.degree() for k in B.terms)


@given(seeds)
def test_selection_closure(seed):
    rng = np.random.default_rng(seed)
    model = fm()
    F = random_admissible_poly(rng, model, deg=1, count=6)
    G = random_admissible_poly(rng, model, deg=2, count=6)
    for kind in ("mass", "px", "py"):
        assert not selection_bracket(kind, F, S12)
        assert not selection_bracket(kind, G, S12)
        assert not selection_bracket(kind, poisson_bracket(F, G), S12)


# ---------------------------------------------------------------- majorant norm

def test_majorant_single_monomial():
    P = mono(3 - 4j, ell=(1, -2), l=(1, 0), alpha={(3, 3): 2}, beta={(4, 4): 1})
    rho, r = 0.3, 0.5
    deg = 2 * 1 + 3 - 2
    weight = 1 + 3 + 2 + 1  # |l| + |ell| + |alpha| + |beta|
    assert majorant_norm(P, MajorantParams(rho, r)) == pytest.approx(5 * math.exp(rho * 3) * r ** deg * weight)


def test_majorant_monotone():
    rng = np.random.default_rng(2)
    P = random_poly(rng, count=12)
    base = majorant_norm(P, MajorantParams(0.2, 0.5))
    assert majorant_norm(P, MajorantParams(0.3, 0.5)) >= base
    assert majorant_norm(P, MajorantParams(0.2, 0.6)) >= base


def test_majorant_zero_and_params():
    assert majorant_norm(TaylorFourierPoly.zero(2), MajorantParams(0.1, 0.1)) == 0.0
    with pytest.raises(NormalFormError):
        MajorantParams(0.0, 1.0)


# ---------------------------------------------------------------- homological equation

def test_homological_hand_case():
    model = fm()
    K = mono(2 + 1j, alpha={(0, 2): 1, (3, 3): 1}, beta={(4, 1): 1})
    (k, _), = list(K)
    assert divisor_of(model, k) == 5.0
    sol = solve_homological(K, model)
    assert len(sol.chi) == 1
    assert sol.chi.terms[k] == pytest.approx(1j * (2 + 1j) / 5)
    assert sol.residual == 0.0


def test_homological_zero():
    sol = solve_homological(TaylorFourierPoly.zero(2), fm())
    assert not sol.chi and sol.residual == 0.0


def test_homological_small_divisor_error():
    K = mono(1.0, alpha={(3, 4): 1}, beta={(3, 4): 1})
    with pytest.raises(SmallDivisorError) as e:
        solve_homological(K, fm(), floor=0.1)
    msg = str(e.value)
    assert "ell=(0, 0)" in msg and "(3, 4)" in msg and "sigma=[1, -1]" in msg


@given(seeds)
def test_homological_identity_random(seed):
    rng = np.random.default_rng(seed)
    lam = 0.5 + 0.5 * rng.random(2)
    model = fm(lam)
    K = random_admissible_poly(rng, model, deg=3, count=40, floor=0.1)
    sol = solve_homological(K, model, floor=0.1)
    assert sol.residual <= 1e-12
    N = normal_hamiltonian(model, K.modes())
    assert (poisson_bracket(N, sol.chi) + K).max_abs() <= 1e-12
    for kind in ("mass", "px", "py"):
        assert not selection_bracket(kind, sol.chi, S12)


# ---------------------------------------------------------------- Lie series

def _nested(f, h, i_min, cutoff):
    total, term, fact = TaylorFourierPoly.zero(2), h.filter_degree(hi=cutoff), 1.0
    for order in range(40):
        if not term:
            break
        if order >= i_min:
            total = total + term.scale(1.0 / fact)
        term = poisson_bracket(term, f).filter_degree(hi=cutoff)
        fact *= order + 1
    return total


def test_lie_first_term_is_h():
    rng = np.random.default_rng(1)
    f = random_admissible_poly(rng, fm(), deg=1, count=5)
    h = random_admissible_poly(rng, fm(), deg=2, count=5)
    out = lie_series(f, h, 0, degree_cutoff=2)
    assert out == h


def test_lie_one_step():
    rng = np.random.default_rng(7)
    f = random_admissible_poly(rng, fm(), deg=1, count=6)
    h = random_admissible_poly(rng, fm(), deg=1, count=6)
    out = lie_series(f, h, 1, degree_cutoff=6)
    rest = out - poisson_bracket(h, f)
    assert rest.min_degree() is None or rest.min_degree() >= 2 * 1 + 1
    assert (out - _nested(f, h, 1, 6)).max_abs() <= 1e-12


@given(seeds, st.integers(0, 3))
def test_lie_degree_bookkeeping(seed, i_min):
    rng = np.random.default_rng(seed)
    f = random_admissible_poly(rng, fm(), deg=1, count=4)
    h = random_admissible_poly(rng, fm(), deg=1, count=4)
    out = lie_series(f, h, i_min, degree_cutoff=5)
    if out:
        assert out.min_degree() >= f.min_degree() * i_min + h.min_degree()


def test_lie_cutoff_too_small_is_empty():
    rng = np.random.default_rng(0)
    f = random_admissible_poly(rng, fm(), deg=1, count=4)
    h = random_admissible_poly(rng, fm(), deg=2, count=4)
    assert not lie_series(f, h, 1, degree_cutoff=2)


def test_lie_needs_positive_degree():
    with pytest.raises(NormalFormError):
        lie_series(mono(alpha={(3, 3): 1}, beta={(3, 3): 1}), mono(alpha={(4, 4): 1}))


# ---------------------------------------------------------------- serialization

def test_json_round_trip():
    rng = np.random.default_rng(9)
    P = random_poly(rng, count=25)
    text = P.to_json()
    Q = TaylorFourierPoly.from_json(text)
    assert Q == P and Q.to_json() == text


def test_canonical_merge():
    a = TaylorFourierPoly({MonomialIndex.make((0, 0), (0, 0), [((1, 1), 1), ((1, 1), 1)]): 1.0}, d=2)
    b = mono(alpha={(1, 1): 2})
    assert a == b
    assert not (b - b)


def test_real_check():
    P = mono(1.0, alpha={(3, 3): 1}, beta={(4, 4): 1})
    assert not P.is_real()
    assert (P + P.conj()).is_real()
