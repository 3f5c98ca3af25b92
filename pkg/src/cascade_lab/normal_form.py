"""Sparse Taylor-Fourier polynomials in (theta, Y, a, abar).

A polynomial is a finite map MonomialIndex -> complex.  Brackets follow the
convention

    {F, G} = dF/dY . dG/dtheta - dF/dtheta . dG/dY
             + i sum_j (dF/dabar_j dG/da_j - dF/da_j dG/dabar_j)

under which {M, m} = i (eta(alpha, beta) + eta(ell)) m for the mass M and the
homological equation {N, chi} + K = 0 is solved by chi = i K / divisor.
"""

from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass
from types import MappingProxyType

import numpy as np

from .resonance import MonomialIndex, in_S, in_S0, is_admissible
from .spectrum import FrequencyModel, omega_normal, omega_tangential, small_divisor


class NormalFormError(Exception):
    pass


class SmallDivisorError(NormalFormError):
    def __init__(self, idx, value, floor):
        modes, sigma = idx.modes_and_signs()
        super().__init__(f"divisor {value:.3e} below floor {floor:g} for ell={idx.ell}, "
                         f"modes={modes}, sigma={sigma}")
        self.index = idx
        self.value = value


def degree(idx: MonomialIndex) -> int:
    return idx.degree()


def _powers(p):
    return dict(p)


def _merge(p, q):
    acc = dict(p)
    for j, k in q:
        acc[j] = acc.get(j, 0) + k
    return tuple(sorted(acc.items()))


def _drop(p, j):
    out = []
    for jj, k in p:
        if jj == j:
            if k > 1:
                out.append((jj, k - 1))
        else:
            out.append((jj, k))
    return tuple(out)


def _dec(t, i):
    return t[:i] + (t[i] - 1,) + t[i + 1:]


def _add(t, u):
    if not t:
        return tuple(u)
    if not u:
        return tuple(t)
    return tuple(a + b for a, b in zip(t, u))


class TaylorFourierPoly:
    """Immutable sparse polynomial; zero coefficients are never stored."""

    __slots__ = ("_terms", "d")

    def __init__(self, terms=None, d: int | None = None):
        acc = defaultdict(complex)
        for idx, c in (terms.items() if isinstance(terms, dict) else (terms or ())):
            if not isinstance(idx, MonomialIndex):
                idx = MonomialIndex.make(*idx)
            acc[idx] += complex(c)
        clean = {k: v for k, v in acc.items() if v != 0}
        if d is None:
            d = max((len(k.ell) for k in clean), default=0)
            d = max(d, max((len(k.l) for k in clean), default=0))
        self.d = d
        self._terms = MappingProxyType({self._pad(k): v for k, v in clean.items()})

    def _pad(self, idx):
        ell = idx.ell if len(idx.ell) == self.d else tuple(idx.ell) + (0,) * (self.d - len(idx.ell))
        l = idx.l if len(idx.l) == self.d else tuple(idx.l) + (0,) * (self.d - len(idx.l))
        return MonomialIndex(ell, l, idx.alpha, idx.beta)

    @classmethod
    def monomial(cls, coeff=1.0, ell=(), l=(), alpha=None, beta=None, d=None):
        return cls({MonomialIndex.make(ell, l, alpha, beta): coeff}, d=d)

    @classmethod
    def zero(cls, d=0):
        return cls({}, d=d)

    @property
    def terms(self):
        return self._terms

    def __len__(self):
        return len(self._terms)

    def __iter__(self):
        return iter(sorted(self._terms.items(), key=lambda kv: _sort_key(kv[0])))

    def __bool__(self):
        return bool(self._terms)

    def __repr__(self):
        return f"TaylorFourierPoly({len(self)} terms, d={self.d})"

    def _combine(self, other, sign):
        d = max(self.d, other.d)
        acc = defaultdict(complex)
        for k, v in self._terms.items():
            acc[k] += v
        for k, v in other._terms.items():
            acc[k] += sign * v
        return TaylorFourierPoly(acc, d=d)

    def __add__(self, other):
        return self._combine(other, 1)

    def __sub__(self, other):
        return self._combine(other, -1)

    def __neg__(self):
        return self.scale(-1)

    def scale(self, c):
        return TaylorFourierPoly({k: c * v for k, v in self._terms.items()}, d=self.d)

    def __mul__(self, other):
        if not isinstance(other, TaylorFourierPoly):
            return self.scale(other)
        d = max(self.d, other.d)
        a, b = self._padded(d), other._padded(d)
        acc = defaultdict(complex)
        for k1, v1 in a.items():
            for k2, v2 in b.items():
                acc[_product(k1, k2)] += v1 * v2
        return TaylorFourierPoly(acc, d=d)

    __rmul__ = scale

    def _padded(self, d):
        if d == self.d:
            return self._terms
        return TaylorFourierPoly(dict(self._terms), d=d)._terms

    def conj(self):
        out = {}
        for k, v in self._terms.items():
            out[MonomialIndex(tuple(-x for x in k.ell), k.l, k.beta, k.alpha)] = v.conjugate()
        return TaylorFourierPoly(out, d=self.d)

    def is_real(self, tol: float = 1e-12) -> bool:
        return (self - self.conj()).max_abs() <= tol

    def max_abs(self) -> float:
        return max((abs(v) for v in self._terms.values()), default=0.0)

    def degrees(self):
        return sorted({k.degree() for k in self._terms})

    def min_degree(self):
        return min((k.degree() for k in self._terms), default=None)

    def filter_degree(self, lo=None, hi=None):
        keep = {k: v for k, v in self._terms.items()
                if (lo is None or k.degree() >= lo) and (hi is None or k.degree() <= hi)}
        return TaylorFourierPoly(keep, d=self.d)

    def modes(self):
        out = set()
        for k in self._terms:
            out.update(j for j, _ in k.alpha)
            out.update(j for j, _ in k.beta)
        return sorted(out)

    def to_records(self):
        rows = []
        for k, v in self:
            rows.append({"ell": list(k.ell), "l": list(k.l),
                         "alpha": [[j[0], j[1], p] for j, p in k.alpha],
                         "beta": [[j[0], j[1], p] for j, p in k.beta],
                         "re": v.real, "im": v.imag})
        return rows

    def to_json(self) -> str:
        return json.dumps({"d": self.d, "terms": self.to_records()}, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str):
        doc = json.loads(text)
        terms = {}
        for r in doc["terms"]:
            idx = MonomialIndex.make(r["ell"], r["l"], [((a, b), p) for a, b, p in r["alpha"]],
                                     [((a, b), p) for a, b, p in r["beta"]])
            terms[idx] = complex(r["re"], r["im"])
        return cls(terms, d=doc["d"])

    def __eq__(self, other):
        if not isinstance(other, TaylorFourierPoly):
            return NotImplemented
        return dict(self._padded(max(self.d, other.d))) == dict(other._padded(max(self.d, other.d)))

    def __hash__(self):
        return hash(frozenset(self._terms.items()))


def _sort_key(k):
    return (k.degree(), k.ell, k.l, k.alpha, k.beta)


def _product(k1, k2):
    return MonomialIndex(_add(k1.ell, k2.ell), _add(k1.l, k2.l), _merge(k1.alpha, k2.alpha),
                         _merge(k1.beta, k2.beta))


def _bracket_pair(k1, c1, k2, c2, out):
    base = _product(k1, k2)
    c = c1 * c2
    for i in range(len(base.l)):
        w = k1.l[i] * k2.ell[i] - k1.ell[i] * k2.l[i]
        if w:
            out[MonomialIndex(base.ell, _dec(base.l, i), base.alpha, base.beta)] += 1j * w * c
    a1, b1, a2, b2 = _powers(k1.alpha), _powers(k1.beta), _powers(k2.alpha), _powers(k2.beta)
    for j in set(b1) & set(a2) | set(a1) & set(b2):
        w = b1.get(j, 0) * a2.get(j, 0) - a1.get(j, 0) * b2.get(j, 0)
        if w:
            out[MonomialIndex(base.ell, base.l, _drop(base.alpha, j), _drop(base.beta, j))] += 1j * w * c


def poisson_bracket(F: TaylorFourierPoly, G: TaylorFourierPoly) -> TaylorFourierPoly:
    d = max(F.d, G.d)
    f, g = F._padded(d), G._padded(d)
    out = defaultdict(complex)
    for k1, c1 in f.items():
        for k2, c2 in g.items():
            _bracket_pair(k1, c1, k2, c2, out)
    return TaylorFourierPoly(out, d=d)


# ---------------------------------------------------------------- conserved quantities

def conserved_functional(kind: str, sites, modes, tilde: bool = True) -> TaylorFourierPoly:
    """Mass or momentum restricted to the given normal modes.

    With tilde=True the columns above the tangential sites are left out of the
    mass and x-momentum, as after the reducibility change of variables.
    """
    d = sites.d
    terms = {}
    for i in range(d):
        w = {"mass": 1, "px": sites.m[i], "py": 0}[kind]
        if w:
            l = [0] * d
            l[i] = 1
            terms[MonomialIndex.make([0] * d, l)] = w
    for j in modes:
        j = (int(j[0]), int(j[1]))
        if in_S0(j, sites):
            continue
        if kind != "py" and tilde and in_S(j, sites):
            continue
        w = {"mass": 1, "px": j[0], "py": j[1]}[kind]
        if w:
            terms[MonomialIndex.make([0] * d, [0] * d, {j: 1}, {j: 1})] = w
    return TaylorFourierPoly(terms, d=d)


def selection_bracket(kind: str, F: TaylorFourierPoly, sites) -> TaylorFourierPoly:
    """{C, F} for C the tilde mass/momentum, via the commutation rules."""
    out = {}
    for k, v in F.terms.items():
        et = pxt = py = 0
        for sgn, part in ((1, k.alpha), (-1, k.beta)):
            for j, p in part:
                py += sgn * p * j[1]
                if not in_S(j, sites):
                    et += sgn * p
                    pxt += sgn * p * j[0]
        w = {"mass": et + sum(k.ell),
             "px": pxt + sum(a * b for a, b in zip(k.ell, sites.m)),
             "py": py}[kind]
        out[k] = 1j * w * v
    return TaylorFourierPoly(out, d=F.d)


# ---------------------------------------------------------------- majorant norm

@dataclass(frozen=True)
class MajorantParams:
    rho: float
    r: float

    def __post_init__(self):
        if not (self.rho > 0 and self.r > 0):
            raise NormalFormError("rho and r must be positive")


def monomial_majorant(idx: MonomialIndex, coeff, params: MajorantParams) -> float:
    """Vector-field norm of one monomial at |Y_i| = r^2 and all of ||a||_1 on one mode.

    Summing the four components gives
        |c| e^{rho |ell|} r^{deg} (|l| + |ell| + |alpha| + |beta|).
    """
    el1 = sum(abs(x) for x in idx.ell)
    weight = sum(idx.l) + el1 + sum(p for _, p in idx.alpha) + sum(p for _, p in idx.beta)
    if weight == 0:
        return 0.0
    return abs(coeff) * math.exp(params.rho * el1) * params.r ** idx.degree() * weight


def majorant_norm(F: TaylorFourierPoly, params: MajorantParams) -> float:
    """Upper bound for |F|_{rho,r}; exact when F is a single monomial on one mode."""
    return math.fsum(monomial_majorant(k, v, params) for k, v in F.terms.items())


# ---------------------------------------------------------------- homological equation

def normal_hamiltonian(model: FrequencyModel, modes) -> TaylorFourierPoly:
    """omega . Y + sum_j Omega_j |a_j|^2 over the given normal modes."""
    d = model.sites.d
    w = omega_tangential(model)
    terms = {}
    for i in range(d):
        l = [0] * d
        l[i] = 1
        terms[MonomialIndex.make([0] * d, l)] = float(w[i])
    for j in modes:
        j = (int(j[0]), int(j[1]))
        terms[MonomialIndex.make([0] * d, [0] * d, {j: 1}, {j: 1})] = omega_normal(model, j)
    return TaylorFourierPoly(terms, d=d)


def divisor_of(model: FrequencyModel, idx: MonomialIndex) -> float:
    modes, sigma = idx.modes_and_signs()
    ell = idx.ell if idx.ell else (0,) * model.sites.d
    return small_divisor(model, ell, modes, sigma)


@dataclass
class HomologicalSolution:
    chi: TaylorFourierPoly
    residual: float
    min_divisor: float


def solve_homological(K: TaylorFourierPoly, model: FrequencyModel, floor: float = 0.0,
                      check: bool = True) -> HomologicalSolution:
    chi = {}
    dmin = math.inf
    for k, c in K:
        D = divisor_of(model, k)
        if not abs(D) >= floor or D == 0:
            raise SmallDivisorError(k, D, floor)
        dmin = min(dmin, abs(D))
        chi[k] = 1j * c / D
    chi = TaylorFourierPoly(chi, d=max(K.d, model.sites.d))
    res = 0.0
    if check and K:
        N = normal_hamiltonian(model, K.modes())
        res = (poisson_bracket(N, chi) + K).max_abs()
    return HomologicalSolution(chi, res, dmin if K else math.inf)


# ---------------------------------------------------------------- Lie series

def lie_series(f: TaylorFourierPoly, h: TaylorFourierPoly, i_min: int = 0, degree_cutoff: int = 8,
               max_order: int = 64) -> TaylorFourierPoly:
    """sum_{l >= i_min} ad(f)^l h / l!  with ad(f) h = {h, f}, truncated at degree_cutoff."""
    df = f.min_degree()
    if df is None:
        return h if i_min == 0 else TaylorFourierPoly.zero(h.d)
    if df <= 0:
        raise NormalFormError("lie_series needs f of positive minimal degree")
    total = TaylorFourierPoly.zero(max(f.d, h.d))
    term = h.filter_degree(hi=degree_cutoff)
    fact = 1.0
    for order in range(max_order + 1):
        if not term:
            break
        if order >= i_min:
            total = total + term.scale(1.0 / fact)
        term = poisson_bracket(term, f).filter_degree(hi=degree_cutoff)
        fact *= order + 1
    return total


# ---------------------------------------------------------------- random admissible data

def random_admissible_poly(rng, model: FrequencyModel, deg: int = 3, count: int = 50, window: int = 6,
                           ell_box: int = 2, floor: float = 0.1, tries: int = 200000) -> TaylorFourierPoly:
    """Random sparse polynomial of one degree whose monomials are all admissible.

    The last mode of each monomial is solved from the selection rules, and
    monomials whose divisor falls below floor are redrawn.
    """
    sites, N, d = model.sites, model.N, model.sites.d
    terms = {}
    for _ in range(tries):
        if len(terms) >= count:
            break
        nl = int(rng.integers(0, (deg + 2) // 2 + 1))
        p = deg + 2 - 2 * nl
        if p < 1:
            continue
        l = [0] * d
        for _ in range(nl):
            l[int(rng.integers(d))] += 1
        ell = [int(x) for x in rng.integers(-ell_box, ell_box + 1, size=d)]
        modes, sigma = [], []
        for _ in range(p - 1):
            j = (int(rng.integers(-window, window + 1)), N * int(rng.integers(-window // N, window // N + 1)))
            if in_S0(j, sites):
                break
            modes.append(j)
            sigma.append(int(rng.choice((-1, 1))))
        if len(modes) != p - 1:
            continue
        et = sum(s for j, s in zip(modes, sigma) if not in_S(j, sites)) + sum(ell)
        pxt = sum(s * j[0] for j, s in zip(modes, sigma) if not in_S(j, sites))
        pxt += sum(a * b for a, b in zip(ell, sites.m))
        py = sum(s * j[1] for j, s in zip(modes, sigma))
        if abs(et) != 1:
            continue
        s_last = -et
        j_last = (-s_last * pxt, -s_last * py)
        if in_S0(j_last, sites) or in_S(j_last, sites):
            continue
        modes.append(j_last)
        sigma.append(s_last)
        if not is_admissible(modes, ell, sigma, sites, N):
            continue
        if abs(small_divisor(model, ell, modes, sigma)) < floor:
            continue
        alpha = [(j, 1) for j, s in zip(modes, sigma) if s > 0]
        beta = [(j, 1) for j, s in zip(modes, sigma) if s < 0]
        idx = MonomialIndex.make(ell, l, alpha, beta)
        if idx in terms:
            continue
        terms[idx] = complex(rng.normal(), rng.normal())
    if len(terms) < count:
        raise NormalFormError(f"only {len(terms)} admissible monomials found")
    return TaylorFourierPoly(terms, d=d)


def random_poly(rng, d: int = 2, count: int = 10, window: int = 3, max_pow: int = 2) -> TaylorFourierPoly:
    """Unstructured sparse polynomial for algebraic identity checks."""
    terms = {}
    pts = [(m, n) for m in range(-window, window + 1) for n in range(-window, window + 1)]
    while len(terms) < count:
        ell = rng.integers(-2, 3, size=d)
        l = rng.integers(0, 2, size=d)
        alpha = {pts[int(rng.integers(len(pts)))]: int(rng.integers(1, max_pow + 1))
                 for _ in range(int(rng.integers(0, 3)))}
        beta = {pts[int(rng.integers(len(pts)))]: int(rng.integers(1, max_pow + 1))
                for _ in range(int(rng.integers(0, 3)))}
        terms[MonomialIndex.make(ell, l, alpha, beta)] = complex(rng.normal(), rng.normal())
    return TaylorFourierPoly(terms, d=d)


def residual(P: TaylorFourierPoly) -> float:
    return P.max_abs()


def coefficient_array(P: TaylorFourierPoly) -> np.ndarray:
    return np.array([v for _, v in P], dtype=complex)
