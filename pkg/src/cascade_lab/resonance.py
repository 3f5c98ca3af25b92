"""Selection rules, admissibility and resonance classes of Taylor-Fourier monomials.

Conventions: a monomial is e^{i l.theta} Y^l a^alpha abar^beta.  In tuple form
(modes, l, sigma) sigma = +1 stands for a factor a_j and -1 for abar_j.  The
tilde quantities only sum over normal modes outside the columns above the
tangential sites.
"""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from itertools import combinations_with_replacement
from typing import NamedTuple

import numpy as np

from .spectrum import correction_value, ell_vectors, mu_roots, sample_lambdas

TAGS = ("R2", "R4-case1", "R4-case2", "R4-case3", "R4-case4", "nonresonant", "inadmissible")


class ResonanceError(Exception):
    pass


class MonomialIndex(NamedTuple):
    ell: tuple  # Z^d
    l: tuple  # N^d
    alpha: tuple  # sorted ((m, n), power) pairs
    beta: tuple

    @classmethod
    def make(cls, ell=(), l=(), alpha=None, beta=None):
        return cls(tuple(int(x) for x in ell), tuple(int(x) for x in l),
                   _canon_powers(alpha or {}), _canon_powers(beta or {}))

    def degree(self) -> int:
        return 2 * sum(self.l) + sum(k for _, k in self.alpha) + sum(k for _, k in self.beta) - 2

    def modes_and_signs(self):
        modes, sig = [], []
        for j, k in self.alpha:
            modes += [j] * k
            sig += [1] * k
        for j, k in self.beta:
            modes += [j] * k
            sig += [-1] * k
        return modes, sig


def _canon_powers(p):
    if isinstance(p, dict):
        items = p.items()
    else:
        items = p
    acc = defaultdict(int)
    for j, k in items:
        acc[(int(j[0]), int(j[1]))] += int(k)
    return tuple(sorted((j, k) for j, k in acc.items() if k))


def in_S(j, sites) -> bool:
    return j[1] != 0 and j[0] in sites.m


def in_S0(j, sites) -> bool:
    return j[1] == 0 and j[0] in sites.m


@dataclass(frozen=True)
class SelectionProfile:
    eta_ab: int
    eta_ell: int
    pi_x: int
    pi_y: int
    pi_ell: int | None
    eta_tilde: int
    pi_x_tilde: int

    def balanced(self) -> bool:
        return self.eta_tilde + self.eta_ell == 0 and self.pi_x_tilde + (self.pi_ell or 0) == 0 and self.pi_y == 0


def selection_profile(idx: MonomialIndex, sites=None) -> SelectionProfile:
    eta = px = py = et = pxt = 0
    for sgn, part in ((1, idx.alpha), (-1, idx.beta)):
        for j, k in part:
            eta += sgn * k
            px += sgn * k * j[0]
            py += sgn * k * j[1]
            if sites is None or not in_S(j, sites):
                et += sgn * k
                pxt += sgn * k * j[0]
    pil = None
    if sites is not None:
        pil = sum(a * b for a, b in zip(idx.ell, sites.m))
    return SelectionProfile(eta, sum(idx.ell), px, py, pil, et, pxt)


def _check_modes(modes, sites, N):
    for j in modes:
        if in_S0(j, sites):
            raise ResonanceError(f"{tuple(j)} is a tangential site")
        if j[1] % N:
            raise ResonanceError(f"{tuple(j)} is not on the sublattice N={N}")


def is_admissible(modes, ell, sigma, sites, N: int = 1) -> bool:
    _check_modes(modes, sites, N)
    if len(modes) != len(sigma):
        raise ResonanceError("modes and signs differ in length")
    et = sum(s for j, s in zip(modes, sigma) if not in_S(j, sites))
    pxt = sum(s * j[0] for j, s in zip(modes, sigma) if not in_S(j, sites))
    py = sum(s * j[1] for j, s in zip(modes, sigma))
    el = sum(ell)
    pl = sum(a * b for a, b in zip(ell, sites.m))
    return et + el == 0 and pxt + pl == 0 and py == 0


@dataclass(frozen=True)
class ResonanceClass:
    tag: str
    witness: tuple | None = None


def _split_signs(modes, sigma):
    plus = [tuple(j) for j, s in zip(modes, sigma) if s > 0]
    minus = [tuple(j) for j, s in zip(modes, sigma) if s < 0]
    return plus, minus


def _is_rectangle_pm(plus, minus) -> bool:
    # diagonals {plus}, {minus}; degenerate (repeated) configurations allowed
    if len(plus) != 2 or len(minus) != 2:
        return False
    (a, b), (c, e) = plus, minus
    return (a[0] + b[0] == c[0] + e[0] and a[1] + b[1] == c[1] + e[1]
            and a[0] ** 2 + a[1] ** 2 + b[0] ** 2 + b[1] ** 2 == c[0] ** 2 + c[1] ** 2 + e[0] ** 2 + e[1] ** 2)


def _is_horizontal_rectangle(plus, minus) -> bool:
    if len(plus) != 2 or len(minus) != 2:
        return False
    # the trivial pairing (plus == minus as multisets) is the fully degenerate case
    if Counter(minus) == Counter(plus):
        return True
    (a, b) = plus
    return Counter(minus) == Counter([(a[0], b[1]), (b[0], a[1])])


def _is_horizontal_trapezoid(plus, minus) -> bool:
    if len(plus) != 2 or len(minus) != 2:
        return False
    return Counter(j[1] for j in plus) == Counter(j[1] for j in minus)


def classify(modes, ell, sigma, sites, N: int = 1, M0: int = 32) -> ResonanceClass:
    modes = [tuple(j) for j in modes]
    ell = tuple(ell)
    if not is_admissible(modes, ell, sigma, sites, N):
        return ResonanceClass("inadmissible")
    p = len(modes)
    zero = not any(ell)
    if p == 2:
        if zero and sigma[0] == -sigma[1] and modes[0] == modes[1]:
            return ResonanceClass("R2", (modes[0],))
        return ResonanceClass("nonresonant")
    if p != 4:
        return ResonanceClass("nonresonant")
    plus, minus = _split_signs(modes, sigma)
    s_modes = [j for j in modes if in_S(j, sites)]
    nS = len(s_modes)
    if zero and nS == 0 and _is_rectangle_pm(plus, minus):
        return ResonanceClass("R4-case1", tuple(plus + minus))
    if zero and nS == 2 and _is_horizontal_rectangle(plus, minus):
        return ResonanceClass("R4-case2", tuple(plus + minus))
    if not zero and nS == 3:
        j4 = next(j for j in modes if not in_S(j, sites))
        if abs(j4[0]) < M0:
            return ResonanceClass("R4-case3", (ell, j4[0], M0))
    if zero and nS == 4 and _is_horizontal_trapezoid(plus, minus):
        return ResonanceClass("R4-case4", tuple(plus + minus))
    return ResonanceClass("nonresonant")


# ------------------------------------------------------------ K and F

def base_integer_frequency(j, sites) -> int:
    """Normal frequency at eps = 0: n^2 above a site, m^2 + n^2 otherwise."""
    m, n = j
    if in_S0(j, sites):
        raise ResonanceError(f"{tuple(j)} is a tangential site")
    if in_S(j, sites):
        return n * n
    return m * m + n * n


def signature(modes, ell, sigma, sites):
    """(K, l, c): c_i is the signed count of modes above site i."""
    K = sum(l * m * m for l, m in zip(ell, sites.m))
    c = [0] * sites.d
    for j, s in zip(modes, sigma):
        K += s * base_integer_frequency(j, sites)
        if in_S(j, sites):
            c[sites.index(j[0])] += s
    return K, tuple(ell), tuple(c)


def F_value(lam, ell, c):
    lam = np.asarray(lam, dtype=float)
    mu = mu_roots(lam)
    if np.iscomplexobj(mu):
        mu = mu.real
    return -float(np.dot(lam, ell)) + float(np.dot(mu, c))


def K_and_F(modes, ell, sigma, sites):
    K, ell, c = signature(modes, ell, sigma, sites)
    return K, (lambda lam: F_value(lam, ell, c))


# ------------------------------------------------------------ tuple enumeration

@dataclass
class _Side:
    idx: np.ndarray  # (count, size) item indices
    e: np.ndarray
    px: np.ndarray
    py: np.ndarray
    K: np.ndarray


def _items(sites, N, window):
    items = []
    if window < 0:
        return items
    for m in range(-window, window + 1):
        for n in range(-window, window + 1):
            if n % N or in_S0((m, n), sites):
                continue
            for s in (1, -1):
                items.append(((m, n), s))
    return items


def _side(items, size, sites):
    feats = np.array([
        [0 if in_S(j, sites) else s,
         0 if in_S(j, sites) else s * j[0],
         s * j[1],
         s * base_integer_frequency(j, sites)] for j, s in items], dtype=np.int64).reshape(-1, 4)
    if size == 0:
        z = np.zeros(1, dtype=np.int64)
        return _Side(np.zeros((1, 0), dtype=np.int64), z, z, z, z)
    combos = np.array(list(combinations_with_replacement(range(len(items)), size)), dtype=np.int64)
    tot = feats[combos].sum(axis=1)
    return _Side(combos, tot[:, 0], tot[:, 1], tot[:, 2], tot[:, 3])


def enumerate_admissible(sites, N: int, window: int, ell_max: int, p: int, k_lo: int, k_hi: int,
                         ells=None, memory_budget: int = 5_000_000):
    """Yield (modes, sigma, ell, K) for every admissible p-tuple with k_lo <= K <= k_hi.

    Modes range over the sublattice window |m|, |n| <= window minus the
    tangential sites; tuples are multisets of (mode, sign), each reported once.
    Meet in the middle: multisets of size floor(p/2) and ceil(p/2) are joined
    on the selection-rule sums with K restricted by binary search.
    """
    items = _items(sites, N, window)
    if not items or p < 1:
        return
    a, b = p - p // 2, p // 2
    est = math.comb(len(items) + a - 1, a)
    if est > memory_budget:
        raise ResonanceError(f"window {window} needs {est} partial tuples (budget {memory_budget})")
    left = _side(items, a, sites)
    right = left if b == a else _side(items, b, sites)
    # encode right side keys
    def span(x):
        return int(x.min()), int(x.max())
    lo_e, hi_e = -p, p
    lo_x, hi_x = -p * (window + 1) - ell_max * max(abs(x) for x in sites.m) - 1, p * (window + 1) + ell_max * max(abs(x) for x in sites.m) + 1
    lo_y, hi_y = -p * (window + 1), p * (window + 1)
    kmin, kmax = span(right.K)
    kpad = max(abs(k_lo), abs(k_hi)) + abs(kmin) + abs(kmax) + p * 4 * (window + 1) ** 2 + ell_max * max(m * m for m in sites.m) + 1
    KR = 2 * kpad + 1

    def code(e, x, y, K):
        return (((e - lo_e) * (hi_x - lo_x + 1) + (x - lo_x)) * (hi_y - lo_y + 1) + (y - lo_y)) * KR + (K + kpad)

    rcode = code(right.e, right.px, right.py, right.K)
    order = np.argsort(rcode, kind="stable")
    rsorted = rcode[order]
    ell_list = ells if ells is not None else ell_vectors(sites.d, ell_max)
    m_arr = np.array(sites.m, dtype=np.int64)
    for ell in ell_list:
        ell = tuple(ell)
        el = sum(ell)
        pl = int(np.dot(ell, m_arr))
        Kl = int(np.dot(ell, m_arr * m_arr))
        te = -left.e - el
        tx = -left.px - pl
        ty = -left.py
        ok = (te >= lo_e) & (te <= hi_e) & (tx >= lo_x) & (tx <= hi_x) & (ty >= lo_y) & (ty <= hi_y)
        lo = code(te, tx, ty, k_lo - left.K - Kl)
        hi = code(te, tx, ty, k_hi - left.K - Kl)
        s0 = np.searchsorted(rsorted, lo, side="left")
        s1 = np.searchsorted(rsorted, hi, side="right")
        cnt = np.where(ok, s1 - s0, 0)
        if cnt.sum() == 0:
            continue
        ai = np.repeat(np.arange(len(cnt)), cnt)
        starts = np.repeat(s0, cnt)
        offs = np.arange(cnt.sum()) - np.repeat(np.cumsum(cnt) - cnt, cnt)
        bi = order[starts + offs]
        full = np.sort(np.concatenate([left.idx[ai], right.idx[bi]], axis=1), axis=1)
        full = np.unique(full, axis=0)
        for row in full:
            modes = [items[t][0] for t in row]
            sig = [items[t][1] for t in row]
            K = signature(modes, ell, sig, sites)[0]
            yield modes, sig, ell, K


@dataclass
class TupleTable:
    groups: dict = field(default_factory=dict)  # (ell, c) -> set of offsets
    tuple_count: int = 0
    excluded: Counter = field(default_factory=Counter)


def tuple_table(sites, N, window, ell_max, p, kmax, exclude_resonant=True, corrections=None,
                eps=0.0, memory_budget=5_000_000, M0_cutoff=32) -> TupleTable:
    """Group admissible tuples with |K| <= kmax by signature (l, c).

    Offsets are K plus the summed corrections; the divisor of a tuple is then
    offset + eps F(lambda; l, c).
    """
    tab = TupleTable()
    groups = defaultdict(set)
    for modes, sig, ell, K in enumerate_admissible(sites, N, window, ell_max, p, -kmax, kmax,
                                                   memory_budget=memory_budget):
        if exclude_resonant:
            tag = classify(modes, ell, sig, sites, N, M0_cutoff).tag
            if tag.startswith("R"):
                tab.excluded[tag] += 1
                continue
        _, _, c = signature(modes, ell, sig, sites)
        off = float(K)
        if corrections is not None:
            off += math.fsum(s * correction_value(corrections, eps, j) for j, s in zip(modes, sig))
        groups[(ell, c)].add(off)
        tab.tuple_count += 1
    tab.groups = dict(groups)
    return tab


# ------------------------------------------------------------ audit

def c_vectors(d, p):
    return [c for c in ell_vectors(d, p)]


def null_signatures(sites, ell_window, p, lam_samples, tol=1e-8):
    """(l, c) pairs with F(lambda; l, c) vanishing at every sample."""
    lams = np.asarray(lam_samples, dtype=float)
    mus = np.array([np.real(mu_roots(x)) for x in lams])
    ells = ell_vectors(sites.d, ell_window)
    cs = c_vectors(sites.d, p)
    E = np.array(ells, dtype=float)
    C = np.array(cs, dtype=float)
    le = lams @ E.T  # samples x ells
    mc = mus @ C.T  # samples x cs
    out = set()
    for a in range(len(ells)):
        F = -le[:, a][:, None] + mc
        hit = np.all(np.abs(F) <= tol, axis=0)
        for b in np.nonzero(hit)[0]:
            out.add((ells[a], cs[b]))
    return out


@dataclass
class AuditReport:
    window: int
    N: int
    sites: tuple
    checked: int = 0
    null_signatures: list = field(default_factory=list)
    tag_counts: dict = field(default_factory=dict)
    counterexamples: list = field(default_factory=list)

    def to_dict(self):
        return {
            "window": self.window, "N": self.N, "sites": list(self.sites),
            "checked": self.checked,
            "null_signatures": [[list(l), list(c)] for l, c in self.null_signatures],
            "tag_counts": dict(sorted(self.tag_counts.items())),
            "counterexamples": [{"modes": [list(j) for j in m], "sigma": list(s), "ell": list(l)}
                                for m, s, l in self.counterexamples],
        }


def nonresonance_audit(sites, N: int, window: int, lam_samples: int = 20, seed: int = 0, p: int = 4,
                       M0_cutoff: int = 32, tol: float = 1e-8, memory_budget: int = 5_000_000) -> AuditReport:
    """Every admissible tuple with K = 0 and F vanishing on the samples must be resonant."""
    rep = AuditReport(window, N, tuple(sites.m))
    if window < 0:
        return rep
    lams = sample_lambdas(sites.d, lam_samples, seed)
    nulls = null_signatures(sites, window, p, lams, tol)
    rep.null_signatures = sorted(nulls)
    ells = sorted({l for l, _ in nulls}, key=lambda l: (sum(map(abs, l)), l))
    tags = Counter()
    for modes, sig, ell, K in enumerate_admissible(sites, N, window, window, p, 0, 0, ells=ells,
                                                   memory_budget=memory_budget):
        _, _, c = signature(modes, ell, sig, sites)
        if (ell, c) not in nulls:
            continue
        rep.checked += 1
        tag = classify(modes, ell, sig, sites, N, M0_cutoff).tag
        tags[tag] += 1
        want = "R2" if p == 2 else "R4"
        if not tag.startswith(want):
            rep.counterexamples.append((tuple(modes), tuple(sig), ell))
    rep.tag_counts = dict(tags)
    return rep
