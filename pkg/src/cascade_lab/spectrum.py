"""Frequency model near the finite-gap torus, small divisors and Melnikov sampling."""

from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq


class SpectrumError(Exception):
    pass


def ell_vectors(d: int, L: int):
    """All l in Z^d with |l|_1 <= L, ordered by |l|_1 then lexicographically."""
    out = []

    def rec(prefix, left, slots):
        if slots == 0:
            out.append(tuple(prefix))
            return
        for v in range(-left, left + 1):
            rec(prefix + [v], left - abs(v), slots - 1)

    rec([], L, d)
    out.sort(key=lambda l: (sum(abs(x) for x in l), l))
    return out


def japanese(x) -> float:
    return max(1.0, abs(x))


def check_L_generic(sites_m, L: int):
    """Return (True, None) or (False, l) with sum l_i m_i = 0 and 0 < |l|_1 <= L."""
    if L < 1:
        raise SpectrumError("L must be >= 1")
    m = tuple(int(x) for x in sites_m)
    for l in ell_vectors(len(m), L):
        if any(l) and sum(a * b for a, b in zip(l, m)) == 0:
            if next(x for x in l if x) < 0:
                l = tuple(-x for x in l)
            return False, l
    return True, None


@dataclass(frozen=True)
class TangentialSites:
    m: tuple
    genericity_L: int = 0

    @property
    def d(self):
        return len(self.m)

    def index(self, m):
        return self.m.index(m)


def make_sites(m, L: int = 1) -> TangentialSites:
    m = tuple(int(x) for x in m)
    if len(set(m)) != len(m):
        raise SpectrumError("tangential sites must be distinct")
    ok, wit = check_L_generic(m, L)
    if not ok:
        raise SpectrumError(f"sites {m} are not {L}-generic: l = {wit}")
    return TangentialSites(m, L)


# ------------------------------------------------------------ characteristic roots

def char_poly(lam) -> np.ndarray:
    """Coefficients (highest first) of prod(t+l_i) - 2 sum l_i prod_{k!=i}(t+l_k)."""
    lam = np.asarray(lam, dtype=float)
    full = np.poly(-lam)
    acc = np.zeros(len(lam))
    for i in range(len(lam)):
        acc = acc + lam[i] * np.poly(-np.delete(lam, i))
    out = full.copy()
    out[1:] -= 2 * acc
    return out


def mu_roots(lam) -> np.ndarray:
    """Roots of the characteristic polynomial, sorted by (real, imag).

    For positive lambda every root is real.  A value v repeated k times gives
    the root -v with multiplicity k - 1, and the remaining roots solve the
    secular equation 2 sum_v k_v v / (t + v) = 1, one per gap between the
    poles -v and one to the right of them, so each is bracketed and found by
    Brent's method.  Other inputs fall back to companion-matrix eigenvalues.
    Real roots come back as a float array, anything else as complex.
    """
    lam = np.asarray(lam, dtype=float)
    if lam.ndim != 1 or lam.size == 0:
        raise SpectrumError("lambda must be a non-empty vector")
    if np.all(lam > 0) and np.all(np.isfinite(lam)):
        return _secular_roots(lam)
    c = char_poly(lam)
    r = np.roots(c).astype(complex)
    dc = np.polyder(c)
    for _ in range(2):
        dv = np.polyval(dc, r)
        safe = np.abs(dv) > 0
        r[safe] = r[safe] - np.polyval(c, r[safe]) / dv[safe]
    res = np.abs(np.polyval(c, r))
    if np.any(res > 1e-10 * (1 + np.max(np.abs(c)))):
        raise SpectrumError(f"root finder did not converge for lambda={lam.tolist()}")
    if np.all(np.abs(r.imag) <= 1e-12 * (1 + np.abs(r.real))):
        rr = np.sort(r.real)
        return rr
    order = np.lexsort((r.imag, r.real))
    return r[order]


def _secular_roots(lam):
    vals, counts = np.unique(lam, return_counts=True)
    vs, ks = vals[::-1], counts[::-1]  # descending, so the poles -vs ascend
    w = 2.0 * ks * vs
    roots = [-v for v, k in zip(vs, ks) for _ in range(k - 1)]

    def g(x, i):
        # secular function at t = -vs[i] + x, written as an offset from that pole
        return math.fsum(w / ((vs - vs[i]) + x)) - 1.0

    def solve(i, lo, hi):
        x = brentq(g, lo, hi, args=(i,), xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
        return -vs[i] + x

    for i in range(len(vs) - 1):
        D = vs[i] - vs[i + 1]  # g falls from +inf to -inf on (0, D)
        lo, hi = D * 2.0 ** -40, D * (1 - 2.0 ** -40)
        for _ in range(40):
            if g(lo, i) > 0 and g(hi, i) < 0:
                break
            lo *= 2.0 ** -20
            hi = D - (D - hi) * 0.5
        else:
            raise SpectrumError(f"could not bracket a characteristic root for lambda={lam.tolist()}")
        roots.append(solve(i, lo, hi))
    # right of the last pole g falls from +inf to -1
    i = len(vs) - 1
    lo, hi = 2.0 ** -40, 2.0 * float(np.sum(w)) + 1.0
    while g(lo, i) <= 0 and lo > 1e-300:
        lo *= 2.0 ** -20
    roots.append(solve(i, lo, hi))
    return np.sort(np.array(roots, dtype=float))


# ------------------------------------------------------------ corrections

@dataclass(frozen=True)
class CorrectionModel:
    """Deterministic bounded corrections: hash-noise in [-1, 1] times M0 eps^2."""
    M0: float = 1.0
    seed: int = 0

    def unit(self, kind: str, m: int, n: int = 0) -> float:
        return _hash_unit(self.seed, kind, int(m), int(n))


@lru_cache(maxsize=1 << 20)
def _hash_unit(seed, kind, m, n):
    h = hashlib.blake2b(f"{seed}|{kind}|{m}|{n}".encode(), digest_size=8).digest()
    u = struct.unpack("<Q", h)[0] / float(1 << 64)
    return 2.0 * u - 1.0


def correction_value(corr: CorrectionModel | None, eps: float, j) -> float:
    """varpi_m/<m> for n = 0, Theta_m/<m>^2 + Theta_mn/(<m>^2+<n>^2) otherwise."""
    if corr is None:
        return 0.0
    m, n = j
    amp = corr.M0 * eps ** 2
    if n == 0:
        return amp * corr.unit("varpi", m) / japanese(m)
    jm, jn = japanese(m), japanese(n)
    return amp * (corr.unit("theta", m) / jm ** 2 + corr.unit("theta2", m, n) / (jm ** 2 + jn ** 2))


# ------------------------------------------------------------ frequency model

@dataclass
class FrequencyModel:
    sites: TangentialSites
    lam: np.ndarray
    eps: float
    N: int = 1
    corrections: CorrectionModel | None = None
    eps_cap: float = 0.5
    _mu: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.lam = np.asarray(self.lam, dtype=float)
        if self.lam.shape != (self.sites.d,):
            raise SpectrumError("lambda has wrong dimension")
        if np.any(self.lam <= 0.5) or np.any(self.lam >= 1.0):
            raise SpectrumError("lambda must lie in (1/2, 1)^d")
        if not (0 <= self.eps <= self.eps_cap):
            raise SpectrumError("eps out of range")
        if self.N < 1:
            raise SpectrumError("N must be >= 1")
        self._mu = mu_roots(self.lam)

    @property
    def mu(self):
        return self._mu

    def in_S(self, j) -> bool:
        return j[1] != 0 and j[0] in self.sites.m

    def correction(self, j) -> float:
        return correction_value(self.corrections, self.eps, j)

    def base_parts(self, j):
        """(exact integer part, real part) of the base normal frequency."""
        m, n = int(j[0]), int(j[1])
        if n == 0:
            if m in self.sites.m:
                raise SpectrumError(f"{tuple(j)} is a tangential site")
            return m * m, 0.0
        if n % self.N:
            raise SpectrumError(f"{tuple(j)} is not on the sublattice N={self.N}")
        if m in self.sites.m:
            return n * n, float(self.eps * self._mu[self.sites.index(m)].real)
        return m * m + n * n, 0.0

    def base_normal(self, j) -> float:
        k, r = self.base_parts(j)
        return float(k) + r


def omega_tangential(model: FrequencyModel) -> np.ndarray:
    m = np.array(model.sites.m, dtype=float)
    return m * m - model.eps * model.lam


def omega_normal(model: FrequencyModel, j) -> float:
    return model.base_normal(j) + model.correction(j)


def small_divisor(model: FrequencyModel, ell, modes, sigma) -> float:
    if len(modes) != len(sigma):
        raise SpectrumError("modes and signs differ in length")
    w = omega_tangential(model)
    val = math.fsum([float(np.dot(w, np.asarray(ell, dtype=float)))]
                    + [s * omega_normal(model, j) for j, s in zip(modes, sigma)])
    return val


def is_exact_rectangle(j1, j2, j3, j4) -> bool:
    """j1, j3 and j2, j4 are the diagonals of a non-trivial rectangle."""
    if j1[0] + j3[0] != j2[0] + j4[0] or j1[1] + j3[1] != j2[1] + j4[1]:
        return False
    n13 = j1[0] ** 2 + j1[1] ** 2 + j3[0] ** 2 + j3[1] ** 2
    n24 = j2[0] ** 2 + j2[1] ** 2 + j4[0] ** 2 + j4[1] ** 2
    return n13 == n24 and len({tuple(j1), tuple(j2), tuple(j3), tuple(j4)}) == 4


def gamma_defect(model: FrequencyModel, rect) -> float:
    j1, j2, j3, j4 = rect
    if not is_exact_rectangle(j1, j2, j3, j4):
        raise SpectrumError(f"not a rectangle: {rect}")
    # integer parts, eps mu parts and corrections are differenced separately:
    # at large |j| neither m^2 + n^2 nor the corrections survive inside a float Omega
    b = [model.base_parts(j) for j in rect]
    c = [model.correction(j) for j in rect]
    whole = b[0][0] - b[1][0] + b[2][0] - b[3][0]
    frac = (b[0][1] - b[1][1]) + (b[2][1] - b[3][1])
    return float(whole) + frac + (c[0] - c[1] + c[2] - c[3])


def random_rectangle(rng, J: int, N: int = 1, tries: int = 10000):
    """Random tilted rectangle with all coordinates in [J, 2J] (n on N Z)."""
    for _ in range(tries):
        p = int(rng.integers(-J // 2, J // 2 + 1))
        q = int(rng.integers(-J // 2, J // 2 + 1))
        t = int(rng.integers(1, 3))
        if p == 0 and q == 0:
            continue
        u = (p, q)
        v = (-t * q, t * p)
        c = (int(rng.integers(J, 2 * J + 1)), int(rng.integers(J, 2 * J + 1)))
        pts = [c, (c[0] + u[0], c[1] + u[1]), (c[0] + u[0] + v[0], c[1] + u[1] + v[1]), (c[0] + v[0], c[1] + v[1])]
        if all(J <= a <= 2 * J and J <= b <= 2 * J and b % N == 0 for a, b in pts):
            return tuple(pts)
    raise SpectrumError("could not place a rectangle in the window")


@dataclass
class DefectScaling:
    J: list
    median_abs: list
    slope: float | None
    samples: int
    seed: int

    def rows(self):
        return [(J, v, self.samples, self.seed) for J, v in zip(self.J, self.median_abs)]


def defect_scaling(Js, samples: int = 64, seed: int = 0, eps: float = 0.1, M0: float = 1.0,
                   sites=(1, 2), N: int = 1) -> DefectScaling:
    """Median |Gamma| over random Z-rectangles at each window scale J, with a log-log slope."""
    ts = make_sites(sites, 1)
    fm = FrequencyModel(ts, np.full(ts.d, 0.75), eps, N, CorrectionModel(M0, seed))
    rng = np.random.Generator(np.random.Philox(seed))
    med = []
    for J in Js:
        vals = []
        while len(vals) < samples:
            rect = random_rectangle(rng, int(J), N)
            if any(fm.in_S(j) for j in rect):
                continue
            vals.append(abs(gamma_defect(fm, rect)))
        med.append(float(np.median(vals)))
    return DefectScaling([int(J) for J in Js], med, fit_power(Js, med), samples, seed)


# ------------------------------------------------------------ Melnikov sampling

@dataclass
class MelnikovResult:
    gammas: list
    fractions: list
    tau: float
    samples: int
    seed: int
    q_values: np.ndarray = field(repr=False)
    signature_count: int
    tuple_count: int
    fitted_exponent: float | None

    def rows(self):
        return [(g, self.tau, f, self.samples, self.seed) for g, f in zip(self.gammas, self.fractions)]


def sample_lambdas(d, count, seed, stratified=False):
    rng = np.random.Generator(np.random.Philox(seed))
    if not stratified:
        return 0.5 + 0.5 * rng.random((count, d))
    # Latin hypercube on (1/2, 1)^d
    u = np.empty((count, d))
    for k in range(d):
        u[:, k] = (rng.permutation(count) + rng.random(count)) / count
    return 0.5 + 0.5 * u


def _q_of_lambda(lam, eps, tau, groups, d):
    """min over signature groups of |divisor| <l>^tau / eps."""
    mu = mu_roots(lam)
    if np.iscomplexobj(mu):
        mu = mu.real
    best = math.inf
    for (ell, c), offs in groups:
        F = -float(np.dot(lam, ell)) + float(np.dot(mu, c))
        x = -eps * F
        # offsets sorted: the closest to x gives the minimum |off + eps F|
        i = int(np.searchsorted(offs, x))
        cand = []
        if i < len(offs):
            cand.append(abs(offs[i] - x))
        if i > 0:
            cand.append(abs(offs[i - 1] - x))
        v = min(cand) * japanese(sum(abs(t) for t in ell)) ** tau / eps if eps > 0 else min(cand)
        if v < best:
            best = v
    return best


def fit_power(gammas, fractions):
    xs, ys = [], []
    for g, f in zip(gammas, fractions):
        if g > 0 and f > 0:
            xs.append(math.log(g))
            ys.append(math.log(f))
    if len(xs) < 2 or len(set(xs)) < 2:
        return None
    return float(np.polyfit(xs, ys, 1)[0])


def melnikov_violation_fraction(sites: TangentialSites, eps: float, N: int, p: int, gammas,
                                tau: float | None = None, ell_max: int = 4, window: int = 10,
                                sample_count: int = 200, seed: int = 0, exclude_resonant: bool = True,
                                corrections: CorrectionModel | None = None, threads: int = 1,
                                memory_budget: int = 5_000_000, lambdas=None, M0_cutoff: int = 32,
                                stratified: bool = False) -> MelnikovResult:
    """Fraction of sampled lambda with some |divisor| < gamma eps / <l>^tau.

    Tuples are enumerated once (the divisor depends on lambda only through
    the signature (l, c) where c_i is the signed count of modes above site i)
    and each lambda sample is reduced to the single number
    q = min |divisor| <l>^tau / eps, so every gamma is answered at once.
    """
    from .resonance import ResonanceError, tuple_table

    if np.isscalar(gammas):
        gammas = [float(gammas)]
    gammas = [float(g) for g in gammas]
    if any(g < 0 for g in gammas):
        raise SpectrumError("gamma must be >= 0")
    d = sites.d
    tau = float(d + 2) if tau is None else float(tau)
    if lambdas is None:
        lambdas = sample_lambdas(d, sample_count, seed, stratified)
    lambdas = np.asarray(lambdas, dtype=float)

    gmax = max(gammas) if gammas else 0.0
    # bound on |eps F| + threshold + corrections decides which K can ever matter;
    # the coefficients of the characteristic polynomial are (1-2k) e_k(lambda),
    # maximal in size at lambda = 1, so Cauchy's bound applies uniformly
    cmax = 1 + float(np.max(np.abs(char_poly(np.ones(d)))))
    fbound = eps * (ell_max + p * cmax) + gmax * eps + (4 * p * eps ** 2 * (corrections.M0 if corrections else 0))
    kmax = int(math.ceil(fbound)) + 1
    try:
        table = tuple_table(sites, N, window, ell_max, p, kmax, exclude_resonant=exclude_resonant,
                            corrections=corrections, eps=eps, memory_budget=memory_budget,
                            M0_cutoff=M0_cutoff)
    except ResonanceError as e:
        raise SpectrumError(str(e)) from e
    groups = [((np.array(k[0], dtype=float), np.array(k[1], dtype=float)), np.array(sorted(v)))
              for k, v in sorted(table.groups.items())]

    def work(rows):
        return [_q_of_lambda(lam, eps, tau, groups, d) for lam in rows]

    if threads > 1 and len(lambdas) > 1:
        from concurrent.futures import ThreadPoolExecutor
        chunks = np.array_split(lambdas, threads)
        with ThreadPoolExecutor(threads) as ex:
            q = [v for part in ex.map(work, chunks) for v in part]
    else:
        q = work(lambdas)
    q = np.array(q)
    fr = [float(np.mean(q < g)) if len(q) else 0.0 for g in gammas]
    return MelnikovResult(gammas, fr, tau, len(lambdas), seed, q, len(groups), table.tuple_count,
                          fit_power(gammas, fr))
