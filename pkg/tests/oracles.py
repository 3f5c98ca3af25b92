"""Slow, obviously-correct reference computations used by the tests.

Nothing here imports the package's own algorithms; each function restates
its definition in the most direct way available.
"""

import itertools
import math

import numpy as np
import sympy as sp


def rectangles_by_quadruples(points):
    """Pure-Python scan over all 4-subsets and their three diagonal pairings."""
    pts = sorted(set(tuple(p) for p in points))
    out = set()
    for quad in itertools.combinations(pts, 4):
        a, b, c, d = quad
        for (p, q), (r, s) in (((a, b), (c, d)), ((a, c), (b, d)), ((a, d), (b, c))):
            if (p[0] + q[0], p[1] + q[1]) != (r[0] + s[0], r[1] + s[1]):
                continue
            if p[0] ** 2 + p[1] ** 2 + q[0] ** 2 + q[1] ** 2 != r[0] ** 2 + r[1] ** 2 + s[0] ** 2 + s[1] ** 2:
                continue
            out.add(frozenset((frozenset((p, q)), frozenset((r, s)))))
    return out


def char_poly_value(t, lam):
    """P(t, lam) = prod(t + l_i) - 2 sum_i l_i prod_{k != i}(t + l_k), evaluated directly."""
    lam = list(lam)
    full = 1.0 + 0j
    for x in lam:
        full *= t + x
    acc = 0j
    for i, x in enumerate(lam):
        prod = 1.0 + 0j
        for k, y in enumerate(lam):
            if k != i:
                prod *= t + y
        acc += x * prod
    return full - 2 * acc


def char_poly_coeffs_sympy(lam):
    t = sp.symbols("t")
    ls = [sp.nsimplify(x) for x in lam]
    expr = sp.prod([t + x for x in ls]) - 2 * sum(x * sp.prod([t + y for k, y in enumerate(ls) if k != i])
                                                   for i, x in enumerate(ls))
    return [float(c) for c in sp.Poly(sp.expand(expr), t).all_coeffs()]


def right_angle_scan(points):
    """Smallest |m| over axis points (m, 0) at a right angle with some pair, by direct formulas.

    Right angle at j2:  (j1 - j2).((m, 0) - j2) = 0, linear in m.
    Right angle at (m, 0): (j1 - (m,0)).(j2 - (m,0)) = 0, quadratic in m.
    """
    best = math.inf
    pts = sorted(set(tuple(p) for p in points))
    for j1 in pts:
        for j2 in pts:
            if j1 == j2:
                continue
            dm, dn = j1[0] - j2[0], j1[1] - j2[1]
            if dm != 0:
                m = (dm * j2[0] + dn * j2[1]) / dm
                best = min(best, abs(m))
            b = j1[0] + j2[0]
            c = j1[0] * j2[0] + j1[1] * j2[1]
            disc = b * b - 4 * c
            if disc >= 0:
                r = math.isqrt(disc) if disc == math.isqrt(disc) ** 2 else math.sqrt(disc)
                for m in ((b + r) / 2, (b - r) / 2):
                    best = min(best, abs(m))
    return best


def toy_gradient_rhs(b, h=1e-7):
    """i b' = dH/d(conj b) with the Wirtinger derivative from central differences of H."""
    b = np.asarray(b, dtype=complex)

    def H(v):
        a2 = np.abs(v) ** 2
        s = -0.5 * np.sum(a2 ** 2)
        for k in range(len(v) - 1):
            s += 2 * (v[k] ** 2 * np.conj(v[k + 1]) ** 2).real
        return float(s)

    out = np.zeros_like(b)
    for k in range(len(b)):
        e = np.zeros_like(b)
        e[k] = h
        dx = (H(b + e) - H(b - e)) / (2 * h)
        dy = (H(b + 1j * e) - H(b - 1j * e)) / (2 * h)
        out[k] = 0.5 * (dx + 1j * dy)  # d/d conj(b)
    return -1j * out


def lattice_gradient_rhs(beta, modes, families, h=1e-7):
    """Resonant equations from finite differences of
    G0 = -1/2 sum |b|^4 + sum over families 2 Re(b_c1 b_c2 conj(b_p1) conj(b_p2)) * 2."""
    idx = {tuple(j): i for i, j in enumerate(modes)}
    beta = np.asarray(beta, dtype=complex)

    def H(v):
        s = -0.5 * np.sum(np.abs(v) ** 4)
        for f in families:
            p1, p2, c1, c2 = (idx[tuple(x)] for x in (f.p1, f.p2, f.c1, f.c2))
            s += 4 * (v[c1] * v[c2] * np.conj(v[p1]) * np.conj(v[p2])).real
        return float(s)

    out = np.zeros_like(beta)
    for k in range(len(beta)):
        e = np.zeros_like(beta)
        e[k] = h
        dx = (H(beta + e) - H(beta - e)) / (2 * h)
        dy = (H(beta + 1j * e) - H(beta - 1j * e)) / (2 * h)
        out[k] = 0.5 * (dx + 1j * dy)
    return -1j * out


# ------------------------------------------------------------ symbolic brackets

def to_sympy(P, d, modes):
    """Expression in theta_i, Y_i, a_j, abar_j (abar independent of a)."""
    th = sp.symbols(f"th0:{d}")
    Y = sp.symbols(f"Y0:{d}")
    a = {j: sp.Symbol(f"a_{j[0]}_{j[1]}") for j in modes}
    ab = {j: sp.Symbol(f"b_{j[0]}_{j[1]}") for j in modes}
    expr = 0
    for k, c in P.terms.items():
        term = sp.nsimplify(complex(c).real) + sp.I * sp.nsimplify(complex(c).imag)
        term *= sp.exp(sp.I * sum(e * t for e, t in zip(k.ell, th)))
        for li, y in zip(k.l, Y):
            term *= y ** li
        for j, p in k.alpha:
            term *= a[j] ** p
        for j, p in k.beta:
            term *= ab[j] ** p
        expr += term
    return expr, th, Y, a, ab


def sympy_bracket(F, G, d, modes):
    """{F,G} = dF/dY . dG/dth - dF/dth . dG/dY + i sum (dF/dabar dG/da - dF/da dG/dabar)."""
    f, th, Y, a, ab = to_sympy(F, d, modes)
    g = to_sympy(G, d, modes)[0]
    out = 0
    for i in range(d):
        out += sp.diff(f, Y[i]) * sp.diff(g, th[i]) - sp.diff(f, th[i]) * sp.diff(g, Y[i])
    for j in modes:
        out += sp.I * (sp.diff(f, ab[j]) * sp.diff(g, a[j]) - sp.diff(f, a[j]) * sp.diff(g, ab[j]))
    return sp.expand(out), (th, Y, a, ab)


def evaluate(expr, syms, rng):
    th, Y, a, ab = syms
    vals = {}
    for s in th:
        vals[s] = rng.uniform(0, 2 * np.pi)
    for s in Y:
        vals[s] = rng.uniform(-1, 1)
    for s in list(a.values()) + list(ab.values()):
        vals[s] = complex(rng.normal(), rng.normal()) * 0.5
    return complex(expr.evalf(subs=vals))


# ------------------------------------------------------------ Melnikov, p = 2

def mu_quadratic(lam):
    """Roots of t^2 - (l1 + l2) t - 3 l1 l2, the d = 2 characteristic polynomial, ascending."""
    l1, l2 = lam
    s = l1 + l2
    r = math.sqrt(s * s + 12 * l1 * l2)
    return ((s - r) / 2, (s + r) / 2)


def melnikov_q_pairs(sites, lam, eps, window, ell_max, tau):
    """min over admissible non-R2 pairs of |divisor| <l>^tau / eps, by direct double loop."""
    mu = mu_quadratic(lam)
    items = []
    for m in range(-window, window + 1):
        for n in range(-window, window + 1):
            if n == 0 and m in sites:
                continue
            if n == 0:
                om, inS = m * m, False
            elif m in sites:
                om, inS = n * n + eps * mu[sites.index(m)], True
            else:
                om, inS = m * m + n * n, False
            for s in (1, -1):
                items.append((m, n, s, om, inS))
    it = np.array([(m, n, s, om, S) for m, n, s, om, S in items], dtype=float)
    m, n, s, om, S = (it[:, k] for k in range(5))
    nt = np.where(S > 0, 0.0, 1.0)
    e_t = s * nt
    px_t = s * m * nt
    py = s * n
    w = np.array([sites[0] ** 2 - eps * lam[0], sites[1] ** 2 - eps * lam[1]])
    same = (m[:, None] == m[None, :]) & (n[:, None] == n[None, :]) & (s[:, None] == -s[None, :])
    best = math.inf
    for l1 in range(-ell_max, ell_max + 1):
        for l2 in range(-ell_max, ell_max + 1):
            L1 = abs(l1) + abs(l2)
            if L1 > ell_max:
                continue
            adm = ((e_t[:, None] + e_t[None, :] + l1 + l2) == 0)
            adm &= (px_t[:, None] + px_t[None, :] + l1 * sites[0] + l2 * sites[1]) == 0
            adm &= (py[:, None] + py[None, :]) == 0
            if L1 == 0:
                adm &= ~same
            if not adm.any():
                continue
            div = w[0] * l1 + w[1] * l2 + (s * om)[:, None] + (s * om)[None, :]
            v = np.min(np.abs(div[adm])) * max(1, L1) ** tau / eps
            best = min(best, float(v))
    return best
