"""Generational resonant sets: construction, certification and weights.

A candidate set is a list of generations of integer lattice points together
with the nuclear families (rectangles) linking generation k to k+1.  The
checks below are exhaustive; the only shortcut is that rectangles are found
by hashing pair sums instead of looping over quadruples.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

PROPERTY_NAMES = ("I", "II", "III", "IV", "V", "VI", "VII", "VIII")


class Mode(NamedTuple):
    m: int
    n: int

    def norm2(self) -> int:
        return self.m * self.m + self.n * self.n


class LatticeError(Exception):
    pass


class BudgetExhausted(LatticeError):
    def __init__(self, msg, report):
        super().__init__(msg)
        self.report = report


class MarginViolation(LatticeError):
    def __init__(self, msg, pair, axis_point):
        super().__init__(msg)
        self.pair = pair
        self.axis_point = axis_point


@dataclass(frozen=True)
class Family:
    """Nuclear family: spouses p1, p2 in generation k, children c1, c2 in k+1."""
    k: int
    p1: Mode
    p2: Mode
    c1: Mode
    c2: Mode

    def modes(self):
        return (self.p1, self.c1, self.p2, self.c2)

    def key(self):
        return frozenset((frozenset((self.p1, self.p2)), frozenset((self.c1, self.c2))))


class FamilyTree:
    """Spouse/children/sibling/parents lookup built from a list of families."""

    def __init__(self, families):
        self.families = list(families)
        self.spouse, self.children, self.sibling, self.parents = {}, {}, {}, {}
        for f in self.families:
            self.spouse[f.p1], self.spouse[f.p2] = f.p2, f.p1
            self.children[f.p1] = self.children[f.p2] = (f.c1, f.c2)
            self.sibling[f.c1], self.sibling[f.c2] = f.c2, f.c1
            self.parents[f.c1] = self.parents[f.c2] = (f.p1, f.p2)

    def family_keys(self):
        return {f.key() for f in self.families}


@dataclass
class Candidate:
    generations: list  # list of sorted lists of Mode
    families: list  # list of Family

    @property
    def g(self):
        return len(self.generations)

    @property
    def tree(self):
        return FamilyTree(self.families)

    def modes(self):
        return [j for gen in self.generations for j in gen]

    def generation_of(self):
        return {j: k + 1 for k, gen in enumerate(self.generations) for j in gen}

    def scaled(self, N: int) -> "Candidate":
        sc = lambda j: Mode(N * j.m, N * j.n)
        gens = [[sc(j) for j in gen] for gen in self.generations]
        fams = [Family(f.k, sc(f.p1), sc(f.p2), sc(f.c1), sc(f.c2)) for f in self.families]
        return Candidate(gens, fams)

    def reversed(self) -> "Candidate":
        # generation k <-> g-k+1; parents and children swap roles
        g = self.g
        fams = [Family(g - f.k, f.c1, f.c2, f.p1, f.p2) for f in self.families]
        return Candidate(list(reversed(self.generations)), sorted(fams, key=_family_sort_key))


def _family_sort_key(f):
    return (f.k, min(f.p1, f.p2))


@dataclass
class PropertyResult:
    passed: bool
    witness: tuple | None = None


@dataclass
class PropertyReport:
    results: dict = field(default_factory=dict)
    margin: float = math.inf
    margin_witness: tuple | None = None
    rectangle_count: int = 0
    family_count: int = 0

    @property
    def ok(self):
        return all(r.passed for r in self.results.values())

    def failed(self):
        return [k for k in PROPERTY_NAMES if not self.results[k].passed]

    def to_dict(self):
        return {
            "properties": {k: {"passed": r.passed, "witness": _jsonable(r.witness)}
                           for k, r in self.results.items()},
            "right_angle_margin": self.margin,
            "margin_witness": _jsonable(self.margin_witness),
            "rectangle_count": self.rectangle_count,
            "family_count": self.family_count,
        }

    @classmethod
    def from_dict(cls, d):
        res = {k: PropertyResult(v["passed"], _untuple(v["witness"])) for k, v in d["properties"].items()}
        return cls(res, d["right_angle_margin"], _untuple(d["margin_witness"]),
                   d["rectangle_count"], d["family_count"])


def _jsonable(w):
    if w is None:
        return None
    if isinstance(w, (tuple, list)):
        return [_jsonable(x) for x in w]
    if isinstance(w, (np.integer,)):
        return int(w)
    if isinstance(w, (np.floating,)):
        return float(w)
    return w


def _untuple(w):
    if isinstance(w, list):
        return tuple(_untuple(x) for x in w)
    return w


# ---------------------------------------------------------------- rectangles

def _pair_groups(modes):
    groups = defaultdict(list)
    for i in range(len(modes)):
        a = modes[i]
        for k in range(i + 1, len(modes)):
            b = modes[k]
            key = (a[0] + b[0], a[1] + b[1], a[0] * a[0] + a[1] * a[1] + b[0] * b[0] + b[1] * b[1])
            groups[key].append((a, b))
    return groups


def enumerate_rectangles(modes):
    """All rectangles in a finite point set as pairs of diagonals.

    Two distinct pairs {a, c}, {b, d} are the diagonals of a rectangle iff they
    share midpoint and length, i.e. the same (a + c, |a|^2 + |c|^2).
    """
    pts = sorted(set(Mode(*j) for j in modes))
    out = []
    for pairs in _pair_groups(pts).values():
        if len(pairs) < 2:
            continue
        for x in range(len(pairs)):
            for y in range(x + 1, len(pairs)):
                out.append((pairs[x], pairs[y]))
    out.sort()
    return out


def rectangles_bruteforce(modes):
    """Reference O(n^4) scan over ordered quadruples (a, b, c, d).

    Returns the set of rectangles as frozensets of their two diagonals.
    Vectorized over (c, d) for each (a, b); coordinates must fit int64 squares.
    """
    pts = sorted(set(Mode(*j) for j in modes))
    P = np.array(pts, dtype=np.int64).reshape(-1, 2)
    if P.size and np.max(np.abs(P)) >= 2 ** 30:
        raise LatticeError("coordinates too large for the int64 oracle")
    n = len(pts)
    N2 = P[:, 0] * P[:, 0] + P[:, 1] * P[:, 1]
    found = set()
    idx = np.arange(n)
    for a in range(n):
        for b in range(n):
            if b == a:
                continue
            # a + c == b + d and |a|^2 + |c|^2 == |b|^2 + |d|^2, all four distinct
            sx = P[:, 0][:, None] - P[:, 0][None, :] + (P[a, 0] - P[b, 0])
            sy = P[:, 1][:, None] - P[:, 1][None, :] + (P[a, 1] - P[b, 1])
            nn = N2[:, None] - N2[None, :] + (N2[a] - N2[b])
            ok = (sx == 0) & (sy == 0) & (nn == 0)
            ok &= (idx[:, None] != idx[None, :])
            ok[[a, b], :] = False
            ok[:, [a, b]] = False
            for c, d in zip(*np.nonzero(ok)):
                found.add(frozenset((frozenset((pts[a], pts[int(c)])), frozenset((pts[b], pts[int(d)])))))
    return found


def _rect_key(d1, d2):
    return frozenset((frozenset(d1), frozenset(d2)))


# ---------------------------------------------------------------- checks

def _primitive(dx, dy):
    g = math.gcd(dx, dy)
    dx, dy = dx // g, dy // g
    if dx < 0 or (dx == 0 and dy < 0):
        dx, dy = -dx, -dy
    return dx, dy


def right_triangles(modes):
    """Yield (a, b, c) with a right angle at vertex b, a < c."""
    pts = sorted(set(modes))
    for b in pts:
        lines = defaultdict(list)
        for a in pts:
            if a != b:
                lines[_primitive(a[0] - b[0], a[1] - b[1])].append(a)
        for d, on_line in lines.items():
            perp = _primitive(-d[1], d[0])
            if perp <= d or perp not in lines:
                continue
            for a in on_line:
                for c in lines[perp]:
                    yield (min(a, c), b, max(a, c))


def right_angle_margin(modes):
    """Smallest |m| over real axis points (m, 0) making a right angle with a pair.

    Both configurations are scanned: right angle at a point of the pair
    (linear condition) and right angle at the axis point (quadratic).
    Returns (margin, (j1, j2, m)).
    """
    pts = sorted(set(modes))
    if len(pts) < 2:
        return math.inf, None
    P = np.array(pts, dtype=float)
    m1, n1 = P[:, 0][:, None], P[:, 1][:, None]
    m2, n2 = P[:, 0][None, :], P[:, 1][None, :]
    best, wit = math.inf, None
    with np.errstate(divide="ignore", invalid="ignore"):
        # right angle at j2
        dm = m1 - m2
        lin = ((n1 - n2) * n2 + dm * m2) / dm
        lin[dm == 0] = np.nan
        np.fill_diagonal(lin, np.nan)
        # right angle at (m, 0)
        b = m1 + m2
        c = m1 * m2 + n1 * n2
        disc = b * b - 4 * c
        sq = np.sqrt(np.where(disc >= 0, disc, np.nan))
        r1 = (b + sq) / 2
        # the smaller root via Vieta to avoid cancellation
        r2 = np.where(r1 != 0, c / r1, (b - sq) / 2)
        for arr in (lin, r1, r2):
            a = np.abs(arr)
            np.fill_diagonal(a, np.nan)
            if np.all(np.isnan(a)):
                continue
            idx = np.nanargmin(a)
            i, k = divmod(int(idx), len(pts))
            if a[i, k] < best:
                best = float(a[i, k])
                wit = (tuple(pts[i]), tuple(pts[k]), float(arr[i, k]))
    return best, wit


def verify_properties(cand: Candidate) -> PropertyReport:
    if cand.g < 1:
        raise LatticeError("candidate has no generations")
    gen_of = {}
    dup = None
    for k, gen in enumerate(cand.generations):
        for j in gen:
            if j in gen_of and dup is None:
                dup = j
            gen_of[j] = k + 1
    pts = sorted(gen_of)
    ptset = set(pts)
    g = cand.g
    res = {}

    # rectangles and pair-sum collisions from one pass
    groups = _pair_groups(pts)
    rects = []
    for pairs in groups.values():
        for x in range(len(pairs)):
            for y in range(x + 1, len(pairs)):
                rects.append((pairs[x], pairs[y]))

    def nuclear(d1, d2):
        k1 = {gen_of[d1[0]], gen_of[d1[1]]}
        k2 = {gen_of[d2[0]], gen_of[d2[1]]}
        if len(k1) != 1 or len(k2) != 1:
            return None
        a, b = k1.pop(), k2.pop()
        if b == a + 1:
            return a, d1, d2
        if a == b + 1:
            return b, d2, d1
        return None

    nuclear_found = []
    stray = None
    for d1, d2 in rects:
        nf = nuclear(d1, d2)
        if nf is None:
            stray = stray or (d1[0], d2[0], d1[1], d2[1])
        else:
            nuclear_found.append(nf)

    as_parent = defaultdict(list)
    as_child = defaultdict(list)
    for k, dp, dc in nuclear_found:
        for j in dp:
            as_parent[j].append((dp, dc))
        for j in dc:
            as_child[j].append((dp, dc))

    tree = cand.tree
    declared = tree.family_keys()

    # II: unique spouse and children for generations 1..g-1
    wit = None
    sizes = [len(gen) for gen in cand.generations]
    if len(set(sizes)) > 1:
        wit = ("generation sizes", tuple(sizes))
    for j in ([] if wit else pts):
        if gen_of[j] < g and len(as_parent[j]) != 1:
            wit = (j, len(as_parent[j]))
            break
        if gen_of[j] < g and _rect_key(*as_parent[j][0]) not in declared:
            wit = (j, "undeclared")
            break
    res["II"] = PropertyResult(wit is None, wit)

    # III: unique sibling and parents for generations 2..g
    wit = None
    for j in pts:
        if gen_of[j] > 1 and len(as_child[j]) != 1:
            wit = (j, len(as_child[j]))
            break
    res["III"] = PropertyResult(wit is None, wit)

    # IV: sibling differs from spouse
    wit = None
    for j in pts:
        if 1 < gen_of[j] < g and len(as_parent[j]) == 1 and len(as_child[j]) == 1:
            dp = as_parent[j][0][0]
            dc = as_child[j][0][1]
            spouse = dp[1] if dp[0] == j else dp[0]
            sib = dc[1] if dc[0] == j else dc[0]
            if spouse == sib:
                wit = (j, spouse)
                break
    res["IV"] = PropertyResult(wit is None, wit)

    # I: closure via right triangles; also catches duplicates across generations
    wit = None
    if dup is not None:
        wit = (dup,)
    else:
        for a, b, c in right_triangles(pts):
            d = (a[0] + c[0] - b[0], a[1] + c[1] - b[1])
            if d not in ptset:
                wit = (a, b, c)
                break
    res["I"] = PropertyResult(wit is None, wit)

    # V: every rectangle is a declared nuclear family
    wit = stray
    if wit is None:
        for k, dp, dc in nuclear_found:
            if _rect_key(dp, dc) not in declared:
                wit = (dp[0], dc[0], dp[1], dc[1])
                break
    if wit is None and len(nuclear_found) != len(declared):
        missing = declared - {_rect_key(dp, dc) for _, dp, dc in nuclear_found}
        if missing:
            f = next(iter(sorted(missing, key=lambda s: sorted(map(sorted, s)))))
            wit = tuple(sorted(j for d in f for j in d))
    res["V"] = PropertyResult(wit is None, wit)

    # VI: two-, three- and four-term linear relations
    wit = None
    for j in pts:
        if (-j[0], -j[1]) in ptset:
            wit = (j, (-j[0], -j[1]))
            break
    if wit is None:
        sums = defaultdict(list)
        for i in range(len(pts)):
            a = pts[i]
            for k in range(i, len(pts)):
                b = pts[k]
                s = (a[0] + b[0], a[1] + b[1])
                if s in ptset:
                    wit = (a, s, b)
                    break
                sums[s].append((a, b))
            if wit is not None:
                break
        if wit is None:
            for s, pairs in sums.items():
                if len(pairs) < 2:
                    continue
                for x in range(len(pairs)):
                    for y in range(x + 1, len(pairs)):
                        p, q = pairs[x], pairs[y]
                        if p[0] == p[1] or q[0] == q[1] or _rect_key(p, q) not in declared:
                            wit = (p[0], q[0], p[1], q[1])
                            break
                    if wit is not None:
                        break
                if wit is not None:
                    break
    res["VI"] = PropertyResult(wit is None, wit)

    # VII: no point on a coordinate axis
    wit = next(((j,) for j in pts if j[0] == 0 or j[1] == 0), None)
    res["VII"] = PropertyResult(wit is None, wit)

    # VIII: no right angle formed with the origin
    wit = None
    for i in range(len(pts)):
        a = pts[i]
        na = a[0] * a[0] + a[1] * a[1]
        for k in range(i + 1, len(pts)):
            b = pts[k]
            dot = a[0] * b[0] + a[1] * b[1]
            if dot == 0 or dot == na or dot == b[0] * b[0] + b[1] * b[1]:
                wit = (a, b)
                break
        if wit is not None:
            break
    res["VIII"] = PropertyResult(wit is None, wit)

    margin, mwit = right_angle_margin(pts)
    rep = PropertyReport({k: res[k] for k in PROPERTY_NAMES}, margin, mwit,
                         len(rects), len(nuclear_found))
    return rep


# ---------------------------------------------------------------- construction

def procreate(w1, w3):
    """Children of diagonal spouses: (w1+w3)/2 +- i(w1-w3)/2 in C ~ Z^2."""
    sx, sy = w1[0] + w3[0], w1[1] + w3[1]
    dx, dy = w1[0] - w3[0], w1[1] - w3[1]
    if (sx - dy) % 2 or (sy + dx) % 2:
        raise LatticeError(f"spouses {w1}, {w3} have non-integral children")
    return Mode((sx - dy) // 2, (sy + dx) // 2), Mode((sx + dy) // 2, (sy - dx) // 2)


def _match(items, fam_of, rng, fixed=(), tries=400):
    """Random spouse matching under the tree constraints.

    Siblings never marry, and no two couples may link the same pair of
    families: crosswise marriages between two sibling pairs force a
    four-term linear relation between grandchildren and grandparents.
    `fixed` lists modes that must be matched first (in order) with a
    partner from `items`.
    """
    for _ in range(tries):
        used_links = set()
        pairs = []
        pool = [items[i] for i in rng.permutation(len(items))]
        ok = True
        for a in list(fixed) + [None]:
            if a is None:
                break
            for t, b in enumerate(pool):
                link = frozenset((fam_of[a], fam_of[b]))
                if fam_of[a] != fam_of[b] and link not in used_links:
                    used_links.add(link)
                    pairs.append((a, b))
                    pool = pool[:t] + pool[t + 1:]
                    break
            else:
                ok = False
                break
        while ok and pool:
            a = pool[0]
            for t in range(1, len(pool)):
                b = pool[t]
                link = frozenset((fam_of[a], fam_of[b]))
                if fam_of[a] != fam_of[b] and link not in used_links:
                    used_links.add(link)
                    pairs.append((a, b))
                    pool = pool[1:t] + pool[t + 1:]
                    break
            else:
                ok = False
        if ok:
            return pairs
    raise LatticeError("could not find an admissible spouse matching")


def _draw_candidate(g, rng, spread, rich_factor):
    size = 2 ** (g - 1)
    spread = max(2, int(spread))
    seen = set()
    first = []
    rich = set()
    if rich_factor:
        R = spread * float(rich_factor)
        while True:
            phi = rng.uniform(0.0, 2 * math.pi)
            p = (int(round(R * math.cos(phi))), int(round(R * math.sin(phi))))
            if p[0] and p[1]:
                break
        first.append(p)
        seen.add(p)
        rich.add(p)
    while len(first) < size:
        p = (int(rng.integers(-spread, spread + 1)), int(rng.integers(-spread, spread + 1)))
        if p[0] == 0 or p[1] == 0 or p in seen or (-p[0], -p[1]) in seen:
            continue
        seen.add(p)
        first.append(p)
    scale = 2 ** (g - 1)
    gen = [Mode(scale * a, scale * b) for a, b in first]
    rich = {Mode(scale * a, scale * b) for a, b in rich}
    fam_of = {j: i for i, j in enumerate(gen)}
    gens, fams = [gen], []
    for k in range(1, g):
        cur = gens[-1]
        rich_now = [j for j in cur if j in rich]
        pairs = _match([j for j in cur if j not in rich], fam_of, rng, fixed=rich_now)
        nxt, new_rich, new_fam = [], set(), {}
        for p1, p2 in pairs:
            c1, c2 = procreate(p1, p2)
            new_fam[c1] = new_fam[c2] = len(fams)
            fams.append(Family(k, p1, p2, c1, c2))
            nxt += [c1, c2]
            if p1 in rich or p2 in rich:
                new_rich.update((c1, c2))
        gens.append(nxt)
        fam_of, rich = new_fam, new_rich
    # reduce by the common factor
    g0 = 0
    for gen_ in gens:
        for j in gen_:
            g0 = math.gcd(g0, j.m, j.n)
    g0 = max(g0, 1)
    red = lambda j: Mode(j.m // g0, j.n // g0)
    gens = [sorted(red(j) for j in gen_) for gen_ in gens]
    fams = [Family(f.k, red(f.p1), red(f.p2), red(f.c1), red(f.c2)) for f in fams]
    fams.sort(key=_family_sort_key)
    return Candidate(gens, fams)


def build_prototype(g: int, seed: int, spread: float = 1e3, rich_factor: float | None = None,
                    orientation: str = "backward", budget: int = 50,
                    margin_floor: float | None = None) -> Candidate:
    """Random family tree via the procreation map, rejection-sampled on I-VIII.

    rich_factor: if given, generation 1 holds one mode of norm ~ spread*rich_factor
    and every descendant of it is paired with a small spouse, so mass of the
    weights concentrates as in a backward cascade.  orientation="forward"
    reverses the generation order.
    """
    if g < 2:
        raise LatticeError("need g >= 2")
    if g == 3:
        # two sibling pairs in generation 2 can only marry crosswise
        raise LatticeError("g = 3 admits no tree: both couples would link the same two families")
    if orientation not in ("backward", "forward"):
        raise LatticeError(f"unknown orientation {orientation!r}")
    rng = np.random.Generator(np.random.Philox(seed))
    last = None
    for _ in range(budget):
        cand = _draw_candidate(g, rng, spread, rich_factor)
        if orientation == "forward":
            cand = cand.reversed()
        last = verify_properties(cand)
        if last.ok and (margin_floor is None or last.margin >= margin_floor):
            return cand
    raise BudgetExhausted(f"no admissible candidate in {budget} draws", last)


# ---------------------------------------------------------------- certification

@dataclass
class CertifiedLambda:
    generations: list
    families: list
    scale_n: int
    f_scale: float
    report: PropertyReport
    c_required: float

    @property
    def g(self):
        return len(self.generations)

    @property
    def tree(self):
        return FamilyTree(self.families)

    def modes(self):
        return [j for gen in self.generations for j in gen]

    def candidate(self):
        return Candidate(self.generations, self.families)

    def to_dict(self):
        index = {j: (k, i) for k, gen in enumerate(self.generations) for i, j in enumerate(gen)}
        fams = [[f.k, index[f.p1][1], index[f.p2][1], index[f.c1][1], index[f.c2][1]]
                for f in self.families]
        return {
            "schema": "cascade-lab/lambda",
            "version": 1,
            "g": self.g,
            "scale_n": self.scale_n,
            "f_scale": self.f_scale,
            "c_required": self.c_required,
            "generations": [[[j.m, j.n] for j in gen] for gen in self.generations],
            "families": fams,
            "report": self.report.to_dict(),
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("schema") != "cascade-lab/lambda" or d.get("version") != 1:
            raise LatticeError("unsupported lambda document")
        gens = [[Mode(*p) for p in gen] for gen in d["generations"]]
        fams = []
        for k, a, b, c, e in d["families"]:
            fams.append(Family(k, gens[k - 1][a], gens[k - 1][b], gens[k][c], gens[k][e]))
        return cls(gens, fams, d["scale_n"], d["f_scale"],
                   PropertyReport.from_dict(d["report"]), d["c_required"])


def scale_and_certify(cand: Candidate, N: int, f_scale: float = 1e3) -> CertifiedLambda:
    if N < 1:
        raise LatticeError("N must be >= 1")
    scaled = cand.scaled(N) if N != 1 else cand
    rep = verify_properties(scaled)
    if not rep.ok:
        raise LatticeError(f"properties fail after scaling: {rep.failed()}")
    if rep.margin < math.sqrt(f_scale):
        j1, j2, m = rep.margin_witness
        raise MarginViolation(f"right-angle margin {rep.margin:.6g} < sqrt(fScale)", (j1, j2), (m, 0))
    norms = [math.sqrt(j.norm2()) for j in scaled.modes()]
    c_req = max(f_scale / min(norms), max(norms) / (3 ** scaled.g * f_scale), 1.0)
    return CertifiedLambda(scaled.generations, scaled.families, N, float(f_scale), rep, c_req)


# ---------------------------------------------------------------- weights

@dataclass
class GrowthWeights:
    s: float
    weights: list
    ratio: float | None
    threshold: float | None
    passed: bool | None


def growth_threshold(g: int, s: float) -> float:
    if s <= 1:
        return 0.5 * 2.0 ** ((1 - s) * (g - 4))
    return 0.5 * 2.0 ** ((s - 1) * (g - 4))


def generation_weights(lam, s: float) -> GrowthWeights:
    if not (s > 0 and math.isfinite(s)):
        raise LatticeError("s must be a positive finite exponent")
    gens = lam.generations
    w = [math.fsum(float(j.m * j.m + j.n * j.n) ** s for j in gen) for gen in gens]
    if any(not math.isfinite(x) for x in w):
        raise LatticeError("non-finite generation weight")
    g = len(gens)
    if g < 4:
        return GrowthWeights(s, w, None, None, None)
    ratio = w[g - 2] / w[2]
    thr = growth_threshold(g, s)
    return GrowthWeights(s, w, ratio, thr, ratio >= thr)
