"""Toy model, traversal orbits, lattice lift and the perturbed resonant system.

The perturbed system is integrated in rescaled variables B = nu * beta,
tau = t / nu^2, Ys = nu^2 * Y.  The quartic part is invariant under this
scaling, so B^nu(tau) is the toy orbit b(tau) itself; quintic remainder terms
pick up a factor nu^-1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import minimize_scalar

from .lattice import CertifiedLambda
from .spectrum import CorrectionModel, FrequencyModel, gamma_defect, make_sites


class DynamicsError(Exception):
    pass


class IntegrationError(DynamicsError):
    def __init__(self, msg, t, state):
        super().__init__(msg)
        self.t = t
        self.state = state


class TraversalSearchError(DynamicsError):
    def __init__(self, msg, profile):
        super().__init__(msg)
        self.profile = profile


class BasinError(DynamicsError):
    pass


# ---------------------------------------------------------------- toy model

def toy_rhs(b, t=0.0):
    """db/dt for  i b_k' = -b_k^2 conj(b_k) + 2 conj(b_k) (b_{k-1}^2 + b_{k+1}^2)."""
    b = np.asarray(b, dtype=complex)
    nb = np.zeros_like(b)
    nb[1:] += b[:-1] ** 2
    nb[:-1] += b[1:] ** 2
    return -1j * (-b * b * b.conj() + 2.0 * b.conj() * nb)


def toy_hamiltonian(b) -> float:
    b = np.asarray(b, dtype=complex)
    a2 = np.abs(b) ** 2
    cross = b[:-1] ** 2 * b[1:].conj() ** 2
    return float(-0.5 * np.sum(a2 * a2) + 2.0 * np.sum(cross.real))


def toy_conserved(b):
    b = np.asarray(b, dtype=complex)
    return float(np.sum(np.abs(b) ** 2)), toy_hamiltonian(b)


@dataclass
class ToyState:
    b: np.ndarray
    t: float = 0.0
    mass: float = field(init=False)

    def __post_init__(self):
        self.b = np.asarray(self.b, dtype=complex)
        if not np.all(np.isfinite(self.b)):
            raise DynamicsError("non-finite toy state")
        self.mass = float(np.sum(np.abs(self.b) ** 2))


# ---------------------------------------------------------------- integrator

@dataclass
class Trajectory:
    t: np.ndarray
    y: np.ndarray  # shape (len(t), dim)
    sol: object | None
    nfev: int

    def at(self, t):
        if self.sol is None:
            return np.repeat(self.y[:1], np.size(t), axis=0).reshape(np.shape(t) + self.y.shape[1:])
        return self.sol(t).T if np.ndim(t) else self.sol(t)


def integrate(f, y0, T: float, tol: float = 1e-10, t_eval=None, atol_scale: float = 1e-3,
              dense: bool = True) -> Trajectory:
    """Adaptive DOP853; f(t, y) -> dy/dt on complex vectors.

    dense=False drops the interpolant, which matters for large lattices
    where it would hold every step of the run.
    """
    if not tol > 0:
        raise DynamicsError("tol must be positive")
    y0 = np.asarray(y0, dtype=complex)
    if T == 0:
        return Trajectory(np.array([0.0]), y0[None, :].copy(), None, 0)
    sol = solve_ivp(f, (0.0, T), y0, method="DOP853", rtol=tol, atol=tol * atol_scale,
                    dense_output=dense, t_eval=t_eval)
    if sol.status < 0:
        raise IntegrationError(sol.message, float(sol.t[-1]), sol.y[:, -1].copy())
    return Trajectory(sol.t, sol.y.T, sol.sol if dense else None, sol.nfev)


def integrate_toy(state: ToyState, T: float, tol: float = 1e-10, t_eval=None) -> Trajectory:
    return integrate(lambda t, b: toy_rhs(b), state.b, T, tol, t_eval)


# ---------------------------------------------------------------- traversal search

def stage_times(ts, masses, hysteresis: float = 0.05):
    """First time each generation takes over as the mass leader.

    masses has shape (len(ts), g).  The leader only changes when a new
    generation beats the current one by more than the hysteresis.
    """
    lead = int(np.argmax(masses[0]))
    out = {lead + 1: float(ts[0])}
    for t, m in zip(ts[1:], masses[1:]):
        k = int(np.argmax(m))
        if k != lead and m[k] > m[lead] + hysteresis:
            lead = k
            out.setdefault(lead + 1, float(t))
    return out


@dataclass
class ToyOrbitResult:
    g: int
    mu: float
    b0: np.ndarray
    bT: np.ndarray
    T0: float
    phases: dict
    stage_times: dict
    peak_out: float
    mass_in: float
    tol: float
    trajectory: Trajectory = field(repr=False)

    def b_at(self, tau):
        return self.trajectory.at(tau)

    def to_dict(self):
        return {"g": self.g, "mu": self.mu, "T0": self.T0, "tol": self.tol,
                "b0": [[z.real, z.imag] for z in self.b0], "bT": [[z.real, z.imag] for z in self.bT],
                "phases": {str(k): v for k, v in self.phases.items()},
                "stage_times": {str(k): v for k, v in self.stage_times.items()},
                "peak_out": self.peak_out, "mass_in": self.mass_in}


def _seeded(g, mu, phases):
    b = np.zeros(g, dtype=complex)
    for k, p in phases.items():
        b[k - 1] = mu * np.exp(1j * p)
    b[2] = math.sqrt(1.0 - float(np.sum(np.abs(b) ** 2)))
    return b


def _window_peak(g, mu, phases, k, t0, t1, tol, samples=1001):
    tr = integrate(lambda t, b: toy_rhs(b), _seeded(g, mu, phases), t1, tol)
    ts = np.linspace(t0, t1, samples)
    m = np.abs(tr.at(ts)) ** 2
    i = int(np.argmax(m[:, k - 1]))
    return float(m[i, k - 1]), float(ts[i])


def find_traversal_orbit(g: int, mu: float, thresholds=(0.99, 0.90), tol: float = 1e-10,
                         search_tol: float = 1e-9, grid: int = 48, window=(1.2, 6.0)) -> ToyOrbitResult:
    """Shoot from near the generation-3 circle to a near-full generation g-1.

    Generations 4..g-1 get seeds of size mu; generations 1, 2 and g start at
    zero.  The seed phases are fixed one stage at a time: the phase of the
    seed in generation k maximizes the peak of |b_k|^2 inside a window that
    starts at the previous stage's peak and lasts window[0] ln(1/mu) + window[1].
    """
    if g < 5:
        raise DynamicsError("traversal needs g >= 5")
    if not 0 < mu < 1:
        raise DynamicsError("mu must lie in (0, 1)")
    L = math.log(1.0 / mu)
    phases, t_prev, profile = {}, 0.0, []
    for k in range(4, g):
        t_end = t_prev + window[0] * L + window[1]
        trial = np.linspace(0.0, 2 * np.pi, grid, endpoint=False)
        vals = [_window_peak(g, mu, {**phases, k: p}, k, t_prev, t_end, search_tol)[0] for p in trial]
        i = int(np.argmax(vals))
        h = trial[1] - trial[0]
        r = minimize_scalar(lambda p: -_window_peak(g, mu, {**phases, k: p}, k, t_prev, t_end, search_tol)[0],
                            bounds=(trial[i] - h, trial[i] + h), method="bounded", options={"xatol": 1e-10})
        phases[k] = float(r.x % (2 * np.pi))
        pk, t_prev = _window_peak(g, mu, phases, k, t_prev, t_end, search_tol)
        profile.append((k, pk, t_prev))
    b0 = _seeded(g, mu, phases)
    horizon = t_prev + 2.0
    tr = integrate(lambda t, b: toy_rhs(b), b0, horizon, tol)
    out = g - 1
    # locate the first-passage peak of the output generation on the dense output
    lo = profile[-2][2] if len(profile) > 1 else 0.0
    ts = np.linspace(lo, horizon, 4001)
    m = np.abs(tr.at(ts)) ** 2
    i = int(np.argmax(m[:, out - 1]))
    a, c = ts[max(i - 1, 0)], ts[min(i + 1, len(ts) - 1)]
    r = minimize_scalar(lambda t: -abs(tr.at(t)[out - 1]) ** 2, bounds=(a, c), method="bounded",
                        options={"xatol": 1e-12})
    T0 = float(r.x)
    peak = float(abs(tr.at(T0)[out - 1]) ** 2)
    mass_in = float(abs(b0[2]) ** 2)
    if mass_in < thresholds[0] or peak < thresholds[1]:
        raise TraversalSearchError(f"traversal search failed: |b3(0)|^2={mass_in:.4f}, peak={peak:.4f}",
                                   profile)
    final = integrate(lambda t, b: toy_rhs(b), b0, T0, tol)
    ts = np.linspace(0.0, T0, 2001)
    st = stage_times(ts, np.abs(final.at(ts)) ** 2)
    return ToyOrbitResult(g, mu, b0, final.y[-1].copy(), T0, phases, st, peak, mass_in, tol, final)


# ---------------------------------------------------------------- lattice system

class LatticeSystem:
    """Index arrays for the resonant equations on a certified set.

    Slot n (one past the last mode) is a permanent zero used for missing
    relatives in the first and last generations.
    """

    def __init__(self, lam: CertifiedLambda):
        self.lam = lam
        self.modes = lam.modes()
        self.n = len(self.modes)
        self.index = {j: i for i, j in enumerate(self.modes)}
        self.generation = np.array([k for k, gen in enumerate(lam.generations) for _ in gen])
        n = self.n
        tree = lam.tree
        sp, c1, c2, sb, p1, p2 = (np.full(n, n) for _ in range(6))
        fam_par, fam_chi = np.full(n, -1), np.full(n, -1)
        self.families = list(lam.families)
        for q, f in enumerate(self.families):
            for a in (f.p1, f.p2):
                fam_par[self.index[a]] = q
            for a in (f.c1, f.c2):
                fam_chi[self.index[a]] = q
        for j, i in self.index.items():
            if j in tree.spouse:
                sp[i] = self.index[tree.spouse[j]]
                c1[i], c2[i] = (self.index[x] for x in tree.children[j])
            if j in tree.sibling:
                sb[i] = self.index[tree.sibling[j]]
                p1[i], p2[i] = (self.index[x] for x in tree.parents[j])
        self.sp, self.c1, self.c2, self.sb, self.p1, self.p2 = sp, c1, c2, sb, p1, p2
        self.fam_par, self.fam_chi = fam_par, fam_chi
        self.m = np.array([j.m for j in self.modes], dtype=float)
        self.nn = np.array([j.n for j in self.modes], dtype=float)

    def vector(self, state):
        """Dense vector from a dict Mode -> value; keys outside the set are an error."""
        v = np.zeros(self.n, dtype=complex)
        for j, z in state.items():
            if j not in self.index:
                raise DynamicsError(f"support leak: {tuple(j)} is not in the set")
            v[self.index[j]] = z
        return v

    def generation_constant(self, b):
        return np.asarray(b, dtype=complex)[self.generation]

    def generation_values(self, beta):
        out = []
        for k in range(self.lam.g):
            out.append(beta[self.generation == k])
        return out


def _pad(v):
    return np.concatenate((v, [0.0]))


def resonant_rhs(beta, system: LatticeSystem, phase_par=None, phase_chi=None):
    """d beta/dt on U_Lambda; optional per-mode phase factors multiply the family terms."""
    if isinstance(beta, dict):
        beta = system.vector(beta)
    b = _pad(np.asarray(beta, dtype=complex))
    s = system
    par = 2.0 * b[s.c1] * b[s.c2] * b[s.sp].conj()
    chi = 2.0 * b[s.p1] * b[s.p2] * b[s.sb].conj()
    if phase_par is not None:
        par = par * phase_par
        chi = chi * phase_chi
    bb = b[:-1]
    return -1j * (-bb * bb * bb.conj() + par + chi)


# ---------------------------------------------------------------- lift

@dataclass
class LiftedPath:
    orbit: ToyOrbitResult
    nu: float
    system: LatticeSystem

    def beta(self, t):
        """beta^nu at physical time t: nu^-1 b_k(nu^-2 t) on generation k."""
        b = self.orbit.b_at(t / self.nu ** 2)
        return b[self.system.generation] / self.nu

    def scaled(self, tau):
        return self.orbit.b_at(tau)[self.system.generation]

    @property
    def T(self):
        return self.nu ** 2 * self.orbit.T0

    def as_dict(self, t):
        v = self.beta(t)
        return {j: v[i] for i, j in enumerate(self.system.modes)}


def lift_and_rescale(orbit: ToyOrbitResult, nu: float, lam: CertifiedLambda) -> LiftedPath:
    if not nu > 0:
        raise DynamicsError("nu must be positive")
    if lam.g != orbit.g:
        raise DynamicsError(f"generation mismatch: set has {lam.g}, orbit has {orbit.g}")
    return LiftedPath(orbit, float(nu), LatticeSystem(lam))


# ---------------------------------------------------------------- perturbation model

@dataclass
class PerturbationModel:
    J1: bool = False
    gamma_scale: float = 1.0
    J2amplitude: float = 0.0
    Rmodel: float = 0.0
    nu: float = 50.0
    sigma: float = 0.05
    seed: int = 0
    eps: float = 0.1
    M0: float = 1.0
    sites: tuple = (1, 2)
    lam: tuple | None = None
    halo_terms: int = 32

    def __post_init__(self):
        for name in ("gamma_scale", "J2amplitude", "Rmodel", "nu", "sigma", "M0"):
            if getattr(self, name) < 0:
                raise DynamicsError(f"{name} must be >= 0")
        if self.nu <= 0:
            raise DynamicsError("nu must be positive")

    @classmethod
    def at_bounds(cls, lam: CertifiedLambda, nu: float = 50.0, sigma: float = 0.05, eps: float = 0.1,
                     seed: int = 0, **kw):
        """All knobs on at the sizes of the remainder bounds.

        f is the lattice scale min |j|: J2 ~ f^(-4/5), R ~ eps^(-1/2) and
        the rectangle defects come from the bounded corrections model.
        """
        f = min(math.hypot(j.m, j.n) for j in lam.modes())
        return cls(J1=True, J2amplitude=f ** -0.8, Rmodel=eps ** -0.5, nu=nu, sigma=sigma, eps=eps,
                   seed=seed, **kw)

    def is_zero(self):
        return not self.J1 and self.J2amplitude == 0 and self.Rmodel == 0


class _PerturbedSystem:
    def __init__(self, system: LatticeSystem, model: PerturbationModel, theta0=None):
        self.s = system
        self.model = model
        lam = system.lam
        n = system.n
        rng = np.random.Generator(np.random.Philox(model.seed))
        sites = make_sites(model.sites, 1)
        self.sites = sites
        d = sites.d
        lam_vec = np.full(d, 0.75) if model.lam is None else np.asarray(model.lam, dtype=float)
        self.theta0 = np.zeros(d) if theta0 is None else np.asarray(theta0, dtype=float)
        # rectangle defects
        self.gamma = np.zeros(len(system.families))
        if model.J1:
            fm = FrequencyModel(sites, lam_vec, model.eps, N=lam.scale_n,
                                corrections=CorrectionModel(model.M0, model.seed))
            self.gamma = np.array([gamma_defect(fm, (f.p1, f.c1, f.p2, f.c2)) for f in system.families])
        # J2: action couplings and rectangle coefficient deviations
        w = rng.uniform(-1.0, 1.0, size=(n, n))
        self.W = 0.5 * (w + w.T)
        self.cF = rng.uniform(-1, 1, len(system.families)) + 1j * rng.uniform(-1, 1, len(system.families))
        # R: quintic couplings to halo modes
        self._halo(rng, sites)
        self.dim = n + len(self.halo)

    def _halo(self, rng, sites):
        s = self.s
        modes = s.modes
        n = s.n
        halo, hidx, terms = [], {}, []
        Q = self.model.halo_terms
        tries = 0
        while len(terms) < Q and tries < 200 * max(Q, 1):
            tries += 1
            a, b, c, e = (int(x) for x in rng.choice(n, size=4, replace=False))
            i = int(rng.integers(sites.d))
            ell = np.zeros(sites.d, dtype=int)
            ell[i] = 1
            ja, jb, jc, je = modes[a], modes[b], modes[c], modes[e]
            h = (ja.m + jb.m - jc.m - je.m + sites.m[i], ja.n + jb.n - jc.n - je.n)
            if h[1] == 0 or h[0] in sites.m or h in s.index:
                continue
            if h not in hidx:
                hidx[h] = n + len(halo)
                halo.append(h)
            kappa = rng.uniform(0, 1) * np.exp(1j * rng.uniform(0, 2 * np.pi))
            terms.append((a, b, c, e, hidx[h], ell, kappa))
        self.halo = halo
        Qn = max(len(terms), 1)
        if terms:
            self.q_plus = np.array([[t[0], t[1]] for t in terms])
            self.q_minus = np.array([[t[2], t[3], t[4]] for t in terms])
            self.q_ell = np.array([t[5] for t in terms], dtype=float)
            kap = np.array([t[6] for t in terms]) / Qn  # total weight <= 1
            self.q_kappa = kap * np.exp(1j * (self.q_ell @ self.theta0))
        else:
            self.q_plus = np.zeros((0, 2), dtype=int)
            self.q_minus = np.zeros((0, 3), dtype=int)
            self.q_ell = np.zeros((0, self.sites.d))
            self.q_kappa = np.zeros(0, dtype=complex)

    def halo_modes(self):
        return list(self.halo)

    def rhs(self, tau, y):
        """Scaled equations: y = (B on Lambda, B on halo, Ys)."""
        m = self.model
        s = self.s
        n = s.n
        d = self.sites.d
        B = y[:self.dim]
        Bl = B[:n]
        pp = pc = None
        if m.J1 and self.gamma.size:
            ph = np.exp(1j * m.gamma_scale * self.gamma * (m.nu ** 2 * float(tau)))
            ph = np.append(ph, 1.0)
            pp = np.where(s.fam_par >= 0, ph[s.fam_par].conj(), 1.0)
            pc = np.where(s.fam_chi >= 0, ph[s.fam_chi], 1.0)
        grad = np.zeros(self.dim, dtype=complex)  # d H / d conj(B), perturbation part
        dB = np.zeros(len(y), dtype=complex)
        dB[:n] = resonant_rhs(Bl, s, pp, pc)
        if m.J2amplitude:
            A = m.J2amplitude
            a2 = np.abs(Bl) ** 2
            grad[:n] += 2.0 * A * (self.W @ a2) * Bl
            b = _pad(Bl)
            cF = np.append(self.cF, 0.0)
            fp = np.where(s.fam_par >= 0, s.fam_par, len(self.cF))
            fc = np.where(s.fam_chi >= 0, s.fam_chi, len(self.cF))
            grad[:n] += A * cF[fp].conj() * b[s.sp].conj() * b[s.c1] * b[s.c2]
            grad[:n] += A * cF[fc] * b[s.p1] * b[s.p2] * b[s.sb].conj()
        dY = np.zeros(d)
        if m.Rmodel:
            R = m.Rmodel
            if len(self.q_kappa):
                P1 = B[self.q_plus]  # (Q, 2)
                M1 = B[self.q_minus].conj()  # (Q, 3)
                k = self.q_kappa
                # d/d conj(B) of kappa * P + conj(kappa * P)
                g_minus = k[:, None] * np.stack([P1[:, 0] * P1[:, 1] * M1[:, 1] * M1[:, 2],
                                                 P1[:, 0] * P1[:, 1] * M1[:, 0] * M1[:, 2],
                                                 P1[:, 0] * P1[:, 1] * M1[:, 0] * M1[:, 1]], axis=1)
                Pc = (P1[:, 0] * P1[:, 1] * M1[:, 0] * M1[:, 1] * M1[:, 2])
                Mc = B[self.q_minus]
                g_plus = k.conj()[:, None] * np.stack([P1[:, 1].conj() * Mc[:, 0] * Mc[:, 1] * Mc[:, 2],
                                                       P1[:, 0].conj() * Mc[:, 0] * Mc[:, 1] * Mc[:, 2]],
                                                      axis=1)
                np.add.at(grad, self.q_minus.ravel(), (g_minus / m.nu * R).ravel())
                np.add.at(grad, self.q_plus.ravel(), (g_plus / m.nu * R).ravel())
                # dYs/dtau = d/dtheta H = -2 sum ell Im(kappa P)
                dY = -2.0 * R / m.nu * (self.q_ell.T @ (k * Pc).imag)
        dB[:self.dim] += -1j * grad
        dB[self.dim:] = dY
        return dB


# ---------------------------------------------------------------- perturbed simulation

@dataclass
class DriftCertificate:
    times: np.ndarray
    xi_l1: np.ndarray
    Y_abs: np.ndarray
    M: np.ndarray
    bound: float
    nu: float
    sigma: float

    @property
    def sup_M(self):
        return float(np.max(self.M))

    @property
    def sup_xi(self):
        return float(np.max(self.xi_l1))

    @property
    def passed(self):
        return self.sup_M <= self.bound

    def to_dict(self):
        return {"nu": self.nu, "sigma": self.sigma, "bound": self.bound, "sup_M": self.sup_M,
                "sup_xi_l1": self.sup_xi, "sup_Y": float(np.max(self.Y_abs)), "passed": self.passed,
                "samples": int(len(self.times))}


@dataclass
class PerturbedRun:
    times: np.ndarray  # physical times
    beta: np.ndarray  # (len(times), n + halo), physical units
    Y: np.ndarray  # (len(times), d), physical units
    modes: list
    halo: list
    certificate: DriftCertificate
    nfev: int


def simulate_perturbed(path: LiftedPath, model: PerturbationModel, T: float | None = None, state0=None,
                       Y0=None, tol: float = 1e-10, samples: int = 401, theta0=None,
                       blowup: float = 1e3) -> PerturbedRun:
    """Integrate the perturbed resonant system next to the lifted toy orbit.

    T is a physical time (default nu^2 T0).  state0 is beta(0) on the set in
    physical units (default beta^nu(0)); it must lie in the bootstrap basin.
    """
    nu, sig = model.nu, model.sigma
    if abs(nu - path.nu) > 0:
        raise DynamicsError("model and lifted path use different nu")
    ps = _PerturbedSystem(path.system, model, theta0)
    n = path.system.n
    d = ps.sites.d
    tau_end = (path.T if T is None else T) / nu ** 2
    ref0 = path.scaled(0.0)
    B0 = np.zeros(ps.dim, dtype=complex)
    B0[:n] = ref0 if state0 is None else nu * np.asarray(state0, dtype=complex)[:n]
    Ys0 = np.zeros(d) if Y0 is None else nu ** 2 * np.asarray(Y0, dtype=float)
    if np.sum(np.abs(B0[:n] - ref0)) / nu > nu ** (-1 - 4 * sig) * (1 + 1e-12):
        raise BasinError("initial beta is outside the bootstrap basin")
    if np.sum(np.abs(Ys0)) / nu ** 2 > nu ** (-2 - 4 * sig) * (1 + 1e-12):
        raise BasinError("initial Y is outside the bootstrap basin")
    y0 = np.concatenate((B0, Ys0.astype(complex)))
    scale0 = float(np.sum(np.abs(B0)))
    big = blowup * max(scale0, 1.0)

    def f(tau, y):
        if not np.all(np.isfinite(y)) or np.sum(np.abs(y[:ps.dim])) > big:
            raise IntegrationError("blow-up detected", tau, y.copy())
        return ps.rhs(tau, y)

    taus = np.linspace(0.0, tau_end, samples)
    tr = integrate(f, y0, tau_end, tol, t_eval=taus if tau_end > 0 else None, dense=False)
    ys = tr.y
    if tau_end == 0:
        taus = np.array([0.0])
    Bs = ys[:, :ps.dim]
    Ys = ys[:, ps.dim:].real
    ref = np.array([path.scaled(t) for t in taus])
    xi = np.sum(np.abs(Bs[:, :n] - ref), axis=1) + np.sum(np.abs(Bs[:, n:]), axis=1)
    xi_l1 = xi / nu
    Y_abs = np.sum(np.abs(Ys), axis=1) / nu ** 2
    M = xi_l1 + nu * Y_abs
    cert = DriftCertificate(taus * nu ** 2, xi_l1, Y_abs, M, nu ** (-1 - sig), nu, sig)
    return PerturbedRun(taus * nu ** 2, Bs / nu, Ys / nu ** 2, list(path.system.modes), ps.halo_modes(),
                        cert, tr.nfev)


# ---------------------------------------------------------------- norms

@dataclass
class NormReport:
    l1: float
    l2: float
    hs: dict

    def to_dict(self):
        return {"l1": self.l1, "l2": self.l2, "hs": {str(k): v for k, v in self.hs.items()}}


def norm_report(state, s_list=(0.5,)) -> NormReport:
    """l1, l2 and H^s = (sum (1+|j|)^(2s) |beta_j|^2)^(1/2) of a mode -> value map."""
    if not isinstance(state, dict):
        modes, vals = state
        state = dict(zip(modes, vals))
    js = list(state.keys())
    v = np.array([state[j] for j in js], dtype=complex)
    a2 = np.abs(v) ** 2
    r = np.array([math.hypot(j[0], j[1]) for j in js])
    hs = {s: math.sqrt(math.fsum((1.0 + r) ** (2 * s) * a2)) for s in s_list}
    return NormReport(float(math.fsum(np.abs(v))), math.sqrt(math.fsum(a2)), hs)


def growth_target(g: int, s: float) -> float:
    return 2.0 ** ((1 - s) * (g - 4)) / 8.0


@dataclass
class GrowthReport:
    s: float
    g: int
    ratio: float
    ratio_sq: float
    target: float
    l2_drift: float

    @property
    def passed(self):
        return self.ratio >= self.target

    def to_dict(self):
        return {"s": self.s, "g": self.g, "ratio": self.ratio, "ratio_sq": self.ratio_sq,
                "target": self.target, "l2_drift": self.l2_drift, "passed": self.passed}


def growth_report(run: PerturbedRun, g: int, s: float = 0.5, index: int = -1) -> GrowthReport:
    modes = run.modes + [type(run.modes[0])(*h) for h in run.halo] if run.halo else run.modes
    r0 = norm_report((modes, run.beta[0]), (s,))
    rT = norm_report((modes, run.beta[index]), (s,))
    ratio = rT.hs[s] / r0.hs[s]
    drift = abs(rT.l2 ** 2 + float(np.sum(run.Y[index])) - r0.l2 ** 2 - float(np.sum(run.Y[0]))) / r0.l2 ** 2
    return GrowthReport(s, g, ratio, ratio * ratio, growth_target(g, s), drift)
