"""Model families: Hamiltonians, equations of motion, Lax pairs, residuals.

Six families are implemented:

* A_VECTOR           -- ell-particle model, ell x ell vector-representation pair
* SIMPLY_LACED_ROOT  -- root-type pair indexed by the whole root system
* BC_SHORT           -- BC_ell short-root pair, 2 ell x 2 ell
* TWISTED_BC_SHORT   -- extended twisted BC_ell short-root pair, 2 ell x 2 ell
* SPIN_SL            -- sl(ell) spin chain in matrix coordinates F_jk
* SPIN_SIMPLY_LACED  -- spin model driven by root-space structure constants,
                        realized concretely for the A series via matrix units

Renormalized ("tilde") couplings enter the Hamiltonian and equations of
motion; the bare couplings enter the Lax matrices.  Phase space is complex
throughout; no reality conditions are imposed.

All operations are pure; ModelSpec and PhaseState are immutable and
thread-safe.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .elliptic import EllipticContext, PeriodScale, wp, xy, sigma, HALF_PERIODS
from .errors import CollisionError, PoleGuardError, ToruslaxError
from .rootsys import (
    RootSystem,
    StructureConstants,
    build_root_system,
    root_dot,
    neg,
    sl_matrix_realization,
)

__all__ = [
    "ModelKind",
    "Mode",
    "ModelSpec",
    "PhaseState",
    "LaxSample",
    "renormalize",
    "hamiltonian",
    "inozemtsev_hamiltonian",
    "inozemtsev_map",
    "eom",
    "build_lax",
    "lax_residual",
    "lax_translation_residual",
    "spin_minimal_orbit",
    "collision_guard",
    "singular_points",
    "q_matrix",
    "p_matrix",
    "quadratic_trace_shift",
    "as_context",
]

_F = PeriodScale.FULL
_H = PeriodScale.HALF
_D = PeriodScale.DOUBLE

TWO_PI_I = 2j * math.pi


class ModelKind(Enum):
    A_VECTOR = "a-vector"
    SIMPLY_LACED_ROOT = "root"
    BC_SHORT = "bc"
    TWISTED_BC_SHORT = "twisted-bc"
    SPIN_SL = "spin-sl"
    SPIN_SIMPLY_LACED = "spin-root"


class Mode(Enum):
    ISOSPECTRAL = "isospectral"      # flow in t
    ISOMONODROMIC = "isomonodromic"  # flow in tau, slowed by 1/(2 pi i)


def as_context(tau) -> EllipticContext:
    return tau if isinstance(tau, EllipticContext) else EllipticContext(tau)


@dataclass(frozen=True)
class ModelSpec:
    """A model family plus couplings.  `ell` is the particle number for the
    vector/spin kinds and the BC rank; root-type kinds carry their root
    system explicitly."""

    kind: ModelKind
    ell: int
    couplings: dict
    root_system: RootSystem | None = None

    # -- constructors -------------------------------------------------
    @classmethod
    def a_vector(cls, ell: int, g: complex) -> "ModelSpec":
        if ell < 1:
            raise ToruslaxError("a-vector needs ell >= 1")
        return cls(ModelKind.A_VECTOR, ell, {"g": complex(g)})

    @classmethod
    def simply_laced(cls, root_system: RootSystem | str, rank: int | None = None,
                     g: complex = 1.0) -> "ModelSpec":
        if isinstance(root_system, str):
            root_system = build_root_system(root_system, rank)
        if not root_system.simply_laced:
            raise ToruslaxError("root-type model needs a simply laced system")
        return cls(ModelKind.SIMPLY_LACED_ROOT, root_system.rank,
                   {"g": complex(g)}, root_system)

    @classmethod
    def bc_short(cls, ell: int, gm: complex, gl: complex, gs: complex) -> "ModelSpec":
        rs = build_root_system("BC", ell)
        return cls(ModelKind.BC_SHORT, ell,
                   {"gm": complex(gm), "gl": complex(gl), "gs": complex(gs)}, rs)

    @classmethod
    def twisted_bc_short(cls, ell: int, gm: complex, gl1: complex, gl2: complex,
                         gs1: complex, gs2: complex) -> "ModelSpec":
        rs = build_root_system("BC", ell)
        return cls(ModelKind.TWISTED_BC_SHORT, ell,
                   {"gm": complex(gm), "gl1": complex(gl1), "gl2": complex(gl2),
                    "gs1": complex(gs1), "gs2": complex(gs2)}, rs)

    @classmethod
    def spin_sl(cls, ell: int) -> "ModelSpec":
        if ell < 2:
            raise ToruslaxError("spin-sl needs ell >= 2")
        return cls(ModelKind.SPIN_SL, ell, {})

    @classmethod
    def spin_simply_laced(cls, rank: int) -> "ModelSpec":
        # realized in the vector representation of sl(rank+1)
        rs = build_root_system("A", rank)
        return cls(ModelKind.SPIN_SIMPLY_LACED, rank + 1, {}, rs)

    # -- derived data --------------------------------------------------
    @property
    def is_spin(self) -> bool:
        return self.kind in (ModelKind.SPIN_SL, ModelKind.SPIN_SIMPLY_LACED)

    @property
    def n_particles(self) -> int:
        return self.ell

    @property
    def coord_dim(self) -> int:
        """Length of the q and p vectors: the ambient dimension of the root
        realization for root-type kinds (rank + 1 for the A series), the
        particle number otherwise."""
        if self.kind is ModelKind.SIMPLY_LACED_ROOT:
            return self.root_system.dim
        return self.ell

    @property
    def dim(self) -> int:
        """Lax matrix dimension."""
        k = self.kind
        if k in (ModelKind.A_VECTOR, ModelKind.SPIN_SL, ModelKind.SPIN_SIMPLY_LACED):
            return self.ell
        if k is ModelKind.SIMPLY_LACED_ROOT:
            return len(self.root_system.roots)
        return 2 * self.ell  # BC short-root pairs

    def renormalize(self) -> dict:
        """Effective (tilde-squared) couplings from the bare ones."""
        return renormalize(self.kind, self.couplings)

    def _cache(self, name, builder):
        val = self.__dict__.get(name)
        if val is None:
            val = builder()
            object.__setattr__(self, name, val)
        return val

    def lax_index(self) -> tuple:
        """Root labels of the Lax matrix rows (root-type kinds only)."""
        k = self.kind
        if k is ModelKind.SIMPLY_LACED_ROOT:
            return self.root_system.roots
        if k in (ModelKind.BC_SHORT, ModelKind.TWISTED_BC_SHORT):
            return self.root_system.orbits["short"]
        raise ToruslaxError("lax_index applies to root-type models")

    def _bc_tables(self):
        """Index maps for the short-root pair: for every ordered pair of
        short roots (beta, gamma) with beta - gamma a middle root, the
        middle root; plus the per-beta list of middle roots gamma with
        beta.gamma = 1 (the D_beta sum)."""
        def build():
            short = self.root_system.orbits["short"]
            middle = set(self.root_system.orbits["middle"])
            pos = {b: i for i, b in enumerate(short)}
            mid_pairs = []
            for b in short:
                for c in short:
                    d = tuple(x - y for x, y in zip(b, c))
                    if d in middle:
                        mid_pairs.append((pos[b], pos[c], d))
            dsum = {
                b: [a for a in self.root_system.orbits["middle"]
                    if root_dot(a, b) == 1]
                for b in short
            }
            return short, pos, mid_pairs, dsum
        return self._cache("_cache_bc", build)

    def _root_tables(self):
        """For the simply laced pair: ordered pairs for E(alpha) and
        E(2 alpha), and the D_beta adjacency (gamma with beta.gamma = 1)."""
        def build():
            roots = self.root_system.roots
            pos = {b: i for i, b in enumerate(roots)}
            rset = set(roots)
            pairs1 = []
            for b in roots:
                for c in roots:
                    d = tuple(x - y for x, y in zip(b, c))
                    if d in rset:
                        pairs1.append((pos[b], pos[c], d))
            # beta - gamma = 2 alpha forces gamma = -beta, alpha = beta
            pairs2 = [(pos[b], pos[neg(b)], b) for b in roots]
            dsum = {b: [c for c in roots if root_dot(b, c) == 1] for b in roots}
            return roots, pos, pairs1, pairs2, dsum
        return self._cache("_cache_root", build)

    def _sl_realization(self):
        def build():
            return sl_matrix_realization(self.root_system)
        return self._cache("_cache_slreal", build)

    @property
    def structure(self) -> StructureConstants:
        """Structure constants of the spin realization (A series)."""
        if self.kind is not ModelKind.SPIN_SIMPLY_LACED:
            raise ToruslaxError("structure constants live on the spin root model")
        return self._sl_realization()[1]

    # -- serialization -------------------------------------------------
    def to_json_dict(self) -> dict:
        d = {
            "schema": 1,
            "kind": self.kind.value,
            "rank": self.root_system.rank if self.kind in
                    (ModelKind.SIMPLY_LACED_ROOT, ModelKind.SPIN_SIMPLY_LACED)
                    else self.ell,
            "couplings": {k: [v.real, v.imag] for k, v in self.couplings.items()},
        }
        if self.kind is ModelKind.SIMPLY_LACED_ROOT:
            d["family"] = self.root_system.family
        return d

    @classmethod
    def from_json_dict(cls, d: dict) -> "ModelSpec":
        kind = ModelKind(d["kind"])
        cpl = {k: complex(v[0], v[1]) for k, v in d.get("couplings", {}).items()}
        rank = int(d["rank"])
        if kind is ModelKind.A_VECTOR:
            return cls.a_vector(rank, cpl["g"])
        if kind is ModelKind.SIMPLY_LACED_ROOT:
            return cls.simply_laced(d.get("family", "A"), rank, cpl["g"])
        if kind is ModelKind.BC_SHORT:
            return cls.bc_short(rank, cpl["gm"], cpl["gl"], cpl["gs"])
        if kind is ModelKind.TWISTED_BC_SHORT:
            return cls.twisted_bc_short(rank, cpl["gm"], cpl["gl1"], cpl["gl2"],
                                        cpl["gs1"], cpl["gs2"])
        if kind is ModelKind.SPIN_SL:
            return cls.spin_sl(rank)
        return cls.spin_simply_laced(rank)


_SPIN_DIAG_TOL = 1e-6


@dataclass(frozen=True)
class PhaseState:
    """(q, p, optional spin F).  F is ell x ell with zero diagonal (the
    Cartan constraint); construction rejects diagonals above 1e-6 and
    flows preserve them to integrator tolerance (the vector field's
    diagonal is identically zero)."""

    q: tuple
    p: tuple
    F: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "q", tuple(complex(v) for v in self.q))
        object.__setattr__(self, "p", tuple(complex(v) for v in self.p))
        if len(self.q) != len(self.p):
            raise ToruslaxError("q and p must have equal length")
        if self.F is not None:
            f = np.array(self.F, dtype=complex)
            n = len(self.q)
            if f.shape != (n, n):
                raise ToruslaxError(f"F must be {n} x {n}")
            if np.abs(np.diagonal(f)).max(initial=0.0) > _SPIN_DIAG_TOL:
                raise ToruslaxError("spin constraint violated: F diagonal not ~ 0")
            f.flags.writeable = False
            object.__setattr__(self, "F", f)

    @property
    def ell(self) -> int:
        return len(self.q)

    def to_json_dict(self) -> dict:
        return {
            "q": [[v.real, v.imag] for v in self.q],
            "p": [[v.real, v.imag] for v in self.p],
            "F": None if self.F is None else
                 [[[c.real, c.imag] for c in row] for row in self.F],
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "PhaseState":
        q = [complex(a, b) for a, b in d["q"]]
        p = [complex(a, b) for a, b in d["p"]]
        F = d.get("F")
        if F is not None:
            F = np.array([[complex(a, b) for (a, b) in row] for row in F])
        return cls(tuple(q), tuple(p), F)


@dataclass(frozen=True)
class LaxSample:
    """L(z), M(z) with their evaluation point and model dimension."""

    L: np.ndarray
    M: np.ndarray
    z: complex
    tau: complex
    dim: int

    def __post_init__(self):
        if self.L.shape != (self.dim, self.dim) or self.M.shape != (self.dim, self.dim):
            raise ToruslaxError("Lax matrices must match the model dimension")


# ---------------------------------------------------------------------------
# couplings

def renormalize(kind: ModelKind, couplings: dict) -> dict:
    """Effective squared couplings.

    BC_SHORT:           gs_tilde_sq = gs^2 + gs gl / 2
    TWISTED_BC_SHORT:   gl2_tilde_sq = gl2^2 + 2 gl1 gl2
                        gs1_tilde_sq = gs1^2 + 2 gs1 gs2
                                       + (gs1 gl1 + gs1 gl2 + gs2 gl2)/2
                        gs2_tilde_sq = gs2^2 + gs2 gl1 / 2
    Other kinds have no renormalization.
    """
    if kind is ModelKind.BC_SHORT:
        gs, gl = couplings["gs"], couplings["gl"]
        return {"gs_tilde_sq": gs * gs + gs * gl / 2}
    if kind is ModelKind.TWISTED_BC_SHORT:
        gl1, gl2 = couplings["gl1"], couplings["gl2"]
        gs1, gs2 = couplings["gs1"], couplings["gs2"]
        return {
            "gl2_tilde_sq": gl2 * gl2 + 2 * gl1 * gl2,
            "gs1_tilde_sq": gs1 * gs1 + 2 * gs1 * gs2
                            + (gs1 * gl1 + gs1 * gl2 + gs2 * gl2) / 2,
            "gs2_tilde_sq": gs2 * gs2 + gs2 * gl1 / 2,
        }
    return {}


def inozemtsev_map(couplings: dict) -> tuple:
    """(g0^2, g1^2, g2^2, g3^2) of the four one-body potentials sitting at
    the half periods, from the twisted BC couplings."""
    gl1 = couplings["gl1"]
    eff = renormalize(ModelKind.TWISTED_BC_SHORT, couplings)
    tl2, ts1, ts2 = eff["gl2_tilde_sq"], eff["gs1_tilde_sq"], eff["gs2_tilde_sq"]
    g0 = (gl1 * gl1 + tl2) / 8 + 2 * (ts1 + ts2)
    g1 = gl1 * gl1 / 8 + 2 * ts2
    g2 = gl1 * gl1 / 8
    g3 = (gl1 * gl1 + tl2) / 8
    return g0, g1, g2, g3


# ---------------------------------------------------------------------------
# guards

def _guard_values(model: ModelSpec, state: PhaseState):
    """(value, modulus_factor) pairs that must stay off the corresponding
    theta zero lattice for every elliptic evaluation the model makes."""
    k = model.kind
    q = state.q
    out = []
    if k in (ModelKind.A_VECTOR, ModelKind.SPIN_SL, ModelKind.SPIN_SIMPLY_LACED):
        n = len(q)
        for i in range(n):
            for j in range(i + 1, n):
                out.append((q[i] - q[j], 1.0))
        return out
    if k is ModelKind.SIMPLY_LACED_ROOT:
        for a in model.root_system.roots:
            out.append((_dotc(a, q), 1.0))
        return out
    short = model.root_system.orbits["short"]
    middle = model.root_system.orbits["middle"]
    for a in middle:
        out.append((_dotc(a, q), 1.0))
    for b in short:
        u = _dotc(b, q)
        out.append((u, 1.0))
        out.append((2 * u, 1.0))
        if k is ModelKind.TWISTED_BC_SHORT:
            out.append((2 * u, 2.0))   # half-period lattice, via theta at 2 tau
            out.append((u, 0.5))       # doubled-period lattice, via theta at tau/2
    return out


def check_state(model: ModelSpec, state: PhaseState) -> None:
    if len(state.q) != model.coord_dim:
        raise ToruslaxError(
            f"state has {len(state.q)} coordinates, model needs {model.coord_dim}")
    if model.is_spin:
        if state.F is None:
            raise ToruslaxError("spin model needs a spin matrix F")
        if state.F.shape != (model.ell, model.ell):
            raise ToruslaxError("spin matrix dimension mismatch")


def collision_guard(model: ModelSpec, state: PhaseState,
                    ctx: EllipticContext, radius: float | None = None) -> None:
    """Raise CollisionError when any root pairing alpha.q sits within
    `radius` (default: the context pole guard) of a pole lattice."""
    check_state(model, state)
    r = ctx.pole_guard if radius is None else radius
    for val, fac in _guard_values(model, state):
        d, nearest = ctx.lattice_distance(val, fac)
        if d < r:
            raise CollisionError(
                f"collision guard: root pairing {val} within {r} of lattice "
                f"point {nearest} (modulus factor {fac})")


def singular_points(model: ModelSpec, tau: complex) -> tuple:
    """Representatives mod the lattice of the singular set of L(z)."""
    if model.kind in (ModelKind.A_VECTOR, ModelKind.SPIN_SL,
                      ModelKind.SPIN_SIMPLY_LACED):
        return (0j,)
    return tuple(HALF_PERIODS(tau))


def _dotc(alpha, vec) -> complex:
    return sum(float(a) * v for a, v in zip(alpha, vec))


# ---------------------------------------------------------------------------
# Hamiltonians

def hamiltonian(model: ModelSpec, state: PhaseState, tau) -> complex:
    """The model Hamiltonian (renormalized couplings) at modulus tau."""
    ctx = as_context(tau)
    collision_guard(model, state, ctx)
    k = model.kind
    q, p = state.q, state.p
    kin = sum(v * v for v in p) / 2
    c = model.couplings
    if k is ModelKind.A_VECTOR:
        g2 = c["g"] ** 2
        pot = g2 / 2 * sum(wp(ctx, q[i] - q[j])
                           for i in range(model.ell) for j in range(model.ell)
                           if i != j)
        return kin + pot
    if k is ModelKind.SIMPLY_LACED_ROOT:
        g2 = c["g"] ** 2
        return kin + g2 / 2 * sum(wp(ctx, _dotc(a, q))
                                  for a in model.root_system.roots)
    if k is ModelKind.BC_SHORT:
        eff = model.renormalize()
        orb = model.root_system.orbits
        pot = c["gm"] ** 2 / 2 * sum(wp(ctx, _dotc(a, q)) for a in orb["middle"])
        pot += c["gl"] ** 2 / 4 * sum(wp(ctx, _dotc(a, q)) for a in orb["long"])
        pot += eff["gs_tilde_sq"] * sum(wp(ctx, _dotc(a, q)) for a in orb["short"])
        return kin + pot
    if k is ModelKind.TWISTED_BC_SHORT:
        eff = model.renormalize()
        orb = model.root_system.orbits
        pot = c["gm"] ** 2 / 2 * sum(wp(ctx, _dotc(a, q)) for a in orb["middle"])
        pot += c["gl1"] ** 2 / 4 * sum(wp(ctx, _dotc(a, q)) for a in orb["long"])
        pot += eff["gl2_tilde_sq"] / 4 * sum(wp(ctx, _dotc(a, q), _D)
                                             for a in orb["long"])
        pot += eff["gs1_tilde_sq"] * sum(wp(ctx, _dotc(a, q)) for a in orb["short"])
        pot += eff["gs2_tilde_sq"] * sum(wp(ctx, _dotc(a, q), _H)
                                         for a in orb["short"])
        return kin + pot
    # spin kinds share the quadratic spin potential
    F = state.F
    n = model.ell
    pot = 0j
    for j in range(n):
        for m in range(n):
            if j != m:
                pot += wp(ctx, q[j] - q[m]) * F[j, m] * F[m, j]
    return kin - pot / 2


def inozemtsev_hamiltonian(ell: int, gm: complex, g_sq: tuple,
                           state: PhaseState, tau) -> complex:
    """Generalized Hamiltonian with the four one-body potentials wp(q_j + w_a)
    weighted by g_sq = (g0^2, g1^2, g2^2, g3^2); two-body part as in the BC
    middle orbit."""
    ctx = as_context(tau)
    q, p = state.q, state.p
    omegas = HALF_PERIODS(ctx.tau)
    h = sum(v * v for v in p) / 2
    rs = build_root_system("BC", ell) if ell > 1 else None
    if rs is not None:
        h += gm ** 2 / 2 * sum(wp(ctx, _dotc(a, q)) for a in rs.orbits["middle"])
    for j in range(ell):
        for a in range(4):
            h += g_sq[a] * wp(ctx, q[j] + omegas[a])
    return h


# ---------------------------------------------------------------------------
# equations of motion

def _eom_isospectral(model: ModelSpec, state: PhaseState, ctx: EllipticContext):
    k = model.kind
    q, p = state.q, state.p
    c = model.couplings
    n = len(q)
    dq = list(p)
    if k is ModelKind.A_VECTOR:
        g2 = c["g"] ** 2
        dp = [-g2 * sum(wp(ctx, q[j] - q[m], order=1) for m in range(n) if m != j)
              for j in range(n)]
        return dq, dp, None
    if k is ModelKind.SIMPLY_LACED_ROOT:
        g2 = c["g"] ** 2
        dp = [0j] * n
        for a in model.root_system.roots:
            w = wp(ctx, _dotc(a, q), order=1)
            for i in range(n):
                if a[i]:
                    dp[i] -= g2 / 2 * w * float(a[i])
        return dq, dp, None
    if k in (ModelKind.BC_SHORT, ModelKind.TWISTED_BC_SHORT):
        eff = model.renormalize()
        orb = model.root_system.orbits
        if k is ModelKind.BC_SHORT:
            weights = [(orb["middle"], c["gm"] ** 2 / 2, _F),
                       (orb["long"], c["gl"] ** 2 / 4, _F),
                       (orb["short"], eff["gs_tilde_sq"], _F)]
        else:
            weights = [(orb["middle"], c["gm"] ** 2 / 2, _F),
                       (orb["long"], c["gl1"] ** 2 / 4, _F),
                       (orb["long"], eff["gl2_tilde_sq"] / 4, _D),
                       (orb["short"], eff["gs1_tilde_sq"], _F),
                       (orb["short"], eff["gs2_tilde_sq"], _H)]
        dp = [0j] * n
        for roots, coef, scale in weights:
            if coef == 0:
                continue
            for a in roots:
                w = wp(ctx, _dotc(a, q), scale, order=1)
                for i in range(n):
                    if a[i]:
                        dp[i] -= coef * w * float(a[i])
        return dq, dp, None
    if k is ModelKind.SPIN_SL:
        F = state.F
        wmat = np.zeros((n, n), dtype=complex)
        wpmat = np.zeros((n, n), dtype=complex)
        for j in range(n):
            for m in range(n):
                if j != m:
                    wmat[j, m] = wp(ctx, q[j] - q[m])
                    wpmat[j, m] = wp(ctx, q[j] - q[m], order=1)
        dp = [sum(wpmat[j, m] * F[j, m] * F[m, j] for m in range(n) if m != j)
              for j in range(n)]
        dF = np.zeros((n, n), dtype=complex)
        for j in range(n):
            for m in range(n):
                if j != m:
                    dF[j, m] = sum(
                        (wmat[j, a] - wmat[a, m]) * F[j, a] * F[a, m]
                        for a in range(n) if a != j and a != m)
        return dq, dp, dF
    # SPIN_SIMPLY_LACED: flow written through the structure constants
    F = state.F
    rs = model.root_system
    nc = model.structure
    rset = set(rs.roots)
    wcache = {}
    def wval(a, order=0):
        key = (a, order)
        if key not in wcache:
            wcache[key] = wp(ctx, _dotc(a, q), order=order)
        return wcache[key]
    def fget(a):
        i = next(kk for kk, cc in enumerate(a) if cc == 1)
        j = next(kk for kk, cc in enumerate(a) if cc == -1)
        return F[i, j]
    dp = [0j] * n
    for a in rs.roots:
        w1 = wval(a, 1)
        ffa = fget(neg(a)) * fget(a)
        for i in range(n):
            if a[i]:
                dp[i] += 0.5 * float(a[i]) * w1 * ffa
    dF = np.zeros((n, n), dtype=complex)
    for alpha in rs.roots:
        acc = 0j
        for beta in rs.roots:
            d = tuple(x - y for x, y in zip(alpha, beta))
            if d in rset:
                acc -= wval(beta) * nc.n(alpha, neg(beta)) * fget(d) * fget(beta)
        i = next(kk for kk, cc in enumerate(alpha) if cc == 1)
        j = next(kk for kk, cc in enumerate(alpha) if cc == -1)
        dF[i, j] = acc
    return dq, dp, dF


def eom(model: ModelSpec, state: PhaseState, tau, mode: Mode) -> PhaseState:
    """Time derivative of the state: canonical flow for ISOSPECTRAL, the
    same divided by 2 pi i for ISOMONODROMIC (flow in tau)."""
    ctx = as_context(tau)
    collision_guard(model, state, ctx)
    dq, dp, dF = _eom_isospectral(model, state, ctx)
    if mode is Mode.ISOMONODROMIC:
        dq = [v / TWO_PI_I for v in dq]
        dp = [v / TWO_PI_I for v in dp]
        if dF is not None:
            dF = dF / TWO_PI_I
    return PhaseState(tuple(dq), tuple(dp), dF)


# ---------------------------------------------------------------------------
# Lax pairs

def _build_lax_ctx(model: ModelSpec, state: PhaseState, z: complex,
                   ctx: EllipticContext) -> tuple:
    k = model.kind
    q, p = state.q, state.p
    c = model.couplings
    n = model.dim
    L = np.zeros((n, n), dtype=complex)
    M = np.zeros((n, n), dtype=complex)
    if k is ModelKind.A_VECTOR:
        g = c["g"]
        for j in range(n):
            L[j, j] = p[j]
            M[j, j] = 1j * g * sum(wp(ctx, q[j] - q[m]) for m in range(n) if m != j)
            for m in range(n):
                if m != j:
                    xv, yv = xy(ctx, q[j] - q[m], z)
                    L[j, m] = 1j * g * xv
                    M[j, m] = 1j * g * yv
        return L, M
    if k in (ModelKind.SPIN_SL, ModelKind.SPIN_SIMPLY_LACED):
        F = state.F
        for j in range(n):
            L[j, j] = p[j]
            for m in range(n):
                if m != j:
                    xv, yv = xy(ctx, q[j] - q[m], z)
                    # sigma = -x, and -sigma (rho(u) + rho(z-u)) = -y
                    L[j, m] = -xv * F[m, j]
                    M[j, m] = -yv * F[m, j]
        return L, M
    if k is ModelKind.SIMPLY_LACED_ROOT:
        g = c["g"]
        roots, pos, pairs1, pairs2, dsum = model._root_tables()
        for i, b in enumerate(roots):
            L[i, i] = _dotc(b, p)
            M[i, i] = 1j * g * (wp(ctx, _dotc(b, q))
                                + sum(wp(ctx, _dotc(cred, q)) for cred in dsum[b]))
        xcache = {}
        for i, j, a in pairs1:
            if a not in xcache:
                xcache[a] = xy(ctx, _dotc(a, q), z)
            xv, yv = xcache[a]
            L[i, j] += 1j * g * xv
            M[i, j] += 1j * g * yv
        for i, j, a in pairs2:
            xv, yv = xy(ctx, _dotc(a, q), 2 * z)
            L[i, j] += 2j * g * xv
            M[i, j] += 1j * g * yv
        return L, M
    # BC short-root pairs (untwisted and twisted)
    short, pos, mid_pairs, dsum = model._bc_tables()
    twisted = k is ModelKind.TWISTED_BC_SHORT
    gm = c["gm"]
    gl1 = c["gl1"] if twisted else c["gl"]
    gs1 = c["gs1"] if twisted else c["gs"]
    gl2 = c["gl2"] if twisted else 0.0
    gs2 = c["gs2"] if twisted else 0.0
    for i, b in enumerate(short):
        u = _dotc(b, q)
        L[i, i] = _dotc(b, p)
        Db = 1j * gm * sum(wp(ctx, _dotc(a, q)) for a in dsum[b])
        Db += 1j * gl1 * wp(ctx, 2 * u) + 1j * gs1 * wp(ctx, u)
        if twisted:
            Db += 1j * gl2 * wp(ctx, 2 * u, _D) + 1j * gs2 * wp(ctx, u, _H)
        M[i, i] = Db
    xcache = {}
    for i, j, a in mid_pairs:
        if a not in xcache:
            xcache[a] = xy(ctx, _dotc(a, q), z)
        xv, yv = xcache[a]
        L[i, j] += 1j * gm * xv
        M[i, j] += 1j * gm * yv
    for i, b in enumerate(short):
        j = pos[neg(b)]
        u = _dotc(b, q)
        xv, yv = xy(ctx, 2 * u, z)
        L[i, j] += 1j * gl1 * xv
        M[i, j] += 1j * gl1 * yv
        xv, yv = xy(ctx, u, 2 * z)
        L[i, j] += 2j * gs1 * xv
        M[i, j] += 1j * gs1 * yv
        if twisted:
            xv, yv = xy(ctx, 2 * u, z, _D)
            L[i, j] += 1j * gl2 * xv
            M[i, j] += 1j * gl2 * yv
            xv, yv = xy(ctx, u, 2 * z, _H)
            L[i, j] += 2j * gs2 * xv
            M[i, j] += 1j * gs2 * yv
    return L, M


def build_lax(model: ModelSpec, state: PhaseState, z: complex, tau) -> LaxSample:
    """Assemble L(z), M(z).  Fails loudly (PoleGuardError / CollisionError)
    on the singular set of z or a colliding configuration."""
    ctx = as_context(tau)
    collision_guard(model, state, ctx)
    if model.is_spin and state.F is None:
        raise ToruslaxError("spin model needs a spin matrix F")
    L, M = _build_lax_ctx(model, state, complex(z), ctx)
    return LaxSample(L, M, complex(z), ctx.tau, model.dim)


def q_matrix(model: ModelSpec, state: PhaseState) -> np.ndarray:
    """Diagonal twist generator Q (q_j for vector/spin kinds, beta.q for
    root-type kinds)."""
    if model.kind in (ModelKind.A_VECTOR, ModelKind.SPIN_SL,
                      ModelKind.SPIN_SIMPLY_LACED):
        return np.diag(np.array(state.q, dtype=complex))
    return np.diag(np.array([_dotc(b, state.q) for b in model.lax_index()],
                            dtype=complex))


def p_matrix(model: ModelSpec, state: PhaseState) -> np.ndarray:
    if model.kind in (ModelKind.A_VECTOR, ModelKind.SPIN_SL,
                      ModelKind.SPIN_SIMPLY_LACED):
        return np.diag(np.array(state.p, dtype=complex))
    return np.diag(np.array([_dotc(b, state.p) for b in model.lax_index()],
                            dtype=complex))


# ---------------------------------------------------------------------------
# residuals

def _max_norm(m: np.ndarray) -> float:
    return float(np.abs(m).max(initial=0.0))


def _shift_state(state: PhaseState, d: PhaseState, h: float) -> PhaseState:
    q = tuple(state.q[i] + h * d.q[i] for i in range(len(state.q)))
    p = tuple(state.p[i] + h * d.p[i] for i in range(len(state.p)))
    F = None
    if state.F is not None:
        F = state.F + (h * d.F if d.F is not None else 0.0)
    return PhaseState(q, p, F)


def _state_inf_norm(d: PhaseState) -> float:
    m = max((abs(v) for v in d.q), default=0.0)
    m = max(m, max((abs(v) for v in d.p), default=0.0))
    if d.F is not None and d.F.size:
        m = max(m, float(np.abs(d.F).max()))
    return m


def lax_residual(model: ModelSpec, state: PhaseState, z: complex, tau,
                 mode: Mode, fd_step: float = 1e-6) -> float:
    """Max-norm residual of the Lax equation.

    ISOSPECTRAL:   || D_v L - [L, M] ||, with D_v L the central-difference
    directional derivative of L along the canonical flow (step fd_step,
    scaled by the flow magnitude).
    ISOMONODROMIC: || 2 pi i dL/dtau|_explicit + D_v L + dM/dz - [L, M] ||,
    where D_v L transports along the canonical flow (2 pi i times the tau
    flow) and the z- and tau-derivatives are central stencils of size
    fd_step.
    """
    ctx = as_context(tau)
    z = complex(z)
    sample = build_lax(model, state, z, ctx)
    L, M = sample.L, sample.M
    comm = L @ M - M @ L
    v = eom(model, state, ctx, Mode.ISOSPECTRAL)
    scale = max(1.0, _state_inf_norm(v))
    h = fd_step
    vhat = PhaseState(tuple(c / scale for c in v.q), tuple(c / scale for c in v.p),
                      None if v.F is None else v.F / scale)
    Lp = _build_lax_ctx(model, _shift_state(state, vhat, h), z, ctx)[0]
    Lm = _build_lax_ctx(model, _shift_state(state, vhat, -h), z, ctx)[0]
    DvL = scale * (Lp - Lm) / (2 * h)
    if mode is Mode.ISOSPECTRAL:
        return _max_norm(DvL - comm)
    ctx_p = EllipticContext(ctx.tau + h, ctx.trunc, ctx.pole_guard)
    ctx_m = EllipticContext(ctx.tau - h, ctx.trunc, ctx.pole_guard)
    dL_tau = (_build_lax_ctx(model, state, z, ctx_p)[0]
              - _build_lax_ctx(model, state, z, ctx_m)[0]) / (2 * h)
    dM_dz = (_build_lax_ctx(model, state, z + h, ctx)[1]
             - _build_lax_ctx(model, state, z - h, ctx)[1]) / (2 * h)
    return _max_norm(TWO_PI_I * dL_tau + DvL + dM_dz - comm)


def lax_translation_residual(model: ModelSpec, state: PhaseState, z: complex,
                             tau) -> tuple:
    """(r_alpha, r_beta_L, r_beta_M): norms of L(z+1) - L(z), the twisted
    beta-cycle relation for L, and the affine beta-cycle relation for M."""
    ctx = as_context(tau)
    z = complex(z)
    s0 = build_lax(model, state, z, ctx)
    s1 = build_lax(model, state, z + 1, ctx)
    st = build_lax(model, state, z + ctx.tau, ctx)
    Q = q_matrix(model, state)
    P = p_matrix(model, state)
    e_plus = np.diag(np.exp(TWO_PI_I * np.diagonal(Q)))
    e_minus = np.diag(np.exp(-TWO_PI_I * np.diagonal(Q)))
    r_alpha = _max_norm(s1.L - s0.L)
    r_beta_l = _max_norm(st.L - e_plus @ s0.L @ e_minus)
    r_beta_m = _max_norm(
        st.M - (e_plus @ (s0.M + TWO_PI_I * s0.L) @ e_minus - TWO_PI_I * P))
    return r_alpha, r_beta_l, r_beta_m


def spin_minimal_orbit(a, b, g: complex) -> np.ndarray:
    """Rank-one spin matrix F_jk = i g b_j a_k off the diagonal, zero on it."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    F = 1j * g * np.outer(b, a)
    np.fill_diagonal(F, 0.0)
    return F


# ---------------------------------------------------------------------------
# quadratic trace vs Hamiltonian

def quadratic_trace_shift(model: ModelSpec, state: PhaseState, z: complex,
                          tau) -> complex:
    """Tr L(z)^2 / 2 minus the state-dependent content it reproduces.

    The exact relations are family dependent: Tr L^2/2 equals H for the
    vector pair, 2 H for the BC short-root pairs, (2 |Delta| / rank) H for
    the simply laced root pair (momentum inside the root span), and
    H + wp(z)/2 * sum_{j != k} F_jk F_kj for the spin kinds.  The returned
    shift depends on (z, tau) only.
    """
    ctx = as_context(tau)
    sample = build_lax(model, state, complex(z), ctx)
    tr = np.trace(sample.L @ sample.L) / 2
    h = hamiltonian(model, state, ctx)
    k = model.kind
    if k is ModelKind.A_VECTOR:
        return tr - h
    if k in (ModelKind.BC_SHORT, ModelKind.TWISTED_BC_SHORT):
        return tr - 2 * h
    if k is ModelKind.SIMPLY_LACED_ROOT:
        kappa = 2 * len(model.root_system.roots) / model.root_system.rank
        return tr - kappa * h
    F = state.F
    casimir = sum(F[i, j] * F[j, i] for i in range(model.ell)
                  for j in range(model.ell) if i != j)
    return tr - h - wp(ctx, complex(z)) / 2 * casimir
