"""Root systems with exact rational coordinates, root-indexed matrices,
and structure constants for the simply laced series.

Roots are tuples of `fractions.Fraction` so that Kronecker-delta matching
(beta - gamma == k * alpha) is exact; conversion to floats happens only at
Lax-assembly time.  The root index ordering is lexicographic on the
coordinates, fixed so matrices are reproducible across runs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .errors import ToruslaxError

__all__ = [
    "Root",
    "RootSystem",
    "RootIndexedMatrix",
    "StructureConstants",
    "build_root_system",
    "e_matrix",
    "structure_constants",
    "sl_matrix_realization",
]

Root = tuple  # tuple[Fraction, ...]


def _fr(vals) -> Root:
    return tuple(Fraction(v) for v in vals)


def root_dot(a: Root, b: Root) -> Fraction:
    return sum((x * y for x, y in zip(a, b)), Fraction(0))


def reflect(alpha: Root, beta: Root) -> Root:
    """Weyl reflection s_alpha(beta) = beta - 2 (alpha.beta / alpha.alpha) alpha."""
    c = 2 * root_dot(alpha, beta) / root_dot(alpha, alpha)
    return tuple(b - c * a for a, b in zip(alpha, beta))


def neg(alpha: Root) -> Root:
    return tuple(-a for a in alpha)


def scale_root(alpha: Root, k: int) -> Root:
    return tuple(k * a for a in alpha)


@dataclass(frozen=True)
class RootSystem:
    """family in {A, D, E6, E7, E8, BC}; roots sorted lexicographically.

    orbits maps "long" / "middle" / "short" to root tuples for BC; simply
    laced systems carry the single orbit under "all".
    """

    family: str
    rank: int
    roots: tuple
    simple_roots: tuple
    orbits: dict

    @property
    def dim(self) -> int:
        return len(self.roots[0])

    @property
    def simply_laced(self) -> bool:
        return self.family in ("A", "D", "E6", "E7", "E8")

    def index(self) -> tuple:
        return self.roots

    def contains(self, v: Root) -> bool:
        return v in self._root_set()

    def _root_set(self):
        # frozen dataclass: cache on type's dict via object.__setattr__
        cached = self.__dict__.get("_cache_set")
        if cached is None:
            cached = frozenset(self.roots)
            object.__setattr__(self, "_cache_set", cached)
        return cached

    def to_json_dict(self) -> dict:
        return {
            "schema": 1,
            "family": self.family,
            "rank": self.rank,
            "roots": [[str(c) for c in r] for r in self.roots],
            "orbits": {
                name: [[str(c) for c in r] for r in orb]
                for name, orb in self.orbits.items()
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)


def _close_under_reflections(simple: Sequence[Root]) -> tuple:
    roots = set(simple) | {neg(a) for a in simple}
    frontier = set(roots)
    while frontier:
        new = set()
        for beta in frontier:
            for alpha in simple:
                r = reflect(alpha, beta)
                if r not in roots:
                    new.add(r)
        roots |= new
        frontier = new
    return tuple(sorted(roots))


_E8_SIMPLE = [
    # Bourbaki-style realization; spinor root has half-integer coordinates
    [Fraction(1, 2), -Fraction(1, 2), -Fraction(1, 2), -Fraction(1, 2),
     -Fraction(1, 2), -Fraction(1, 2), -Fraction(1, 2), Fraction(1, 2)],
    [1, 1, 0, 0, 0, 0, 0, 0],
    [-1, 1, 0, 0, 0, 0, 0, 0],
    [0, -1, 1, 0, 0, 0, 0, 0],
    [0, 0, -1, 1, 0, 0, 0, 0],
    [0, 0, 0, -1, 1, 0, 0, 0],
    [0, 0, 0, 0, -1, 1, 0, 0],
    [0, 0, 0, 0, 0, -1, 1, 0],
]


def build_root_system(family: str, rank: int) -> RootSystem:
    """A and BC by explicit vector lists; D and E by reflection closure of
    the simple roots.  A_{rank} is realized in R^{rank+1} as e_i - e_j.
    """
    family = family.upper()
    if family == "A":
        if rank < 1:
            raise ToruslaxError("A family needs rank >= 1")
        n = rank + 1
        simple = []
        for i in range(rank):
            v = [0] * n
            v[i], v[i + 1] = 1, -1
            simple.append(_fr(v))
        roots = []
        for i in range(n):
            for j in range(n):
                if i != j:
                    v = [0] * n
                    v[i], v[j] = 1, -1
                    roots.append(_fr(v))
        roots = tuple(sorted(roots))
        return RootSystem("A", rank, roots, tuple(simple), {"all": roots})
    if family == "D":
        if rank < 3:
            raise ToruslaxError("D family needs rank >= 3")
        simple = []
        for i in range(rank - 1):
            v = [0] * rank
            v[i], v[i + 1] = 1, -1
            simple.append(_fr(v))
        v = [0] * rank
        v[rank - 2], v[rank - 1] = 1, 1
        simple.append(_fr(v))
        roots = _close_under_reflections(simple)
        return RootSystem("D", rank, roots, tuple(simple), {"all": roots})
    if family in ("E6", "E7", "E8") or (family == "E" and rank in (6, 7, 8)):
        if family == "E":
            family = f"E{rank}"
        rank = int(family[1])
        # last `rank` simple roots of the E8 chain, then closure inside R^8
        simple = [_fr(v) for v in _E8_SIMPLE[: rank]]
        roots = _close_under_reflections(simple)
        return RootSystem(family, rank, roots, tuple(simple), {"all": roots})
    if family == "BC":
        if rank < 1:
            raise ToruslaxError("BC family needs rank >= 1")
        short, middle, long_ = [], [], []
        for j in range(rank):
            v = [0] * rank
            v[j] = 1
            short += [_fr(v), neg(_fr(v))]
            v2 = [0] * rank
            v2[j] = 2
            long_ += [_fr(v2), neg(_fr(v2))]
        for j in range(rank):
            for k in range(j + 1, rank):
                for s1 in (1, -1):
                    for s2 in (1, -1):
                        v = [0] * rank
                        v[j], v[k] = s1, s2
                        middle.append(_fr(v))
        simple = []
        for i in range(rank - 1):
            v = [0] * rank
            v[i], v[i + 1] = 1, -1
            simple.append(_fr(v))
        v = [0] * rank
        v[rank - 1] = 1
        simple.append(_fr(v))
        roots = tuple(sorted(short + middle + long_))
        return RootSystem(
            "BC", rank, roots, tuple(simple),
            {
                "short": tuple(sorted(short)),
                "middle": tuple(sorted(middle)),
                "long": tuple(sorted(long_)),
            },
        )
    raise ToruslaxError(f"unsupported family/rank: {family}/{rank}")


@dataclass(frozen=True)
class RootIndexedMatrix:
    """Dense complex matrix whose rows/columns are indexed by a root list."""

    index: tuple
    entries: np.ndarray

    def __post_init__(self):
        n = len(self.index)
        if self.entries.shape != (n, n):
            raise ToruslaxError("matrix dimension must match the root index")


def e_matrix(index: Sequence[Root], alpha: Root, k: int = 1) -> RootIndexedMatrix:
    """E(k alpha)_{beta gamma} = 1 iff beta - gamma = k alpha, else 0."""
    if k not in (1, 2):
        raise ToruslaxError("k must be 1 or 2")
    target = scale_root(alpha, k)
    n = len(index)
    m = np.zeros((n, n), dtype=complex)
    for i, b in enumerate(index):
        for j, c in enumerate(index):
            if tuple(x - y for x, y in zip(b, c)) == target:
                m[i, j] = 1.0
    return RootIndexedMatrix(tuple(index), m)


@dataclass(frozen=True)
class StructureConstants:
    """Table (alpha, beta) -> N_{alpha,beta} in {-1, 0, +1}, zero exactly
    when alpha + beta is not a root (and for alpha + beta = 0)."""

    roots: tuple
    table: dict

    def n(self, alpha: Root, beta: Root) -> int:
        return self.table.get((alpha, beta), 0)


def _verify_structure_constants(rs: RootSystem, table: dict) -> None:
    rset = rs._root_set()
    for a in rs.roots:
        for b in rs.roots:
            n_ab = table.get((a, b), 0)
            s = tuple(x + y for x, y in zip(a, b))
            if s not in rset or all(c == 0 for c in s):
                if n_ab != 0:
                    raise AssertionError("nonzero N off the root support")
                continue
            if n_ab == 0 or table.get((b, a), 0) != -n_ab:
                raise AssertionError("antisymmetry violated")
            lhs = table.get((neg(b), s), 0)
            mid = table.get((neg(a), neg(b)), 0)
            rhs = table.get((s, neg(a)), 0)
            if not (lhs == mid == rhs):
                raise AssertionError("triple equality violated")


def structure_constants(rs: RootSystem) -> StructureConstants:
    """N from a bilinear asymmetry cocycle eps on the root lattice.

    On the ordered simple-root basis a_1..a_l: eps(a_i, a_i) = -1 (norm 2),
    eps(a_i, a_j) = (-1)^(a_i.a_j) for i > j and +1 for i < j, extended
    bilinearly; N_{alpha,beta} = eps(alpha, beta) when alpha + beta is a
    root.  Antisymmetry, the support rule, and the triple equality
    N_{-b,a+b} = N_{-a,-b} = N_{a+b,-a} are all verified at construction.
    """
    if not rs.simply_laced:
        raise ToruslaxError("structure constants only for simply laced systems")
    simple = rs.simple_roots
    ell = len(simple)
    # integer coordinates of every root in the simple basis (exact solve)
    basis = np.array([[float(c) for c in a] for a in simple]).T
    gram = basis.T @ basis
    coords = {}
    for r in rs.roots:
        rhs = basis.T @ np.array([float(c) for c in r])
        sol = np.linalg.solve(gram, rhs)
        ints = [round(v) for v in sol]
        if any(abs(sol[i] - ints[i]) > 1e-9 for i in range(ell)):
            raise AssertionError("root not integral in the simple basis")
        coords[r] = ints
    # parity matrix P[i][j] for eps(a_i, a_j) = (-1)^P
    par = [[0] * ell for _ in range(ell)]
    for i in range(ell):
        for j in range(ell):
            if i == j:
                par[i][j] = 1
            elif i > j:
                par[i][j] = int(root_dot(simple[i], simple[j])) % 2
    rset = rs._root_set()
    table = {}
    for a in rs.roots:
        ca = coords[a]
        for b in rs.roots:
            s = tuple(x + y for x, y in zip(a, b))
            if s not in rset:
                continue
            cb = coords[b]
            p = 0
            for i in range(ell):
                if ca[i]:
                    for j in range(ell):
                        if cb[j] and par[i][j]:
                            p += ca[i] * cb[j]
            table[(a, b)] = -1 if p % 2 else 1
    _verify_structure_constants(rs, table)
    return StructureConstants(rs.roots, table)


def sl_matrix_realization(rs: RootSystem):
    """Matrix-unit realization of the A-series root system in the vector
    representation: alpha = e_i - e_j maps to the matrix unit E_ij, with
    [E_alpha, E_-alpha] = H_alpha and structure constants read off the
    commutators (so N_{-a,-b} = -N_{a,b}, the normalization the spin Lax
    pair needs).

    Returns (e_mats, constants) where e_mats maps each root to its n x n
    matrix.
    """
    if rs.family != "A":
        raise ToruslaxError("matrix-unit realization implemented for the A family")
    n = rs.rank + 1
    e_mats = {}
    pos = {}
    for r in rs.roots:
        i = next(k for k, c in enumerate(r) if c == 1)
        j = next(k for k, c in enumerate(r) if c == -1)
        m = np.zeros((n, n), dtype=complex)
        m[i, j] = 1.0
        e_mats[r] = m
        pos[r] = (i, j)
    rset = rs._root_set()
    table = {}
    for a in rs.roots:
        ia, ja = pos[a]
        for b in rs.roots:
            s = tuple(x + y for x, y in zip(a, b))
            if s not in rset:
                continue
            ib, jb = pos[b]
            # [E_ia ja, E_ib jb] = d(ja,ib) E_ia jb - d(jb,ia) E_ib ja
            val = (1 if ja == ib else 0) - (1 if jb == ia else 0)
            if val == 0:
                raise AssertionError("unexpected vanishing commutator")
            table[(a, b)] = val
    _verify_structure_constants(rs, table)
    return e_mats, StructureConstants(rs.roots, table)


def weyl_orbit_check(rs: RootSystem, sample: Iterable[Root] | None = None) -> bool:
    """Exact closure under every reflection s_alpha (alpha from `sample`
    or the whole system)."""
    alphas = tuple(sample) if sample is not None else rs.roots
    rset = rs._root_set()
    for a in alphas:
        for b in rs.roots:
            if reflect(a, b) not in rset:
                return False
    return True
