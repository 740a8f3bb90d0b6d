"""Seeded rejection samplers for states, spectral points, and identity
arguments.  Shared by the CLI sweeps and the test suite so that sweeps are
reproducible from (seed, config) alone.

Sampling keeps evaluation points well away from the pole lattices: the
residual bounds in the acceptance suite presume generic points, and
finite-difference stencils lose accuracy as third derivatives blow up near
poles.
"""

from __future__ import annotations

import numpy as np

from .elliptic import EllipticContext
from .errors import ToruslaxError
from .models import ModelKind, ModelSpec, PhaseState, _guard_values, check_state

__all__ = [
    "sample_state",
    "sample_z",
    "sample_tau",
    "sample_identity_args",
]

_MAX_TRIES = 5000


def _rc(rng, re_scale, im_scale) -> complex:
    return complex(rng.uniform(-re_scale, re_scale), rng.uniform(-im_scale, im_scale))


def _clear(ctx: EllipticContext, value: complex, factor: float, clearance: float) -> bool:
    return ctx.lattice_distance(value, factor)[0] >= clearance


def sample_tau(rng, re_range=(-0.25, 0.25), im_range=(0.85, 1.35)) -> complex:
    return complex(rng.uniform(*re_range), rng.uniform(*im_range))


def sample_state(
    model: ModelSpec,
    ctx: EllipticContext,
    rng,
    clearance: float = 0.12,
    traceless: bool = False,
    spin_scale: float = 0.5,
) -> PhaseState:
    """Random complex state whose root pairings all clear the pole
    lattices by `clearance`.  `traceless` projects q and p onto the
    zero-sum hyperplane (useful for the A-series root pair trace tests).
    """
    dim = model.coord_dim
    im = 0.3 * ctx.tau.imag
    for _ in range(_MAX_TRIES):
        q = tuple(_rc(rng, 0.3, im) for _ in range(dim))
        p = tuple(_rc(rng, 0.5, 0.5) for _ in range(dim))
        if traceless:
            qm = sum(q) / dim
            pm = sum(p) / dim
            q = tuple(v - qm for v in q)
            p = tuple(v - pm for v in p)
        F = None
        if model.is_spin:
            n = model.ell
            F = np.array(
                [[_rc(rng, spin_scale, spin_scale) if i != j else 0.0
                  for j in range(n)] for i in range(n)])
        state = PhaseState(q, p, F)
        check_state(model, state)
        if all(_clear(ctx, val, fac, clearance)
               for val, fac in _guard_values(model, state)):
            return state
    raise ToruslaxError("could not sample a state clearing the collision guard")


def sample_z(
    model: ModelSpec,
    ctx: EllipticContext,
    rng,
    clearance: float = 0.12,
) -> complex:
    """Random spectral point off the model's singular set by `clearance`
    (checked on both z and 2z against every lattice the model touches)."""
    root_type = model.kind in (ModelKind.SIMPLY_LACED_ROOT, ModelKind.BC_SHORT,
                               ModelKind.TWISTED_BC_SHORT)
    for _ in range(_MAX_TRIES):
        z = _rc(rng, 0.45, 0.45 * ctx.tau.imag)
        checks = [(z, 1.0)]
        if root_type:
            checks += [(2 * z, 1.0), (z, 0.5), (2 * z, 2.0)]
        if all(_clear(ctx, v, f, clearance) for v, f in checks):
            return z
    raise ToruslaxError("could not sample a regular spectral point")


def sample_identity_args(
    ctx: EllipticContext,
    rng,
    clearance: float = 0.05,
) -> tuple:
    """(u, v, z) for identity sweeps: every derived combination the
    registry evaluates stays `clearance` away from all three lattices."""
    im = ctx.tau.imag
    for _ in range(_MAX_TRIES):
        u = _rc(rng, 0.4, 0.4 * im)
        v = _rc(rng, 0.4, 0.4 * im)
        z = complex(rng.uniform(0.03, 0.45), rng.uniform(0.03, 0.45) * im)
        combos = (u, v, z, u + v, u - v, 2 * u, 2 * v, -u - v,
                  2 * z, z / 2, z - u, 4 * z)
        ok = True
        for w in combos:
            for fac in (1.0, 2.0, 0.5):
                if not _clear(ctx, w, fac, clearance):
                    ok = False
                    break
            if not ok:
                break
        if ok:
            return u, v, z
    raise ToruslaxError("could not sample identity arguments")
