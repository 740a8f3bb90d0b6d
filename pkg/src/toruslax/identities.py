"""Registry of the functional identities satisfied by the elliptic kernels.

Every identity is stored as a list of signed terms whose sum vanishes
(right-hand side folded in with negated sign), so a residual is just the
term sum and a natural relative scale is the sum of term magnitudes.

The inventory:

* three untwisted kernel equations (sum rule, zero-sum rule, factor rule);
* the same trio in sigma/rho form.  The zero-sum rule only closes after
  symmetrising u -> -u (the v -> -u limit of the sum rule), which is also
  the combination the spin Lax computation consumes; the naive unsymmetrised
  form is not an identity;
* eight factor-type equations tying the plain/half/double kernels to wp at
  the three period scalings, six of which carry a u-independent const(z)
  term fixed by `const_term`;
* four sum-rule-type equations with doubled arguments;
* three wp rescaling identities (duplication and the two Landen-type
  period splits).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable

from .elliptic import (
    EllipticContext,
    PeriodScale,
    wp,
    xy,
    rho,
    sigma,
    HALF_PERIODS,
)
from .errors import ToruslaxError

__all__ = [
    "IdentityId",
    "IdentitySpec",
    "REGISTRY",
    "identity_terms",
    "identity_residual",
    "const_term",
]

_F = PeriodScale.FULL
_H = PeriodScale.HALF
_D = PeriodScale.DOUBLE


class IdentityId(Enum):
    # untwisted kernel equations
    SUM_RULE = "sum_rule"
    ZERO_SUM_RULE = "zero_sum_rule"
    FACTOR_RULE = "factor_rule"
    # sigma/rho form of the same trio
    SIGMA_SUM_RULE = "sigma_sum_rule"
    SIGMA_ZERO_SUM_RULE = "sigma_zero_sum_rule"
    SIGMA_FACTOR_RULE = "sigma_factor_rule"
    # factor-type equations for the rescaled kernels
    FACTOR_HALF = "factor_half"
    FACTOR_DOUBLE = "factor_double"
    FACTOR_PLAIN_HALF = "factor_plain_half"
    FACTOR_PLAIN_MIXED = "factor_plain_mixed"
    FACTOR_PLAIN_DOUBLE_MIXED = "factor_plain_double_mixed"
    FACTOR_HALF_PLAIN_MIXED = "factor_half_plain_mixed"
    FACTOR_HALF_DOUBLE_MIXED = "factor_half_double_mixed"
    FACTOR_PLAIN_DOUBLE = "factor_plain_double"
    # sum-rule-type equations with doubled arguments
    SUM_RULE_DOUBLED_ARG = "sum_rule_doubled_arg"
    SUM_RULE_DOUBLED_ARG_DOUBLE = "sum_rule_doubled_arg_double"
    SUM_RULE_DOUBLED_SPECTRAL = "sum_rule_doubled_spectral"
    SUM_RULE_DOUBLED_SPECTRAL_HALF = "sum_rule_doubled_spectral_half"
    # wp rescaling identities
    WP_DUPLICATION = "wp_duplication"
    WP_HALF_SPLIT = "wp_half_split"
    WP_DOUBLE_SPLIT = "wp_double_split"


# ---------------------------------------------------------------------------
# term builders; each returns the signed terms of (lhs - rhs)

def _t_sum_rule(ctx, u, v, z):
    x_u, y_u = xy(ctx, u, z)
    x_v, y_v = xy(ctx, v, z)
    x_uv = xy(ctx, u + v, z)[0]
    return [x_u * y_v, -y_u * x_v, -x_uv * (wp(ctx, u) - wp(ctx, v))]


def _t_zero_sum_rule(ctx, u, v, z):
    x_u, y_u = xy(ctx, u, z)
    x_m, y_m = xy(ctx, -u, z)
    return [x_u * y_m, -y_u * x_m, -wp(ctx, u, order=1)]


def _t_factor_rule(ctx, u, v, z):
    return [
        xy(ctx, u, z)[0] * xy(ctx, -u, z)[0],
        -(wp(ctx, z) - wp(ctx, u)),
    ]


def _t_sigma_sum_rule(ctx, u, v, z):
    su, sv = sigma(ctx, u, z), sigma(ctx, v, z)
    bracket = rho(ctx, v) + rho(ctx, z - v) - rho(ctx, u) - rho(ctx, z - u)
    return [
        su * sv * bracket,
        -sigma(ctx, u + v, z) * (wp(ctx, u) - wp(ctx, v)),
    ]


def _t_sigma_zero_sum_rule(ctx, u, v, z):
    # the v -> -u limit of the sigma sum rule: only the u-odd part of
    # rho(u) + rho(z-u) survives the pairing, and the residual closes on wp'
    su, sm = sigma(ctx, u, z), sigma(ctx, -u, z)
    bracket = rho(ctx, u) + rho(ctx, z - u) - rho(ctx, -u) - rho(ctx, z + u)
    return [su * sm * bracket, -wp(ctx, u, order=1)]


def _t_sigma_factor_rule(ctx, u, v, z):
    return [
        sigma(ctx, u, z) * sigma(ctx, -u, z),
        -(wp(ctx, z) - wp(ctx, u)),
    ]


def _t_factor_half(ctx, u, v, z):
    return [
        xy(ctx, u, z, _H)[0] * xy(ctx, -u, z, _H)[0],
        wp(ctx, u, _H),
        -wp(ctx, z / 2, _H),
    ]


def _t_factor_double(ctx, u, v, z):
    return [
        xy(ctx, u, z, _D)[0] * xy(ctx, -u, z, _D)[0],
        wp(ctx, u, _D),
        -wp(ctx, 2 * z, _D),
    ]


# factor-type identities with a const(z) term: described by the two products
# on the left and the wp combination added to them; the residual subtracts
# const_term.  special_u gives the point where one product vanishes.

def _p_plain_half(ctx, u, z):
    return [
        xy(ctx, u, 2 * z, _F)[0] * xy(ctx, -u, 2 * z, _H)[0],
        xy(ctx, u, 2 * z, _H)[0] * xy(ctx, -u, 2 * z, _F)[0],
    ]


def _p_plain_mixed(ctx, u, z):
    return [
        xy(ctx, u, 2 * z, _F)[0] * xy(ctx, -2 * u, z, _F)[0],
        xy(ctx, 2 * u, z, _F)[0] * xy(ctx, -u, 2 * z, _F)[0],
    ]


def _p_plain_double_mixed(ctx, u, z):
    return [
        xy(ctx, u, 2 * z, _F)[0] * xy(ctx, -2 * u, z, _D)[0],
        xy(ctx, 2 * u, z, _D)[0] * xy(ctx, -u, 2 * z, _F)[0],
    ]


def _p_half_plain_mixed(ctx, u, z):
    return [
        xy(ctx, u, 2 * z, _H)[0] * xy(ctx, -2 * u, z, _F)[0],
        xy(ctx, 2 * u, z, _F)[0] * xy(ctx, -u, 2 * z, _H)[0],
    ]


def _p_half_double_mixed(ctx, u, z):
    return [
        xy(ctx, u, 2 * z, _H)[0] * xy(ctx, -2 * u, z, _D)[0],
        xy(ctx, 2 * u, z, _D)[0] * xy(ctx, -u, 2 * z, _H)[0],
    ]


def _p_plain_double(ctx, u, z):
    return [
        xy(ctx, u, z, _F)[0] * xy(ctx, -u, z, _D)[0],
        xy(ctx, u, z, _D)[0] * xy(ctx, -u, z, _F)[0],
    ]


@dataclass(frozen=True)
class _ConstForm:
    products: Callable
    wp_part: Callable            # added to the products; const = products + wp_part
    special_u: Callable          # u(z) at which one product vanishes


_CONST_FORMS = {
    IdentityId.FACTOR_PLAIN_HALF: _ConstForm(
        _p_plain_half, lambda ctx, u: 2 * wp(ctx, u), lambda z: z
    ),
    IdentityId.FACTOR_PLAIN_MIXED: _ConstForm(
        _p_plain_mixed, lambda ctx, u: wp(ctx, u), lambda z: 2 * z
    ),
    IdentityId.FACTOR_PLAIN_DOUBLE_MIXED: _ConstForm(
        _p_plain_double_mixed, lambda ctx, u: wp(ctx, u), lambda z: z
    ),
    IdentityId.FACTOR_HALF_PLAIN_MIXED: _ConstForm(
        _p_half_plain_mixed, lambda ctx, u: wp(ctx, u, _H), lambda z: z
    ),
    IdentityId.FACTOR_HALF_DOUBLE_MIXED: _ConstForm(
        _p_half_double_mixed, lambda ctx, u: wp(ctx, u), lambda z: z
    ),
    IdentityId.FACTOR_PLAIN_DOUBLE: _ConstForm(
        _p_plain_double, lambda ctx, u: 2 * wp(ctx, u, _D), lambda z: z
    ),
}


def const_term(ctx: EllipticContext, ident: IdentityId, z: complex) -> complex:
    """The u-independent const(z) of a factor-type identity.

    Evaluated at the special point u*(z) where one of the two products has
    a zero factor, and cross-checked at the mirror point -u* (the left side
    is even in u, so both must agree).
    """
    form = _CONST_FORMS.get(ident)
    if form is None:
        raise ToruslaxError(f"identity {ident.value} carries no const term")
    z = complex(z)
    us = form.special_u(z)
    c_plus = sum(form.products(ctx, us, z)) + form.wp_part(ctx, us)
    c_minus = sum(form.products(ctx, -us, z)) + form.wp_part(ctx, -us)
    scale = max(1.0, abs(c_plus))
    if abs(c_plus - c_minus) > 1e-9 * scale:
        raise ToruslaxError(
            f"const term cross-check failed for {ident.value} at z={z}: "
            f"{c_plus} vs {c_minus}"
        )
    return c_plus


def _make_const_terms(ident):
    form = _CONST_FORMS[ident]

    def terms(ctx, u, v, z):
        out = form.products(ctx, u, z)
        out.append(form.wp_part(ctx, u))
        out.append(-const_term(ctx, ident, z))
        return out

    return terms


def _t_sum_doubled_arg(ctx, u, v, z):
    x2u, y2u = xy(ctx, 2 * u, z)
    x2v, y2v = xy(ctx, -2 * v, z)
    xm, ym = xy(ctx, -u - v, z)
    xp, yp = xy(ctx, u + v, z)
    return [
        x2u * ym,
        -y2u * xm,
        xp * y2v,
        -yp * x2v,
        -xy(ctx, u - v, z)[0] * (wp(ctx, 2 * u) - wp(ctx, 2 * v)),
    ]


def _t_sum_doubled_arg_double(ctx, u, v, z):
    x2u, y2u = xy(ctx, 2 * u, z, _D)
    x2v, y2v = xy(ctx, -2 * v, z, _D)
    xm, ym = xy(ctx, -u - v, z)
    xp, yp = xy(ctx, u + v, z)
    return [
        x2u * ym,
        -y2u * xm,
        xp * y2v,
        -yp * x2v,
        -xy(ctx, u - v, z)[0] * (wp(ctx, 2 * u, _D) - wp(ctx, 2 * v, _D)),
    ]


def _t_sum_doubled_spectral(ctx, u, v, z):
    xu, yu = xy(ctx, u, 2 * z)
    xv, yv = xy(ctx, -v, 2 * z)
    xm, ym = xy(ctx, -u - v, z)
    xp, yp = xy(ctx, u + v, z)
    return [
        2 * xu * ym,
        -yu * xm,
        xp * yv,
        -2 * yp * xv,
        -xy(ctx, u - v, z)[0] * (wp(ctx, u) - wp(ctx, v)),
    ]


def _t_sum_doubled_spectral_half(ctx, u, v, z):
    xu, yu = xy(ctx, u, 2 * z, _H)
    xv, yv = xy(ctx, -v, 2 * z, _H)
    xm, ym = xy(ctx, -u - v, z)
    xp, yp = xy(ctx, u + v, z)
    return [
        2 * xu * ym,
        -yu * xm,
        xp * yv,
        -2 * yp * xv,
        -xy(ctx, u - v, z)[0] * (wp(ctx, u, _H) - wp(ctx, v, _H)),
    ]


def _t_wp_duplication(ctx, u, v, z):
    omegas = HALF_PERIODS(ctx.tau)
    return [wp(ctx, 2 * u)] + [-0.25 * wp(ctx, u + w) for w in omegas]


def _t_wp_half_split(ctx, u, v, z):
    w1 = HALF_PERIODS(ctx.tau)[1]
    return [wp(ctx, u, _H), -wp(ctx, u), -wp(ctx, u + w1), wp(ctx, w1)]


def _t_wp_double_split(ctx, u, v, z):
    w3 = HALF_PERIODS(ctx.tau)[3]
    return [
        wp(ctx, 2 * u, _D),
        -0.25 * wp(ctx, u),
        -0.25 * wp(ctx, u + w3),
        0.25 * wp(ctx, w3),
    ]


@dataclass(frozen=True)
class IdentitySpec:
    ident: IdentityId
    arity: int               # free variables among (u, v, z)
    has_const: bool
    description: str
    terms: Callable


REGISTRY: dict[IdentityId, IdentitySpec] = {}


def _reg(ident, arity, has_const, description, terms):
    REGISTRY[ident] = IdentitySpec(ident, arity, has_const, description, terms)


_reg(IdentityId.SUM_RULE, 3, False,
     "x(u,z) y(v,z) - y(u,z) x(v,z) = x(u+v,z) (wp(u) - wp(v))",
     _t_sum_rule)
_reg(IdentityId.ZERO_SUM_RULE, 2, False,
     "x(u,z) y(-u,z) - y(u,z) x(-u,z) = wp'(u)",
     _t_zero_sum_rule)
_reg(IdentityId.FACTOR_RULE, 2, False,
     "x(u,z) x(-u,z) = wp(z) - wp(u)",
     _t_factor_rule)
_reg(IdentityId.SIGMA_SUM_RULE, 3, False,
     "s(u,z) s(v,z) (rho(v)+rho(z-v)-rho(u)-rho(z-u)) = s(u+v,z)(wp(u)-wp(v))",
     _t_sigma_sum_rule)
_reg(IdentityId.SIGMA_ZERO_SUM_RULE, 2, False,
     "s(u,z) s(-u,z) (rho(u)+rho(z-u)-rho(-u)-rho(z+u)) = wp'(u)  (v->-u limit)",
     _t_sigma_zero_sum_rule)
_reg(IdentityId.SIGMA_FACTOR_RULE, 2, False,
     "s(u,z) s(-u,z) = wp(z) - wp(u)",
     _t_sigma_factor_rule)
_reg(IdentityId.FACTOR_HALF, 2, False,
     "xh(u,z) xh(-u,z) = -wph(u) + wph(z/2)",
     _t_factor_half)
_reg(IdentityId.FACTOR_DOUBLE, 2, False,
     "xd(u,z) xd(-u,z) = -wpd(u) + wpd(2z)",
     _t_factor_double)
_reg(IdentityId.FACTOR_PLAIN_HALF, 2, True,
     "x(u,2z) xh(-u,2z) + xh(u,2z) x(-u,2z) = -2 wp(u) + const",
     _make_const_terms(IdentityId.FACTOR_PLAIN_HALF))
_reg(IdentityId.FACTOR_PLAIN_MIXED, 2, True,
     "x(u,2z) x(-2u,z) + x(2u,z) x(-u,2z) = -wp(u) + const",
     _make_const_terms(IdentityId.FACTOR_PLAIN_MIXED))
_reg(IdentityId.FACTOR_PLAIN_DOUBLE_MIXED, 2, True,
     "x(u,2z) xd(-2u,z) + xd(2u,z) x(-u,2z) = -wp(u) + const",
     _make_const_terms(IdentityId.FACTOR_PLAIN_DOUBLE_MIXED))
_reg(IdentityId.FACTOR_HALF_PLAIN_MIXED, 2, True,
     "xh(u,2z) x(-2u,z) + x(2u,z) xh(-u,2z) = -wph(u) + const",
     _make_const_terms(IdentityId.FACTOR_HALF_PLAIN_MIXED))
_reg(IdentityId.FACTOR_HALF_DOUBLE_MIXED, 2, True,
     "xh(u,2z) xd(-2u,z) + xd(2u,z) xh(-u,2z) = -wp(u) + const",
     _make_const_terms(IdentityId.FACTOR_HALF_DOUBLE_MIXED))
_reg(IdentityId.FACTOR_PLAIN_DOUBLE, 2, True,
     "x(u,z) xd(-u,z) + xd(u,z) x(-u,z) = -2 wpd(u) + const",
     _make_const_terms(IdentityId.FACTOR_PLAIN_DOUBLE))
_reg(IdentityId.SUM_RULE_DOUBLED_ARG, 3, False,
     "x(2u,z) y(-u-v,z) - y(2u,z) x(-u-v,z) + x(u+v,z) y(-2v,z) "
     "- y(u+v,z) x(-2v,z) = x(u-v,z)(wp(2u)-wp(2v))",
     _t_sum_doubled_arg)
_reg(IdentityId.SUM_RULE_DOUBLED_ARG_DOUBLE, 3, False,
     "xd(2u,z) y(-u-v,z) - yd(2u,z) x(-u-v,z) + x(u+v,z) yd(-2v,z) "
     "- y(u+v,z) xd(-2v,z) = x(u-v,z)(wpd(2u)-wpd(2v))",
     _t_sum_doubled_arg_double)
_reg(IdentityId.SUM_RULE_DOUBLED_SPECTRAL, 3, False,
     "2x(u,2z) y(-u-v,z) - y(u,2z) x(-u-v,z) + x(u+v,z) y(-v,2z) "
     "- 2y(u+v,z) x(-v,2z) = x(u-v,z)(wp(u)-wp(v))",
     _t_sum_doubled_spectral)
_reg(IdentityId.SUM_RULE_DOUBLED_SPECTRAL_HALF, 3, False,
     "2xh(u,2z) y(-u-v,z) - yh(u,2z) x(-u-v,z) + x(u+v,z) yh(-v,2z) "
     "- 2y(u+v,z) xh(-v,2z) = x(u-v,z)(wph(u)-wph(v))",
     _t_sum_doubled_spectral_half)
_reg(IdentityId.WP_DUPLICATION, 1, False,
     "wp(2u) = (wp(u) + wp(u+w1) + wp(u+w2) + wp(u+w3)) / 4",
     _t_wp_duplication)
_reg(IdentityId.WP_HALF_SPLIT, 1, False,
     "wph(u) = wp(u) + wp(u+w1) - wp(w1)",
     _t_wp_half_split)
_reg(IdentityId.WP_DOUBLE_SPLIT, 1, False,
     "wpd(2u) = (wp(u) + wp(u+w3) - wp(w3)) / 4",
     _t_wp_double_split)


def identity_terms(
    ctx: EllipticContext,
    ident: IdentityId,
    u: complex,
    v: complex = 0.0,
    z: complex = 0.0,
) -> list[complex]:
    """Signed terms of the identity; their sum is the residual."""
    spec = REGISTRY.get(ident)
    if spec is None:
        raise ToruslaxError(f"unknown identity {ident!r}")
    return spec.terms(ctx, complex(u), complex(v), complex(z))


def identity_residual(
    ctx: EllipticContext,
    ident: IdentityId,
    u: complex,
    v: complex = 0.0,
    z: complex = 0.0,
) -> complex:
    """Left minus right of the named identity (const term subtracted where
    present); v is ignored for arity <= 2, z for arity 1."""
    return sum(identity_terms(ctx, ident, u, v, z))


def identity_relative_residual(ctx, ident, u, v=0.0, z=0.0) -> float:
    """|residual| normalised by the term magnitudes (floored at 1)."""
    terms = identity_terms(ctx, ident, u, v, z)
    scale = max(1.0, sum(abs(t) for t in terms))
    return abs(sum(terms)) / scale
