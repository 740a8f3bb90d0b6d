"""Jacobi theta_1 based elliptic kernels on the torus E_tau = C/(Z + tau Z).

Conventions
-----------
theta1(u | tau) = 2 sum_{n>=0} (-1)^n q^{(n+1/2)^2} sin((2n+1) pi u),   q = exp(i pi tau)

rho(u)  = theta1'(u)/theta1(u)
wp(u)   = -rho'(u) + theta1'''(0)/(3 theta1'(0))          (periods 1, tau)
x(u, z) = theta1(z - u) theta1'(0) / (theta1(z) theta1(u))
y(u, z) = d x / d u = -x(u, z) (rho(u) + rho(z - u))
sigma(u, z) = -x(u, z)

Rescaled-period variants (used by the twisted models):

x_half(u, z)   = 2 x(2u, z | 2tau)         wp_half(u)   = 4 wp(2u | 2tau)      periods (1/2, tau)
x_double(u, z) = x(u/2, z | tau/2) / 2     wp_double(u) = wp(u/2 | tau/2) / 4  periods (2, tau)

All series are summed directly after exact argument reduction into the
fundamental cell |Re u| <= 1/2, 0 <= Im u < Im(modulus), with the
quasi-periodicity prefactors applied in closed form.  Derivatives are
term-wise, never finite differences.  Everything here is a pure function
of its arguments; `EllipticContext` is immutable and thread-safe.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import PoleGuardError, TruncationError

__all__ = [
    "PeriodScale",
    "TruncationPolicy",
    "EllipticContext",
    "theta1",
    "rho",
    "wp",
    "xy",
    "x_kernel",
    "y_kernel",
    "sigma",
    "heat_residual",
    "HALF_PERIODS",
]


class PeriodScale(Enum):
    """Which period lattice a kernel lives on.

    FULL is the plain (1, tau) lattice; HALF means periods (1/2, tau)
    (theta evaluations at modulus 2 tau); DOUBLE means periods (2, tau)
    (theta evaluations at modulus tau/2).  ``PLAIN`` is an alias of FULL
    used when talking about the x/y kernels.
    """

    FULL = "full"
    HALF = "half"
    DOUBLE = "double"

    @property
    def modulus_factor(self) -> float:
        # modulus used for the underlying theta series
        return {"full": 1.0, "half": 2.0, "double": 0.5}[self.value]


# alias: the spec for x/y kernels calls the FULL variant PLAIN
PLAIN = PeriodScale.FULL


def HALF_PERIODS(tau: complex) -> tuple[complex, complex, complex, complex]:
    """(omega_0, omega_1, omega_2, omega_3) = (0, 1/2, (1+tau)/2, tau/2)."""
    return 0.0, 0.5, (1.0 + tau) / 2.0, tau / 2.0


@dataclass(frozen=True)
class TruncationPolicy:
    """Stop summing once the last term is below rel_tol of the running
    magnitude, hard cap at max_index terms."""

    rel_tol: float = 1e-18
    max_index: int = 200


_TRIG_SIGN = (1.0, 1.0, -1.0, -1.0)  # d^k/dw^k sin w cycle: sin, cos, -sin, -cos


class _ThetaSeries:
    """theta1 and u-derivatives at one fixed modulus, with argument reduction.

    Generic over the scalar backend so the same code runs in double
    (cmath) and 80-bit extended (numpy clongdouble) precision.
    """

    def __init__(self, tau_mod, trunc: TruncationPolicy, exp=cmath.exp, pi=math.pi):
        if not (tau_mod.imag > 0):
            raise ValueError(f"modulus must lie in the upper half plane, got {tau_mod}")
        self.tau = tau_mod
        self.trunc = trunc
        self._exp = exp
        self._pi = pi
        self._q = exp(1j * pi * tau_mod)
        self._q2 = self._q * self._q

    def reduce(self, u):
        """u -> (u0, m, n) with u = u0 + m + n*tau, |Re u0|<=1/2, 0<=Im u0<Im tau."""
        t = self.tau
        n = math.floor(float(u.imag) / float(t.imag))
        m = round(float((u - n * t).real))
        return u - m - n * t, m, n

    def lattice_distance(self, u) -> tuple[float, complex]:
        """Distance from u to the nearest lattice point, and that point."""
        u0, m, n = self.reduce(u)
        best, best_pt = math.inf, 0j
        for dm in (-1, 0, 1):
            for dn in (-1, 0, 1):
                w = dm + dn * self.tau
                d = abs(complex(u0 - w))
                if d < best:
                    best, best_pt = d, u - u0 + w
        return best, best_pt

    def derivs(self, u, max_order: int):
        """(theta1(u), theta1'(u), ..., theta1^(max_order)(u))."""
        u0, m, n = self.reduce(u)
        raw = self._series(u0, max_order)
        if n == 0:
            if m % 2 == 0:
                return raw
            return tuple(-v for v in raw)
        # theta1(u0 + m + n tau) = (-1)^(m+n) exp(-i pi n^2 tau - 2 pi i n u0) theta1(u0)
        pi = self._pi
        sign = -1.0 if (m + n) % 2 else 1.0
        phi = sign * self._exp(-1j * pi * (n * n) * self.tau - 2j * pi * n * u0)
        b = -2j * pi * n
        out = []
        for k in range(max_order + 1):
            acc = raw[k] * (1.0 + 0j)
            coeff, bpow = 1, 1.0 + 0j
            for j in range(1, k + 1):
                coeff = coeff * (k - j + 1) // j
                bpow = bpow * b
                acc += coeff * bpow * raw[k - j]
            out.append(phi * acc)
        return tuple(out)

    def _series(self, u0, max_order: int):
        # term_n^(k) = 2 (-1)^n q^{(n+1/2)^2} ((2n+1) pi)^k * trig_k((2n+1) pi u0)
        pi = self._pi
        exp = self._exp
        e1 = exp(1j * pi * u0)          # e^{i pi u0}
        e2 = e1 * e1
        ecur = e1                        # e^{i (2n+1) pi u0}
        qpow = exp(0.25j * pi * self.tau)  # q^{(n+1/2)^2}, starting at n=0
        qstep = self._q2                 # ratio q^{(n+3/2)^2 - (n+1/2)^2} = q^{2n+2}
        qratio = self._q2                # running q^{2n+2}
        sums = [0j * e1 for _ in range(max_order + 1)]
        peak = [0.0 for _ in range(max_order + 1)]
        sign = 2.0
        small_streak = 0
        n = 0
        while n <= self.trunc.max_index:
            einv = 1.0 / ecur
            s = (ecur - einv) / 2j      # sin((2n+1) pi u0)
            c = (ecur + einv) / 2.0     # cos((2n+1) pi u0)
            base = sign * qpow
            fac = 1.0
            converged = True
            for k in range(max_order + 1):
                trig = s if k % 2 == 0 else c
                term = base * fac * _TRIG_SIGN[k % 4] * trig
                sums[k] = sums[k] + term
                mag = abs(complex(term))
                ref = max(abs(complex(sums[k])), peak[k])
                if ref > 0.0:
                    peak[k] = max(peak[k], mag)
                    if mag > self.trunc.rel_tol * ref:
                        converged = False
                elif mag > 0.0:
                    peak[k] = mag
                    converged = False
                fac = fac * (2 * n + 1) * pi
            if converged:
                small_streak += 1
                if small_streak >= 2:
                    return tuple(sums)
            else:
                small_streak = 0
            # advance n -> n+1
            sign = -sign
            qpow = qpow * qratio
            qratio = qratio * qstep
            ecur = ecur * e2
            n += 1
        raise TruncationError(
            f"theta series did not converge within {self.trunc.max_index} terms "
            f"at modulus {self.tau} (Im too small for the truncation policy)"
        )


_LD_PI = np.longdouble("3.141592653589793238462643383279502884197")


def _extended_series(tau_mod: complex, trunc: TruncationPolicy) -> _ThetaSeries:
    """80-bit extended precision series (numpy clongdouble backend)."""
    tau_ld = np.clongdouble(tau_mod)
    return _ThetaSeries(tau_ld, trunc, exp=np.exp, pi=_LD_PI)


class EllipticContext:
    """Immutable evaluation environment: tau, nome, truncation policy,
    cached theta constants at the three modulus scales tau, 2 tau, tau/2.

    Construction fails off the upper half plane.  All methods are pure;
    instances may be shared freely across threads.
    """

    def __init__(
        self,
        tau: complex,
        trunc: TruncationPolicy | None = None,
        pole_guard: float = 1e-6,
    ):
        tau = complex(tau)
        if not (tau.imag > 0) or not cmath.isfinite(tau):
            raise ValueError(f"tau must lie in the upper half plane, got {tau}")
        self.tau = tau
        self.nome = cmath.exp(1j * math.pi * tau)
        if not abs(self.nome) < 1:
            raise ValueError(f"|nome| must be < 1, got {abs(self.nome)}")
        self.trunc = trunc or TruncationPolicy()
        self.pole_guard = float(pole_guard)
        self._series = {
            1.0: _ThetaSeries(tau, self.trunc),
            2.0: _ThetaSeries(2 * tau, self.trunc),
            0.5: _ThetaSeries(tau / 2, self.trunc),
        }
        self.theta_consts = {}
        for fac, eng in self._series.items():
            d0, d1, d2, d3 = eng.derivs(0.0, 3)
            # theta1 odd: even derivatives vanish at 0
            if abs(d0) > self.trunc.rel_tol or abs(d2) > 1e-12 * abs(d3):
                raise AssertionError("theta1 oddness check failed at construction")
            self.theta_consts[fac] = (d1, d3)

    def series(self, modulus_factor: float = 1.0) -> _ThetaSeries:
        return self._series[float(modulus_factor)]

    def guard(self, u: complex, modulus_factor: float = 1.0) -> None:
        """Raise PoleGuardError if u sits within the guard radius of the
        zero lattice of theta1 at the given modulus."""
        d, nearest = self._series[float(modulus_factor)].lattice_distance(u)
        if d < self.pole_guard:
            raise PoleGuardError(u, nearest)

    def lattice_distance(self, u: complex, modulus_factor: float = 1.0):
        return self._series[float(modulus_factor)].lattice_distance(u)

    def __repr__(self):
        return f"EllipticContext(tau={self.tau!r})"


def theta1(
    ctx: EllipticContext,
    u: complex,
    order: int = 0,
    modulus_factor: float = 1.0,
) -> complex:
    """theta1^(order)(u | modulus) for modulus in {tau, 2 tau, tau/2}
    selected by modulus_factor in {1, 2, 0.5}."""
    if order not in (0, 1, 2, 3):
        raise ValueError("order must be 0..3")
    u = complex(u)
    if not cmath.isfinite(u):
        raise ValueError(f"non-finite argument {u}")
    return complex(ctx.series(modulus_factor).derivs(u, order)[order])


def rho(ctx: EllipticContext, u: complex, modulus_factor: float = 1.0) -> complex:
    """Logarithmic derivative theta1'(u)/theta1(u)."""
    ctx.guard(u, modulus_factor)
    d0, d1 = ctx.series(modulus_factor).derivs(complex(u), 1)
    return complex(d1 / d0)


def _wp_base(ctx, u, modulus_factor, order):
    """wp (order 0) or wp' (order 1) at the plain lattice of the given modulus."""
    ctx.guard(u, modulus_factor)
    eng = ctx.series(modulus_factor)
    d1c, d3c = ctx.theta_consts[float(modulus_factor)]
    if order == 0:
        t0, t1, t2 = eng.derivs(complex(u), 2)
        r = t1 / t0
        return complex(-(t2 / t0 - r * r) + d3c / (3 * d1c))
    t0, t1, t2, t3 = eng.derivs(complex(u), 3)
    r = t1 / t0
    return complex(-(t3 / t0 - 3 * t2 * t1 / (t0 * t0) + 2 * r ** 3))


def wp(
    ctx: EllipticContext,
    u: complex,
    scale: PeriodScale = PeriodScale.FULL,
    order: int = 0,
) -> complex:
    """Weierstrass wp (order 0) and wp' (order 1).

    FULL has periods (1, tau).  HALF/DOUBLE reduce by homothety:
    wp(u | 1/2, tau) = 4 wp(2u | 1, 2tau), wp(u | 2, tau) = wp(u/2 | 1, tau/2)/4,
    with the cubed scaling for wp'.
    """
    if order not in (0, 1):
        raise ValueError("order must be 0 or 1")
    u = complex(u)
    if scale is PeriodScale.FULL:
        return _wp_base(ctx, u, 1.0, order)
    if scale is PeriodScale.HALF:
        v = _wp_base(ctx, 2 * u, 2.0, order)
        return 4 * v if order == 0 else 8 * v
    v = _wp_base(ctx, u / 2, 0.5, order)
    return v / 4 if order == 0 else v / 8


def _xy_base(ctx, u, z, modulus_factor):
    """(x, y) at the plain kernel of the given modulus.

    y is assembled as -(theta1'(z-u) + theta1(z-u) rho(u)) * theta1'(0) /
    (theta1(z) theta1(u)) so the spurious 0*inf at z - u on the lattice
    never appears.
    """
    ctx.guard(u, modulus_factor)
    ctx.guard(z, modulus_factor)
    eng = ctx.series(modulus_factor)
    d1c, _ = ctx.theta_consts[float(modulus_factor)]
    tu0, tu1 = eng.derivs(complex(u), 1)
    tz0 = eng.derivs(complex(z), 0)[0]
    tzu0, tzu1 = eng.derivs(complex(z - u), 1)
    denom = tz0 * tu0
    xv = tzu0 * d1c / denom
    yv = -(tzu1 + tzu0 * (tu1 / tu0)) * d1c / denom
    return complex(xv), complex(yv)


def xy(
    ctx: EllipticContext,
    u: complex,
    z: complex,
    variant: PeriodScale = PeriodScale.FULL,
) -> tuple[complex, complex]:
    """Kernel x and its u-derivative y for the requested variant.

    FULL:   x(u, z),           poles u, z on Z + tau Z
    HALF:   2 x(2u, z | 2tau), poles u on Z/2 + tau Z, z on Z + 2 tau Z
    DOUBLE: x(u/2, z | tau/2)/2, poles u on 2Z + tau Z, z on Z + tau Z/2
    """
    u, z = complex(u), complex(z)
    if variant is PeriodScale.FULL:
        return _xy_base(ctx, u, z, 1.0)
    if variant is PeriodScale.HALF:
        xv, yv = _xy_base(ctx, 2 * u, z, 2.0)
        return 2 * xv, 4 * yv
    xv, yv = _xy_base(ctx, u / 2, z, 0.5)
    return xv / 2, yv / 4


def x_kernel(ctx, u, z, variant: PeriodScale = PeriodScale.FULL) -> complex:
    return xy(ctx, u, z, variant)[0]


def y_kernel(ctx, u, z, variant: PeriodScale = PeriodScale.FULL) -> complex:
    return xy(ctx, u, z, variant)[1]


def sigma(ctx: EllipticContext, u: complex, z: complex) -> complex:
    """The spin-model kernel sigma(u, z) = theta1(u-z) theta1'(0) /
    (theta1(z) theta1(u)) = -x(u, z)."""
    return -x_kernel(ctx, u, z)


def _x_extended(u, z, tau, variant: PeriodScale, trunc: TruncationPolicy):
    """x at the given variant, evaluated in 80-bit extended precision.

    Only used by finite-difference harnesses (heat_residual), where the
    h^-2 amplification of double-precision rounding would swamp the
    stencil truncation error.
    """
    fac = variant.modulus_factor
    if variant is PeriodScale.FULL:
        uu, zz, scale = u, z, 1.0
    elif variant is PeriodScale.HALF:
        uu, zz, scale = 2 * u, z, 2.0
    else:
        uu, zz, scale = u / 2, z, 0.5
    del fac
    eng = _extended_series(np.clongdouble(scale) * np.clongdouble(tau), trunc)
    tu = eng.derivs(np.clongdouble(uu), 0)[0]
    tz = eng.derivs(np.clongdouble(zz), 0)[0]
    tzu = eng.derivs(np.clongdouble(zz) - np.clongdouble(uu), 0)[0]
    d1 = eng.derivs(np.clongdouble(0.0), 1)[1]
    xv = tzu * d1 / (tz * tu)
    if variant is PeriodScale.HALF:
        return 2 * xv
    if variant is PeriodScale.DOUBLE:
        return xv / 2
    return xv


def heat_residual(
    ctx: EllipticContext,
    variant: PeriodScale,
    u: complex,
    z: complex,
    h: float = 1e-5,
    sign: int = +1,
) -> complex:
    """Finite-difference residual of 2 pi i dx/dtau + d^2 x/(du dz).

    tau-derivative by a central step of size h in tau, mixed derivative by
    the 4-point cross stencil of size h; expected O(h^2) plus rounding.
    The stencil is evaluated in extended precision: in double, rounding of
    ~1e-16 divided by 4 h^2 = 4e-10 would leave a ~1e-6 noise floor above
    the h^2 truncation level.

    sign=-1 evaluates the deliberately wrong combination
    2 pi i dx/dtau - d^2x/(du dz) (harness sanity control).
    """
    # the whole stencil, not just its center, must clear the pole lattices
    if variant is PeriodScale.FULL:
        checks = ((u, 1.0, h), (z, 1.0, h))
    elif variant is PeriodScale.HALF:
        checks = ((2 * u, 2.0, 2 * h), (z, 2.0, h))
    else:
        checks = ((u / 2, 0.5, h / 2), (z, 0.5, h))
    for w, fac, reach in checks:
        d, nearest = ctx.lattice_distance(w, fac)
        if d < ctx.pole_guard + reach:
            raise PoleGuardError(w, nearest, "heat stencil crosses a pole")
    tau = ctx.tau
    hld = np.clongdouble(h)
    f = lambda uu, zz, tt: _x_extended(uu, zz, tt, variant, ctx.trunc)
    dtau = (f(u, z, np.clongdouble(tau) + hld) - f(u, z, np.clongdouble(tau) - hld)) / (2 * hld)
    cross = (
        f(np.clongdouble(u) + hld, np.clongdouble(z) + hld, tau)
        - f(np.clongdouble(u) + hld, np.clongdouble(z) - hld, tau)
        - f(np.clongdouble(u) - hld, np.clongdouble(z) + hld, tau)
        + f(np.clongdouble(u) - hld, np.clongdouble(z) - hld, tau)
    ) / (4 * hld * hld)
    res = 2j * _LD_PI * dtau + (cross if sign >= 0 else -cross)
    return complex(res)
