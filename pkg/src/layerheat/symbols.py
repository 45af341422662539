"""Transform-domain algebra for the two-layer heat operator.

Applying a Fourier transform in the tangential variables (frequency xi')
and a Laplace transform in time (variable tau) reduces the layered heat
equation to a second-order ODE in x_n on each side of the interface.  This
module implements the exact solution of that ODE system:

* the ``Theta`` square roots that control exponential decay in x_n,
* the transmission coefficients C1..C4 coupling the layers,
* the six region symbols V (one per ordering of x_n, y_n and 0),
* the analyticity predicates used to certify contour deformations.

Stored symbols have the source prefactor exp(-tau*s - i y'.xi') factored
out; the transform module reinstates it as exp(tau*(t-s) + i(x'-y').xi')
at quadrature time, which keeps evaluation translation-invariant in
(y', s) and avoids overflow.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .medium import OnInterface, TwoLayerMedium


class SymbolError(RuntimeError):
    """Base class for transform-domain evaluation failures."""


class BranchAmbiguity(SymbolError):
    """Theta^2 landed on the nonpositive real axis (branch cut).

    Inside the certified analyticity domain this cannot happen; hitting
    the cut means the contour or mu certificate is misconfigured.
    """


class DegenerateDenominator(SymbolError):
    """Theta_A = 0 or Theta_A + Theta_B = 0 in a coefficient formula."""


class RegionMismatch(SymbolError):
    """(x_n, y_n) inconsistent with the requested region tag."""


@dataclass(frozen=True)
class SpectralPoint:
    """Complex frequency pair (xi', tau) with tau = i*eta."""

    xi_prime: np.ndarray
    tau: complex

    def __post_init__(self):
        object.__setattr__(
            self, "xi_prime", np.atleast_1d(np.asarray(self.xi_prime, dtype=complex))
        )
        object.__setattr__(self, "tau", complex(self.tau))
        self.xi_prime.setflags(write=False)

    @classmethod
    def from_eta(cls, xi_prime, eta: complex) -> "SpectralPoint":
        return cls(xi_prime=xi_prime, tau=1j * complex(eta))

    @property
    def eta(self) -> complex:
        return self.tau / 1j


@dataclass(frozen=True)
class ThetaPair:
    theta_A: complex
    theta_B: complex
    a: complex
    b: complex


@dataclass(frozen=True)
class TransmissionCoefficients:
    c1: complex
    c2: complex
    c3: complex
    c4: complex


class Region(Enum):
    """Orderings of x_n, y_n and the interface plane 0."""

    R11 = "x_n > y_n > 0"
    R12 = "y_n > x_n > 0"
    R2 = "x_n < 0 < y_n"
    R1 = "x_n > 0 > y_n"
    R21 = "y_n < x_n < 0"
    R22 = "x_n < y_n < 0"


def classify_region(x_n: float, y_n: float) -> Region:
    """Region tag for a target/source pair of normal coordinates."""
    if y_n > 0.0:
        if x_n < 0.0:
            return Region.R2
        return Region.R11 if x_n >= y_n else Region.R12
    if y_n < 0.0:
        if x_n > 0.0:
            return Region.R1
        return Region.R22 if x_n <= y_n else Region.R21
    raise OnInterface("y_n == 0: source on the interface is not supported")


def region_contains(region: Region, x_n: float, y_n: float) -> bool:
    """Closure membership (boundaries shared by two regions are allowed)."""
    if region is Region.R11:
        return x_n >= y_n >= 0.0
    if region is Region.R12:
        return 0.0 <= x_n <= y_n
    if region is Region.R2:
        return x_n <= 0.0 <= y_n
    if region is Region.R1:
        return x_n >= 0.0 >= y_n
    if region is Region.R21:
        return y_n <= x_n <= 0.0
    return x_n <= y_n <= 0.0


def _forms(medium: TwoLayerMedium, xi: np.ndarray):
    """Linear and quadratic tangential forms for both tensors.

    ``xi`` has shape (..., n-1) and may be complex; the forms are the
    plain bilinear extensions (no conjugation).
    """
    A, B = medium.upper, medium.lower
    if xi.shape[-1] == 0:
        zero = np.zeros(xi.shape[:-1], dtype=complex)
        return zero, zero, zero.copy(), zero.copy()
    a_form = xi @ A.normal_row.astype(complex)
    b_form = xi @ B.normal_row.astype(complex)
    quad_A = np.einsum("...i,ij,...j->...", xi, A.minor, xi)
    quad_B = np.einsum("...i,ij,...j->...", xi, B.minor, xi)
    return a_form, b_form, quad_A, quad_B


def theta_squared(medium: TwoLayerMedium, xi: np.ndarray, tau: np.ndarray):
    """Theta_A^2 and Theta_B^2 on a (xi-batch) x (tau-batch) grid.

    xi: (Q, n-1) complex, tau: (M,) complex -> two (Q, M) arrays.
    """
    a_form, b_form, quad_A, quad_B = _forms(medium, xi)
    tau = np.asarray(tau, dtype=complex)
    th2_A = medium.upper.a_nn * (quad_A[:, None] + tau[None, :]) - a_form[:, None] ** 2
    th2_B = medium.lower.a_nn * (quad_B[:, None] + tau[None, :]) - b_form[:, None] ** 2
    return th2_A, th2_B, a_form, b_form


def _check_branch(th2: np.ndarray):
    on_cut = (th2.imag == 0.0) & (th2.real <= 0.0)
    if np.any(on_cut):
        raise BranchAmbiguity(
            "Theta^2 on the nonpositive real axis; point outside the "
            "certified analyticity domain"
        )


def theta_pair(medium: TwoLayerMedium, sp: SpectralPoint, check: bool = True) -> ThetaPair:
    """Principal-branch Theta square roots (Re Theta > 0 inside L_mu)."""
    xi = sp.xi_prime[None, :]
    tau = np.array([sp.tau])
    th2_A, th2_B, a_form, b_form = theta_squared(medium, xi, tau)
    if check:
        _check_branch(th2_A)
        _check_branch(th2_B)
    return ThetaPair(
        theta_A=complex(np.sqrt(th2_A[0, 0])),
        theta_B=complex(np.sqrt(th2_B[0, 0])),
        a=complex(a_form[0]),
        b=complex(b_form[0]),
    )


def region_terms(region: Region, medium: TwoLayerMedium, xi: np.ndarray, tau: np.ndarray):
    """Exponential-term decomposition of the region symbol V.

    Returns a list of (coef, p, q) arrays of shape (Q, M) such that
    ``V(x_n, y_n) = sum_k coef_k * exp(p_k x_n + q_k y_n)``.  The source
    prefactor exp(-tau*s - i y'.xi') is NOT included.
    """
    th2_A, th2_B, a, b = theta_squared(medium, xi, tau)
    thA = np.sqrt(th2_A)
    thB = np.sqrt(th2_B)
    a = a[:, None]
    b = b[:, None]
    ann = medium.upper.a_nn
    bnn = medium.lower.a_nn
    sum_th = thA + thB
    if region is Region.R11:
        return [
            (1.0 / (2.0 * thA), (-1j * a - thA) / ann, (1j * a + thA) / ann),
            ((thA - thB) / (2.0 * thA * sum_th), (-1j * a - thA) / ann, (1j * a - thA) / ann),
        ]
    if region is Region.R12:
        return [
            ((thA - thB) / (2.0 * thA * sum_th), (-1j * a - thA) / ann, (1j * a - thA) / ann),
            (1.0 / (2.0 * thA), (-1j * a + thA) / ann, (1j * a - thA) / ann),
        ]
    if region is Region.R2:
        return [
            (1.0 / sum_th, (-1j * b + thB) / bnn, (1j * a - thA) / ann),
        ]
    if region is Region.R1:
        return [
            (1.0 / sum_th, (-1j * a - thA) / ann, (1j * b + thB) / bnn),
        ]
    if region is Region.R21:
        return [
            ((thB - thA) / (2.0 * thB * sum_th), (-1j * b + thB) / bnn, (1j * b + thB) / bnn),
            (1.0 / (2.0 * thB), (-1j * b - thB) / bnn, (1j * b + thB) / bnn),
        ]
    if region is Region.R22:
        return [
            (1.0 / (2.0 * thB), (-1j * b + thB) / bnn, (1j * b - thB) / bnn),
            ((thB - thA) / (2.0 * thB * sum_th), (-1j * b + thB) / bnn, (1j * b + thB) / bnn),
        ]
    raise RegionMismatch(f"unknown region {region}")


def v_symbol(
    region: Region,
    medium: TwoLayerMedium,
    x_n: float,
    y_n: float,
    sp: SpectralPoint,
    derivative: int = 0,
) -> complex:
    """Region symbol V(x_n, y_n, xi', tau), or its x_n-derivative.

    ``derivative`` = 0, 1 or 2 returns V, dV/dx_n, d2V/dx_n2 (exact, from
    the exponents).
    """
    if not region_contains(region, x_n, y_n):
        raise RegionMismatch(
            f"(x_n, y_n) = ({x_n}, {y_n}) is not in the closure of {region.name}"
        )
    xi = sp.xi_prime[None, :]
    tau = np.array([sp.tau])
    total = 0.0 + 0.0j
    for coef, p, q in region_terms(region, medium, xi, tau):
        total += complex(coef[0, 0] * p[0, 0] ** derivative * np.exp(p[0, 0] * x_n + q[0, 0] * y_n))
    return total


def transmission_coefficients(
    medium: TwoLayerMedium,
    sp: SpectralPoint,
    y_n: float,
    y_prime=None,
    s: float = 0.0,
    include_prefactor: bool = False,
) -> TransmissionCoefficients:
    """Closed-form coefficients C1..C4 of the transmission system, y_n > 0.

    By default the stripped convention is used (no exp(-tau*s - i y'.xi')
    factor); pass ``include_prefactor=True`` with y_prime, s to obtain the
    fully dressed coefficients.
    """
    if not y_n > 0.0:
        raise RegionMismatch("transmission_coefficients requires y_n > 0; "
                             "use mirrored_coefficients for y_n < 0")
    th = theta_pair(medium, sp)
    thA, thB = th.theta_A, th.theta_B
    ia = 1j * th.a
    ann = medium.upper.a_nn
    if abs(thA) == 0.0 or abs(thA + thB) == 0.0:
        raise DegenerateDenominator("Theta_A or Theta_A + Theta_B vanished")
    up = np.exp((ia + thA) * y_n / ann)
    down = np.exp((ia - thA) * y_n / ann)
    c2 = (thA - thB) / (2.0 * thA * (thA + thB)) * down
    c1 = up / (2.0 * thA) + c2
    c3 = down / (2.0 * thA)
    c4 = down / (thA + thB)
    if include_prefactor:
        y_prime = np.zeros(sp.xi_prime.shape[0]) if y_prime is None else np.asarray(y_prime)
        pref = np.exp(-sp.tau * s - 1j * (y_prime @ sp.xi_prime))
        c1, c2, c3, c4 = (pref * c for c in (c1, c2, c3, c4))
    return TransmissionCoefficients(c1=complex(c1), c2=complex(c2),
                                    c3=complex(c3), c4=complex(c4))


def mirrored_medium(medium: TwoLayerMedium) -> TwoLayerMedium:
    """Medium seen after reflecting the normal axis (layers swap)."""
    axis = medium.dim - 1
    return TwoLayerMedium(
        upper=medium.lower.reflected(axis), lower=medium.upper.reflected(axis)
    )


def mirrored_coefficients(medium: TwoLayerMedium, sp: SpectralPoint, y_n: float) -> TransmissionCoefficients:
    """Coefficients of the y_n < 0 family via normal-axis reflection."""
    if not y_n < 0.0:
        raise RegionMismatch("mirrored_coefficients requires y_n < 0")
    return transmission_coefficients(mirrored_medium(medium), sp, -y_n)


def transmission_residuals(medium: TwoLayerMedium, sp: SpectralPoint, y_n: float) -> np.ndarray:
    """Relative residuals of the four defining conditions for C1..C4.

    Conditions: solution continuity at x_n = y_n, unit conormal-derivative
    jump at the source plane, continuity at x_n = 0 and conormal-flux
    continuity at x_n = 0.
    """
    co = transmission_coefficients(medium, sp, y_n)
    th = theta_pair(medium, sp)
    thA, thB = th.theta_A, th.theta_B
    ia, ib = 1j * th.a, 1j * th.b
    ann = medium.upper.a_nn
    p_minus = (-ia - thA) / ann
    p_plus = (-ia + thA) / ann
    e_minus = np.exp(p_minus * y_n)
    e_plus = np.exp(p_plus * y_n)

    r1 = co.c1 * e_minus - co.c2 * e_minus - co.c3 * e_plus
    s1 = max(abs(co.c1 * e_minus), abs(co.c3 * e_plus), 1e-300)

    jump = ann * ((co.c2 - co.c1) * p_minus * e_minus + co.c3 * p_plus * e_plus)
    r2 = jump - 1.0
    s2 = max(abs(jump), 1.0)

    r3 = co.c2 + co.c3 - co.c4
    s3 = max(abs(co.c2), abs(co.c3), abs(co.c4), 1e-300)

    r4 = thA * (co.c3 - co.c2) - thB * co.c4
    s4 = max(abs(thA * co.c3), abs(thB * co.c4), 1e-300)

    return np.array([abs(r1) / s1, abs(r2) / s2, abs(r3) / s3, abs(r4) / s4])


def ode_residual(
    region: Region,
    medium: TwoLayerMedium,
    x_n: float,
    y_n: float,
    sp: SpectralPoint,
    h: float,
) -> complex:
    """Central-difference residual of the governing ODE at x_n.

    The symbol solves  gamma_nn V'' + 2i (g.xi') V' - (G xi'.xi' + tau) V = 0
    with (gamma, g, G) the tensor blocks of the layer containing x_n; the
    residual of the second-difference approximation is O(h^2)|V|.
    """
    if region in (Region.R2, Region.R21, Region.R22):
        tensor = medium.lower
    else:
        tensor = medium.upper
    xi = sp.xi_prime
    lin = complex(xi @ tensor.normal_row.astype(complex)) if xi.size else 0.0
    quad = complex(np.einsum("i,ij,j->", xi, tensor.minor.astype(complex), xi)) if xi.size else 0.0
    v0 = v_symbol(region, medium, x_n, y_n, sp)
    vp = v_symbol(region, medium, x_n + h, y_n, sp)
    vm = v_symbol(region, medium, x_n - h, y_n, sp)
    d2 = (vp - 2.0 * v0 + vm) / h**2
    d1 = (vp - vm) / (2.0 * h)
    return tensor.a_nn * d2 + 2j * lin * d1 - (quad + sp.tau) * v0


def in_analyticity_domain(sp: SpectralPoint, mu: float) -> bool:
    """Membership in L_mu^{n-1}.

    L_mu = { (xi', eta) : Im eta < mu(|Re eta| + |Re xi'|^2) - |Im xi'|^2/mu }.
    """
    eta = sp.eta
    re_xi = np.linalg.norm(sp.xi_prime.real)
    im_xi = np.linalg.norm(sp.xi_prime.imag)
    return eta.imag < mu * (abs(eta.real) + re_xi**2) - im_xi**2 / mu


def root_avoidance_check(medium: TwoLayerMedium, sp: SpectralPoint, mu: float | None = None) -> bool:
    """True iff the discriminant -4*Theta^2 avoids [0, inf) for both layers.

    Equivalently Theta^2 avoids the branch cut (-inf, 0]; this is the
    certified condition under which the principal square root has a
    strictly positive real part.
    """
    xi = sp.xi_prime[None, :]
    tau = np.array([sp.tau])
    th2_A, th2_B, _, _ = theta_squared(medium, xi, tau)
    for th2 in (complex(th2_A[0, 0]), complex(th2_B[0, 0])):
        scale = max(abs(th2), 1e-300)
        if abs(th2.imag) <= 1e-13 * scale and th2.real <= 1e-13 * scale:
            return False
    return True


def symbol_decay_margin(
    region: Region,
    medium: TwoLayerMedium,
    x_n: float,
    y_n: float,
    sp: SpectralPoint,
    c: float | None = None,
) -> float:
    """log|V| + log(|xi'| + |eta|^{1/2}) + c|x_n - y_n|(|xi'| + |eta|^{1/2}).

    Boundedness of this margin over the analyticity domain expresses the
    exponential-decay estimate for the symbols; the default rate is
    c = delta / (2 max(a_nn, b_nn)).
    """
    if c is None:
        c = medium.min_delta() / (2.0 * max(medium.upper.a_nn, medium.lower.a_nn))
    v = v_symbol(region, medium, x_n, y_n, sp)
    freq = np.linalg.norm(np.abs(sp.xi_prime)) + abs(sp.eta) ** 0.5
    return float(np.log(max(abs(v), 1e-300)) + np.log(max(freq, 1e-300))
                 + c * abs(x_n - y_n) * freq)
