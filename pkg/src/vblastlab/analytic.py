"""Closed-form outage and error-rate expressions for n x 2 V-BLAST.

Detection uses optimal ordering and ZF-MRC weights. All SNR arguments are
linear. ``x`` denotes a normalized SNR ``gamma / gamma0`` and ``gamma0`` the
average per-branch SNR.

Coherent modulations are expressed through the BPSK results and
non-coherent ones through the BFSK results:

* ``beta * Q(sqrt(alpha * gamma))``  ->  ``beta * P_bpsk(alpha * gamma0 / 2)``
* ``beta * exp(-alpha * gamma)``     ->  ``2 * beta * P_bfsk(2 * alpha * gamma0)``

The MRC BPSK average BER is evaluated in a form free of the ``1/2 - 1/2 mu``
cancellation, so every expression stays accurate (and non-negative) up to
``gamma0 = 1e8``.
"""

from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import lru_cache
from math import comb, factorial

import mpmath
import numpy as np
from scipy.special import erfc, gammainc

COHERENT = "coherent"
NONCOHERENT = "noncoherent"


class DomainError(ValueError):
    """Argument outside the domain of an analytic expression."""


def _check_n(n_rx, minimum=2):
    if int(n_rx) != n_rx or n_rx < minimum:
        raise DomainError(f"n_rx must be an integer >= {minimum}, got {n_rx}")
    return int(n_rx)


def _nonneg(x, name):
    arr = np.asarray(x, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < 0):
        raise DomainError(f"{name} must be non-negative, got {x}")
    return arr


def _out(value, like):
    return float(value) if np.ndim(like) == 0 else value


def _double_factorial(k):
    """``k!!`` with the convention ``(-1)!! = 0!! = 1``."""
    out = 1
    while k > 1:
        out *= k
        k -= 2
    return out


def q_function(x):
    """Gaussian tail probability ``Q(x) = erfc(x / sqrt(2)) / 2``."""
    x_arr = np.asarray(x, dtype=float)
    return _out(0.5 * erfc(x_arr / np.sqrt(2.0)), x)


@dataclass(frozen=True)
class ModulationSpec:
    """Binary modulation described by its conditional BER.

    Coherent family: ``P_e(gamma) = beta * Q(sqrt(alpha * gamma))``.
    Non-coherent family: ``P_e(gamma) = beta * exp(-alpha * gamma)``.
    """

    family: str
    alpha: float
    beta: float
    name: str = ""

    def __post_init__(self):
        if self.family not in (COHERENT, NONCOHERENT):
            raise ValueError(f"unknown modulation family {self.family!r}")
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError("alpha and beta must be positive")
        if not self.name:
            object.__setattr__(self, "name", f"{self.family}:{self.alpha:g},{self.beta:g}")

    @property
    def coherent(self):
        return self.family == COHERENT

    def conditional_ber(self, gamma):
        """Error probability for a known instantaneous SNR."""
        gamma = np.asarray(gamma, dtype=float)
        if self.coherent:
            return self.beta * q_function(np.sqrt(self.alpha * gamma))
        return self.beta * np.exp(-self.alpha * gamma)

    @classmethod
    def parse(cls, text):
        """Parse ``bpsk``, ``bfsk``, ``coherent:a,b`` or ``noncoherent:a,b``."""
        key = text.strip().lower()
        if key == "bpsk":
            return BPSK
        if key == "bfsk":
            return BFSK
        family, sep, params = key.partition(":")
        if not sep or family not in (COHERENT, NONCOHERENT):
            raise ValueError(f"unrecognized modulation {text!r}")
        try:
            alpha, beta = (float(p) for p in params.split(","))
        except ValueError:
            raise ValueError(f"expected <family>:<alpha>,<beta>, got {text!r}") from None
        return cls(family, alpha, beta)


BPSK = ModulationSpec(COHERENT, 2.0, 1.0, "bpsk")
BFSK = ModulationSpec(NONCOHERENT, 0.5, 0.5, "bfsk")


@dataclass(frozen=True)
class OrderedSnrCoefficients:
    """Coefficient families of the ordered-SNR distributions for one ``n``.

    ``a`` (indices ``n-1 .. 2n-3``) enters the first-step CDF and ``b``
    (indices ``n .. 2n-2``) the second-step CDF. The remaining families are
    the rescalings used by the BER expressions::

        alpha_i = i! a_i / 2          beta_i = i! b_i / 2^i
        sigma_i = (2i-1)!! a_i        d_i    = (2i-1)!! b_i / 2^i
    """

    n_rx: int
    a: dict
    b: dict
    alpha: dict = field(init=False)
    beta: dict = field(init=False)
    sigma: dict = field(init=False)
    d: dict = field(init=False)

    def __post_init__(self):
        a, b = self.a, self.b
        derived = {
            "alpha": {i: factorial(i) * v / 2 for i, v in a.items()},
            "beta": {i: factorial(i) * v / 2**i for i, v in b.items()},
            "sigma": {i: _double_factorial(2 * i - 1) * v for i, v in a.items()},
            "d": {i: _double_factorial(2 * i - 1) * v / 2**i for i, v in b.items()},
        }
        for name, values in derived.items():
            object.__setattr__(self, name, values)

    def as_float(self):
        """Copy with every coefficient converted to float."""
        return OrderedSnrCoefficients(
            self.n_rx,
            {i: float(v) for i, v in self.a.items()},
            {k: float(v) for k, v in self.b.items()},
        )

    def with_a(self, i, value):
        """Copy with ``a_i`` replaced (derived families follow). For fault injection."""
        if i not in self.a:
            raise KeyError(f"a_{i} is not defined for n = {self.n_rx}")
        return replace(self, a={**self.a, i: value})


@lru_cache(maxsize=None)
def exact_coefficients(n_rx):
    """Coefficients as exact ``Fraction`` values."""
    n = _check_n(n_rx)
    a = {}
    for i in range(n - 1, 2 * n - 2):
        total = Fraction(0)
        for j in range(i + 1, 2 * n - 1):
            inner = sum(Fraction(1, factorial(k) * factorial(j - k))
                        for k in range(j - n + 1, n))
            total += Fraction(factorial(j - n), 2**j) * inner
        a[i] = Fraction(n - 1, factorial(i - n + 1)) * total
    b = {k: sum((Fraction(1, factorial(i) * factorial(k - i)) for i in range(k - n + 1, n)),
                Fraction(0))
         for k in range(n, 2 * n - 1)}
    return OrderedSnrCoefficients(n, a, b)


@lru_cache(maxsize=None)
def coefficients(n_rx):
    """Floating-point coefficient table for ``n_rx`` receive antennas.

    Raises
    ------
    DomainError
        If ``n_rx < 2``.
    """
    return exact_coefficients(n_rx).as_float()


def _resolve(n_rx, coeffs):
    n = _check_n(n_rx)
    if coeffs is None:
        return coefficients(n)
    if coeffs.n_rx != n:
        raise ValueError(f"coefficients are for n = {coeffs.n_rx}, not {n}")
    return coeffs


def _series(table, base):
    """``sum_i table[i] * base**i`` for scalar or array `base`."""
    return sum(c * base**i for i, c in table.items())


# -- outage probabilities ---------------------------------------------------

def mrc_outage_cdf(n_rx, x):
    """Outage probability of n-th order MRC, ``1 - exp(-x) sum_{k<n} x^k / k!``.

    Evaluated as the regularized lower incomplete gamma function, which is
    the same function without the cancellation near ``x = 0``.
    """
    n = _check_n(n_rx, minimum=1)
    xa = _nonneg(x, "x")
    return _out(gammainc(n, xa), x)


def outage_cdf_step1(n_rx, x, coeffs=None):
    """CDF of the normalized SNR at the first detection step (diversity ``n-1``)."""
    c = _resolve(n_rx, coeffs)
    n = c.n_rx
    xa = _nonneg(x, "x")
    delta = np.exp(-2.0 * xa) * _series(c.a, 2.0 * xa)
    value = 2.0 * gammainc(n - 1, xa) - gammainc(n - 1, 2.0 * xa) + delta
    return _out(np.clip(value, 0.0, 1.0), x)


def outage_cdf_step2(n_rx, x):
    """CDF of the normalized SNR at the second step, ``F(x) [2 - F(x)]`` with ``F`` the n-th order MRC CDF."""
    n = _check_n(n_rx)
    xa = _nonneg(x, "x")
    F = gammainc(n, xa)
    return _out(F * (2.0 - F), x)


def outage_cdf_step2_series(n_rx, x, coeffs=None):
    """Second-step CDF in series form, ``F_n(2x) - exp(-2x) sum_k b_k x^k``."""
    c = _resolve(n_rx, coeffs)
    xa = _nonneg(x, "x")
    value = gammainc(c.n_rx, 2.0 * xa) - np.exp(-2.0 * xa) * _series(c.b, xa)
    return _out(value, x)


def outage_cdf(step, n_rx, x, coeffs=None):
    if step == 1:
        return outage_cdf_step1(n_rx, x, coeffs)
    if step == 2:
        return outage_cdf_step2(n_rx, x)
    raise DomainError(f"step must be 1 or 2, got {step}")


def snr_pdf(step, n_rx, x, coeffs=None):
    """Density of the normalized SNR, by central differences of the CDF.

    The step is ``h = max(1e-6, 1e-6 x)``; the lower point is clipped at 0.
    """
    xa = np.asarray(x, dtype=float)
    if np.any(np.isnan(xa)) or np.any(xa <= 0):
        raise DomainError(f"x must be positive, got {x}")
    h = np.maximum(1e-6, 1e-6 * xa)
    lo = np.maximum(xa - h, 0.0)
    hi = xa + h
    F = lambda v: outage_cdf(step, n_rx, v, coeffs)  # noqa: E731
    return _out((F(hi) - F(lo)) / (hi - lo), x)


# -- MRC reference BERs -----------------------------------------------------

def ber_mrc_bfsk(n_rx, gamma0):
    """Average BER of non-coherent BFSK with n-th order MRC, ``(2/(2+g))^n / 2``."""
    n = _check_n(n_rx, minimum=1)
    g = _nonneg(gamma0, "gamma0")
    return _out(0.5 * (2.0 / (2.0 + g)) ** n, gamma0)


def ber_mrc_bpsk(n_rx, gamma0):
    """Average BER of BPSK with n-th order MRC.

    Equal to ``1/2 - 1/2 mu sum_{i<n} C(2i, i) / (4 (1 + g))^i`` with
    ``mu = sqrt(g / (1 + g))``, evaluated as
    ``((1 - mu)/2)^n sum_{k<n} C(n-1+k, k) ((1 + mu)/2)^k`` where
    ``1 - mu = 1 / ((1 + g)(1 + mu))``.
    """
    n = _check_n(n_rx, minimum=1)
    g = _nonneg(gamma0, "gamma0")
    mu = np.sqrt(g / (1.0 + g))
    lower = 0.5 / ((1.0 + g) * (1.0 + mu))
    upper = 0.5 * (1.0 + mu)
    total = sum(comb(n - 1 + k, k) * upper**k for k in range(n))
    return _out(lower**n * total, gamma0)


def _map_argument(modulation, gamma0):
    """Scale factor and effective SNR for the BPSK / BFSK reference curve."""
    if modulation.coherent:
        return modulation.beta, modulation.alpha * gamma0 / 2.0
    return 2.0 * modulation.beta, 2.0 * modulation.alpha * gamma0


def ber_mrc(modulation, n_rx, gamma0):
    """Average BER of `modulation` with n-th order MRC."""
    g = _nonneg(gamma0, "gamma0")
    scale, arg = _map_argument(modulation, g)
    base = ber_mrc_bpsk if modulation.coherent else ber_mrc_bfsk
    return _out(scale * base(n_rx, arg), gamma0)


# -- per-step average BER ---------------------------------------------------

def _bfsk_step1(c, g):
    n = c.n_rx
    r = 4.0 / (4.0 + g)
    delta = g / (4.0 + g) * _series(c.alpha, r)
    return 2.0 * ber_mrc_bfsk(n - 1, g) - ber_mrc_bfsk(n - 1, g / 2.0) + delta


def _bfsk_step2(c, g):
    r = 4.0 / (4.0 + g)
    delta = 0.5 * g / (4.0 + g) * _series(c.beta, r)
    return ber_mrc_bfsk(c.n_rx, g / 2.0) - delta


def _bpsk_step1(c, g):
    n = c.n_rx
    delta = 0.5 * np.sqrt(g / (2.0 + g)) * _series(c.sigma, 1.0 / (2.0 + g))
    return 2.0 * ber_mrc_bpsk(n - 1, g) - ber_mrc_bpsk(n - 1, g / 2.0) + delta


def _bpsk_step2(c, g):
    delta = 0.5 * np.sqrt(g / (2.0 + g)) * _series(c.d, 1.0 / (2.0 + g))
    return ber_mrc_bpsk(c.n_rx, g / 2.0) - delta


_STEP_FORMS = {
    (COHERENT, 1): _bpsk_step1,
    (COHERENT, 2): _bpsk_step2,
    (NONCOHERENT, 1): _bfsk_step1,
    (NONCOHERENT, 2): _bfsk_step2,
}


def ber_step(step, modulation, n_rx, gamma0, coeffs=None):
    """Average BER at detection step 1 or 2 (no error propagation)."""
    if step not in (1, 2):
        raise DomainError(f"step must be 1 or 2, got {step}")
    c = _resolve(n_rx, coeffs)
    g = _nonneg(gamma0, "gamma0")
    scale, arg = _map_argument(modulation, g)
    value = scale * _STEP_FORMS[modulation.family, step](c, arg)
    return _out(value, gamma0)


def ber_step1(modulation, n_rx, gamma0, coeffs=None):
    """Average BER of the first detected stream."""
    return ber_step(1, modulation, n_rx, gamma0, coeffs)


def ber_step2(modulation, n_rx, gamma0, coeffs=None):
    """Average BER of the second detected stream."""
    return ber_step(2, modulation, n_rx, gamma0, coeffs)


def ber_asymptote(step, modulation, n_rx, gamma0):
    """High-SNR asymptote of the per-step average BER.

    BFSK: ``(1/g)^(n-1) / 2`` and ``(2/g)^n``.
    BPSK: ``C(2n-3, n-1) / (8g)^(n-1)`` and ``2 C(2n-1, n) / (4g)^n``.
    """
    n = _check_n(n_rx)
    g = np.asarray(gamma0, dtype=float)
    if np.any(np.isnan(g)) or np.any(g <= 0):
        raise DomainError(f"gamma0 must be positive, got {gamma0}")
    if step not in (1, 2):
        raise DomainError(f"step must be 1 or 2, got {step}")
    scale, arg = _map_argument(modulation, g)
    if modulation.coherent:
        if step == 1:
            base = comb(2 * n - 3, n - 1) / (8.0 * arg) ** (n - 1)
        else:
            base = 2.0 * comb(2 * n - 1, n) / (4.0 * arg) ** n
    else:
        base = 0.5 * (1.0 / arg) ** (n - 1) if step == 1 else (2.0 / arg) ** n
    return _out(scale * base, gamma0)


def bler(modulation, n_rx, gamma0, coeffs=None):
    """Average block error rate ``1 - (1 - P1)(1 - P2)`` (independent step errors)."""
    p1 = ber_step1(modulation, n_rx, gamma0, coeffs)
    p2 = ber_step2(modulation, n_rx, gamma0, coeffs)
    return p1 + p2 - p1 * p2


# -- 2x2 closed forms -------------------------------------------------------
#
# These explicit n = 2 expressions lose several digits to cancellation in
# double precision at large gamma0, so they are evaluated with mpmath.

_MP_DPS = 50


def _mp_map(fn, gamma0):
    g = _nonneg(gamma0, "gamma0")
    with mpmath.workdps(_MP_DPS):
        values = [float(fn(mpmath.mpf(float(v)))) for v in np.ravel(g)]
    return _out(np.reshape(values, g.shape), gamma0)


def ber_bfsk_2x2_step2(gamma0):
    """``4/(4+g)^2 + 16/(4+g)^3``: second-step BFSK BER for ``n = 2``."""
    return _mp_map(lambda g: 4 / (4 + g) ** 2 + 16 / (4 + g) ** 3, gamma0)


def ber_bpsk_2x2(step, gamma0, uncorrected=False):
    """Per-step BPSK BER for ``n = 2`` written out explicitly.

    Parameters
    ----------
    step : {1, 2}
    gamma0 : float or array_like
    uncorrected : bool
        Diagnostics only. Use ``(4 + g)^2`` instead of ``(2 + g)^2`` in the
        last second-step term. That variant disagrees with direct numerical
        integration and with the general-n expression.
    """
    sqrt = mpmath.sqrt
    if step == 1:
        def fn(g):
            return (mpmath.mpf(1) / 2 - sqrt(g / (1 + g))
                    + sqrt(g / (2 + g)) / 2 * (1 + 1 / (4 * (2 + g))))
    elif step == 2:
        def fn(g):
            tail = 4 + g if uncorrected else 2 + g
            return (mpmath.mpf(1) / 2
                    - sqrt(g / (2 + g)) / 2 * (1 + 1 / (2 + g) + 3 / (4 * tail**2)))
    else:
        raise DomainError(f"step must be 1 or 2, got {step}")
    return _mp_map(fn, gamma0)


@dataclass(frozen=True)
class PerformancePoint:
    gamma0: float
    pe_step1: float
    pe_step2: float
    bler: float
    pe_step1_asymptote: float
    pe_step2_asymptote: float

    @property
    def snr_db(self):
        return 10.0 * np.log10(self.gamma0)


def performance_point(modulation, n_rx, gamma0, coeffs=None):
    """All analytic quantities at one average SNR (``gamma0 > 0``)."""
    p1 = ber_step1(modulation, n_rx, gamma0, coeffs)
    p2 = ber_step2(modulation, n_rx, gamma0, coeffs)
    return PerformancePoint(
        gamma0=float(gamma0),
        pe_step1=p1,
        pe_step2=p2,
        bler=p1 + p2 - p1 * p2,
        pe_step1_asymptote=ber_asymptote(1, modulation, n_rx, gamma0),
        pe_step2_asymptote=ber_asymptote(2, modulation, n_rx, gamma0),
    )
