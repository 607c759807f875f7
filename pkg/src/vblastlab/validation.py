"""Self-check suite: closed forms against independent numerical routes.

Three groups of checks are run:

* algebraic: special cases of the general expressions against their
  explicit n = 2 forms, and the two forms of the second-step CDF;
* numerical integration: first-step CDF against an order-statistic
  integral, and every per-step average BER against direct integration of the
  conditional BER over the outage CDF;
* statistical: Monte Carlo runs of the detector against the analytic
  distributions and error rates.

Each check records a measured value, a threshold and a verdict so that the
report can be diffed between builds.
"""

import json
from dataclasses import asdict, dataclass, field
from math import sqrt

import numpy as np
from scipy import integrate, stats

from . import analytic as an
from . import montecarlo as mc
from .analytic import BFSK, BPSK

DEFAULT_TRIALS = 10**6
DEFAULT_SEED = 1

IDENTITY_RTOL = 1e-12
ORDER_STAT_ATOL = 1e-10
QUADRATURE_ATOL = 1e-7
KS_COEFF = 1.63       # 1% critical value of the one-sample KS test, times sqrt(N)
SE_LIMIT = 3.0
CROSS_COEFF = 4.0     # |E[xi1* xi2]| / sigma0^2 must stay below CROSS_COEFF / sqrt(N)
HIGH_SNR_DB = 40.0


@dataclass
class Check:
    name: str
    value: float
    threshold: object
    relation: str  # "<=", ">" or "in"
    passed: bool = field(init=False)

    def __post_init__(self):
        v = float(self.value)
        if self.relation == "<=":
            self.passed = bool(v <= self.threshold)
        elif self.relation == ">":
            self.passed = bool(v > self.threshold)
        elif self.relation == "in":
            lo, hi = self.threshold
            self.passed = bool(lo <= v <= hi)
        else:
            raise ValueError(f"unknown relation {self.relation!r}")
        self.value = v


@dataclass
class ValidationReport:
    seed: int
    trials: int
    checks: list
    settings: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    @property
    def failures(self):
        return [c for c in self.checks if not c.passed]

    def to_dict(self):
        return {
            "seed": self.seed,
            "trials": self.trials,
            "settings": self.settings,
            "passed": self.passed,
            "checks": [asdict(c) for c in self.checks],
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, data):
        checks = []
        for item in data["checks"]:
            threshold = item["threshold"]
            if item["relation"] == "in":
                threshold = tuple(threshold)
            check = Check(item["name"], item["value"], threshold, item["relation"])
            if check.passed != item["passed"]:
                raise ValueError(f"inconsistent verdict for check {item['name']!r}")
            checks.append(check)
        return cls(data["seed"], data["trials"], checks, data.get("settings", {}))

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


# -- independent numerical routes -------------------------------------------

def step1_cdf_order_statistic(n_rx, x):
    """First-step CDF from the order-statistic representation.

    With ``X1, X2`` i.i.d. Gamma(n, 1) column powers and ``S`` the squared
    sine of the angle between the columns (Beta(n-1, 1), independent of the
    powers), the normalized first-step SNR is ``max(X1, X2) S``. Hence
    ``F1(x) = int min(1, (x/y)^(n-1)) f_max(y) dy``.
    """
    g = stats.gamma(n_rx)

    def f_max(y):
        return 2.0 * g.cdf(y) * g.pdf(y)

    if x <= 0:
        return 0.0
    below = integrate.quad(f_max, 0.0, x, epsabs=1e-14, epsrel=1e-12, limit=200)[0]
    above = integrate.quad(lambda y: (x / y) ** (n_rx - 1) * f_max(y), x, np.inf,
                           epsabs=1e-14, epsrel=1e-12, limit=200)[0]
    return below + above


def quadrature_ber(modulation, cdf, gamma0):
    """``-int P_e'(gamma) F(gamma / gamma0) dgamma`` by adaptive quadrature.

    For coherent modulations the substitution ``gamma = t^2`` removes the
    ``1/sqrt(gamma)`` singularity of the derivative.
    """
    a, b = modulation.alpha, modulation.beta
    if modulation.coherent:
        def integrand(t):
            return b * sqrt(a) * np.exp(-a * t * t / 2.0) / sqrt(2.0 * np.pi) * cdf(t * t / gamma0)
    else:
        def integrand(g):
            return a * b * np.exp(-a * g) * cdf(g / gamma0)
    return integrate.quad(integrand, 0.0, np.inf, epsabs=1e-13, epsrel=1e-11, limit=500)[0]


# -- check groups ------------------------------------------------------------

def _rel(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b) / np.abs(b)))


def _coeffs(overrides, n):
    return (overrides or {}).get(n) or an.coefficients(n)


def identity_checks(overrides=None):
    checks = []
    x = np.linspace(0.01, 20.0, 400)
    for n in (2, 3, 4, 5):
        dual = an.outage_cdf_step2_series(n, x, _coeffs(overrides, n))
        checks.append(Check(f"step2_cdf_dual_form_n{n}", _rel(dual, an.outage_cdf_step2(n, x)),
                            IDENTITY_RTOL, "<="))
    g = np.logspace(-2, 4, 121)
    c2 = _coeffs(overrides, 2)
    checks.append(Check("bfsk_n2_step2_explicit_form",
                        _rel(an.ber_step2(BFSK, 2, g, c2), an.ber_bfsk_2x2_step2(g)),
                        IDENTITY_RTOL, "<="))
    for step in (1, 2):
        checks.append(Check(f"bpsk_n2_step{step}_explicit_form",
                            _rel(an.ber_step(step, BPSK, 2, g, c2), an.ber_bpsk_2x2(step, g)),
                            IDENTITY_RTOL, "<="))
    explicit = {
        ("bpsk", 1): 1.0 / (8.0 * g),
        ("bpsk", 2): 3.0 / (8.0 * g**2),
        ("bfsk", 1): 1.0 / (2.0 * g),
        ("bfsk", 2): 4.0 / g**2,
    }
    for (name, step), ref in explicit.items():
        mod = BPSK if name == "bpsk" else BFSK
        checks.append(Check(f"{name}_n2_step{step}_asymptote_form",
                            _rel(an.ber_asymptote(step, mod, 2, g), ref), IDENTITY_RTOL, "<="))
    return checks


def integration_checks(overrides=None):
    checks = []
    grid = (0.01, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0)
    for n in (2, 3, 4, 5):
        c = _coeffs(overrides, n)
        err = max(abs(an.outage_cdf_step1(n, x, c) - step1_cdf_order_statistic(n, x)) for x in grid)
        checks.append(Check(f"step1_cdf_order_statistic_n{n}", err, ORDER_STAT_ATOL, "<="))
    for mod in (BFSK, BPSK):
        for n in (2, 3, 4):
            c = _coeffs(overrides, n)
            cdfs = {1: lambda x, n=n, c=c: an.outage_cdf_step1(n, x, c),
                    2: lambda x, n=n: an.outage_cdf_step2(n, x)}
            for step in (1, 2):
                for g in (1.0, 10.0, 100.0):
                    err = abs(an.ber_step(step, mod, n, g, c) - quadrature_ber(mod, cdfs[step], g))
                    checks.append(Check(f"quadrature_{mod.name}_n{n}_step{step}_g{g:g}", err,
                                        QUADRATURE_ATOL, "<="))
    # The (4 + g)^2 variant of the explicit n = 2 second-step form must be rejected.
    cdf2 = lambda x: an.outage_cdf_step2(2, x)  # noqa: E731
    err = abs(an.ber_bpsk_2x2(2, 10.0, uncorrected=True) - quadrature_ber(BPSK, cdf2, 10.0))
    checks.append(Check("quadrature_rejects_bpsk_n2_step2_alt_denominator", err,
                        QUADRATURE_ATOL, ">"))
    return checks


def high_snr_checks(overrides=None):
    checks = []
    g = 10.0 ** (HIGH_SNR_DB / 10.0)
    for mod in (BFSK, BPSK):
        for n in (2, 3):
            c = _coeffs(overrides, n)
            p1 = an.ber_step1(mod, n, g, c)
            p2 = an.ber_step2(mod, n, g, c)
            for step, p in ((1, p1), (2, p2)):
                checks.append(Check(f"asymptote_ratio_{mod.name}_n{n}_step{step}",
                                    p / an.ber_asymptote(step, mod, n, g), (0.95, 1.05), "in"))
            checks.append(Check(f"bler_domination_{mod.name}_n{n}",
                                an.bler(mod, n, g, c) / p1, (1.0, 1.01), "in"))
            checks.append(Check(f"ordering_gain_step1_{mod.name}_n{n}",
                                p1 / an.ber_mrc(mod, n - 1, 2.0 * g), (0.9, 1.1), "in"))
            checks.append(Check(f"ordering_loss_step2_{mod.name}_n{n}",
                                p2 / an.ber_mrc(mod, n, g), (1.8, 2.2), "in"))
    return checks


def statistical_checks(trials=DEFAULT_TRIALS, seed=DEFAULT_SEED, workers=1, overrides=None):
    checks = []
    skipped = 0
    for n in (2, 3):
        cfg = mc.SimConfig(n, (10.0,), trials, seed=seed, workers=workers)
        s = mc.sample_ordered_snrs(cfg)
        skipped += s.skipped
        x = s.normalized
        c = _coeffs(overrides, n)
        cdfs = {1: lambda v: an.outage_cdf_step1(n, v, c), 2: lambda v: an.outage_cdf_step2(n, v)}
        for step in (1, 2):
            checks.append(Check(f"snr_cdf_ks_n{n}_step{step}", mc.ks_distance(x[:, step - 1], cdfs[step]),
                                KS_COEFF / sqrt(x.shape[0]), "<="))
        factors = np.array([n - 1, n], dtype=float)
        checks.append(Check(f"snr_definitions_identity_n{n}",
                            _rel(factors * s.snr_powerwise, s.snr), IDENTITY_RTOL, "<="))

    nc = mc.estimate_noise_crosscorr(mc.SimConfig(2, (10.0,), trials, seed=seed, workers=workers))
    checks.append(Check("weight_orthogonality", nc.max_weight_inner, 1e-10, "<="))
    checks.append(Check("noise_cross_correlation", nc.normalized_cross,
                        CROSS_COEFF / sqrt(nc.trials), "<="))
    for i in (0, 1):
        checks.append(Check(f"noise_power_step{i + 1}", abs(nc.power[i] / nc.sigma0_sq - 1.0),
                            0.01, "<="))

    sym = mc.run_symbol_level(mc.SimConfig(2, (5.0, 10.0, 15.0), trials, seed=seed, workers=workers))
    skipped += sym.skipped
    c2 = _coeffs(overrides, 2)
    for p in sym.points:
        for step, est in ((1, p.ber1), (2, p.ber2)):
            ref = an.ber_step(step, BPSK, 2, p.gamma0, c2)
            se = sqrt(ref * (1.0 - ref) / p.trials)
            checks.append(Check(f"ber_symbol_bpsk_n2_{p.snr_db:g}dB_step{step}",
                                abs(est.value - ref) / se, SE_LIMIT, "<="))

    for n in (2, 3):
        cfg = mc.SimConfig(n, (5.0, 10.0, 15.0), trials, seed=seed, modulation=BFSK,
                           estimator=mc.SEMIANALYTIC, workers=workers)
        res = mc.run_semianalytic_ber(cfg)
        skipped += res.skipped
        c = _coeffs(overrides, n)
        for p in res.points:
            for step, est in ((1, p.ber1), (2, p.ber2)):
                ref = an.ber_step(step, BFSK, n, p.gamma0, c)
                checks.append(Check(f"ber_semianalytic_bfsk_n{n}_{p.snr_db:g}dB_step{step}",
                                    abs(est.value - ref) / est.stderr, SE_LIMIT, "<="))

    base = mc.SimConfig(2, (10.0,), trials, seed=seed, workers=workers)
    genie = mc.block_error_indicators(base)
    prop = mc.block_error_indicators(mc.SimConfig(2, (10.0,), trials, seed=seed, workers=workers,
                                                  mode="propagate"))
    checks.append(Check("bler_mode_invariance_mismatches", int(np.sum(genie != prop)), 0, "<="))
    checks.append(Check("skipped_degenerate_trials", skipped, 0, "<="))
    return checks


def run_validation(trials=DEFAULT_TRIALS, seed=DEFAULT_SEED, workers=1, overrides=None,
                   statistical=True):
    """Run every check group and collect a :class:`ValidationReport`.

    Parameters
    ----------
    overrides : dict, optional
        ``{n_rx: OrderedSnrCoefficients}`` replacing the computed tables,
        used to confirm that corrupted coefficients are detected.
    """
    checks = identity_checks(overrides) + integration_checks(overrides) + high_snr_checks(overrides)
    if statistical:
        checks += statistical_checks(trials, seed, workers, overrides)
    settings = {"statistical": statistical}
    if overrides:
        settings["coefficient_overrides"] = {
            str(n): {f"a{i}": float(v) for i, v in c.a.items()} for n, c in overrides.items()
        }
    return ValidationReport(seed=seed, trials=trials, checks=checks, settings=settings)
