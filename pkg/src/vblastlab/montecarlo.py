"""Monte Carlo estimators for the ordered ZF-MRC V-BLAST chain.

Trials are split into partitions of ``PARTITION_SIZE`` consecutive trials.
Partition ``k`` of SNR point ``p`` draws from ``RngStream(seed, k, p)``, so
the random numbers seen by each trial depend only on ``(seed, trials)``.
Partitions may run on any number of worker processes; partial sums are
merged in partition order, which makes every estimate bit-identical for any
worker count.

Within a partition the draws happen in a fixed order: channel, symbols,
noise. Estimators that need fewer variables stop early, so the channels of
a given partition are shared by all estimators.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from statistics import NormalDist

import numpy as np

from .analytic import BPSK, ModulationSpec
from .channel import (RngStream, SystemDims, db_to_linear, sample_bpsk_symbols,
                      sample_channel, sample_noise, NoiseParams)
from .detector import (GENIE, MODES, OPTIMAL, ORDERINGS, detect_batch,
                       equal_gain_weights, ordered_snrs)

PARTITION_SIZE = 2**16
CONFIDENCE = 0.95
SYMBOL = "symbol"
SEMIANALYTIC = "semianalytic"
ESTIMATORS = (SYMBOL, SEMIANALYTIC)


@dataclass(frozen=True)
class SimConfig:
    """Configuration of a Monte Carlo sweep (two transmit antennas)."""

    n_rx: int
    gamma0_db: tuple
    trials: int
    seed: int = 0
    modulation: ModulationSpec = BPSK
    mode: str = GENIE
    estimator: str = SYMBOL
    ordering: str = OPTIMAL
    workers: int = 1

    def __post_init__(self):
        SystemDims(self.n_rx, 2)
        object.__setattr__(self, "gamma0_db", tuple(float(v) for v in np.atleast_1d(self.gamma0_db)))
        db = np.asarray(self.gamma0_db)
        if db.size == 0 or not np.all(np.isfinite(db)) or np.any(np.diff(db) < 0):
            raise ValueError("gamma0_db must be a non-empty, finite, sorted grid")
        if self.trials < 1:
            raise ValueError(f"trials must be at least 1, got {self.trials}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.estimator not in ESTIMATORS:
            raise ValueError(f"estimator must be one of {ESTIMATORS}")
        if self.ordering not in ORDERINGS:
            raise ValueError(f"ordering must be one of {ORDERINGS}")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")

    @property
    def dims(self):
        return SystemDims(self.n_rx, 2)

    @property
    def gamma0(self):
        return db_to_linear(self.gamma0_db)


def partitions(trials, size=PARTITION_SIZE):
    """``(index, count)`` pairs covering `trials` trials."""
    full, rest = divmod(trials, size)
    out = [(k, size) for k in range(full)]
    if rest:
        out.append((full, rest))
    return out


def _run_partitions(worker, tasks, workers):
    if workers <= 1 or len(tasks) <= 1:
        return [worker(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
        return list(pool.map(worker, tasks))


def _draw(config, point, part, count, need):
    """Draw channel (and optionally symbols and noise) for one partition."""
    stream = RngStream(config.seed, part, point)
    H = sample_channel(config.dims, stream, batch=count)
    if need == "channel":
        return H, None, None
    q = sample_bpsk_symbols(2, stream, batch=count)
    sigma0_sq = 1.0 / float(db_to_linear(config.gamma0_db[point]))
    v = sample_noise(config.n_rx, NoiseParams(sigma0_sq), stream, batch=count)
    return H, q, v


# -- intervals and goodness of fit -------------------------------------------

def _z(confidence):
    return NormalDist().inv_cdf(0.5 + confidence / 2.0)


def wilson_interval(errors, trials, confidence=CONFIDENCE):
    """Wilson score interval for a binomial proportion.

    >>> lo, hi = wilson_interval(50, 100)
    >>> round(lo, 3), round(hi, 3)
    (0.404, 0.596)
    """
    if trials < 1 or not 0 <= errors <= trials:
        raise ValueError(f"need 0 <= errors <= trials and trials >= 1, got {errors}/{trials}")
    z = _z(confidence)
    p = errors / trials
    denom = 1.0 + z * z / trials
    centre = (p + z * z / (2 * trials)) / denom
    half = z * np.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    lo = 0.0 if errors == 0 else max(0.0, centre - half)
    hi = 1.0 if errors == trials else min(1.0, centre + half)
    return float(lo), float(hi)


def ks_statistic(empirical, analytic):
    """Largest absolute gap between two CDFs tabulated on the same grid."""
    empirical = np.asarray(empirical, dtype=float)
    analytic = np.asarray(analytic, dtype=float)
    if empirical.shape != analytic.shape:
        raise ValueError(f"grid mismatch: {empirical.shape} vs {analytic.shape}")
    if empirical.size == 0:
        raise ValueError("empty grid")
    return float(np.max(np.abs(empirical - analytic)))


def ks_distance(samples, cdf):
    """Exact one-sample Kolmogorov-Smirnov distance of `samples` to `cdf`."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    if n == 0:
        raise ValueError("no samples")
    F = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))


# -- result types ----------------------------------------------------------

@dataclass(frozen=True)
class Estimate:
    value: float
    lo: float
    hi: float
    stderr: float


def _binomial_estimate(count, trials, confidence=CONFIDENCE):
    p = count / trials
    lo, hi = wilson_interval(count, trials, confidence)
    return Estimate(p, lo, hi, float(np.sqrt(p * (1 - p) / trials)))


def _mean_estimate(total, total_sq, trials, confidence=CONFIDENCE):
    mean = total / trials
    var = max(total_sq / trials - mean * mean, 0.0)
    se = float(np.sqrt(var / trials))
    half = _z(confidence) * se
    return Estimate(mean, max(0.0, mean - half), min(1.0, mean + half), se)


@dataclass(frozen=True)
class PointResult:
    snr_db: float
    gamma0: float
    trials: int
    ber1: Estimate
    ber2: Estimate
    bler: Estimate
    step_errors: tuple = None
    block_errors: int = None
    skipped: int = 0


@dataclass(frozen=True)
class SimResult:
    config: SimConfig
    points: tuple

    @property
    def skipped(self):
        return sum(p.skipped for p in self.points)


# -- symbol-level simulation -----------------------------------------------

def _symbol_partition(task):
    config, point, part, count = task
    H, q, v = _draw(config, point, part, count, "all")
    sigma0_sq = 1.0 / float(db_to_linear(config.gamma0_db[point]))
    det = detect_batch(H, q, v, sigma0_sq, config.mode, config.ordering)
    ok = ~det.snrs.degenerate
    errors = det.step_errors[ok]
    return (np.sum(errors, axis=0).astype(np.int64),
            int(np.sum(np.any(errors, axis=1))),
            int(np.sum(ok)),
            int(count - np.sum(ok)))


def run_symbol_level(config):
    """Count symbol and block errors of the full BPSK detection chain.

    Per trial a channel, two BPSK symbols and a noise vector are drawn and
    detected. Per-step counts are unconditional; in genie mode they carry no
    error propagation. Intervals are Wilson 95% intervals.
    """
    if config.modulation != BPSK:
        raise ValueError("symbol-level simulation supports BPSK only")
    points = []
    for p, snr_db in enumerate(config.gamma0_db):
        tasks = [(config, p, k, c) for k, c in partitions(config.trials)]
        parts = _run_partitions(_symbol_partition, tasks, config.workers)
        step_err = np.zeros(2, dtype=np.int64)
        block_err = used = skipped = 0
        for e, b, u, s in parts:
            step_err += e
            block_err += b
            used += u
            skipped += s
        points.append(PointResult(
            snr_db=snr_db,
            gamma0=float(db_to_linear(snr_db)),
            trials=used,
            ber1=_binomial_estimate(int(step_err[0]), used),
            ber2=_binomial_estimate(int(step_err[1]), used),
            bler=_binomial_estimate(block_err, used),
            step_errors=(int(step_err[0]), int(step_err[1])),
            block_errors=block_err,
            skipped=skipped,
        ))
    return SimResult(config, tuple(points))


def _indicator_partition(task):
    config, point, part, count = task
    H, q, v = _draw(config, point, part, count, "all")
    sigma0_sq = 1.0 / float(db_to_linear(config.gamma0_db[point]))
    return detect_batch(H, q, v, sigma0_sq, config.mode, config.ordering).block_errors


def block_error_indicators(config, point=0):
    """Per-trial block-error flags at one SNR point, in trial order."""
    tasks = [(config, point, k, c) for k, c in partitions(config.trials)]
    return np.concatenate(_run_partitions(_indicator_partition, tasks, config.workers))


# -- semi-analytic simulation ----------------------------------------------

def _semianalytic_partition(task):
    config, point, part, count = task
    H, _, _ = _draw(config, point, part, count, "channel")
    gamma0 = float(db_to_linear(config.gamma0_db[point]))
    snrs = ordered_snrs(H, 1.0 / gamma0, config.ordering)
    ok = ~snrs.degenerate
    pe = config.modulation.conditional_ber(snrs.snr[ok])
    block = pe[:, 0] + pe[:, 1] - pe[:, 0] * pe[:, 1]
    values = np.column_stack([pe, block])
    return (np.sum(values, axis=0), np.sum(values * values, axis=0),
            int(np.sum(ok)), int(count - np.sum(ok)))


def run_semianalytic_ber(config):
    """Average the conditional BER over sampled channels.

    Only channels are drawn; each trial contributes ``P_e(gamma_i)`` for both
    ordered steps and ``1 - (1 - P_e1)(1 - P_e2)`` for the block. Intervals
    use the normal approximation on these per-trial values.
    """
    points = []
    for p, snr_db in enumerate(config.gamma0_db):
        tasks = [(config, p, k, c) for k, c in partitions(config.trials)]
        parts = _run_partitions(_semianalytic_partition, tasks, config.workers)
        total = np.zeros(3)
        total_sq = np.zeros(3)
        used = skipped = 0
        for s, s2, u, k in parts:
            total = total + s
            total_sq = total_sq + s2
            used += u
            skipped += k
        est = [_mean_estimate(total[i], total_sq[i], used) for i in range(3)]
        points.append(PointResult(
            snr_db=snr_db, gamma0=float(db_to_linear(snr_db)), trials=used,
            ber1=est[0], ber2=est[1], bler=est[2], skipped=skipped,
        ))
    return SimResult(config, tuple(points))


def simulate(config):
    """Dispatch on ``config.estimator``."""
    if config.estimator == SEMIANALYTIC:
        return run_semianalytic_ber(config)
    return run_symbol_level(config)


# -- SNR distribution ------------------------------------------------------

@dataclass(frozen=True)
class OrderedSnrSamples:
    """Per-trial SNRs at the first SNR point of a config, in trial order."""

    gamma0: float
    snr: np.ndarray            # (N, 2) ZF-MRC SNR per step
    snr_powerwise: np.ndarray  # (N, 2)
    skipped: int

    @property
    def normalized(self):
        """``gamma_i / gamma0``."""
        return self.snr / self.gamma0


def _snr_partition(task):
    config, point, part, count = task
    H, _, _ = _draw(config, point, part, count, "channel")
    gamma0 = float(db_to_linear(config.gamma0_db[point]))
    snrs = ordered_snrs(H, 1.0 / gamma0, config.ordering)
    ok = ~snrs.degenerate
    return snrs.snr[ok], snrs.snr_powerwise[ok], int(count - np.sum(ok))


def sample_ordered_snrs(config):
    """Collect both SNR definitions for every trial of the first SNR point."""
    tasks = [(config, 0, k, c) for k, c in partitions(config.trials)]
    parts = _run_partitions(_snr_partition, tasks, config.workers)
    return OrderedSnrSamples(
        gamma0=float(config.gamma0[0]),
        snr=np.concatenate([p[0] for p in parts]),
        snr_powerwise=np.concatenate([p[1] for p in parts]),
        skipped=sum(p[2] for p in parts),
    )


@dataclass(frozen=True)
class SnrCdfEstimate:
    grid: np.ndarray
    cdf: np.ndarray  # (2, len(grid)), row i is step i + 1
    trials: int


def estimate_snr_cdf(config, grid):
    """Empirical ``Pr{gamma_i / gamma0 < x}`` on `grid` for both steps."""
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or np.any(grid < 0) or np.any(np.diff(grid) < 0):
        raise ValueError("grid must be a sorted 1D array of non-negative values")
    samples = sample_ordered_snrs(config)
    x = samples.normalized
    n = x.shape[0]
    cdf = np.stack([np.searchsorted(np.sort(x[:, i]), grid, side="left") / n for i in (0, 1)])
    return SnrCdfEstimate(grid, cdf, n)


# -- after-combining noise -------------------------------------------------

ZF_MRC = "zf-mrc"
EQUAL_GAIN = "equal-gain"


@dataclass(frozen=True)
class NoiseCorrelation:
    """Sample statistics of the after-combining noises of both steps."""

    sigma0_sq: float
    cross: complex          # mean of conj(xi_1) xi_2
    cross_halfwidth: float  # 95% half-width on |cross| / sigma0^2
    power: tuple            # mean |xi_i|^2 per step
    max_weight_inner: float  # max over trials of |w_1^+ w_2|
    trials: int

    @property
    def normalized_cross(self):
        return abs(self.cross) / self.sigma0_sq


def _noise_partition(task):
    config, point, part, count, weights = task
    H, q, v = _draw(config, point, part, count, "all")
    sigma0_sq = 1.0 / float(db_to_linear(config.gamma0_db[point]))
    snrs = ordered_snrs(H, sigma0_sq, config.ordering)
    w1, w2 = snrs.weights if weights == ZF_MRC else equal_gain_weights(snrs)
    xi1 = np.einsum("bn,bn->b", w1.conj(), v)
    xi2 = np.einsum("bn,bn->b", w2.conj(), v)
    prod = xi1.conj() * xi2
    inner = np.abs(np.einsum("bn,bn->b", w1.conj(), w2))
    return (complex(np.sum(prod)), float(np.sum(np.abs(prod) ** 2)),
            float(np.sum(np.abs(xi1) ** 2)), float(np.sum(np.abs(xi2) ** 2)),
            float(np.max(inner)), count)


def estimate_noise_crosscorr(config, weights=ZF_MRC):
    """Estimate ``E[conj(xi_1) xi_2]`` and ``E|xi_i|^2`` at the first SNR point.

    ``weights='equal-gain'`` swaps in the equal-gain combiners of
    :func:`vblastlab.detector.equal_gain_weights`, whose noises are
    correlated.
    """
    if weights not in (ZF_MRC, EQUAL_GAIN):
        raise ValueError(f"weights must be {ZF_MRC!r} or {EQUAL_GAIN!r}")
    tasks = [(config, 0, k, c, weights) for k, c in partitions(config.trials)]
    parts = _run_partitions(_noise_partition, tasks, config.workers)
    cross = 0j
    cross_sq = p1 = p2 = 0.0
    max_inner = 0.0
    n = 0
    for c, c2, a, b, mx, cnt in parts:
        cross += c
        cross_sq += c2
        p1 += a
        p2 += b
        max_inner = max(max_inner, mx)
        n += cnt
    sigma0_sq = 1.0 / float(config.gamma0[0])
    mean = cross / n
    halfwidth = _z(CONFIDENCE) * np.sqrt(max(cross_sq / n - abs(mean) ** 2, 0.0) / n) / sigma0_sq
    return NoiseCorrelation(sigma0_sq, mean, float(halfwidth), (p1 / n, p2 / n), max_inner, n)
