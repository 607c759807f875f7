"""Reproducible sampling of Rayleigh channels, AWGN and BPSK symbols.

Every random draw goes through an :class:`RngStream`, a Philox
counter-based generator keyed by ``(master_seed, partition_index,
substream)``. Monte Carlo runs split their trials into fixed-size
partitions, each with its own stream, so results do not depend on how many
workers process the partitions.

Normalization: unit symbol power and unit-variance channel entries, so the
average per-branch SNR is ``gamma0 = 1 / sigma0_sq``.
"""

from dataclasses import dataclass, field

import numpy as np

SEED_MAX = 2**64 - 1


@dataclass
class RngStream:
    """Deterministic random stream for one partition of a run.

    Identical ``(master_seed, partition_index, substream)`` triples give
    bit-identical sequences; distinct triples give independent streams
    (``numpy.random.SeedSequence`` spawn keys).
    """

    master_seed: int
    partition_index: int = 0
    substream: int = 0
    generator: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        if not 0 <= self.master_seed <= SEED_MAX:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.master_seed}")
        if self.partition_index < 0 or self.substream < 0:
            raise ValueError("partition_index and substream must be non-negative")
        ss = np.random.SeedSequence(self.master_seed,
                                    spawn_key=(self.substream, self.partition_index))
        self.generator = np.random.Generator(np.random.Philox(ss))

    @property
    def counter(self):
        """Current Philox counter (advances as samples are drawn)."""
        return int(self.generator.bit_generator.state["state"]["counter"][0])


@dataclass(frozen=True)
class NoiseParams:
    """Noise variance per complex receive sample and the matching average SNR."""

    sigma0_sq: float

    def __post_init__(self):
        if not (np.isfinite(self.sigma0_sq) and self.sigma0_sq > 0):
            raise ValueError(f"sigma0_sq must be positive and finite, got {self.sigma0_sq}")

    @property
    def gamma0(self):
        return 1.0 / self.sigma0_sq

    @classmethod
    def from_gamma0(cls, gamma0):
        return cls(1.0 / gamma0)

    @classmethod
    def from_db(cls, snr_db):
        return cls.from_gamma0(db_to_linear(snr_db))


@dataclass(frozen=True)
class SystemDims:
    """Receive and transmit antenna counts, ``n_rx >= m_tx >= 2``."""

    n_rx: int
    m_tx: int = 2

    def __post_init__(self):
        if self.m_tx < 2 or self.n_rx < self.m_tx:
            raise ValueError(f"need n_rx >= m_tx >= 2, got n_rx={self.n_rx}, m_tx={self.m_tx}")


def db_to_linear(snr_db):
    """``10 ** (dB / 10)``, the only dB convention used in the package."""
    return 10.0 ** (np.asarray(snr_db, dtype=float) / 10.0)


def sample_complex_gaussian(stream, variance=1.0, size=None):
    """Draw circular complex Gaussian samples CN(0, variance).

    Real and imaginary parts are independent N(0, variance/2). The real
    parts of the whole batch are drawn before the imaginary parts.
    """
    if not variance > 0:
        raise ValueError(f"variance must be positive, got {variance}")
    scale = np.sqrt(variance / 2.0)
    g = stream.generator
    re = g.standard_normal(size)
    im = g.standard_normal(size)
    return scale * (re + 1j * im)


def sample_channel(dims, stream, batch=None):
    """Rayleigh channel matrix with i.i.d. CN(0, 1) entries.

    Returns shape ``(n_rx, m_tx)``, or ``(batch, n_rx, m_tx)`` when `batch`
    is given.
    """
    shape = (dims.n_rx, dims.m_tx) if batch is None else (batch, dims.n_rx, dims.m_tx)
    return sample_complex_gaussian(stream, 1.0, shape)


def sample_noise(dim, params, stream, batch=None):
    """AWGN vector with i.i.d. CN(0, sigma0_sq) entries."""
    shape = (dim,) if batch is None else (batch, dim)
    return sample_complex_gaussian(stream, params.sigma0_sq, shape)


def sample_bpsk_symbols(count, stream, batch=None):
    """Uniform i.i.d. symbols from {+1, -1} (real-valued float array)."""
    if count < 1:
        raise ValueError(f"count must be at least 1, got {count}")
    shape = (count,) if batch is None else (batch, count)
    bits = stream.generator.integers(0, 2, size=shape, dtype=np.int8)
    return 1.0 - 2.0 * bits
