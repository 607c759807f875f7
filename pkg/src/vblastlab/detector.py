"""V-BLAST detection for two transmit streams with ZF-MRC combining.

Two implementations of the same chain live here:

* :func:`detect` processes one channel use with the explicit projection
  matrices from :mod:`vblastlab.linalg`. It returns a full
  :class:`DetectionTrace` and is the readable reference.
* :func:`detect_batch` and :func:`ordered_snrs` vectorize the m = 2 case over
  many channel uses for Monte Carlo work. Tests pin them to :func:`detect`.

Step 1 is the first detected stream. Its interferer is the other stream, so
its projection has rank ``n - 1``. Step 2 sees no remaining interferers.
"""

from dataclasses import dataclass

import numpy as np

from . import linalg
from .analytic import BPSK
from .channel import SystemDims

GENIE = "genie"
PROPAGATE = "propagate"
MODES = (GENIE, PROPAGATE)
OPTIMAL = "optimal"
FIXED = "fixed"
ORDERINGS = (OPTIMAL, FIXED)

# Relative size below which a projected column counts as zero.
DEGENERATE_RTOL = 1e-14


class DegenerateChannelError(ValueError):
    """Channel columns are (numerically) linearly dependent or zero."""


@dataclass(frozen=True)
class DetectionStep:
    stream_index: int
    h_perp: np.ndarray
    weight: np.ndarray
    snr_opt: float
    snr_powerwise: float
    decision: float
    after_combining_noise: complex


@dataclass(frozen=True)
class DetectionTrace:
    order: tuple
    steps: tuple
    mode: str

    @property
    def decisions(self):
        """Decisions indexed by transmit stream (not by step)."""
        out = np.empty(len(self.steps))
        for step in self.steps:
            out[step.stream_index] = step.decision
        return out


def zf_mrc_weight(h_perp):
    """Unit-norm combining vector ``h_perp / |h_perp|``."""
    h_perp = linalg.as_vector(h_perp)
    norm = np.linalg.norm(h_perp)
    if norm == 0.0:
        raise DegenerateChannelError("projected channel vector is zero")
    return h_perp / norm


def after_projection_snr(h_perp, params):
    """Output SNR with ZF-MRC weights, ``|h_perp|^2 / sigma0^2``."""
    return float(np.sum(np.abs(h_perp) ** 2)) / params.sigma0_sq


def powerwise_snr(h_perp, params, dims, step):
    """Power-wise (equal-gain) SNR, ``|h_perp|^2 / ((n - m + step) sigma0^2)``."""
    if not 1 <= step <= dims.m_tx:
        raise ValueError(f"step must be in 1..{dims.m_tx}, got {step}")
    noise_power = (dims.n_rx - dims.m_tx + step) * params.sigma0_sq
    return float(np.sum(np.abs(h_perp) ** 2)) / noise_power


def after_combining_noise(weight, noise):
    """``w^+ v``."""
    weight = linalg.as_vector(weight)
    noise = linalg.as_vector(noise)
    if weight.shape != noise.shape:
        raise ValueError(f"dimension mismatch: {weight.shape} vs {noise.shape}")
    return complex(np.vdot(weight, noise))


def _residual(H, k, others):
    try:
        return linalg.orthogonal_residual(H[:, k], H[:, list(others)])
    except linalg.SingularMatrixError as exc:
        raise DegenerateChannelError(str(exc)) from exc


def order_streams(H, params=None):
    """Detection order by largest after-projection SNR.

    For two streams, the stream whose component orthogonal to the other
    column is larger goes first. Ties go to the lower index. `params` is
    accepted for interface symmetry; the noise variance scales both
    candidates equally and does not affect the choice.
    """
    H = linalg.as_matrix(H)
    if H.shape[1] != 2:
        raise ValueError(f"expected an n x 2 channel, got {H.shape}")
    power = [np.sum(np.abs(_residual(H, k, [1 - k])) ** 2) for k in (0, 1)]
    scale = np.sum(np.abs(H) ** 2)
    if max(power) <= DEGENERATE_RTOL * scale:
        raise DegenerateChannelError("channel columns are linearly dependent")
    return (0, 1) if power[0] >= power[1] else (1, 0)


def _bpsk_decision(statistic):
    return 1.0 if statistic.real >= 0.0 else -1.0


def detect(H, received, true_symbols, params, modulation=BPSK, mode=GENIE,
           ordering=OPTIMAL, noise=None):
    """Run ordered ZF-MRC V-BLAST on one received vector.

    Parameters
    ----------
    H : array_like, shape (n, 2)
        Channel matrix.
    received : array_like, shape (n,)
        ``r = H q + v``.
    true_symbols : array_like, shape (2,)
        Transmitted symbols. Used for genie cancellation and to report the
        after-combining noise.
    params : NoiseParams
    modulation : ModulationSpec
        Only BPSK decisions are implemented.
    mode : {'genie', 'propagate'}
        Cancel the first stream with its true symbol or with the decision.
    ordering : {'optimal', 'fixed'}
        'fixed' detects stream 0 first; diagnostics only.
    noise : array_like, optional
        The noise vector `v`. Defaults to ``received - H q``.

    Returns
    -------
    DetectionTrace
    """
    if modulation != BPSK:
        raise ValueError("symbol decisions are implemented for BPSK only")
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    H = linalg.as_matrix(H)
    r = linalg.as_vector(received)
    q = np.asarray(true_symbols, dtype=float)
    n, m = H.shape
    if m != 2 or r.size != n or q.shape != (2,):
        raise ValueError("expected H (n x 2), received (n,), true_symbols (2,)")
    v = r - H @ q if noise is None else linalg.as_vector(noise)

    dims = SystemDims(n, m)
    if ordering == OPTIMAL:
        order = order_streams(H, params)
    elif ordering == FIXED:
        order = (0, 1)
    else:
        raise ValueError(f"ordering must be one of {ORDERINGS}, got {ordering!r}")

    steps = []
    r_current = r
    for i, k in enumerate(order, start=1):
        remaining = list(order[i:])
        P = linalg.projection_matrix(H[:, remaining], dim=n)
        h_perp = P @ H[:, k]
        w = zf_mrc_weight(h_perp)
        statistic = np.vdot(w, P @ r_current)
        decision = _bpsk_decision(statistic)
        steps.append(DetectionStep(
            stream_index=k,
            h_perp=h_perp,
            weight=w,
            snr_opt=after_projection_snr(h_perp, params),
            snr_powerwise=powerwise_snr(h_perp, params, dims, i),
            decision=decision,
            after_combining_noise=after_combining_noise(w, v),
        ))
        cancel = q[k] if mode == GENIE else decision
        r_current = r_current - H[:, k] * cancel
    return DetectionTrace(order=tuple(order), steps=tuple(steps), mode=mode)


# -- vectorized m = 2 path --------------------------------------------------

def _sqnorm(x):
    return np.einsum("bn,bn->b", x.real, x.real) + np.einsum("bn,bn->b", x.imag, x.imag)


def _inner(a, b):
    """Batched ``a^+ b``."""
    return np.einsum("bn,bn->b", a.conj(), b)


@dataclass
class OrderedSnrBatch:
    """Ordering results for a batch of n x 2 channels.

    Arrays are indexed ``[trial, step]`` where a step axis exists.
    """

    first: np.ndarray          # index of the stream detected first
    h_first: np.ndarray        # (N, n) first detected channel column
    h_second: np.ndarray       # (N, n) second detected channel column
    h_perp: np.ndarray         # (N, n) first column projected off the second
    weights: tuple             # (w1, w2), each (N, n)
    snr: np.ndarray            # (N, 2) ZF-MRC SNR
    snr_powerwise: np.ndarray  # (N, 2) power-wise SNR
    degenerate: np.ndarray     # (N,) bool


def ordered_snrs(H, sigma0_sq, ordering=OPTIMAL):
    """Ordering, ZF-MRC weights and both SNR definitions for a channel batch.

    Parameters
    ----------
    H : ndarray, shape (N, n, 2)
    sigma0_sq : float
    ordering : {'optimal', 'fixed'}

    Notes
    -----
    The power-wise SNR divides by ``trace(P_i) sigma0^2``, the expected
    after-projection noise power, computed from the projector itself.
    """
    if ordering not in ORDERINGS:
        raise ValueError(f"ordering must be one of {ORDERINGS}, got {ordering!r}")
    H = np.asarray(H, dtype=np.complex128)
    if H.ndim != 3 or H.shape[2] != 2:
        raise ValueError(f"expected shape (N, n, 2), got {H.shape}")
    n = H.shape[1]
    h0, h1 = H[:, :, 0], H[:, :, 1]
    p0 = _sqnorm(h0)
    p1 = _sqnorm(h1)
    c = _inner(h1, h0)  # h1^+ h0
    with np.errstate(divide="ignore", invalid="ignore"):
        res0 = h0 - h1 * (c / p1)[:, None]
        res1 = h1 - h0 * (c.conj() / p0)[:, None]
    s0 = _sqnorm(res0)
    s1 = _sqnorm(res1)

    if ordering == OPTIMAL:
        first = np.where(s0 >= s1, 0, 1)
    else:
        first = np.zeros(H.shape[0], dtype=int)
    pick0 = (first == 0)[:, None]
    h_first = np.where(pick0, h0, h1)
    h_second = np.where(pick0, h1, h0)
    h_perp = np.where(pick0, res0, res1)
    perp_pow = np.where(first == 0, s0, s1)
    sec_pow = np.where(first == 0, p1, p0)

    degenerate = ~(perp_pow > DEGENERATE_RTOL * (p0 + p1))
    with np.errstate(divide="ignore", invalid="ignore"):
        w1 = h_perp / np.sqrt(perp_pow)[:, None]
        w2 = h_second / np.sqrt(sec_pow)[:, None]
        # trace(I - u u^+ / |u|^2) = n - |u|^2 / |u|^2
        trace1 = n - sec_pow / sec_pow
    trace2 = float(n)

    snr = np.stack([perp_pow, sec_pow], axis=1) / sigma0_sq
    snr_pw = np.stack([perp_pow / (trace1 * sigma0_sq), sec_pow / (trace2 * sigma0_sq)], axis=1)
    return OrderedSnrBatch(first, h_first, h_second, h_perp, (w1, w2), snr, snr_pw, degenerate)


def equal_gain_weights(batch):
    """Unit-norm projected all-ones combiners, for the correlation diagnostic.

    ``w_i = P_i 1 / |P_i 1|``: the ZF constraint is kept but the branches are
    combined with equal gain instead of matched to the channel.
    """
    u = batch.h_second
    ones = np.ones_like(u)
    w1 = ones - u * (_inner(u, ones) / _sqnorm(u))[:, None]
    w1 = w1 / np.sqrt(_sqnorm(w1))[:, None]
    w2 = ones / np.sqrt(u.shape[1])
    return w1, w2


@dataclass
class DetectionBatch:
    snrs: OrderedSnrBatch
    decisions: np.ndarray      # (N, 2) in detection order
    transmitted: np.ndarray    # (N, 2) true symbols in detection order
    noise_out: np.ndarray      # (N, 2) after-combining noise per step

    @property
    def step_errors(self):
        return self.decisions != self.transmitted

    @property
    def block_errors(self):
        return np.any(self.step_errors, axis=1)


def detect_batch(H, symbols, noise, sigma0_sq, mode=GENIE, ordering=OPTIMAL):
    """Vectorized BPSK detection of ``r = H q + v`` for a batch.

    Parameters
    ----------
    H : ndarray, shape (N, n, 2)
    symbols : ndarray, shape (N, 2)
        Transmitted +/-1 symbols.
    noise : ndarray, shape (N, n)
    sigma0_sq : float
    mode : {'genie', 'propagate'}
    ordering : {'optimal', 'fixed'}
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    snrs = ordered_snrs(H, sigma0_sq, ordering)
    r = np.einsum("bnm,bm->bn", H, symbols) + noise
    w1, w2 = snrs.weights
    u = snrs.h_second
    first = snrs.first
    q_first = np.where(first == 0, symbols[:, 0], symbols[:, 1])
    q_second = np.where(first == 0, symbols[:, 1], symbols[:, 0])

    # Null the second stream, combine, decide.
    r_proj = r - u * (_inner(u, r) / _sqnorm(u))[:, None]
    dec1 = np.where(_inner(w1, r_proj).real >= 0.0, 1.0, -1.0)
    cancel = q_first if mode == GENIE else dec1
    r2 = r - snrs.h_first * cancel[:, None]
    dec2 = np.where(_inner(w2, r2).real >= 0.0, 1.0, -1.0)

    noise_out = np.stack([_inner(w1, noise), _inner(w2, noise)], axis=1)
    return DetectionBatch(
        snrs=snrs,
        decisions=np.stack([dec1, dec2], axis=1),
        transmitted=np.stack([q_first, q_second], axis=1),
        noise_out=noise_out,
    )
