"""STF capture synthesis and two SNR estimators: cross-correlation of the
repeated short symbols, and STF power against the background noise."""

from __future__ import annotations

import csv
import io
import math
import struct
from dataclasses import dataclass
from typing import BinaryIO, Iterable, List, Optional, Sequence

import numpy as np

SAMPLE_RATE_HZ = 20e6
STF_LEN = 160
SYMBOL_LEN = 16
MIN_PREFIX = 64
RHO_EPS = 1e-6

# nonzero subcarriers of the 802.11a short training sequence (times sqrt(13/6))
_STF_TONES = {-24: 1, -20: -1, -16: 1, -12: -1, -8: -1, -4: 1, 4: -1, 8: -1, 12: 1, 16: 1, 20: 1, 24: 1}


def _base_symbol() -> np.ndarray:
    freq = np.zeros(64, dtype=complex)
    for k, sign in _STF_TONES.items():
        freq[k % 64] = sign * (1 + 1j)
    sym = np.fft.ifft(freq)[:SYMBOL_LEN]
    return sym / np.sqrt(np.mean(np.abs(sym) ** 2))


STF_SYMBOL = _base_symbol()
STF_CLEAN = np.tile(STF_SYMBOL, STF_LEN // SYMBOL_LEN)


@dataclass(frozen=True)
class SampleBuffer:
    samples: np.ndarray
    sample_rate_hz: float = SAMPLE_RATE_HZ

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=complex).reshape(-1)
        if not np.all(np.isfinite(arr)):
            raise ValueError("samples must be finite")
        object.__setattr__(self, "samples", arr)

    def __len__(self):
        return len(self.samples)

    def power(self) -> float:
        return float(np.mean(np.abs(self.samples) ** 2)) if len(self.samples) else 0.0


@dataclass(frozen=True)
class StfCapture:
    noise_prefix: SampleBuffer
    stf: SampleBuffer

    def __post_init__(self):
        if len(self.stf) != STF_LEN:
            raise ValueError(f"stf must hold {STF_LEN} samples, got {len(self.stf)}")
        if len(self.noise_prefix) < MIN_PREFIX:
            raise ValueError(f"noise prefix needs at least {MIN_PREFIX} samples")

    def scaled(self, factor: complex) -> "StfCapture":
        return StfCapture(
            SampleBuffer(self.noise_prefix.samples * factor, self.noise_prefix.sample_rate_hz),
            SampleBuffer(self.stf.samples * factor, self.stf.sample_rate_hz),
        )


def synth_stf(snr_db: float, seed=0, prefix_len: int = MIN_PREFIX, ramp: bool = False) -> StfCapture:
    """Unit-power STF plus circular Gaussian noise at ``snr_db``.

    ``seed`` is anything numpy's ``default_rng`` accepts. With ``ramp`` the
    amplitude of the first 32 STF samples rises linearly from zero.
    """
    if prefix_len < MIN_PREFIX:
        raise ValueError(f"prefix_len must be >= {MIN_PREFIX}")
    rng = np.random.default_rng(seed)
    noise_var = 0.0 if math.isinf(snr_db) and snr_db > 0 else 10 ** (-snr_db / 10)
    n = prefix_len + STF_LEN
    noise = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) * math.sqrt(noise_var / 2)
    stf = STF_CLEAN.copy()
    if ramp:
        stf[:32] *= np.linspace(0.0, 1.0, 32, endpoint=False)
    return StfCapture(SampleBuffer(noise[:prefix_len]), SampleBuffer(stf + noise[prefix_len:]))


@dataclass(frozen=True)
class SnrEstimate:
    """``snr_db`` is None when the power estimator finds no signal above the
    noise floor. ``clamped`` is "low" or "high" when the correlation hit
    the clamp."""

    snr_db: Optional[float]
    below_floor: bool = False
    clamped: Optional[str] = None
    rho: Optional[float] = None


def rho_to_db(rho: float) -> SnrEstimate:
    clamped = None
    if rho < RHO_EPS:
        rho, clamped = RHO_EPS, "low"
    elif rho > 1 - RHO_EPS:
        rho, clamped = 1 - RHO_EPS, "high"
    return SnrEstimate(10 * math.log10(rho / (1 - rho)), clamped=clamped, rho=rho)


def power_to_db(p_stf: float, p_noise: float) -> SnrEstimate:
    if p_stf <= p_noise:
        return SnrEstimate(None, below_floor=True)
    if p_noise <= 0:
        return SnrEstimate(math.inf)
    return SnrEstimate(10 * math.log10((p_stf - p_noise) / p_noise))


def snr_xcorr(capture: StfCapture) -> SnrEstimate:
    # correlate samples 32:96 with 96:160; the leading 32 are not used
    x = capture.stf.samples
    g1, g2 = x[32:96], x[96:160]
    denom = np.linalg.norm(g1) * np.linalg.norm(g2)
    rho = float(abs(np.vdot(g1, g2)) / denom) if denom > 0 else 0.0
    return rho_to_db(rho)


def snr_power(capture: StfCapture, noise_samples: int = MIN_PREFIX) -> SnrEstimate:
    if noise_samples < 1 or noise_samples > len(capture.noise_prefix):
        raise ValueError("noise_samples must fit in the prefix")
    p_noise = float(np.mean(np.abs(capture.noise_prefix.samples[-noise_samples:]) ** 2))
    return power_to_db(capture.stf.power(), p_noise)


ESTIMATORS = {"xcorr": snr_xcorr, "power": snr_power}

DEFAULT_BENCH_SNRS = (7, 10, 13, 15, 17, 19, 22, 25, 30)


@dataclass(frozen=True)
class BenchRow:
    true_snr: float
    method: str
    mean: float
    std: float
    n: int
    below_floor: int = 0
    clamped: int = 0

    @property
    def bias(self) -> float:
        return self.mean - self.true_snr


def bench_estimators(
    snrs: Sequence[float] = DEFAULT_BENCH_SNRS,
    runs: int = 1000,
    seed: int = 0,
    prefix_len: int = MIN_PREFIX,
    ramp: bool = False,
) -> List[BenchRow]:
    """Monte Carlo over ``runs`` captures per SNR point; capture ``i`` at point
    ``p`` is seeded with ``[seed, p, i]``. Sample std uses ddof=1."""
    rows = []
    for p, snr in enumerate(snrs):
        results = {m: [] for m in ESTIMATORS}
        for i in range(runs):
            cap = synth_stf(snr, seed=[seed, p, i], prefix_len=prefix_len, ramp=ramp)
            for m, fn in ESTIMATORS.items():
                results[m].append(fn(cap))
        for m, ests in results.items():
            vals = np.array([e.snr_db for e in ests if e.snr_db is not None], dtype=float)
            rows.append(
                BenchRow(
                    float(snr),
                    m,
                    float(vals.mean()) if len(vals) else math.nan,
                    float(vals.std(ddof=1)) if len(vals) > 1 else math.nan,
                    len(vals),
                    sum(e.below_floor for e in ests),
                    sum(e.clamped is not None for e in ests),
                )
            )
    return rows


def bench_csv(rows: Iterable[BenchRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["true_snr", "method", "mean", "std", "n"])
    for r in rows:
        w.writerow([f"{r.true_snr:g}", r.method, f"{r.mean:.6f}", f"{r.std:.6f}", r.n])
    return buf.getvalue()


# binary capture: magic, version, prefix length, stf length, sample rate,
# then interleaved float32 I/Q, little-endian
_MAGIC = b"RTIQ"
_HEADER = struct.Struct("<4sHIId")


def capture_to_bytes(capture: StfCapture) -> bytes:
    x = np.concatenate([capture.noise_prefix.samples, capture.stf.samples])
    iq = np.empty(2 * len(x), dtype="<f4")
    iq[0::2], iq[1::2] = x.real, x.imag
    head = _HEADER.pack(_MAGIC, 1, len(capture.noise_prefix), len(capture.stf), capture.stf.sample_rate_hz)
    return head + iq.tobytes()


def capture_from_bytes(data: bytes) -> StfCapture:
    if len(data) < _HEADER.size:
        raise ValueError("truncated capture header")
    magic, version, n_prefix, n_stf, rate = _HEADER.unpack_from(data)
    if magic != _MAGIC or version != 1:
        raise ValueError("not an I/Q capture file")
    body = np.frombuffer(data, dtype="<f4", offset=_HEADER.size)
    if len(body) != 2 * (n_prefix + n_stf):
        raise ValueError(f"expected {n_prefix + n_stf} samples, found {len(body) // 2}")
    x = body[0::2].astype(float) + 1j * body[1::2].astype(float)
    return StfCapture(SampleBuffer(x[:n_prefix], rate), SampleBuffer(x[n_prefix:], rate))


def write_capture(fh: BinaryIO, capture: StfCapture) -> None:
    fh.write(capture_to_bytes(capture))


def read_capture(fh: BinaryIO) -> StfCapture:
    return capture_from_bytes(fh.read())
