"""Capacity-limited fronthaul: a ``B``-bit-per-complex minifloat codec.

Each real component gets ``B/2`` bits laid out MSB first as

    [ sign | exponent (exp_bits) | mantissa (B_M) ]

with exponent bias ``2**(exp_bits-1) - 1``. Exponent field 0 encodes
subnormals ``m * 2**(1 - bias - B_M)``; every other field value is a normal
number ``(1 + m / 2**B_M) * 2**(e - bias)``. No codes are reserved for
infinities or NaN: encoding rounds to nearest-even and clamps overflow to the
largest finite magnitude.

Before quantisation each AP scales its payload by a power of two so the
largest component lands inside the format's range; the scale exponent travels
with the payload and is undone at the CPU.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from cfactivity.netmodel import ConfigError, ReceivedBatch, sample_covariance


@dataclass(frozen=True)
class MinifloatFormat:
    B: int
    B_M: int | None = None

    def __post_init__(self):
        if self.B % 2 or self.B < 2:
            raise ConfigError(f"B must be a positive even bit count, got {self.B}")
        if self.B_M is None:
            # B/4 mantissa bits, shrunk when that would leave fewer than two exponent bits
            object.__setattr__(self, "B_M", max(1, min(self.B // 4, self.B // 2 - 3)))
        if self.B_M < 1:
            raise ConfigError("at least one mantissa bit is required")
        if self.exp_bits < 2:
            raise ConfigError(f"B={self.B}, B_M={self.B_M} leaves {self.exp_bits} exponent bits (< 2)")
        if self.field_bits > 62:
            raise ConfigError("fields wider than 62 bits are not supported")

    @property
    def field_bits(self) -> int:
        return self.B // 2

    @property
    def exp_bits(self) -> int:
        return self.B // 2 - 1 - self.B_M

    @property
    def bias(self) -> int:
        return 2 ** (self.exp_bits - 1) - 1

    @property
    def max_magnitude_code(self) -> int:
        return (1 << (self.field_bits - 1)) - 1

    @property
    def max_finite(self) -> float:
        e_max = (1 << self.exp_bits) - 1 - self.bias
        return float(np.ldexp(2.0 - 2.0 ** -self.B_M, e_max))

    @property
    def min_normal(self) -> float:
        return float(np.ldexp(1.0, 1 - self.bias))

    @property
    def min_subnormal(self) -> float:
        return float(np.ldexp(1.0, 1 - self.bias - self.B_M))


def encode(x, fmt: MinifloatFormat):
    """Codes (``int64``, same shape as ``x``) of the nearest representable values."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("cannot encode non-finite values")
    sign = np.signbit(x).astype(np.int64)
    ax = np.abs(x)
    mag = np.zeros(x.shape, dtype=np.int64)

    sub = ax < fmt.min_normal
    mag[sub] = np.rint(ax[sub] / fmt.min_subnormal).astype(np.int64)

    nor = ~sub
    if np.any(nor):
        _, e2 = np.frexp(ax[nor])  # ax = f * 2**e2 with f in [0.5, 1)
        e_unb = e2.astype(np.int64) - 1
        full = np.rint(np.ldexp(ax[nor], (fmt.B_M - e_unb).astype(int))).astype(np.int64)
        # a mantissa rounding up to 2**(B_M+1) carries into the exponent field naturally
        mag[nor] = ((e_unb + fmt.bias) << fmt.B_M) + full - (1 << fmt.B_M)

    np.minimum(mag, fmt.max_magnitude_code, out=mag)
    code = (sign << (fmt.field_bits - 1)) | mag
    return code if code.ndim else int(code)


def decode(code, fmt: MinifloatFormat):
    code = np.asarray(code, dtype=np.int64)
    if np.any((code < 0) | (code >= (1 << fmt.field_bits))):
        raise ValueError(f"codes must lie in [0, 2**{fmt.field_bits})")
    sign = code >> (fmt.field_bits - 1)
    e = (code >> fmt.B_M) & ((1 << fmt.exp_bits) - 1)
    m = code & ((1 << fmt.B_M) - 1)
    normal = e > 0
    sig = np.where(normal, m + (1 << fmt.B_M), m).astype(float)
    exp = np.where(normal, e - fmt.bias - fmt.B_M, 1 - fmt.bias - fmt.B_M)
    val = np.ldexp(sig, exp.astype(int))
    val = np.where(sign == 1, -val, val)
    return val if val.ndim else float(val)


def quantize(x, fmt: MinifloatFormat) -> np.ndarray:
    return decode(encode(x, fmt), fmt)


def block_exponent(x, fmt: MinifloatFormat) -> int:
    """Power-of-two exponent that brings ``max|x|`` within ``fmt.max_finite``."""
    peak = float(np.max(np.abs(x))) if np.size(x) else 0.0
    if peak == 0.0:
        return 0
    return int(np.ceil(np.log2(peak / fmt.max_finite)))


def quantize_complex(z, fmt: MinifloatFormat, scale_exp: int = 0) -> np.ndarray:
    """Quantise real and imaginary parts of ``z * 2**-scale_exp``, then rescale."""
    z = np.asarray(z)
    re = quantize(np.ldexp(z.real, -scale_exp), fmt)
    im = quantize(np.ldexp(z.imag, -scale_exp), fmt)
    return np.ldexp(re, scale_exp) + 1j * np.ldexp(im, scale_exp)


def _ap_exponent(z, fmt):
    return block_exponent(np.concatenate([np.ravel(z.real), np.ravel(z.imag)]), fmt)


def default_mode(L: int, N: int) -> str:
    """Raw signals when ``L >= N``, otherwise the (smaller) sample covariance."""
    return "raw" if L >= N else "cov"


def quantize_payload(batch: ReceivedBatch, fmt: MinifloatFormat, mode: str | None = None) -> ReceivedBatch:
    """Batch as seen by the CPU after each AP's payload crosses the fronthaul.

    ``mode="raw"`` quantises ``Y_m`` and recomputes the sample covariance at
    the CPU; ``mode="cov"`` quantises ``Q_Y,m`` directly and restores
    Hermitian symmetry and positive semidefiniteness afterwards. ``None``
    picks ``raw`` when raw signals are present and ``L >= N``.
    """
    if mode is None:
        L = batch.sample_cov.shape[1]
        mode = default_mode(L, batch.n_antennas) if batch.raw_signals is not None else "cov"
    if mode == "raw":
        if batch.raw_signals is None:
            raise ValueError("raw-signal fronthaul needs a batch synthesized with keep_raw")
        Yq = np.stack([quantize_complex(Y, fmt, _ap_exponent(Y, fmt)) for Y in batch.raw_signals])
        return dataclasses.replace(batch, sample_cov=sample_covariance(Yq), raw_signals=Yq)
    if mode == "cov":
        covs = []
        for Q in batch.sample_cov:
            Qq = quantize_complex(Q, fmt, _ap_exponent(Q, fmt))
            Qq = 0.5 * (Qq + Qq.conj().T)
            w, U = np.linalg.eigh(Qq)
            Qq = (U * np.maximum(w, 0.0)) @ U.conj().T
            covs.append(0.5 * (Qq + Qq.conj().T))
        return dataclasses.replace(batch, sample_cov=np.stack(covs))
    raise ValueError(f"unknown fronthaul mode {mode!r}")
