"""Prior-annotated bit streams.

A source here is a block of ``k`` bits together with per-bit prior LLRs
``mu = ln p(b=0) / p(b=1)``. The decoder receives the priors losslessly, so
they double as side information for BP decoding and as the input to the
selection-weight design.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import expit

from .errors import ConfigError, ParseError

MU_FLOOR = 1e-3

_NPRI_MAGIC = b"NPRI"
_NPRI_RECORD = struct.Struct("<Bd")


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PriorVector:
    mu: np.ndarray
    mu_floor: float = MU_FLOOR

    def __post_init__(self):
        mu = _frozen(self.mu, np.float64)
        if mu.ndim != 1:
            raise ConfigError("prior must be a 1-d vector")
        if not np.all(np.isfinite(mu)):
            raise ConfigError("prior contains non-finite LLRs")
        if np.any(np.abs(mu) < self.mu_floor):
            raise ConfigError(f"prior magnitude below mu_floor={self.mu_floor}")
        object.__setattr__(self, "mu", mu)

    def __len__(self):
        return self.mu.size


@dataclass(frozen=True, eq=False)
class BitBlock:
    bits: np.ndarray
    prior: PriorVector

    def __post_init__(self):
        bits = _frozen(self.bits, np.uint8)
        if bits.ndim != 1:
            raise ConfigError("bits must be a 1-d vector")
        if np.any(bits > 1):
            raise ConfigError("bits must be 0 or 1")
        if bits.size != len(self.prior):
            raise ConfigError(
                f"bit count {bits.size} does not match prior length {len(self.prior)}")
        object.__setattr__(self, "bits", bits)

    @property
    def k(self):
        return self.bits.size

    @property
    def mu(self):
        return self.prior.mu

    def __eq__(self, other):
        if not isinstance(other, BitBlock):
            return NotImplemented
        return (np.array_equal(self.bits, other.bits)
                and np.array_equal(self.mu, other.mu))


@dataclass(frozen=True, eq=False)
class FlippedPrior:
    mu_tilde: np.ndarray = field()

    def __post_init__(self):
        object.__setattr__(self, "mu_tilde", _frozen(self.mu_tilde, np.float64))


def _draw_block(rng, magnitudes, mu_floor):
    signs = np.where(rng.integers(0, 2, magnitudes.size) == 1, -1.0, 1.0)
    mu = signs * magnitudes
    # p(b=1) = 1 - sigmoid(mu) = sigmoid(-mu)
    bits = (rng.random(mu.size) < expit(-mu)).astype(np.uint8)
    return BitBlock(bits, PriorVector(mu, mu_floor))


def generate_synthetic(k, certainty_low, certainty_high, seed, mu_floor=MU_FLOOR):
    """Draw ``k`` bits whose priors have |mu| ~ Uniform[low, high] and random sign.

    Each bit is then drawn from its own prior, so the priors are calibrated.
    """
    if k < 1:
        raise ConfigError(f"k must be positive, got {k}")
    if not (0 < certainty_low <= certainty_high):
        raise ConfigError(
            f"need 0 < certainty_low <= certainty_high, got [{certainty_low}, {certainty_high}]")
    if certainty_low < mu_floor:
        raise ConfigError(f"certainty_low={certainty_low} is below mu_floor={mu_floor}")
    rng = np.random.default_rng(seed)
    mags = rng.uniform(certainty_low, certainty_high, k)
    return _draw_block(rng, mags, mu_floor)


def generate_bimodal(k, low_band, high_band, high_fraction=0.5, seed=0, mu_floor=MU_FLOOR):
    """Two-population source: a fraction of bits with |mu| in ``high_band``, the rest in ``low_band``.

    Bit positions of the two populations are shuffled.
    """
    if k < 1:
        raise ConfigError(f"k must be positive, got {k}")
    if not 0.0 <= high_fraction <= 1.0:
        raise ConfigError("high_fraction must lie in [0, 1]")
    for lo, hi in (low_band, high_band):
        if not (mu_floor <= lo <= hi):
            raise ConfigError(f"invalid certainty band [{lo}, {hi}]")
    rng = np.random.default_rng(seed)
    n_high = int(round(high_fraction * k))
    mags = np.concatenate([
        rng.uniform(high_band[0], high_band[1], n_high),
        rng.uniform(low_band[0], low_band[1], k - n_high),
    ])
    rng.shuffle(mags)
    return _draw_block(rng, mags, mu_floor)


def flip_priors(block):
    """Map priors into the all-zero-codeword frame: negate mu wherever the bit is 1."""
    return FlippedPrior(np.where(block.bits == 1, -block.mu, block.mu))


def wrong_side_probability(mu_i):
    """Probability that a calibrated prior points at the wrong bit value."""
    return 1.0 - expit(np.abs(mu_i))


def binary_entropy(p):
    """H2(p) in bits, with H2(0) = H2(1) = 0."""
    p = np.asarray(p, dtype=np.float64)
    q = 1.0 - p
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -(np.where(p > 0, p * np.log2(p), 0.0) + np.where(q > 0, q * np.log2(q), 0.0))
    return h


def prior_entropy_bits(mu):
    """Total entropy, in bits, of independent bits with prior LLRs ``mu``.

    Computed as sum of H2(sigmoid(|mu|)) in a form that stays accurate for large |mu|.
    """
    a = np.abs(np.asarray(mu, dtype=np.float64))
    # H2(sigmoid(a)) * ln2 = softplus(-a) + a * sigmoid(-a)
    nats = np.logaddexp(0.0, -a) + a * expit(-a)
    return float(np.sum(nats) / math.log(2.0))


# ---------------------------------------------------------------- file I/O


def _parse_text(lines, source):
    bits, mus = [], []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            parts = line.split()
        if len(parts) != 2:
            raise ParseError(f"{source}:{lineno}: expected '<bit>\\t<mu>', got {raw.rstrip()!r}")
        bit_s, mu_s = parts[0].strip(), parts[1].strip()
        if bit_s not in ("0", "1"):
            raise ParseError(f"{source}:{lineno}: bit must be 0 or 1, got {bit_s!r}")
        try:
            mu = float(mu_s)
        except ValueError:
            raise ParseError(f"{source}:{lineno}: cannot parse mu {mu_s!r}") from None
        if not math.isfinite(mu):
            raise ParseError(f"{source}:{lineno}: mu must be finite, got {mu_s!r}")
        bits.append(int(bit_s))
        mus.append(mu)
    return bits, mus


def _parse_binary(data, source):
    if len(data) < 8:
        raise ParseError(f"{source}: truncated NPRI header")
    (count,) = struct.unpack_from("<I", data, 4)
    expected = 8 + count * _NPRI_RECORD.size
    if len(data) != expected:
        raise ParseError(f"{source}: NPRI header declares {count} records "
                         f"({expected} bytes) but file has {len(data)} bytes")
    bits, mus = [], []
    for r in range(count):
        offset = 8 + r * _NPRI_RECORD.size
        bit, mu = _NPRI_RECORD.unpack_from(data, offset)
        if bit > 1:
            raise ParseError(f"{source}: record {r} (offset {offset}): bit must be 0 or 1, got {bit}")
        if not math.isfinite(mu):
            raise ParseError(f"{source}: record {r} (offset {offset + 1}): mu must be finite")
        bits.append(bit)
        mus.append(mu)
    return bits, mus


def load_bits_with_priors(path, mu_floor=MU_FLOOR):
    """Read a priors file (text or NPRI binary, detected by magic)."""
    path = Path(path)
    data = path.read_bytes()
    if data[:4] == _NPRI_MAGIC:
        bits, mus = _parse_binary(data, path)
    else:
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError as e:
            raise ParseError(f"{path}: not UTF-8 text and no NPRI magic ({e})") from None
        bits, mus = _parse_text(text.splitlines(), path)
    if not bits:
        raise ParseError(f"{path}: zero-length stream")
    try:
        return BitBlock(np.array(bits), PriorVector(np.array(mus), mu_floor))
    except ConfigError as e:
        raise ParseError(f"{path}: {e}") from None


def save_bits_with_priors(block, path, binary=False):
    path = Path(path)
    if binary:
        out = bytearray(_NPRI_MAGIC)
        out += struct.pack("<I", block.k)
        for b, mu in zip(block.bits.tolist(), block.mu.tolist()):
            out += _NPRI_RECORD.pack(b, mu)
        path.write_bytes(bytes(out))
    else:
        lines = [f"{b}\t{mu!r}" for b, mu in zip(block.bits.tolist(), block.mu.tolist())]
        path.write_text("\n".join(lines) + "\n")
