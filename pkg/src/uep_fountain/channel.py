"""BPSK over a real AWGN channel, LLR demodulation and BIAWGN statistics."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConfigError

LLR_CAP = 30.0
GH_NODES = 128


@dataclass(frozen=True)
class ChannelParams:
    sigma2: float
    seed: int = 0

    def __post_init__(self):
        if not (self.sigma2 > 0 and math.isfinite(self.sigma2)):
            raise ConfigError(f"sigma2 must be positive and finite, got {self.sigma2}")


def snr_db_to_sigma2(snr_db):
    return 10.0 ** (-snr_db / 10.0)


def sigma2_to_snr_db(sigma2):
    return 10.0 * math.log10(1.0 / sigma2)


def modulate(bits):
    """0 -> +1, 1 -> -1."""
    return 1.0 - 2.0 * np.asarray(bits, dtype=np.float64)


def transmit(symbols, params):
    rng = np.random.default_rng(params.seed)
    symbols = np.asarray(symbols, dtype=np.float64)
    return symbols + math.sqrt(params.sigma2) * rng.standard_normal(symbols.shape)


def demodulate(received, sigma2, llr_cap=LLR_CAP):
    if not sigma2 > 0:
        raise ConfigError(f"sigma2 must be positive, got {sigma2}")
    llr = 2.0 * np.asarray(received, dtype=np.float64) / sigma2
    return np.clip(llr, -llr_cap, llr_cap)


@lru_cache(maxsize=None)
def _hermite(n):
    x, w = np.polynomial.hermite.hermgauss(n)
    return x, w / math.sqrt(math.pi)


def _llr_expectation(f, sigma2, nodes):
    """E[f(L)] for the consistent BIAWGN LLR law L ~ N(2/sigma2, 4/sigma2)."""
    if not sigma2 > 0:
        raise ConfigError(f"sigma2 must be positive, got {sigma2}")
    x, w = _hermite(nodes)
    mean = 2.0 / sigma2
    std = 2.0 / math.sqrt(sigma2)
    return float(np.dot(w, f(mean + math.sqrt(2.0) * std * x)))


def capacity(sigma2, nodes=GH_NODES):
    """BIAWGN capacity in bits per channel use."""
    loss = _llr_expectation(lambda L: np.logaddexp(0.0, -L), sigma2, nodes) / math.log(2.0)
    return 1.0 - loss


def channel_tanh_mean(sigma2, nodes=GH_NODES):
    """E[tanh(L/2)] for the all-zero transmission LLR."""
    return _llr_expectation(lambda L: np.tanh(L / 2.0), sigma2, nodes)
