"""Seeded LT encoding with weighted, without-replacement neighbour selection.

Symbol ``s`` of a stream draws its degree from lane 0 and one Gumbel key per
input bit from lanes 1..k of the counter-based hash keyed by (seed, s). The
``d`` inputs with the largest ``ln rho_i + Gumbel_i`` form its neighbourhood,
which is an exact Plackett-Luce draw without replacement.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import rng as crng
from .errors import ConfigError, ParseError, StructuralError
from .uep_design import DegreeDistribution, SelectionWeights

_NLTS_MAGIC = b"NLTS"
_NLTS_HEADER = struct.Struct("<4sIQI")
_CHUNK = 4096


@dataclass(frozen=True)
class CodedSymbolSpec:
    symbol_index: int
    degree: int
    indices: tuple

    def __post_init__(self):
        if self.degree != len(self.indices) or len(set(self.indices)) != self.degree:
            raise StructuralError(f"symbol {self.symbol_index}: indices must be {self.degree} distinct values")


@dataclass(frozen=True, eq=False)
class GeneratorStream:
    seed: int
    omega: DegreeDistribution
    weights: SelectionWeights
    k: int

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError("k must be positive")
        if self.weights.k != self.k:
            raise ConfigError(f"weights have length {self.weights.k}, expected k={self.k}")
        self.omega.check_k(self.k)
        cdf = np.cumsum(self.omega.omega)
        cdf[-1] = 1.0
        object.__setattr__(self, "_cdf", cdf)
        object.__setattr__(self, "_log_rho", np.log(self.weights.rho))

    def draw(self, start, stop):
        """Degrees and neighbour sets of symbols ``start..stop-1``.

        Returns ``(degrees, order)`` where ``order[r, :degrees[r]]`` lists the
        neighbours of symbol ``start + r`` in selection order.
        """
        if stop <= start:
            return np.zeros(0, dtype=np.int64), np.zeros((0, self.k), dtype=np.int64)
        idx = np.arange(start, stop, dtype=np.uint64)
        degrees = sample_degree(self.seed, idx, self.omega, cdf=self._cdf)
        keys = self._log_rho + crng.gumbel(self.seed, idx[:, None], np.arange(1, self.k + 1))
        order = np.argsort(-keys, axis=1, kind="stable")
        return degrees, order

    def edges(self, n, start=0):
        """Flat (output, input) edge arrays for symbols ``start..start+n-1``, grouped by output."""
        outs, ins, degs = [], [], []
        for a in range(start, start + n, _CHUNK):
            b = min(a + _CHUNK, start + n)
            d, order = self.draw(a, b)
            take = np.arange(self.k) < d[:, None]
            # non-neighbours sort to the end of each row, leaving the first d slots sorted
            chosen = np.sort(np.where(take, order, self.k), axis=1)
            outs.append(np.nonzero(take)[0] + (a - start))
            ins.append(chosen[take])
            degs.append(d)
        if not outs:
            z = np.zeros(0, dtype=np.int64)
            return z, z, z
        return np.concatenate(outs), np.concatenate(ins), np.concatenate(degs)

    def specs(self, n, start=0):
        out_idx, in_idx, degrees = self.edges(n, start)
        bounds = np.concatenate([[0], np.cumsum(degrees)])
        return [CodedSymbolSpec(start + r, int(degrees[r]),
                                tuple(int(i) for i in in_idx[bounds[r]:bounds[r + 1]]))
                for r in range(n)]


def sample_degree(seed, symbol_index, omega, cdf=None):
    """Inverse-CDF degree draw for one symbol index or an array of them."""
    if cdf is None:
        cdf = np.cumsum(omega.omega)
        cdf[-1] = 1.0
    u = crng.uniform(seed, symbol_index, 0)
    return np.searchsorted(cdf, u, side="right") + 1


def sample_indices(seed, symbol_index, weights, d):
    """Sorted neighbour set of size ``d`` for one symbol (Gumbel top-d on ln rho)."""
    if not 1 <= d <= weights.k:
        raise ConfigError(f"degree {d} outside [1, {weights.k}]")
    keys = np.log(weights.rho) + crng.gumbel(seed, symbol_index, np.arange(1, weights.k + 1))
    top = np.argsort(-keys, kind="stable")[:d]
    return tuple(sorted(int(i) for i in top))


def encode_symbol(block, spec):
    idx = np.asarray(spec.indices, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= block.k):
        raise StructuralError(f"symbol {spec.symbol_index}: index outside [0, {block.k})")
    return int(np.bitwise_xor.reduce(block.bits[idx])) if idx.size else 0


def xor_by_output(bits, out_idx, in_idx, n):
    """Parity of each output's neighbourhood, given flat edge arrays."""
    acc = np.zeros(n, dtype=np.int64)
    np.add.at(acc, out_idx, bits[in_idx].astype(np.int64))
    return (acc & 1).astype(np.uint8)


def encode_stream(block, generator, n, start=0):
    """First ``n`` coded bits of the stream, with their specs."""
    if generator.k != block.k:
        raise StructuralError(f"generator k={generator.k} does not match block k={block.k}")
    specs = generator.specs(n, start)
    out_idx, in_idx, _ = generator.edges(n, start)
    return xor_by_output(block.bits, out_idx, in_idx, n), specs


def rebuild_graph(generator, n, start=0):
    return generator.specs(n, start)


# ---------------------------------------------------------------- file I/O


def write_symbols(path, bits, k, seed):
    bits = np.asarray(bits, dtype=np.uint8)
    header = _NLTS_HEADER.pack(_NLTS_MAGIC, k, seed, bits.size)
    Path(path).write_bytes(header + np.packbits(bits, bitorder="little").tobytes())


def read_symbols(path):
    """Returns ``(bits, k, seed)``."""
    data = Path(path).read_bytes()
    if len(data) < _NLTS_HEADER.size:
        raise ParseError(f"{path}: truncated NLTS header")
    magic, k, seed, n = _NLTS_HEADER.unpack_from(data)
    if magic != _NLTS_MAGIC:
        raise ParseError(f"{path}: bad magic {magic!r}, expected {_NLTS_MAGIC!r}")
    payload = data[_NLTS_HEADER.size:]
    need = (n + 7) // 8
    if len(payload) != need:
        raise ParseError(f"{path}: expected {need} payload bytes for n={n}, found {len(payload)}")
    bits = np.unpackbits(np.frombuffer(payload, dtype=np.uint8), bitorder="little")[:n]
    return bits.astype(np.uint8), k, seed
