"""Rateless broadcast to heterogeneous receivers.

The transmitter runs ``c`` LT streams (one per feature channel) and, slot by
slot, polls one stream to emit its next symbol. Every receiver listens to the
same slot sequence through its own AWGN channel and stops after its own
budget, so the transmitter only ever emits as many slots as the most
demanding receiver needs.
"""
from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import rng as crng
from .bp_decoder import DecodeGraph, decode
from .channel import capacity, channel_tanh_mean, demodulate, modulate, sigma2_to_snr_db
from .errors import ConfigError
from .lt_codec import GeneratorStream, xor_by_output
from .source_model import generate_bimodal, generate_synthetic, prior_entropy_bits
from .uep_design import (EPS1_DEFAULT, EPS2_DEFAULT, DegreeDistribution, design_lambda,
                         reliability, selection_weights)

log = logging.getLogger(__name__)

SWEEP_COLUMNS = [
    "sigma2", "snr_db", "alpha", "beta", "gamma", "eta", "n_total", "ber_mean",
    "ber_stderr", "soft_distortion_mean", "ops_mean", "bits_per_source_bit",
    "ops_per_source_bit", "trials", "soft_distortion_stderr", "side_info_bits_per_source_bit",
]


# ---------------------------------------------------------------- scaling map


@dataclass(frozen=True)
class ScalingTable:
    """Monotone piecewise-linear stand-in for the learned (alpha, beta) -> (gamma, eta) map."""

    alpha: tuple = (0.0, 4.0)
    gamma: tuple = (2.0, 0.5)
    beta: tuple = (0.0, 16.0)
    eta: tuple = (16.0, 1.0)

    def __post_init__(self):
        for xs, ys, name in ((self.alpha, self.gamma, "gamma"), (self.beta, self.eta, "eta")):
            if len(xs) != len(ys) or len(xs) < 1:
                raise ConfigError(f"{name} table: knots and values differ in length")
            if any(b <= a for a, b in zip(xs, xs[1:])):
                raise ConfigError(f"{name} table: knots must be strictly increasing")
            if any(b > a for a, b in zip(ys, ys[1:])):
                raise ConfigError(f"{name} table: values must be non-increasing")
        if min(self.gamma) <= 0:
            raise ConfigError("gamma values must be positive")
        if min(self.eta) < 1:
            raise ConfigError("eta values must be >= 1")


def scaling_map(alpha, beta, table=None):
    table = table or ScalingTable()
    if alpha < 0 or beta < 0:
        raise ConfigError("alpha and beta must be nonnegative")
    gamma = float(np.interp(alpha, table.alpha, table.gamma))
    eta = float(np.interp(beta, table.beta, table.eta))
    return gamma, eta


@dataclass(frozen=True)
class ReceiverProfile:
    sigma2: float
    alpha: float = 0.0
    beta: float = 0.0
    gamma: float = 1.0
    eta: float = 10.0
    noise_seed: int = 0
    n_override: int | None = None

    def __post_init__(self):
        if not self.sigma2 > 0:
            raise ConfigError(f"sigma2 must be positive, got {self.sigma2}")
        if self.gamma <= 0:
            raise ConfigError("gamma must be positive")
        if self.eta < 1:
            raise ConfigError("eta must be >= 1")

    @classmethod
    def from_knobs(cls, sigma2, alpha, beta, table=None, noise_seed=0, **kw):
        gamma, eta = scaling_map(alpha, beta, table)
        return cls(sigma2, alpha, beta, gamma, eta, noise_seed, **kw)


# ---------------------------------------------------------------- rate allocation


def stream_information_bits(block, mode="entropy"):
    """-sum log2 p(b_i | prior): prior entropy, or the realized code length of the bits."""
    if mode == "entropy":
        return prior_entropy_bits(block.mu)
    if mode == "bits":
        a = np.abs(block.mu)
        agree = (block.bits == 0) == (block.mu >= 0)
        # log2 sigmoid(+-a), stable for large a
        ln_p = -np.logaddexp(0.0, np.where(agree, -a, a))
        return float(-np.sum(ln_p) / math.log(2.0))
    raise ConfigError(f"unknown allocation mode {mode!r}")


def allocate_rate(stream, gamma, sigma2, mode="entropy"):
    if gamma <= 0:
        raise ConfigError("gamma must be positive")
    return int(math.ceil(gamma * stream_information_bits(stream, mode) / capacity(sigma2) - 1e-9))


# ---------------------------------------------------------------- streams


@dataclass(frozen=True, eq=False)
class StreamSet:
    blocks: tuple
    generators: tuple
    session_seed: int

    def __post_init__(self):
        if not self.blocks:
            raise ConfigError("need at least one stream")
        ks = {b.k for b in self.blocks}
        if len(ks) != 1:
            raise ConfigError(f"streams must share k, got {sorted(ks)}")
        if len(self.generators) != len(self.blocks):
            raise ConfigError("one generator per stream required")

    @classmethod
    def build(cls, blocks, omega, lam=0.0, session_seed=0):
        """Per-stream selection weights exp(lam * U) from each stream's own priors."""
        lams = np.broadcast_to(np.asarray(lam, dtype=float), (len(blocks),))
        gens = tuple(
            GeneratorStream(crng.derive_seed(session_seed, j), omega,
                            selection_weights(reliability(b.prior), float(lams[j])), b.k)
            for j, b in enumerate(blocks))
        return cls(tuple(blocks), gens, session_seed)

    @property
    def c(self):
        return len(self.blocks)

    @property
    def k(self):
        return self.blocks[0].k


def polling_weights(streams, mode="entropy"):
    return np.array([stream_information_bits(b, mode) for b in streams.blocks])


def _normalized_polling(weights):
    w = np.asarray(weights, dtype=float)
    if w.sum() <= 0:
        log.warning("all polling weights are zero; falling back to uniform polling")
        w = np.ones_like(w)
    return w / w.sum()


def poll_stream(streams, rng, mode="entropy"):
    """Stream index for the next slot, drawn in proportion to stream information."""
    p = _normalized_polling(polling_weights(streams, mode))
    return int(rng.choice(p.size, p=p))


def polling_schedule(streams, n_slots, mode="entropy"):
    """Stream index of every slot; reproducible from the session seed alone."""
    p = _normalized_polling(polling_weights(streams, mode))
    rng = np.random.default_rng(crng.derive_seed(streams.session_seed, 0x504F4C4C))
    cdf = np.cumsum(p)
    cdf[-1] = 1.0
    return np.searchsorted(cdf, rng.random(n_slots), side="right")


# ---------------------------------------------------------------- simulation


@dataclass(frozen=True)
class SimulationRecord:
    receiver_id: int
    bits_received: int
    iterations: int
    ber: float
    soft_distortion: float
    ops: int
    bits_per_source_bit: float
    ops_per_source_bit: float
    side_info_bits: float = 0.0
    truncated: bool = False
    symbols_transmitted: int = 0


class Transmitter:
    """Emits slots lazily; ``symbols_transmitted`` counts what actually went on air."""

    def __init__(self, streams, polling_mode="entropy"):
        self.streams = streams
        self.polling_mode = polling_mode
        self.schedule = np.zeros(0, dtype=np.int64)
        self.slot_bits = np.zeros(0, dtype=np.uint8)
        self._edges = [None] * streams.c
        self._emitted = np.zeros(streams.c, dtype=np.int64)

    @property
    def symbols_transmitted(self):
        return self.schedule.size

    def emit_until(self, n_slots):
        if n_slots <= self.schedule.size:
            return
        sched = polling_schedule(self.streams, n_slots, self.polling_mode)
        bits = np.zeros(n_slots, dtype=np.uint8)
        bits[: self.slot_bits.size] = self.slot_bits
        for j in range(self.streams.c):
            slots = np.flatnonzero(sched == j)
            need = slots.size
            if need == 0:
                continue
            gen, blk = self.streams.generators[j], self.streams.blocks[j]
            eo, ei, deg = gen.edges(need)
            self._edges[j] = (eo, ei, deg)
            bits[slots] = xor_by_output(blk.bits, eo, ei, need)
            self._emitted[j] = need
        self.schedule, self.slot_bits = sched, bits

    def stream_prefix(self, j, n_j):
        eo, ei, deg = self._edges[j]
        n_edges = int(deg[:n_j].sum())
        return eo[:n_edges], ei[:n_edges]


def receiver_budget(streams, receiver, mode="entropy"):
    if receiver.n_override is not None:
        return int(receiver.n_override)
    return sum(allocate_rate(b, receiver.gamma, receiver.sigma2, mode) for b in streams.blocks)


def run_broadcast(streams, receivers, max_symbols, trial_seed=0, allocation_mode="entropy"):
    """Serve every receiver from one shared slot sequence and score its decode."""
    if not receivers:
        raise ConfigError("need at least one receiver")
    budgets = [receiver_budget(streams, r, allocation_mode) for r in receivers]
    tx = Transmitter(streams, allocation_mode)
    tx.emit_until(min(max(budgets), max_symbols))
    ck = streams.c * streams.k
    side_info = sum(prior_entropy_bits(b.mu) for b in streams.blocks)
    records = []
    for rid, (r, budget) in enumerate(zip(receivers, budgets)):
        n = min(budget, max_symbols)
        noise_rng = np.random.default_rng(crng.derive_seed(trial_seed, r.noise_seed))
        rx = modulate(tx.slot_bits[:n]) + math.sqrt(r.sigma2) * noise_rng.standard_normal(n)
        llr = demodulate(rx, r.sigma2)
        sched = tx.schedule[:n]
        errors, soft, ops = 0, 0.0, 0
        for j, blk in enumerate(streams.blocks):
            slots = np.flatnonzero(sched == j)
            eo, ei = tx.stream_prefix(j, slots.size) if slots.size else (np.zeros(0, int),) * 2
            g = DecodeGraph(blk.k, slots.size, eo, ei, llr[slots], blk.mu)
            res = decode(g, r.eta)
            hard = (res.marginals < 0).astype(np.uint8)
            errors += int(np.count_nonzero(hard != blk.bits))
            soft += float(np.abs(res.soft_bits - blk.bits).sum())
            ops += res.op_count
        records.append(SimulationRecord(
            receiver_id=rid, bits_received=n, iterations=math.ceil(r.eta),
            ber=errors / ck, soft_distortion=soft / ck, ops=ops,
            bits_per_source_bit=n / ck, ops_per_source_bit=ops / ck,
            side_info_bits=side_info, truncated=budget > max_symbols,
            symbols_transmitted=tx.symbols_transmitted))
    return records


# ---------------------------------------------------------------- sweeps


@dataclass(frozen=True)
class SourceConfig:
    """How each trial's c streams are drawn and encoded."""

    k: int = 256
    c: int = 1
    certainty_low: float = 0.5
    certainty_high: float = 4.0
    bimodal: bool = False
    low_band: tuple = (1e-3, 0.5)
    high_band: tuple = (4.0, 6.0)
    high_fraction: float = 0.5
    omega: DegreeDistribution = field(default_factory=DegreeDistribution.raptor)
    lam: float | str = 0.0
    design_sigma2: float | None = None
    eps1: float = EPS1_DEFAULT
    eps2: float = EPS2_DEFAULT
    psi_target: float | None = None

    def lambdas(self, blocks, sigma2):
        """Per-stream lambda: the fixed value, or ``"auto"`` to run the design rule per stream."""
        if self.lam != "auto":
            return [float(self.lam)] * len(blocks)
        v = channel_tanh_mean(self.design_sigma2 or sigma2)
        return [design_lambda(reliability(b.prior), self.omega, v, self.eps1, self.eps2,
                              self.psi_target, exact=True).lam for b in blocks]

    def draw(self, seed):
        blocks = []
        for j in range(self.c):
            s = crng.derive_seed(seed, 0x5352, j)
            if self.bimodal:
                blocks.append(generate_bimodal(self.k, self.low_band, self.high_band,
                                               self.high_fraction, s))
            else:
                blocks.append(generate_synthetic(self.k, self.certainty_low,
                                                 self.certainty_high, s))
        return blocks


@dataclass(frozen=True)
class GridPoint:
    sigma2: float
    alpha: float = 0.0
    beta: float = 0.0
    n_total: int | None = None
    eta: float | None = None

    def receiver(self, table=None, noise_seed=0):
        gamma, eta = scaling_map(self.alpha, self.beta, table)
        if self.eta is not None:
            eta = self.eta
        return ReceiverProfile(self.sigma2, self.alpha, self.beta, gamma, eta,
                               noise_seed, self.n_total)


def _trial(args):
    point, source, table, max_symbols, seed, t = args
    trial_seed = crng.derive_seed(seed, t)
    blocks = source.draw(trial_seed)
    lams = source.lambdas(blocks, point.sigma2)
    streams = StreamSet.build(blocks, source.omega, lams, trial_seed)
    rec = run_broadcast(streams, [point.receiver(table)], max_symbols, trial_seed)[0]
    return rec


def _stderr(x):
    return float(np.std(x, ddof=1) / math.sqrt(len(x))) if len(x) > 1 else 0.0


def sweep(grid, trials, seed, source=None, table=None, max_symbols=1 << 20, jobs=1):
    """Average one-receiver broadcasts over ``trials`` seeded draws per grid point.

    Trial ``t`` uses the same source draw and noise at every grid point.
    """
    if not grid:
        raise ConfigError("sweep grid is empty")
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    source = source or SourceConfig()
    table = table or ScalingTable()
    tasks = [(p, source, table, max_symbols, seed, t) for p in grid for t in range(trials)]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as ex:
            recs = list(ex.map(_trial, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        recs = [_trial(t) for t in tasks]
    rows = []
    for g, point in enumerate(grid):
        rs = recs[g * trials:(g + 1) * trials]
        rcv = point.receiver(table)
        ber = np.array([r.ber for r in rs])
        soft = np.array([r.soft_distortion for r in rs])
        ck = source.c * source.k
        rows.append({
            "sigma2": point.sigma2, "snr_db": sigma2_to_snr_db(point.sigma2),
            "alpha": point.alpha, "beta": point.beta, "gamma": rcv.gamma, "eta": rcv.eta,
            "n_total": float(np.mean([r.bits_received for r in rs])),
            "ber_mean": float(ber.mean()), "ber_stderr": _stderr(ber),
            "soft_distortion_mean": float(soft.mean()),
            "ops_mean": float(np.mean([r.ops for r in rs])),
            "bits_per_source_bit": float(np.mean([r.bits_per_source_bit for r in rs])),
            "ops_per_source_bit": float(np.mean([r.ops_per_source_bit for r in rs])),
            "trials": trials,
            "soft_distortion_stderr": _stderr(soft),
            "side_info_bits_per_source_bit": float(np.mean([r.side_info_bits for r in rs])) / ck,
        })
    return rows


def format_real(x):
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.17g}"


def write_csv(rows, path_or_file, columns, comments=()):
    """Comma-separated, '#' comment header, LF endings, 17 significant digits."""
    own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
    fh = open(path_or_file, "w", newline="") if own else path_or_file
    try:
        for c in comments:
            fh.write(f"# {c}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([format_real(row[c]) for c in columns])
    finally:
        if own:
            fh.close()
