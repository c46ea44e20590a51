"""Flooding belief propagation for LT codes with per-bit priors.

One iteration updates every output node from the current input-to-output
messages, then every input node. The operation census of one iteration is

    tanh   E + n     channel LLR halves and edge message halves
    atanh  E         extrinsic products
    /      2E + n    the halvings plus leave-one-out division
    *      2E + n    product accumulation from 1, and the doubling after atanh
    +      E + k     marginal sums accumulated from 0
    -      E         leave-one-out subtraction

for a total of 8E + 3n + k, which is what ``OpCounter`` tallies from the
array sizes actually processed.
"""
from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field, fields

import numpy as np
from scipy.special import expit, logsumexp

from .channel import LLR_CAP
from .errors import ConfigError, StructuralError

TANH_CLAMP = 1.0 - 1e-12
TANH_FLOOR = 1e-30
MSG_CAP = LLR_CAP


@dataclass
class OpCounter:
    tanh: int = 0
    atanh: int = 0
    mul: int = 0
    div: int = 0
    add: int = 0
    sub: int = 0

    def total(self):
        return sum(getattr(self, f.name) for f in fields(self))


@dataclass(frozen=True, eq=False)
class DecodeGraph:
    """Bipartite LT graph with edges grouped by output node."""

    k: int
    n: int
    edge_out: np.ndarray
    edge_in: np.ndarray
    channel_llr: np.ndarray
    prior: np.ndarray

    def __post_init__(self):
        eo = np.asarray(self.edge_out, dtype=np.int64)
        ei = np.asarray(self.edge_in, dtype=np.int64)
        llr = np.asarray(self.channel_llr, dtype=np.float64)
        mu = np.asarray(getattr(self.prior, "mu", self.prior), dtype=np.float64)
        if eo.shape != ei.shape:
            raise StructuralError("edge arrays differ in length")
        if llr.size != self.n:
            raise StructuralError(f"{llr.size} channel LLRs for n={self.n} outputs")
        if mu.size != self.k:
            raise StructuralError(f"{mu.size} priors for k={self.k} inputs")
        if eo.size:
            if eo.min() < 0 or eo.max() >= self.n or ei.min() < 0 or ei.max() >= self.k:
                raise StructuralError("edge endpoint out of range")
            if np.any(np.diff(eo) < 0):
                raise StructuralError("edges must be grouped by output node")
            key = eo * self.k + ei
            if np.unique(key).size != key.size:
                raise StructuralError("duplicate edge")
        if self.n and np.bincount(eo, minlength=self.n).min() == 0:
            raise StructuralError("every output node needs at least one edge")
        object.__setattr__(self, "edge_out", eo)
        object.__setattr__(self, "edge_in", ei)
        object.__setattr__(self, "channel_llr", llr)
        object.__setattr__(self, "prior", mu)

    @classmethod
    def from_specs(cls, specs, channel_llr, prior, k=None):
        mu = np.asarray(getattr(prior, "mu", prior), dtype=np.float64)
        k = mu.size if k is None else k
        eo = np.repeat(np.arange(len(specs)), [s.degree for s in specs])
        ei = np.fromiter(itertools.chain.from_iterable(s.indices for s in specs),
                         dtype=np.int64, count=eo.size)
        return cls(k, len(specs), eo, ei, channel_llr, mu)

    @property
    def num_edges(self):
        return self.edge_out.size


@dataclass(frozen=True, eq=False)
class DecodeResult:
    marginals: np.ndarray
    soft_bits: np.ndarray
    iterations_run: int
    op_count: int
    ops: OpCounter
    message_mean_trace: np.ndarray
    abs_mean_trace: np.ndarray
    output_mean_trace: np.ndarray
    op_count_trace: np.ndarray
    flipped_mean_trace: np.ndarray | None = field(default=None)


def decode(graph, eta, true_bits=None):
    """Run ceil(eta) flooding iterations and return soft marginals.

    Input-to-output messages start at the priors. ``true_bits``, when given,
    only adds a trace of message means taken in the all-zero frame.
    """
    iters = math.ceil(eta)
    if iters < 1:
        raise ConfigError(f"need at least one iteration, got eta={eta}")
    k, n, E = graph.k, graph.n, graph.num_edges
    eo, ei, mu = graph.edge_out, graph.edge_in, graph.prior
    starts = np.flatnonzero(np.r_[True, np.diff(eo) != 0]) if E else np.zeros(0, np.int64)
    ops = OpCounter()
    flip = None if true_bits is None else (1.0 - 2.0 * np.asarray(true_bits, float))[ei]

    m_io = mu[ei].copy()
    m_oi = np.zeros(E)
    marg = mu.copy()
    means, abs_means, out_means, cum, flipped = [], [], [], [], []
    for _ in range(iters):
        means.append(m_io.mean() if E else 0.0)
        abs_means.append(np.abs(m_io).mean() if E else 0.0)
        if flip is not None:
            flipped.append((flip * m_io).mean() if E else 0.0)

        # output update
        t_ch = np.tanh(graph.channel_llr / 2.0)
        t_e = np.tanh(m_io / 2.0)
        ops.tanh += n + E
        ops.div += n + E
        t_e = np.where(np.abs(t_e) < TANH_FLOOR, np.where(t_e < 0, -TANH_FLOOR, TANH_FLOOR), t_e)
        prod = 1.0 * t_ch
        if E:
            prod = prod * np.multiply.reduceat(t_e, starts)
        ops.mul += n + E
        ext = np.clip(prod[eo] / t_e, -TANH_CLAMP, TANH_CLAMP)
        ops.div += E
        m_oi = np.clip(2.0 * np.arctanh(ext), -MSG_CAP, MSG_CAP)
        ops.atanh += E
        ops.mul += E
        out_means.append(m_oi.mean() if E else 0.0)

        # input update
        marg = 0.0 + mu + np.bincount(ei, weights=m_oi, minlength=k)
        ops.add += k + E
        m_io = np.clip(marg[ei] - m_oi, -MSG_CAP, MSG_CAP)
        ops.sub += E
        cum.append(ops.total())

    return DecodeResult(
        marginals=marg,
        soft_bits=1.0 - expit(marg),
        iterations_run=iters,
        op_count=ops.total(),
        ops=ops,
        message_mean_trace=np.array(means),
        abs_mean_trace=np.array(abs_means),
        output_mean_trace=np.array(out_means),
        op_count_trace=np.array(cum, dtype=np.int64),
        flipped_mean_trace=None if flip is None else np.array(flipped),
    )


def exact_marginals(graph, max_k=16):
    """Posterior LLR of every input bit by enumerating all 2^k words."""
    k = graph.k
    if k > max_k:
        raise ConfigError(f"exact marginals refused: k={k} exceeds max_k={max_k}")
    words = np.array(list(itertools.product((0, 1), repeat=k)), dtype=np.int64)
    sgn_in = 1.0 - 2.0 * words
    logw = sgn_in @ (graph.prior / 2.0)
    if graph.n:
        par = np.zeros((words.shape[0], graph.n), dtype=np.int64)
        for o, i in zip(graph.edge_out, graph.edge_in):
            par[:, o] ^= words[:, i]
        logw = logw + (1.0 - 2.0 * par) @ (graph.channel_llr / 2.0)
    out = np.empty(k)
    for i in range(k):
        zero = words[:, i] == 0
        out[i] = logsumexp(logw[zero]) - logsumexp(logw[~zero])
    return out


def predicted_complexity(n, k, omega, eta):
    """Expected operation count over ceil(eta) iterations for n outputs drawn from Omega."""
    iters = math.ceil(eta)
    if iters <= 0:
        return 0.0
    return iters * (8.0 * n * omega.mean_degree() + 3.0 * n + k)


def measured_complexity(result):
    return result.op_count


def message_increase_diagnostic(result):
    """Per-iteration change of the mean input-to-output message.

    Uses the all-zero-frame trace when the decoder was given the true bits,
    otherwise mean magnitudes.
    """
    trace = result.flipped_mean_trace
    if trace is None:
        trace = result.abs_mean_trace
    return np.diff(trace)


def write_trace_csv(result, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "mean_input_msg", "mean_output_msg", "op_count_cum"])
        for it in range(result.iterations_run):
            w.writerow([it + 1, f"{result.message_mean_trace[it]:.17g}",
                        f"{result.output_mean_trace[it]:.17g}", int(result.op_count_trace[it])])
