"""Command-line front end: ``uep-fountain {design,encode,decode,simulate,sweep}``.

Exit codes: 0 success, 2 configuration error, 3 parse or structural error,
4 infeasible design.
"""
from __future__ import annotations

import argparse
import contextlib
import logging
import math
import sys

import numpy as np

from .bp_decoder import DecodeGraph, decode, write_trace_csv
from .broadcast_sim import (SWEEP_COLUMNS, ReceiverProfile, StreamSet, allocate_rate, format_real,
                            run_broadcast, scaling_map, sweep, write_csv)
from .channel import channel_tanh_mean, demodulate, modulate
from .config import _coerce, _field_types, load_config
from .errors import ConfigError, InfeasibleError, ParseError, StructuralError, UEPFountainError
from .lt_codec import GeneratorStream, read_symbols, write_symbols, xor_by_output
from .rng import derive_seed
from .source_model import generate_bimodal, generate_synthetic, load_bits_with_priors
from .uep_design import ExactPsi, design_lambda, design_report, reliability, selection_weights

log = logging.getLogger("uep_fountain")

DESIGN_COLUMNS = ["lambda", "psi", "init_constraint", "pinsker_bound", "dkl_upper",
                  "feasible_eps1", "feasible_eps2"]
SIM_COLUMNS = ["trial", "receiver_id", "sigma2", "gamma", "eta", "bits_received", "iterations",
               "ber", "soft_distortion", "ops", "bits_per_source_bit", "ops_per_source_bit",
               "side_info_bits", "truncated", "symbols_transmitted"]


@contextlib.contextmanager
def _output(path):
    if path is None or path == "-":
        yield sys.stdout
    else:
        try:
            fh = open(path, "w", newline="")
        except OSError as e:
            raise ParseError(f"cannot open output {path}: {e}") from None
        with fh:
            yield fh


def _design_sigma2(cfg):
    return cfg.design_sigma2 if cfg.design_sigma2 is not None else cfg.sigma2[0]


def _load_block(cfg, path):
    try:
        return load_bits_with_priors(path, cfg.mu_floor)
    except OSError as e:
        raise ParseError(f"cannot read {path}: {e}") from None


def _config_block(cfg):
    """Source block from the configured path, or a synthetic draw from the seed."""
    if cfg.source_path:
        return _load_block(cfg, cfg.source_path)
    s = derive_seed(cfg.seed, 0x5352, 0)
    if cfg.source == "bimodal":
        return generate_bimodal(cfg.k, cfg.low_band, cfg.high_band, cfg.high_fraction, s, cfg.mu_floor)
    return generate_synthetic(cfg.k, cfg.certainty_low, cfg.certainty_high, s, cfg.mu_floor)


def _stream_lambda(cfg, block, omega):
    if cfg.lam != "auto":
        return float(cfg.lam)
    v = channel_tanh_mean(_design_sigma2(cfg))
    return design_lambda(reliability(block.prior), omega, v, cfg.eps1, cfg.eps2, cfg.psi_target,
                         cfg.tune_tol, cfg.lambda_min, cfg.lambda_max, exact=True).lam


def _generator(cfg, block, seed):
    omega = cfg.degree_distribution()
    lam = _stream_lambda(cfg, block, omega)
    return GeneratorStream(seed, omega, selection_weights(reliability(block.prior), lam), block.k), lam


# ---------------------------------------------------------------- subcommands


def cmd_design(cfg, args):
    block = _load_block(cfg, args.source) if args.source else _config_block(cfg)
    omega = cfg.degree_distribution()
    omega.check_k(block.k)
    u = reliability(block.prior)
    sigma2 = _design_sigma2(cfg)
    v = channel_tanh_mean(sigma2)
    choice = design_lambda(u, omega, v, cfg.eps1, cfg.eps2, cfg.psi_target, cfg.tune_tol,
                           cfg.lambda_min, cfg.lambda_max, cfg.psi_mc_samples, cfg.seed)
    lams = sorted(set(cfg.design_lambda_grid) | {choice.lam})
    rows = design_report(u, omega, lams, v, cfg.eps1, cfg.eps2, cfg.psi_mc_samples, cfg.seed)
    est = ExactPsi(u, omega)
    lo, hi = est(cfg.lambda_min), est(cfg.lambda_max)
    comments = [f"seed={cfg.seed}", f"k={block.k}", f"sigma2={format_real(sigma2)}",
                f"V={format_real(v)}", f"eps1={format_real(cfg.eps1)}", f"eps2={format_real(cfg.eps2)}",
                f"selected_lambda={format_real(choice.lam)}", f"psi={format_real(choice.psi)}",
                f"psi_target={format_real(choice.target)}", f"feasible={format_real(choice.feasible)}"]
    with _output(args.out) as fh:
        write_csv(rows, fh, DESIGN_COLUMNS, comments)
    if not choice.feasible:
        ic = (v * lo, v * hi)
        pk = sorted((0.5 * (lo - 1) ** 2, 0.5 * (hi - 1) ** 2))
        raise InfeasibleError(
            f"no lambda in [{cfg.lambda_min}, {cfg.lambda_max}] meets eps1={cfg.eps1} and "
            f"eps2={cfg.eps2}: achievable V*Psi in [{ic[0]:.6g}, {ic[1]:.6g}], "
            f"(Psi-1)^2/2 in [{pk[0]:.6g}, {pk[1]:.6g}]", interval=ic)
    return 0


def cmd_encode(cfg, args):
    path = args.source or cfg.source_path
    if not path:
        raise ConfigError("encode needs a source priors file (argument or source_path)")
    block = _load_block(cfg, path)
    gen, lam = _generator(cfg, block, cfg.seed)
    if cfg.encode_n is not None:
        n = cfg.encode_n
    else:
        gamma, _ = scaling_map(cfg.alpha[0], cfg.beta[0], cfg.scaling_table())
        n = allocate_rate(block, gamma, cfg.sigma2[0], cfg.allocation_mode)
    eo, ei, _ = gen.edges(n)
    bits = xor_by_output(block.bits, eo, ei, n)
    if args.out is None:
        raise ConfigError("encode needs --out")
    try:
        write_symbols(args.out, bits, block.k, cfg.seed)
    except OSError as e:
        raise ParseError(f"cannot write {args.out}: {e}") from None
    log.info("wrote %d symbols (k=%d, lambda=%.6g) to %s", n, block.k, lam, args.out)
    return 0


def channel_llrs(bits, sigma2, seed, llr_cap):
    """LLRs seen by the decoder: 0 is noiseless (+-llr_cap), inf erases every symbol."""
    bits = np.asarray(bits, dtype=np.uint8)
    if sigma2 == 0:
        return llr_cap * (1.0 - 2.0 * bits)
    if math.isinf(sigma2):
        return np.zeros(bits.size)
    rng = np.random.default_rng(derive_seed(seed, 0x4E4F4953))
    rx = modulate(bits) + math.sqrt(sigma2) * rng.standard_normal(bits.size)
    return demodulate(rx, sigma2, llr_cap)


def cmd_decode(cfg, args):
    try:
        sym_bits, k, seed = read_symbols(args.symbols)
    except OSError as e:
        raise ParseError(f"cannot read {args.symbols}: {e}") from None
    block = _load_block(cfg, args.priors)
    if k != block.k:
        raise StructuralError(f"{args.symbols} has k={k} but {args.priors} holds {block.k} bits")
    gen, _ = _generator(cfg, block, seed)
    n = sym_bits.size
    eo, ei, _ = gen.edges(n)
    llr = channel_llrs(sym_bits, cfg.decode_sigma2, seed, cfg.llr_cap)
    res = decode(DecodeGraph(k, n, eo, ei, llr, block.mu), cfg.decode_eta)
    with _output(args.out) as fh:
        fh.write(f"# seed={seed}\n# k={k}\n# n={n}\n# sigma2={format_real(cfg.decode_sigma2)}\n")
        fh.write("index,marginal_llr,p1\n")
        for i in range(k):
            fh.write(f"{i},{format_real(res.marginals[i])},{format_real(res.soft_bits[i])}\n")
        fh.write(f"# op_count={res.op_count}\n")
    if args.trace:
        target = f"{args.out}.trace.csv" if args.out and args.out != "-" else "decode.trace.csv"
        write_trace_csv(res, target)
    return 0


def _broadcast_lists(*lists):
    size = max(len(x) for x in lists)
    for x in lists:
        if len(x) not in (1, size):
            raise ConfigError("receiver lists (sigma2, alpha, beta, n_total, eta) must have equal length or length 1")
    return [[x[i] if len(x) > 1 else x[0] for x in lists] for i in range(size)]


def receivers_from_config(cfg):
    table = cfg.scaling_table()
    ns = cfg.n_total if cfg.n_total is not None else [None]
    etas = cfg.eta if cfg.eta is not None else [None]
    out = []
    for rid, (s, a, b, n, e) in enumerate(_broadcast_lists(cfg.sigma2, cfg.alpha, cfg.beta, ns, etas)):
        gamma, eta = scaling_map(a, b, table)
        out.append(ReceiverProfile(s, a, b, gamma, eta if e is None else e, rid,
                                   None if n is None else int(n)))
    return out


def cmd_simulate(cfg, args):
    source = cfg.source_config()
    receivers = receivers_from_config(cfg)
    rows = []
    for t in range(cfg.trials):
        trial_seed = derive_seed(cfg.seed, t)
        blocks = source.draw(trial_seed)
        lams = source.lambdas(blocks, _design_sigma2(cfg))
        streams = StreamSet.build(blocks, source.omega, lams, trial_seed)
        recs = run_broadcast(streams, receivers, cfg.max_symbols, trial_seed, cfg.allocation_mode)
        for r, rec in zip(receivers, recs):
            rows.append({"trial": t, "sigma2": r.sigma2, "gamma": r.gamma, "eta": r.eta,
                         **rec.__dict__})
    with _output(args.out) as fh:
        write_csv(rows, fh, SIM_COLUMNS, [f"seed={cfg.seed}", f"trials={cfg.trials}",
                                          f"receivers={len(receivers)}"])
    return 0


def cmd_sweep(cfg, args):
    rows = sweep(cfg.grid(), cfg.trials, cfg.seed, cfg.source_config(), cfg.scaling_table(),
                 cfg.max_symbols, cfg.jobs)
    with _output(args.out) as fh:
        write_csv(rows, fh, SWEEP_COLUMNS, [f"seed={cfg.seed}", f"trials={cfg.trials}",
                                            f"k={cfg.k}", f"c={cfg.c}", f"lam={cfg.lam}"])
    return 0


COMMANDS = {"design": cmd_design, "encode": cmd_encode, "decode": cmd_decode,
            "simulate": cmd_simulate, "sweep": cmd_sweep}


def build_parser():
    p = argparse.ArgumentParser(prog="uep-fountain", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value config file")
    common.add_argument("--seed", type=int, help="unsigned 64-bit seed, overrides the config")
    common.add_argument("--jobs", type=int, help="worker processes for sweeps")
    common.add_argument("--out", help="output path (default stdout)")
    common.add_argument("--trace", action="store_true", help="also write a per-iteration decode trace")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one config key")
    sub = p.add_subparsers(dest="command", required=True)
    d = sub.add_parser("design", parents=[common], help="tune lambda and report the design constraints")
    d.add_argument("source", nargs="?", help="bits-with-priors file (default: synthetic draw)")
    e = sub.add_parser("encode", parents=[common], help="write an NLTS coded-symbol file")
    e.add_argument("source", nargs="?", help="bits-with-priors file")
    dc = sub.add_parser("decode", parents=[common], help="decode an NLTS file against its priors")
    dc.add_argument("symbols")
    dc.add_argument("priors")
    sub.add_parser("simulate", parents=[common], help="per-trial broadcast records")
    sub.add_parser("sweep", parents=[common], help="averaged grid sweep")
    return p


def _load(args):
    overrides = {}
    types = _field_types()
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, val = (s.strip() for s in item.split("=", 1))
        if key not in types:
            raise ConfigError(f"unknown key {key!r}")
        overrides[key] = _coerce(key, types[key], val)
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.jobs is not None:
        overrides["jobs"] = args.jobs
    return load_config(args.config, **overrides)


def main(argv=None):
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _load(args)
        return COMMANDS[args.command](cfg, args)
    except InfeasibleError as e:
        print(f"infeasible design: {e}", file=sys.stderr)
        return e.exit_code
    except UEPFountainError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
