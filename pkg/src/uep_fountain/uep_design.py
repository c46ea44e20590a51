"""Design quantities for prior-aware LT codes.

Reliability statistics of the priors, exponential selection weights, the
expected subset product ``Psi(lambda)`` and its tuning, and the decoding
initialization / per-symbol information constraints derived from it.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import ConfigError, InfeasibleError

STABILITY_OMEGA2 = 1.0 / math.log(16.0)
DEFAULT_D_MAX = 16
EPS1_DEFAULT = 0.05
EPS2_DEFAULT = 1e-4
PSI_MC_SAMPLES = 4096
LAMBDA_MAX = 50.0
BISECTION_ITERS = 60

# Standard Raptor-code output distribution, truncated at degree 16 below.
_RAPTOR_OMEGA = {1: 0.007969, 2: 0.493570, 3: 0.166220, 4: 0.072646, 5: 0.082558,
                 8: 0.056058, 9: 0.037229, 19: 0.055590, 65: 0.025023, 66: 0.003135}


@dataclass(frozen=True, eq=False)
class DegreeDistribution:
    """Output-degree law Omega(d), stored as ``omega[d - 1]`` for d = 1..d_max."""

    omega: np.ndarray
    stability: bool = False

    def __post_init__(self):
        om = np.array(self.omega, dtype=np.float64)
        if om.ndim != 1 or om.size == 0:
            raise ConfigError("degree distribution must be a non-empty vector")
        if np.any(om < 0) or not np.all(np.isfinite(om)):
            raise ConfigError("degree probabilities must be finite and nonnegative")
        if abs(om.sum() - 1.0) > 1e-12:
            raise ConfigError(f"degree probabilities sum to {om.sum()!r}, not 1")
        # trailing zeros do not extend d_max
        nz = np.flatnonzero(om)
        om = om[: nz[-1] + 1]
        if self.stability and (om.size < 2 or om[1] <= STABILITY_OMEGA2):
            raise ConfigError(f"stability floor requires Omega(2) > 1/ln 16 = {STABILITY_OMEGA2:.4f}")
        om.setflags(write=False)
        object.__setattr__(self, "omega", om)

    @classmethod
    def from_dict(cls, probs, stability=False):
        d_max = max(probs)
        if min(probs) < 1:
            raise ConfigError("degrees start at 1")
        om = np.zeros(d_max)
        for d, p in probs.items():
            om[d - 1] = p
        total = om.sum()
        if total <= 0:
            raise ConfigError("degree distribution has no mass")
        if abs(total - 1.0) > 1e-9:
            raise ConfigError(f"degree probabilities sum to {total}, not 1")
        return cls(om / total, stability=stability)

    @classmethod
    def uniform(cls, d_max):
        return cls(np.full(d_max, 1.0 / d_max))

    @classmethod
    def raptor(cls, d_max=DEFAULT_D_MAX, stability=True):
        """Raptor-code distribution with degrees above ``d_max`` dropped and the rest renormalized."""
        kept = {d: p for d, p in _RAPTOR_OMEGA.items() if d <= d_max}
        total = sum(kept.values())
        return cls.from_dict({d: p / total for d, p in kept.items()}, stability=stability)

    @property
    def d_max(self):
        return self.omega.size

    @property
    def degrees(self):
        return np.arange(1, self.d_max + 1)

    def mean_degree(self):
        return float(np.dot(self.degrees, self.omega))

    def edge_degree(self):
        """Degree law seen from a random edge: omega(d) proportional to d * Omega(d)."""
        w = self.degrees * self.omega
        return w / w.sum()

    def check_k(self, k):
        if self.d_max > k:
            raise ConfigError(f"d_max={self.d_max} exceeds stream length k={k}")

    def to_dict(self):
        return {int(d): float(p) for d, p in zip(self.degrees, self.omega) if p > 0}


@dataclass(frozen=True, eq=False)
class SelectionWeights:
    rho: np.ndarray
    lam: float = 0.0

    def __post_init__(self):
        rho = np.array(self.rho, dtype=np.float64)
        if rho.ndim != 1 or rho.size == 0:
            raise ConfigError("selection weights must be a non-empty vector")
        if not np.all(np.isfinite(rho)) or np.any(rho <= 0):
            raise ConfigError("selection weights must be strictly positive and finite")
        rho = rho / rho.sum()
        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)

    @classmethod
    def uniform(cls, k):
        return cls(np.full(k, 1.0 / k), 0.0)

    @property
    def k(self):
        return self.rho.size


@dataclass(frozen=True, eq=False)
class ReliabilityProfile:
    u: np.ndarray
    v_channel: float


def _mu_of(prior):
    return np.asarray(getattr(prior, "mu", prior), dtype=np.float64)


def reliability(prior):
    """Expected tanh(mu_tilde / 2) of each flipped prior: [2 sigmoid(|mu|) - 1] tanh(|mu|/2)."""
    a = np.abs(_mu_of(prior))
    return (2.0 * expit(a) - 1.0) * np.tanh(a / 2.0)


def selection_weights(u, lam):
    u = np.asarray(u, dtype=np.float64)
    if not np.all(np.isfinite(u)):
        raise ConfigError("reliabilities must be finite")
    z = lam * u
    z = z - z.max()
    return SelectionWeights(np.exp(z), float(lam))


def _as_omega(omega):
    if isinstance(omega, DegreeDistribution):
        return omega
    if isinstance(omega, dict):
        return DegreeDistribution.from_dict(omega)
    return DegreeDistribution(omega)


class PsiEstimator:
    """Monte-Carlo Psi(lambda) with common random numbers.

    Degrees (drawn from the edge-degree law) and Gumbel perturbations are
    drawn once; each lambda re-ranks the same perturbed keys. For U >= 0 the
    per-sample subset product is then non-decreasing in lambda, so the
    estimate is monotone by construction.
    """

    def __init__(self, u, omega, mc_samples=PSI_MC_SAMPLES, seed=0):
        if mc_samples < 1:
            raise ConfigError("mc_samples must be >= 1")
        self.u = np.asarray(u, dtype=np.float64)
        self.omega = _as_omega(omega)
        self.omega.check_k(self.u.size)
        rng = np.random.default_rng(seed)
        cdf = np.cumsum(self.omega.edge_degree())
        cdf[-1] = 1.0
        self.degrees = np.searchsorted(cdf, rng.random(mc_samples), side="right") + 1
        self.gumbel = rng.gumbel(size=(mc_samples, self.u.size))
        self._rows = np.arange(mc_samples)

    def samples(self, lam):
        keys = lam * self.u + self.gumbel
        order = np.argsort(-keys, axis=1)
        cum = np.cumprod(self.u[order], axis=1)
        return cum[self._rows, self.degrees - 1]

    def __call__(self, lam):
        return float(self.samples(lam).mean())

    def stderr(self, lam):
        s = self.samples(lam)
        return float(s.std(ddof=1) / math.sqrt(s.size)) if s.size > 1 else float("inf")


def psi(lam, u, omega, mc_samples=PSI_MC_SAMPLES, seed=0):
    """Expected product of reliabilities over a coded symbol's neighbourhood."""
    return PsiEstimator(u, omega, mc_samples, seed)(lam)


def elementary_symmetric(x, d_max):
    """e_0..e_{d_max} of the entries of ``x`` along its last axis, by the standard recurrence."""
    x = np.asarray(x, dtype=np.float64)
    e = np.zeros(x.shape[:-1] + (d_max + 1,))
    e[..., 0] = 1.0
    for i in range(x.shape[-1]):
        e[..., 1:] = e[..., 1:] + x[..., i, None] * e[..., :-1]
    return e


def psi_exact(lam, u, omega):
    """Psi under the conditional-Poisson subset law p(S_d) proportional to prod rho_j.

    Uses E[prod U | |S|=d] = e_d(rho * U) / e_d(rho), exact for any k.
    """
    u = np.asarray(u, dtype=np.float64)
    om = _as_omega(omega)
    om.check_k(u.size)
    rho = selection_weights(u, lam).rho
    # rescale to keep e_d in range for large k
    rho = rho * u.size
    num, den = elementary_symmetric(np.stack([rho * u, rho]), om.d_max)[:, 1:]
    return float(np.dot(om.edge_degree(), num / den))


class ExactPsi:
    """Psi(lambda) under the conditional-Poisson subset law; a deterministic drop-in for PsiEstimator."""

    def __init__(self, u, omega):
        self.u = np.asarray(u, dtype=np.float64)
        self.omega = _as_omega(omega)

    def __call__(self, lam):
        return psi_exact(lam, self.u, self.omega)


def tune_lambda(u, omega, target, tol=1e-3, lambda_max=LAMBDA_MAX, lambda_min=-LAMBDA_MAX,
                mc_samples=PSI_MC_SAMPLES, seed=0, max_iter=BISECTION_ITERS, estimator=None):
    """Lambda in [lambda_min, lambda_max] whose Psi lies within ``tol`` of ``target``.

    Returns 0 whenever Psi(0) already meets the target; otherwise bisects for
    the crossing Psi(lambda) = target and keeps the closer end of the bracket.
    """
    est = estimator if estimator is not None else PsiEstimator(u, omega, mc_samples, seed)
    if abs(est(0.0) - target) < tol:
        return 0.0
    lo_val, hi_val = est(lambda_min), est(lambda_max)
    if not (lo_val - tol < target < hi_val + tol):
        raise InfeasibleError(
            f"infeasible target Psi={target:.6g}: achievable interval is "
            f"[{lo_val:.6g}, {hi_val:.6g}] for lambda in [{lambda_min}, {lambda_max}]",
            interval=(lo_val, hi_val))
    lo, hi = float(lambda_min), float(lambda_max)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        val = est(mid)
        if abs(val - target) < 0.25 * tol:
            return mid
        if val < target:
            lo = mid
        else:
            hi = mid
    best = min((lo, hi), key=lambda x: abs(est(x) - target))
    if abs(est(best) - target) >= tol:
        raise InfeasibleError(
            f"Psi jumps past target {target:.6g} near lambda={hi:.6g}; raise mc_samples or tol",
            interval=(lo_val, hi_val))
    return best


@dataclass(frozen=True)
class DesignChoice:
    lam: float
    psi: float
    target: float
    init_constraint: float
    pinsker_bound: float
    feasible_eps1: bool
    feasible_eps2: bool

    @property
    def feasible(self):
        return self.feasible_eps1 and self.feasible_eps2


def design_lambda(u, omega, v_channel, eps1=EPS1_DEFAULT, eps2=EPS2_DEFAULT, psi_target=None,
                  tol=1e-3, lambda_min=-LAMBDA_MAX, lambda_max=LAMBDA_MAX,
                  mc_samples=PSI_MC_SAMPLES, seed=0, exact=False):
    """Pick lambda for one stream.

    Without an explicit ``psi_target`` the target is the smallest Psi that
    still clears the initialization constraint (V * Psi > eps1), which spends
    as much selection mass on uncertain bits as initialization allows. The
    target is clipped into the reachable interval, so a stream whose Psi does
    not depend on lambda gets lambda = 0; feasibility is reported, not forced.
    """
    est = ExactPsi(u, omega) if exact else PsiEstimator(u, omega, mc_samples, seed)
    if psi_target is None:
        lo_val, hi_val = est(lambda_min), est(lambda_max)
        want = (eps1 / v_channel + tol) if v_channel > 0 else float("inf")
        psi_target = float(np.clip(want, lo_val, hi_val))
    lam = tune_lambda(u, omega, psi_target, tol, lambda_max, lambda_min, estimator=est)
    p = est(lam)
    ic, pb = v_channel * p, pinsker_from_psi(p)
    return DesignChoice(lam, p, psi_target, ic, pb, ic > eps1, pb > eps2)


def init_constraint(u, omega, lam, v_channel, mc_samples=PSI_MC_SAMPLES, seed=0):
    """V * Psi(lambda); BP initializes well when this exceeds eps1."""
    return v_channel * psi(lam, u, omega, mc_samples, seed)


def pinsker_from_psi(psi_value):
    return 0.5 * (psi_value - 1.0) ** 2


def pinsker_mi_bound(u, omega, lam, mc_samples=PSI_MC_SAMPLES, seed=0):
    """Lower bound on per-symbol mutual information (nats): (Psi - 1)^2 / 2."""
    return pinsker_from_psi(psi(lam, u, omega, mc_samples, seed))


def dkl_upper_bound(u, omega):
    """4 [E_omega prod of the d smallest U - 1]^2: the subset-free surrogate for the symbol KL."""
    u = np.sort(np.asarray(u, dtype=np.float64))
    om = _as_omega(omega)
    om.check_k(u.size)
    prods = np.cumprod(u)[: om.d_max]
    avg = float(np.dot(om.edge_degree(), prods))
    return 4.0 * (avg - 1.0) ** 2


def _bern_kl(q0, p0):
    """KL(Bern(q0) || Bern(p0)) in nats over the outcome v=0 with probability q0."""
    q0, p0 = np.asarray(q0, dtype=np.float64), np.asarray(p0, dtype=np.float64)
    q1, p1 = 1.0 - q0, 1.0 - p0
    with np.errstate(divide="ignore", invalid="ignore"):
        t0 = np.where(q0 > 0, q0 * (np.log(q0) - np.log(p0)), 0.0)
        t1 = np.where(q1 > 0, q1 * (np.log(q1) - np.log(p1)), 0.0)
    return t0 + t1


def exact_symbol_kl(block, omega, weights, max_k=12, average_flips=True):
    """Exact KL between the coded-symbol law given the bits and given only the priors.

    Subsets follow the conditional-Poisson law p(S_d) proportional to prod rho_j
    and every subset of every degree is enumerated explicitly.

    With ``average_flips`` (default) the result is taken in the all-zero frame:
    the symbol given the bits is deterministic, and the KL is averaged over the
    flip pattern of the priors, each prior independently pointing the wrong
    way with probability 1 - sigmoid(|mu|). Otherwise the block's own bits and
    signed priors are used as-is.
    """
    k = block.k
    if k > max_k:
        raise ConfigError(f"exact enumeration refused: k={k} exceeds max_k={max_k}")
    om = _as_omega(omega)
    om.check_k(k)
    rho = weights.rho if isinstance(weights, SelectionWeights) else np.asarray(weights, float)
    if rho.size != k:
        raise ConfigError("weights length does not match block length")
    w_edge = om.edge_degree()

    subsets = [s for d in range(1, om.d_max + 1) for s in itertools.combinations(range(k), d)]
    mask = np.zeros((len(subsets), k), dtype=np.int64)
    for r, s in enumerate(subsets):
        mask[r, list(s)] = 1
    sizes = mask.sum(axis=1)
    # p(S) within its degree class, then scaled by omega(|S|)
    raw = np.exp(mask @ np.log(rho))
    norm = np.zeros(om.d_max + 1)
    np.add.at(norm, sizes, raw)
    p_subset = w_edge[sizes - 1] * raw / norm[sizes]

    if average_flips:
        a = np.abs(block.mu)
        t = np.tanh(a / 2.0)
        log_t = np.log(np.maximum(t, 1e-300))
        base = np.exp(mask @ log_t) * (mask @ (t > 0) == sizes)
        flips = np.array(list(itertools.product((0, 1), repeat=k)), dtype=np.int64)
        s_right = expit(a)
        p_flip = np.prod(np.where(flips == 1, 1.0 - s_right, s_right), axis=1)
        parity = (flips @ mask.T) & 1
        signed = np.where(parity == 1, -base, base)
        A = signed @ p_subset
        p0 = 0.5 * (1.0 + A)
        return float(np.dot(p_flip, _bern_kl(np.ones_like(p0), p0)))

    t = np.tanh(np.asarray(block.mu) / 2.0)
    sgn = 1.0 - 2.0 * block.bits.astype(np.float64)
    prod_t = np.array([np.prod(t[list(s)]) for s in subsets])
    prod_b = np.array([np.prod(sgn[list(s)]) for s in subsets])
    p0 = 0.5 * (1.0 + prod_t @ p_subset)
    q0 = 0.5 * (1.0 + prod_b @ p_subset)
    return float(_bern_kl(q0, p0))


def design_report(u, omega, lambdas, v_channel, eps1=EPS1_DEFAULT, eps2=EPS2_DEFAULT,
                  mc_samples=PSI_MC_SAMPLES, seed=0):
    """One row per lambda with Psi, both constraint values and the KL surrogate."""
    est = PsiEstimator(u, omega, mc_samples, seed)
    dkl = dkl_upper_bound(u, omega)
    rows = []
    for lam in lambdas:
        p = est(lam)
        ic = v_channel * p
        pb = pinsker_from_psi(p)
        rows.append({
            "lambda": float(lam), "psi": p, "init_constraint": ic,
            "pinsker_bound": pb, "dkl_upper": dkl,
            "feasible_eps1": ic > eps1, "feasible_eps2": pb > eps2,
        })
    return rows
