"""Frequentist and Bayesian evaluation of benchmark results.

The Bayesian part fits log-log running-time models with a small
random-walk Metropolis sampler (one coordinate at a time, step sizes
adapted during warmup). Every model is linear-Gaussian in log space::

    log T_A ~ Normal(alpha + beta * x [+ gamma * log(diam) * I], sigma)

where ``x`` is either ``log n`` (size scaling) or ``log T_B`` on the same
instance (relative time). ``I`` is a Bernoulli model indicator that is
resampled by Gibbs; while ``I = 0`` the coefficient ``gamma`` is drawn
from its prior, which doubles as pseudo-prior.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import stats as _sps

__all__ = [
    "PairedSample",
    "WilcoxonResult",
    "wilcoxon_signed_rank",
    "confidence_interval_mean",
    "hpd_interval",
    "rope_verdict",
    "rope_decision",
    "BayesFactorResult",
    "bayes_factor_indicator",
    "ModelSpec",
    "PosteriorTrace",
    "ParameterSummary",
    "metropolis",
    "mcmc_sample",
    "gelman_rubin",
    "mc_standard_error",
]

EXACT_WILCOXON_MAX = 25


@dataclass
class PairedSample:
    a: np.ndarray
    b: np.ndarray
    labels: list | None = None

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        if self.a.shape != self.b.shape or self.a.ndim != 1 or self.a.size < 1:
            raise ValueError("paired samples need equal, non-zero lengths")
        if not (np.all(np.isfinite(self.a)) and np.all(np.isfinite(self.b))):
            raise ValueError("paired samples must be finite")
        if self.labels is not None and len(self.labels) != self.a.size:
            raise ValueError("one label per pair required")


@dataclass(frozen=True)
class WilcoxonResult:
    statistic: float
    pvalue: float
    n: int
    method: str


def _signed_rank_counts(doubled_ranks: np.ndarray) -> np.ndarray:
    """Number of sign assignments yielding each value of the doubled W+."""
    total = int(doubled_ranks.sum())
    counts = np.zeros(total + 1, dtype=object)
    counts[0] = 1
    reach = 0
    for r in doubled_ranks.astype(int):
        counts[r:reach + r + 1] = counts[r:reach + r + 1] + counts[:reach + 1].copy()
        reach += r
    return counts


def wilcoxon_signed_rank(a, b=None, *, exact_max: int = EXACT_WILCOXON_MAX) -> WilcoxonResult:
    """Two-sided Wilcoxon signed-rank test on paired data.

    Zero differences are dropped and tied magnitudes receive mid-ranks. The
    statistic is ``min(W+, W-)``. With at most ``exact_max`` non-zero
    differences the p-value is exact (the null distribution over all
    ``2**k`` sign flips, counted by dynamic programming); above that a
    tie-corrected normal approximation is used.
    """
    sample = a if isinstance(a, PairedSample) else PairedSample(a, b)
    d = sample.a - sample.b
    d = d[d != 0]
    k = d.size
    if k == 0:
        warnings.warn("all paired differences are zero; no evidence of a difference",
                      stacklevel=2)
        return WilcoxonResult(0.0, 1.0, 0, "degenerate")
    ranks = _sps.rankdata(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    w_minus = float(ranks[d < 0].sum())
    w = min(w_plus, w_minus)
    if k <= exact_max:
        doubled = np.rint(2 * ranks).astype(int)
        counts = _signed_rank_counts(doubled)
        tail = sum(counts[: int(round(2 * w)) + 1])
        p = min(1.0, 2.0 * float(tail) / float(2 ** k))
        return WilcoxonResult(w, p, k, "exact")
    _, tie_counts = np.unique(ranks, return_counts=True)
    mean = k * (k + 1) / 4.0
    var = k * (k + 1) * (2 * k + 1) / 24.0 - np.sum(tie_counts ** 3 - tie_counts) / 48.0
    z = (w - mean) / math.sqrt(var)
    p = min(1.0, 2.0 * _sps.norm.cdf(z))
    return WilcoxonResult(w, float(p), k, "normal")


def confidence_interval_mean(values, level: float = 0.95) -> tuple[float, float]:
    """Student-t interval for the mean."""
    x = np.asarray(values, dtype=float)
    if x.size < 2:
        raise ValueError("need at least two values")
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    m = x.mean()
    half = _sps.t.ppf((1 + level) / 2, x.size - 1) * x.std(ddof=1) / math.sqrt(x.size)
    return float(m - half), float(m + half)


def hpd_interval(samples, mass: float = 0.95) -> tuple[float, float]:
    """Shortest window of sorted samples holding ``ceil(mass * k)`` of them.

    Ties go to the lowest window.
    """
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    k = x.size
    if k < 100:
        raise ValueError(f"need at least 100 samples, got {k}")
    if not 0 < mass <= 1:
        raise ValueError("mass must lie in (0, 1]")
    inside = max(1, math.ceil(mass * k - 1e-9))
    widths = x[inside - 1:] - x[: k - inside + 1]
    i = int(np.argmin(widths))
    return float(x[i]), float(x[i + inside - 1])


def rope_verdict(low: float, high: float, rope_low: float, rope_high: float) -> str:
    """Compare a credible interval with a region of practical equivalence."""
    if not rope_low < rope_high:
        raise ValueError("rope_low must be below rope_high")
    if rope_low <= low and high <= rope_high:
        return "practically_equivalent"
    if high < rope_low or low > rope_high:
        return "different"
    return "inconclusive"


def rope_decision(samples, rope_low: float, rope_high: float,
                  hpd_mass: float = 0.95) -> str:
    """ROPE verdict for the HPD interval of posterior ``samples``."""
    if not rope_low < rope_high:
        raise ValueError("rope_low must be below rope_high")
    return rope_verdict(*hpd_interval(samples, hpd_mass), rope_low, rope_high)


@dataclass(frozen=True)
class BayesFactorResult:
    inclusion_probability: float
    bayes_factor: float
    bound: str | None = None  # "lower"/"upper" when the chain never switched


def bayes_factor_indicator(indicator, prior_odds: float = 1.0) -> BayesFactorResult:
    """Bayes factor from posterior samples of a binary model indicator.

    When every sample agrees, the odds are computed at the Monte-Carlo
    resolution ``1/k`` and reported as a bound.
    """
    x = np.asarray(indicator, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("empty indicator trace")
    if prior_odds <= 0:
        raise ValueError("prior_odds must be positive")
    p = float(x.mean())
    bound = None
    p_eff = p
    if p >= 1.0:
        p_eff, bound = 1.0 - 1.0 / x.size, "lower"
    elif p <= 0.0:
        p_eff, bound = 1.0 / x.size, "upper"
    return BayesFactorResult(p, (p_eff / (1 - p_eff)) / prior_odds, bound)


# -- MCMC -------------------------------------------------------------------

VARIANTS = ("size_scaling", "relative_time", "relative_time_with_diameter")


@dataclass
class ModelSpec:
    """Model variant and prior hyperparameters.

    Normal priors are given as (mean, sd); sigma (the noise standard
    deviation) gets an inverse-gamma(shape, scale) prior. The slope prior
    defaults to mean 1 for size scaling and mean 0 for the relative-time
    models, both with sd 10.
    """

    variant: str = "relative_time"
    alpha_prior: tuple[float, float] = (0.0, 10.0)
    beta_prior: tuple[float, float] | None = None
    gamma_prior: tuple[float, float] = (0.0, 10.0)
    sigma_prior: tuple[float, float] = (1.0, 1.0)
    inclusion_prior: float = 0.5

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown model variant {self.variant!r}; expected one of {VARIANTS}")
        if self.beta_prior is None:
            self.beta_prior = (1.0, 10.0) if self.variant == "size_scaling" else (0.0, 10.0)
        if self.sigma_prior[0] <= 0 or self.sigma_prior[1] <= 0:
            raise ValueError("inverse-gamma hyperparameters must be positive")
        if not 0 < self.inclusion_prior < 1:
            raise ValueError("inclusion_prior must lie in (0, 1)")

    @property
    def parameter_names(self) -> tuple[str, ...]:
        if self.variant == "relative_time_with_diameter":
            return ("alpha", "beta", "gamma", "sigma", "selected_model")
        return ("alpha", "beta", "sigma")


@dataclass(frozen=True)
class ParameterSummary:
    mean: float
    hpd_low: float
    hpd_high: float
    rhat: float


@dataclass
class PosteriorTrace:
    """Post-warmup draws, shape ``(chains, draws)`` per parameter."""

    samples: dict
    acceptance: dict
    chains: int
    warmup: int
    warnings: list = field(default_factory=list)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.samples[name].ravel()

    @property
    def names(self) -> list[str]:
        return list(self.samples)

    def rhat(self, name: str) -> float:
        return gelman_rubin(self.samples[name])

    def summary(self, mass: float = 0.95) -> dict[str, ParameterSummary]:
        """Mean, HPD bounds and R-hat per parameter.

        ``gamma`` is summarized over draws with the indicator switched on.
        """
        out = {}
        included = None
        if "selected_model" in self.samples:
            included = self.samples["selected_model"].ravel() >= 0.5
        for name, s in self.samples.items():
            flat = s.ravel()
            if name == "gamma" and included is not None and included.sum() >= 100:
                # draws taken while excluded come from the pseudo-prior
                flat = flat[included]
            if name == "selected_model":
                out[name] = ParameterSummary(float(flat.mean()), 0.0, 1.0, float("nan"))
                continue
            low, high = hpd_interval(flat, mass)
            out[name] = ParameterSummary(float(flat.mean()), low, high, self.rhat(name))
        return out


def gelman_rubin(chains: np.ndarray) -> float:
    """Potential scale reduction factor over chains of equal length."""
    x = np.asarray(chains, dtype=float)
    m, n = x.shape
    if m < 2:
        return float("nan")
    within = x.var(axis=1, ddof=1).mean()
    between = n * x.mean(axis=1).var(ddof=1)
    if within == 0:
        return 1.0 if between == 0 else float("inf")
    var_hat = (n - 1) / n * within + between / n
    return float(math.sqrt(var_hat / within))


def mc_standard_error(samples, batches: int = 20) -> float:
    """Monte-Carlo standard error of the mean by batch means."""
    x = np.asarray(samples, dtype=float).ravel()
    size = x.size // batches
    if size < 2:
        raise ValueError("not enough samples for batch means")
    means = x[: size * batches].reshape(batches, size).mean(axis=1)
    return float(means.std(ddof=1) / math.sqrt(batches))


def metropolis(
    log_density: Callable[[np.ndarray], float],
    initial: Sequence,
    *,
    draws: int = 2000,
    warmup: int = 1000,
    seed=0,
    step: Sequence | None = None,
    active: Callable[[np.ndarray], np.ndarray] | None = None,
    extra_step: Callable[[np.ndarray, np.random.Generator], None] | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Single chain of coordinate-wise random-walk Metropolis.

    Step sizes are adapted every 50 warmup sweeps towards a 30% acceptance
    rate (the 20-40% band) and frozen afterwards. ``active(theta)`` may mask
    coordinates out of the Metropolis sweep; ``extra_step`` runs after each
    sweep and may update ``theta`` in place (Gibbs moves).

    Returns the post-warmup draws ``(draws, dim)`` and the post-warmup
    acceptance rate per coordinate.
    """
    rng = np.random.default_rng(seed)
    theta = np.array(initial, dtype=float)
    dim = theta.size
    steps = np.ones(dim) if step is None else np.array(step, dtype=float)
    current = log_density(theta)
    if not np.isfinite(current):
        raise ValueError("non-finite log density at the initial point; consider "
                         "rescaling the data (e.g. log-transform, change units)")
    total = warmup + draws
    noise = rng.standard_normal((total, dim))
    log_u = np.log(rng.random((total, dim)))
    out = np.empty((draws, dim))
    accepted = np.zeros(dim)
    tried = np.zeros(dim)
    batch_acc = np.zeros(dim)
    batch_try = np.zeros(dim)
    for it in range(total):
        mask = active(theta) if active is not None else None
        for j in range(dim):
            if mask is not None and not mask[j]:
                continue
            old = theta[j]
            theta[j] = old + steps[j] * noise[it, j]
            proposal = log_density(theta)
            ok = log_u[it, j] < proposal - current
            if ok:
                current = proposal
            else:
                theta[j] = old
            if it < warmup:
                batch_acc[j] += ok
                batch_try[j] += 1
            else:
                accepted[j] += ok
                tried[j] += 1
        if extra_step is not None:
            extra_step(theta, rng)
            current = log_density(theta)
        if it < warmup and (it + 1) % 50 == 0:
            seen = batch_try > 0
            rate = np.where(seen, batch_acc / np.maximum(batch_try, 1), 0.3)
            steps *= np.exp(np.clip(2.0 * (rate - 0.3), -1.0, 1.0))
            batch_acc[:] = 0
            batch_try[:] = 0
        if it >= warmup:
            out[it - warmup] = theta
    rates = np.divide(accepted, tried, out=np.full(dim, np.nan), where=tried > 0)
    return out, rates


def _normal_logpdf(x, mean, sd):
    return -0.5 * ((x - mean) / sd) ** 2


class _LinearModel:
    """Log posterior of the linear-Gaussian models over sufficient statistics.

    Internal coordinates: centered intercept ``a0`` (intercept at the mean
    covariate values), slopes, ``log sigma``, and optionally the indicator.
    Centering removes the strong intercept/slope correlation that would
    otherwise cripple coordinate-wise updates; it is a linear change of
    variables with unit Jacobian.
    """

    def __init__(self, spec: ModelSpec, y, x, z=None):
        self.spec = spec
        y = np.asarray(y, dtype=float)
        x = np.asarray(x, dtype=float)
        cols = [x]
        self.with_gamma = spec.variant == "relative_time_with_diameter"
        if self.with_gamma:
            if z is None:
                raise ValueError("the diameter model needs log diameters")
            cols.append(np.asarray(z, dtype=float))
        if any(c.shape != y.shape for c in cols) or y.ndim != 1:
            raise ValueError("covariate arrays must match the response length")
        if y.size < 2:
            raise ValueError("need at least two observations")
        if not all(np.all(np.isfinite(c)) for c in [y, *cols]):
            raise ValueError("non-finite data; log-transform positive values only")
        self.n = y.size
        self.means = np.array([c.mean() for c in cols])
        centered = np.stack([np.ones(self.n)] + [c - m for c, m in zip(cols, self.means)], 1)
        self.design = centered
        self.gram = centered.T @ centered
        self.xty = centered.T @ y
        self.yty = float(y @ y)
        self.y = y

    def to_natural(self, coef: np.ndarray) -> np.ndarray:
        """(a0, slopes...) -> (alpha, slopes...)."""
        nat = coef.copy()
        nat[..., 0] = coef[..., 0] - np.sum(coef[..., 1:] * self.means, axis=-1)
        return nat

    def rss(self, coef: np.ndarray) -> float:
        return float(self.yty - 2 * coef @ self.xty + coef @ self.gram @ coef)

    def log_density(self, theta: np.ndarray) -> float:
        spec = self.spec
        p = 3 if self.with_gamma else 2
        coef = theta[:p].copy()
        log_sigma = theta[p]
        if self.with_gamma and theta[p + 1] < 0.5:
            coef_lik = coef.copy()
            coef_lik[2] = 0.0
        else:
            coef_lik = coef
        # the centered intercept absorbs gamma * mean(z) only while gamma is active
        nat = self.to_natural(coef_lik)
        sigma = math.exp(log_sigma)
        rss = max(self.rss(coef_lik), 0.0)
        lp = -self.n * log_sigma - rss / (2 * sigma * sigma)
        lp += _normal_logpdf(nat[0], *spec.alpha_prior)
        lp += _normal_logpdf(nat[1], *spec.beta_prior)
        if self.with_gamma:
            lp += _normal_logpdf(coef[2], *spec.gamma_prior)
        shape, scale = spec.sigma_prior
        # inverse-gamma density on sigma plus the log-Jacobian of sigma = exp(log_sigma)
        lp += -(shape + 1) * log_sigma - scale / sigma + log_sigma
        return lp

    def initial(self, rng: np.random.Generator) -> np.ndarray:
        p = self.design.shape[1]
        coef, *_ = np.linalg.lstsq(self.design, self.y, rcond=None)
        resid = self.y - self.design @ coef
        sigma = max(float(resid.std()), 1e-3)
        cov = sigma ** 2 * np.linalg.pinv(self.gram)
        se = np.sqrt(np.maximum(np.diag(cov), 1e-12))
        start = coef + se * rng.standard_normal(p)
        theta = list(start) + [math.log(sigma) + 0.1 * rng.standard_normal()]
        steps = list(se) + [1.0 / math.sqrt(2 * self.n)]
        if self.with_gamma:
            theta.append(1.0)
            steps.append(0.0)
        return np.array(theta), np.array(steps)

    def indicator_step(self, theta: np.ndarray, rng: np.random.Generator) -> None:
        """Gibbs update of the indicator; redraw gamma from its prior while excluded.

        The centered intercept is held fixed, so switching keeps the fitted mean
        in place. Each indicator value maps the centered coordinates onto the
        natural ones with unit Jacobian, so the full log density gives the
        exact conditional odds, intercept prior included.
        """
        p = 3
        on = theta.copy()
        on[p + 1] = 1.0
        off = theta.copy()
        off[p + 1] = 0.0
        pi = self.spec.inclusion_prior
        log_odds = math.log(pi / (1 - pi)) + self.log_density(on) - self.log_density(off)
        prob_on = 1.0 / (1.0 + math.exp(-log_odds)) if log_odds > -700 else 0.0
        if rng.random() < prob_on:
            theta[p + 1] = 1.0
        else:
            mean, sd = self.spec.gamma_prior
            theta[2] = mean + sd * rng.standard_normal()
            theta[p + 1] = 0.0

    def active(self, theta: np.ndarray) -> np.ndarray:
        mask = np.ones(theta.size, dtype=bool)
        mask[-1] = False
        mask[2] = theta[-1] >= 0.5
        return mask


def mcmc_sample(
    model: ModelSpec,
    y,
    x,
    z=None,
    *,
    chains: int = 4,
    draws: int = 10000,
    warmup: int = 1000,
    seed: int = 0,
    rhat_threshold: float = 1.05,
) -> PosteriorTrace:
    """Posterior draws for one of the log-log running-time models.

    Parameters
    ----------
    model : ModelSpec
    y : array_like
        Log running times of the algorithm under study.
    x : array_like
        ``log n`` for ``size_scaling``; log running times of the reference
        algorithm on the same instances otherwise.
    z : array_like, optional
        Log diameters, required by ``relative_time_with_diameter``.
    chains, draws, warmup, seed
        Sampler settings; chains get independent streams spawned from
        ``seed``.
    """
    if draws < 1000:
        raise ValueError("draws must be at least 1000 per chain")
    lm = _LinearModel(model, y, x, z)
    seeds = np.random.SeedSequence(seed).spawn(chains)
    names = model.parameter_names
    collected = {name: [] for name in names}
    acceptance = {name: [] for name in names}
    for ss in seeds:
        init_rng = np.random.default_rng(ss.spawn(1)[0])
        theta0, steps = lm.initial(init_rng)
        extra = lm.indicator_step if lm.with_gamma else None
        active = lm.active if lm.with_gamma else None
        out, rates = metropolis(lm.log_density, theta0, draws=draws, warmup=warmup,
                                seed=ss, step=steps, active=active, extra_step=extra)
        p = 3 if lm.with_gamma else 2
        nat = lm.to_natural(out[:, :p].copy())
        if lm.with_gamma:
            # with the indicator off, the centered intercept carries no gamma term
            off = out[:, p + 1] < 0.5
            nat[off, 0] = out[off, 0] - out[off, 1] * lm.means[0]
        cols = {"alpha": nat[:, 0], "beta": nat[:, 1], "sigma": np.exp(out[:, p])}
        if lm.with_gamma:
            cols["gamma"] = nat[:, 2]
            cols["selected_model"] = out[:, p + 1]
        rate_by_name = {"alpha": rates[0], "beta": rates[1], "sigma": rates[p]}
        if lm.with_gamma:
            rate_by_name["gamma"] = rates[2]
            rate_by_name["selected_model"] = float("nan")
        for name in names:
            collected[name].append(cols[name])
            acceptance[name].append(rate_by_name[name])
    trace = PosteriorTrace(
        samples={k: np.stack(v) for k, v in collected.items()},
        acceptance={k: np.array(v) for k, v in acceptance.items()},
        chains=chains,
        warmup=warmup,
    )
    for name in names:
        if name == "selected_model":
            continue
        r = trace.rhat(name)
        if not r < rhat_threshold:
            msg = f"R-hat for {name} is {r:.3f} (>= {rhat_threshold}); chains may not have converged"
            trace.warnings.append(msg)
            warnings.warn(msg, stacklevel=2)
    return trace
