"""Simulation of noisy jump-diffusion log-prices with stochastic volatility.

The default volatility is a semimartingale fluctuating around a seasonal
pattern::

    sigma_t = v_t * (sigma0 + c*rho*W_t + c*sqrt(1 - rho^2)*W'_t),
    v_t = 1 - 0.2 sin(3 pi t / 4),

where ``W`` drives the log-price and ``W'`` is independent of it.  A jump of
the squared volatility, price jumps and i.i.d. Gaussian noise can be added.
All paths are discretized on the observation grid ``i/n`` with an
Euler-Maruyama step using the left end point of the variance.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .config import ObservationSeries, ParameterError

logger = logging.getLogger(__name__)

JUMP_MEAN = 0.5
JUMP_VAR = 0.1
NU_LOW, NU_HIGH = 0.2, 1.0
# total mass of the compensator density 1{0.2 <= |z| <= 1}/1.6
NU_RATE = 2 * (NU_HIGH - NU_LOW) / 1.6


def seasonality(t):
    """Seasonal volatility pattern ``1 - 0.2 sin(3 pi t / 4)``."""
    out = 1.0 - 0.2 * np.sin(0.75 * np.pi * np.asarray(t, dtype=np.float64))
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class VolModel:
    """``kind`` is ``"semimartingale"`` or ``"constant"`` (level ``sigma_sq``)."""

    kind: str = "semimartingale"
    sigma_sq: float = 1.0
    c: float = 0.1
    rho: float = 0.5
    seasonal: bool = True
    sigma0: float = 1.0

    def __post_init__(self):
        if self.kind not in ("semimartingale", "constant"):
            raise ParameterError(f"unknown volatility model {self.kind!r}")
        if self.kind == "constant" and self.sigma_sq < 0:
            raise ParameterError("sigma_sq must be nonnegative")
        if not -1.0 <= self.rho <= 1.0:
            raise ParameterError("rho must lie in [-1, 1]")


@dataclass(frozen=True)
class VolJump:
    """Jump of size ``delta`` in the squared volatility at ``theta``.

    With ``theta=None`` the time is drawn uniformly on
    ``(margin, 1 - margin)`` for every path.
    """

    delta: float
    theta: float | None = None
    margin: float = 0.125

    def __post_init__(self):
        if self.delta == 0:
            raise ParameterError("volatility jump size must be nonzero")
        if self.theta is not None and not 0.0 < self.theta < 1.0:
            raise ParameterError("theta must lie in (0, 1)")
        if not 0.0 <= self.margin < 0.5:
            raise ParameterError("margin must lie in [0, 0.5)")


@dataclass(frozen=True)
class PriceJump:
    """One price jump.

    ``time`` is a float in ``(0, 1]``, ``"uniform"`` or ``"theta"`` (at the
    volatility jump).  ``law`` is ``"normal"`` (mean 0.5, variance 0.1) or
    ``"nu"`` (uniform on ``[-1, -0.2] u [0.2, 1]``).
    """

    time: float | str = "uniform"
    law: str = "normal"

    def __post_init__(self):
        if isinstance(self.time, str):
            if self.time not in ("uniform", "theta"):
                raise ParameterError(f"unknown jump time {self.time!r}")
        elif not 0.0 < self.time <= 1.0:
            raise ParameterError("jump time must lie in (0, 1]")
        if self.law not in ("normal", "nu"):
            raise ParameterError(f"unknown jump size law {self.law!r}")


@dataclass(frozen=True)
class SimulationSpec:
    n: int = 30_000
    x0: float = 4.0
    drift: float = 0.1
    noise_std: float = 0.005
    vol_model: VolModel = field(default_factory=VolModel)
    vol_jump: VolJump | None = None
    price_jumps: tuple[PriceJump, ...] = ()
    poisson_jumps: bool = False
    seed: int | tuple[int, ...] | None = 0

    def __post_init__(self):
        if isinstance(self.seed, list):
            object.__setattr__(self, "seed", tuple(self.seed))
        if self.n <= 0:
            raise ParameterError("n must be positive")
        if self.noise_std < 0:
            raise ParameterError("noise_std must be nonnegative")
        object.__setattr__(self, "price_jumps", tuple(self.price_jumps))
        if self.vol_jump is None and any(pj.time == "theta" for pj in self.price_jumps):
            raise ParameterError("a price jump at theta needs a volatility jump")

    def with_seed(self, seed) -> SimulationSpec:
        return replace(self, seed=seed)

    def to_dict(self) -> dict:
        vj = self.vol_jump
        return {
            "n": self.n,
            "x0": self.x0,
            "drift": self.drift,
            "noise_std": self.noise_std,
            "vol_model": vars(self.vol_model).copy(),
            "vol_jump": None if vj is None else vars(vj).copy(),
            "price_jumps": [vars(pj).copy() for pj in self.price_jumps],
            "poisson_jumps": self.poisson_jumps,
            "seed": list(self.seed) if isinstance(self.seed, tuple) else self.seed,
        }


@dataclass(frozen=True)
class SimulatedPath:
    """Simulated latent and observed series with the ground truth.

    ``vol_path[i]`` is the squared volatility at ``i/n``;
    ``jump_path[i]`` the accumulated price jumps up to ``i/n``;
    ``noise[i]`` the noise added at ``i/n``.
    """

    latent: ObservationSeries
    observed: ObservationSeries
    vol_path: np.ndarray
    continuous_vol: np.ndarray
    theta: float | None
    jump_path: np.ndarray
    noise: np.ndarray

    def jump_free(self) -> ObservationSeries:
        """Observed series with the price jumps removed."""
        return ObservationSeries(self.observed.values - self.jump_path)


def _nu_sizes(rng: np.random.Generator, size: int) -> np.ndarray:
    mag = rng.uniform(NU_LOW, NU_HIGH, size)
    sign = np.where(rng.random(size) < 0.5, -1.0, 1.0)
    return sign * mag


def _jump_index(t: float, n: int) -> int:
    # the jump at t lands in the increment over ((i-1)/n, i/n]
    return min(max(math.ceil(t * n) - 1, 0), n - 1)


def _continuous_variance(spec: SimulationSpec, t, dw, rng_perp) -> np.ndarray:
    vm = spec.vol_model
    n = spec.n
    if vm.kind == "constant":
        return np.full(n + 1, float(vm.sigma_sq))
    dw_perp = rng_perp.standard_normal(n) / math.sqrt(n)
    w = np.concatenate(([0.0], np.cumsum(dw)))
    w_perp = np.concatenate(([0.0], np.cumsum(dw_perp)))
    base = vm.sigma0 + vm.c * vm.rho * w + vm.c * math.sqrt(1.0 - vm.rho**2) * w_perp
    flips = int(np.count_nonzero(base < 0))
    if flips:
        logger.info("volatility factor negative at %d grid points; using |sigma|", flips)
    sigma = base * seasonality(t) if vm.seasonal else base
    return sigma * sigma


def simulate_path(spec: SimulationSpec) -> SimulatedPath:
    """Simulate one path.  Identical specs (including seed) give identical paths.

    Independent streams are spawned from ``spec.seed`` for the price
    Brownian motion, the volatility's own Brownian motion, the noise and the
    jump times/sizes.
    """
    n = spec.n
    rng_w, rng_perp, rng_noise, rng_jump = (
        np.random.default_rng(s) for s in np.random.SeedSequence(spec.seed).spawn(4)
    )
    t = np.arange(n + 1) / n
    dw = rng_w.standard_normal(n) / math.sqrt(n)

    cont = _continuous_variance(spec, t, dw, rng_perp)
    theta = None
    var = cont
    if spec.vol_jump is not None:
        vj = spec.vol_jump
        theta = vj.theta if vj.theta is not None else float(rng_jump.uniform(vj.margin, 1.0 - vj.margin))
        var = cont + np.where(t >= theta, vj.delta, 0.0)
        if np.any(var < 0):
            logger.info("squared volatility negative after jump; diffusion clamped at zero")

    jumps = np.zeros(n)
    for pj in spec.price_jumps:
        if pj.time == "uniform":
            when = float(rng_jump.uniform(0.0, 1.0))
        elif pj.time == "theta":
            when = theta
        else:
            when = float(pj.time)
        if pj.law == "normal":
            size = float(rng_jump.normal(JUMP_MEAN, math.sqrt(JUMP_VAR)))
        else:
            size = float(_nu_sizes(rng_jump, 1)[0])
        jumps[_jump_index(when, n)] += size
    if spec.poisson_jumps:
        count = int(rng_jump.poisson(NU_RATE))
        times = rng_jump.uniform(0.0, 1.0, count)
        sizes = _nu_sizes(rng_jump, count)
        for when, size in zip(times, sizes):
            jumps[_jump_index(float(when), n)] += size

    x = _kernels.euler_price(float(spec.x0), spec.drift / n, var, dw, jumps)
    noise = spec.noise_std * rng_noise.standard_normal(n + 1)
    return SimulatedPath(
        latent=ObservationSeries(x),
        observed=ObservationSeries(x + noise),
        vol_path=var,
        continuous_vol=cont,
        theta=theta,
        jump_path=np.concatenate(([0.0], np.cumsum(jumps))),
        noise=noise,
    )


def preset(name: str, **overrides) -> SimulationSpec:
    """Named simulation designs.

    ``h0-default`` / ``h1-default``
        Continuous-volatility null and the alternative with a jump of 0.2
        at 2/3; a normal price jump at a uniform time in both, plus one at
        the volatility jump under the alternative.
    ``h0-nu`` / ``h1-nu``
        Compound Poisson price jumps with sizes uniform on
        ``[-1, -0.2] u [0.2, 1]``; under the alternative the volatility jump
        time is uniform on ``(0.125, 0.875)`` with an extra price jump there.
        ``delta`` sets the jump size (default 0.2).
    ``h0-clean`` / ``h1-clean``
        No price jumps.
    """
    delta = overrides.pop("delta", 0.2)
    theta = overrides.pop("theta", None)
    if name == "h0-default":
        spec = SimulationSpec(price_jumps=(PriceJump("uniform", "normal"),))
    elif name == "h1-default":
        spec = SimulationSpec(
            vol_jump=VolJump(delta, 2.0 / 3.0 if theta is None else theta),
            price_jumps=(PriceJump("theta", "normal"), PriceJump("uniform", "normal")),
        )
    elif name == "h0-nu":
        spec = SimulationSpec(poisson_jumps=True)
    elif name == "h1-nu":
        spec = SimulationSpec(
            vol_jump=VolJump(delta, theta),
            price_jumps=(PriceJump("theta", "nu"),),
            poisson_jumps=True,
        )
    elif name == "h0-clean":
        spec = SimulationSpec()
    elif name == "h1-clean":
        spec = SimulationSpec(vol_jump=VolJump(delta, 2.0 / 3.0 if theta is None else theta))
    else:
        raise ParameterError(f"unknown preset {name!r}")
    return replace(spec, **overrides)


PRESETS = ("h0-default", "h1-default", "h0-nu", "h1-nu", "h0-clean", "h1-clean")


# ---------------------------------------------------------------------------
# Monte Carlo studies
# ---------------------------------------------------------------------------

NULL_KEY = 1_000_000


@dataclass(frozen=True)
class Replicate:
    """Outcome of one simulated path in a study."""

    statistics: dict
    standardized: dict
    theta: float | None
    theta_hat: float | None
    bootstrap: dict | None = None


@dataclass(frozen=True)
class _StudyJob:
    spec: SimulationSpec
    cfg: object
    kinds: tuple
    bootstrap: object | None


def _replicate(job: _StudyJob, seed) -> Replicate:
    from .bootstrap import bootstrap_from_spot, pseudo_statistics
    from .changepoint import locate
    from .spectral import estimate_spot_vol
    from .testing import TestRule, compute_statistic, standardize

    cfg = job.cfg
    path = simulate_path(job.spec.with_seed(seed))
    spot = estimate_spot_vol(path.observed, cfg)
    stats, zs = {}, {}
    for kind in job.kinds:
        value = compute_statistic(kind, spot, cfg).value
        stats[kind.value] = value
        zs[kind.value] = standardize(TestRule(kind), value, cfg)
    theta_hat = None
    if path.theta is not None:
        per_bin = spot.per_bin
        if cfg.truncate_changepoint:
            per_bin = np.where(np.abs(per_bin) <= cfg.threshold, per_bin, 0.0)
        theta_hat = locate(per_bin, cfg).theta_hat
    boot = None
    if job.bootstrap is not None:
        bcfg = replace(job.bootstrap, seed=(*seed, 1))
        result = bootstrap_from_spot(spot, cfg, bcfg, path.observed.n)
        boot = {"statistic": result.statistic, "pseudo": result.pseudo_stats, "fires": result.truncation_fires}
    return Replicate(statistics=stats, standardized=zs, theta=path.theta, theta_hat=theta_hat, bootstrap=boot)


def _replicate_chunk(job: _StudyJob, seeds) -> list[Replicate]:
    return [_replicate(job, s) for s in seeds]


def run_replicates(spec, cfg, kinds, reps: int, seed_key: tuple, workers: int = 1, bootstrap=None) -> list[Replicate]:
    """Simulate ``reps`` paths of ``spec`` and evaluate every statistic kind.

    Replicate ``r`` uses the path seed ``(*seed_key, r)``, so the outcome
    does not depend on ``workers``.
    """
    job = _StudyJob(spec=spec, cfg=cfg, kinds=tuple(kinds), bootstrap=bootstrap)
    seeds = [(*seed_key, r) for r in range(reps)]
    if workers == 1:
        return _replicate_chunk(job, seeds)
    from concurrent.futures import ProcessPoolExecutor

    chunks = [seeds[i::workers] for i in range(workers)]
    with ProcessPoolExecutor(workers) as pool:
        parts = list(pool.map(_replicate_chunk, [job] * len(chunks), chunks))
    out = [None] * reps
    for i, part in enumerate(parts):
        out[i::workers] = part
    return out


@dataclass
class StudyTable:
    """Rows of a study, one per (spec, rule), plus the raw replicates."""

    rows: list
    replicates: dict = field(default_factory=dict, repr=False)
    null_replicates: list | None = field(default=None, repr=False)

    columns = (
        "spec", "label", "rule", "level", "reps", "rejection_rate", "adjusted_power",
        "bootstrap_rate", "z_mean", "z_q10", "z_q50", "z_q90", "theta_err_q50", "theta_err_q90",
    )

    def to_records(self) -> list[dict]:
        return [dict(r) for r in self.rows]


def _quantiles(values, probs):
    if len(values) == 0:
        return [None] * len(probs)
    return [float(q) for q in np.quantile(np.asarray(values, dtype=np.float64), probs)]


def monte_carlo_study(
    specs,
    rules,
    reps: int,
    cfg=None,
    seed: int = 0,
    workers: int = 1,
    null_spec: SimulationSpec | None = None,
    bootstrap=None,
    labels=None,
) -> StudyTable:
    """Rejection frequencies and localization errors over simulated paths.

    Parameters
    ----------
    specs : sequence of SimulationSpec
        Designs to simulate; their own ``seed`` is ignored.
    rules : sequence of TestRule
        Rules evaluated on every path with their Gumbel critical values.
    reps : int
        Paths per design.
    cfg : TuningConfig, optional
    seed : int
        Master seed.  Path ``r`` of design ``s`` uses seed ``(seed, s, r)``.
    workers : int
        Worker processes.
    null_spec : SimulationSpec, optional
        When given, ``reps`` null paths are simulated as well and
        ``adjusted_power`` is the fraction of statistics above the empirical
        ``1 - level`` quantile of the null statistics.
    bootstrap : BootstrapConfig, optional
        When given, the overlapping truncated rules are also decided with
        the bootstrap quantile (``bootstrap_rate``).

    Returns
    -------
    StudyTable
    """
    from .bootstrap import empirical_quantile
    from .config import TuningConfig
    from .testing import critical_value

    if reps < 1:
        raise ParameterError("reps must be positive")
    cfg = TuningConfig() if cfg is None else cfg
    specs = list(specs)
    rules = list(rules)
    labels = list(labels) if labels is not None else [f"spec{i}" for i in range(len(specs))]
    kinds = tuple(dict.fromkeys(r.kind for r in rules))

    null_reps = None
    if null_spec is not None:
        null_reps = run_replicates(null_spec, cfg, kinds, reps, (seed, NULL_KEY), workers)

    table = StudyTable(rows=[], null_replicates=null_reps)
    for s_idx, spec in enumerate(specs):
        reps_out = run_replicates(spec, cfg, kinds, reps, (seed, s_idx), workers, bootstrap)
        table.replicates[s_idx] = reps_out
        errors = [abs(r.theta_hat - r.theta) for r in reps_out if r.theta_hat is not None]
        err_q = _quantiles(errors, (0.5, 0.9))
        for rule in rules:
            key = rule.kind.value
            stats = np.array([r.statistics[key] for r in reps_out])
            zs = np.array([r.standardized[key] for r in reps_out])
            crit = critical_value(rule, cfg)
            adjusted = None
            if null_reps is not None:
                q = empirical_quantile([r.statistics[key] for r in null_reps], rule.level)
                adjusted = float(np.mean(stats > q))
            boot_rate = None
            if bootstrap is not None and key == "ov-trunc":
                boot_rate = float(
                    np.mean([r.bootstrap["statistic"] > empirical_quantile(r.bootstrap["pseudo"], rule.level) for r in reps_out])
                )
            zq = _quantiles(zs[np.isfinite(zs)], (0.1, 0.5, 0.9))
            table.rows.append(
                {
                    "spec": s_idx,
                    "label": labels[s_idx],
                    "rule": key,
                    "level": rule.level,
                    "reps": reps,
                    "rejection_rate": float(np.mean(stats >= crit)),
                    "adjusted_power": adjusted,
                    "bootstrap_rate": boot_rate,
                    "z_mean": float(np.mean(zs[np.isfinite(zs)])) if np.isfinite(zs).any() else None,
                    "z_q10": zq[0],
                    "z_q50": zq[1],
                    "z_q90": zq[2],
                    "theta_err_q50": err_q[0],
                    "theta_err_q90": err_q[1],
                }
            )
    return table
