"""Hamiltonian Monte Carlo with step-size search, convergence test and thinning.

Chains use an identity mass matrix and a fixed number of leapfrog steps.
Each chain owns one scalar step size that is tuned towards a target
acceptance rate during an adaptation phase and frozen afterwards. Chains
advance in synchronous blocks so convergence can be checked on consistent
snapshots of all traces.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from ._validation import spawn_generators, worker_count

logger = logging.getLogger(__name__)


class ConvergenceError(RuntimeError):
    """The chains did not pass the convergence test within the budget."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics


class InsufficientDrawsError(RuntimeError):
    """Raised when the chains are too short to provide the requested draws."""

    def __init__(self, message, required_length):
        super().__init__(message)
        self.required_length = required_length


@dataclass
class HmcConfig:
    """Settings for :func:`run_chains`.

    ``slope_threshold`` is the bound on the log-target slope over
    ``reference_window`` iterations; for another ``convergence_window`` it is
    rescaled by ``reference_window / convergence_window`` so the permitted
    drift across the window stays the same.
    """

    leapfrog_steps: int = 3
    target_accept: float = 0.80
    n_chains: int = 4
    convergence_window: int = 10_000
    slope_threshold: float = 1e-7
    reference_window: int = 1_000_000
    cross_chain_tol: float = 3.0
    n_adapt: int = 5_000
    adapt_interval: int = 50
    adapt_rate: float = 3.0
    initial_step_size: float = 1e-2
    check_interval: int = 1_000
    max_iterations: int = 200_000
    max_lag: int | None = None
    seed: int | None = 0

    def __post_init__(self):
        if self.leapfrog_steps < 1:
            raise ValueError("leapfrog_steps must be >= 1")
        if not 0.0 < self.target_accept < 1.0:
            raise ValueError("target_accept must lie in (0, 1)")
        if self.n_chains < 1:
            raise ValueError("n_chains must be >= 1")
        if self.convergence_window < 2 or self.check_interval < 1:
            raise ValueError("convergence_window must be >= 2 and check_interval >= 1")
        if self.initial_step_size <= 0:
            raise ValueError("initial_step_size must be positive")
        if self.adapt_interval < 1 or self.n_adapt < 0:
            raise ValueError("adapt_interval must be >= 1 and n_adapt >= 0")

    @property
    def effective_slope_threshold(self):
        return self.slope_threshold * self.reference_window / self.convergence_window

    def to_dict(self):
        return asdict(self)


@dataclass
class ChainState:
    """Mutable state of one chain.

    ``logp_trace`` holds the log target after every iteration; positions are
    recorded from ``record_start`` onwards (the end of adaptation) since
    earlier ones are never drawn.
    """

    position: np.ndarray
    step_size: float
    logp: float
    grad: np.ndarray
    accept_count: int = 0
    total: int = 0
    window_accepts: int = 0
    window_total: int = 0
    adapt_round: int = 0
    adapt_rate: float = 3.0
    adapting: bool = True
    logp_trace: list = field(default_factory=list)
    record_start: int | None = None
    recorded: list = field(default_factory=list)
    divergences: int = 0

    @property
    def n_iterations(self):
        return len(self.logp_trace)

    @property
    def acceptance_rate(self):
        return self.accept_count / self.total if self.total else float("nan")

    def positions(self):
        """Recorded positions as an array of shape (n_recorded, dim)."""
        if not self.recorded:
            return np.empty((0, self.position.size))
        return np.asarray(self.recorded)


@dataclass
class ConvergenceVerdict:
    converged: bool
    slopes: list
    means: list
    pooled_std: float
    spread: float
    slope_ok: bool
    agreement_ok: bool


@dataclass
class HmcResult:
    chains: list
    diagnostics: dict
    burn_in: int
    lag: int


def _leapfrog(grad_fn, q, p, step_size, n_steps, grad_q=None):
    """Leapfrog integration; returns (q, p, grad at q, diverged)."""
    g = grad_fn(q) if grad_q is None else grad_q
    p = p + 0.5 * step_size * g
    for i in range(n_steps):
        q = q + step_size * p
        g = grad_fn(q)
        if not np.all(np.isfinite(g)):
            return q, p, g, True
        p = p + (step_size if i < n_steps - 1 else 0.5 * step_size) * g
    return q, p, g, False


def leapfrog(grad_fn, position, momentum, step_size, n_steps):
    """Integrate Hamilton's equations for H(q, p) = -log p(q) + |p|^2 / 2.

    Half-kick, drift, half-kick, repeated ``n_steps`` times with the inner
    half-kicks merged. Non-finite gradients leave NaN/inf in the output so
    callers can reject the proposal.
    """
    q, p, _, _ = _leapfrog(
        grad_fn,
        np.asarray(position, dtype=np.float64),
        np.asarray(momentum, dtype=np.float64),
        step_size,
        n_steps,
    )
    return q, p


def init_chain(logp_fn, grad_fn, position, step_size, adapt_rate=3.0):
    position = np.asarray(position, dtype=np.float64)
    return ChainState(
        position=position,
        step_size=float(step_size),
        logp=float(logp_fn(position)),
        grad=np.asarray(grad_fn(position), dtype=np.float64),
        adapt_rate=adapt_rate,
    )


def hmc_step(logp_fn, grad_fn, state, rng, n_steps=3):
    """Advance ``state`` by one Metropolis-corrected HMC transition.

    The state is updated in place and returned with the accept flag.
    """
    q0 = state.position
    p0 = rng.standard_normal(q0.shape)
    q, p, g, diverged = _leapfrog(grad_fn, q0, p0, state.step_size, n_steps, state.grad)
    accepted = False
    if not diverged and np.all(np.isfinite(q)):
        logp = float(logp_fn(q))
        log_ratio = (logp - 0.5 * p @ p) - (state.logp - 0.5 * p0 @ p0)
        if np.isfinite(log_ratio) and (log_ratio >= 0 or rng.random() < math.exp(log_ratio)):
            state.position, state.logp, state.grad = q, logp, g
            accepted = True
    else:
        state.divergences += 1
    state.total += 1
    state.accept_count += accepted
    state.window_total += 1
    state.window_accepts += accepted
    state.logp_trace.append(state.logp)
    return state, accepted


def adapt_step_size(state, target_accept, min_window=50):
    """Stochastic-approximation update of the step size.

    Multiplies the step size by ``exp(eta * (observed - target))`` where
    ``eta`` decays as ``1/sqrt(t)`` over adaptation rounds. Does nothing
    while fewer than ``min_window`` outcomes are recorded or once the chain
    has left its adaptation phase.
    """
    if not state.adapting or state.window_total < min_window:
        return state
    observed = state.window_accepts / state.window_total
    state.adapt_round += 1
    eta = state.adapt_rate / math.sqrt(state.adapt_round)
    state.step_size *= math.exp(eta * (observed - target_accept))
    state.window_accepts = 0
    state.window_total = 0
    return state


def _advance(logp_fn, grad_fn, state, rng, n_iter, cfg, record):
    for _ in range(n_iter):
        hmc_step(logp_fn, grad_fn, state, rng, cfg.leapfrog_steps)
        if state.adapting and state.window_total >= cfg.adapt_interval:
            adapt_step_size(state, cfg.target_accept, cfg.adapt_interval)
        if record:
            state.recorded.append(state.position)
    return state


def _slope(values):
    values = np.asarray(values, dtype=np.float64)
    t = np.arange(values.size, dtype=np.float64)
    t -= t.mean()
    return float(t @ (values - values.mean()) / (t @ t))


def check_convergence(traces, window, slope_threshold, cross_chain_tol=3.0):
    """Test the last ``window`` log-target values of every chain.

    Converged when each chain's least-squares slope is below
    ``slope_threshold`` in magnitude and the chain means agree: their
    spread (max - min) is at most ``cross_chain_tol`` pooled within-chain
    standard deviations.
    """
    tails = []
    for trace in traces:
        trace = np.asarray(trace, dtype=np.float64)
        if trace.size < window:
            raise ValueError(f"trace of length {trace.size} is shorter than the window {window}")
        tails.append(trace[-window:])
    slopes = [_slope(t) for t in tails]
    means = [float(t.mean()) for t in tails]
    pooled = float(np.sqrt(np.mean([t.var(ddof=1) for t in tails])))
    spread = float(max(means) - min(means))
    slope_ok = all(abs(s) < slope_threshold for s in slopes)
    agreement_ok = spread <= cross_chain_tol * pooled
    return ConvergenceVerdict(
        converged=slope_ok and agreement_ok,
        slopes=slopes,
        means=means,
        pooled_std=pooled,
        spread=spread,
        slope_ok=slope_ok,
        agreement_ok=agreement_ok,
    )


def autocorrelation(trace, max_lag):
    """Normalized empirical autocorrelation for lags 0..max_lag (FFT based)."""
    x = np.asarray(trace, dtype=np.float64)
    n = x.size
    if n <= max_lag:
        raise ValueError(f"trace length {n} must exceed max_lag {max_lag}")
    x = x - x.mean()
    acf = np.zeros(max_lag + 1)
    acf[0] = 1.0
    var = x @ x
    if var <= 0.0 or not np.isfinite(var):
        return acf
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x, size)
    full = np.fft.irfft(f * np.conj(f), size)[: max_lag + 1]
    return full / full[0]


def select_lag(acf, n):
    """Smallest lag k >= 1 with |acf[k]| inside the 2/sqrt(n) noise band.

    Returns ``len(acf) - 1`` (the largest lag computed) when the band is
    never reached.
    """
    acf = np.asarray(acf)
    band = 2.0 / math.sqrt(n)
    inside = np.flatnonzero(np.abs(acf[1:]) < band)
    if inside.size == 0:
        return len(acf) - 1
    return int(inside[0]) + 1


def required_length(burn_in, lag, count, n_chains):
    per_chain = -(-count // n_chains)
    return burn_in + lag * (per_chain - 1) + 1


def draw_samples(chains, burn_in, lag, count):
    """Thinned positions taken round-robin across chains.

    Draw ``i`` comes from chain ``i % n_chains`` at iteration
    ``burn_in + lag * (i // n_chains)``. Returns an array (count, dim).
    """
    if lag < 1:
        raise ValueError("lag must be >= 1")
    n_chains = len(chains)
    need = required_length(burn_in, lag, count, n_chains)
    for c in chains:
        if c.record_start is None or c.record_start > burn_in or c.n_iterations < need:
            raise InsufficientDrawsError(
                f"{count} draws with burn-in {burn_in} and lag {lag} need chains of "
                f"length {need}; have {min(ch.n_iterations for ch in chains)}",
                need,
            )
    out = np.empty((count, chains[0].position.size))
    for i in range(count):
        chain = chains[i % n_chains]
        it = burn_in + lag * (i // n_chains)
        out[i] = chain.recorded[it - chain.record_start]
    return out


def _run_block(items, fn, pool):
    if pool is None:
        return [fn(*it) for it in items]
    return list(pool.map(lambda it: fn(*it), items))


def _diagnostics(chains, cfg, verdict=None, iterations=0, lag=None, burn_in=None):
    diag = {
        "iterations": iterations,
        "step_sizes": [c.step_size for c in chains],
        "acceptance_rates": [c.acceptance_rate for c in chains],
        "divergences": [c.divergences for c in chains],
        "final_logp": [c.logp for c in chains],
        "slope_threshold": cfg.effective_slope_threshold,
        "window": cfg.convergence_window,
    }
    if verdict is not None:
        diag.update(
            converged=verdict.converged,
            slopes=verdict.slopes,
            window_means=verdict.means,
            pooled_std=verdict.pooled_std,
            spread=verdict.spread,
        )
    if lag is not None:
        diag.update(lag=lag, burn_in=burn_in)
    return diag


def run_chains(logp_fn, grad_fn, cfg, init_fn, rng=None, n_draws=0):
    """Adapt, run to convergence, and extend chains for ``n_draws`` draws.

    Parameters
    ----------
    logp_fn, grad_fn : callable
        Log target and its gradient; must be safe for concurrent reads.
    cfg : HmcConfig
    init_fn : callable
        ``init_fn(rng) -> ndarray`` giving a chain's starting position.
    rng : int, Generator or None
        Master seed; defaults to ``cfg.seed``. Each chain gets its own
        derived stream so results do not depend on the worker count.
    n_draws : int
        Thinned draws the chains must be long enough to provide.

    Raises
    ------
    ConvergenceError
        When ``cfg.max_iterations`` pass without convergence.
    """
    master = cfg.seed if rng is None else rng
    streams = spawn_generators(master, cfg.n_chains)
    chains = []
    for r in streams:
        step0 = cfg.initial_step_size * math.exp(r.uniform(-1.0, 1.0))
        chains.append(init_chain(logp_fn, grad_fn, init_fn(r), step0, cfg.adapt_rate))

    workers = worker_count(cfg.n_chains)
    pool = ThreadPoolExecutor(workers) if workers > 1 else None
    try:
        def advance(state, r, n, record):
            return _advance(logp_fn, grad_fn, state, r, n, cfg, record)

        _run_block([(c, r, cfg.n_adapt, False) for c, r in zip(chains, streams)], advance, pool)
        for c in chains:
            # counters restart so acceptance_rate reports the frozen phase only
            c.adapting = False
            c.accept_count = c.total = 0
            c.record_start = c.n_iterations
        iterations = cfg.n_adapt
        window = cfg.convergence_window
        threshold = cfg.effective_slope_threshold
        verdict = None
        while True:
            _run_block([(c, r, cfg.check_interval, True) for c, r in zip(chains, streams)], advance, pool)
            iterations += cfg.check_interval
            if iterations - cfg.n_adapt >= window:
                verdict = check_convergence(
                    [c.logp_trace for c in chains], window, threshold, cfg.cross_chain_tol
                )
                logger.debug("iteration %d: %s", iterations, verdict)
                if verdict.converged:
                    break
            if iterations >= cfg.max_iterations:
                diag = _diagnostics(chains, cfg, verdict, iterations)
                diag["logp_traces"] = [c.logp_trace[-window:] for c in chains]
                raise ConvergenceError(
                    f"chains did not converge within {cfg.max_iterations} iterations", diag
                )

        window_start = iterations - window
        max_lag = cfg.max_lag or window // 2
        lags = [
            select_lag(autocorrelation(np.asarray(c.logp_trace[-window:]), max_lag), window)
            for c in chains
        ]
        lag = max(lags)
        burn_in = window_start + lag
        if n_draws > 0:
            need = required_length(burn_in, lag, n_draws, cfg.n_chains)
            extra = need - iterations
            if extra > 0:
                _run_block([(c, r, extra, True) for c, r in zip(chains, streams)], advance, pool)
                iterations += extra
    finally:
        if pool is not None:
            pool.shutdown()
    diag = _diagnostics(chains, cfg, verdict, iterations, lag, burn_in)
    diag["chain_lags"] = lags
    diag["converged_at"] = window_start + window
    return HmcResult(chains=chains, diagnostics=diag, burn_in=burn_in, lag=lag)
