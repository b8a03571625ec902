#!/usr/bin/env python
# -*- coding : utf-8 -*-

"""Change-point streams and Monte Carlo estimates of false-alarm time and
detection delay.

Every trial draws from its own generator seeded with
SeedSequence(master_seed, spawn_key=(stream_id, trial_index)), and trials
are grouped into fixed batches before they are handed to joblib, so
results do not depend on the number of workers.
"""

import multiprocessing
from enum import Enum
from typing import List, Sequence, Tuple, Union

import numpy as np
from joblib import Parallel, delayed
from tqdm import tqdm

from ..detection.engine import (
    LikelihoodModel,
    StoppingRule,
    StopResult,
    run_family_until_stop,
    run_until_stop,
    threshold_for_family,
    walk_path,
)
from ..quantum import thresholds as th
from ..quantum.povm import QubitPair, hayashi_measurement, likelihood_model, measurement_for, outcome_distribution
from ..system.exceptions import UndetectableChangeError

tqdmWidth = 70  # Number of columns of progress bar

# stream ids keep the false-alarm and delay trials on disjoint seeds
FALSE_ALARM_STREAM = 0
DELAY_STREAM = 1
TRAJECTORY_STREAM = 2

TRADEOFF_HEADER = [
    "scenario_id",
    "l",
    "h",
    "t_fa_mean",
    "t_fa_se",
    "delay_mean",
    "delay_se",
    "overshoot_mean",
    "predicted_delay",
    "censored_fraction",
]


class StraddlePolicy(str, Enum):
    """Treatment of the block that contains a non-aligned change point."""

    PRE = "pre"
    SKIP_BLOCK = "skip-block"


class ChangePointScenario:
    """Stream layout: blocks before `nu_blocks` follow p, later blocks
    follow q.

    Attributes
    ----------
    model : LikelihoodModel
        Block-level outcome distributions
    l : int
        Copies per block
    nu_blocks : int or None
        Number of pre-change blocks; None means the change never happens
    straddle_policy : StraddlePolicy
        How the block holding a non-aligned change is drawn; both
        policies draw it from p
    """

    def __init__(
        self,
        model: LikelihoodModel,
        l: int = 1,
        nu_blocks: Union[int, None] = None,
        straddle_policy: Union[str, StraddlePolicy] = StraddlePolicy.PRE,
    ) -> None:
        if not isinstance(model, LikelihoodModel):
            raise TypeError("model must be a LikelihoodModel, got {}".format(type(model).__name__))
        if l < 1:
            raise ValueError("Copies per block must be at least 1, got {}".format(l))
        if nu_blocks is not None and nu_blocks < 0:
            raise ValueError("Change position must be non-negative or None (never), got {}".format(nu_blocks))
        self.model = model
        self.l = int(l)
        self.nu_blocks = None if nu_blocks is None else int(nu_blocks)
        self.straddle_policy = StraddlePolicy(straddle_policy)

    @classmethod
    def from_copies(
        cls,
        model: LikelihoodModel,
        l: int,
        nu: Union[int, None],
        straddle_policy: Union[str, StraddlePolicy] = StraddlePolicy.PRE,
    ) -> "ChangePointScenario":
        """Scenario for a change after copy `nu`; a block holding copies on
        both sides of the change is drawn from p."""
        if nu is None:
            return cls(model, l, None, straddle_policy)
        if nu < 0:
            raise ValueError("Change position must be non-negative, got {}".format(nu))
        return cls(model, l, -(-nu // l), straddle_policy)

    def never(self) -> "ChangePointScenario":
        return ChangePointScenario(self.model, self.l, None, self.straddle_policy)

    def immediate(self) -> "ChangePointScenario":
        return ChangePointScenario(self.model, self.l, 0, self.straddle_policy)

    def to_json(self) -> dict:
        return {
            "l": self.l,
            "nu_blocks": "never" if self.nu_blocks is None else self.nu_blocks,
            "straddle_policy": self.straddle_policy.value,
            "p": self.model.p.probs.tolist(),
            "q": self.model.q.probs.tolist(),
        }


def _cdf(probs: np.ndarray) -> np.ndarray:
    cdf = np.cumsum(probs)
    cdf[np.flatnonzero(probs > 0)[-1] :] = 1.0
    return cdf


class OutcomeStream:
    """Unbounded, seeded stream of outcome indices for a scenario.

    Parameters
    ----------
    scenario : ChangePointScenario
    seed : int, SeedSequence or Generator
        Source of randomness; equal seeds give bit-identical streams
    """

    def __init__(self, scenario: ChangePointScenario, seed) -> None:
        self.scenario = scenario
        self.rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        self.position = 0
        self._pre = _cdf(scenario.model.p.probs)
        self._post = _cdf(scenario.model.q.probs)

    def _draw(self, cdf: np.ndarray, n: int) -> np.ndarray:
        return np.searchsorted(cdf, self.rng.random(n), side="right").astype(np.intp)

    def next_chunk(self, size: int) -> np.ndarray:
        """Returns the next `size` outcome indices."""
        nu = self.scenario.nu_blocks
        if nu is None:
            pre = size
        else:
            pre = min(max(nu - self.position, 0), size)
        out = np.empty(size, dtype=np.intp)
        if pre:
            out[:pre] = self._draw(self._pre, pre)
        if size - pre:
            out[pre:] = self._draw(self._post, size - pre)
        self.position += size
        return out

    def take(self, n: int) -> np.ndarray:
        return self.next_chunk(n)

    def __iter__(self):
        while True:
            yield from self.next_chunk(th.__chunkmin__).tolist()


def sample_stream(scenario: ChangePointScenario, seed) -> OutcomeStream:
    """Lazy outcome stream of a scenario; deterministic given `seed`."""
    return OutcomeStream(scenario, seed)


def trial_seed(master_seed: int, stream_id: int, index: int) -> np.random.SeedSequence:
    """Per-trial seed derived from the master seed and a counter."""
    return np.random.SeedSequence(master_seed, spawn_key=(stream_id, index))


class MonteCarloEstimate:
    """Sample mean with its standard error.

    Attributes
    ----------
    mean : float
    std_error : float
    trials : int
    censored_fraction : float
        Share of runs truncated at the cap; the mean is a lower bound
        when positive
    overshoot_mean : float
        Mean overshoot of the uncensored runs (nan if not recorded)
    overshoot_se : float
    """

    def __init__(
        self,
        mean: float,
        std_error: float,
        trials: int,
        censored_fraction: float = 0.0,
        overshoot_mean: float = np.nan,
        overshoot_se: float = np.nan,
    ) -> None:
        if std_error < 0:
            raise ValueError("Standard error must be non-negative, got {}".format(std_error))
        if not 0 <= censored_fraction <= 1:
            raise ValueError("Censored fraction must lie in [0, 1], got {}".format(censored_fraction))
        self.mean = float(mean)
        self.std_error = float(std_error)
        self.trials = int(trials)
        self.censored_fraction = float(censored_fraction)
        self.overshoot_mean = float(overshoot_mean)
        self.overshoot_se = float(overshoot_se)

    @classmethod
    def from_samples(cls, values, censored=None, overshoots=None) -> "MonteCarloEstimate":
        values = np.asarray(values, dtype=float)
        n = values.size
        if n == 0:
            raise ValueError("Cannot estimate from zero trials")
        censored = np.zeros(n, dtype=bool) if censored is None else np.asarray(censored, dtype=bool)
        se = float(values.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
        om, ose = np.nan, np.nan
        if overshoots is not None:
            ov = np.asarray(overshoots, dtype=float)[~censored]
            if ov.size:
                om = float(ov.mean())
                ose = float(ov.std(ddof=1) / np.sqrt(ov.size)) if ov.size > 1 else 0.0
        return cls(float(values.mean()), se, n, float(censored.mean()), om, ose)

    @property
    def one_sided(self) -> bool:
        """True when censoring makes the mean a lower bound only."""
        return self.censored_fraction > 0

    def to_json(self) -> dict:
        return {
            "mean": self.mean,
            "std_error": self.std_error,
            "trials": self.trials,
            "censored_fraction": self.censored_fraction,
            "overshoot_mean": self.overshoot_mean,
            "overshoot_se": self.overshoot_se,
        }

    def __repr__(self) -> str:
        return "MonteCarloEstimate(mean={:.6g}, std_error={:.3g}, trials={}, censored_fraction={:.3g})".format(
            self.mean, self.std_error, self.trials, self.censored_fraction
        )


class TradeoffPoint:
    """Delay and false-alarm estimates at one threshold, in copies.

    Attributes
    ----------
    h : float
    l : int
    t_fa_est : MonteCarloEstimate
    delay_est : MonteCarloEstimate
    predicted_delay : float
        Wald prediction l (h + mean overshoot) / drift, plus the
        straddle block when charged
    scenario_id : str
    """

    def __init__(
        self,
        h: float,
        l: int,
        t_fa_est: MonteCarloEstimate,
        delay_est: MonteCarloEstimate,
        predicted_delay: float,
        scenario_id: str = "",
    ) -> None:
        self.h = float(h)
        self.l = int(l)
        self.t_fa_est = t_fa_est
        self.delay_est = delay_est
        self.predicted_delay = float(predicted_delay)
        self.scenario_id = scenario_id

    @property
    def censored_fraction(self) -> float:
        return max(self.t_fa_est.censored_fraction, self.delay_est.censored_fraction)

    def as_row(self) -> list:
        """Values in TRADEOFF_HEADER order."""
        return [
            self.scenario_id,
            self.l,
            self.h,
            self.t_fa_est.mean,
            self.t_fa_est.std_error,
            self.delay_est.mean,
            self.delay_est.std_error,
            self.delay_est.overshoot_mean,
            self.predicted_delay,
            self.censored_fraction,
        ]

    def to_json(self) -> dict:
        return {
            "scenario_id": self.scenario_id,
            "l": self.l,
            "h": self.h,
            "t_fa": self.t_fa_est.to_json(),
            "delay": self.delay_est.to_json(),
            "predicted_delay": self.predicted_delay,
        }

    def __repr__(self) -> str:
        return "TradeoffPoint({}, h={}, t_fa={:.6g}, delay={:.6g})".format(
            self.scenario_id, self.h, self.t_fa_est.mean, self.delay_est.mean
        )


def _run_batch(
    scenario: ChangePointScenario,
    detectors: List[LikelihoodModel],
    rule: StoppingRule,
    cap: int,
    reflect: bool,
    master_seed: int,
    stream_id: int,
    start: int,
    stop: int,
) -> List[StopResult]:
    out = []
    for i in range(start, stop):
        stream = OutcomeStream(scenario, trial_seed(master_seed, stream_id, i))
        if len(detectors) == 1:
            out.append(run_until_stop(stream, detectors[0], rule, cap, reflect=reflect))
        else:
            out.append(run_family_until_stop(stream, detectors, rule, cap, reflect=reflect))
    return out


def _announce(n_jobs: int) -> None:
    if n_jobs == -1:
        tqdm.write("Processing with " + str(multiprocessing.cpu_count()) + " workers...")
    else:
        tqdm.write("Processing with " + str(n_jobs) + " workers...")


def run_trials(
    scenario: ChangePointScenario,
    rule: StoppingRule,
    trials: int,
    cap: int = th.__cap__,
    seed: int = 0,
    n_jobs: int = 1,
    reflect: bool = True,
    detectors: Union[Sequence[LikelihoodModel], None] = None,
    stream_id: int = FALSE_ALARM_STREAM,
    desc: str = "Monte Carlo",
    verbose: bool = False,
) -> List[StopResult]:
    """Runs independent seeded detector trials on a scenario.
    Classification: Function

    Parameters
    ----------
    scenario : ChangePointScenario
        Stream layout the outcomes are drawn from
    rule : StoppingRule
        Threshold
    trials : int
        Number of runs
    cap : int, optional
        Run-length cap in block steps (Default: 10**7)
    seed : int, optional
        Master seed (Default: 0)
    n_jobs : int, optional
        joblib workers; -1 uses every core (Default: 1)
    reflect : bool, optional
        CUSUM (True) or one-sided walk T_1 (False)
    detectors : sequence of LikelihoodModel, optional
        Detector models; defaults to the scenario model. More than one
        runs the family detector
    stream_id : int, optional
        Seed stream separating experiments that share a master seed
    desc : str, optional
        Progress bar label
    verbose : bool, optional
        Show worker count and progress (Default: False)

    Returns
    -------
    list of StopResult
        One result per trial, in trial order
    """
    if trials < 1:
        raise ValueError("trials must be at least 1, got {}".format(trials))
    if n_jobs < -1 or n_jobs == 0:
        raise ValueError("Variable n_jobs is a positive integer or -1")
    detectors = [scenario.model] if detectors is None else list(detectors)
    batches = [(s, min(s + th.__batch__, trials)) for s in range(0, trials, th.__batch__)]
    if verbose:
        _announce(n_jobs)
    inputs = tqdm(
        batches,
        desc=desc,
        bar_format="{desc}: [{percentage:0.0f}%]",
        unit="batch",
        ncols=tqdmWidth,
        disable=not verbose,
    )
    results = Parallel(n_jobs=n_jobs, prefer="processes")(
        delayed(_run_batch)(scenario, detectors, rule, cap, reflect, seed, stream_id, a, b) for a, b in inputs
    )
    return [r for batch in results for r in batch]


def _summarize(results: List[StopResult], l: int, cap: int, offset: float = 0.0) -> MonteCarloEstimate:
    t = np.array([cap if r.censored else r.t for r in results], dtype=float)
    censored = np.array([r.censored for r in results])
    overshoot = np.array([r.overshoot for r in results])
    return MonteCarloEstimate.from_samples(t * l + offset, censored, overshoot)


def estimate_false_alarm_time(
    scenario: ChangePointScenario,
    rule: StoppingRule,
    trials: int,
    cap: int = th.__cap__,
    seed: int = 0,
    n_jobs: int = 1,
    detectors: Union[Sequence[LikelihoodModel], None] = None,
    verbose: bool = False,
) -> MonteCarloEstimate:
    """Mean alarm time, in copies, of a detector that never sees a change.
    Censored runs count as `cap` blocks, so the estimate is conservative.

    Parameters
    ----------
    scenario : ChangePointScenario
        Scenario with nu_blocks = None
    rule : StoppingRule
    trials : int
    cap : int, optional
    seed : int, optional
    n_jobs : int, optional
    detectors : sequence of LikelihoodModel, optional
        Family detector models (Default: the scenario model)
    verbose : bool, optional

    Returns
    -------
    MonteCarloEstimate
    """
    if scenario.nu_blocks is not None:
        raise ValueError("False-alarm estimation needs a scenario without change (nu = never)")
    results = run_trials(
        scenario, rule, trials, cap, seed, n_jobs, True, detectors, FALSE_ALARM_STREAM, "False alarm", verbose
    )
    return _summarize(results, scenario.l, cap)


def estimate_worst_delay(
    scenario: ChangePointScenario,
    rule: StoppingRule,
    trials: int,
    cap: int = th.__cap__,
    seed: int = 0,
    n_jobs: int = 1,
    straddle: bool = False,
    reflect: bool = False,
    detectors: Union[Sequence[LikelihoodModel], None] = None,
    verbose: bool = False,
) -> MonteCarloEstimate:
    """Estimates the worst-case mean delay through its upper bound
    E_0[T_1]: the detector runs on a pure post-change stream and the walk
    Z_1^n is stopped at h. Results are in copies.

    Parameters
    ----------
    scenario : ChangePointScenario
        Source of p and q; its change position is ignored
    rule : StoppingRule
    trials : int
    cap : int, optional
    seed : int, optional
    n_jobs : int, optional
    straddle : bool, optional
        Charge one extra block (l copies) for a change inside a block
        (Default: False)
    reflect : bool, optional
        Use the reflected CUSUM statistic from w = 0 instead of the walk
        (Default: False)
    detectors : sequence of LikelihoodModel, optional
        Family detector models (Default: the scenario model)
    verbose : bool, optional

    Returns
    -------
    MonteCarloEstimate
        Delay with the mean overshoot of the uncensored runs
    """
    drifts = [m.drift(scenario.model.q) for m in ([scenario.model] if detectors is None else detectors)]
    if not max(drifts) > 0:
        raise UndetectableChangeError("Detector drift under the post-change law is {}".format(max(drifts)))
    results = run_trials(
        scenario.immediate(), rule, trials, cap, seed, n_jobs, reflect, detectors, DELAY_STREAM, "Delay", verbose
    )
    return _summarize(results, scenario.l, cap, scenario.l if straddle else 0.0)


def _wald(h: float, overshoot: float, drift: float, l: int, straddle: bool) -> float:
    if not drift > 0:
        raise UndetectableChangeError("Mean log-likelihood increment is {}; no finite delay".format(drift))
    s = 0.0 if not np.isfinite(overshoot) else overshoot
    return l * (h + s) / drift + (l if straddle else 0)


def build_model(source, l: int = 1, kind: str = "optimized") -> Tuple[LikelihoodModel, int]:
    """Detector model of a pair: a QubitPair is measured in blocks of l
    copies; a LikelihoodModel is used as is (one copy per step)."""
    if isinstance(source, LikelihoodModel):
        return source, l
    if isinstance(source, QubitPair):
        pre, post, meas = measurement_for(source, l, kind)
        return likelihood_model(outcome_distribution(pre, post, meas)), l
    raise TypeError("Expected a QubitPair or LikelihoodModel, got {}".format(type(source).__name__))


def tradeoff_curve(
    source,
    l: int,
    kind: str,
    h_list: Sequence[float],
    trials: int,
    cap: int = th.__cap__,
    seed: int = 0,
    n_jobs: int = 1,
    straddle: bool = False,
    scenario_id: str = "",
    verbose: bool = False,
) -> List[TradeoffPoint]:
    """Delay versus false-alarm tradeoff of the detector for one pair and
    block length.
    Classification: Function

    Parameters
    ----------
    source : QubitPair or LikelihoodModel
        Canonical qubit pair, or a classical outcome model
    l : int
        Copies per block
    kind : str
        Measurement for qubit pairs: "hayashi" or "optimized"
    h_list : sequence of float
        Thresholds in nats
    trials : int
        Monte Carlo runs per estimate
    cap : int, optional
    seed : int, optional
        Master seed; every threshold reuses it (paired streams)
    n_jobs : int, optional
    straddle : bool, optional
        Charge the straddling block in delays and predictions
    scenario_id : str, optional
        Row label
    verbose : bool, optional

    Returns
    -------
    list of TradeoffPoint
    """
    if not len(h_list):
        raise ValueError("h_list must hold at least one threshold")
    model, l = build_model(source, l, kind)
    drift = model.drift()
    if not drift > th.__cutoff__:
        raise UndetectableChangeError("D(q||p) = {} for this measurement; no finite-rate prediction".format(drift))
    scenario = ChangePointScenario(model, l)
    points = []
    for h in h_list:
        rule = StoppingRule(h)
        fa = estimate_false_alarm_time(scenario, rule, trials, cap, seed, n_jobs, verbose=verbose)
        delay = estimate_worst_delay(scenario, rule, trials, cap, seed, n_jobs, straddle=straddle, verbose=verbose)
        predicted = _wald(h, delay.overshoot_mean, drift, l, straddle)
        points.append(TradeoffPoint(h, l, fa, delay, predicted, scenario_id))
    return points


def family_tradeoff(
    pre_r0: float,
    family: Sequence[Tuple[float, float]],
    l: int,
    t_fa_target: float,
    trials: int,
    cap: int = th.__cap__,
    seed: int = 0,
    n_jobs: int = 1,
    truths: Union[Sequence[Tuple[float, float]], None] = None,
    straddle: bool = False,
    verbose: bool = False,
) -> List[TradeoffPoint]:
    """Family detector over a finite set of candidate post-change states,
    all measured with the state-independent block measurement.

    The threshold is log T_FA + log |S|. One point is returned per true
    post-change state (each family member, then any extra `truths`); the
    prediction uses the largest drift max_s D(q'||p) - D(q'||q_s) among
    the members.

    Parameters
    ----------
    pre_r0 : float
        Bloch length of the pre-change state
    family : sequence of (r1, theta)
        Candidate post-change states
    l : int
        Copies per block
    t_fa_target : float
        Required mean false-alarm time in block steps
    trials : int
    cap : int, optional
    seed : int, optional
    n_jobs : int, optional
    truths : sequence of (r1, theta), optional
        Additional true post-change states outside the family
    straddle : bool, optional
    verbose : bool, optional

    Returns
    -------
    list of TradeoffPoint
        One per truth; scenario ids are "member-<k>" and "truth-<k>"
    """
    if not family:
        raise ValueError("The family must hold at least one post-change state")
    meas = hayashi_measurement(l)
    pre = QubitPair(pre_r0, pre_r0, 0.0).pre_blocks(l)

    def model_for(r1, theta):
        post = QubitPair(pre_r0, r1, theta).post_blocks(l)
        return likelihood_model(outcome_distribution(pre, post, meas))

    models = [model_for(r1, theta) for r1, theta in family]
    rule = threshold_for_family(t_fa_target, len(models))
    base = ChangePointScenario(models[0], l)
    fa = estimate_false_alarm_time(base, rule, trials, cap, seed, n_jobs, detectors=models, verbose=verbose)
    cases = [("member-{}".format(k), m) for k, m in enumerate(models)]
    for k, (r1, theta) in enumerate(truths or []):
        cases.append(("truth-{}".format(k), model_for(r1, theta)))
    points = []
    for name, truth in cases:
        scenario = ChangePointScenario(truth, l)
        delay = estimate_worst_delay(
            scenario, rule, trials, cap, seed, n_jobs, straddle=straddle, detectors=models, verbose=verbose
        )
        drift = max(m.drift(truth.q) for m in models)
        predicted = _wald(rule.h, delay.overshoot_mean, drift, l, straddle)
        points.append(TradeoffPoint(rule.h, l, fa, delay, predicted, name))
    return points


def worst_case(points: Sequence[TradeoffPoint]) -> TradeoffPoint:
    """Point with the largest estimated delay."""
    return max(points, key=lambda p: p.delay_est.mean)


class SlopeEstimate:
    """Mean pre- and post-change increments of Z_1^n over several
    trajectories."""

    def __init__(self, pre: MonteCarloEstimate, post: MonteCarloEstimate) -> None:
        self.pre = pre
        self.post = post

    def __repr__(self) -> str:
        return "SlopeEstimate(pre={:.6g} +- {:.2g}, post={:.6g} +- {:.2g})".format(
            self.pre.mean, self.pre.std_error, self.post.mean, self.post.std_error
        )


def sample_trajectories(
    model: LikelihoodModel, nu_blocks: int, n_steps: int, trials: int, seed: int = 0
) -> List[Tuple[np.ndarray, np.ndarray]]:
    """Outcome-index sequences of `n_steps` blocks with a change after
    `nu_blocks`, one per trial, with their walk Z_1^n.

    Returns
    -------
    list of tuple
        (outcomes, walk) per trial
    """
    scenario = ChangePointScenario(model, 1, nu_blocks)
    out = []
    for i in range(trials):
        outcomes = OutcomeStream(scenario, trial_seed(seed, TRAJECTORY_STREAM, i)).take(n_steps)
        out.append((outcomes, walk_path(model.z[outcomes])))
    return out


def estimate_trajectory_slopes(
    model: LikelihoodModel, nu_blocks: int, n_steps: int, trials: int, seed: int = 0
) -> SlopeEstimate:
    """Mean-trend slopes of Z_1^n before and after the change.

    Per trajectory the slope is the mean increment on each side of the
    change, Z_nu / nu and (Z_n - Z_nu) / (n - nu); these estimate
    -D(p||q) and D(q||p).

    Parameters
    ----------
    model : LikelihoodModel
    nu_blocks : int
        Change position, 0 < nu_blocks < n_steps
    n_steps : int
        Trajectory length
    trials : int
        Number of trajectories (>= 2 for a standard error)
    seed : int, optional

    Returns
    -------
    SlopeEstimate
    """
    if not 0 < nu_blocks < n_steps:
        raise ValueError("Need 0 < nu_blocks < n_steps, got {} and {}".format(nu_blocks, n_steps))
    pre, post = [], []
    for _, walk in sample_trajectories(model, nu_blocks, n_steps, trials, seed):
        pre.append(walk[nu_blocks - 1] / nu_blocks)
        post.append((walk[-1] - walk[nu_blocks - 1]) / (n_steps - nu_blocks))
    return SlopeEstimate(MonteCarloEstimate.from_samples(pre), MonteCarloEstimate.from_samples(post))
