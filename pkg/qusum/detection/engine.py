#!/usr/bin/env python
# -*- coding : utf-8 -*-

"""CUSUM stopping rules on streams of measurement outcomes.

Outcome streams carry outcome *indices* (positions in the alphabet of a
LikelihoodModel). One engine step is one measured block; conversion to
single-copy units happens in qusum.simulation.
"""

from typing import Iterable, Iterator, List, Sequence, Tuple, Union

import numpy as np

from ..quantum import thresholds as th
from ..quantum.qmath import ProbabilityVector
from ..system.exceptions import DimensionError, UndetectableChangeError
from ..system.utils import safelog


class LikelihoodModel:
    """Pre- and post-change outcome distributions with their
    log-likelihood ratio table z = log q - log p.

    Attributes
    ----------
    p : ProbabilityVector
        Pre-change distribution
    q : ProbabilityVector
        Post-change distribution
    z : ndarray(dtype=float)
        Log-likelihood ratio per outcome index; -inf where q = 0 < p,
        +inf where p = 0 < q and 0 where both vanish
    labels : tuple
        Outcome labels
    """

    def __init__(
        self,
        p: ProbabilityVector,
        q: ProbabilityVector,
        log_p: Union[np.ndarray, None] = None,
        log_q: Union[np.ndarray, None] = None,
    ) -> None:
        """Constructor for LikelihoodModel

        Parameters
        ----------
        p : ProbabilityVector
            Pre-change distribution
        q : ProbabilityVector
            Post-change distribution over the same labels
        log_p, log_q : ndarray, optional
            Log-probabilities, when available at higher precision than
            the exponentiated vectors
        """
        if not isinstance(p, ProbabilityVector):
            p = ProbabilityVector(p)
        if not isinstance(q, ProbabilityVector):
            q = ProbabilityVector(q)
        if p.labels != q.labels:
            raise DimensionError("Pre- and post-change distributions have different outcome labels")
        lp = safelog(p.probs) if log_p is None else np.asarray(log_p, dtype=float)
        lq = safelog(q.probs) if log_q is None else np.asarray(log_q, dtype=float)
        if lp.shape != p.probs.shape or lq.shape != q.probs.shape:
            raise DimensionError("Log-probabilities do not match the alphabet size")
        with np.errstate(invalid="ignore"):
            z = lq - lp
        z = np.where(np.isneginf(lp) & np.isneginf(lq), 0.0, z)
        z.setflags(write=False)
        self.p = p
        self.q = q
        self.z = z
        self.labels = p.labels

    def __len__(self) -> int:
        return self.z.size

    def index(self, outcome) -> int:
        """Position of an outcome label in the alphabet."""
        return self.p.index(outcome)

    def drift(self, truth: Union[ProbabilityVector, None] = None) -> float:
        """Mean increment E_truth[z]; equals D(q||p) when `truth` is q."""
        truth = self.q if truth is None else truth
        if not isinstance(truth, ProbabilityVector):
            truth = ProbabilityVector(truth)
        if truth.labels != self.labels:
            raise DimensionError("Truth distribution has different outcome labels")
        keep = truth.probs > 0
        zk = self.z[keep]
        if np.any(np.isneginf(zk)):
            return -np.inf if not np.any(np.isposinf(zk)) else np.nan
        return float(np.sum(truth.probs[keep] * zk))

    def __repr__(self) -> str:
        return "LikelihoodModel(outcomes={})".format(len(self))


class CusumState:
    """Running CUSUM statistic.

    Attributes
    ----------
    w : float
        Statistic in nats, >= 0
    n : int
        Number of increments absorbed
    """

    def __init__(self, w: float = 0.0, n: int = 0) -> None:
        if not w >= 0:
            raise ValueError("CUSUM statistic must be non-negative, got {}".format(w))
        if n < 0:
            raise ValueError("Step count must be non-negative, got {}".format(n))
        self.w = float(w)
        self.n = int(n)

    def __eq__(self, other) -> bool:
        return isinstance(other, CusumState) and self.w == other.w and self.n == other.n

    def __repr__(self) -> str:
        return "CusumState(w={}, n={})".format(self.w, self.n)


class StoppingRule:
    """Alarm threshold h > 0 in nats."""

    def __init__(self, h: float) -> None:
        h = float(h)
        if not (np.isfinite(h) and h > 0):
            raise ValueError("Threshold h must be a positive finite number, got {}".format(h))
        self.h = h

    def __repr__(self) -> str:
        return "StoppingRule(h={})".format(self.h)


class StopResult:
    """Outcome of one detector run.

    Attributes
    ----------
    t : int
        Alarm step in block units (steps consumed when censored)
    overshoot : float
        Statistic minus h at the alarm (0 when censored)
    censored : bool
        True when the run hit the cap or the stream ran out
    which : int or None
        For family detectors, the index of the member that alarmed
    """

    def __init__(self, t: int, overshoot: float, censored: bool, which: Union[int, None] = None) -> None:
        if not censored and not overshoot >= 0:
            raise ValueError("Overshoot must be non-negative, got {}".format(overshoot))
        self.t = int(t)
        self.overshoot = float(overshoot)
        self.censored = bool(censored)
        self.which = which

    def __repr__(self) -> str:
        return "StopResult(t={}, overshoot={:.6g}, censored={})".format(self.t, self.overshoot, self.censored)


class FamilyState:
    """Parallel CUSUM statistics, one per candidate post-change state.

    Attributes
    ----------
    per_sigma : dict
        hypothesis index -> CusumState
    """

    def __init__(self, per_sigma: dict) -> None:
        if not per_sigma:
            raise ValueError("A family needs at least one member")
        self.per_sigma = dict(per_sigma)

    @classmethod
    def start(cls, size: int) -> "FamilyState":
        return cls({k: CusumState() for k in range(size)})

    @property
    def statistic(self) -> float:
        """Largest member statistic."""
        return max(s.w for s in self.per_sigma.values())

    def alarmed(self, rule: StoppingRule) -> bool:
        return self.statistic >= rule.h

    def __repr__(self) -> str:
        return "FamilyState({})".format({k: s.w for k, s in self.per_sigma.items()})


def llr_increment(model: LikelihoodModel, outcome) -> float:
    """Log-likelihood ratio log q(x)/p(x) of one outcome label.

    Parameters
    ----------
    model : LikelihoodModel
    outcome : hashable
        Outcome label in the model's alphabet

    Returns
    -------
    float
        Increment in nats (-inf / +inf sentinels for impossible outcomes)
    """
    return float(model.z[model.index(outcome)])


def cusum_update(state: CusumState, z: float) -> CusumState:
    """Reflected recursion w' = max(w + z, 0); a -inf increment resets
    the statistic to zero."""
    w = state.w + z
    return CusumState(w if w > 0 else 0.0, state.n + 1)


def _chunks(stream, cap: int) -> Iterator[np.ndarray]:
    """Yields outcome-index chunks of growing size until `cap` outcomes
    are delivered or the stream runs out."""
    given = 0
    if hasattr(stream, "next_chunk"):
        size = th.__chunkmin__
        while given < cap:
            chunk = np.asarray(stream.next_chunk(min(size, cap - given)), dtype=np.intp)
            if chunk.size == 0:
                return
            given += chunk.size
            yield chunk
            size = min(2 * size, th.__chunkmax__)
        return
    if isinstance(stream, np.ndarray) or isinstance(stream, (list, tuple)):
        arr = np.asarray(stream, dtype=np.intp)
        if arr.ndim != 1:
            raise ValueError("Outcome stream must be one-dimensional")
        if arr.size:
            yield arr[:cap]
        return
    buf = []
    for x in stream:
        buf.append(int(x))
        given += 1
        if len(buf) == th.__chunkmin__ or given >= cap:
            yield np.asarray(buf, dtype=np.intp)
            buf = []
        if given >= cap:
            return
    if buf:
        yield np.asarray(buf, dtype=np.intp)


def _increments(model: LikelihoodModel, idx: np.ndarray) -> np.ndarray:
    if idx.size and (idx.min() < 0 or idx.max() >= len(model)):
        raise KeyError("Outcome index outside the alphabet of size {}".format(len(model)))
    return model.z[idx]


def reflected_path(z: np.ndarray, w0: float = 0.0) -> np.ndarray:
    """CUSUM statistic after every increment of `z`, started from `w0`.

    Between -inf increments the recursion is evaluated in closed form as
    w_n = S_n - min(-w0, min_k S_k) with S the partial sums of the
    segment; a -inf increment sets the statistic to zero.
    """
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    start = 0
    for cut in list(np.flatnonzero(np.isneginf(z))) + [z.size]:
        seg = z[start:cut]
        if seg.size:
            S = np.cumsum(seg)
            out[start:cut] = S - np.minimum(-w0, np.minimum.accumulate(S))
        if cut < z.size:
            out[cut] = 0.0
            w0 = 0.0
        start = cut + 1
    return out


def walk_path(z: np.ndarray, w0: float = 0.0) -> np.ndarray:
    """Non-reflected partial sums w0 + Z_1^n."""
    with np.errstate(invalid="ignore"):
        out = w0 + np.cumsum(np.asarray(z, dtype=float))
    return np.where(np.isnan(out), -np.inf, out)


def run_until_stop(
    stream, model: LikelihoodModel, rule: StoppingRule, cap: int = th.__cap__, reflect: bool = True
) -> StopResult:
    """Runs the detector until its statistic reaches h.
    Classification: Function

    Parameters
    ----------
    stream : OutcomeStream or sequence of int
        Outcome indices; objects with a ``next_chunk(size)`` method are
        read in chunks of growing size
    model : LikelihoodModel
        Likelihood ratios of the outcomes
    rule : StoppingRule
        Threshold h
    cap : int, optional
        Largest number of steps (Default: 10**7)
    reflect : bool, optional
        Reflect the statistic at zero (CUSUM). With False the one-sided
        walk Z_1^n from the first step is stopped instead, i.e. the
        stopping time T_1 (Default: True)

    Returns
    -------
    StopResult
        First step n >= 1 with statistic >= h, or a censored result
    """
    if cap < 1:
        raise ValueError("cap must be a positive integer, got {}".format(cap))
    path = reflected_path if reflect else walk_path
    w0 = 0.0
    n = 0
    for idx in _chunks(stream, cap):
        w = path(_increments(model, idx), w0)
        hit = np.flatnonzero(w >= rule.h)
        if hit.size:
            k = int(hit[0])
            return StopResult(n + k + 1, float(w[k] - rule.h), False)
        n += idx.size
        w0 = float(w[-1])
    return StopResult(n, 0.0, True)


def family_update(state: FamilyState, models: Sequence[LikelihoodModel], outcome) -> FamilyState:
    """Updates every member statistic with its own log-likelihood ratio
    of one outcome label."""
    _checkfamily(models)
    if len(state.per_sigma) != len(models):
        raise DimensionError("Family state has {} members but {} models".format(len(state.per_sigma), len(models)))
    return FamilyState({k: cusum_update(s, llr_increment(models[k], outcome)) for k, s in state.per_sigma.items()})


def _checkfamily(models: Sequence[LikelihoodModel]) -> None:
    if not models:
        raise ValueError("A family needs at least one model")
    base = models[0]
    for m in models[1:]:
        if m.labels != base.labels:
            raise DimensionError("Family members have different outcome alphabets")
        if np.max(np.abs(m.p.probs - base.p.probs)) > th.__probtol__:
            raise ValueError("Family members must share the pre-change distribution")


def run_family_until_stop(
    stream, models: Sequence[LikelihoodModel], rule: StoppingRule, cap: int = th.__cap__, reflect: bool = True
) -> StopResult:
    """Runs parallel per-member statistics on one stream and alarms when
    any of them reaches h. `which` names the first member to cross
    (lowest index on ties)."""
    _checkfamily(models)
    if cap < 1:
        raise ValueError("cap must be a positive integer, got {}".format(cap))
    path = reflected_path if reflect else walk_path
    K = len(models)
    w0 = np.zeros(K)
    n = 0
    for idx in _chunks(stream, cap):
        paths = np.stack([path(_increments(m, idx), w0[k]) for k, m in enumerate(models)])
        crossed = paths >= rule.h
        first = np.where(crossed.any(axis=1), crossed.argmax(axis=1), idx.size)
        step = int(first.min())
        if step < idx.size:
            which = int(np.flatnonzero(first == step)[0])
            return StopResult(n + step + 1, float(paths[:, step].max() - rule.h), False, which=which)
        n += idx.size
        w0 = paths[:, -1].copy()
    return StopResult(n, 0.0, True)


def threshold_for_family(t_fa_target: float, family_size: int = 1) -> StoppingRule:
    """Threshold h = log T_FA + log |S| guaranteeing a mean false-alarm
    time of at least T_FA for a family of |S| parallel detectors.

    Parameters
    ----------
    t_fa_target : float
        Required mean false-alarm time (block steps), > 1
    family_size : int, optional
        Number of candidate post-change states (Default: 1)

    Returns
    -------
    StoppingRule
    """
    if not t_fa_target > 1:
        raise ValueError("Target false-alarm time must exceed 1, got {}".format(t_fa_target))
    if family_size < 1:
        raise ValueError("Family size must be at least 1, got {}".format(family_size))
    return StoppingRule(np.log(t_fa_target) + np.log(family_size))


def misspecified_drift(truth: ProbabilityVector, p: ProbabilityVector, q: ProbabilityVector) -> float:
    """Mean increment D(q'||p) - D(q'||q) of a detector tuned to q when the
    outcomes follow q'."""
    return LikelihoodModel(p, q).drift(truth)


def wald_delay_prediction(
    h: float, model: LikelihoodModel, post_truth: Union[ProbabilityVector, None] = None, overshoot: float = 0.0
) -> float:
    """Mean detection delay (h + E[s]) / (D(q'||p) - D(q'||q)) in block
    steps from Wald's identity.

    Parameters
    ----------
    h : float
        Threshold in nats
    model : LikelihoodModel
        Detector the stream is fed to
    post_truth : ProbabilityVector, optional
        Actual post-change distribution q'; defaults to the model's q,
        for which the denominator is D(q||p)
    overshoot : float, optional
        Mean overshoot to add to h (Default: 0)

    Returns
    -------
    float
        Predicted mean delay in block steps
    """
    den = model.drift(post_truth)
    if not den > th.__cutoff__:
        raise UndetectableChangeError(
            "Mean log-likelihood increment under the post-change law is {}; the change is undetectable".format(den)
        )
    return float((h + overshoot) / den)


def walk_trajectory(outcomes, model: LikelihoodModel) -> Tuple[np.ndarray, np.ndarray]:
    """Partial sums Z_1^n and the reflected statistic for a finite
    outcome-index sequence.

    Returns
    -------
    tuple of ndarray
        (walk, cusum), each one value per outcome
    """
    z = _increments(model, np.asarray(outcomes, dtype=np.intp))
    return walk_path(z), reflected_path(z)


def alarm_times(outcomes: Iterable[int], model: LikelihoodModel, rules: List[StoppingRule]) -> List[Union[int, None]]:
    """First crossing step of the reflected statistic for several
    thresholds on one finite sequence (None where never crossed)."""
    _, w = walk_trajectory(list(outcomes), model)
    out = []
    for rule in rules:
        hit = np.flatnonzero(w >= rule.h)
        out.append(int(hit[0]) + 1 if hit.size else None)
    return out
