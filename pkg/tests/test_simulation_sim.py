import numpy as np
import pytest

from qusum.detection.engine import LikelihoodModel, StoppingRule, misspecified_drift
from qusum.quantum.povm import QubitPair, measured_rate, optimize_angles
from qusum.quantum.qmath import ProbabilityVector
from qusum.simulation import sim
from qusum.system.exceptions import UndetectableChangeError

FAST = LikelihoodModel(ProbabilityVector([0.2, 0.8]), ProbabilityVector([0.6, 0.4]))
SM = LikelihoodModel(ProbabilityVector([0.2, 0.8]), ProbabilityVector([0.25, 0.75]))
D_FAST = 0.6 * np.log(3) + 0.4 * np.log(0.5)


def combined_se(point, drift):
    se_s = point.delay_est.overshoot_se if np.isfinite(point.delay_est.overshoot_se) else 0.0
    return np.sqrt(point.delay_est.std_error**2 + (point.l * se_s / drift) ** 2)


def test_scenario_from_copies():
    """Tests block positions of aligned and straddling changes"""
    aligned = sim.ChangePointScenario.from_copies(FAST, 5, 10)
    inside = sim.ChangePointScenario.from_copies(FAST, 5, 12)
    assert aligned.nu_blocks == 2
    assert inside.nu_blocks == 3
    assert sim.ChangePointScenario.from_copies(FAST, 5, None).nu_blocks is None


def test_straddling_block_drawn_pre():
    """Tests whether the block holding a non-aligned change is drawn from p under either policy"""
    model = LikelihoodModel(ProbabilityVector([1.0, 0.0]), ProbabilityVector([0.0, 1.0]))
    for policy in ("pre", "skip-block"):
        scenario = sim.ChangePointScenario.from_copies(model, 5, 12, straddle_policy=policy)
        assert scenario.straddle_policy == sim.StraddlePolicy(policy)
        assert sim.sample_stream(scenario, seed=0).take(5).tolist() == [0, 0, 0, 1, 1]


def test_scenario_invalid():
    """Tests whether a negative change position or block size raises ValueError"""
    with pytest.raises(ValueError):
        sim.ChangePointScenario(FAST, 0)
    with pytest.raises(ValueError):
        sim.ChangePointScenario(FAST, 1, -1)


def test_outcome_stream_switches_law():
    """Tests whether outcomes follow p before the change and q after it"""
    model = LikelihoodModel(ProbabilityVector([1.0, 0.0]), ProbabilityVector([0.0, 1.0]))
    stream = sim.sample_stream(sim.ChangePointScenario(model, 1, 3), seed=0)
    assert stream.take(6).tolist() == [0, 0, 0, 1, 1, 1]


def test_outcome_stream_deterministic():
    """Tests whether equal seeds give identical streams"""
    scenario = sim.ChangePointScenario(FAST, 1, 100)
    a = sim.sample_stream(scenario, sim.trial_seed(7, 0, 3)).take(500)
    b = sim.sample_stream(scenario, sim.trial_seed(7, 0, 3)).take(500)
    c = sim.sample_stream(scenario, sim.trial_seed(7, 0, 4)).take(500)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_outcome_stream_frequencies():
    """Tests whether pre-change outcome frequencies match p"""
    stream = sim.sample_stream(sim.ChangePointScenario(FAST), seed=1)
    draws = stream.take(20000)
    assert abs(np.mean(draws == 0) - 0.2) < 0.01


def test_monte_carlo_estimate_from_samples():
    """Tests mean, standard error and censored share of an estimate"""
    est = sim.MonteCarloEstimate.from_samples([1.0, 2.0, 3.0], censored=[False, False, True])
    assert est.mean == 2.0
    assert np.isclose(est.std_error, 1 / np.sqrt(3))
    assert np.isclose(est.censored_fraction, 1 / 3)
    assert est.one_sided


def test_false_alarm_needs_no_change():
    """Tests whether false-alarm estimation refuses a scenario with a change"""
    with pytest.raises(ValueError):
        sim.estimate_false_alarm_time(sim.ChangePointScenario(FAST, 1, 10), StoppingRule(2.0), 10)


def test_worst_delay_undetectable():
    """Tests whether a detector without positive drift raises UndetectableChangeError"""
    model = LikelihoodModel(ProbabilityVector([0.5, 0.5]), ProbabilityVector([0.5, 0.5]))
    with pytest.raises(UndetectableChangeError):
        sim.estimate_worst_delay(sim.ChangePointScenario(model), StoppingRule(2.0), 10)


def test_censoring_is_conservative():
    """Tests whether runs hitting the cap count as the cap and are flagged"""
    est = sim.estimate_false_alarm_time(sim.ChangePointScenario(FAST), StoppingRule(20.0), 20, cap=5)
    assert est.censored_fraction == 1.0
    assert est.mean == 5.0


def test_straddle_charges_one_block():
    """Tests whether the straddle option adds exactly l copies on paired seeds"""
    scenario = sim.ChangePointScenario(FAST, 3)
    rule = StoppingRule(3.0)
    plain = sim.estimate_worst_delay(scenario, rule, 50, seed=2)
    charged = sim.estimate_worst_delay(scenario, rule, 50, seed=2, straddle=True)
    assert np.isclose(charged.mean, plain.mean + 3)


def test_results_independent_of_workers():
    """Tests whether estimates are identical for one and two workers"""
    scenario = sim.ChangePointScenario(FAST)
    rule = StoppingRule(3.0)
    one = sim.estimate_false_alarm_time(scenario, rule, 120, seed=5, n_jobs=1)
    two = sim.estimate_false_alarm_time(scenario, rule, 120, seed=5, n_jobs=2)
    assert one.mean == two.mean and one.std_error == two.std_error


def test_run_trials_invalid_workers():
    """Tests whether zero workers raises ValueError"""
    with pytest.raises(ValueError):
        sim.run_trials(sim.ChangePointScenario(FAST), StoppingRule(2.0), 10, n_jobs=0)


def test_run_trials_verbose(capsys):
    """Tests whether verbose runs announce the worker count"""
    sim.run_trials(sim.ChangePointScenario(FAST), StoppingRule(2.0), 10, verbose=True)
    captured = capsys.readouterr()
    assert "Processing with" in captured.out
    assert "workers..." in captured.out


def test_tradeoff_rows():
    """Tests whether tradeoff points fill every column of the tradeoff table"""
    points = sim.tradeoff_curve(FAST, 1, "optimized", [2.0, 3.0], 50, seed=3, scenario_id="fast")
    assert len(points) == 2
    for p in points:
        assert len(p.as_row()) == len(sim.TRADEOFF_HEADER)
        assert p.as_row()[0] == "fast"
    assert sim.worst_case(points).h == 3.0


def test_false_alarm_bound():
    """Tests T_FA >= e^h at three standard errors on the Bernoulli 0.2 -> 0.6 pair"""
    scenario = sim.ChangePointScenario(FAST)
    for h in (2.0, 3.0, 4.0):
        est = sim.estimate_false_alarm_time(scenario, StoppingRule(h), 2000, seed=11)
        assert est.mean + 3 * est.std_error >= np.exp(h)


def test_wald_delay():
    """Tests delays against (h + mean overshoot)/D(q||p) on the Bernoulli 0.2 -> 0.6 pair"""
    points = sim.tradeoff_curve(FAST, 1, "optimized", [2.0, 3.0, 4.0, 6.0], 2000, seed=12)
    for p in points:
        assert np.isclose(p.predicted_delay, (p.h + p.delay_est.overshoot_mean) / D_FAST)
        assert abs(p.delay_est.mean - p.predicted_delay) <= 3 * combined_se(p, D_FAST)
        assert p.censored_fraction == 0.0


def test_classical_trajectory_slopes():
    """Tests pre- and post-change slopes of Z_1^n for the 1/5 -> 1/4 Bernoulli change"""
    slopes = sim.estimate_trajectory_slopes(SM, 10**4, 2 * 10**4, 20, seed=13)
    assert abs(slopes.pre.mean + 0.0070021066) <= 3 * slopes.pre.std_error
    assert abs(slopes.post.mean - 0.0073819970) <= 3 * slopes.post.std_error


def test_sample_trajectories_shape():
    """Tests whether trajectories have the requested length and start the walk at the first step"""
    trajs = sim.sample_trajectories(FAST, 5, 12, 3, seed=0)
    assert len(trajs) == 3
    outcomes, walk = trajs[0]
    assert outcomes.shape == (12,) and walk.shape == (12,)
    assert np.isclose(walk[0], FAST.z[outcomes[0]])


def test_family_guarantee():
    """Tests the false-alarm floor and per-member Wald delays of a two-member family"""
    target = np.exp(4.0)
    family = [(0.6, 0.0), (0.6, np.pi)]
    points = sim.family_tradeoff(0.2, family, 1, target, 1000, seed=14)
    assert [p.scenario_id for p in points] == ["member-0", "member-1"]
    assert np.isclose(points[0].h, 4.0 + np.log(2))
    fa = points[0].t_fa_est
    assert fa.mean + 3 * fa.std_error >= target
    # p = (0.6, 0.4); members measure q = (0.8, 0.2) and (0.2, 0.8)
    drifts = [0.8 * np.log(0.8 / 0.6) + 0.2 * np.log(0.2 / 0.4), 0.2 * np.log(0.2 / 0.6) + 0.8 * np.log(0.8 / 0.4)]
    for p, drift in zip(points, drifts):
        assert abs(p.delay_est.mean - p.predicted_delay) <= 3 * combined_se(p, drift)


def test_family_with_outside_truth():
    """Tests whether extra true states outside the family get their own rows"""
    points = sim.family_tradeoff(0.2, [(0.6, 0.0)], 1, 20.0, 30, seed=15, truths=[(0.7, 0.1)])
    assert [p.scenario_id for p in points] == ["member-0", "truth-0"]


@pytest.mark.slow
def test_quantum_delay_slope():
    """Tests the per-copy delay slope against 1/rate for l = 5 on the canonical pair"""
    pair = QubitPair.canonical()
    pre, post = pair.pre_blocks(5), pair.post_blocks(5)
    rate = measured_rate(pre, post, optimize_angles(pre, post))
    h_list = [3.0, 4.0, 5.0, 6.0]
    points = sim.tradeoff_curve(pair, 5, "optimized", h_list, 1000, seed=16)
    slope = np.polyfit(h_list, [p.delay_est.mean for p in points], 1)[0]
    assert abs(slope * rate - 1) <= 0.1
    assert rate <= pair.relative_entropy() + 1e-9


def test_paired_seeds_monotone_in_threshold():
    """Tests whether false-alarm time and delay never decrease with h on paired seeds"""
    scenario = sim.ChangePointScenario(FAST)
    h_list = [1.0, 2.0, 3.0, 4.5]
    fa = [sim.estimate_false_alarm_time(scenario, StoppingRule(h), 200, seed=21).mean for h in h_list]
    delay = [sim.estimate_worst_delay(scenario, StoppingRule(h), 200, seed=21).mean for h in h_list]
    assert fa == sorted(fa)
    assert delay == sorted(delay)


def test_outside_truth_wald_delay():
    """Tests the delay for a true state outside the family against the misspecified Wald prediction"""
    truths = [(0.5, 0.3)]
    points = sim.family_tradeoff(0.2, [(0.6, 0.0)], 1, 20.0, 600, seed=22, truths=truths)
    outside = points[-1]
    assert outside.scenario_id == "truth-0"
    # Hayashi outcomes of one copy follow the z component of each Bloch vector
    p = ProbabilityVector([0.6, 0.4])
    q = ProbabilityVector([0.8, 0.2])
    z = 0.5 * np.cos(0.3)
    truth = ProbabilityVector([(1 + z) / 2, (1 - z) / 2])
    drift = misspecified_drift(truth, p, q)
    assert drift > 0
    expected = (outside.h + outside.delay_est.overshoot_mean) / drift
    assert np.isclose(outside.predicted_delay, expected)
    assert abs(outside.delay_est.mean - expected) <= 3 * combined_se(outside, drift)


def test_classical_delay_ratio():
    """Tests the h = 22 to h = 6 delay ratio against (22 + s)/(6 + s) for the 1/5 -> 1/4 change"""
    scenario = sim.ChangePointScenario(SM)
    low = sim.estimate_worst_delay(scenario, StoppingRule(6.0), 300, seed=23)
    high = sim.estimate_worst_delay(scenario, StoppingRule(22.0), 300, seed=23)
    ratio = high.mean / low.mean
    expected = (22.0 + high.overshoot_mean) / (6.0 + low.overshoot_mean)
    spread = ratio * np.hypot(low.std_error / low.mean, high.std_error / high.mean)
    assert abs(ratio - expected) <= 3 * spread
    assert low.censored_fraction == 0.0 and high.censored_fraction == 0.0


@pytest.mark.slow
def test_longer_blocks_detect_faster():
    """Tests whether l = 5 beats l = 1 on the canonical pair at the same false-alarm time in copies"""
    pair = QubitPair.canonical()
    h1 = 8.0
    # T_FA in copies is about l e^h, so l = 5 needs h smaller by log 5
    one = sim.tradeoff_curve(pair, 1, "optimized", [h1], 800, seed=24)[0]
    five = sim.tradeoff_curve(pair, 5, "optimized", [h1 - np.log(5)], 800, seed=24)[0]
    spread = np.hypot(one.delay_est.std_error, five.delay_est.std_error)
    assert five.delay_est.mean <= one.delay_est.mean + 3 * spread
