import numpy as np
import pytest

from trendlens.classify import Category, Direction
from trendlens.errors import InvalidConfig, WrongPeriodCount
from trendlens.synth import (STAGES, GroundTruthConfig, generate, load_config, recovery_experiment,
                             true_category, true_directions)
from conftest import FIXTURES, Y2024, Y2025

ONES = {s: 1.0 for s in STAGES}


def cfg(h=(0.01, 0.01), e=(1000, 2000), stages=ONES, seed=0):
    return GroundTruthConfig((Y2024, Y2025), tuple(e), tuple(h), dict(stages), seed)


def test_means_follow_hazard_times_exposure():
    obs = np.array([generate(cfg(seed=s)).observed_counts for s in range(10_000)])
    assert obs.mean(axis=0) == pytest.approx([10, 20], rel=0.05)


def test_no_thinning_when_all_stages_certain():
    for seed in range(20):
        stream = generate(cfg(seed=seed))
        assert stream.observed_counts == stream.realized_counts
        assert len(stream.incidents) == sum(stream.observed_counts)


def test_stage_probabilities_multiply():
    config = cfg(h=(0.1, 0.1), e=(1000, 1000), stages={s: 0.5 for s in STAGES})
    assert config.propensity() == pytest.approx((0.5 ** 6,) * 2)
    realized, observed = [], []
    for seed in range(2000):
        stream = generate(config.with_seed(seed))
        realized.append(sum(stream.realized_counts))
        observed.append(sum(stream.observed_counts))
    assert np.mean(observed) == pytest.approx(0.5 ** 6 * np.mean(realized), rel=0.05)


def test_generation_is_seeded():
    a, b = generate(cfg(seed=9)), generate(cfg(seed=9))
    assert a.incidents.records == b.incidents.records


@pytest.mark.parametrize("h, e, expected", [
    ((0.1, 0.1), (1000, 2000), Category.ESCALATING),
    ((0.2, 0.1), (1000, 2000), Category.MITIGATING),
    ((0.1, 0.2), (2000, 1000), Category.CONCENTRATING),
])
def test_true_category(h, e, expected):
    assert true_category(cfg(h=h, e=e)) is expected


def test_true_directions_flat():
    assert true_directions(cfg(h=(0.1, 0.1), e=(5, 5))) == (Direction.FLAT, Direction.FLAT)


def test_wrong_period_count():
    three = GroundTruthConfig((Y2024, Y2025, Y2025.__class__.parse("2026-01-01..2026-12-31")),
                              (1, 1, 1), (1, 1, 1), ONES)
    with pytest.raises(WrongPeriodCount):
        true_category(three)


def test_invalid_configs():
    with pytest.raises(InvalidConfig):
        cfg(stages={"detection": 1.0})
    with pytest.raises(InvalidConfig):
        cfg(stages={**ONES, "capture": 0.0})
    with pytest.raises(InvalidConfig):
        cfg(h=(0.1,))
    with pytest.raises(InvalidConfig):
        GroundTruthConfig.from_dict({"periods": []})


def test_config_round_trip():
    config = load_config(FIXTURES / "synth" / "nonstationary.json")
    assert GroundTruthConfig.from_dict(config.to_dict()) == config
    assert config.propensity() == pytest.approx((0.2, 0.8))
    assert config.digest().startswith("sha256:")


@pytest.mark.slow
def test_stable_funnel_recovers():
    config = load_config(FIXTURES / "synth" / "stable.json")
    assert min(h * e * p for h, e, p in zip(config.hazard_per_exposure, config.exposure_per_period,
                                            config.propensity())) >= 50
    assert recovery_experiment(config, n_runs=200).recovery_rate >= 0.95


@pytest.mark.slow
def test_nonstationary_funnel_misreports_increase():
    report = recovery_experiment(load_config(FIXTURES / "synth" / "nonstationary.json"), n_runs=200)
    assert report.harm_status_counts.get("INCREASING", 0) / report.n_runs >= 0.8


def test_sparse_counts_mostly_abstain():
    report = recovery_experiment(load_config(FIXTURES / "synth" / "sparse.json"), n_runs=100)
    assert report.abstention_rate > 0.5


def test_assessor_noise_produces_partials():
    from trendlens.assessor import StubBackend, Verdict, assess_incident
    from trendlens.synth import truth_mq
    config = cfg(h=(0.2, 0.2), e=(1000, 1000))
    stream = generate(config)
    backend = StubBackend(noise=0.5, noise_seed=1)
    verdicts = [assess_incident(backend, truth_mq(config), r).s_match.value for r in stream.incidents.records]
    share = verdicts.count(Verdict.INDETERMINATE) / len(verdicts)
    assert 0.4 < share < 0.6
    assert set(verdicts) == {Verdict.TRUE, Verdict.INDETERMINATE}
