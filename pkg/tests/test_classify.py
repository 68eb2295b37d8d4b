import itertools

import pytest
from hypothesis import given, strategies as st

from trendlens.classify import (Category, Direction, TrajectoryResult, classbox, classify, derive_hhat,
                                trajectory, transition)
from trendlens.exposure import ExposureTrendOutcome
from trendlens.harm import HarmTrendOutcome
from trendlens.trend import TrendStatus

UP, DOWN, FLAT, UND = Direction.UP, Direction.DOWN, Direction.FLAT, Direction.UNDETERMINED
INC, DEC = TrendStatus.INCREASING, TrendStatus.DECREASING


def H(status, growth=None):
    return HarmTrendOutcome(status, growth)


def E(status, growth=None):
    return ExposureTrendOutcome(status, growth)


def test_av_hhat_down():
    assert derive_hhat(H(INC, 0.854), E(INC, 1.0)) is DOWN


def test_chatbot_hhat_up():
    assert derive_hhat(H(INC, 11110.1), E(INC, 0.375)) is UP


def test_equal_growth_is_flat():
    assert derive_hhat(H(INC, 0.40), E(INC, 0.40)) is FLAT
    assert derive_hhat(H(INC, 0.45), E(INC, 0.40)) is FLAT


def test_abstain_or_divergent_is_undetermined():
    for status in (TrendStatus.ABSTAIN, TrendStatus.DIVERGENT):
        assert derive_hhat(H(status), E(INC, 0.1)) is UND
        assert derive_hhat(H(INC, 0.1), E(status)) is UND


def test_flat_status_counts_as_zero_growth():
    assert derive_hhat(H(TrendStatus.FLAT, 0.0), E(INC, 0.5)) is DOWN
    assert derive_hhat(H(INC, 0.05), E(TrendStatus.FLAT, 0.0)) is FLAT


def test_sign_rule_without_magnitude():
    assert derive_hhat(H(INC, 0.3), E(DEC)) is UP
    assert derive_hhat(H(DEC, -0.3), E(INC)) is DOWN
    assert derive_hhat(H(INC, 0.3), E(INC)) is UND


def test_infinite_growth():
    assert derive_hhat(H(INC, float("inf")), E(INC, 0.2)) is UP


GRID = {
    (UP, UP): Category.ESCALATING, (UP, FLAT): Category.ESCALATING, (UP, DOWN): Category.MITIGATING,
    (FLAT, DOWN): Category.MITIGATING, (FLAT, UP): Category.CONCENTRATING, (DOWN, UP): Category.CONCENTRATING,
    (DOWN, DOWN): Category.RECEDING, (DOWN, FLAT): Category.RECEDING, (FLAT, FLAT): Category.RECEDING,
}


@pytest.mark.parametrize("e, h", list(itertools.product(Direction, Direction)))
def test_grid_is_total(e, h):
    expected = Category.UNCLASSIFIABLE if UND in (e, h) else GRID[(e, h)]
    assert classify(e, h) is expected


def test_named_cells():
    assert classify(UP, UP) is Category.ESCALATING
    assert classify(UP, DOWN) is Category.MITIGATING
    assert classify(UND, UP) is Category.UNCLASSIFIABLE


def test_flat_flat_is_stable_receding():
    r = trajectory(H(TrendStatus.FLAT, 0.0), E(TrendStatus.FLAT, 0.0))
    assert r.category is Category.RECEDING and r.qualifier == "stable"


def test_absolute_harm_warning():
    av = trajectory(H(INC, 0.854), E(INC, 1.0))
    assert av.category is Category.MITIGATING and av.absolute_harm_warning
    receding = trajectory(H(DEC, -0.5), E(DEC, -0.1))
    assert receding.category is Category.RECEDING and not receding.absolute_harm_warning
    unknown = trajectory(H(TrendStatus.ABSTAIN), E(INC, 0.1))
    assert unknown.category is Category.UNCLASSIFIABLE and not unknown.absolute_harm_warning
    assert unknown.evidence["harm"]["status"] == "ABSTAIN"


def test_unclassifiable_invariant_enforced():
    with pytest.raises(ValueError):
        TrajectoryResult(Category.ESCALATING, UND, UP)
    with pytest.raises(ValueError):
        TrajectoryResult(Category.UNCLASSIFIABLE, UP, UP)


def R(category):
    e, h = {Category.ESCALATING: (UP, UP), Category.MITIGATING: (UP, DOWN), Category.CONCENTRATING: (DOWN, UP),
            Category.RECEDING: (DOWN, DOWN), Category.UNCLASSIFIABLE: (UND, UP)}[category]
    return TrajectoryResult(category, e, h)


@pytest.mark.parametrize("prev, curr, label", [
    (Category.ESCALATING, Category.MITIGATING, "possible successful intervention"),
    (Category.RECEDING, Category.CONCENTRATING, "deepening harm within a subpopulation"),
    (Category.MITIGATING, Category.MITIGATING, "stable"),
    (Category.MITIGATING, Category.ESCALATING, "category change"),
    (Category.UNCLASSIFIABLE, Category.ESCALATING, "UNKNOWN"),
])
def test_transitions(prev, curr, label):
    assert transition(R(prev), R(curr)).interpretation == label


def test_result_round_trip_and_classbox():
    r = trajectory(H(INC, 0.854), E(INC, 1.0))
    assert TrajectoryResult.from_dict(r.to_dict()) == r
    box = classbox(r)
    assert "Mitigating" in box and "E↑" in box and "Ĥ↓" in box and "still rising" in box


growth = st.floats(-0.99, 50, allow_nan=False)


@given(growth, growth, st.floats(0, 1))
def test_hhat_matches_dead_band_rule(hg, eg, band):
    hs = INC if hg > 0 else DEC if hg < 0 else TrendStatus.FLAT
    es = INC if eg > 0 else DEC if eg < 0 else TrendStatus.FLAT
    h = H(hs, hg if hs.directional else None)
    e = E(es, eg if es.directional else None)
    d = hg - eg
    expected = UP if d > band else DOWN if d < -band else FLAT
    assert derive_hhat(h, e, band) is expected
