import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import nanodetect as nd


def closed_form_two_agent_posterior(p_detect, detected, prior=(0.5, 0.5)):
    like = np.array(p_detect) if detected else 1.0 - np.array(p_detect)
    unnorm = like * np.array(prior)
    return unnorm / unnorm.sum()


def test_default_table_specific_cell_is_098():
    table = nd.default_table()
    assert table["Anti-A1-1", "A1"] == 0.98


def test_default_table_structure():
    table = nd.default_table()
    assert table.agents == ("A1", "A2", "A3", "Other-A", "B1", "B2", "New", "Buffer")
    assert table.modifiers == (
        "Anti-A1-1", "Anti-A1-2", "Anti-A2-1", "Anti-A3-1",
        "Anti-B1-1", "Anti-B2-1", "CellSurface",
    )
    # cross-family entries sit near zero, within-family intermediate
    assert table["Anti-B1-1", "A1"] == pytest.approx(0.02)
    assert table["Anti-A1-1", "A2"] == pytest.approx(0.3)
    # receptor row binds every virus strongly and buffer not at all
    for agent in table.agents[:-1]:
        assert table["CellSurface", agent] >= 0.9
    assert table["CellSurface", "Buffer"] <= 0.1


def test_two_agent_single_modifier_closed_form():
    table = nd.ResponseTable(("m",), ("X", "Y"), np.array([[0.9, 0.1]]))
    post = nd.posterior(table, nd.Evidence((True,)))
    np.testing.assert_allclose(
        post.probs, closed_form_two_agent_posterior([0.9, 0.1], True), atol=1e-9
    )
    post = nd.posterior(table, nd.Evidence((False,)))
    np.testing.assert_allclose(
        post.probs, closed_form_two_agent_posterior([0.9, 0.1], False), atol=1e-9
    )


def test_uniform_table_returns_prior():
    table = nd.ResponseTable(("m1", "m2"), ("X", "Y", "Z"), np.full((2, 3), 0.4))
    prior = np.array([0.5, 0.3, 0.2])
    post = nd.posterior(table, nd.Evidence((True, False)), prior)
    np.testing.assert_allclose(post.probs, prior, atol=1e-9)


def test_noiseless_a1_matches_fig12_pattern():
    table = nd.default_table()
    evidence = nd.simulate_evidence(table, {"A1"}, 0.0, 0)
    # deterministic idealized pattern: both A1 antibodies + receptor fire
    assert evidence.outcomes == (True, True, False, False, False, False, True)
    post = nd.posterior(table, evidence)
    assert post.argmax() == "A1"
    top = post.top(2)
    assert top[1][0] == "Other-A"
    assert post["A1"] > 3 * post["Other-A"]


def test_impossible_evidence_raises_without_clamping():
    table = nd.ResponseTable(("m",), ("X", "Y"), np.array([[1.0, 1.0]]))
    with pytest.raises(nd.NumericError, match="evidence impossible"):
        nd.posterior(table, nd.Evidence((False,)), clamp=False)
    # clamping makes the same query answerable
    post = nd.posterior(table, nd.Evidence((False,)), clamp=True)
    assert np.isfinite(post.probs).all()


def test_noisy_or_half_half():
    assert nd.noisy_or([0.5, 0.5]) == pytest.approx(0.75)
    assert nd.noisy_or([]) == 0.0
    assert nd.noisy_or([0.98]) == pytest.approx(0.98)


def test_buffer_produces_no_detections_at_zero_noise():
    table = nd.default_table()
    ev = nd.simulate_evidence(table, {"Buffer"}, 0.0, 3)
    assert ev.outcomes == (False,) * 7
    ev = nd.simulate_evidence(table, set(), 0.0, 3)
    assert ev.outcomes == (False,) * 7


def test_mix_a2_b1_ranks_both_comparably():
    table = nd.default_table()
    ev = nd.simulate_evidence(table, {"A2", "B1"}, 0.0, 0)
    post = nd.posterior(table, ev)
    names = {name for name, _ in post.top(2)}
    assert names == {"A2", "B1"}
    (n1, p1), (n2, p2) = post.top(2)
    assert p1 < 3 * p2  # comparable to each other
    assert post.is_ambiguous(ratio=3.0)


def test_simulate_evidence_is_deterministic_per_seed():
    table = nd.default_table()
    e1 = nd.simulate_evidence(table, {"A2"}, 0.2, 42)
    e2 = nd.simulate_evidence(table, {"A2"}, 0.2, 42)
    e3 = nd.simulate_evidence(table, {"A2"}, 0.2, 43)
    assert e1 == e2
    assert e1 != e3 or e1.strengths != e3.strengths


def test_unknown_agent_rejected():
    with pytest.raises(ValueError, match="unknown agents"):
        nd.simulate_evidence(nd.default_table(), {"Zika"}, 0.0, 0)


def test_noiseless_argmax_recovers_each_specific_agent():
    table = nd.default_table()
    for agent in ("A1", "A2", "A3", "B1", "B2"):
        ev = nd.simulate_evidence(table, {agent}, 0.0, 0)
        assert nd.posterior(table, ev).argmax() == agent


def test_new_agent_stable_over_seeds():
    table = nd.default_table()
    wins = 0
    for seed in range(100):
        ev = nd.simulate_evidence(table, {"New"}, 0.05, seed)
        wins += nd.posterior(table, ev).argmax() == "New"
    assert wins >= 95


def test_posterior_sums_to_one_and_uninformative_row_is_ignored():
    rng = np.random.default_rng(0)
    for _ in range(25):
        n_mod, n_ag = rng.integers(1, 5), rng.integers(2, 6)
        probs = rng.uniform(0.05, 0.95, size=(n_mod, n_ag))
        table = nd.ResponseTable(
            tuple(f"m{i}" for i in range(n_mod)),
            tuple(f"a{j}" for j in range(n_ag)),
            probs,
        )
        outcomes = tuple(bool(b) for b in rng.integers(0, 2, n_mod))
        post = nd.posterior(table, nd.Evidence(outcomes))
        assert post.probs.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(post.probs >= 0)

        # appending a row with identical entries across agents changes nothing
        c = float(rng.uniform(0.1, 0.9))
        bigger = nd.ResponseTable(
            table.modifiers + ("uninformative",),
            table.agents,
            np.vstack([probs, np.full(n_ag, c)]),
        )
        for extra in (True, False):
            post2 = nd.posterior(bigger, nd.Evidence(outcomes + (extra,)))
            np.testing.assert_allclose(post2.probs, post.probs, atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(
    st.integers(0, 2**32 - 1),
    st.floats(0.0, 0.3),
)
def test_posterior_properties_on_simulated_evidence(seed, noise):
    table = nd.default_table()
    ev = nd.simulate_evidence(table, {"A2"}, noise, seed)
    post = nd.posterior(table, ev)
    assert post.probs.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(post.probs >= 0)
    # scaling the prior by a constant (pre-normalization) leaves it unchanged
    uniform = np.full(8, 1 / 8)
    np.testing.assert_allclose(
        nd.posterior(table, ev, uniform).probs, post.probs, atol=1e-12
    )


def test_soft_evidence_mode():
    table = nd.ResponseTable(("m",), ("X", "Y"), np.array([[0.9, 0.1]]))
    ev = nd.Evidence((True,), strengths=(0.5,))
    post = nd.posterior(table, ev, use_strengths=True)
    # strength 0.5 is uninformative: posterior stays uniform
    np.testing.assert_allclose(post.probs, [0.5, 0.5], atol=1e-9)


def test_evidence_validation():
    table = nd.default_table()
    with pytest.raises(ValueError, match="missing outcomes"):
        nd.Evidence.from_dict(table, {"Anti-A1-1": True})
    with pytest.raises(ValueError):
        nd.Evidence((True,), strengths=(0.5, 0.5))
    with pytest.raises(ValueError):
        nd.Evidence((True,), strengths=(1.5,))
    with pytest.raises(ValueError, match="one outcome per"):
        nd.posterior(table, nd.Evidence((True,)))
    with pytest.raises(ValueError, match="probability vector"):
        nd.posterior(table, nd.Evidence((True,) * 7), prior=np.full(8, 0.5))


def test_table_validation():
    with pytest.raises(ValueError):
        nd.ResponseTable((), ("X",), np.zeros((0, 1)))
    with pytest.raises(ValueError):
        nd.ResponseTable(("m",), ("X",), np.array([[1.5]]))
    with pytest.raises(ValueError):
        nd.ResponseTable(("m",), ("X", "Y"), np.array([[0.5]]))


def test_collapse_replicates_majority_vote():
    outcomes = nd.collapse_replicates(
        ["CT", "CT", "CT", "PSA", "PSA"], [True, False, True, False, False]
    )
    assert outcomes == {"CT": True, "PSA": False}
    # ties round toward detection
    assert nd.collapse_replicates(["CT", "CT"], [True, False]) == {"CT": True}


def test_estimator_classifier_api():
    from sklearn.base import clone

    clf = nd.ArrayNaiveBayes()
    assert clone(clf).get_params() == clf.get_params()
    clf.fit()
    table = clf.table_
    x = np.array(
        [
            nd.simulate_evidence(table, {"A1"}, 0.0, 0).outcomes,
            nd.simulate_evidence(table, {"B2"}, 0.0, 0).outcomes,
        ],
        dtype=int,
    )
    proba = clf.predict_proba(x)
    assert proba.shape == (2, 8)
    np.testing.assert_allclose(proba.sum(axis=1), 1.0, atol=1e-12)
    assert list(clf.predict(x)) == ["A1", "B2"]
