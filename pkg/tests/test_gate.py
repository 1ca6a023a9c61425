import pytest
from hypothesis import given
from hypothesis import strategies as st

from audiocascade.domain import GateDecision, Query
from audiocascade.gate import DEFAULT_HEDGES, GateConfig, content_tokens, escalation_rate, evaluate, matches_candidate

ORDER_Q = Query("What does the speaker order from the barista?", ("coffee", "tea", "juice"))
CLEAR = "The speaker clearly says hello to the barista and orders coffee"


def decisions(n_true, n):
    return [GateDecision(i < n_true, frozenset({"hedging"}) if i < n_true else frozenset()) for i in range(n)]


class TestEvaluate:
    def test_clean_rationale_stays_fast(self):
        d = evaluate(CLEAR, ORDER_Q, "coffee")
        assert not d.escalate and d.triggered_cues == frozenset()

    def test_hedging(self):
        d = evaluate("There is possibly a dog barking behind the speaker at the barista", ORDER_Q, "coffee")
        assert d.escalate and "hedging" in d.triggered_cues

    def test_hedge_in_answer_counts(self):
        assert "hedging" in evaluate(CLEAR, ORDER_Q, "maybe coffee").triggered_cues

    def test_hedge_phrase_needs_word_boundary(self):
        # "seems" is a hedge, "seemster" is not
        assert "hedging" not in evaluate(CLEAR + " seemster", ORDER_Q, "coffee").triggered_cues
        assert "hedging" in evaluate(CLEAR.replace("clearly", "probably, hard to tell,"), ORDER_Q, "coffee").triggered_cues

    def test_inconsistency(self):
        q = Query("Are the two voices the same person or different people?", ("Same", "Different"))
        d = evaluate("The two voices have distinct pitch and timbre across the whole exchange", q, "They sound friendly")
        assert d.escalate and "inconsistency" in d.triggered_cues

    def test_containment_either_direction(self):
        assert matches_candidate("The answer is Different", ("Same", "Different"))
        assert matches_candidate("diff", ("Same", "Different"))
        assert not matches_candidate("", ("Same", "Different"))

    def test_candidate_match_can_be_disabled(self):
        q = Query("Are the voices the same person?", ("Same", "Different"))
        d = evaluate("The voices share pitch and timbre so the same person speaks", q, "friendly",
                     GateConfig(require_candidate_match=False))
        assert "inconsistency" not in d.triggered_cues

    def test_short_rationale_is_missing_evidence(self):
        d = evaluate("It is coffee.", ORDER_Q, "coffee")
        assert d.triggered_cues == {"missing_evidence"}

    def test_empty_rationale(self):
        assert "missing_evidence" in evaluate("", ORDER_Q, "coffee").triggered_cues

    def test_no_shared_content_term(self):
        d = evaluate("Loud traffic noise continues under a long musical passage here", ORDER_Q, "coffee")
        assert "missing_evidence" in d.triggered_cues

    def test_content_tokens(self):
        assert content_tokens("What does the speaker order?") == {"speaker", "order"}

    def test_config_validation(self):
        with pytest.raises(ValueError):
            GateConfig(hedging_lexicon=frozenset({" "}))
        with pytest.raises(ValueError):
            GateConfig(min_rationale_tokens=0)

    @given(st.text(max_size=80), st.text(max_size=20), st.sampled_from(sorted(DEFAULT_HEDGES)))
    def test_hedging_monotone(self, s0, p0, phrase):
        before = evaluate(s0, ORDER_Q, p0)
        after = evaluate(s0 + " " + phrase, ORDER_Q, p0)
        assert after.escalate
        assert before.triggered_cues - {"missing_evidence"} <= after.triggered_cues

    @given(st.text(max_size=80), st.text(max_size=20))
    def test_pure(self, s0, p0):
        assert evaluate(s0, ORDER_Q, p0) == evaluate(s0, ORDER_Q, p0)


class TestEscalationRate:
    def test_reference_rate(self):
        assert f"{escalation_rate(decisions(618, 1000)):.4f}" == "0.6180"

    def test_hundred(self):
        assert f"{escalation_rate(decisions(62, 100)):.4f}" == "0.6200"

    def test_all_false(self):
        assert escalation_rate(decisions(0, 7)) == 0.0

    def test_empty(self):
        with pytest.raises(ValueError):
            escalation_rate([])
