import random

import pytest
from hypothesis import given, strategies as st

from semsens.backend.mocks import TableClassifier, scripted_distribution
from semsens.core import Label, NLIRecord, Prediction, opposite_label
from semsens.metrics import (
    FlipType,
    FoolingRates,
    MissingOriginalError,
    evaluate_variations,
    flip_type,
    fooling_rates,
    weighted_average,
)
from semsens.variation import VariationCandidate, VariationSet

from oracles import oracle_rates, random_instance, synth_pairs


# ---------------------------------------------------------------------------
# flip_type
# ---------------------------------------------------------------------------


class TestFlipType:
    @pytest.mark.parametrize(
        "original,varied,expected",
        [
            (Label.ENTAILMENT, Label.CONTRADICTION, FlipType.STRICT),
            (Label.CONTRADICTION, Label.ENTAILMENT, FlipType.STRICT),
            (Label.ENTAILMENT, Label.NEUTRAL, FlipType.RELAXED),
            (Label.CONTRADICTION, Label.NEUTRAL, FlipType.RELAXED),
            (Label.NEUTRAL, Label.CONTRADICTION, FlipType.STRICT),
            (Label.NEUTRAL, Label.ENTAILMENT, FlipType.STRICT),
            (Label.ENTAILMENT, Label.ENTAILMENT, FlipType.NONE),
            (Label.NEUTRAL, Label.NEUTRAL, FlipType.NONE),
        ],
    )
    def test_table(self, original, varied, expected):
        assert flip_type(original, varied) is expected

    def test_none_iff_equal(self):
        for original in Label:
            for varied in Label:
                result = flip_type(original, varied)
                assert (result is FlipType.NONE) == (original is varied)

    def test_strict_matches_opposite_definition(self):
        for original in (Label.ENTAILMENT, Label.CONTRADICTION):
            for varied in Label:
                expected = varied is opposite_label(original)
                assert (flip_type(original, varied) is FlipType.STRICT) == expected


# ---------------------------------------------------------------------------
# fooling_rates
# ---------------------------------------------------------------------------


class TestFoolingRates:
    def test_worked_example(self):
        # Four records: strict / strict-via-neutral / relaxed / none.
        records = [
            (Label.ENTAILMENT, [Label.CONTRADICTION]),
            (Label.NEUTRAL, [Label.ENTAILMENT]),
            (Label.ENTAILMENT, [Label.NEUTRAL]),
            (Label.CONTRADICTION, [Label.CONTRADICTION]),
        ]
        rates = fooling_rates(synth_pairs(records))
        assert rates.relaxed == pytest.approx(0.75)
        assert rates.strict == pytest.approx(0.50)
        assert rates.n_evaluated == 4

    def test_all_none(self):
        records = [(Label.ENTAILMENT, [Label.ENTAILMENT])] * 3
        rates = fooling_rates(synth_pairs(records))
        assert rates.relaxed == 0.0 and rates.strict == 0.0

    def test_upper_bound_attained(self):
        records = [(Label.ENTAILMENT, [Label.CONTRADICTION])] * 3
        rates = fooling_rates(synth_pairs(records))
        assert rates.relaxed == 1.0 and rates.strict == 1.0

    def test_empty_input_undefined_not_zero(self):
        rates = fooling_rates([], excluded=2)
        assert rates.n_evaluated == 0
        assert rates.strict is None and rates.relaxed is None
        assert rates.excluded == 2

    def test_matches_oracle_on_randomized_instances(self):
        rng = random.Random(401)
        for _ in range(50):
            records = random_instance(rng)
            rates = fooling_rates(synth_pairs(records))
            relaxed, strict, per_class = oracle_rates(records)
            assert rates.relaxed == relaxed
            assert rates.strict == strict
            for label, (count, s, r) in per_class.items():
                assert rates.per_class[label].n_records == count
                assert rates.per_class[label].strict == s
                assert rates.per_class[label].relaxed == r

    def test_invariant_to_pair_order(self):
        rng = random.Random(77)
        records = random_instance(rng)
        pairs = synth_pairs(records)
        shuffled = pairs[:]
        rng.shuffle(shuffled)
        a, b = fooling_rates(pairs), fooling_rates(shuffled)
        assert (a.strict, a.relaxed, a.n_evaluated) == (b.strict, b.relaxed, b.n_evaluated)
        assert a.per_class == b.per_class

    @given(st.data())
    def test_ordering_invariant_property(self, data):
        labels = st.sampled_from(list(Label))
        records = data.draw(
            st.lists(st.tuples(labels, st.lists(labels, min_size=1, max_size=5)), min_size=1, max_size=20)
        )
        rates = fooling_rates(synth_pairs(records))
        assert 0.0 <= rates.strict <= rates.relaxed <= 1.0
        neutral = rates.per_class.get(Label.NEUTRAL)
        if neutral is not None:
            assert neutral.strict == neutral.relaxed

    def test_rate_ordering_enforced_at_construction(self):
        with pytest.raises(ValueError):
            FoolingRates(n_evaluated=4, strict=0.5, relaxed=0.25, per_class={})


class TestWeightedAverage:
    def test_single_dataset_identity(self):
        rates = fooling_rates(synth_pairs([(Label.ENTAILMENT, [Label.CONTRADICTION])]))
        assert weighted_average([rates]) == (rates.strict, rates.relaxed)

    def test_hand_computed_two_datasets(self):
        a = FoolingRates(100, 0.1, 0.2, per_class={})
        b = FoolingRates(300, 0.3, 0.4, per_class={})
        strict, relaxed = weighted_average([a, b])
        assert relaxed == pytest.approx(0.35)
        assert strict == pytest.approx(0.25)

    def test_zero_weight_dataset_ignored(self):
        a = FoolingRates(100, 0.1, 0.2, per_class={})
        empty = FoolingRates(0, None, None, per_class={})
        assert weighted_average([a, empty]) == (0.1, 0.2)

    def test_all_empty_is_an_error(self):
        with pytest.raises(ValueError):
            weighted_average([FoolingRates(0, None, None, per_class={})])


# ---------------------------------------------------------------------------
# evaluate_variations
# ---------------------------------------------------------------------------


def _accepted_candidate(record_id, index, text):
    entail = scripted_distribution(Label.ENTAILMENT, f"ev:{record_id}:{index}")
    return VariationCandidate(
        record_id=record_id,
        index=index,
        text=text,
        forward=entail,
        backward=entail,
        accepted=True,
        generation_round=1,
    )


class TestEvaluateVariations:
    def _setup(self):
        record = NLIRecord("r1", "ds", "The premise.", "The hypothesis.", Label.ENTAILMENT)
        original = Prediction.from_distribution(
            "r1", scripted_distribution(Label.ENTAILMENT, "orig")
        )
        candidates = tuple(
            _accepted_candidate("r1", j, f"The hypothesis, restated {j}.") for j in (1, 2, 3)
        )
        vset = VariationSet("r1", "ds", candidates, shortfall=True, rounds_used=1)
        table = {
            ("The premise.", c.text): scripted_distribution(
                Label.CONTRADICTION if c.index == 2 else Label.ENTAILMENT, f"e:{c.index}"
            )
            for c in candidates
        }
        return record, original, vset, TableClassifier(table)

    def test_one_pair_per_accepted_candidate(self):
        record, original, vset, classifier = self._setup()
        pairs = evaluate_variations([vset], {"r1": (record, original)}, classifier)
        assert len(pairs) == 3
        assert [p.flip for p in pairs] == [FlipType.NONE, FlipType.STRICT, FlipType.NONE]

    def test_excluded_set_contributes_nothing(self):
        record, original, _, classifier = self._setup()
        empty = VariationSet("r1", "ds", (), shortfall=True, rounds_used=2)
        assert evaluate_variations([empty], {"r1": (record, original)}, classifier) == []

    def test_missing_original_rejected(self):
        _, _, vset, classifier = self._setup()
        with pytest.raises(MissingOriginalError):
            evaluate_variations([vset], {}, classifier)
