import pytest

from semsens.core import (
    Label,
    LabelDistribution,
    NLIRecord,
    Prediction,
    argmax_label,
    normalize_whitespace,
    opposite_label,
)


class TestLabel:
    def test_fixed_ordering(self):
        assert Label.ENTAILMENT < Label.NEUTRAL < Label.CONTRADICTION

    def test_exactly_three_values(self):
        assert len(Label) == 3

    def test_string_round_trip(self):
        for label in Label:
            assert Label.from_name(str(label)) is label

    def test_from_name_rejects_unknown(self):
        with pytest.raises(ValueError):
            Label.from_name("maybe")


class TestOppositeLabel:
    def test_entailment_contradiction_swap(self):
        assert opposite_label(Label.ENTAILMENT) is Label.CONTRADICTION
        assert opposite_label(Label.CONTRADICTION) is Label.ENTAILMENT

    def test_neutral_has_no_opposite(self):
        assert opposite_label(Label.NEUTRAL) is None

    def test_involution_on_polar_labels(self):
        for label in (Label.ENTAILMENT, Label.CONTRADICTION):
            assert opposite_label(opposite_label(label)) is label


class TestLabelDistribution:
    def test_argmax_unique_maximum(self):
        assert argmax_label(LabelDistribution(0.7, 0.2, 0.1)) is Label.ENTAILMENT
        assert argmax_label(LabelDistribution(0.1, 0.2, 0.7)) is Label.CONTRADICTION

    def test_argmax_tie_break_uses_fixed_ordering(self):
        assert argmax_label(LabelDistribution(0.4, 0.4, 0.2)) is Label.ENTAILMENT
        assert argmax_label(LabelDistribution(0.2, 0.4, 0.4)) is Label.NEUTRAL

    def test_argmax_scale_free_after_renormalization(self):
        base = (0.5, 0.3, 0.2)
        for scale in (1e-3, 7.0, 1e4):
            scaled = [component * scale for component in base]
            total = sum(scaled)
            renormalized = LabelDistribution(*(component / total for component in scaled))
            assert renormalized.argmax() is LabelDistribution(*base).argmax()

    @pytest.mark.parametrize(
        "components",
        [
            (0.2, 0.2, 0.2),        # sum far below one
            (0.5, 0.5, 0.5),        # sum above one
            (-0.1, 0.6, 0.5),       # negative component
            (float("nan"), 0.5, 0.5),
        ],
    )
    def test_malformed_rejected_at_construction(self, components):
        with pytest.raises(ValueError):
            LabelDistribution(*components)

    def test_sum_tolerance_accepts_float_dust(self):
        LabelDistribution(0.1, 0.2, 0.7000000001)

    def test_payload_round_trip(self):
        dist = LabelDistribution(0.6, 0.25, 0.15)
        assert LabelDistribution.from_payload(dist.to_payload()) == dist


class TestNLIRecord:
    def test_empty_hypothesis_rejected(self):
        with pytest.raises(ValueError):
            NLIRecord("r1", "ds", "a premise", "   \t  ", Label.ENTAILMENT)

    def test_surface_text_preserved(self):
        record = NLIRecord("r1", "ds", "A  premise.", "The  hypothesis.", Label.NEUTRAL)
        assert record.premise == "A  premise."

    def test_payload_round_trip(self):
        record = NLIRecord("r1", "ds", "A premise.", "A hypothesis.", Label.CONTRADICTION)
        assert NLIRecord.from_payload(record.to_payload()) == record


class TestPrediction:
    def test_predicted_must_match_argmax(self):
        dist = LabelDistribution(0.1, 0.8, 0.1)
        with pytest.raises(ValueError):
            Prediction("r1", dist, Label.ENTAILMENT)

    def test_from_distribution_sets_argmax(self):
        prediction = Prediction.from_distribution("r1", LabelDistribution(0.1, 0.8, 0.1))
        assert prediction.predicted is Label.NEUTRAL


def test_normalize_whitespace_collapses_runs():
    assert normalize_whitespace("  a \t b\n\nc  ") == "a b c"
