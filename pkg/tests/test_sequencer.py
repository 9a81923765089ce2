import pytest

from dl4sim.engine import Dl4Params, HpSwitch, LpSwitch
from dl4sim.errors import DomainError, ScriptError, StepFileError
from dl4sim.mapping import MappingMode
from dl4sim.sequencer import (
    Sequencer,
    Step,
    StepList,
    apply_assignment,
    events_between,
    params_to_score,
    parse_step_list,
    parse_timed_script,
    serialize_step_list,
    serialize_timed_script,
)

BASIC = "step one: DS=256 DF=0.6 RG=0.5 MX=0.5\n"


class TestParseStepList:
    def test_minimal(self):
        steps = parse_step_list(BASIC)
        assert len(steps.steps) == 1
        assert steps.steps[0].label == "one"
        assert steps.steps[0].assignments == {"DS": 256.0, "DF": 0.6, "RG": 0.5, "MX": 0.5}
        assert not steps.discard_lfo and not steps.comb_df_override

    def test_comments_and_blank_lines(self):
        text = "# header\n\nstep a: DS=1 DF=0.5 RG=0 MX=1  # trailing\n"
        steps = parse_step_list(text)
        assert steps.steps[0].assignments["DS"] == 1.0

    def test_policies(self):
        steps = parse_step_list("policy discard_lfo\npolicy comb_df_override\n" + BASIC)
        assert steps.discard_lfo and steps.comb_df_override

    def test_comb_tag(self):
        steps = parse_step_list("step c,comb: DS=32 DF=1.0 RG=1 MX=1\n")
        assert steps.steps[0].comb

    @pytest.mark.parametrize(
        "text,fragment",
        [
            ("step a: DS=256 DF=1.5 RG=0 MX=1\n", "line 1"),
            ("wat\n", "line 1"),
            (BASIC + "step b: XX=1\n", "line 2"),
            (BASIC + "step b: DF=0.5 DF=0.6\n", "duplicate"),
            (BASIC + "step b: DF=abc\n", "bad number"),
            (BASIC + "step b DF=0.5\n", "missing ':'"),
            (BASIC + "step : DF=0.5\n", "label is empty"),
            (BASIC + "step b,weird: DF=0.5\n", "unknown step tag"),
            ("policy nonsense\n" + BASIC, "unknown policy"),
            ("", "no steps"),
            ("step a: DS=256 DF=0.6\n", "RG"),
            ("step a: DS=7 DF=0.6 RG=0 MX=1\n", "power of two"),
        ],
    )
    def test_errors_carry_context(self, text, fragment):
        with pytest.raises(StepFileError, match=fragment):
            parse_step_list(text)

    def test_round_trip_is_a_fixed_point(self):
        text = (
            "policy discard_lfo\n"
            "step intro: DS=256 DF=0.6 RG=0.4 MX=0.5 SHAPE=0.25 HP=150\n"
            "step comb,comb: DS=32 DF=1.0 RG=1.0 MX=1.0\n"
            "step out: RG=0.1 LP=3300 OUTPHASE=1\n"
        )
        once = parse_step_list(text)
        again = parse_step_list(serialize_step_list(once))
        assert again == once
        assert serialize_step_list(again) == serialize_step_list(once)


class TestSequencer:
    def test_first_step_defaults(self):
        seq = Sequencer(parse_step_list(BASIC))
        p = seq.params
        assert (p.base, p.df, p.feedback, p.mix) == (8, 0.6, 0.5, 0.5)
        assert p.lfo_speed == 0.0 and p.lfo_width == 0.0 and p.lfo_shape == 0.0
        assert p.hp_switch is HpSwitch.HZ_16 and p.lp_switch is LpSwitch.HZ_15000
        assert not p.feedback_phase_invert and not p.output_phase_invert

    def test_carry_over_merge(self):
        steps = parse_step_list(BASIC + "step two: DF=0.8\nstep three: RG=0.9\n")
        seq = Sequencer(steps)
        assert seq.advance()
        assert seq.params.df == 0.8 and seq.params.feedback == 0.5
        assert seq.advance()
        assert seq.params.df == 0.8 and seq.params.feedback == 0.9
        assert seq.label == "three"

    def test_advance_stops_at_end(self):
        seq = Sequencer(parse_step_list(BASIC))
        assert seq.at_end
        before = seq.params
        assert not seq.advance()
        assert seq.params == before and seq.index == 0

    def test_step_count_and_labels(self):
        seq = Sequencer(parse_step_list(BASIC + "step two: DF=0.3\n"))
        assert seq.step_count == 2
        assert seq.label == "one"

    def test_mapping_mode_threaded_through(self):
        seq = Sequencer(parse_step_list(BASIC), mapping=MappingMode.RAW)
        assert seq.params.mapping is MappingMode.RAW

    def test_discard_lfo_zeroes_at_every_step(self):
        text = (
            "policy discard_lfo\n"
            "step a: DS=256 DF=0.6 RG=0.5 MX=0.5 WD=0.8 SP=0.5\n"
            "step b: WD=0.9\n"
        )
        seq = Sequencer(parse_step_list(text))
        assert seq.params.lfo_width == 0.0 and seq.params.lfo_speed == 0.0
        seq.advance()
        assert seq.params.lfo_width == 0.0 and seq.params.lfo_speed == 0.0

    def test_discard_lfo_leaves_shape_alone(self):
        text = "policy discard_lfo\nstep a: DS=256 DF=0.6 RG=0.5 MX=0.5 SHAPE=0.7\n"
        assert Sequencer(parse_step_list(text)).params.lfo_shape == 0.7

    def test_comb_override_rewrites_written_df(self):
        text = (
            "policy comb_df_override\n"
            + BASIC
            + "step c,comb: DS=32 DF=1.0 RG=1.0\nstep d: MX=0.2\n"
        )
        seq = Sequencer(parse_step_list(text))
        seq.advance()
        assert seq.params.df == 0.75  # written 1.0, measured 0.75
        seq.advance()
        assert seq.params.df == 0.75  # the corrected value carries

    def test_comb_override_needs_the_tag(self):
        text = "policy comb_df_override\n" + BASIC + "step b: DF=1.0\n"
        seq = Sequencer(parse_step_list(text))
        seq.advance()
        assert seq.params.df == 1.0

    def test_comb_override_needs_the_policy(self):
        text = BASIC + "step c,comb: DS=32 DF=1.0\n"
        seq = Sequencer(parse_step_list(text))
        seq.advance()
        assert seq.params.df == 1.0

    def test_comb_override_leaves_other_df_values(self):
        text = "policy comb_df_override\n" + BASIC + "step c,comb: DF=0.9\n"
        seq = Sequencer(parse_step_list(text))
        seq.advance()
        assert seq.params.df == 0.9

    def test_set_direct_bypasses_policies(self):
        text = "policy discard_lfo\n" + BASIC
        seq = Sequencer(parse_step_list(text))
        seq.set_direct("WD", 0.8)
        assert seq.params.lfo_width == 0.8

    def test_set_direct_validates(self):
        seq = Sequencer(parse_step_list(BASIC))
        with pytest.raises(DomainError):
            seq.set_direct("DF", 1.5)
        with pytest.raises(DomainError):
            seq.set_direct("HP", 99)

    def test_fold_determinism(self):
        text = BASIC + "step b: DF=0.8 HP=150\nstep c: FBPHASE=1\n"
        ops = [("step", None, None), ("set", "MX", 0.9), ("step", None, None)]

        def fold():
            seq = Sequencer(parse_step_list(text))
            for kind, key, value in ops:
                if kind == "step":
                    seq.advance()
                else:
                    seq.set_direct(key, value)
            return seq.params

        assert fold() == fold()

    def test_empty_step_list_rejected(self):
        with pytest.raises(DomainError):
            Sequencer(StepList(steps=[]))


class TestScoreVocabulary:
    def test_apply_assignment_switches(self):
        p = Dl4Params()
        p = apply_assignment(p, "HP", 150.0)
        p = apply_assignment(p, "LP", 3300.0)
        p = apply_assignment(p, "FBPHASE", 1.0)
        p = apply_assignment(p, "OUTPHASE", 1.0)
        assert p.hp_switch is HpSwitch.HZ_150
        assert p.lp_switch is LpSwitch.HZ_3300
        assert p.feedback_phase_invert and p.output_phase_invert

    def test_params_to_score_round_trip(self):
        p = Dl4Params(base=5, df=0.75, feedback=1.0, mix=0.8, lfo_shape=0.2)
        score = params_to_score(p)
        q = Dl4Params()
        for key, value in score.items():
            q = apply_assignment(q, key, float(value))
        assert q == p

    def test_score_dict_uses_plain_numbers(self):
        score = params_to_score(Dl4Params())
        assert score["DS"] == 256 and score["HP"] == 16 and score["FBPHASE"] == 0


class TestTimedScript:
    def test_parse_forms(self):
        script = parse_timed_script("# автоmation\n0 step\n100.5 set DF 0.8\n100.5 step\n")
        kinds = [(e.time_ms, e.kind, e.key, e.value) for e in script.events]
        assert kinds == [
            (0.0, "step", None, None),
            (100.5, "set", "DF", 0.8),
            (100.5, "step", None, None),
        ]

    @pytest.mark.parametrize(
        "text,fragment",
        [
            ("-5 step\n", "negative"),
            ("100 step\n50 step\n", "decreas"),
            ("10 nudge\n", "step"),
            ("10 set XX 1\n", "unknown parameter"),
            ("10 set DF\n", "set"),
            ("abc step\n", "timestamp"),
            ("10 set DF 2.0\n", "DF"),
        ],
    )
    def test_errors(self, text, fragment):
        with pytest.raises(ScriptError, match=fragment):
            parse_timed_script(text)

    def test_serialize_round_trip(self):
        script = parse_timed_script("0 step\n99.99 set MX 1\n200 set HP 150\n")
        assert parse_timed_script(serialize_timed_script(script)) == script

    def test_events_between_half_open(self):
        script = parse_timed_script("100 set MX 1\n")
        # 100 ms at 48 kHz is sample position 4800
        assert len(events_between(script, 4800, 4864, 48000)) == 1
        assert len(events_between(script, 4736, 4800, 48000)) == 0
        assert len(events_between(script, 4801, 5000, 48000)) == 0

    def test_events_between_orders_by_time(self):
        script = parse_timed_script("1 set DF 0.5\n2 step\n3 set MX 0\n")
        events = events_between(script, 0, 10_000, 48000)
        assert [e.time_ms for e in events] == [1.0, 2.0, 3.0]
