"""Routine FSM tests: command dispatch, pose events, pausing, adaptation cues."""

import pytest

from stretchbot import pose
from stretchbot.affect import FusedEmotion
from stretchbot.context import DetectedObject, STATUS_NOT_YET, STATUS_SUCCESS, assemble_context
from stretchbot.reasoner import ActionCommand
from stretchbot.routine import (
    PHASE_AWAITING_CONFIRMATION,
    PHASE_GREETING,
    PHASE_IN_EXERCISE,
    PHASE_PAUSED,
    PHASE_STOPPED,
    EVENT_CORRECTIVE_FEEDBACK,
    EVENT_EXERCISE_SUCCESS,
    EVENT_POINT_FINISHED,
    EVENT_POINT_STARTED,
    EVENT_ROUTINE_STOPPED,
    EVENT_SPOKE,
    RoutineError,
    SessionState,
    UnknownRoutinePositionError,
    adaptation_hooks,
    apply_command,
    default_routine_script,
    load_routine_script,
    on_pose_event,
    resume_if_paused,
)

POSITIONS = {"WATER": (0.8, 0.4, 0.7), "GLASS": (0.85, 0.1, 0.7)}
WATER = DetectedObject("WATER", "water bottle", POSITIONS["WATER"])

SAY = ActionCommand("say", "Keep going!")
NEXT = ActionCommand("next_exercise", "On to the next one!")
STOP = ActionCommand("stop_routine", "All done, great work!")
POINT_WATER = ActionCommand("point", "Take a sip.", target="WATER")


def fresh_state() -> SessionState:
    return SessionState(script=default_routine_script())


def in_exercise(index: int) -> SessionState:
    state, _ = apply_command(fresh_state(), NEXT, POSITIONS)
    for _ in range(index):
        state, _ = on_pose_event(state, pose.SUCCESS)
        state, _ = apply_command(state, NEXT, POSITIONS)
    return state


class TestScript:
    def test_default_script_matches_plan(self):
        script = default_routine_script()
        assert [s.name for s in script.steps] == ["ArmRaise", "ToeTouch", "LeanLeftRight"]
        assert [s.rule for s in script.steps] == ["arms-overhead", "toe-touch", "lateral-lean"]
        assert all(s.hold_target == 5.0 for s in script.steps)

    def test_position_labels(self):
        script = default_routine_script()
        assert script.position_labels(0) == ("Stretch your arms above your head", "Touch your toes")
        assert script.position_labels(2) == ("Lean left and right", None)
        with pytest.raises(UnknownRoutinePositionError):
            script.position_labels(3)

    def test_load_rejects_unknown_rule(self):
        with pytest.raises(RoutineError):
            load_routine_script(
                [{"name": "X", "rule": "headstand", "display": "x", "hold_target": 5}]
            )


class TestApplyCommand:
    def test_greeting_next_starts_first_exercise(self):
        state, events = apply_command(fresh_state(), NEXT, POSITIONS)
        assert state.phase == PHASE_IN_EXERCISE
        assert state.index == 0
        assert isinstance(state.hold, pose.HoldState)
        assert [e.kind for e in events] == [EVENT_SPOKE]

    def test_advance_resets_timers(self):
        state = in_exercise(0)
        state, _ = on_pose_event(state, pose.SUCCESS)
        advanced, _ = apply_command(state, NEXT, POSITIONS)
        assert advanced.index == 1
        assert advanced.exercise_status == STATUS_NOT_YET
        assert advanced.hold == pose.HoldState()

    def test_next_at_final_step_converts_to_stop(self):
        state = in_exercise(2)
        assert state.index == 2
        stopped, events = apply_command(state, NEXT, POSITIONS)
        assert stopped.phase == PHASE_STOPPED
        assert stopped.stopped_reason == "routine complete"
        assert [e.kind for e in events] == [EVENT_SPOKE, EVENT_ROUTINE_STOPPED]

    def test_point_event_order(self):
        state = in_exercise(0)
        new_state, events = apply_command(state, POINT_WATER, POSITIONS)
        assert [e.kind for e in events] == [EVENT_POINT_STARTED, EVENT_POINT_FINISHED, EVENT_SPOKE]
        assert events[0].data["object"] == "WATER"
        assert events[0].data["position"] == list(POSITIONS["WATER"])
        assert new_state.index == state.index

    def test_point_unknown_object_raises(self):
        with pytest.raises(RoutineError):
            apply_command(in_exercise(0), ActionCommand("point", "x", target="PIANO"), POSITIONS)

    def test_say_leaves_position_unchanged(self):
        state = in_exercise(1)
        new_state, events = apply_command(state, SAY, POSITIONS)
        assert new_state.index == state.index
        assert new_state.phase == state.phase
        assert [e.kind for e in events] == [EVENT_SPOKE]

    def test_stop_routine(self):
        state, events = apply_command(in_exercise(1), STOP, POSITIONS)
        assert state.phase == PHASE_STOPPED
        assert [e.kind for e in events] == [EVENT_SPOKE, EVENT_ROUTINE_STOPPED]

    def test_stopped_is_absorbing(self):
        state, _ = apply_command(fresh_state(), STOP, POSITIONS)
        with pytest.raises(RoutineError):
            apply_command(state, SAY, POSITIONS)

    def test_pause_cue_pauses(self):
        cue = ActionCommand("say", "Let's take a break for a moment.")
        state, _ = apply_command(in_exercise(0), cue, POSITIONS)
        assert state.phase == PHASE_PAUSED
        assert state.paused_from == PHASE_IN_EXERCISE

    def test_utterance_resumes(self):
        cue = ActionCommand("say", "Let's take a break.")
        state, _ = apply_command(in_exercise(0), cue, POSITIONS)
        resumed = resume_if_paused(state)
        assert resumed.phase == PHASE_IN_EXERCISE
        assert resumed.paused_from is None


class TestOnPoseEvent:
    def test_success_awaits_confirmation(self):
        state = in_exercise(0)
        new_state, events = on_pose_event(state, pose.SUCCESS)
        assert new_state.phase == PHASE_AWAITING_CONFIRMATION
        assert new_state.exercise_status == STATUS_SUCCESS
        assert [e.kind for e in events] == [EVENT_EXERCISE_SUCCESS]
        assert events[0].data["exercise"] == "ArmRaise"

    def test_corrective_speaks_hint_without_phase_change(self):
        state = in_exercise(1)
        new_state, events = on_pose_event(state, pose.CORRECTIVE)
        assert new_state.phase == PHASE_IN_EXERCISE
        assert new_state.exercise_status == STATUS_NOT_YET
        assert [e.kind for e in events] == [EVENT_CORRECTIVE_FEEDBACK, EVENT_SPOKE]
        assert events[1].data["corrective"] is True

    def test_events_outside_exercise_ignored(self):
        state = fresh_state()
        same, events = on_pose_event(state, pose.SUCCESS)
        assert same == state
        assert events == []

    def test_success_while_paused_ignored(self):
        cue = ActionCommand("say", "Let's take a break.")
        paused, _ = apply_command(in_exercise(0), cue, POSITIONS)
        same, events = on_pose_event(paused, pose.SUCCESS)
        assert same == paused
        assert events == []


def package(transcript="", emotion=None, objects=()):
    return assemble_context(list(objects), emotion, STATUS_NOT_YET, transcript, [])


class TestAdaptationHooks:
    def test_tired_with_water(self):
        annotations = adaptation_hooks(
            fresh_state(),
            package(emotion=FusedEmotion("tired", {"tired": 0.8}), objects=[WATER]),
        )
        assert "user may be tired; water available" in annotations.notes
        assert "Fatigue" in annotations.mentions

    def test_neutral_no_objects_empty(self):
        annotations = adaptation_hooks(
            fresh_state(), package(emotion=FusedEmotion("neutral", {"neutral": 1.0}))
        )
        assert annotations.notes == ()
        assert annotations.mentions == ()

    def test_discomfort_adds_pain_mention(self):
        annotations = adaptation_hooks(fresh_state(), package(transcript="my back hurts"))
        assert "possible discomfort reported" in annotations.notes
        assert "Pain" in annotations.mentions

    def test_fatigue_keyword_adds_mention(self):
        annotations = adaptation_hooks(fresh_state(), package(transcript="I'm so tired"))
        assert "Fatigue" in annotations.mentions

    def test_annotations_never_execute(self):
        # Hooks return declarative cues only; state is untouched.
        state = fresh_state()
        adaptation_hooks(state, package(transcript="stop, my knee hurts!"))
        assert state.phase == PHASE_GREETING
