"""Context assembly and prompt rendering tests, including the golden files."""

from pathlib import Path

import pytest

from stretchbot.affect import FusedEmotion
from stretchbot.context import (
    ContextError,
    ContextPackage,
    DetectedObject,
    NO_HISTORY,
    NO_TRANSCRIPT,
    ROUTINE_COMPLETE,
    STATUS_NOT_YET,
    STATUS_SUCCESS,
    Turn,
    assemble_context,
    describe_context,
    format_history,
    render_prompt,
)
from stretchbot.knowledge import EMPTY_KG_LINE
from stretchbot.routine import UnknownRoutinePositionError, default_routine_script

DATA_DIR = Path(__file__).parent / "data"

WATER = DetectedObject("WATER", "water bottle", (0.8, 0.4, 0.7))
GLASS = DetectedObject("GLASS", "glass", (0.85, 0.1, 0.7))

TIRED = FusedEmotion(label="tired", scores={"tired": 0.62, "neutral": 0.38})

KG_BLOCK = (
    "WaterBottle --affords--> DrinkWater\n"
    "WaterBottle --used_for--> Hydration\n"
    "WaterBottle --is_relevant_when--> Fatigue\n"
    "Fatigue --indicates--> LowEnergy\n"
    "Fatigue --motivates--> TakeBreak\n"
    "Fatigue --suggests--> DrinkWater"
)


def tired_package() -> ContextPackage:
    return assemble_context(
        objects=[WATER, GLASS],
        fused_emotion=TIRED,
        exercise_status=STATUS_NOT_YET,
        transcript="I'm a bit tired today",
        history=[
            Turn("user", "hello!"),
            Turn("coach", "Good morning! Ready for a gentle stretch?"),
            Turn("user", "I'm a bit tired today"),
        ],
        annotations=["user may be tired; water available"],
    )


def success_package() -> ContextPackage:
    return assemble_context(
        objects=[],
        fused_emotion=None,
        exercise_status=STATUS_SUCCESS,
        transcript="done!",
        history=[Turn("user", "done!")],
    )


class TestAssembleContext:
    def test_history_truncation_keeps_most_recent(self):
        turns = [Turn("user", f"turn {i}") for i in range(12)]
        package = assemble_context([], None, STATUS_NOT_YET, "turn 11", turns, history_cap=8)
        assert len(package.history) == 8
        assert package.history[0].text == "turn 4"
        assert package.history[-1].text == "turn 11"

    def test_invalid_status_rejected(self):
        with pytest.raises(ContextError):
            assemble_context([], None, "done", "", [])

    def test_status_lines(self):
        success = describe_context(success_package())
        assert "Exercise status: success" in success
        not_yet = describe_context(tired_package())
        assert "Exercise status: not yet" in not_yet

    def test_emotion_line_omitted_without_affect(self):
        description = describe_context(success_package())
        assert "User emotion" not in description

    def test_description_order_and_content(self):
        lines = describe_context(tired_package()).splitlines()
        assert lines == [
            "Detected objects: water bottle, glass",
            "User emotion: tired",
            "Exercise status: not yet",
            "User says: I'm a bit tired today",
            "Note: user may be tired; water available",
        ]

    def test_empty_transcript_placeholder(self):
        package = assemble_context([], None, STATUS_NOT_YET, "", [])
        assert f"User says: {NO_TRANSCRIPT}" in describe_context(package)

    def test_history_formatting(self):
        assert format_history([]) == NO_HISTORY
        text = format_history([Turn("user", "hi"), Turn("coach", "hello")])
        assert text == "User: hi\nCoach: hello"


class TestRenderPrompt:
    def test_markers_present(self):
        bundle = render_prompt(tired_package(), default_routine_script(), 0, KG_BLOCK)
        assert "NEXT_EXERCISE" in bundle.system_prompt
        assert "POINT_" in bundle.system_prompt
        assert "STOP_ROUTINE" in bundle.system_prompt

    def test_no_unexpanded_slots(self):
        bundle = render_prompt(tired_package(), default_routine_script(), 0, KG_BLOCK)
        assert "{current_exercise}" not in bundle.system_prompt
        assert "{formatted_kg}" not in bundle.system_prompt

    def test_rerender_is_byte_identical(self):
        script = default_routine_script()
        first = render_prompt(tired_package(), script, 0, KG_BLOCK)
        second = render_prompt(tired_package(), script, 0, KG_BLOCK)
        assert first.system_prompt == second.system_prompt

    def test_final_exercise_next_sentinel(self):
        bundle = render_prompt(success_package(), default_routine_script(), 2, EMPTY_KG_LINE)
        assert bundle.next_exercise == ROUTINE_COMPLETE
        assert f"Next exercise: {ROUTINE_COMPLETE}" in bundle.system_prompt

    def test_empty_kg_block_sentinel_line(self):
        bundle = render_prompt(success_package(), default_routine_script(), 2, EMPTY_KG_LINE)
        assert f"Relevant commonsense knowledge:\n{EMPTY_KG_LINE}" in bundle.system_prompt

    def test_unknown_position_errors(self):
        with pytest.raises(UnknownRoutinePositionError):
            render_prompt(tired_package(), default_routine_script(), 3, KG_BLOCK)
        with pytest.raises(UnknownRoutinePositionError):
            render_prompt(tired_package(), default_routine_script(), -1, KG_BLOCK)

    def test_golden_not_yet(self):
        bundle = render_prompt(tired_package(), default_routine_script(), 0, KG_BLOCK)
        golden = (DATA_DIR / "golden_prompt_not_yet.txt").read_text(encoding="utf-8")
        assert bundle.system_prompt == golden

    def test_golden_success_final_step(self):
        bundle = render_prompt(success_package(), default_routine_script(), 2, EMPTY_KG_LINE)
        golden = (DATA_DIR / "golden_prompt_success.txt").read_text(encoding="utf-8")
        assert bundle.system_prompt == golden
