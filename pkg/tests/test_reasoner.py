"""Reply parsing, command extraction, verifier stages, and mock client tests."""

import random
import string

import pytest
from hypothesis import given, strategies as st

from stretchbot.context import DetectedObject, STATUS_NOT_YET, STATUS_SUCCESS, assemble_context
from stretchbot.reasoner import (
    ActionCommand,
    EmptyCompletionError,
    KIND_NEXT_EXERCISE,
    KIND_POINT,
    KIND_SAY,
    KIND_STOP_ROUTINE,
    MalformedCommandError,
    MockReasonerClient,
    ReasonerNetworkError,
    ReasonerTimeoutError,
    ReplyParseError,
    ScriptedReply,
    extract_command,
    normalize_prefixes,
    parse_reply,
    request_decision,
    verify,
)

GLASS = DetectedObject("GLASS", "glass", (0.85, 0.1, 0.7))
WATER = DetectedObject("WATER", "water bottle", (0.8, 0.4, 0.7))


def make_context(status=STATUS_NOT_YET, transcript="", objects=(GLASS, WATER)):
    return assemble_context(list(objects), None, status, transcript, [])


class TestParseReply:
    def test_standard_format(self):
        raw = "Reasoning:\nuser is fine\n\nOutput: NEXT_EXERCISE: Great job! Let's touch your toes."
        reply = parse_reply(raw)
        assert reply.reasoning == "user is fine"
        assert reply.output == "NEXT_EXERCISE: Great job! Let's touch your toes."

    def test_missing_output_marker(self):
        with pytest.raises(ReplyParseError):
            parse_reply("All done, I think we should move on.")

    def test_last_output_wins(self):
        raw = "Output: first thought\nOutput: final answer"
        assert parse_reply(raw).output == "final answer"

    def test_repeated_reasoning_blocks_keep_last(self):
        raw = "Reasoning:\nfirst\nOutput: a\nReasoning:\nsecond\nOutput: b"
        reply = parse_reply(raw)
        assert reply.reasoning == "second"
        assert reply.output == "b"

    def test_whitespace_tolerated(self):
        reply = parse_reply("  Reasoning:\n  ok \n\n Output:   hello there  \n")
        assert reply.output == "hello there"

    def test_empty_output_rejected(self):
        with pytest.raises(ReplyParseError):
            parse_reply("Reasoning:\nthinking\nOutput:   ")

    def test_latency_carried(self):
        assert parse_reply("Output: hi", latency=4.2).latency == 4.2


class TestExtractCommand:
    def test_point_with_utterance(self):
        command = extract_command("POINT_GLASS I see a glass of water nearby, would you like a sip?")
        assert command.kind == KIND_POINT
        assert command.target == "GLASS"
        assert command.utterance.startswith("I see a glass")

    def test_plain_say(self):
        command = extract_command("Good, keep holding!")
        assert command.kind == KIND_SAY
        assert command.utterance == "Good, keep holding!"

    def test_stop_routine(self):
        command = extract_command("STOP_ROUTINE That's all for today, well done!")
        assert command.kind == KIND_STOP_ROUTINE
        assert command.utterance == "That's all for today, well done!"

    def test_next_exercise(self):
        command = extract_command("NEXT_EXERCISE: Wonderful! Now touch your toes.")
        assert command.kind == KIND_NEXT_EXERCISE
        assert command.utterance == "Wonderful! Now touch your toes."

    def test_point_name_is_maximal_uppercase_run(self):
        command = extract_command("POINT_WATER_BOTTLE over there")
        assert command.target == "WATER_BOTTLE"
        assert command.utterance == "over there"

    def test_point_empty_name_malformed(self):
        with pytest.raises(MalformedCommandError):
            extract_command("POINT_ over there")

    def test_stop_routine_requires_boundary(self):
        command = extract_command("STOP_ROUTINES are not a thing")
        assert command.kind == KIND_SAY

    def test_lowercase_prefix_is_say_before_verification(self):
        assert extract_command("next exercise: ready?").kind == KIND_SAY


def command_strategy():
    utterance = st.text(
        alphabet=string.ascii_letters + " .,!?'", min_size=1, max_size=60
    ).map(lambda s: s.strip()).filter(
        lambda s: s and not s.upper().startswith(("NEXT_EXERCISE:", "POINT_", "STOP_ROUTINE"))
    )
    name = st.text(alphabet=string.ascii_uppercase, min_size=1, max_size=12)
    return st.one_of(
        st.builds(lambda u: ActionCommand(KIND_SAY, u), utterance),
        st.builds(lambda u: ActionCommand(KIND_NEXT_EXERCISE, u), utterance),
        st.builds(lambda u: ActionCommand(KIND_STOP_ROUTINE, u), utterance),
        st.builds(lambda n, u: ActionCommand(KIND_POINT, u, target=n), name, utterance),
    )


class TestRoundTrip:
    @given(command_strategy())
    def test_canonical_render_reparses_equal(self, command):
        assert extract_command(command.canonical_output()) == command

    def test_500_seeded_commands_round_trip(self):
        rng = random.Random(99)
        kinds = [KIND_SAY, KIND_NEXT_EXERCISE, KIND_STOP_ROUTINE, KIND_POINT]
        for _ in range(500):
            kind = rng.choice(kinds)
            words = [
                "".join(rng.choice(string.ascii_lowercase) for _ in range(rng.randint(1, 8)))
                for _ in range(rng.randint(1, 10))
            ]
            utterance = " ".join(words).capitalize() + "!"
            target = None
            if kind == KIND_POINT:
                target = "".join(rng.choice(string.ascii_uppercase) for _ in range(rng.randint(2, 10)))
            command = ActionCommand(kind, utterance, target=target)
            assert extract_command(command.canonical_output()) == command


class TestNormalizePrefixes:
    @pytest.mark.parametrize(
        "raw,expected",
        [
            ("NEXT EXERCISE: let's continue", "NEXT_EXERCISE: let's continue"),
            ("next_exercise: onward", "NEXT_EXERCISE: onward"),
            ("Next Exercise:  go", "NEXT_EXERCISE: go"),
            ("stop routine, we are done", "STOP_ROUTINE we are done"),
            ("Stop_Routine thanks", "STOP_ROUTINE thanks"),
            ("point_glass take a sip", "POINT_GLASS take a sip"),
            ("POINT GLASS: take a sip", "POINT_GLASS take a sip"),
        ],
    )
    def test_near_misses(self, raw, expected):
        assert normalize_prefixes(raw) == expected

    def test_prose_point_untouched(self):
        assert normalize_prefixes("Point your toes forward") == "Point your toes forward"

    def test_canonical_untouched(self):
        for text in ("NEXT_EXERCISE: go", "POINT_GLASS here", "STOP_ROUTINE bye", "hello"):
            assert normalize_prefixes(text) == text


class TestVerify:
    def test_approved_noop(self):
        reply = parse_reply("Output: NEXT_EXERCISE: Great! Touch your toes now.")
        command, report = verify(
            extract_command(reply.output), reply, make_context(status=STATUS_SUCCESS)
        )
        assert report.verdict == "approved"
        assert report.edit_class == "none"
        assert report.before == report.after
        assert command.kind == KIND_NEXT_EXERCISE

    def test_prefix_normalization_class(self):
        reply = parse_reply("Output: NEXT EXERCISE: let's continue")
        command, report = verify(None, reply, make_context(status=STATUS_SUCCESS))
        assert command.kind == KIND_NEXT_EXERCISE
        assert report.verdict == "edited"
        assert report.edit_class == "prefix-normalization"
        assert report.after.startswith("NEXT_EXERCISE:")

    def test_formatting_repair_class(self):
        reply = parse_reply("Output: **Lovely work! Ready for the next one?**")
        command, report = verify(extract_command(reply.output), reply, make_context())
        assert command.kind == KIND_SAY
        assert command.utterance == "Lovely work! Ready for the next one?"
        assert report.edit_class == "formatting-repair"

    def test_point_undetected_object_downgraded(self):
        reply = parse_reply("Output: POINT_TOWEL Let me hand you a towel.")
        command, report = verify(extract_command(reply.output), reply, make_context())
        assert command.kind == KIND_SAY
        assert command.utterance == "Let me hand you a towel."
        assert report.verdict == "rewritten"
        assert report.edit_class == "semantic-rewrite"

    def test_point_detected_object_kept(self):
        reply = parse_reply("Output: POINT_GLASS Here is a glass of water.")
        command, report = verify(extract_command(reply.output), reply, make_context())
        assert command.kind == KIND_POINT
        assert command.target == "GLASS"
        assert report.verdict == "approved"

    def test_advance_without_success_or_confirmation_downgraded(self):
        reply = parse_reply("Output: NEXT_EXERCISE: Moving on, touch your toes!")
        command, report = verify(
            extract_command(reply.output),
            reply,
            make_context(status=STATUS_NOT_YET, transcript="this is hard"),
        )
        assert command.kind == KIND_SAY
        assert command.utterance == "Moving on, touch your toes!"
        assert report.edit_class == "semantic-rewrite"

    def test_advance_with_confirmation_allowed(self):
        reply = parse_reply("Output: NEXT_EXERCISE: Moving on, touch your toes!")
        command, report = verify(
            extract_command(reply.output),
            reply,
            make_context(status=STATUS_NOT_YET, transcript="ok, let's go"),
        )
        assert command.kind == KIND_NEXT_EXERCISE
        assert report.verdict == "approved"

    def test_confirmation_requires_word_boundary(self):
        reply = parse_reply("Output: NEXT_EXERCISE: Onward!")
        command, _ = verify(
            extract_command(reply.output),
            reply,
            make_context(status=STATUS_NOT_YET, transcript="yesterday was hard"),
        )
        assert command.kind == KIND_SAY

    def test_tone_adjustment(self):
        reply = parse_reply("Output: Hurry up! Raise those arms.")
        command, report = verify(extract_command(reply.output), reply, make_context())
        assert report.edit_class == "tone-adjustment"
        assert "hurry up" not in command.utterance.lower()
        assert "take your time" in command.utterance.lower()

    def test_dangling_point_marker_repaired(self):
        reply = parse_reply("Output: POINT_ the towel is over there")
        command, report = verify(None, reply, make_context())
        assert command.kind == KIND_SAY
        assert command.utterance == "the towel is over there"
        assert report.edit_class == "formatting-repair"

    def test_most_severe_class_reported(self):
        # Prefix normalization plus an undetected point: semantic wins.
        reply = parse_reply("Output: point_towel grab a towel")
        command, report = verify(None, reply, make_context())
        assert command.kind == KIND_SAY
        assert report.edit_class == "semantic-rewrite"
        assert report.verdict == "rewritten"

    @given(command_strategy())
    def test_verifier_output_always_reparses(self, command):
        reply = parse_reply(f"Output: {command.canonical_output()}")
        final, report = verify(
            extract_command(reply.output), reply, make_context(status=STATUS_SUCCESS)
        )
        reparsed = extract_command(report.after)
        assert reparsed == final
        if final.kind == KIND_POINT:
            assert final.target in ("GLASS", "WATER")


class TestMockClient:
    def test_passthrough(self):
        client = MockReasonerClient([ScriptedReply("Output: hello")], sleeper=lambda s: None)
        assert client.request("prompt") == "Output: hello"

    def test_scripted_errors(self):
        client = MockReasonerClient(
            [
                ScriptedReply(error="timeout"),
                ScriptedReply(error="network"),
                ScriptedReply(text="   "),
            ],
            sleeper=lambda s: None,
        )
        with pytest.raises(ReasonerTimeoutError):
            client.request("p")
        with pytest.raises(ReasonerNetworkError):
            client.request("p")
        with pytest.raises(EmptyCompletionError):
            client.request("p")

    def test_exhaustion(self):
        client = MockReasonerClient([])
        with pytest.raises(EmptyCompletionError):
            client.request("p")

    def test_request_decision_latency_measured(self):
        ticks = iter([0.0, 4.2])
        client = MockReasonerClient([ScriptedReply("Output: hi", delay=4.2)], sleeper=lambda s: None)
        reply = request_decision("prompt", client, clock=lambda: next(ticks))
        assert reply.latency == pytest.approx(4.2)
        assert reply.raw_text == "Output: hi"

    def test_request_decision_propagates_failure(self):
        client = MockReasonerClient([ScriptedReply(error="network")], sleeper=lambda s: None)
        with pytest.raises(ReasonerNetworkError):
            request_decision("prompt", client)

    def test_from_file(self, tmp_path):
        script = tmp_path / "mock.jsonl"
        script.write_text('{"text": "Output: hi", "delay": 0.5}\n{"error": "timeout"}\n')
        client = MockReasonerClient.from_file(script)
        assert client.remaining == 2
        assert client.next_scripted().text == "Output: hi"
        assert client.next_scripted().error == "timeout"


class TestHttpClient:
    def make_client(self):
        from stretchbot.reasoner import HttpReasonerClient

        return HttpReasonerClient("http://reasoner.local/v1", "test-model", timeout=2.0)

    def test_payload_and_auth_header(self, monkeypatch):
        import httpx

        captured = {}

        class FakeResponse:
            def raise_for_status(self):
                pass

            def json(self):
                return {"choices": [{"message": {"content": "Output: hello"}}]}

        def fake_post(url, json=None, headers=None, timeout=None):
            captured.update(url=url, json=json, headers=headers, timeout=timeout)
            return FakeResponse()

        monkeypatch.setattr(httpx, "post", fake_post)
        monkeypatch.setenv("STRETCHBOT_REASONER_TOKEN", "sekrit")
        assert self.make_client().request("the prompt") == "Output: hello"
        assert captured["url"] == "http://reasoner.local/v1/chat/completions"
        assert captured["json"]["model"] == "test-model"
        assert captured["json"]["messages"][0]["content"] == "the prompt"
        assert captured["headers"]["Authorization"] == "Bearer sekrit"

    def test_timeout_maps_to_structured_error(self, monkeypatch):
        import httpx

        def fake_post(*args, **kwargs):
            raise httpx.ReadTimeout("slow")

        monkeypatch.setattr(httpx, "post", fake_post)
        with pytest.raises(ReasonerTimeoutError):
            self.make_client().request("p")

    def test_transport_error_maps_to_network_error(self, monkeypatch):
        import httpx

        def fake_post(*args, **kwargs):
            raise httpx.ConnectError("refused")

        monkeypatch.setattr(httpx, "post", fake_post)
        with pytest.raises(ReasonerNetworkError):
            self.make_client().request("p")

    def test_missing_completion_maps_to_empty(self, monkeypatch):
        import httpx

        class FakeResponse:
            def raise_for_status(self):
                pass

            def json(self):
                return {"choices": []}

        monkeypatch.setattr(httpx, "post", lambda *a, **k: FakeResponse())
        with pytest.raises(EmptyCompletionError):
            self.make_client().request("p")
