from __future__ import annotations

import json

import httpx
import pytest

from selfai.agent.prompts import Phase
from selfai.agent.transport import (
    ChatClient,
    ChatTimeout,
    EndpointError,
    PlaybookEntry,
    PlaybookError,
    ScriptedTransport,
    load_playbook,
)


def chat_response(text: str, status: int = 200) -> httpx.Response:
    return httpx.Response(
        status, json={"choices": [{"message": {"role": "assistant", "content": text}}]}
    )


def client_with(handler) -> ChatClient:
    return ChatClient(
        "http://model.test/v1/chat/completions",
        "test-model",
        api_key="secret-key",
        max_retries=3,
        backoff_base=0.0,
        transport=httpx.MockTransport(handler),
    )


class TestChatClient:
    def test_successful_call_returns_first_choice_content(self):
        client = client_with(lambda request: chat_response("hello there"))
        assert client.complete([{"role": "user", "content": "hi"}]) == "hello there"

    def test_request_payload_follows_wire_schema(self):
        captured = {}

        def handler(request: httpx.Request) -> httpx.Response:
            captured.update(json.loads(request.content))
            captured["auth"] = request.headers.get("authorization")
            return chat_response("ok")

        client = client_with(handler)
        client.complete([{"role": "system", "content": "s"}, {"role": "user", "content": "u"}])
        assert captured["model"] == "test-model"
        assert captured["messages"][0] == {"role": "system", "content": "s"}
        assert "temperature" in captured and "max_tokens" in captured
        assert captured["auth"] == "Bearer secret-key"

    def test_two_transient_errors_then_success(self):
        calls = {"n": 0}

        def handler(request: httpx.Request) -> httpx.Response:
            calls["n"] += 1
            if calls["n"] <= 2:
                return httpx.Response(503, text="overloaded")
            return chat_response("finally")

        client = client_with(handler)
        assert client.complete([{"role": "user", "content": "x"}]) == "finally"
        assert calls["n"] == 3
        assert client.last_exchange.attempts == 3

    def test_persistent_5xx_raises_endpoint_error(self):
        client = client_with(lambda request: httpx.Response(500, text="boom"))
        with pytest.raises(EndpointError) as excinfo:
            client.complete([{"role": "user", "content": "x"}])
        assert excinfo.value.status == 500

    def test_hard_timeout_surfaces(self):
        def handler(request: httpx.Request) -> httpx.Response:
            raise httpx.ConnectTimeout("too slow")

        client = client_with(handler)
        with pytest.raises(ChatTimeout):
            client.complete([{"role": "user", "content": "x"}])

    def test_non_retriable_4xx_raises_immediately(self):
        calls = {"n": 0}

        def handler(request: httpx.Request) -> httpx.Response:
            calls["n"] += 1
            return httpx.Response(404, text="nope")

        client = client_with(handler)
        with pytest.raises(EndpointError):
            client.complete([{"role": "user", "content": "x"}])
        assert calls["n"] == 1

    def test_invalid_role_rejected_locally(self):
        client = client_with(lambda request: chat_response("ok"))
        client.complete([{"role": "user", "content": "x"}])
        with pytest.raises(ValueError):
            from selfai.agent.transport import ChatExchange

            ChatExchange(messages=[{"role": "robot", "content": "x"}], model="m",
                         temperature=0.0, max_tokens=1)


class TestScriptedTransport:
    def test_canned_text_passes_through(self):
        transport = ScriptedTransport([PlaybookEntry(Phase.ANALYSIS, "canned")])
        assert transport.complete([{"role": "user", "content": "p"}], phase=Phase.ANALYSIS) == "canned"

    def test_phase_mismatch_raises(self):
        transport = ScriptedTransport([PlaybookEntry(Phase.PLANNING, "x")])
        with pytest.raises(PlaybookError):
            transport.complete([], phase=Phase.ANALYSIS)

    def test_exhaustion_raises(self):
        transport = ScriptedTransport([PlaybookEntry(Phase.ANALYSIS, "x")])
        transport.complete([], phase=Phase.ANALYSIS)
        with pytest.raises(PlaybookError):
            transport.complete([], phase=Phase.ANALYSIS)

    def test_playbook_file_roundtrip(self, tmp_path):
        path = tmp_path / "playbook.yaml"
        path.write_text(
            "- expect_phase: analysis\n  response_text: looks fine\n"
            "- expect_phase: stop_judgement\n  response_text: 'Answer: No with confidence score: 0.2'\n"
        )
        transport = load_playbook(path)
        assert transport.complete([], phase=Phase.ANALYSIS) == "looks fine"
        assert "Answer: No" in transport.complete([], phase=Phase.STOP_JUDGEMENT)

    def test_empty_playbook_rejected(self, tmp_path):
        path = tmp_path / "empty.yaml"
        path.write_text("[]\n")
        with pytest.raises(PlaybookError):
            load_playbook(path)
