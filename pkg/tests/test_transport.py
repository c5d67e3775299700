"""Transports: scripted fixture semantics, live endpoint plumbing, prompts."""

from __future__ import annotations

import json

import pytest

import mdtdebate.transport as transport_mod
from conftest import simple_case
from mdtdebate.errors import ExtractorUnavailable, TransportDown
from mdtdebate.model import AgentProfile
from mdtdebate.transport import (
    ContextBundle,
    LiveCaseExtractor,
    LiveEndpoint,
    LiveTransport,
    OpinionDigest,
    ScriptedTransport,
    render_messages,
)
from mdtdebate.wire import Reason

PROFILE = AgentProfile("d1", "Cardiology", "Weigh cardiac causes.")


def bundle(round_index=0, attempt=0, **kw) -> ContextBundle:
    return ContextBundle(
        kind=kw.pop("kind", "initial"),
        round_index=round_index,
        attempt=attempt,
        case=simple_case(),
        role_prompt=PROFILE.role_prompt,
        **kw,
    )


class TestScriptedTransport:
    def test_single_payload_file(self, tmp_path):
        (tmp_path / "d1").mkdir()
        (tmp_path / "d1" / "0.json").write_text('{"hypothesis": "H1"}')
        transport = ScriptedTransport(tmp_path)
        assert json.loads(transport(PROFILE, bundle()))["hypothesis"] == "H1"

    def test_attempt_sequence_and_repeat(self, tmp_path):
        (tmp_path / "d1").mkdir()
        (tmp_path / "d1" / "0.json").write_text(json.dumps({"attempts": ["bad", {"hypothesis": "H1"}]}))
        transport = ScriptedTransport(tmp_path)
        assert transport(PROFILE, bundle(attempt=0)) == "bad"
        assert json.loads(transport(PROFILE, bundle(attempt=1)))["hypothesis"] == "H1"
        # exhausted attempts repeat the last entry
        assert json.loads(transport(PROFILE, bundle(attempt=5)))["hypothesis"] == "H1"

    def test_missing_fixture_is_transport_down(self, tmp_path):
        transport = ScriptedTransport(tmp_path)
        with pytest.raises(TransportDown):
            transport(PROFILE, bundle())


class TestPromptRendering:
    def test_initial_bundle_has_case_and_contract(self):
        messages = render_messages(PROFILE, bundle())
        assert messages[0]["role"] == "system"
        assert "single JSON object" in messages[0]["content"]
        assert "[i1]" in messages[1]["content"]

    def test_revision_bundle_carries_instruction(self):
        b = bundle(kind="revision", intervention=(("i2",), "weigh autoimmune lower"))
        text = render_messages(PROFILE, b)[1]["content"]
        assert "weigh autoimmune lower" in text
        assert "i2" in text

    def test_repair_reasons_included(self):
        b = bundle(attempt=1, repair_reasons=(Reason("UnknownItemReference", "no item i9"),))
        text = render_messages(PROFILE, b)[1]["content"]
        assert "UnknownItemReference" in text and "no item i9" in text

    def test_reeval_bundle_names_both_hypotheses(self):
        b = bundle(
            kind="reeval",
            conflict={"conflict_id": "c1", "hypothesis_a": "Whipple disease",
                      "hypothesis_b": "Lymphoma", "contested_item_ids": ["i2"]},
        )
        text = render_messages(PROFILE, b)[1]["content"]
        assert "Whipple disease" in text and "Lymphoma" in text

    def test_digest_lines_present_in_debate(self):
        d = OpinionDigest("d2", "GI", 0, "Whipple disease", "summary text", ("i1",))
        text = render_messages(PROFILE, bundle(kind="debate", prior_opinions=(d,)))[1]["content"]
        assert "Whipple disease" in text and "d2" in text


class _FakeResponse:
    def __init__(self, payload, status=200):
        self._payload = payload
        self.status_code = status

    def raise_for_status(self):
        if self.status_code >= 400:
            raise transport_mod.requests.HTTPError(f"{self.status_code}")

    def json(self):
        return self._payload


class TestLiveEndpoint:
    def test_successful_completion(self, monkeypatch):
        captured = {}

        def fake_post(url, json=None, headers=None, timeout=None):
            captured.update(url=url, json=json, headers=headers)
            return _FakeResponse({"choices": [{"message": {"content": "reply text"}}]})

        monkeypatch.setattr(transport_mod.requests, "post", fake_post)
        monkeypatch.setenv("TEST_LLM_KEY", "sk-secret")
        endpoint = LiveEndpoint(base_url="https://llm.example/v1", model="med-1", api_key_env="TEST_LLM_KEY")
        out = LiveTransport(endpoint)(PROFILE, bundle())
        assert out == "reply text"
        assert captured["url"] == "https://llm.example/v1/chat/completions"
        assert captured["json"]["model"] == "med-1"
        assert captured["headers"]["Authorization"] == "Bearer sk-secret"

    def test_missing_key_env(self, monkeypatch):
        monkeypatch.delenv("NOPE_KEY", raising=False)
        endpoint = LiveEndpoint(base_url="https://x", model="m", api_key_env="NOPE_KEY")
        with pytest.raises(TransportDown):
            endpoint.complete([])

    def test_http_error_wrapped(self, monkeypatch):
        monkeypatch.setattr(
            transport_mod.requests, "post", lambda *a, **k: _FakeResponse({}, status=500)
        )
        endpoint = LiveEndpoint(base_url="https://x", model="m")
        with pytest.raises(TransportDown):
            endpoint.complete([])

    def test_malformed_response_wrapped(self, monkeypatch):
        monkeypatch.setattr(
            transport_mod.requests, "post", lambda *a, **k: _FakeResponse({"weird": True})
        )
        endpoint = LiveEndpoint(base_url="https://x", model="m")
        with pytest.raises(TransportDown):
            endpoint.complete([])


class TestLiveCaseExtractor:
    def test_extracts_items_with_located_spans(self, monkeypatch):
        reply = {"items": [
            {"category": "Labs", "label": "CRP", "value": "48 mg/L"},
            {"category": "Symptoms", "label": "diarrhea", "value": ""},
        ]}
        monkeypatch.setattr(
            transport_mod.requests, "post",
            lambda *a, **k: _FakeResponse({"choices": [{"message": {"content": json.dumps(reply)}}]}),
        )
        extractor = LiveCaseExtractor(LiveEndpoint(base_url="https://x", model="m"))
        drafts = extractor.extract("patient with diarrhea; CRP 48 mg/L")
        assert [(d.category, d.label) for d in drafts] == [("Labs", "CRP"), ("Symptoms", "diarrhea")]
        lo, hi = drafts[0].source_span
        assert "patient with diarrhea; CRP 48 mg/L"[lo:hi] == "48 mg/L"

    def test_transport_failure_becomes_extractor_unavailable(self, monkeypatch):
        def boom(*a, **k):
            raise transport_mod.requests.ConnectionError("down")

        monkeypatch.setattr(transport_mod.requests, "post", boom)
        extractor = LiveCaseExtractor(LiveEndpoint(base_url="https://x", model="m"))
        with pytest.raises(ExtractorUnavailable):
            extractor.extract("some narrative")

    def test_malformed_reply_becomes_extractor_unavailable(self, monkeypatch):
        monkeypatch.setattr(
            transport_mod.requests, "post",
            lambda *a, **k: _FakeResponse({"choices": [{"message": {"content": "not json"}}]}),
        )
        extractor = LiveCaseExtractor(LiveEndpoint(base_url="https://x", model="m"))
        with pytest.raises(ExtractorUnavailable):
            extractor.extract("some narrative")

    def test_empty_narrative_short_circuits(self):
        extractor = LiveCaseExtractor(LiveEndpoint(base_url="https://x", model="m"))
        assert extractor.extract("   ") == []
