import json

import httpx
import pytest

from neusv.errors import TransportError
from neusv.formula import Proposition
from neusv.perception import VLMClient, Window
from neusv.transport import ChatTransport, ClientConfig

CHOICE = {"message": {"content": "Yes"},
          "logprobs": {"content": [{"token": "Yes", "logprob": -0.1,
                                    "top_logprobs": [{"token": "Yes", "logprob": -0.1},
                                                     {"token": "No", "logprob": -2.4}]}]}}


def make(responses, **config):
    """Transport whose server replies with ``responses`` in order and records requests."""
    seen, sleeps = [], []
    replies = iter(responses)

    def handler(request):
        seen.append(request)
        r = next(replies)
        if isinstance(r, Exception):
            raise r
        return r

    cfg = ClientConfig(endpoint="http://vlm.test/v1/chat/completions", model="m",
                       api_key_env="", **config)
    http = httpx.Client(transport=httpx.MockTransport(handler))
    return ChatTransport(cfg, http=http, sleep=sleeps.append), seen, sleeps


def ok(choice=CHOICE):
    return httpx.Response(200, json={"choices": [choice]})


class TestRetries:
    def test_success_first_try(self):
        t, seen, sleeps = make([ok()])
        assert t.chat([{"role": "user", "content": "hi"}]) == CHOICE
        assert len(seen) == 1 and sleeps == []

    def test_retries_with_exponential_backoff(self):
        t, seen, sleeps = make([httpx.Response(503), httpx.ConnectError("down"), ok()],
                               backoff=0.5)
        assert t.chat([]) == CHOICE
        assert len(seen) == 3
        assert sleeps == [0.5, 1.0]

    def test_gives_up_after_attempts(self):
        t, seen, _ = make([httpx.Response(500)] * 3)
        with pytest.raises(TransportError, match="3 attempts"):
            t.chat([])
        assert len(seen) == 3

    def test_client_error_not_retried(self):
        t, seen, _ = make([httpx.Response(400, text="bad request"), ok()])
        with pytest.raises(TransportError, match="HTTP 400"):
            t.chat([])
        assert len(seen) == 1

    def test_malformed_body(self):
        t, _, _ = make([httpx.Response(200, text="not json")])
        with pytest.raises(TransportError):
            t.chat([])
        t, _, _ = make([httpx.Response(200, json={"choices": []})])
        with pytest.raises(TransportError):
            t.chat([])

    def test_api_key_header(self, monkeypatch):
        monkeypatch.setenv("TEST_KEY", "sekret")
        seen = []
        http = httpx.Client(transport=httpx.MockTransport(
            lambda r: seen.append(r) or ok()))
        t = ChatTransport(ClientConfig(endpoint="http://x.test/", api_key_env="TEST_KEY"), http)
        t.chat([])
        assert seen[0].headers["authorization"] == "Bearer sekret"


class TestVlmPayload:
    def test_payload(self, tmp_path):
        frames = []
        for i, data in enumerate([b"\x89PNG-old", b"\x89PNG-new"]):
            path = tmp_path / f"frame_{i:03d}.png"
            path.write_bytes(data)
            frames.append(path)
        t, seen, _ = make([ok()])
        client = VLMClient(t.config, transport=t)
        c = client.score(Proposition("dog", "a dog"), Window(0, tuple(frames)))
        assert 0.0 < c < 1.0

        body = json.loads(seen[0].content)
        assert body["temperature"] == 0
        assert body["logprobs"] is True and body["top_logprobs"] == 5
        assert body["model"] == "m"
        content = body["messages"][0]["content"]
        urls = [part["image_url"]["url"] for part in content if part["type"] == "image_url"]
        assert len(urls) == 2
        assert all(u.startswith("data:image/png;base64,") for u in urls)
        # oldest frame first
        assert urls[0].endswith("iVBORy1vbGQ=")
        assert "a dog" in content[-1]["text"]

    def test_missing_logprobs(self, tmp_path):
        frame = tmp_path / "x.png"
        frame.write_bytes(b"px")
        t, _, _ = make([ok({"message": {"content": "Yes"}})])
        client = VLMClient(t.config, transport=t)
        with pytest.raises(TransportError, match="log-probabilities"):
            client.score(Proposition("dog"), Window(0, (frame,)))
