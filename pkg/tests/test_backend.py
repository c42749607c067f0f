import json
import logging
from concurrent.futures import ThreadPoolExecutor

import pytest

from utref.backend import (
    ENV_API_KEY,
    ENV_ENDPOINT,
    ENV_MODEL,
    BackendConfig,
    ChatClient,
    ScriptedBackend,
    parse_response_body,
    request_body,
)
from utref.engine import refactor_unit, write_transcript
from utref.errors import AuthError, BackendUnavailable, HttpError, RateLimited, Timeout
from utref.smells import detect

from conftest import unit_of
from fake_server import FakeServer

KEY = "sk-test-0123456789abcdef"


def client(url, **kw):
    cfg = BackendConfig(url, "test-model", KEY, **{"timeout": 5.0, **kw})
    return ChatClient(cfg, sleep=lambda s: None)


MESSAGES = [{"role": "user", "content": "hi"}]


class TestConfig:
    def test_from_env(self):
        env = {ENV_ENDPOINT: "http://x/v1", ENV_MODEL: "m", ENV_API_KEY: KEY}
        cfg = BackendConfig.from_env(env, max_retries=5)
        assert (cfg.endpoint_url, cfg.model_name, cfg.api_key, cfg.max_retries) == ("http://x/v1", "m", KEY, 5)

    def test_from_env_needs_endpoint_and_model(self):
        with pytest.raises(BackendUnavailable):
            BackendConfig.from_env({ENV_MODEL: "m"})

    def test_key_never_in_repr_or_public_dict(self):
        cfg = BackendConfig("http://x", "m", KEY)
        assert KEY not in repr(cfg)
        assert KEY not in json.dumps(cfg.public_dict())
        assert "api_key" not in cfg.public_dict()

    @pytest.mark.parametrize("kw", [{"temperature": 3}, {"timeout": 0}, {"max_retries": -1},
                                    {"max_concurrency": 0}])
    def test_validation(self, kw):
        with pytest.raises(ValueError):
            BackendConfig("http://x", "m", **kw)

    def test_request_body_shape(self):
        cfg = BackendConfig("http://x", "m", temperature=0.2)
        assert request_body(MESSAGES, cfg) == {"model": "m", "messages": MESSAGES, "temperature": 0.2}

    @pytest.mark.parametrize("raw", [b"not json", b"{}", b'{"choices": []}',
                                     b'{"choices": [{"message": {"content": 3}}]}'])
    def test_malformed_body(self, raw):
        with pytest.raises(HttpError):
            parse_response_body(raw)


class TestClient:
    def test_success_sends_bearer_and_body(self):
        with FakeServer() as srv:
            resp = client(srv.url).chat(MESSAGES)
        assert resp.text.startswith("```java")
        assert resp.token_usage == {"total_tokens": 7}
        headers, payload = srv.requests[0]
        assert headers["Authorization"] == f"Bearer {KEY}"
        assert payload["model"] == "test-model" and payload["messages"] == MESSAGES

    @pytest.mark.parametrize("retries", [0, 1, 3])
    def test_persistent_failure_attempts(self, retries):
        with FakeServer(status=503) as srv:
            with pytest.raises(HttpError) as err:
                client(srv.url, max_retries=retries).chat(MESSAGES)
        assert err.value.status == 503
        assert srv.attempts == retries + 1

    def test_rate_limit_is_retried(self):
        with FakeServer(status=429) as srv:
            with pytest.raises(RateLimited):
                client(srv.url, max_retries=2).chat(MESSAGES)
        assert srv.attempts == 3

    @pytest.mark.parametrize("status", [401, 403])
    def test_auth_failure_not_retried(self, status):
        with FakeServer(status=status) as srv:
            with pytest.raises(AuthError):
                client(srv.url, max_retries=4).chat(MESSAGES)
        assert srv.attempts == 1

    def test_client_error_not_retried(self):
        with FakeServer(status=400) as srv:
            with pytest.raises(HttpError):
                client(srv.url, max_retries=4).chat(MESSAGES)
        assert srv.attempts == 1

    def test_recovers_after_transient_failure(self):
        with FakeServer(status=lambda n: 502 if n < 3 else 200) as srv:
            resp = client(srv.url, max_retries=2).chat(MESSAGES)
        assert srv.attempts == 3 and resp.text

    def test_backoff_grows(self):
        delays = []
        with FakeServer(status=500) as srv:
            c = ChatClient(BackendConfig(srv.url, "m", max_retries=3, backoff_base=0.1), sleep=delays.append)
            with pytest.raises(HttpError):
                c.chat(MESSAGES)
        assert len(delays) == 3
        assert delays[0] < delays[1] < delays[2]

    def test_timeout(self):
        with FakeServer(delay=0.5) as srv:
            with pytest.raises(Timeout):
                client(srv.url, timeout=0.1, max_retries=1).chat(MESSAGES)
        assert srv.attempts == 2

    def test_connection_refused_is_transport_error(self):
        with FakeServer() as srv:
            url = srv.url
        with pytest.raises(HttpError) as err:
            client(url, max_retries=1).chat(MESSAGES)
        assert err.value.status is None

    @pytest.mark.parametrize("limit", [1, 2, 3])
    def test_concurrency_cap(self, limit):
        with FakeServer(delay=0.05) as srv:
            c = client(srv.url, max_concurrency=limit)
            with ThreadPoolExecutor(max_workers=8) as pool:
                list(pool.map(lambda _: c.chat(MESSAGES), range(12)))
        assert srv.attempts == 12
        assert srv.peak <= limit
        assert srv.peak == limit


class TestSecrecy:
    def test_key_absent_from_transcript_logs_and_errors(self, tmp_path, caplog):
        unit, ctx = unit_of("@Test\nvoid t() {\n    assertEquals(4, c.divide(20, 5));\n"
                            "    assertEquals(2, c.divide(4, 2));\n}")
        caplog.set_level(logging.DEBUG)
        with FakeServer(status=lambda n: 500 if n == 1 else 200) as srv:
            c = client(srv.url, max_retries=1)
            out = refactor_unit(unit, ctx, detect(unit, ctx), backend="model", model=c, budget=2)
        path = tmp_path / "transcript.jsonl"
        write_transcript(path, out.transcript)
        assert KEY.encode() not in path.read_bytes()
        assert KEY not in caplog.text
        with FakeServer(status=401) as srv:
            with pytest.raises(AuthError) as err:
                client(srv.url).chat(MESSAGES)
        assert KEY not in str(err.value) and KEY not in repr(err.value)


class TestScripted:
    def test_replays_then_repeats_last(self):
        s = ScriptedBackend(["a\n", "b\n"])
        assert [s.complete(None).text for _ in range(3)] == ["a\n", "b\n", "b\n"]

    def test_reads_files(self, tmp_path):
        (tmp_path / "01.txt").write_text("first")
        (tmp_path / "02.txt").write_text("second")
        s = ScriptedBackend.from_dir(tmp_path)
        assert [s.complete(None).text for _ in range(2)] == ["first", "second"]

    def test_needs_responses(self):
        with pytest.raises(ValueError):
            ScriptedBackend([])
