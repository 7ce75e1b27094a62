import threading
import time

import httpx
import numpy as np
import pytest

from ragmark.gateway import (
    AuthError,
    ChatRequest,
    ChatResponse,
    DeterministicEmbedder,
    EmbedRequest,
    Gateway,
    MalformedResponseError,
    Message,
    OpenAICompatBackend,
    ReplayBackend,
    ReplayCacheMiss,
    RetryExhaustedError,
    SyntheticBackend,
    TransientError,
    request_hash,
)


def chat(content="hi", model="gpt-4", **kwargs):
    return ChatRequest(model_id=model, messages=(Message("user", content),), **kwargs)


def test_default_temperature_is_zero():
    assert chat().temperature == 0.0


def test_chat_request_validation():
    with pytest.raises(ValueError, match="at least one message"):
        ChatRequest(model_id="m", messages=())
    with pytest.raises(ValueError, match="temperature"):
        chat(temperature=-0.1)
    with pytest.raises(ValueError, match="invalid role"):
        ChatRequest(model_id="m", messages=(Message("robot", "x"),))


def test_request_hash_stable_and_field_sensitive():
    base = chat("hello")
    assert request_hash(base) == request_hash(chat("hello"))
    variants = [
        chat("hello!"),
        chat("hello", model="gpt-3.5"),
        chat("hello", temperature=0.5),
        chat("hello", max_output=10),
        ChatRequest(model_id="gpt-4", messages=(Message("system", "hello"),)),
        ChatRequest(
            model_id="gpt-4",
            messages=(Message("user", "hel"), Message("user", "lo")),
        ),
    ]
    hashes = {request_hash(base)} | {request_hash(v) for v in variants}
    assert len(hashes) == len(variants) + 1


# -- deterministic embedder ------------------------------------------------


def test_embedder_same_text_same_vector():
    embed = DeterministicEmbedder(dim=32, seed=5)
    assert np.array_equal(embed("alpha"), embed("alpha"))
    assert not np.array_equal(embed("alpha"), embed("beta"))


def test_embedder_dim_and_unit_norm():
    embed = DeterministicEmbedder(dim=48, seed=0)
    vec = embed("anything at all")
    assert vec.shape == (48,)
    assert vec.dtype == np.float32
    assert abs(float(np.linalg.norm(vec)) - 1.0) <= 1e-6


def test_embedder_seed_changes_vectors():
    a = DeterministicEmbedder(dim=16, seed=1)("t")
    b = DeterministicEmbedder(dim=16, seed=2)("t")
    assert not np.array_equal(a, b)


def test_replay_embed_batch_order(tmp_path):
    backend = ReplayBackend(tmp_path, DeterministicEmbedder(dim=8))
    resp = backend.embed_once(EmbedRequest(texts=("a", "b", "c")))
    assert len(resp.vectors) == 3
    single = DeterministicEmbedder(dim=8)
    for text, vec in zip(("a", "b", "c"), resp.vectors):
        assert np.array_equal(vec, single(text))


# -- replay backend ----------------------------------------------------------


def test_replay_primed_request_echoes(tmp_path):
    backend = ReplayBackend(tmp_path, DeterministicEmbedder(dim=8))
    req = chat("what is up")
    backend.prime(req, "hello")
    assert backend.complete_once(req).text == "hello"


def test_replay_miss_names_hash(tmp_path):
    backend = ReplayBackend(tmp_path, DeterministicEmbedder(dim=8))
    req = chat("never primed")
    with pytest.raises(ReplayCacheMiss) as exc_info:
        backend.complete_once(req)
    assert request_hash(req) in str(exc_info.value)


def test_replay_records_from_source(tmp_path):
    source = SyntheticBackend(DeterministicEmbedder(dim=8))
    backend = ReplayBackend(tmp_path, DeterministicEmbedder(dim=8), record_from=source)
    req = chat("record me")
    first = backend.complete_once(req)
    # Cached copy replays identically without the source.
    replay_only = ReplayBackend(tmp_path, DeterministicEmbedder(dim=8))
    assert replay_only.complete_once(req) == first


# -- synthetic backend -------------------------------------------------------


def test_synthetic_is_deterministic_and_parseable():
    backend = SyntheticBackend(DeterministicEmbedder(dim=8))
    grading = chat("[Start of Grading Rubric]\n1: bad\n[End of Grading Rubric]")
    r1, r2 = backend.complete_once(grading), backend.complete_once(grading)
    assert r1.text == r2.text
    assert "Score: [[" in r1.text
    confidence = chat(
        "[Start of Grading Rubric]\nfollowed by your confidence level of the grading"
    )
    assert "Confidence: [[" in backend.complete_once(confidence).text
    legacy = chat("[The Start of Grading Rubric]")
    assert "Rating: [[" in backend.complete_once(legacy).text
    plain = backend.complete_once(chat("just a question"))
    assert "Score: [[" not in plain.text


# -- OpenAI-compatible backend via mock transport ------------------------------


def _mock_backend(handler):
    client = httpx.Client(transport=httpx.MockTransport(handler), timeout=5.0)
    return OpenAICompatBackend("https://api.test/v1", "key", client=client)


def test_openai_backend_happy_path():
    def handler(request):
        assert request.url.path == "/v1/chat/completions"
        assert request.headers["authorization"] == "Bearer key"
        return httpx.Response(
            200,
            json={
                "model": "gpt-4-0613",
                "choices": [{"message": {"content": "pong"}}],
                "usage": {"prompt_tokens": 7, "completion_tokens": 2},
            },
        )

    resp = _mock_backend(handler).complete_once(chat("ping"))
    assert resp.text == "pong"
    assert resp.usage == (7, 2)
    assert resp.model_id == "gpt-4-0613"


def test_openai_backend_embeddings_order():
    def handler(request):
        return httpx.Response(
            200,
            json={
                "data": [
                    {"index": 1, "embedding": [1.0, 0.0]},
                    {"index": 0, "embedding": [0.0, 1.0]},
                ]
            },
        )

    resp = _mock_backend(handler).embed_once(EmbedRequest(texts=("a", "b")))
    assert np.array_equal(resp.vectors[0], np.array([0.0, 1.0], dtype=np.float32))


def test_openai_backend_error_mapping():
    for status, exc in ((401, AuthError), (429, TransientError), (500, TransientError)):
        def handler(request, status=status):
            return httpx.Response(status, json={})

        with pytest.raises(exc):
            _mock_backend(handler).complete_once(chat("x"))


def test_openai_backend_malformed_reply():
    def handler(request):
        return httpx.Response(200, json={"choices": []})

    with pytest.raises(MalformedResponseError):
        _mock_backend(handler).complete_once(chat("x"))


# -- gateway retry / concurrency ----------------------------------------------


class FlakyBackend:
    def __init__(self, fail_times, exc=TransientError("boom")):
        self.fail_times = fail_times
        self.exc = exc
        self.calls = 0

    def complete_once(self, req):
        self.calls += 1
        if self.calls <= self.fail_times:
            raise self.exc
        return ChatResponse(text="ok", model_id=req.model_id)


def test_gateway_retries_transient_then_succeeds():
    sleeps = []
    backend = FlakyBackend(fail_times=2)
    gw = Gateway(backend, max_retries=5, sleep=sleeps.append)
    assert gw.complete(chat("x")).text == "ok"
    assert backend.calls == 3
    assert len(sleeps) == 2
    # Full jitter: delays bounded by base * factor**attempt.
    assert 0.0 <= sleeps[0] <= 0.5
    assert 0.0 <= sleeps[1] <= 1.0


def test_gateway_retry_delays_deterministic_for_seed():
    def run():
        sleeps = []
        gw = Gateway(FlakyBackend(4), max_retries=5, retry_seed=9, sleep=sleeps.append)
        gw.complete(chat("x"))
        return sleeps

    assert run() == run()


def test_gateway_exhausts_retries():
    backend = FlakyBackend(fail_times=99)
    gw = Gateway(backend, max_retries=3, sleep=lambda _d: None)
    with pytest.raises(RetryExhaustedError):
        gw.complete(chat("x"))
    assert backend.calls == 3


def test_gateway_auth_failure_not_retried():
    backend = FlakyBackend(fail_times=99, exc=AuthError("denied"))
    gw = Gateway(backend, max_retries=5, sleep=lambda _d: None)
    with pytest.raises(AuthError):
        gw.complete(chat("x"))
    assert backend.calls == 1


class CountingBackend:
    """Tracks maximum in-flight calls to verify the concurrency bound."""

    def __init__(self):
        self.lock = threading.Lock()
        self.in_flight = 0
        self.max_in_flight = 0

    def complete_once(self, req):
        with self.lock:
            self.in_flight += 1
            self.max_in_flight = max(self.max_in_flight, self.in_flight)
        time.sleep(0.01)
        with self.lock:
            self.in_flight -= 1
        return ChatResponse(text=req.messages[0].content, model_id=req.model_id)


def test_gateway_bounds_concurrency_and_preserves_order():
    backend = CountingBackend()
    gw = Gateway(backend, max_concurrency=3)
    reqs = [chat(f"m{i}") for i in range(12)]
    responses = gw.complete_many(reqs)
    assert [r.text for r in responses] == [f"m{i}" for i in range(12)]
    assert backend.max_in_flight <= 3


def test_embed_count_validated():
    class ShortEmbed:
        def embed_once(self, req):
            from ragmark.gateway import EmbedResponse

            return EmbedResponse(vectors=(np.zeros(3, dtype=np.float32),))

    gw = Gateway(ShortEmbed())
    with pytest.raises(MalformedResponseError, match="mismatch"):
        gw.embed(EmbedRequest(texts=("a", "b")))
