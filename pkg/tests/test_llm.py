import json

import httpx
import pytest

from dungeon_rewards.lang import RewardStats
from dungeon_rewards.level import parse_text
from dungeon_rewards.llm import backends
from dungeon_rewards.llm.backends import (
    BackendConfig, BackendError, HttpChatBackend, PlaybookExhausted, ScriptedBackend, make_backend,
)
from dungeon_rewards.llm.bridge import (
    KNOWN_PLACEHOLDERS, GenerationError, LLMBridge, PromptBundle, RefineContext, TemplateError,
    Transcript, extract_code, parse_score, placeholders,
)
from dungeon_rewards.patheval import INSTRUCTIONS


def fenced(body, lang="python"):
    return f"Here you go.\n```{lang}\n{body}```\nDone."


# ------------------------------------------------------------- extraction


def test_extract_code():
    assert extract_code(fenced("return 1;\n")) == "return 1;\n"
    two = "```\nreturn 1;\n```\nbetter:\n```rwd\nreturn 2;\n```"
    assert extract_code(two) == "return 2;\n"
    assert extract_code("  return 3;  ") == "return 3;\n"


@pytest.mark.parametrize("text, want", [
    ("0.75", 0.75),
    ("Score: 1", 1.0),
    ("I'd say 7 out of 10, so 0.7", 0.7),
    ("roughly 85", 1.0),
    ("-3 then nothing", 0.0),
    ("1e-1", 0.1),
])
def test_parse_score(text, want):
    assert parse_score(text) == pytest.approx(want)


def test_parse_score_without_number():
    with pytest.raises(GenerationError):
        parse_score("no idea")


# ------------------------------------------------------------- backends


def test_scripted_backend_replays_in_order(tmp_path):
    f = tmp_path / "play.json"
    f.write_text(json.dumps({"replies": ["a", "b"]}))
    be = make_backend(BackendConfig("mock", script_path=str(f)))
    assert [be.complete("x"), be.complete("y")] == ["a", "b"]
    with pytest.raises(PlaybookExhausted):
        be.complete("z")
    f.write_text(json.dumps(["only"]))
    assert ScriptedBackend.from_file(f).complete("q") == "only"
    f.write_text(json.dumps([1, 2]))
    with pytest.raises(BackendError):
        ScriptedBackend.from_file(f)


def test_backend_config_validation():
    with pytest.raises(ValueError):
        BackendConfig("scripted")
    with pytest.raises(ValueError):
        BackendConfig("carrier-pigeon")
    assert BackendConfig("http").kind == "http_chat"


def http_backend(handler, monkeypatch, **kw):
    monkeypatch.setattr(backends.time, "sleep", lambda s: None)
    monkeypatch.setenv("TEST_KEY", "sk-test")
    cfg = BackendConfig("http", endpoint="https://llm.example/v1", model="m1",
                        api_key_env="TEST_KEY", **kw)
    return HttpChatBackend(cfg, client=httpx.Client(transport=httpx.MockTransport(handler)))


def test_http_backend_request_shape(monkeypatch):
    seen = {}

    def handler(req: httpx.Request):
        seen["url"] = str(req.url)
        seen["auth"] = req.headers.get("authorization")
        seen["body"] = json.loads(req.content)
        return httpx.Response(200, json={"choices": [{"message": {"content": "hello"}}]})

    be = http_backend(handler, monkeypatch)
    assert be.complete("prompt text") == "hello"
    assert seen["url"] == "https://llm.example/v1/chat/completions"
    assert seen["auth"] == "Bearer sk-test"
    assert seen["body"] == {
        "model": "m1", "messages": [{"role": "user", "content": "prompt text"}], "temperature": 0.0,
    }


def test_http_backend_retries_server_errors(monkeypatch):
    calls = []

    def handler(req):
        calls.append(1)
        if len(calls) < 3:
            return httpx.Response(503)
        return httpx.Response(200, json={"choices": [{"message": {"content": "ok"}}]})

    assert http_backend(handler, monkeypatch).complete("p") == "ok"
    assert len(calls) == 3


def test_http_backend_gives_up(monkeypatch):
    def handler(req):
        raise httpx.ConnectError("refused")

    with pytest.raises(BackendError, match="3 attempts"):
        http_backend(handler, monkeypatch).complete("p")


@pytest.mark.parametrize("response", [
    httpx.Response(401, json={"error": "nope"}),
    httpx.Response(200, json={"unexpected": True}),
    httpx.Response(200, text="not json"),
])
def test_http_backend_bad_responses(monkeypatch, response):
    with pytest.raises(BackendError):
        http_backend(lambda req: response, monkeypatch).complete("p")


# ------------------------------------------------------------- templates


def test_shipped_templates_use_known_placeholders():
    b = PromptBundle.load()
    for name, text in b.templates.items():
        assert placeholders(text) <= KNOWN_PLACEHOLDERS, name
    assert "{reward_source}" in b.templates["align"] and "{stats_report}" in b.templates["align"]


def test_template_errors():
    b = PromptBundle.load()
    with pytest.raises(TemplateError):
        b.render("align", reward_source="return 0;")
    b.templates["align"] = "{reward_source} {mystery}"
    with pytest.raises(TemplateError, match="mystery"):
        b.render("align", reward_source="x", mystery="y")


def test_transcript_names(tmp_path):
    t = Transcript(tmp_path)
    assert [t.next_name(1, "align") for _ in range(2)] == ["iter_1/align_1", "iter_1/align_2"]
    assert t.next_name(2, "align") == "iter_2/align_1"
    t.write("iter_1/align_1", "request", "hi")
    assert (tmp_path / "iter_1" / "align_1.request.txt").read_text() == "hi"


# ---------------------------------------------------------------- bridge


def bridge(replies, tmp_path=None):
    be = ScriptedBackend(replies)
    return LLMBridge(be, transcript=Transcript(tmp_path)), be


def ctx(**kw):
    base = dict(instruction=INSTRUCTIONS[1], current_iter=1, max_iter=6)
    base.update(kw)
    return RefineContext(**base)


def test_first_refine_uses_initial_reward(tmp_path):
    br, be = bridge([fenced("return count(curr, BAT);\n")], tmp_path)
    src, prog = br.generate_reward(ctx())
    assert src == "return count(curr, BAT);\n"
    req = (tmp_path / "iter_1" / "refine_1.request.txt").read_text()
    assert br.prompts.initial_reward.strip() in req
    assert INSTRUCTIONS[1].text in req
    assert "Fitness" not in req
    assert (tmp_path / "iter_1" / "refine_1.response.txt").exists()


def test_graph_context_shows_fitness_and_aux():
    br, _ = bridge([fenced("return 1;\n")])
    c = ctx(current_iter=3, parent_reward="return 0;\n", parent_feedback="more bats",
            parent_fitness=0.5, aux=[("return 2;\n", 0.75)], show_fitness=True)
    br.generate_reward(c)
    _, prompt, _ = br.transcript.pairs[0]
    assert "0.500" in prompt and "0.750" in prompt and "return 2;" in prompt
    assert "more bats" in prompt


def test_parse_failure_retries_once_with_diagnostic():
    br, be = bridge(["```\nreturn x;\n```", fenced("return 2;\n")])
    src, _ = br.generate_reward(ctx())
    assert src == "return 2;\n" and be.calls == 2
    _, retry_prompt, _ = br.transcript.pairs[1]
    assert "unbound identifier 'x'" in retry_prompt


def test_double_parse_failure():
    br, be = bridge(["return x;", "return y;", "unused"])
    with pytest.raises(GenerationError):
        br.generate_reward(ctx())
    assert be.calls == 2


def test_align_prompt_contains_stats():
    br, _ = bridge([fenced("return 0.5;\n")])
    stats = RewardStats(-1.5, 2.0, 12.5, 768)
    br.align_reward("return 0;\n", stats, 2)
    name, prompt, _ = br.transcript.pairs[0]
    assert name == "iter_2/align_1"
    assert stats.report() in prompt


def test_feedback_variants(fixtures):
    g = parse_text((fixtures / "three_keys.txt").read_text())
    br, be = bridge(["Add more spiders."])
    assert br.generate_feedback("return 0;\n", [g] * 8, "none", INSTRUCTIONS[2], 1) is None
    assert br.generate_feedback("return 0;\n", [g], "generic", INSTRUCTIONS[2], 1) == \
        br.prompts.generic_feedback
    assert be.calls == 0
    fb = br.generate_feedback("return 0;\n", [g] * 8, "specific", INSTRUCTIONS[2], 1)
    assert fb == "Add more spiders." and be.calls == 1
    _, prompt, _ = br.transcript.pairs[0]
    assert prompt.count("Level ") == 5
    with pytest.raises(ValueError):
        br.generate_feedback("return 0;\n", [g], "loud", INSTRUCTIONS[2], 1)


def test_self_evaluate(fixtures):
    g = parse_text((fixtures / "three_keys.txt").read_text())
    br, _ = bridge(["I would rate it 0.4."])
    assert br.self_evaluate_fitness([g], INSTRUCTIONS[1], 1) == pytest.approx(0.4)
