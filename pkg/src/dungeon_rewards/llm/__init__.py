"""Language-model roles (refine, align, feedback, self-evaluation) and backends."""

from .backends import (
    BackendConfig,
    BackendError,
    HttpChatBackend,
    PlaybookExhausted,
    ScriptedBackend,
    make_backend,
)
from .bridge import (
    GenerationError,
    LLMBridge,
    PromptBundle,
    RefineContext,
    TemplateError,
    Transcript,
    extract_code,
    parse_score,
)

__all__ = [
    "BackendConfig",
    "BackendError",
    "GenerationError",
    "HttpChatBackend",
    "LLMBridge",
    "PlaybookExhausted",
    "PromptBundle",
    "RefineContext",
    "ScriptedBackend",
    "TemplateError",
    "Transcript",
    "extract_code",
    "make_backend",
    "parse_score",
]
