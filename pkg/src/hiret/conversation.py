"""Multi-turn sessions: history, query rewriting, prompt assembly, generation.

Providers come in two flavors. Stubs are fully offline and deterministic:
the rewrite stub returns the question unchanged and the generation stub
either abstains (no context) or echoes the grounding document ids. Remote
providers speak a vendor-neutral chat-style HTTP protocol.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, Sequence

from .embedding import ProviderError

logger = logging.getLogger(__name__)

HISTORY_WINDOW = 3
REWRITE_TEMPERATURE = 0.2
GENERATION_TEMPERATURE = 0.7
GENERATION_MAX_TOKENS = 4096

ABSTENTION_RESPONSE = "I don't have enough information to answer that."

REWRITE_PROMPT_TEMPLATE = """Task: Given the conversation history, rewrite the new user question into a standalone and specific query suitable for retrieval.

Important Rules:
- If the question is already clear and standalone, return it EXACTLY as is
- If the question contains pronouns or references to earlier dialogue, rewrite it using the necessary context
- Do NOT invent information or change the original meaning
- Return only the rewritten question with NO explanation

Conversation History:
{history_text}

New Question: {user_question}

Expected Output:
Rewritten standalone question (or unchanged original question if already standalone)."""

_GENERATION_PROMPT_HEAD = """Task: Generate a natural conversational response grounded in retrieved parent-level documents while maintaining dialogue continuity.

System Instruction: You are a helpful AI assistant engaged in a conversation with a user. Answer the user's question naturally and directly, as if you already know the information.

Important Rules:
- Do NOT mention "the context", "the provided information", "according to the documents", or similar phrases
- Do NOT reference source numbers such as [1], [2], etc.
- Respond conversationally as if the knowledge is your own
- If insufficient information is available, state this naturally without mentioning missing context
- Maintain continuity with the conversation history"""

_GENERATION_TRIGGER = "Generation Trigger:\nRespond naturally and conversationally:"


class RewriteProvider(Protocol):
    def rewrite(self, prompt: str, question: str) -> str: ...


class GenerationProvider(Protocol):
    def generate(self, prompt: str, parent_ids: Sequence[str]) -> str: ...


class GenerationError(RuntimeError):
    """Generation failed; carries the rendered prompt's hash for reproduction."""

    def __init__(self, message: str, prompt_hash: str):
        super().__init__(message)
        self.prompt_hash = prompt_hash


@dataclass
class TextProviderConfig:
    kind: str = "stub"  # stub | remote
    model: str = ""
    temperature: float = GENERATION_TEMPERATURE
    max_tokens: int = GENERATION_MAX_TOKENS
    endpoint: str = ""
    api_key_env: str = "HIRET_TEXT_API_KEY"
    timeout: float = 60.0
    retries: int = 2

    def validate(self) -> None:
        if self.kind not in ("stub", "remote"):
            raise ValueError(f"unknown text provider kind: {self.kind!r}")
        if self.kind == "remote" and (not self.endpoint or not self.model):
            raise ValueError("remote text provider requires a non-empty endpoint and model")


@dataclass
class ConversationState:
    """Session id plus append-only (question, answer) turns.

    When ``journal_path`` is set, each completed turn is also appended to
    that file as one JSON line.
    """

    session_id: str
    turns: list[tuple[str, str]] = field(default_factory=list)
    journal_path: str | Path | None = None

    def append_turn(self, question: str, answer: str) -> None:
        self.turns.append((question, answer))
        if self.journal_path:
            record = {
                "session_id": self.session_id,
                "turn": len(self.turns),
                "question": question,
                "answer": answer,
            }
            with open(self.journal_path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(record, ensure_ascii=False) + "\n")

    def history(self, window: int = HISTORY_WINDOW) -> list[tuple[str, str]]:
        """The last ``window`` completed Q/A pairs, oldest first."""
        return self.turns[-window:] if window > 0 else []


@dataclass
class GroundedAnswer:
    response: str
    doc_ids: list[str]
    rewritten_query: str


def format_history(pairs: Sequence[tuple[str, str]]) -> str:
    return "\n".join(f"Q: {q}\nA: {a}" for q, a in pairs)


def render_rewrite_prompt(history_pairs: Sequence[tuple[str, str]], question: str) -> str:
    return REWRITE_PROMPT_TEMPLATE.format(
        history_text=format_history(history_pairs),
        user_question=question,
    )


def render_generation_prompt(
    history_pairs: Sequence[tuple[str, str]],
    parent_texts: Sequence[str],
    question: str,
) -> str:
    """Assemble the generation prompt; the history block is omitted entirely
    when there are no completed turns."""
    parts = [_GENERATION_PROMPT_HEAD]
    if history_pairs:
        parts.append("Conversation History:\n" + format_history(history_pairs))
    if parent_texts:
        context = "\n".join(f"[{i}] {text}" for i, text in enumerate(parent_texts, 1))
    else:
        context = "(none)"
    parts.append("Retrieved Background Knowledge:\n" + context)
    parts.append(f"Current User Question: {question}")
    parts.append(_GENERATION_TRIGGER)
    return "\n\n".join(parts)


class StubRewriteProvider:
    """Identity rewriter: the question comes back unchanged."""

    def rewrite(self, prompt: str, question: str) -> str:
        return question


class StubGenerationProvider:
    """Offline generator: abstains without context, otherwise names its grounding."""

    def generate(self, prompt: str, parent_ids: Sequence[str]) -> str:
        if not parent_ids:
            return ABSTENTION_RESPONSE
        return "(stub) Answer grounded in retrieved documents: " + ",".join(parent_ids)


class RemoteTextProvider:
    """Chat-style HTTP text provider used for both rewriting and generation.

    Request: ``{model, messages: [{role: user, content}], temperature,
    max_tokens}``. Response: ``{"text": ...}``. Failures are retried up to
    ``config.retries`` times before a ProviderError carrying the attempt
    count is raised.
    """

    def __init__(self, config: TextProviderConfig, session=None):
        config.validate()
        if config.kind != "remote":
            raise ValueError("RemoteTextProvider requires kind='remote'")
        self.config = config
        if session is None:
            import requests

            session = requests.Session()
        self._session = session

    def _complete(self, prompt: str) -> str:
        payload = {
            "model": self.config.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_tokens,
        }
        headers = {}
        api_key = os.environ.get(self.config.api_key_env, "")
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        attempts = 0
        last_error: Exception | None = None
        while attempts <= self.config.retries:
            attempts += 1
            try:
                response = self._session.post(
                    self.config.endpoint, json=payload, headers=headers, timeout=self.config.timeout
                )
                status = getattr(response, "status_code", 200)
                if status >= 400:
                    raise ProviderError(f"text endpoint returned HTTP {status}", attempts)
                body = response.json()
            except Exception as exc:
                last_error = exc
                logger.warning("text request failed (attempt %d): %s", attempts, exc)
                continue
            text = body.get("text")
            if not isinstance(text, str):
                raise ValueError("text provider response must carry a string 'text' field")
            return text
        raise ProviderError(f"text provider failed after {attempts} attempts: {last_error}", attempts)

    def rewrite(self, prompt: str, question: str) -> str:
        return self._complete(prompt)

    def generate(self, prompt: str, parent_ids: Sequence[str]) -> str:
        return self._complete(prompt)


def make_rewrite_provider(config: TextProviderConfig, session=None) -> RewriteProvider:
    config.validate()
    if config.kind == "stub":
        return StubRewriteProvider()
    return RemoteTextProvider(config, session=session)


def make_generation_provider(config: TextProviderConfig, session=None) -> GenerationProvider:
    config.validate()
    if config.kind == "stub":
        return StubGenerationProvider()
    return RemoteTextProvider(config, session=session)


def rewrite_query(
    state: ConversationState,
    question: str,
    provider: RewriteProvider,
    history_window: int = HISTORY_WINDOW,
) -> str:
    """Turn a context-dependent question into a standalone query.

    On a session's first turn the question is returned verbatim and the
    provider is never invoked. A provider failure falls back to the original
    question with a warning; retrieval must not abort because a rewrite was
    unavailable.
    """
    if not question or not question.strip():
        raise ValueError("question must be non-empty")
    if not state.turns:
        return question
    prompt = render_rewrite_prompt(state.history(history_window), question)
    try:
        output = provider.rewrite(prompt, question)
    except Exception as exc:
        logger.warning("query rewrite failed, using original question: %s", exc)
        return question
    lines = [line for line in output.strip().splitlines() if line.strip()]
    return lines[0].strip() if lines else question


def generate_answer(
    state: ConversationState,
    query: str,
    parents: Sequence[tuple[str, str]],
    provider: GenerationProvider,
    history_window: int = HISTORY_WINDOW,
) -> GroundedAnswer:
    """Generate a grounded response over ranked (parent_id, text) context.

    ``parents`` may be empty; that is the abstention path. The returned
    doc_ids mirror the parent order exactly.
    """
    parent_ids = [pid for pid, _ in parents]
    prompt = render_generation_prompt(
        state.history(history_window), [text for _, text in parents], query
    )
    try:
        response = provider.generate(prompt, parent_ids)
    except Exception as exc:
        prompt_hash = hashlib.sha256(prompt.encode("utf-8")).hexdigest()
        raise GenerationError(
            f"generation failed ({exc}); prompt sha256={prompt_hash}", prompt_hash
        ) from exc
    if not response or not response.strip():
        prompt_hash = hashlib.sha256(prompt.encode("utf-8")).hexdigest()
        raise GenerationError(
            f"provider returned an empty response; prompt sha256={prompt_hash}", prompt_hash
        )
    return GroundedAnswer(response=response, doc_ids=parent_ids, rewritten_query=query)


def answer_question(
    state: ConversationState,
    question: str,
    pipeline,
    rewriter: RewriteProvider,
    generator: GenerationProvider,
    hybrid=None,
    ranking=None,
    history_window: int = HISTORY_WINDOW,
):
    """Full query-time path without mutating the session: rewrite, retrieve,
    rank, generate. Returns (GroundedAnswer, parent hits)."""
    query = rewrite_query(state, question, rewriter, history_window=history_window)
    hits = pipeline.rank(query, hybrid=hybrid, ranking=ranking)
    parents = [(h.parent_id, pipeline.parent_text(h.parent_id)) for h in hits]
    answer = generate_answer(state, query, parents, generator, history_window=history_window)
    return answer, hits


def run_turn(
    state: ConversationState,
    question: str,
    pipeline,
    rewriter: RewriteProvider,
    generator: GenerationProvider,
    hybrid=None,
    ranking=None,
    history_window: int = HISTORY_WINDOW,
) -> GroundedAnswer:
    """Answer one user turn and append it to the session.

    Any hard error from a pipeline stage aborts the turn before the append,
    so failed turns never pollute the history. An abstention is a successful
    turn.
    """
    answer, _ = answer_question(
        state, question, pipeline, rewriter, generator,
        hybrid=hybrid, ranking=ranking, history_window=history_window,
    )
    state.append_turn(question, answer.response)
    return answer


@dataclass
class Conversation:
    conversation_id: str
    turns: list[tuple[str, str]]  # (role, text)


def read_conversations_file(path: str | Path) -> tuple[list[Conversation], list[str]]:
    """Parse a conversations JSON file (a list of conversation objects).

    Returns (conversations, per-record errors). Records with a missing id,
    a malformed turn list, or an unknown role are reported and skipped;
    a file that is not a JSON list at the top level raises ValueError.
    """
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, list):
        raise ValueError("conversations file must be a JSON list")
    conversations: list[Conversation] = []
    errors: list[str] = []
    for i, entry in enumerate(data):
        if not isinstance(entry, dict) or not isinstance(entry.get("conversation_id"), str):
            errors.append(f"record {i}: missing conversation_id")
            continue
        cid = entry["conversation_id"]
        raw_turns = entry.get("turns")
        if not isinstance(raw_turns, list):
            errors.append(f"record {i} ({cid}): turns must be a list")
            continue
        turns: list[tuple[str, str]] = []
        bad = False
        for j, turn in enumerate(raw_turns):
            role = turn.get("role") if isinstance(turn, dict) else None
            text = turn.get("text") if isinstance(turn, dict) else None
            if role not in ("user", "assistant") or not isinstance(text, str):
                errors.append(f"record {i} ({cid}): turn {j} needs role user|assistant and text")
                bad = True
                break
            turns.append((role, text))
        if not bad:
            conversations.append(Conversation(conversation_id=cid, turns=turns))
    return conversations, errors


@dataclass
class ReplayResult:
    submission: list[dict]
    run: dict[str, list[tuple[str, float]]]
    failures: list[str]


def replay_conversations(
    conversations: Sequence[Conversation],
    pipeline,
    rewriter: RewriteProvider,
    generator: GenerationProvider,
    hybrid=None,
    ranking=None,
    final_only: bool = True,
    seed_history: str = "generated",
    history_window: int = HISTORY_WINDOW,
) -> ReplayResult:
    """Replay batch conversations, issuing each user turn through the pipeline.

    Gold assistant turns are ignored except when ``seed_history='gold'``, in
    which case they replace the system's own answers in the history seen by
    later turns. Every user turn gets a run-file entry keyed
    ``{conversation_id}_t{ordinal}``; submission records cover the final
    user turn only unless ``final_only`` is False. Failed conversations are
    reported and skipped; the rest of the batch continues.
    """
    if seed_history not in ("generated", "gold"):
        raise ValueError("seed_history must be 'generated' or 'gold'")
    submission: list[dict] = []
    run: dict[str, list[tuple[str, float]]] = {}
    failures: list[str] = []
    for conversation in conversations:
        state = ConversationState(session_id=conversation.conversation_id)
        records: list[dict] = []
        try:
            ordinal = 0
            for t, (role, text) in enumerate(conversation.turns):
                if role != "user":
                    continue
                ordinal += 1
                answer, hits = answer_question(
                    state, text, pipeline, rewriter, generator,
                    hybrid=hybrid, ranking=ranking, history_window=history_window,
                )
                run[f"{conversation.conversation_id}_t{ordinal}"] = [
                    (h.parent_id, h.score) for h in hits
                ]
                records.append(
                    {
                        "conversation_id": conversation.conversation_id,
                        "response": answer.response,
                        "documents": list(answer.doc_ids),
                    }
                )
                gold = None
                if seed_history == "gold" and t + 1 < len(conversation.turns):
                    next_role, next_text = conversation.turns[t + 1]
                    if next_role == "assistant":
                        gold = next_text
                state.append_turn(text, gold if gold is not None else answer.response)
        except Exception as exc:
            logger.warning("conversation %s failed: %s", conversation.conversation_id, exc)
            failures.append(f"{conversation.conversation_id}: {exc}")
            continue
        if records:
            submission.extend(records[-1:] if final_only else records)
    return ReplayResult(submission=submission, run=run, failures=failures)


def write_submission_file(path: str | Path, records: Sequence[dict]) -> None:
    """One JSON object per line: {conversation_id, response, documents}."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for record in records:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
