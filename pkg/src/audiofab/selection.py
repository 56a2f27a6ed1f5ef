"""Tool selection: enumeration, lexical retrieval, and budgeted context.

Retrieval is Okapi BM25 (k1=1.2, b=0.75) over a per-tool document built from
the tool's name, instruction, description, and example queries. The idf uses
the ln(1 + ...) form so scores are never negative. Token budgeting uses a
model-free estimate of ceil(utf8_bytes / 4).

Everything here is a pure function of an immutable Registry; concurrent use
is unrestricted.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .registry import Registry, ToolManifest, UsageExample

BM25_K1 = 1.2
BM25_B = 0.75
DEFAULT_K = 5
EXAMPLES_PER_TOOL = 2
CONTEXT_RESERVE_TOKENS = 1024
MIN_BUDGET_TOKENS = 256


class SelectionError(Exception):
    pass


class EmptyRegistry(SelectionError):
    pass


class UnknownTool(SelectionError):
    pass


class BudgetTooSmall(SelectionError):
    pass


def tokenize(text: str) -> list[str]:
    """Lowercase terms split on every non-alphanumeric codepoint."""
    return "".join(
        ch if ch.isalnum() else " " for ch in text.lower()
    ).split()


def estimate_tokens(text: str) -> int:
    """ceil(utf8 bytes / 4): a model-free proxy, not any LLM's tokenizer."""
    n = len(text.encode("utf-8"))
    return -(-n // 4)


@dataclass(frozen=True)
class InstructionListing:
    entries: tuple[tuple[str, str], ...]
    token_estimate: int


@dataclass(frozen=True)
class SelectionResult:
    query: str
    candidates: tuple[tuple[str, float], ...]
    k_requested: int


@dataclass(frozen=True)
class ToolDetail:
    name: str
    instruction: str
    modality: str
    category: str
    parameters: tuple
    examples: tuple[UsageExample, ...]


@dataclass(frozen=True)
class ContextSection:
    name: str
    instruction: str
    schema_text: str
    examples: tuple[UsageExample, ...]
    rendered: str
    token_estimate: int


@dataclass(frozen=True)
class ContextDocument:
    sections: tuple[ContextSection, ...]
    token_estimate: int
    budget: int

    def render(self) -> str:
        return "\n".join(s.rendered for s in self.sections)


def enumerate_instructions(reg: Registry) -> InstructionListing:
    """One (name, instruction) line per tool -- the lightweight listing that
    stands in for the full manifests during planning."""
    entries = tuple((t.name, t.instruction) for t in reg.tools)
    total = sum(estimate_tokens(f"{name}: {instr}") for name, instr in entries)
    return InstructionListing(entries=entries, token_estimate=total)


def tool_document(m: ToolManifest) -> list[str]:
    """The retrieval document for one tool."""
    parts = [m.name, m.instruction, m.description]
    parts.extend(ex.query for ex in m.examples)
    return tokenize(" ".join(parts))


def match_tools(query: str, reg: Registry, k: int = DEFAULT_K) -> SelectionResult:
    """Rank tools against the query by BM25; zero-score tools are dropped,
    ties break by name."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(reg) == 0:
        raise EmptyRegistry("cannot match against an empty registry")
    docs = {t.name: tool_document(t) for t in reg.tools}
    n_docs = len(docs)
    avgdl = sum(len(d) for d in docs.values()) / n_docs
    df: dict[str, int] = {}
    for terms in docs.values():
        for term in set(terms):
            df[term] = df.get(term, 0) + 1
    qterms = tokenize(query)
    scored: list[tuple[float, str]] = []
    for name, terms in docs.items():
        tf: dict[str, int] = {}
        for term in terms:
            tf[term] = tf.get(term, 0) + 1
        dl = len(terms)
        norm = BM25_K1 * (1 - BM25_B + BM25_B * dl / avgdl) if avgdl else BM25_K1
        score = 0.0
        for term in qterms:
            f = tf.get(term)
            if not f:
                continue
            idf = math.log(1 + (n_docs - df[term] + 0.5) / (df[term] + 0.5))
            score += idf * f * (BM25_K1 + 1) / (f + norm)
        if score > 0.0:
            scored.append((score, name))
    scored.sort(key=lambda it: (-it[0], it[1]))
    top = tuple((name, score) for score, name in scored[:k])
    return SelectionResult(query=query, candidates=top, k_requested=k)


def query_parameters(
    reg: Registry, name: str, max_examples: int = EXAMPLES_PER_TOOL
) -> ToolDetail:
    m = reg.get(name)
    if m is None:
        raise UnknownTool(name)
    return ToolDetail(
        name=m.name,
        instruction=m.instruction,
        modality=m.modality,
        category=m.category,
        parameters=m.parameters,
        examples=m.examples[:max_examples],
    )


def render_schema(m: ToolManifest) -> str:
    if not m.parameters:
        return "Parameters: none"
    lines = ["Parameters:"]
    for p in m.parameters:
        req = "required" if p.required else "optional"
        kind = p.type if p.type != "enum" else "enum " + "|".join(p.enum_values)
        lines.append(f"- {p.name} ({kind}, {req}): {p.description}")
    return "\n".join(lines)


def render_section_text(m: ToolManifest, n_examples: int) -> str:
    lines = [f"## {m.name}", m.instruction, render_schema(m)]
    for ex in m.examples[:n_examples]:
        lines.append("Example:")
        lines.append(f"  user: {ex.query}")
        lines.append(
            "  arguments: " + json.dumps(ex.arguments, sort_keys=True)
        )
        lines.append(f"  returns: {ex.expected_output_kind}")
    return "\n".join(lines) + "\n"


def _section(m: ToolManifest, n_examples: int) -> ContextSection:
    rendered = render_section_text(m, n_examples)
    return ContextSection(
        name=m.name,
        instruction=m.instruction,
        schema_text=render_schema(m),
        examples=m.examples[:n_examples],
        rendered=rendered,
        token_estimate=estimate_tokens(rendered),
    )


def build_context(
    query: str,
    sel: SelectionResult,
    reg: Registry,
    budget_tokens: int,
    reserve: int = CONTEXT_RESERVE_TOKENS,
    examples_per_tool: int = EXAMPLES_PER_TOOL,
) -> ContextDocument:
    """Greedy, budget-bounded context assembly in candidate order.

    Each candidate is tried with examples_per_tool examples, then one fewer,
    down to zero; the first form that fits is kept. Assembly stops at the
    first candidate whose zero-example form does not fit. The top candidate
    is always included (with zero examples if need be). The effective budget
    is budget_tokens minus an estimate of the query minus a fixed reply
    reserve, floored at MIN_BUDGET_TOKENS.
    """
    if budget_tokens < MIN_BUDGET_TOKENS:
        raise BudgetTooSmall(
            f"budget_tokens must be >= {MIN_BUDGET_TOKENS}, got {budget_tokens}"
        )
    effective = max(
        MIN_BUDGET_TOKENS, budget_tokens - estimate_tokens(query) - reserve
    )
    sections: list[ContextSection] = []
    used = 0
    for i, (name, _score) in enumerate(sel.candidates):
        m = reg.get(name)
        if m is None:
            raise UnknownTool(name)
        chosen: ContextSection | None = None
        for n in range(examples_per_tool, -1, -1):
            sec = _section(m, n)
            if used + sec.token_estimate <= effective:
                chosen = sec
                break
        if chosen is None:
            if i == 0:
                chosen = _section(m, 0)
            else:
                break
        sections.append(chosen)
        used += chosen.token_estimate
    return ContextDocument(
        sections=tuple(sections),
        token_estimate=sum(s.token_estimate for s in sections),
        budget=effective,
    )
