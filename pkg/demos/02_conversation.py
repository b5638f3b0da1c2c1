"""A multi-turn session with the offline stub providers.

Demonstrates the no-history rewrite short-circuit, the rendered prompts,
grounded answers with their document lists, and the abstention path.

Run: python demos/02_conversation.py
"""

from hiret import (
    ConversationState,
    Document,
    HashingEmbedder,
    Pipeline,
    StubGenerationProvider,
    StubRewriteProvider,
    render_generation_prompt,
    render_rewrite_prompt,
    run_turn,
)

DOCS = [
    Document(
        "lighthouse",
        "The old lighthouse guards the northern cape. Its lamp rotates every "
        "ten seconds. Keepers lived on site until 1974. Automation ended the "
        "keeper era.",
    ),
    Document(
        "ferry",
        "A ferry crosses the strait twice a day. The crossing takes ninety "
        "minutes in calm weather. Winter storms often cancel the service.",
    ),
]

pipeline, _ = Pipeline.build(DOCS, embedder=HashingEmbedder())
rewriter = StubRewriteProvider()
generator = StubGenerationProvider()

state = ConversationState(session_id="demo-session")

# Turn 1: no history yet, so the rewrite provider is never called.
answer = run_turn(state, "who guards the northern cape?", pipeline, rewriter, generator)
print("turn 1 question: who guards the northern cape?")
print("  grounded in:", answer.doc_ids)
print("  response:", answer.response)

# Turn 2: history exists now; the stub rewriter still returns the raw question.
answer = run_turn(state, "how long does the ferry crossing take?", pipeline, rewriter, generator)
print("\nturn 2 grounded in:", answer.doc_ids)
print("  response:", answer.response)

# The prompt a remote rewriter would see for a follow-up question:
print("\n--- rewrite prompt for a follow-up turn ---")
print(render_rewrite_prompt(state.history(), "when did the keepers leave?"))

# And the generation prompt over two ranked parents:
print("\n--- generation prompt ---")
parents = [pipeline.parent_text(pid) for pid in answer.doc_ids[:2]]
print(render_generation_prompt(state.history(), parents, "when did the keepers leave?"))

# Abstention: an empty index yields no parents, and the stub abstains.
from hiret import CorpusStore, DenseIndex, SparseIndex

empty = Pipeline(CorpusStore(), SparseIndex.build([]), DenseIndex.build({}, dim=256),
                 HashingEmbedder())
state2 = ConversationState(session_id="empty-session")
answer = run_turn(state2, "what lives in the abyss?", empty, rewriter, generator)
print("\nabstention path:", answer.response, "| documents:", answer.doc_ids)
