"""Walk through ingestion and hybrid retrieval on a tiny corpus.

Shows each stage separately: sentence splitting, sliding-window child
chunks, the two retrieval legs, score fusion, and parent ranking.

Run: python demos/01_chunking_and_search.py
"""

from hiret import (
    Document,
    HashingEmbedder,
    HybridConfig,
    Pipeline,
    chunk_document,
    split_sentences,
)

DOCS = [
    Document(
        "volcano",
        "Volcanoes form where magma reaches the surface. Eruptions eject ash and "
        "lava. Repeated eruptions build the classic cone shape. Dormant volcanoes "
        "can wake after centuries. Monitoring networks watch for tremors.",
        title="How volcanoes form",
    ),
    Document(
        "glacier",
        "Glaciers are rivers of compacted ice. They carve valleys as they move. "
        "Meltwater feeds streams far downhill. Glacier mass is shrinking worldwide.",
        title="Glacier basics",
    ),
    Document(
        "coral",
        "Coral reefs host a quarter of marine species. Polyps secrete the calcium "
        "skeleton of the reef. Warm water causes coral bleaching. Reef recovery "
        "can take decades.",
        title="Coral reefs",
    ),
]

# --- 1. sentence splitting ---------------------------------------------------
doc = DOCS[0]
print("sentences in", doc.doc_id)
for span in split_sentences(doc.text):
    print(f"  [{span.index}] {doc.text[span.start:span.end]}")

# --- 2. child chunks (3-sentence windows, stride 2) ---------------------------
print("\nchild chunks (window=3, stride=2)")
for chunk in chunk_document(doc):
    print(f"  {chunk.chunk_id}: sentences {chunk.first_sentence}..{chunk.last_sentence}")
    print(f"    {chunk.text}")

# --- 3. build the full pipeline ----------------------------------------------
pipeline, stats = Pipeline.build(DOCS, embedder=HashingEmbedder())
print(f"\ningested: {stats.docs} docs, {stats.chunks} chunks")

# --- 4. the two retrieval legs, then fusion ------------------------------------
query = "why do corals turn white in warm water"
query_vec = pipeline.embedder.embed([query])[0]

print(f"\nquery: {query!r}")
print("sparse (BM25) leg:")
for chunk_id, score in pipeline.sparse.search(query, 3):
    print(f"  {chunk_id}: {score:.4f}")
print("dense (cosine) leg:")
for chunk_id, score in pipeline.dense.search(query_vec, 3):
    print(f"  {chunk_id}: {score:.4f}")

print("fused candidates (alpha=0.7 dense share):")
for cand in pipeline.search_children(query, HybridConfig(alpha=0.7, k=5)):
    print(
        f"  {cand.chunk_id}: fused={cand.fused_score:.4f} "
        f"(sparse={cand.sparse_score:.4f}, dense={cand.dense_score:.4f})"
    )

# --- 5. parent ranking ----------------------------------------------------------
print("\ntop parents (child-first strategy):")
for rank, hit in enumerate(pipeline.rank(query), 1):
    print(f"  {rank}. {hit.parent_id}  score={hit.score:.4f}  via {', '.join(hit.chunk_ids)}")
