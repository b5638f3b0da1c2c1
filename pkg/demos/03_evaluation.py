"""Metric behavior on hand-checkable cases, then a full report.

Run: python demos/03_evaluation.py
"""

import math

from hiret import evaluate_run, ndcg_at_k, recall_at_k

# A ranking with the two relevant docs at positions 1 and 3.
ranking = ["A", "B", "C"]
rels = {"A": 1, "C": 1}

print("ranking:", ranking, " judgments:", rels)
for k in (1, 3, 5):
    print(f"  ndcg@{k} = {ndcg_at_k(ranking, rels, k):.4f}   "
          f"recall@{k} = {recall_at_k(ranking, rels, k):.4f}")

# The nDCG@3 value decomposed by hand:
dcg = 1.0 + 0.0 + 1.0 / math.log2(4)
idcg = 1.0 + 1.0 / math.log2(3)
print(f"  by hand: DCG={dcg:.4f}, ideal DCG={idcg:.4f}, ratio={dcg / idcg:.4f}")

# Graded judgments separate the two gain conventions.
graded = {"X": 2, "Y": 1}
print("\ngraded ranking [Y, X]:")
print(f"  exponential gain: {ndcg_at_k(['Y', 'X'], graded, 2):.4f}")
print(f"  linear gain:      {ndcg_at_k(['Y', 'X'], graded, 2, gain='linear'):.4f}")

# A small run against qrels, including one query the run missed entirely
# (it scores zero rather than being skipped) and one unjudged run query.
qrels = {
    "q1": {"docA": 1, "docB": 1},
    "q2": {"docC": 1},
    "q3": {"docD": 1},
}
run = {
    "q1": [("docA", 0.9), ("docX", 0.5), ("docB", 0.3)],
    "q2": [("docY", 0.8), ("docC", 0.6)],
    "unjudged": [("docZ", 1.0)],
}
report = evaluate_run(run, qrels)
print("\nper-query report:")
for qid in sorted(report.per_query):
    metrics = report.per_query[qid]
    print(f"  {qid}: ndcg@5={metrics['ndcg@5']:.4f} recall@5={metrics['recall@5']:.4f}")
print("means over all judged queries:")
for name in ("ndcg@1", "ndcg@3", "ndcg@5", "recall@1", "recall@3", "recall@5"):
    print(f"  {name} = {report.means[name]:.4f}")
print(f"run queries without judgments (ignored): {report.ignored_queries}")
