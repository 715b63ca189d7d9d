"""The two answer-quality metrics: nested-claim recall and coverage score.

Claim extraction and entailment run against scripted judges here, so the
numbers are exact and reproducible; swap in a live provider for real runs.

    python3 demos/04_evaluation_metrics.py
"""

from layoutqa import (
    MockChat,
    MockEmbedder,
    ProviderSet,
    compute_recall,
    coverage_score_from_counts,
    extract_claims,
    judge_coverage,
)

# --- coverage score: categories map to 2/1/0, normalized by the maximum ----
print("coverage score = (2*complete + partial) / (2*total)")
for complete, partial, incorrect in ((96, 427, 23), (194, 339, 13), (200, 334, 12)):
    report = coverage_score_from_counts(complete, partial, incorrect)
    print(f"  complete={complete:3d} partial={partial:3d} incorrect={incorrect:2d} "
          f"-> score {report.rounded_score():.4f}")

# --- nested claim extraction -----------------------------------------------
gold = ("No. While the new regulations generally require quarterly filings, "
        "there are exceptions for small businesses that meet specific criteria.")
scripted = ProviderSet(
    chat=MockChat([
        ("KG:",
         '- ("New regulations", "require", "quarterly filings")\n'
         '- ("Exceptions", "exist for", "small businesses that meet specific criteria")\n'
         '- ("Quarterly filing requirement", "qualified by", '
         '("Exceptions", "apply to", "small businesses"))'),
        ("VERDICTS:", "True\nTrue\nFalse"),
        ("RESPONSE:", "<thought_process>one necessary claim is missing"
                      "</thought_process><decision>PARTIAL</decision>"),
    ]),
    embed=MockEmbedder(dim=8),
)

claims = extract_claims("Are all entities required to file quarterly?", gold, scripted)
print(f"\nextracted {len(claims)} claims from the gold answer:")
for claim in claims:
    print(f"  {claim.render()}")

# --- recall: entailed gold claims / total gold claims -----------------------
generated = "The regulations require quarterly filings, with exceptions for small businesses."
recall = compute_recall(gold, generated, scripted, question="Are all entities required to file quarterly?")
print(f"\nscripted verdicts True,True,False -> recall = {recall:.4f}")

# --- the categorical judge ---------------------------------------------------
category, thought = judge_coverage("Are all entities required to file quarterly?",
                                   gold, generated, scripted)
print(f"coverage judge: {category} ({thought})")
