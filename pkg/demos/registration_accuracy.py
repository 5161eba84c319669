"""Compare the three registration pipelines on generated warp sequences and
print the correct-match-rate table.

    python3 demos/registration_accuracy.py [kind ...]     # kinds: rotation scale blur light

Each sequence is one base image plus five warped copies with exact
ground-truth homographies. Expect a few minutes for all four kinds.
"""
import sys

from panoforge import regeval, synthetic
from panoforge.registration import PipelineConfig

kinds = sys.argv[1:] or ["rotation", "scale"]
pipelines = [
    PipelineConfig(descriptor="brief", filter="ransac"),
    PipelineConfig(descriptor="brief", filter="gms"),
    PipelineConfig(descriptor="freak", filter="gms"),
]

reports = []
for kind in kinds:
    seq = synthetic.warp_sequence(kind)
    for cfg in pipelines:
        reports.append(regeval.evaluate_sequence(seq, cfg))
        print(f"{kind:>8} {cfg.label:>10}: {reports[-1].average:.2f}", flush=True)

print()
print(regeval.format_table(reports))
