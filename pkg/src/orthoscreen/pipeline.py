"""End-to-end orchestration: cloud -> labels -> estimates -> assessment.

The constraint side of the assessment consumes whatever tooth records
the segmentation produced; crowding and symmetry always read the case's
landmark-derived geometry, which is fixed at planning time.
"""

import hashlib
import json

import numpy as np

from .constraints import KnowledgeBase, default_knowledge_base, records_from_case
from .lifting import lift, records_from_estimates
from .scoring import WavfConfig, build_assessment
from .segnet import predict_labels


def config_digest(kb: KnowledgeBase, wavf: WavfConfig) -> str:
    """Digest over everything that shapes an assessment, for staleness checks."""
    payload = {
        "kb_version": kb.version,
        "alpha": kb.alpha,
        "rules": [
            [r.rule_id, list(r.components), r.teeth, r.limit, r.unit, r.kind]
            for r in kb.rules
        ],
        "predictability": dict(sorted(kb.predictability.items())),
        "weights": list(wavf.weights),
        "grade_thresholds": [[t, g] for t, g in wavf.grade_thresholds],
    }
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def analyze_case(case, cloud, plan, kb=None, wavf=None, model=None, use_gt_labels=False):
    """Full assessment for one case; returns (report, evaluation, estimates).

    With a model, labels come from eval-mode inference on the cloud's
    features; with ``use_gt_labels`` (or no model) the cloud's stored
    labels stand in, exercising everything but the network.
    """
    kb = kb or default_knowledge_base()
    wavf = wavf or WavfConfig()
    if model is not None and not use_gt_labels:
        pred, probs = predict_labels(model, [cloud])[0]
        labels, source = pred, "model"
    else:
        labels, probs, source = cloud.labels.astype(np.int64), None, "ground-truth"

    estimates, dropped = lift(cloud.positions, labels, probs)
    records = records_from_estimates(estimates)
    arch_records = records_from_case(case)
    report, evaluation = build_assessment(
        case.case_id, records, plan, kb, wavf, arch_records=arch_records)
    report["segmentation"] = {
        "source": source,
        "estimates": [est.as_dict() for est in estimates],
        "dropped": {str(cls): count for cls, count in sorted(dropped.items())},
    }
    report["kb_version"] = kb.version
    report["config_digest"] = config_digest(kb, wavf)
    return report, evaluation, estimates
