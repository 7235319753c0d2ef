"""Escalation-risk toolkit for support tickets.

Submodules:
    domain      ticket/escalation data model and labeling
    synthgen    deterministic synthetic corpus generator
    ingest      event-log / CritSit registry files and the corpus index
    featurize   the engineered feature catalog (58 features, presets)
    baseline    last-entry raw-row representation (no feature engineering)
    learner     from-scratch boosted / bagged tree ensembles
    evalharness cross-validation, confusion matrices, PR-space reports
    triage      live triage HTTP service (ER / MER / CER)
    cli         the ``escalade`` command
"""

__version__ = "0.1.0"
