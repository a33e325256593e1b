"""Operator alarm-response analytics and failure-probability prediction.

Pipeline: ingest historian session logs, extract behavioural and
performance metrics, compare support configurations statistically, train
probabilistic failure predictors (independence and tree-augmented discrete
classifiers, stepwise logistic regression), evaluate them under repeated
stratified splits, and serve live posteriors that tolerate missing
evidence.
"""

__version__ = "0.1.0"
