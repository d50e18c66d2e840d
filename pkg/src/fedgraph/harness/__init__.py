"""Metrics, experiment configuration, runners and the command-line interface.

Only the metrics are re-exported here: the runners depend on the federation
stack, which itself imports the metrics. Import them from
``fedgraph.harness.config``, ``fedgraph.harness.experiments`` and
``fedgraph.harness.cli``.
"""

from .metrics import MetricsReport, auc_score, compute_metrics
