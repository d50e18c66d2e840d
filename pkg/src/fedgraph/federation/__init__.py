"""Federated rounds, aggregation, mixture-of-experts gating and cross-border exchange."""

from .aggregation import combine, fedavg_aggregate, moe_aggregate, project_simplex
from .clients import ClientData, build_clients
from .crossborder import Envelope, KeyRing, cross_border_exchange, exchange_round, open_envelope, seal
from .gating import GatingParams, entropy, gate_weights, moe_loss, moe_loss_grad, moe_predict
from .rounds import (
    FederatedRun,
    RoundConfig,
    RoundRecord,
    ServerState,
    init_state,
    predict,
    run_federated,
    run_round,
    train,
    write_history,
)
