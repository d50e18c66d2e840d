"""Local optimisation: minibatch AdamW on the proximal loss."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DivergenceError
from .model import local_loss, loss_and_gradient
from .params import Hyperparams, ModelParams
from .view import GraphView


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros(cls, size):
        return cls(np.zeros(size), np.zeros(size))


@dataclass
class LocalData:
    """What a client trains on: its view, per-node labels (-1 = unlabeled) and ghost messages."""

    view: GraphView
    labels: np.ndarray
    ghosts: list | None = None
    uniform_attention: bool = False
    client_id: int | None = None
    optimizer: AdamState | None = None


def adam_step(theta, grad, state: AdamState, lr, weight_decay=0.0):
    """One AdamW update. Returns the new parameter vector; ``state`` is updated in place."""
    state.t += 1
    state.m = state.beta1 * state.m + (1 - state.beta1) * grad
    state.v = state.beta2 * state.v + (1 - state.beta2) * grad * grad
    m_hat = state.m / (1 - state.beta1 ** state.t)
    v_hat = state.v / (1 - state.beta2 ** state.t)
    return theta - lr * (m_hat / (np.sqrt(v_hat) + state.eps) + weight_decay * theta)


@dataclass
class TrainReport:
    losses: list = field(default_factory=list)  # mean minibatch loss per epoch
    steps: int = 0


def local_train(data: LocalData, global_params: ModelParams, hyper: Hyperparams, rng,
                report: TrainReport | None = None) -> ModelParams:
    """Run ``hyper.local_epochs`` epochs of minibatch AdamW starting at ``global_params``.

    When ``data.optimizer`` is set its moments persist across calls (a
    stateful client); otherwise every call starts from fresh moments.

    Each epoch shuffles the labeled nodes and steps once per batch of
    ``hyper.batch_size`` nodes. The forward pass always covers the whole local
    view; the batch only selects which labels enter the loss.
    """
    theta = global_params.vector.copy()
    if hyper.local_epochs == 0 or hyper.learning_rate == 0:
        return global_params
    labels = np.asarray(data.labels)
    labeled = np.flatnonzero(labels >= 0)
    if labeled.size == 0:
        return global_params
    state = data.optimizer if data.optimizer is not None else AdamState.zeros(theta.size)
    spec = global_params.spec
    for epoch in range(hyper.local_epochs):
        order = labeled[rng.permutation(labeled.size)]
        batch_losses = []
        for start in range(0, order.size, hyper.batch_size):
            batch = order[start:start + hyper.batch_size]
            mask = np.full(labels.shape, -1, dtype=np.int64)
            mask[batch] = labels[batch]
            loss, grad = loss_and_gradient(
                ModelParams(spec, theta), global_params, data.view, mask, hyper.proximal_lambda,
                rng=rng, dropout=hyper.dropout, ghosts=data.ghosts,
                uniform_attention=data.uniform_attention,
            )
            if not (np.isfinite(loss) and np.isfinite(grad).all()):
                raise DivergenceError("non-finite local loss", epoch=epoch, client=data.client_id)
            theta = adam_step(theta, grad, state, hyper.learning_rate, hyper.weight_decay)
            batch_losses.append(loss)
        if not np.isfinite(theta).all():
            raise DivergenceError("non-finite parameters", epoch=epoch, client=data.client_id)
        if report is not None:
            report.losses.append(float(np.mean(batch_losses)))
            report.steps += len(batch_losses)
    return ModelParams(spec, theta)


def evaluate_loss(params, global_params, data: LocalData, lam=0.0):
    return local_loss(params, global_params, data.view, data.labels, lam, ghosts=data.ghosts,
                      uniform_attention=data.uniform_attention)
