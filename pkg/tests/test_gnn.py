from __future__ import annotations

import math

import numpy as np
import pytest

from fedgraph.errors import ConfigError, DimensionError
from fedgraph.gnn import (
    AdamState,
    GATLayerParams,
    Hyperparams,
    LocalData,
    ModelParams,
    ModelSpec,
    TrainReport,
    adam_step,
    attention_coefficients,
    build_view,
    gat_layer_forward,
    gradient,
    init_params,
    load_params,
    local_loss,
    local_train,
    model_forward,
    save_params,
)

SLOPE = 0.2


def _lrelu(x):
    return x if x > 0 else SLOPE * x


def _fixture(n, n_edges, d_in, d_e, seed):
    rng = np.random.default_rng(seed)
    pairs = set()
    while len(pairs) < n_edges:
        u, v = (int(t) for t in rng.choice(n, 2, replace=False))
        if (u, v) not in pairs and (v, u) not in pairs:
            pairs.add((u, v))
    pairs = sorted(pairs)
    x = rng.normal(size=(n, d_in))
    attr = rng.normal(size=(len(pairs), d_e))
    view = build_view(x, [p[0] for p in pairs], [p[1] for p in pairs], attr)
    return rng, pairs, x, attr, view


def _neighbours(n, pairs, attr, d_e):
    """node -> list of (neighbour, edge feature), self first with a zero feature."""
    nb = {i: [(i, [0.0] * d_e)] for i in range(n)}
    for (u, v), z in zip(pairs, attr):
        nb[u].append((v, list(z)))
        nb[v].append((u, list(z)))
    return nb


def _oracle_layer(W, a, h, nb, final):
    """Scalar loops over heads, nodes and neighbours."""
    heads, out, din = len(W), len(W[0]), len(W[0][0])
    n = len(h)
    proj = [[[sum(W[k][o][c] * h[i][c] for c in range(din)) for o in range(out)] for i in range(n)]
            for k in range(heads)]
    alphas = {}
    per_head = []
    for k in range(heads):
        agg = []
        for i in range(n):
            raw = []
            for j, z in nb[i]:
                s = sum(a[k][o] * proj[k][i][o] for o in range(out))
                s += sum(a[k][out + o] * proj[k][j][o] for o in range(out))
                s += sum(a[k][2 * out + e] * z[e] for e in range(len(z)))
                raw.append(_lrelu(s))
            m = max(raw)
            ex = [math.exp(r - m) for r in raw]
            tot = sum(ex)
            al = [e / tot for e in ex]
            for (j, _), w in zip(nb[i], al):
                alphas[(k, j, i)] = w
            agg.append([sum(w * proj[k][j][o] for (j, _), w in zip(nb[i], al)) for o in range(out)])
        per_head.append(agg)
    if final:
        z = [[sum(per_head[k][i][o] for k in range(heads)) / heads for o in range(out)] for i in range(n)]
    else:
        z = [[per_head[k][i][o] for k in range(heads) for o in range(out)] for i in range(n)]
    return [[_lrelu(v) for v in row] for row in z], alphas


# --- attention coefficients ------------------------------------------------------

def test_single_neighbour_no_self_loop_gets_weight_one():
    view = build_view(np.ones((2, 3)), [0], [1], np.zeros((1, 2)), self_loops=False, symmetric=False)
    rng = np.random.default_rng(0)
    layer = GATLayerParams(rng.normal(size=(1, 4, 3)), rng.normal(size=(1, 10)))
    alpha = attention_coefficients(layer, view.x, view)
    assert alpha.shape == (1, 1)
    assert alpha[0, 0] == pytest.approx(1.0)


def test_identical_neighbours_split_evenly():
    view = build_view(np.ones((3, 2)), [1, 2], [0, 0], np.ones((2, 2)), self_loops=False, symmetric=False)
    rng = np.random.default_rng(1)
    layer = GATLayerParams(rng.normal(size=(2, 3, 2)), rng.normal(size=(2, 8)))
    alpha = attention_coefficients(layer, view.x, view)
    np.testing.assert_allclose(alpha, 0.5, atol=1e-15)


def test_attention_matches_scalar_oracle():
    rng, pairs, x, attr, view = _fixture(4, 4, 3, 2, seed=7)
    W = rng.normal(size=(2, 3, 3))
    a = rng.normal(size=(2, 8))
    alpha = attention_coefficients(GATLayerParams(W, a), x, view)
    _, oracle = _oracle_layer(W.tolist(), a.tolist(), x.tolist(), _neighbours(4, pairs, attr, 2), False)
    for k in range(2):
        for e, (j, i) in enumerate(zip(view.src, view.dst)):
            assert abs(alpha[k, e] - oracle[(k, int(j), int(i))]) <= 1e-12
    # rows sum to one per destination
    for k in range(2):
        np.testing.assert_allclose(np.bincount(view.dst, alpha[k]), 1.0, atol=1e-12)


def test_attention_dimension_mismatch():
    _, _, x, _, view = _fixture(4, 3, 3, 2, seed=0)
    layer = GATLayerParams(np.ones((1, 2, 5)), np.ones((1, 6)))
    with pytest.raises(DimensionError):
        attention_coefficients(layer, x, view)


# --- layer and model -------------------------------------------------------------

def test_zero_weights_give_zero_output():
    _, _, x, _, view = _fixture(5, 5, 3, 2, seed=2)
    layer = GATLayerParams(np.zeros((2, 4, 3)), np.zeros((2, 10)))
    assert np.all(gat_layer_forward(layer, x, view) == 0)


def test_single_self_looped_node():
    W = np.array([[[2.0, -1.0], [0.5, 3.0]]])
    view = build_view(np.array([[1.0, 2.0]]), [], [], np.zeros((0, 1)))
    out = gat_layer_forward(GATLayerParams(W, np.ones((1, 5))), view.x, view, final=True)
    wh = W[0] @ np.array([1.0, 2.0])
    np.testing.assert_allclose(out[0], np.where(wh > 0, wh, SLOPE * wh))


def test_layer_matches_scalar_oracle():
    rng, pairs, x, attr, view = _fixture(5, 6, 3, 2, seed=11)
    W = rng.normal(size=(2, 4, 3))
    a = rng.normal(size=(2, 10))
    nb = _neighbours(5, pairs, attr, 2)
    for final in (False, True):
        got = gat_layer_forward(GATLayerParams(W, a), x, view, final=final)
        want, _ = _oracle_layer(W.tolist(), a.tolist(), x.tolist(), nb, final)
        np.testing.assert_allclose(got, np.array(want), atol=1e-12, rtol=0)


def test_zero_model_outputs_one_half():
    _, _, x, _, view = _fixture(5, 4, 3, 2, seed=3)
    params = ModelParams.zeros(ModelSpec(3, 2, 4, 2, 2))
    np.testing.assert_array_equal(model_forward(params, view), 0.5)


def test_eval_is_deterministic():
    rng, _, _, _, view = _fixture(6, 7, 3, 2, seed=4)
    params = init_params(ModelSpec(3, 2, 4, 2, 3), rng)
    np.testing.assert_array_equal(model_forward(params, view), model_forward(params, view))


def test_model_matches_layered_oracle():
    rng, pairs, x, attr, view = _fixture(5, 6, 3, 2, seed=5)
    spec = ModelSpec(3, 2, hidden_dim=3, heads=2, n_layers=3)
    params = init_params(spec, rng)
    params = params.replace(params.vector + rng.normal(scale=0.3, size=spec.size))
    nb = _neighbours(5, pairs, attr, 2)
    h = x.tolist()
    for l in range(3):
        layer = params.layer(l)
        h, _ = _oracle_layer(layer.W.tolist(), layer.a.tolist(), h, nb, l == 2)
    logits = [sum(w * v for w, v in zip(params.head_w, row)) + params.head_b for row in h]
    want = [1.0 / (1.0 + math.exp(-z)) for z in logits]
    np.testing.assert_allclose(model_forward(params, view), want, atol=1e-10, rtol=0)


def test_train_mode_needs_rng_for_dropout():
    rng, _, _, _, view = _fixture(4, 3, 3, 2, seed=6)
    params = init_params(ModelSpec(3, 2, 4, 1, 2), rng)
    with pytest.raises(ConfigError):
        model_forward(params, view, "train", dropout=0.5)


# --- loss --------------------------------------------------------------------------

def test_confident_correct_predictions_reach_clamp():
    view = build_view(np.array([[1.0], [1.0]]), [], [], np.zeros((0, 1)))
    spec = ModelSpec(1, 1, hidden_dim=1, heads=1, n_layers=1)
    # logit = 100 * LeakyReLU(h) + b with h = 1 for both nodes
    vec = np.zeros(spec.size)
    vec[0] = 1.0              # W
    vec[-2], vec[-1] = 100.0, 0.0
    params = ModelParams(spec, vec)
    loss = local_loss(params, None, view, np.array([1, 1]), 0.0)
    assert 0 < loss < 1e-6
    assert loss == pytest.approx(-math.log(1 - 1e-7), rel=1e-6)


def test_proximal_term_vanishes_at_global():
    rng, _, _, _, view = _fixture(4, 3, 3, 2, seed=8)
    params = init_params(ModelSpec(3, 2, 4, 2, 2), rng)
    y = np.array([0, 1, 0, 1])
    assert local_loss(params, params, view, y, 0.7) == local_loss(params, None, view, y, 0.0)


def test_three_node_loss_by_hand():
    rng, _, _, _, view = _fixture(3, 2, 2, 1, seed=9)
    spec = ModelSpec(2, 1, hidden_dim=2, heads=1, n_layers=1)
    p = init_params(spec, rng)
    g = init_params(spec, rng)
    y = [1, 0, 1]
    probs = model_forward(p, view)
    ce = -sum(math.log(q) if t else math.log(1 - q) for q, t in zip(probs, y)) / 3
    sq = sum((a - b) ** 2 for a, b in zip(p.vector, g.vector))
    assert local_loss(p, g, view, np.array(y), 0.1) == pytest.approx(ce + 0.1 * sq, rel=1e-12)


def test_unlabeled_only_is_an_error():
    rng, _, _, _, view = _fixture(3, 2, 2, 1, seed=9)
    p = init_params(ModelSpec(2, 1, 2, 1, 1), rng)
    with pytest.raises(ConfigError):
        local_loss(p, None, view, np.array([-1, -1, -1]), 0.0)


# --- gradient ------------------------------------------------------------------------

def test_stationary_point_head_bias_gradient_zero():
    rng, _, _, _, view = _fixture(4, 3, 3, 2, seed=10)
    spec = ModelSpec(3, 2, 4, 2, 2)
    p = init_params(spec, rng)
    vec = p.flatten()
    vec[-spec.hidden_dim - 1:] = 0.0  # zero head: every logit is 0
    g = gradient(ModelParams(spec, vec), None, view, np.array([1, 0, 1, 0]), 0.0)
    assert g[-1] == 0.0


def test_proximal_gradient_is_two_lambda_diff():
    rng, _, _, _, view = _fixture(4, 3, 3, 2, seed=12)
    spec = ModelSpec(3, 2, 4, 2, 2)
    p, gl = init_params(spec, rng), init_params(spec, rng)
    y = np.array([1, 0, 1, 0])
    diff = gradient(p, gl, view, y, 0.3) - gradient(p, gl, view, y, 0.0)
    np.testing.assert_allclose(diff, 2 * 0.3 * (p.vector - gl.vector), atol=1e-15, rtol=1e-12)


def _fd_check(params, global_params, view, y, lam, rng, n_coords=100, ghosts=None, uniform=False, h=1e-5):
    g = gradient(params, global_params, view, y, lam, ghosts=ghosts, uniform_attention=uniform)
    worst = 0.0
    for i in rng.choice(params.spec.size, n_coords, replace=False):
        e = np.zeros(params.spec.size)
        e[i] = h
        f = lambda v: local_loss(params.replace(v), global_params, view, y, lam,  # noqa: E731
                                 ghosts=ghosts, uniform_attention=uniform)
        fd = (f(params.vector + e) - f(params.vector - e)) / (2 * h)
        worst = max(worst, abs(fd - g[i]) / max(abs(fd), abs(g[i]), 1e-6))
    return worst


@pytest.mark.parametrize("lam", [0.0, 0.1])
def test_gradient_matches_finite_differences(lam):
    rng, _, _, _, view = _fixture(4, 4, 3, 2, seed=13)
    spec = ModelSpec(3, 2, 4, 2, 3)
    assert _fd_check(init_params(spec, rng), init_params(spec, rng), view,
                     np.array([1, 0, 0, 1]), lam, rng) <= 1e-4


def test_gradient_with_ghosts_and_uniform_attention():
    rng = np.random.default_rng(14)
    x = rng.normal(size=(5, 3))
    view = build_view(x, [0, 1, 2, 3], [1, 2, 3, 4], rng.normal(size=(4, 2)),
                      ghost_dst=[0, 3], ghost_src=[0, 1], ghost_attr=rng.normal(size=(2, 2)), n_ghost=2)
    spec = ModelSpec(3, 2, 4, 2, 3)
    ghosts = [rng.normal(size=(2, 2, 4)) for _ in range(3)]
    y = np.array([1, 0, -1, 1, 0])
    for uniform in (False, True):
        assert _fd_check(init_params(spec, rng), init_params(spec, rng), view, y, 0.1, rng,
                         ghosts=ghosts, uniform=uniform) <= 1e-4


# --- local training -------------------------------------------------------------------

def _train_setup(seed=15):
    rng, _, _, _, view = _fixture(10, 14, 3, 2, seed=seed)
    spec = ModelSpec(3, 2, 4, 2, 2)
    y = (view.x[:, 0] > 0).astype(int)
    return rng, view, spec, init_params(spec, rng), y


def test_zero_epochs_or_zero_lr_leave_params():
    rng, view, spec, p, y = _train_setup()
    for hyper in (Hyperparams(local_epochs=0), Hyperparams(learning_rate=0.0, weight_decay=0.0, local_epochs=3)):
        out = local_train(LocalData(view, y), p, hyper, np.random.default_rng(0))
        np.testing.assert_array_equal(out.vector, p.vector)


def test_training_lowers_local_loss():
    rng, view, spec, p, y = _train_setup()
    hyper = Hyperparams(hidden_dim=4, heads=2, n_layers=2, local_epochs=5, learning_rate=0.01, dropout=0.0,
                        batch_size=4)
    before = local_loss(p, p, view, y, hyper.proximal_lambda)
    report = TrainReport()
    out = local_train(LocalData(view, y), p, hyper, np.random.default_rng(1), report)
    assert local_loss(out, p, view, y, hyper.proximal_lambda) < before
    assert len(report.losses) == 5 and report.steps > 0


def test_adam_step_matches_hand_update():
    st = AdamState.zeros(2)
    theta = adam_step(np.array([1.0, -1.0]), np.array([0.5, -2.0]), st, lr=0.1, weight_decay=0.01)
    # the first bias-corrected step moves each coordinate by lr * sign(g) (up to eps)
    np.testing.assert_allclose(theta, [1.0 - 0.1 - 0.001, -1.0 + 0.1 + 0.001], atol=1e-7)
    assert st.t == 1


# --- checkpoint ------------------------------------------------------------------------

def test_checkpoint_roundtrip(tmp_path):
    rng = np.random.default_rng(16)
    p = init_params(ModelSpec(15, 8, 8, 2, 3), rng)
    save_params(p, tmp_path / "ck")
    back = load_params(tmp_path / "ck")
    assert back.spec == p.spec
    np.testing.assert_array_equal(back.vector, p.vector)
