import numpy as np
import pytest

from rwnsgcn.data import SplitMasks
from rwnsgcn.graph import build_graph, sym_normalized_operator
from rwnsgcn.model import (
    TrainConfig,
    adam_step,
    backward,
    forward,
    init_adam_state,
    init_params,
    load_checkpoint,
    loss_cross_entropy,
    predict,
    save_checkpoint,
    train,
)

from conftest import dense_adjacency, random_graph


def ops_for(g, self_loops=True):
    pos = sym_normalized_operator(g, self_loops=self_loops)
    neg = sym_normalized_operator(build_graph(g.num_nodes, []), self_loops=False)
    return pos, neg


def plain_gcn_reference(g, x, weights, self_loops=True):
    """Independent dense forward: relu(A x W) per hidden layer, then A x W."""
    a = dense_adjacency(g)
    if self_loops:
        a = a + np.eye(g.num_nodes)
    d = a.sum(axis=1)
    with np.errstate(divide="ignore"):
        s = np.where(d > 0, 1.0 / np.sqrt(np.where(d > 0, d, 1)), 0.0)
    a_hat = s[:, None] * a * s[None, :]
    h = np.asarray(x)
    for w in weights[:-1]:
        h = np.maximum(a_hat @ (h @ w), 0.0)
    return a_hat @ (h @ weights[-1])


# -------------------------------------------------------------------- init


def test_init_glorot_bound():
    params = init_params([4, 3], lam=0.1, seed=1)
    bound = np.sqrt(6.0 / 7.0)
    assert np.all(np.abs(params.W[0]) <= bound)
    assert np.all(np.abs(params.W_dpp[0]) <= bound)


def test_init_deterministic():
    a = init_params([5, 4, 3], lam=0.1, seed=9)
    b = init_params([5, 4, 3], lam=0.1, seed=9)
    for wa, wb in zip(a.W + a.W_dpp, b.W + b.W_dpp):
        assert np.array_equal(wa, wb)


def test_init_four_layer_shapes():
    params = init_params([1433, 64, 64, 64, 7], lam=0.1, seed=0)
    assert len(params.W) == 4
    assert len(params.W_dpp) == 4
    assert params.W[0].shape == (1433, 64)
    assert params.W[-1].shape == (64, 7)


def test_init_rejects_zero_dim():
    with pytest.raises(ValueError):
        init_params([4, 0, 2], lam=0.1, seed=0)


# ----------------------------------------------------------------- forward


def test_forward_lambda_zero_equals_plain_gcn():
    rng = np.random.default_rng(2)
    g = random_graph(rng, 10, 0.4)
    x = rng.random((10, 5))
    params = init_params([5, 4, 3], lam=0.0, seed=3)
    pos, neg = ops_for(g)
    trace = forward(params, x, pos, neg)
    ref = plain_gcn_reference(g, x, params.W)
    assert np.max(np.abs(trace.logits - ref)) < 1e-9


def test_forward_empty_negative_graph_matches_lambda_zero():
    rng = np.random.default_rng(4)
    g = random_graph(rng, 8, 0.4)
    x = rng.random((8, 5))
    a = init_params([5, 4, 3], lam=0.7, seed=3)
    pos, neg = ops_for(g)  # neg graph empty
    with_branch = forward(a, x, pos, neg)
    a0 = init_params([5, 4, 3], lam=0.0, seed=3)
    without = forward(a0, x, pos, neg)
    assert np.array_equal(with_branch.logits, without.logits)


def test_forward_two_node_hand_computation():
    g = build_graph(2, [(0, 1, 1.0)])
    x = np.array([[1.0, 2.0], [3.0, 4.0]])
    params = init_params([2, 2, 2], lam=0.5, seed=0)
    w0 = np.array([[1.0, -1.0], [0.5, 1.0]])
    w1 = np.array([[1.0, 0.0], [0.0, 1.0]])
    wd0 = np.array([[0.2, 0.1], [-0.3, 0.4]])
    params.W[0], params.W[1], params.W_dpp[0] = w0, w1, wd0
    neg_g = build_graph(2, [(0, 1, 1.0)])
    pos = sym_normalized_operator(g, self_loops=True)
    neg = sym_normalized_operator(neg_g, self_loops=False)
    trace = forward(params, x, pos, neg)

    a_hat = np.full((2, 2), 0.5)
    a_neg = np.array([[0.0, 1.0], [1.0, 0.0]])
    h = np.maximum(a_hat @ (x @ w0), 0) - 0.5 * np.maximum(a_neg @ (x @ wd0), 0)
    expected = a_hat @ (h @ w1)
    assert np.max(np.abs(trace.logits - expected)) < 1e-9


def test_forward_dimension_mismatch():
    g = build_graph(2, [(0, 1, 1.0)])
    params = init_params([3, 2], lam=0.0, seed=0)
    pos, neg = ops_for(g)
    with pytest.raises(ValueError, match="incompatible"):
        forward(params, np.ones((2, 4)), pos, neg)


# -------------------------------------------------------------------- loss


def test_loss_uniform_logits():
    logits = np.zeros((3, 7))
    labels = np.array([0, 3, 6])
    mask = np.arange(3)
    assert loss_cross_entropy(logits, labels, mask) == pytest.approx(np.log(7))


def test_loss_confident_correct_goes_to_zero():
    logits = np.zeros((2, 3))
    logits[0, 1] = 50.0
    logits[1, 2] = 50.0
    labels = np.array([1, 2])
    assert loss_cross_entropy(logits, labels, np.arange(2)) < 1e-8


def test_loss_two_node_hand_value():
    logits = np.array([[1.0, 0.0], [0.0, 1.0]])
    labels = np.array([0, 0])
    expected = 0.5 * (
        -np.log(np.exp(1) / (np.exp(1) + 1)) - np.log(1 / (1 + np.exp(1)))
    )
    got = loss_cross_entropy(logits, labels, np.arange(2))
    assert got == pytest.approx(expected, abs=1e-12)


def test_loss_empty_mask_rejected():
    with pytest.raises(ValueError, match="mask"):
        loss_cross_entropy(np.zeros((2, 2)), np.zeros(2, dtype=int), np.array([], dtype=int))


# ----------------------------------------------------------------- backward


def finite_difference_check(g, dims, lam, seed, mask_frac=0.7, h=1e-4):
    rng = np.random.default_rng(seed)
    n = g.num_nodes
    x = rng.random((n, dims[0]))
    labels = rng.integers(0, dims[-1], size=n)
    mask = rng.choice(n, size=max(1, int(mask_frac * n)), replace=False)
    neg_edges = []
    for _ in range(n):
        u, v = rng.integers(0, n, size=2)
        if u != v:
            neg_edges.append((int(u), int(v), 1.0))
    pos = sym_normalized_operator(g, self_loops=True)
    neg = sym_normalized_operator(build_graph(n, neg_edges), self_loops=False)
    params = init_params(dims, lam=lam, seed=seed, dropout_p=0.0)

    trace = forward(params, x, pos, neg, train_mode=True)
    grads = backward(trace, params, labels, mask)

    def loss_at():
        t = forward(params, x, pos, neg)
        return loss_cross_entropy(t.logits, labels, mask)

    worst = 0.0
    for wlist, glist in ((params.W, grads.dW), (params.W_dpp, grads.dW_dpp)):
        for w, gmat in zip(wlist, glist):
            idx = [tuple(rng.integers(0, s) for s in w.shape) for _ in range(6)]
            for ij in idx:
                orig = w[ij]
                w[ij] = orig + h
                up = loss_at()
                w[ij] = orig - h
                down = loss_at()
                w[ij] = orig
                fd = (up - down) / (2 * h)
                rel = abs(gmat[ij] - fd) / max(abs(gmat[ij]), abs(fd), 1.0)
                worst = max(worst, rel)
    return worst


def test_gradients_match_finite_differences():
    rng = np.random.default_rng(100)
    for trial in range(6):
        n = int(rng.integers(4, 9))
        g = random_graph(rng, n, 0.5)
        worst = finite_difference_check(
            g, [5, 4, 3], lam=float(rng.uniform(0.05, 0.6)), seed=trial
        )
        assert worst < 1e-4


def test_lambda_zero_negative_gradients_are_zero():
    rng = np.random.default_rng(7)
    g = random_graph(rng, 6, 0.5)
    x = rng.random((6, 4))
    labels = rng.integers(0, 3, size=6)
    pos, _ = ops_for(g)
    neg = sym_normalized_operator(build_graph(6, [(0, 3, 1.0)]), self_loops=False)
    params = init_params([4, 4, 3], lam=0.0, seed=1, dropout_p=0.0)
    trace = forward(params, x, pos, neg, train_mode=True)
    grads = backward(trace, params, labels, np.arange(6))
    for gmat in grads.dW_dpp:
        assert np.all(gmat == 0.0)


def test_masked_gradients_ignore_disconnected_unmasked_nodes():
    # two components; mask only touches the first, so logits of the second
    # cannot influence any gradient that feeds the first component
    g = build_graph(6, [(0, 1, 1.0), (1, 2, 1.0), (3, 4, 1.0), (4, 5, 1.0)])
    rng = np.random.default_rng(3)
    x = rng.random((6, 3))
    labels = np.array([0, 1, 0, 1, 0, 1])
    pos, neg = ops_for(g)
    params = init_params([3, 3, 2], lam=0.0, seed=5, dropout_p=0.0)
    mask = np.array([0, 1, 2])
    trace = forward(params, x, pos, neg, train_mode=True)
    base = backward(trace, params, labels, mask)

    x2 = x.copy()
    x2[3:] = rng.random((3, 3))  # perturb only the disconnected component
    trace2 = forward(params, x2, pos, neg, train_mode=True)
    alt = backward(trace2, params, labels, mask)
    for a, b in zip(base.dW, alt.dW):
        assert np.allclose(a, b, atol=1e-12)


# --------------------------------------------------------------------- adam


def test_adam_zero_gradients_keep_params():
    params = init_params([3, 2], lam=0.0, seed=0)
    state = init_adam_state(params, lr=0.01)
    before = [w.copy() for w in params.W]
    from rwnsgcn.model import Gradients

    grads = Gradients(
        dW=[np.zeros_like(w) for w in params.W],
        dW_dpp=[np.zeros_like(w) for w in params.W_dpp],
    )
    adam_step(params, grads, state)
    for w, b in zip(params.W, before):
        assert np.array_equal(w, b)
    assert state.step == 1


def test_adam_constant_gradient_step_approaches_lr():
    params = init_params([1, 1], lam=0.0, seed=0)
    state = init_adam_state(params, lr=0.01)
    from rwnsgcn.model import Gradients

    g = Gradients(dW=[np.full((1, 1), 0.37)], dW_dpp=[np.zeros((1, 1))])
    prev = params.W[0][0, 0]
    for _ in range(200):
        adam_step(params, g, state)
    step = prev - params.W[0][0, 0]
    last = params.W[0][0, 0]
    adam_step(params, g, state)
    assert abs((last - params.W[0][0, 0]) - 0.01) < 1e-4


def test_adam_step_counter_increments():
    params = init_params([2, 2], lam=0.0, seed=0)
    state = init_adam_state(params, lr=0.01)
    from rwnsgcn.model import Gradients

    g = Gradients(dW=[np.ones((2, 2))], dW_dpp=[np.zeros((2, 2))])
    for expected in range(1, 4):
        adam_step(params, g, state)
        assert state.step == expected


# -------------------------------------------------------------------- train


def two_clique_dataset():
    from rwnsgcn.data import Dataset

    edges = []
    for base in (0, 5):
        for i in range(5):
            for j in range(i + 1, 5):
                edges.append((base + i, base + j, 1.0))
    edges.append((4, 5, 1.0))  # bridge
    g = build_graph(10, edges)
    x = np.eye(10)
    labels = np.array([0] * 5 + [1] * 5)
    return Dataset(graph=g, features=x, labels=labels, class_count=2, feature_dim=10)


def two_clique_masks():
    return SplitMasks(
        train=np.array([0, 5]),
        val=np.array([1, 6]),
        test=np.array([2, 3, 4, 7, 8, 9]),
        seed=0,
    )


def test_train_separable_toy_reaches_perfect_accuracy():
    ds = two_clique_dataset()
    masks = two_clique_masks()
    config = TrainConfig(epochs=200, lr=0.01, hidden=16, layers=4, dropout=0.5,
                         lam=0.0, seed=0)
    best, history = train(ds, masks, build_graph(10, []), config)
    pos, neg = ops_for(ds.graph)
    preds, _ = predict(best.params, ds.features, pos, neg)
    assert np.array_equal(preds[masks.test], ds.labels[masks.test])
    assert len(history.train_loss) == 200


def test_train_deterministic_history():
    ds = two_clique_dataset()
    masks = two_clique_masks()
    config = TrainConfig(epochs=30, lr=0.01, hidden=8, layers=3, dropout=0.5,
                         lam=0.0, seed=77)
    _, h1 = train(ds, masks, build_graph(10, []), config)
    _, h2 = train(ds, masks, build_graph(10, []), config)
    assert h1.train_loss == h2.train_loss
    assert h1.val_acc == h2.val_acc


def test_train_aborts_on_nonfinite_loss():
    ds = two_clique_dataset()
    bad = type(ds)(
        graph=ds.graph,
        features=ds.features * np.nan,
        labels=ds.labels,
        class_count=2,
        feature_dim=10,
    )
    masks = two_clique_masks()
    config = TrainConfig(epochs=5, lr=0.01, hidden=4, layers=2, dropout=0.0, lam=0.0, seed=0)
    with pytest.raises(RuntimeError, match="epoch 0"):
        train(bad, masks, build_graph(10, []), config)


def test_loss_decreases_after_one_adam_step():
    ds = two_clique_dataset()
    pos, neg = ops_for(ds.graph)
    mask = np.arange(10)
    for seed in range(20):
        params = init_params([10, 6, 2], lam=0.0, seed=seed, dropout_p=0.0)
        state = init_adam_state(params, lr=0.01)
        trace = forward(params, ds.features, pos, neg, train_mode=True)
        before = loss_cross_entropy(trace.logits, ds.labels, mask)
        grads = backward(trace, params, ds.labels, mask)
        adam_step(params, grads, state)
        after_trace = forward(params, ds.features, pos, neg)
        after = loss_cross_entropy(after_trace.logits, ds.labels, mask)
        assert after < before


# ------------------------------------------------------------------ predict


def test_predict_tie_prefers_smaller_class():
    logits = np.array([[0.2, 0.9, 0.9]])
    assert int(np.argmax(logits, axis=1)[0]) == 1


def test_predict_deterministic_and_dropout_off():
    ds = two_clique_dataset()
    masks = two_clique_masks()
    config = TrainConfig(epochs=10, lr=0.01, hidden=8, layers=3, dropout=0.5, lam=0.0, seed=1)
    best, _ = train(ds, masks, build_graph(10, []), config)
    pos, neg = ops_for(ds.graph)
    p1, e1 = predict(best.params, ds.features, pos, neg)
    p2, e2 = predict(best.params, ds.features, pos, neg)
    assert np.array_equal(p1, p2)
    assert np.array_equal(e1, e2)


def test_permutation_equivariance():
    rng = np.random.default_rng(50)
    n = 9
    g = random_graph(rng, n, 0.4)
    x = rng.random((n, 4))
    params = init_params([4, 5, 3], lam=0.3, seed=2, dropout_p=0.0)
    neg_g = build_graph(n, [(0, 4, 1.0), (2, 7, 1.0)])
    pos = sym_normalized_operator(g, self_loops=True)
    neg = sym_normalized_operator(neg_g, self_loops=False)
    base = forward(params, x, pos, neg).logits

    perm = rng.permutation(n)
    g_p = build_graph(n, [(perm[u], perm[v], w) for u, v, w in g.edges()])
    neg_p = build_graph(n, [(perm[u], perm[v], w) for u, v, w in neg_g.edges()])
    x_p = np.empty_like(x)
    x_p[perm] = x
    out = forward(
        params,
        x_p,
        sym_normalized_operator(g_p, self_loops=True),
        sym_normalized_operator(neg_p, self_loops=False),
    ).logits
    assert np.max(np.abs(out[perm] - base)) < 1e-9


def test_checkpoint_round_trip(tmp_path):
    params = init_params([6, 4, 3], lam=0.25, seed=4)
    path = tmp_path / "model.json"
    save_checkpoint(params, path)
    back = load_checkpoint(path)
    assert back.layer_dims == params.layer_dims
    assert back.lam == params.lam
    for a, b in zip(params.W + params.W_dpp, back.W + back.W_dpp):
        assert np.array_equal(a, b)
