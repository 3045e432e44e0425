"""Independent reference implementations the tests check against.

Everything here is written from the definitions with plain loops (or a
library reference routine) and never calls into the package's forward/
backward code paths, so a bug cannot cancel itself out.
"""

import numpy as np


def dense_sage_forward(adj_sets, feats, layers, l2_normalize=False):
    """Brute-force GraphSAGE forward over full neighborhoods.

    adj_sets: list of neighbor-id sets (no self loops);
    layers: list of (W, b, aggregator, pool_W, pool_b) tuples applied in order.
    Returns the (n, F_out) matrix of node representations.
    """
    h = np.asarray(feats, dtype=np.float64)
    n = len(adj_sets)
    for w, b, agg, pool_w, pool_b in layers:
        f = h.shape[1]
        nxt = []
        for v in range(n):
            nbrs = sorted(adj_sets[v])
            if agg == "mean":
                if nbrs:
                    a = np.mean([h[u] for u in nbrs], axis=0)
                else:
                    a = np.zeros(f)
            elif agg == "maxpool":
                if nbrs:
                    proj = [
                        np.maximum(pool_w @ h[u] + (pool_b if pool_b is not None else 0.0), 0.0)
                        for u in nbrs
                    ]
                    a = np.max(proj, axis=0)
                else:
                    a = np.zeros(pool_w.shape[0])
            else:
                raise ValueError(agg)
            z = np.concatenate([h[v], a])
            y = w @ z + (b if b is not None else 0.0)
            out = np.maximum(y, 0.0)
            if l2_normalize:
                norm = np.linalg.norm(out)
                if norm > 0:
                    out = out / norm
            nxt.append(out)
        h = np.stack(nxt)
    return h


def gcn_dense(a_hat, h, w, b):
    """ReLU(a_hat @ h @ w.T + b) straight from the definition."""
    y = a_hat @ h @ w.T
    if b is not None:
        y = y + b
    return np.maximum(y, 0.0)


def top_singular_reference(a):
    """Dominant singular triple via the library SVD."""
    u, s, vt = np.linalg.svd(np.asarray(a, dtype=np.float64), full_matrices=False)
    return u[:, 0], float(s[0]), vt[0]


def adam_constant_gradient_steps(g, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8,
                                 steps=100):
    """Per-step parameter deltas for a constant scalar gradient."""
    m = v = 0.0
    x = 0.0
    deltas = []
    for t in range(1, steps + 1):
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * g * g
        m_hat = m / (1 - beta1**t)
        v_hat = v / (1 - beta2**t)
        step = lr * m_hat / (np.sqrt(v_hat) + eps)
        x -= step
        deltas.append(step)
    return np.array(deltas)


def logistic_holdout_accuracy(features, labels, seed, train_frac=0.8):
    """Converged multinomial logistic regression on a deterministic holdout."""
    from sklearn.linear_model import LogisticRegression

    rng = np.random.default_rng(seed)
    idx = rng.permutation(len(labels))
    cut = int(train_frac * len(labels))
    tr, te = idx[:cut], idx[cut:]
    clf = LogisticRegression(max_iter=5000)
    clf.fit(features[tr], labels[tr])
    return float(clf.score(features[te], labels[te]))


def weighted_metrics_reference(counts):
    """Support-weighted precision/recall/f1 from integer counts, via floats
    computed independently (used for approximate agreement checks)."""
    counts = np.asarray(counts, dtype=np.float64)
    n = counts.sum()
    support = counts.sum(axis=1)
    predicted = counts.sum(axis=0)
    tp = np.diag(counts)
    with np.errstate(invalid="ignore", divide="ignore"):
        prec = np.where(predicted > 0, tp / predicted, 0.0)
        rec = np.where(support > 0, tp / support, 0.0)
        f1 = np.where(prec + rec > 0, 2 * prec * rec / (prec + rec), 0.0)
    w = support / n
    return {
        "accuracy": tp.sum() / n,
        "precision": float((w * prec).sum()),
        "recall": float((w * rec).sum()),
        "f1": float((w * f1).sum()),
    }
