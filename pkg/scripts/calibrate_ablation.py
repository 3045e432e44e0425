"""Pre-build preview of the ablation ordering under the real training budget.

Trains throwaway numpy prototypes of the MLP baseline (feature head only)
and a one/two-layer neighbor-aggregation model under the paper-style budget
(Adam 1e-3, batch 32, 20 epochs, dropout 0.5) to locate the noise level and
graph settings where the ordering margin is comfortable, before the package
exists.  Final acceptance constants are frozen from this run.

Run:  python scripts/calibrate_ablation.py
"""

import numpy as np

from calibrate_synth import make_clusters


def adam_update(p, g, st, lr=1e-3, b1=0.9, b2=0.999, eps=1e-8):
    m, v, t = st
    t += 1
    m = b1 * m + (1 - b1) * g
    v = b2 * v + (1 - b2) * g * g
    mh = m / (1 - b1**t)
    vh = v / (1 - b2**t)
    return p - lr * mh / (np.sqrt(vh) + eps), (m, v, t)


class TinyNet:
    """x -> hidden ReLU -> dropout -> logits, trained with Adam."""

    def __init__(self, din, hidden, k, rng):
        lim1 = np.sqrt(6.0 / (din + hidden))
        lim2 = np.sqrt(6.0 / (hidden + k))
        self.W1 = rng.uniform(-lim1, lim1, (hidden, din))
        self.b1 = np.zeros(hidden)
        self.W2 = rng.uniform(-lim2, lim2, (k, hidden))
        self.b2 = np.zeros(k)
        self.state = {n: (0.0, 0.0, 0) for n in ("W1", "b1", "W2", "b2")}

    def logits(self, X, drop_rng=None):
        h = np.maximum(X @ self.W1.T + self.b1, 0.0)
        mask = None
        if drop_rng is not None:
            mask = (drop_rng.random(h.shape) >= 0.5) / 0.5
            h = h * mask
        return h, mask, h @ self.W2.T + self.b2

    def step(self, X, Y, drop_rng):
        B = len(X)
        h, mask, z = self.logits(X, drop_rng)
        z = z - z.max(axis=1, keepdims=True)
        p = np.exp(z)
        p /= p.sum(axis=1, keepdims=True)
        dz = (p - Y) / B
        gW2 = dz.T @ h
        gb2 = dz.sum(0)
        dh = dz @ self.W2
        if mask is not None:
            dh = dh * mask
        dh = dh * (h > 0)
        pre = X
        gW1 = dh.T @ pre
        gb1 = dh.sum(0)
        for name, g in (("W1", gW1), ("b1", gb1), ("W2", gW2), ("b2", gb2)):
            p_, self.state[name] = adam_update(getattr(self, name), g, self.state[name])
            setattr(self, name, p_)

    def predict(self, X):
        _, _, z = self.logits(X)
        return z.argmax(axis=1)


def knn_lists(Xq, Xref, k_nn, exclude_identical):
    Qn = Xq / np.linalg.norm(Xq, axis=1, keepdims=True)
    Rn = Xref / np.linalg.norm(Xref, axis=1, keepdims=True)
    S = Qn @ Rn.T
    if exclude_identical:
        dup = (Xq[:, None, :] == Xref[None, :, :]).all(-1)
        S[dup] = -np.inf
    return np.argsort(-S, axis=1)[:, :k_nn]


def run(X, y, tr, te, k, seed, arch, k_nn, epochs=20, hidden=64):
    rng = np.random.default_rng(seed)
    Y = np.eye(k)[y]
    if arch == "mlp":
        feats_tr, feats_te = X[tr], X[te]
    else:  # one aggregation hop: [self || mean of train kNN]
        nn_tr = knn_lists(X[tr], X[tr], k_nn, True)
        nn_te = knn_lists(X[te], X[tr], k_nn, False)
        feats_tr = np.hstack([X[tr], X[tr][nn_tr].mean(1)])
        feats_te = np.hstack([X[te], X[tr][nn_te].mean(1)])
    net = TinyNet(feats_tr.shape[1], hidden, k, rng)
    n = len(tr)
    for _ in range(epochs):
        order = rng.permutation(n)
        for s in range(0, n, 32):
            b = order[s : s + 32]
            net.step(feats_tr[b], Y[tr][b], rng)
    return float((net.predict(feats_te) == y[te]).mean())


if __name__ == "__main__":
    kc, npc, dim = 10, 50, 64
    print(f"{'sigma':>6} {'k_nn':>5} {'mlp':>7} {'sage1':>7} {'margin':>7}")
    for sigma in (0.30, 0.35, 0.40, 0.45):
        for k_nn in (8, 16):
            mlps, sages = [], []
            for seed in (1, 2, 3):
                X, y = make_clusters(kc, npc, dim, sigma, seed)
                rng = np.random.default_rng(seed + 100)
                idx = rng.permutation(len(y))
                cut = int(0.8 * len(y))
                tr, te = idx[:cut], idx[cut:]
                mlps.append(run(X, y, tr, te, kc, seed, "mlp", k_nn))
                sages.append(run(X, y, tr, te, kc, seed, "sage", k_nn))
            m, s = np.mean(mlps), np.mean(sages)
            print(f"{sigma:>6.2f} {k_nn:>5} {m:>7.3f} {s:>7.3f} {s - m:>+7.3f}")
