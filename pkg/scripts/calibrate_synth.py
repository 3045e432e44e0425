"""Pre-build calibration for the synthetic relational dataset.

Generates class-centroid Gaussian clusters the same way the package will
(unit-norm centroids rejection-sampled to pairwise cosine <= 0.5, then
centroid + N(0, sigma^2 I) samples) and probes each noise level with a
multinomial logistic regression trained to convergence.  The probe fixes
the acceptance band for the linear baseline before any model code exists.

Run:  python scripts/calibrate_synth.py
"""

import numpy as np
from sklearn.linear_model import LogisticRegression


def make_clusters(k, n_per_class, dim, sigma, seed):
    rng = np.random.default_rng(seed)
    cents = []
    tries = 0
    while len(cents) < k:
        c = rng.normal(size=dim)
        c /= np.linalg.norm(c)
        if all(abs(float(c @ o)) <= 0.5 for o in cents):
            cents.append(c)
        tries += 1
        if tries > 10_000:
            raise RuntimeError("centroid rejection failed")
    X = np.zeros((k * n_per_class, dim))
    y = np.zeros(k * n_per_class, dtype=int)
    for ci, c in enumerate(cents):
        rows = slice(ci * n_per_class, (ci + 1) * n_per_class)
        X[rows] = c + sigma * rng.normal(size=(n_per_class, dim))
        y[rows] = ci
    return X, y


def logistic_probe(X, y, seed):
    rng = np.random.default_rng(seed)
    idx = rng.permutation(len(y))
    cut = int(0.8 * len(y))
    tr, te = idx[:cut], idx[cut:]
    clf = LogisticRegression(max_iter=5000, C=1.0)
    clf.fit(X[tr], y[tr])
    return float(clf.score(X[te], y[te]))


def neighbor_purity(X, y, k_nn):
    """Fraction of top-k cosine neighbors sharing the query's class."""
    Xn = X / np.linalg.norm(X, axis=1, keepdims=True)
    S = Xn @ Xn.T
    np.fill_diagonal(S, -np.inf)
    nn = np.argsort(-S, axis=1)[:, :k_nn]
    return float(np.mean(y[nn] == y[:, None]))


def relational_probe(X, y, seed, k_nn):
    """Logistic on [self || mean of top-k cosine neighbors] as a one-layer
    aggregation proxy; neighbor lookups for test rows use train rows only."""
    rng = np.random.default_rng(seed)
    idx = rng.permutation(len(y))
    cut = int(0.8 * len(y))
    tr, te = idx[:cut], idx[cut:]
    Xn = X / np.linalg.norm(X, axis=1, keepdims=True)

    def augmented(rows, exclude_self):
        S = Xn[rows] @ Xn[tr].T
        if exclude_self:
            for r, g in enumerate(rows):
                hits = np.nonzero(tr == g)[0]
                S[r, hits] = -np.inf
        nn = np.argsort(-S, axis=1)[:, :k_nn]
        agg = X[tr][nn].mean(axis=1)
        return np.hstack([X[rows], agg])

    clf = LogisticRegression(max_iter=5000, C=1.0)
    clf.fit(augmented(tr, True), y[tr])
    return float(clf.score(augmented(te, False), y[te]))


def smoothing_probe(X, y, seed, k_nn, hops):
    """Logistic on neighborhood-mean-smoothed features (self included),
    iterated `hops` times.  Keeps dimensionality fixed at dim."""
    rng = np.random.default_rng(seed)
    idx = rng.permutation(len(y))
    cut = int(0.8 * len(y))
    tr, te = idx[:cut], idx[cut:]

    def smooth_train(Xt):
        Xn = Xt / np.linalg.norm(Xt, axis=1, keepdims=True)
        S = Xn @ Xn.T
        np.fill_diagonal(S, -np.inf)
        nn = np.argsort(-S, axis=1)[:, :k_nn]
        return (Xt + Xt[nn].sum(axis=1)) / (k_nn + 1), nn

    Xtr = X[tr]
    for _ in range(hops):
        Xtr, _ = smooth_train(Xtr)

    # test rows smooth against train rows only (inductive)
    Xte = X[te]
    for h in range(hops):
        base = X[tr]
        for _ in range(h):  # train reps at matching depth
            base, _ = smooth_train(base)
        Xn_tr = X[tr] / np.linalg.norm(X[tr], axis=1, keepdims=True)
        Xn_te = Xte if h > 0 else X[te]
        Xn_te0 = X[te] / np.linalg.norm(X[te], axis=1, keepdims=True)
        S = Xn_te0 @ Xn_tr.T
        nn = np.argsort(-S, axis=1)[:, :k_nn]
        Xte = (Xte + base[nn].sum(axis=1)) / (k_nn + 1)

    clf = LogisticRegression(max_iter=5000, C=1.0)
    clf.fit(Xtr, y[tr])
    return float(clf.score(Xte, y[te]))


if __name__ == "__main__":
    k, n_per_class, dim = 10, 50, 64
    hdr = f"{'sigma':>6} {'logistic':>9} {'purity@8':>9} {'rel@8':>7}"
    hdr += f" {'sm@8x1':>7} {'sm@8x2':>7} {'sm@16x1':>8} {'sm@16x2':>8}"
    print(hdr)
    for sigma in (0.3, 0.35, 0.4, 0.45, 0.5):
        cols = {h: [] for h in ("lg", "pu", "rel", "s81", "s82", "s161", "s162")}
        for seed in (1, 2, 3):
            X, y = make_clusters(k, n_per_class, dim, sigma, seed)
            cols["lg"].append(logistic_probe(X, y, seed))
            cols["pu"].append(neighbor_purity(X, y, 8))
            cols["rel"].append(relational_probe(X, y, seed, 8))
            cols["s81"].append(smoothing_probe(X, y, seed, 8, 1))
            cols["s82"].append(smoothing_probe(X, y, seed, 8, 2))
            cols["s161"].append(smoothing_probe(X, y, seed, 16, 1))
            cols["s162"].append(smoothing_probe(X, y, seed, 16, 2))
        m = {kk: np.mean(v) for kk, v in cols.items()}
        print(
            f"{sigma:>6.2f} {m['lg']:>9.3f} {m['pu']:>9.3f} {m['rel']:>7.3f}"
            f" {m['s81']:>7.3f} {m['s82']:>7.3f} {m['s161']:>8.3f} {m['s162']:>8.3f}"
        )
