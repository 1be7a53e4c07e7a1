import numpy as np


LEAF = -1
MIN_SPLIT_GAIN = 1e-12


class RegressionTree(object):
    """Array-backed binary regression tree; rows with x[feature] <= threshold go left."""

    def __init__(self, feature, threshold, left, right, value):
        self.feature = np.asarray(feature, dtype=np.intp)
        self.threshold = np.asarray(threshold, dtype=float)
        self.left = np.asarray(left, dtype=np.intp)
        self.right = np.asarray(right, dtype=np.intp)
        self.value = np.asarray(value, dtype=float)
        self._depth = self._compute_depth()

    def __repr__(self):
        return "RegressionTree(nodes={0}, depth={1})".format(len(self.value), self.depth)

    @property
    def n_nodes(self):
        return len(self.value)

    @property
    def depth(self):
        return self._depth

    def _compute_depth(self):
        depths = np.zeros(self.n_nodes, dtype=int)
        for node in range(self.n_nodes):
            if self.feature[node] != LEAF:
                depths[self.left[node]] = depths[node] + 1
                depths[self.right[node]] = depths[node] + 1
        return int(depths.max()) if self.n_nodes else 0

    def predict(self, X):
        X = np.asarray(X, dtype=float)
        node = np.zeros(len(X), dtype=np.intp)
        for _ in range(self.depth):
            feature = self.feature[node]
            rows = np.nonzero(feature != LEAF)[0]
            if not len(rows):
                break
            current = node[rows]
            go_left = X[rows, feature[rows]] <= self.threshold[current]
            node[rows] = np.where(go_left, self.left[current], self.right[current])
        return self.value[node]

    def used_features(self):
        return sorted(set(int(f) for f in self.feature if f != LEAF))

    def to_document(self, node=0):
        if self.feature[node] == LEAF:
            return {"leaf": float(self.value[node])}
        return {
            "feature": int(self.feature[node]),
            "threshold": float(self.threshold[node]),
            "left": self.to_document(int(self.left[node])),
            "right": self.to_document(int(self.right[node])),
        }

    @classmethod
    def from_document(cls, doc):
        builder = _TreeArrays()

        def visit(d):
            node = builder.add()
            if "leaf" in d:
                builder.value[node] = float(d["leaf"])
            else:
                builder.feature[node] = int(d["feature"])
                builder.threshold[node] = float(d["threshold"])
                builder.left[node] = visit(d["left"])
                builder.right[node] = visit(d["right"])
            return node

        visit(doc)
        return builder.freeze()


class _TreeArrays(object):
    def __init__(self):
        self.feature, self.threshold, self.left, self.right, self.value = [], [], [], [], []

    def add(self):
        self.feature.append(LEAF)
        self.threshold.append(0.0)
        self.left.append(LEAF)
        self.right.append(LEAF)
        self.value.append(0.0)
        return len(self.value) - 1

    def freeze(self):
        return RegressionTree(self.feature, self.threshold, self.left, self.right, self.value)


MAX_BINS = 256


def feature_cut_points(x, max_bins=MAX_BINS):
    """Sorted split thresholds for one feature.

    Every midpoint between adjacent distinct values is a cut while there are
    fewer than ``max_bins`` distinct values, so small data is split exactly;
    above that the cuts are thinned to the midpoints nearest the quantiles.
    """
    values = np.unique(x)
    if len(values) < 2:
        return np.empty(0)
    lo, hi = values[:-1], values[1:]
    cuts = lo + (hi - lo) / 2.0
    rounded = ~((lo <= cuts) & (cuts < hi))
    cuts[rounded] = lo[rounded]
    if len(cuts) >= max_bins:
        quantiles = np.quantile(x, np.linspace(0.0, 1.0, max_bins)[1:-1])
        positions = np.clip(np.searchsorted(values, quantiles, side="right") - 1, 0, len(cuts) - 1)
        cuts = cuts[np.unique(positions)]
    return cuts


class BinnedFeatures(object):
    """Per-feature cut points plus the bin code of every row; x <= cuts[k] exactly when code <= k."""

    def __init__(self, codes, cuts):
        self.codes = codes
        self.cuts = cuts
        self.n_bins = max(len(c) for c in cuts) + 1 if cuts else 1
        # codes offset per feature so one bincount covers every feature
        self.flat = codes + np.arange(codes.shape[1]) * self.n_bins

    def __repr__(self):
        return "BinnedFeatures(rows={0}, features={1}, bins={2})".format(
            self.codes.shape[0], self.codes.shape[1], self.n_bins
        )

    @classmethod
    def build(cls, X, max_bins=MAX_BINS):
        X = np.asarray(X, dtype=float)
        cuts = [feature_cut_points(X[:, j], max_bins) for j in range(X.shape[1])]
        codes = np.empty(X.shape, dtype=np.intp)
        for j, c in enumerate(cuts):
            codes[:, j] = np.searchsorted(c, X[:, j], side="left")
        return cls(codes, cuts)


def _best_split(binned, rows, r_node, w_node, features, min_child, lambda_l2):
    n_bins = binned.n_bins
    d = binned.codes.shape[1]
    flat = binned.flat[rows].ravel()
    sums = np.bincount(flat, weights=np.repeat(r_node * w_node, d), minlength=d * n_bins).reshape(d, n_bins)
    counts = np.bincount(flat, weights=np.repeat(w_node, d), minlength=d * n_bins).reshape(d, n_bins)
    left_sum = np.cumsum(sums[features], axis=1)[:, :-1]
    n_left = np.cumsum(counts[features], axis=1)[:, :-1]
    total, n = float(r_node @ w_node), float(w_node.sum())
    n_right = n - n_left
    valid = (n_left >= min_child) & (n_right >= min_child) & (n_left > 0) & (n_right > 0)
    if not valid.any():
        return None
    with np.errstate(divide="ignore", invalid="ignore"):
        gains = left_sum ** 2 / (n_left + lambda_l2) + (total - left_sum) ** 2 / (n_right + lambda_l2) \
            - total ** 2 / (n + lambda_l2)
    gains = np.where(valid, gains, -np.inf)
    i, k = np.unravel_index(int(np.argmax(gains)), gains.shape)
    f = int(features[i])
    return float(gains[i, k]), f, int(k)


def grow_tree(X, r, max_depth, min_samples_split=2, min_child=1, lambda_l2=0.0, allowed_features=None,
              max_features=None, rng=None, feature_gain=None, weight=None, binned=None):
    """Greedy tree on targets ``r`` with a binned split search.

    Split gain is the L2-regularized drop in the weighted sum of squared
    targets, S_L^2/(W_L+lambda) + S_R^2/(W_R+lambda) - S^2/(W+lambda); leaves
    hold S/(W+lambda). With lambda = 0 and unit weights this is plain variance
    reduction. Rows with zero ``weight`` take no part. Pass ``binned`` to reuse
    the cut points of an earlier call on the same X. Per-feature gain is
    accumulated into ``feature_gain`` when given.
    """
    r = np.asarray(r, dtype=float)
    binned = binned if binned is not None else BinnedFeatures.build(X)
    weight = np.ones(len(r)) if weight is None else np.asarray(weight, dtype=float)
    n_features = binned.codes.shape[1]
    candidates = np.arange(n_features) if allowed_features is None else np.asarray(sorted(allowed_features))
    builder = _TreeArrays()
    stack = [(builder.add(), np.nonzero(weight > 0)[0], 0)]
    while stack:
        node, rows, depth = stack.pop()
        r_node, w_node = r[rows], weight[rows]
        if len(rows):
            builder.value[node] = float(r_node @ w_node / (w_node.sum() + lambda_l2))
        if depth >= max_depth or len(rows) < max(min_samples_split, 2):
            continue
        features = candidates
        if max_features is not None and max_features < len(candidates):
            features = np.sort(rng.choice(candidates, size=max_features, replace=False))
        best = _best_split(binned, rows, r_node, w_node, features, min_child, lambda_l2)
        if best is None or best[0] <= MIN_SPLIT_GAIN:
            continue
        gain, f, k = best
        if feature_gain is not None:
            feature_gain[f] += gain
        go_left = binned.codes[rows, f] <= k
        left, right = builder.add(), builder.add()
        builder.feature[node] = f
        builder.threshold[node] = float(binned.cuts[f][k])
        builder.left[node] = left
        builder.right[node] = right
        stack.append((right, rows[~go_left], depth + 1))
        stack.append((left, rows[go_left], depth + 1))
    return builder.freeze()
