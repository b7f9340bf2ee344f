"""Estimator-style entry points.

GcnGraphClassifier is the trainable stand-in oracle: a small graph
classifier with the familiar fit/predict surface. ResidualGanExplainer
wraps training and sampling into one fit/explain object for users who
want the method without driving the pipeline modules directly.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .autodiff import zero_grads
from .graphs import Graph
from .models import GcnDiscriminator
from .nn import Adam
from .oracles import Oracle
from .sampler import ExplanationRecord, SamplerConfig, explain
from .training import TrainConfig, TrainedPair, derive_seed, train_pair
from .validation import check_binary_labels, check_graph, check_graph_list


class GcnGraphClassifier(ClassifierMixin, BaseEstimator):
    """Binary graph classifier: two GCN layers, mean pooling, linear head.

    Parameters
    ----------
    hidden : width of both graph-convolution layers.
    epochs : passes over the shuffled training set; each instance is one
        optimizer step.
    lr : adaptive-moment learning rate.
    seed : controls initialization and shuffling.
    """

    def __init__(self, hidden: int = 16, epochs: int = 100, lr: float = 1e-2,
                 seed: int = 0):
        self.hidden = hidden
        self.epochs = epochs
        self.lr = lr
        self.seed = seed

    def fit(self, X, y):
        graphs = check_graph_list(X)
        labels = check_binary_labels(y, len(graphs))
        if len(set(labels.tolist())) < 2:
            raise ValueError("training data must contain both classes")
        seeds = np.random.SeedSequence(self.seed).generate_state(2)
        model = GcnDiscriminator(graphs[0].d, self.hidden, seed=int(seeds[0]))
        opt = Adam(model.params(), self.lr)
        rng = np.random.default_rng(int(seeds[1]))

        from .autodiff import Tape, constant
        from .nn import normalize_adjacency

        prepared = [
            (constant(g.node_features),
             constant(normalize_adjacency(g.adjacency)))
            for g in graphs
        ]
        params = model.params()
        for _ in range(self.epochs):
            for i in rng.permutation(len(prepared)):
                x_t, a_t = prepared[i]
                tape = Tape()
                p = model.forward_t(tape, x_t, a_t)
                loss = tape.bce(p, float(labels[i]))
                zero_grads(params)
                tape.backward(loss)
                opt.step()

        # Per-sample steps leave the readout short of the margins the
        # trained convolution features support; the head subproblem is
        # convex, so finish it exactly.
        from .nn import fit_logistic_head

        pooled = np.stack([model.pooled(g.node_features, g.adjacency)
                           for g in graphs])
        w = fit_logistic_head(pooled, labels.astype(float), ridge=1e-3)
        model.head.weight.data[:] = w[:-1, None]
        model.head.bias.data[:] = w[-1]

        self.model_ = model
        self.classes_ = np.array([0, 1])
        self.is_fitted_ = True
        return self

    def _proba_one(self, g: Graph) -> float:
        return self.model_.predict_proba(g.node_features, g.adjacency)

    def predict_one(self, g: Graph) -> int:
        if not getattr(self, "is_fitted_", False):
            raise RuntimeError("classifier is not fitted")
        return int(self._proba_one(check_graph(g)) >= 0.5)

    def predict_proba(self, X) -> np.ndarray:
        if not getattr(self, "is_fitted_", False):
            raise RuntimeError("classifier is not fitted")
        p1 = np.array([self._proba_one(g) for g in check_graph_list(X)])
        return np.column_stack([1.0 - p1, p1])

    def predict(self, X) -> np.ndarray:
        return (self.predict_proba(X)[:, 1] >= 0.5).astype(int)


class ResidualGanExplainer(BaseEstimator):
    """Counterfactual explainer with a fit/explain surface.

    fit() trains one generator per class the oracle observes in the
    data; explain() produces a counterfactual candidate for one graph.
    The oracle is a constructor parameter because the method treats it as
    a fixed black box, not as something fit() should create.
    """

    def __init__(self, oracle: Oracle | None = None, epochs: int = 500,
                 gen_lr: float = 1e-3, disc_lr: float = 1e-3,
                 gen_hidden: int = 32, gen_latent: int = 16,
                 disc_hidden: int = 32, indicator_target_real: bool = True,
                 max_attempts: int = 10, prob_floor: float = 1e-3,
                 boundary_check: bool = True, seed: int = 0):
        self.oracle = oracle
        self.epochs = epochs
        self.gen_lr = gen_lr
        self.disc_lr = disc_lr
        self.gen_hidden = gen_hidden
        self.gen_latent = gen_latent
        self.disc_hidden = disc_hidden
        self.indicator_target_real = indicator_target_real
        self.max_attempts = max_attempts
        self.prob_floor = prob_floor
        self.boundary_check = boundary_check
        self.seed = seed

    def _train_config(self, c: int) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs, gen_lr=self.gen_lr, disc_lr=self.disc_lr,
            explainee_class=c, seed=derive_seed(self.seed, c),
            gen_hidden=self.gen_hidden, gen_latent=self.gen_latent,
            disc_hidden=self.disc_hidden,
            indicator_target_real=self.indicator_target_real,
        )

    def _sampler_config(self) -> SamplerConfig:
        return SamplerConfig(
            max_attempts=self.max_attempts, prob_floor=self.prob_floor,
            boundary_check=self.boundary_check, seed=self.seed,
        )

    def fit(self, X, y=None):
        if self.oracle is None:
            raise ValueError("an oracle is required; pass oracle=...")
        graphs = check_graph_list(X)
        observed = sorted({self.oracle.predict(g) for g in graphs})
        self.models_: dict[int, TrainedPair] = {}
        for c in observed:
            self.models_[c] = train_pair(graphs, self.oracle,
                                         self._train_config(c))
        self.is_fitted_ = True
        return self

    def explain(self, g: Graph,
                rng: np.random.Generator | None = None) -> ExplanationRecord:
        if not getattr(self, "is_fitted_", False):
            raise RuntimeError("explainer is not fitted")
        c = self.oracle.predict(check_graph(g))
        if c not in self.models_:
            raise KeyError(f"no generator was trained for class {c}")
        return explain(g, self.models_[c].generator, self.oracle,
                       self._sampler_config(), rng=rng)

    def predict(self, X) -> list[Graph]:
        """Counterfactual candidate per input graph (the input itself
        where no valid candidate was found)."""
        return [self.explain(g).candidate for g in check_graph_list(X)]


def save_classifier(path, clf: GcnGraphClassifier) -> None:
    from .models import discriminator_arrays
    from .nn import save_checkpoint

    if not getattr(clf, "is_fitted_", False):
        raise RuntimeError("cannot save an unfitted classifier")
    meta = {
        "model": "gcn-classifier",
        "feature_dim": clf.model_.feature_dim,
        "hidden": clf.hidden,
        "epochs": clf.epochs,
        "lr": clf.lr,
        "seed": clf.seed,
    }
    save_checkpoint(path, meta, discriminator_arrays(clf.model_))


def load_classifier(path) -> GcnGraphClassifier:
    from .nn import load_checkpoint

    meta, arrays = load_checkpoint(path)
    if meta.get("model") != "gcn-classifier":
        raise ValueError(f"{path}: not a classifier checkpoint")
    clf = GcnGraphClassifier(hidden=int(meta["hidden"]),
                             epochs=int(meta["epochs"]),
                             lr=float(meta["lr"]), seed=int(meta["seed"]))
    model = GcnDiscriminator(int(meta["feature_dim"]), int(meta["hidden"]))
    for name, tensor in (("disc.gcn1.weight", model.gcn1.weight),
                         ("disc.gcn1.bias", model.gcn1.bias),
                         ("disc.gcn2.weight", model.gcn2.weight),
                         ("disc.gcn2.bias", model.gcn2.bias),
                         ("disc.head.weight", model.head.weight),
                         ("disc.head.bias", model.head.bias)):
        tensor.data = arrays[name].copy()
    clf.model_ = model
    clf.classes_ = np.array([0, 1])
    clf.is_fitted_ = True
    return clf
