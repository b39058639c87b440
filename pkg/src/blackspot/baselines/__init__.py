"""Textbook classifiers benchmarked against the proposed pipeline.

Every family is fitted through :func:`fit_family`, which applies the family's
default hyperparameters and label convention, and returns a
:class:`~blackspot.baselines.base.TrainedModel`.
"""

from __future__ import annotations

import numpy as np

from ..augment import harden_labels
from ..errors import ParameterError
from .base import TrainedModel, model_from_bytes, model_to_bytes
from .bayes import fit_gaussian_nb
from .boosting import fit_adaboost
from .gp import fit_gp_surrogate
from .mlp import BASELINE_HIDDEN, fit_mlp
from .neighbors import fit_knn
from .poisson import fit_poisson_regression
from .svm import fit_linear_svm, fit_rbf_svm
from .trees import fit_decision_tree, fit_extra_trees, fit_random_forest

# order fixes the serialisation tag of each family and the report row order
FAMILIES = (
    "poisson",
    "naive_bayes",
    "gaussian_process",
    "knn",
    "linear_svm",
    "rbf_svm",
    "decision_tree",
    "random_forest",
    "extra_trees",
    "adaboost",
    "mlp",
)

DISPLAY_NAMES = {
    "poisson": "Poisson",
    "naive_bayes": "Naive Bayes",
    "gaussian_process": "Gaussian Process (kernel-ridge surrogate)",
    "knn": "k-Nearest Neighbors",
    "linear_svm": "Linear SVM",
    "rbf_svm": "RBF SVM",
    "decision_tree": "Decision Tree",
    "random_forest": "Random Forest",
    "extra_trees": "Extra Trees",
    "adaboost": "AdaBoost",
    "mlp": "MLP",
}

DEFAULT_PARAMS = {
    "poisson": {"alpha": 0.9, "tol": 1e-5, "max_iter": 500},
    "naive_bayes": {"var_smoothing": 1e-9},
    "gaussian_process": {"gamma": 32.0, "ridge": 1e-2, "cap": 4000},
    "knn": {"k": 4},
    "linear_svm": {"c": 1.0, "tol": 1e-3, "max_epochs": 1000},
    "rbf_svm": {"gamma": 32.0, "c": 1.0, "cap": 4000, "tol": 1e-3},
    "decision_tree": {"feature_bag": "all"},
    "random_forest": {"n_trees": 30, "feature_bag": "sqrt", "bootstrap": True},
    "extra_trees": {"n_trees": 30, "feature_bag": "sqrt", "bootstrap": False},
    "adaboost": {"rounds": 30},
    "mlp": {"hidden": BASELINE_HIDDEN, "learning_rate": 1e-4, "epochs": 100, "batch_size": 32},
}

# the SVMs see a 5-component PCA projection of their variant's features
USES_PCA = frozenset({"linear_svm", "rbf_svm"})
PCA_COMPONENTS = 5

# these consume soft MixUp labels as-is; every other family gets hard labels
SOFT_LABEL_FAMILIES = frozenset({"poisson", "mlp"})

# families whose fit draws random numbers
STOCHASTIC_FAMILIES = frozenset({
    "gaussian_process", "linear_svm", "rbf_svm", "decision_tree",
    "random_forest", "extra_trees", "mlp",
})

_FITTERS = {
    "poisson": fit_poisson_regression,
    "naive_bayes": fit_gaussian_nb,
    "gaussian_process": fit_gp_surrogate,
    "knn": fit_knn,
    "linear_svm": fit_linear_svm,
    "rbf_svm": fit_rbf_svm,
    "decision_tree": fit_decision_tree,
    "random_forest": fit_random_forest,
    "extra_trees": fit_extra_trees,
    "adaboost": fit_adaboost,
    "mlp": fit_mlp,
}


def resolve_params(family: str, overrides=None) -> dict:
    if family not in DEFAULT_PARAMS:
        raise ParameterError(f"unknown family {family!r}; expected one of {', '.join(FAMILIES)}")
    params = dict(DEFAULT_PARAMS[family])
    for key, value in (overrides or {}).items():
        if key not in params:
            raise ParameterError(f"{family} has no hyperparameter {key!r}")
        params[key] = value
    return params


def training_labels(family: str, y_soft):
    """Soft labels for families that accept them, hardened 0/1 otherwise."""
    y_soft = np.asarray(y_soft, dtype=np.float64)
    if family in SOFT_LABEL_FAMILIES:
        return y_soft
    return harden_labels(y_soft)


def fit_family(family: str, X, y_soft, params=None, seed=0) -> TrainedModel:
    """Fit one family with defaults overridden by ``params``."""
    params = resolve_params(family, params)
    y = training_labels(family, y_soft)
    if family in STOCHASTIC_FAMILIES:
        params["seed"] = seed
    return _FITTERS[family](X, y, **params)


__all__ = [
    "DEFAULT_PARAMS", "DISPLAY_NAMES", "FAMILIES", "PCA_COMPONENTS", "SOFT_LABEL_FAMILIES",
    "TrainedModel", "USES_PCA", "fit_family", "model_from_bytes", "model_to_bytes",
    "resolve_params", "training_labels",
]
