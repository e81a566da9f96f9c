from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from ..autodiff.functional import cross_entropy, softmax
from ..autodiff.tensor import grad
from ..data.dataset import Dataset
from ..nn.networks import Network, build_classifier, predict
from ..nn.optim import Adam
from .augment import AugPolicy, apply_policy, one_hot


class ClassifierAborted(RuntimeError):
    pass


@dataclass
class ClassifierConfig:
    epochs: int = 50
    batch_size: int = 32
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    widths: tuple = (32, 64, 128)
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2")
        if self.lr <= 0:
            raise ValueError("lr must be positive")

    def to_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}


@dataclass
class ClassifierRun:
    network: Network
    best_epoch: int
    best_val_f1: float
    train_loss: list = field(default_factory=list)
    val_macro_f1: list = field(default_factory=list)


def macro_f1(y_true, y_pred, n_classes: int) -> float:
    """Unweighted mean of per-class F1; a class with no support or predictions scores 0."""
    y_true, y_pred = np.asarray(y_true), np.asarray(y_pred)
    scores = []
    for c in range(n_classes):
        tp = np.sum((y_pred == c) & (y_true == c))
        fp = np.sum((y_pred == c) & (y_true != c))
        fn = np.sum((y_pred != c) & (y_true == c))
        denom = 2 * tp + fp + fn
        scores.append(2 * tp / denom if tp > 0 else 0.0)
    return float(np.mean(scores))


def auroc(scores, positives) -> float | None:
    """Mann-Whitney statistic: P(score_pos > score_neg) + 0.5 P(tie).

    Computed from midranks so ties count half. ``None`` when either class
    is absent.
    """
    s = np.asarray(scores, dtype=np.float64)
    pos = np.asarray(positives, dtype=bool)
    n_pos, n_neg = int(pos.sum()), int((~pos).sum())
    if n_pos == 0 or n_neg == 0:
        return None
    order = np.argsort(s, kind="mergesort")
    ranks = np.empty(len(s))
    sorted_s = s[order]
    i = 0
    while i < len(s):
        j = i
        while j + 1 < len(s) and sorted_s[j + 1] == sorted_s[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def sensitivity_at_specificity(scores, positives, target: float = 0.9) -> float | None:
    """Best sensitivity over thresholds ``score >= t`` whose specificity is at least ``target``.

    Raising the threshold only trades sensitivity for specificity, so this is
    the sensitivity at the lowest threshold that meets the target.
    """
    s = np.asarray(scores, dtype=np.float64)
    pos = np.asarray(positives, dtype=bool)
    if pos.all() or not pos.any():
        return None
    best = 0.0
    for t in np.concatenate([np.unique(s), [np.inf]]):
        pred = s >= t
        spec = np.mean(~pred[~pos])
        if spec >= target - 1e-12:
            best = max(best, float(np.mean(pred[pos])))
    return best


@dataclass
class ClassifierMetrics:
    accuracy: float
    macro_f1: float
    auroc: float | None
    sens_at_spec: float | None
    reduction: str


def evaluate_classifier(
    model: Network, test: Dataset, positive_class: int | None = None, specificity_target: float = 0.9
) -> ClassifierMetrics:
    """Accuracy, macro-F1, AUROC and sensitivity at a specificity target.

    Binary tasks score class 1 as positive unless ``positive_class`` says
    otherwise. Multiclass tasks without a positive class average the
    one-vs-rest AUROC and sensitivity over classes.
    """
    if len(test) == 0:
        raise ValueError("test set is empty")
    probs = softmax(predict(model, test.images))
    y = test.labels
    n_classes = probs.shape[1]
    pred = probs.argmax(axis=1)
    acc = float(np.mean(pred == y))
    f1 = macro_f1(y, pred, n_classes)
    if positive_class is None and n_classes == 2:
        positive_class = 1
    if positive_class is not None:
        au = auroc(probs[:, positive_class], y == positive_class)
        sens = sensitivity_at_specificity(probs[:, positive_class], y == positive_class, specificity_target)
        return ClassifierMetrics(acc, f1, au, sens, f"positive class {positive_class}")
    aus, senses = [], []
    for c in range(n_classes):
        au = auroc(probs[:, c], y == c)
        if au is not None:
            aus.append(au)
            senses.append(sensitivity_at_specificity(probs[:, c], y == c, specificity_target))
    if not aus:
        return ClassifierMetrics(acc, f1, None, None, "one-vs-rest macro average")
    return ClassifierMetrics(acc, f1, float(np.mean(aus)), float(np.mean(senses)), "one-vs-rest macro average")


def train_classifier(
    train: Dataset,
    val: Dataset | None,
    policy: AugPolicy | None = None,
    config: ClassifierConfig | None = None,
) -> ClassifierRun:
    """Adam on soft-label cross-entropy; keeps the epoch with the best validation macro-F1.

    Ties go to the earlier epoch. With no validation set the last epoch is kept.
    """
    config = config or ClassifierConfig()
    policy = policy or AugPolicy("none")
    if len(train) == 0:
        raise ValueError("training set is empty")
    n_classes = train.n_classes
    rng = np.random.default_rng([config.seed, 1])
    aug_rng = np.random.default_rng([config.seed, 2])
    net = build_classifier(train.channels, n_classes, tuple(config.widths), seed=config.seed)
    net.trained = False
    opt = Adam(net.params, config.lr, config.beta1, config.beta2)
    names = list(net.params)
    best_state, best_f1, best_epoch = net.state_dict(), -1.0, 0
    run = ClassifierRun(net, 0, float("nan"))
    n = len(train)
    m = min(config.batch_size, n)
    targets = one_hot(train.labels, n_classes)
    for epoch in range(1, config.epochs + 1):
        net.train()
        order = rng.permutation(n)
        losses = []
        for start in range(0, n - m + 1, m):
            idx = order[start : start + m]
            x, y = apply_policy(train.images[idx], targets[idx], policy, n_classes, aug_rng)
            loss = cross_entropy(net(x), y)
            value = loss.item()
            if not np.isfinite(value):
                raise ClassifierAborted(f"non-finite classifier loss at epoch {epoch}, batch {start // m}")
            gs = grad(loss, [net.params[k] for k in names])
            opt.step({k: g.data for k, g in zip(names, gs)})
            losses.append(value)
        run.train_loss.append(float(np.mean(losses)))
        if val is not None and len(val):
            pred = predict(net, val.images).argmax(axis=1)
            f1 = macro_f1(val.labels, pred, n_classes)
        else:
            f1 = float("nan")
        run.val_macro_f1.append(f1)
        if val is None or not len(val) or f1 > best_f1:
            best_state, best_f1, best_epoch = net.state_dict(), f1, epoch
    net.load_state_dict(best_state)
    net.eval()
    net.trained = config.epochs > 0
    run.best_epoch, run.best_val_f1 = best_epoch, best_f1
    return run
