"""Training and evaluation: bilevel meta-learning vs union pre-training.

Two training regimes share one architecture and one initialization stream:

- `train_pt` runs plain supervised descent on the union of a benchmark's
  train classes under global labels (the pre-training baseline);
- `train_maml` runs episodic bilevel descent, adapting on each episode's
  support set in an inner loop and descending the query loss through
  (higher-order) or around (first-order) the inner updates.

Both evaluate at meta-test through `meta_test`: pre-trained bodies are
frozen and get a freshly fitted per-task head (`fit_head`); meta-learned
models take a few full-parameter descent steps on the support set
(`adapt`). Convergence, stopping, seeds and the outer optimizer are all
deliberately plain (fixed-rate gradient descent, windowed-plateau stop) so
runs are reproducible to the bit.

`episodic_vs_union_loss` is the executable form of the bound that the best
union model upper-bounds episodic performance: per-task optimal heads are
warm-started from the global head's row restriction, which makes the
inequality hold by monotone descent rather than by hoping for convergence.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from metalab.nets import (
    Batch,
    NetSpec,
    NumericalError,
    ParamVector,
    cross_entropy,
    forward,
    loss_and_grad,
    loss_and_grad_through_updates,
    net_loss,
    softmax,
)
from metalab.tasks import Benchmark, FewShotTask, sample_task, union_dataset

PLATEAU_WINDOW = 20


class TrainingError(RuntimeError):
    """Training diverged or was misconfigured."""


@dataclass(frozen=True)
class Model:
    """A network spec plus its flat parameters.

    `head_boundary` is the flat index where the final layer's parameters
    start; everything before it is the body (the frozen feature extractor
    in head-refit evaluation).
    """

    spec: NetSpec
    params: ParamVector

    def __post_init__(self):
        if self.params.layout != self.spec.layout():
            raise ValueError("parameter layout does not match spec")

    @property
    def head_boundary(self) -> int:
        w_name, _ = self.spec.head_names()
        offset = 0
        for name, shape in self.params.layout:
            if name == w_name:
                return offset
            offset += int(np.prod(shape))
        raise RuntimeError("head segment missing from layout")

    def body_values(self) -> np.ndarray:
        return self.params.values[: self.head_boundary]

    def head(self) -> tuple[np.ndarray, np.ndarray]:
        w_name, b_name = self.spec.head_names()
        segs = self.params.segments()
        return segs[w_name], segs[b_name]

    def body_features(self, inputs: np.ndarray) -> np.ndarray:
        """Activations entering the head (identity for a single layer)."""
        inputs = np.asarray(inputs, dtype=np.float64)
        segs = self.params.segments()
        h = inputs
        for i in range(self.spec.num_layers - 1):
            h = np.maximum(h @ segs[f"W{i}"] + segs[f"b{i}"], 0.0)
        return h


@dataclass(frozen=True)
class TrainConfig:
    """Everything a training run needs besides the benchmark.

    `method` picks the regime ("pt", "fo_maml", "ho_maml"). `meta_batch`
    is the number of episodes per outer step during episodic training.
    Stopping: the run ends when the relative improvement of the train loss
    over a sliding window of PLATEAU_WINDOW evaluations drops below
    `convergence_tol`, or at `max_epochs`. Episode shape defaults to
    5-way 5-shot with 15 queries.
    """

    method: str
    outer_lr: float = 0.2
    inner_lr: float = 0.05
    inner_steps_train: int = 5
    meta_batch: int = 8
    max_epochs: int = 300
    convergence_tol: float = 1e-4
    seed: int = 0
    hidden_dims: tuple[int, ...] = (32,)
    n_way: int = 5
    k_shot: int = 5
    q_query: int = 15
    examples_per_class: int = 20

    def __post_init__(self):
        if self.method not in ("pt", "fo_maml", "ho_maml"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.outer_lr <= 0 or self.inner_lr <= 0:
            raise ValueError("learning rates must be positive")
        if self.inner_steps_train < 0 or self.meta_batch < 1 or self.max_epochs < 0:
            raise ValueError("counts must be nonnegative (meta_batch positive)")
        object.__setattr__(self, "hidden_dims", tuple(self.hidden_dims))


@dataclass(frozen=True)
class TrainResult:
    """Final model, per-evaluation train loss curve, and stop diagnostics."""

    model: Model
    loss_curve: tuple[float, ...]
    epochs_run: int
    converged: bool


@dataclass(frozen=True)
class EvalResult:
    """Per-task meta-test accuracies with their normal-approximation CI."""

    per_task_accuracy: tuple[float, ...]
    mean: float
    ci95_halfwidth: float
    meta_batch: int

    def __post_init__(self):
        accs = tuple(float(a) for a in self.per_task_accuracy)
        object.__setattr__(self, "per_task_accuracy", accs)
        if len(accs) != self.meta_batch:
            raise ValueError("meta_batch must equal the number of accuracies")
        if accs and abs(self.mean - float(np.mean(accs))) > 1e-12:
            raise ValueError("mean must be the average of per_task_accuracy")

    @classmethod
    def from_accuracies(cls, accs: Sequence[float]) -> "EvalResult":
        accs = tuple(float(a) for a in accs)
        n = len(accs)
        mean = float(np.mean(accs))
        half = 0.0
        if n >= 2:
            half = float(1.96 * np.std(accs, ddof=1) / np.sqrt(n))
        return cls(per_task_accuracy=accs, mean=mean, ci95_halfwidth=half, meta_batch=n)


def _plateaued(curve: list[float], tol: float) -> bool:
    """Window-averaged train loss stopped improving.

    Compares the mean of the last PLATEAU_WINDOW evaluations against the
    mean of the window before it; averaging keeps episodic sampling noise
    from tripping the stop early.
    """
    if len(curve) < 2 * PLATEAU_WINDOW:
        return False
    prev = float(np.mean(curve[-2 * PLATEAU_WINDOW:-PLATEAU_WINDOW]))
    last = float(np.mean(curve[-PLATEAU_WINDOW:]))
    return (prev - last) / max(abs(prev), 1e-12) < tol


def train_pt(benchmark: Benchmark, config: TrainConfig) -> TrainResult:
    """Supervised descent on the union dataset under global labels.

    The head spans every global class of the benchmark; classes outside the
    train split simply never occur. Full-batch gradient descent at
    `outer_lr` until plateau or `max_epochs`.
    """
    if config.method != "pt":
        raise ValueError(f"train_pt requires method 'pt', got {config.method!r}")
    spec = NetSpec(benchmark.input_dim, config.hidden_dims, benchmark.total_classes)
    params = spec.init(config.seed)
    data = union_dataset(benchmark, "train", config.examples_per_class, config.seed)
    loss_fn = net_loss(spec, data)
    curve: list[float] = []
    converged = False
    epoch = 0
    for epoch in range(1, config.max_epochs + 1):
        try:
            value, g = loss_and_grad(loss_fn, params)
        except NumericalError as err:
            raise TrainingError(f"pre-training diverged at epoch {epoch}: {err}") from err
        params = ParamVector(params.values - config.outer_lr * g.values, params.layout)
        curve.append(value)
        if _plateaued(curve, config.convergence_tol):
            converged = True
            break
    if config.max_epochs == 0:
        epoch = 0
    return TrainResult(model=Model(spec, params), loss_curve=tuple(curve),
                       epochs_run=epoch, converged=converged)


def train_maml(benchmark: Benchmark, config: TrainConfig) -> TrainResult:
    """Episodic bilevel descent (first- or higher-order outer gradients).

    Each outer step samples `meta_batch` train episodes, adapts on each
    support set for `inner_steps_train` steps at `inner_lr`, and descends
    the mean query loss at `outer_lr`. The higher-order method
    differentiates through the inner updates; the first-order method
    detaches them. Episode draws come from the ("episode", epoch, index)
    streams of `config.seed`, so trajectories are reproducible.
    """
    if config.method not in ("fo_maml", "ho_maml"):
        raise ValueError(f"train_maml requires a maml method, got {config.method!r}")
    first_order = config.method == "fo_maml"
    spec = NetSpec(benchmark.input_dim, config.hidden_dims, config.n_way)
    params = spec.init(config.seed)
    curve: list[float] = []
    converged = False
    epoch = 0
    for epoch in range(1, config.max_epochs + 1):
        grads = np.zeros_like(params.values)
        total = 0.0
        for j in range(config.meta_batch):
            task = sample_task(benchmark, "train", config.n_way, config.k_shot,
                               config.q_query, (config.seed, epoch, j))
            try:
                value, g = loss_and_grad_through_updates(
                    net_loss(spec, task.query), params,
                    config.inner_steps_train, config.inner_lr,
                    inner_loss_fn=net_loss(spec, task.support),
                    first_order=first_order)
            except NumericalError as err:
                raise TrainingError(
                    f"meta-training diverged at epoch {epoch}: {err}") from err
            grads += g.values
            total += value
        params = ParamVector(
            params.values - config.outer_lr * grads / config.meta_batch, params.layout)
        curve.append(total / config.meta_batch)
        if _plateaued(curve, config.convergence_tol):
            converged = True
            break
    if config.max_epochs == 0:
        epoch = 0
    return TrainResult(model=Model(spec, params), loss_curve=tuple(curve),
                       epochs_run=epoch, converged=converged)


def adapt(model: Model, support: Batch, steps: int, lr: float) -> Model:
    """Full-parameter descent on the support cross-entropy, exactly `steps`.

    The input model is untouched; zero steps (or zero rate) return its
    parameters bit-for-bit.
    """
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    if steps == 0:
        return model
    loss_fn = net_loss(model.spec, support)
    params = model.params
    for _ in range(steps):
        try:
            _, g = loss_and_grad(loss_fn, params)
        except NumericalError as err:
            raise NumericalError(f"adaptation hit a non-finite loss: {err}") from err
        params = ParamVector(params.values - lr * g.values, params.layout)
    return Model(model.spec, params)


def _logistic_head_fit(features: np.ndarray, labels: np.ndarray, n_classes: int,
                       init: tuple[np.ndarray, np.ndarray] | None,
                       tol: float, max_iter: int) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic full-batch descent to the multinomial-logistic optimum.

    Step size is 1/L where L = lambda_max(Xa^T Xa)/(2n) bounds the softmax
    cross-entropy Hessian, so every iteration descends; stops when the
    gradient's max-abs entry is at most `tol` or after `max_iter` rounds.
    """
    n, f = features.shape
    xa = np.hstack([features, np.ones((n, 1))])
    lam = float(np.linalg.eigvalsh(xa.T @ xa)[-1])
    step = 2.0 * n / max(lam, 1e-300)
    if init is None:
        wa = np.zeros((f + 1, n_classes))
    else:
        w0, b0 = init
        wa = np.vstack([np.asarray(w0, dtype=np.float64),
                        np.asarray(b0, dtype=np.float64)[None, :]])
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), labels] = 1.0
    for _ in range(max_iter):
        probs = softmax(xa @ wa)
        g = xa.T @ (probs - onehot) / n
        if np.abs(g).max() <= tol:
            break
        wa = wa - step * g
    return wa[:-1], wa[-1]


def fit_head(model: Model, support: Batch, n_classes: int | None = None,
             init_head: tuple[np.ndarray, np.ndarray] | None = None,
             tol: float = 1e-8, max_iter: int = 5000) -> Model:
    """Freeze the body and refit a fresh multinomial-logistic head.

    The head width defaults to the number of label values in `support`.
    `init_head` warm-starts the fit (used by the episodic-vs-union bound,
    where starting at the global head's restriction makes monotonicity do
    the proving); the default zero start is the deterministic baseline.
    """
    if len(support) == 0:
        raise ValueError("fit_head needs a nonempty support set")
    labels = support.labels
    width = int(labels.max()) + 1 if n_classes is None else int(n_classes)
    if width < 2:
        raise ValueError("head needs at least 2 classes")
    features = model.body_features(support.inputs)
    w, b = _logistic_head_fit(features, labels, width, init_head, tol, max_iter)
    new_spec = NetSpec(model.spec.input_dim, model.spec.hidden_dims, width)
    w_name, b_name = new_spec.head_names()
    segs = model.params.segments()
    segs[w_name] = w
    segs[b_name] = b
    return Model(new_spec, ParamVector.from_segments(new_spec.layout(), segs))


def _accuracy(model: Model, batch: Batch) -> float:
    logits = forward(model.spec, model.params, batch)
    return float(np.mean(np.argmax(logits, axis=1) == batch.labels))


def meta_test(model: Model, method: str, tasks: Sequence[FewShotTask],
              steps: int = 5, lr: float = 0.05) -> EvalResult:
    """Per-task adaptation and query accuracy over a batch of episodes.

    `method` is "pt_head_refit" (freeze body, refit head on support) or
    "maml_adapt" (`steps` full-parameter descent steps at `lr` on support).
    Results are order-independent per task, so the accuracy vector permutes
    with `tasks`.
    """
    if not tasks:
        raise ValueError("meta_test needs at least one task")
    accs: list[float] = []
    for task in tasks:
        if method == "pt_head_refit":
            adapted = fit_head(model, task.support)
        elif method == "maml_adapt":
            adapted = adapt(model, task.support, steps, lr)
        else:
            raise ValueError(f"unknown meta_test method {method!r}")
        accs.append(_accuracy(adapted, task.query))
    return EvalResult.from_accuracies(accs)


def model_l2_norm(model: Model) -> float:
    """Euclidean norm of the full parameter vector."""
    return float(np.linalg.norm(model.params.values))


def episodic_vs_union_loss(model: Model, benchmark: Benchmark,
                           tasks: Sequence[FewShotTask]) -> tuple[float, float]:
    """Evaluate the episodic-optimal-head loss against the one-global-head loss.

    Pools every task's query rows under their global labels, fits one
    global head on the pool (body frozen), and reports:

    - union loss: cross-entropy of that single head over the pooled rows;
    - episodic loss: example-weighted mean over tasks of the cross-entropy
      of a per-task head fitted on that task's rows, warm-started at the
      global head's restriction to the task's classes.

    Restricting the softmax to a task's classes can only drop the loss,
    and descent from the restriction can only drop it further, so
    episodic <= union holds for any fixed body, converged or not.
    """
    if not tasks:
        raise ValueError("episodic_vs_union_loss needs at least one task")
    pooled_inputs = np.concatenate([t.query.inputs for t in tasks])
    pooled_globals = np.concatenate([
        np.asarray(t.class_ids, dtype=np.int64)[t.query.labels] for t in tasks])
    pooled = Batch(pooled_inputs, pooled_globals)
    global_model = fit_head(model, pooled, n_classes=benchmark.total_classes)
    union_loss = cross_entropy(
        forward(global_model.spec, global_model.params, pooled), pooled.labels)
    w_global, b_global = global_model.head()
    total_rows = 0
    weighted = 0.0
    for task in tasks:
        cols = np.asarray(task.class_ids, dtype=np.int64)
        restricted = (w_global[:, cols], b_global[cols])
        task_model = fit_head(model, task.query, n_classes=task.n_way,
                              init_head=restricted)
        loss = cross_entropy(
            forward(task_model.spec, task_model.params, task.query), task.query.labels)
        rows = len(task.query)
        weighted += loss * rows
        total_rows += rows
    return weighted / total_rows, union_loss
