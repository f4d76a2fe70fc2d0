"""The iterated-map regressor: forward pass, loss gradients, and training.

A model extends each feature vector x with m target slots and l latent
slots (initial values in init_state, zeros by default), applies one shared
polynomial map p times, and reads the target slots of the final state as
the prediction.  Because the p layers share one coefficient matrix, the
composition realizes a polynomial of order up to k^p while the parameter
count stays that of a single order-k map.

Training is plain reverse-mode accumulation through the p applications:
each layer contributes phi(Z_t)^T G_{t+1} to the shared-weight gradient,
and G_t chains G_{t+1} through the layer Jacobian.  The optimizer is
Adamax (see optim); a forward pass that overflows is treated as an
exploding step, which is skipped with the learning rate halved for the
rest of the epoch.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .basis import MonomialBasis, build_basis, eval_monomials_batch
from .data import Dataset, metric_mse
from .errors import DivergenceError, TrainingDivergedError
from .optim import AdamaxState, adamax_step, clip_gradient
from .taylor_map import TaylorMapWeights, identity_weights


@dataclass
class Scaler:
    """Per-feature affine standardization: x -> (x - mean) / scale."""

    mean: np.ndarray
    scale: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.scale = np.asarray(self.scale, dtype=np.float64)
        if self.mean.shape != self.scale.shape or self.mean.ndim != 1:
            raise ValueError("mean and scale must be 1-D arrays of equal length")
        if not np.all(self.scale > 0):
            raise ValueError("all scale entries must be positive")

    @classmethod
    def fit(cls, X: np.ndarray) -> "Scaler":
        """Mean/std scaler from data; zero-variance columns get scale 1."""
        mean = X.mean(axis=0)
        scale = X.std(axis=0)
        scale = np.where(scale > 0, scale, 1.0)
        return cls(mean=mean, scale=scale)

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (X - self.mean) / self.scale


@dataclass
class TmpnnModel:
    """A Taylor-map regressor.

    Attributes:
        n_features: width n of the input feature vectors.
        n_targets: number m of predicted values.
        n_latent: number l of extra latent state slots (>= 0).
        order: polynomial order k of the shared map.
        steps: number p of map applications.
        map: the shared TaylorMapWeights with dim = n + m + l.
        init_state: length m + l initial values of the non-feature slots.
        init_trainable: whether fit() also learns init_state.
        reg_l1, reg_l2: coefficients penalizing the literal weight matrix.
        standardize: whether fit() standardizes features (z-score).
        scaler: fitted standardization parameters, or None before fitting
            (and always None when standardize is off).
    """

    n_features: int
    n_targets: int
    n_latent: int
    order: int
    steps: int
    map: TaylorMapWeights
    init_state: np.ndarray
    init_trainable: bool = False
    reg_l1: float = 0.0
    reg_l2: float = 0.0
    standardize: bool = True
    scaler: Scaler | None = None

    def __post_init__(self):
        if self.n_features < 1 or self.n_targets < 1 or self.n_latent < 0:
            raise ValueError("need n_features >= 1, n_targets >= 1, n_latent >= 0")
        if self.steps < 1 or self.order < 1:
            raise ValueError("need steps >= 1 and order >= 1")
        if self.map.dim != self.dim:
            raise ValueError(f"map dimension {self.map.dim} does not equal "
                             f"n_features + n_targets + n_latent = {self.dim}")
        if self.reg_l1 < 0 or self.reg_l2 < 0:
            raise ValueError("regularization coefficients must be >= 0")
        self.init_state = np.asarray(self.init_state, dtype=np.float64)
        if self.init_state.shape != (self.n_targets + self.n_latent,):
            raise ValueError(f"init_state must have length "
                             f"{self.n_targets + self.n_latent}")

    @property
    def dim(self) -> int:
        return self.n_features + self.n_targets + self.n_latent

    @property
    def basis(self) -> MonomialBasis:
        return self.map.basis

    @classmethod
    def create(cls, n_features: int, n_targets: int, *, n_latent: int = 0,
               order: int = 3, steps: int = 5, init: str = "identity",
               seed: int = 0, init_trainable: bool = False,
               reg_l1: float = 0.0, reg_l2: float = 0.0,
               standardize: bool = True) -> "TmpnnModel":
        """Build a fresh model.

        init is "identity" (the map starts as the identity) or "perturbed"
        (identity plus N(0, 1e-4)-variance noise on every coefficient).
        """
        dim = n_features + n_targets + n_latent
        weights = identity_weights(dim, order)
        if init == "perturbed":
            rng = np.random.default_rng(seed)
            weights.delta += rng.normal(0.0, 0.01, size=weights.delta.shape)
        elif init != "identity":
            raise ValueError(f"init must be 'identity' or 'perturbed', got {init!r}")
        return cls(n_features=n_features, n_targets=n_targets, n_latent=n_latent,
                   order=order, steps=steps, map=weights,
                   init_state=np.zeros(n_targets + n_latent),
                   init_trainable=init_trainable,
                   reg_l1=reg_l1, reg_l2=reg_l2, standardize=standardize)

    def initial_state(self, X: np.ndarray) -> np.ndarray:
        """Extended start states: scaled features then init_state slots."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} feature columns, "
                             f"got {X.shape[1]}")
        if self.scaler is not None:
            X = self.scaler.transform(X)
        z0 = np.empty((X.shape[0], self.dim))
        z0[:, :self.n_features] = X
        z0[:, self.n_features:] = self.init_state
        return z0


@dataclass
class TrainConfig:
    """Knobs for fit().  batch_size may be the string "full"."""

    epochs: int = 1000
    batch_size: int | str = 256
    learning_rate: float = 0.002
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    loss: str = "mse"
    shuffle_seed: int = 0
    early_stop: tuple[int, float] | None = None
    grad_clip: float | None = None

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if isinstance(self.batch_size, str):
            if self.batch_size != "full":
                raise ValueError("batch_size must be a positive int or 'full'")
        elif self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.loss != "mse":
            raise ValueError("only the mse loss is supported")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")


@dataclass
class TrainReport:
    """Per-epoch losses and final full-pass metrics from one fit() call.

    train_losses hold the epoch-mean training objective (data MSE plus any
    regularization penalty); valid_losses hold plain validation MSE.
    """

    train_losses: list[float] = field(default_factory=list)
    valid_losses: list[float] | None = None
    best_epoch: int = 0
    epochs_run: int = 0
    diverged_steps: int = 0
    final_train_mse: float = float("nan")
    final_valid_mse: float | None = None


def _forward_states(model: TmpnnModel, Z0: np.ndarray,
                    keep_phis: bool = False):
    """Run the p map applications on a batch of start states.

    Returns (states, phis): states is a list of p+1 (N, dim) arrays and
    phis the monomial matrices of the first p states when requested.
    Raises DivergenceError with the step and first offending row when a
    state goes non-finite.
    """
    delta = model.map.delta
    basis = model.basis
    states = [Z0]
    phis = []
    Z = Z0
    for t in range(model.steps):
        # overflow surfaces as a structured DivergenceError, not a warning
        with np.errstate(over="ignore", invalid="ignore"):
            phi = eval_monomials_batch(basis, Z)
            Z = Z + phi @ delta
        if not np.all(np.isfinite(Z)):
            row = int(np.where(~np.isfinite(Z).all(axis=1))[0][0])
            raise DivergenceError(
                f"state became non-finite at map application {t + 1} "
                f"(batch row {row}); consider standardized features or a "
                f"smaller learning rate", step=t + 1, row=row,
                state=states[-1][row])
        if keep_phis:
            phis.append(phi)
        states.append(Z)
    return states, phis


def forward(model: TmpnnModel, x) -> tuple[np.ndarray, list[np.ndarray]]:
    """Predict one sample and return the full state trajectory.

    Args:
        model: the regressor.
        x: feature vector of length n_features.

    Returns:
        (prediction, trajectory): prediction has length n_targets;
        trajectory is the list of p+1 extended states, starting from the
        (scaled) input state.

    Raises:
        DivergenceError: if the trajectory overflows; carries the step.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("forward takes a single feature vector")
    states, _ = _forward_states(model, model.initial_state(x[None, :]))
    n, m = model.n_features, model.n_targets
    prediction = states[-1][0, n:n + m].copy()
    return prediction, [s[0] for s in states]


def predict(model: TmpnnModel, X) -> np.ndarray:
    """Predict an (N, n_targets) matrix for an (N, n_features) input."""
    Z0 = model.initial_state(X)
    states, _ = _forward_states(model, Z0)
    n, m = model.n_features, model.n_targets
    return states[-1][:, n:n + m].copy()


def _loss_grad_arrays(model: TmpnnModel, X: np.ndarray, Y: np.ndarray):
    """Batch loss and gradients w.r.t. map.delta (and init_state if trainable).

    The data term is the mean squared error over every target entry; L1/L2
    penalties apply to the literal coefficient matrix, identity diagonal
    included.
    """
    n, m = model.n_features, model.n_targets
    basis = model.basis
    delta = model.map.delta
    Z0 = model.initial_state(X)
    states, phis = _forward_states(model, Z0, keep_phis=True)

    pred = states[-1][:, n:n + m]
    resid = pred - Y
    nb = X.shape[0]
    loss = float(np.mean(resid ** 2))

    G = np.zeros_like(Z0)
    G[:, n:n + m] = (2.0 / (nb * m)) * resid

    d_delta = np.zeros_like(delta)
    # near-divergent batches may overflow here; fit() skips such steps
    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(model.steps - 1, -1, -1):
            phi = phis[t]
            d_delta += phi.T @ G
            # chain G through the layer Jacobian I + dphi/dz @ delta
            B = G @ delta.T
            Gprev = G.copy()
            for i in range(model.dim):
                Gprev[:, i] += (phi[:, basis.jac_parents[i]]
                                * B[:, basis.jac_rows[i]]) @ basis.jac_exps[i]
            G = Gprev

    if model.reg_l1 > 0 or model.reg_l2 > 0:
        W = model.map.W
        if model.reg_l1 > 0:
            loss += model.reg_l1 * float(np.sum(np.abs(W)))
            d_delta += model.reg_l1 * np.sign(W)
        if model.reg_l2 > 0:
            loss += model.reg_l2 * float(np.sum(W ** 2))
            d_delta += 2.0 * model.reg_l2 * W

    d_init = G[:, n:].sum(axis=0) if model.init_trainable else None
    return loss, d_delta, d_init


def loss_and_gradient(model: TmpnnModel, batch: Dataset):
    """Training objective and its gradient on one batch.

    Returns:
        (loss, gradients) where gradients is a dict with key "delta"
        (shaped like the stored weight matrix) and, when init_state is
        trainable, key "init_state".

    Raises:
        DivergenceError: when the forward pass overflows.
    """
    if batch.n_features != model.n_features or batch.n_targets != model.n_targets:
        raise ValueError("batch width does not match the model")
    loss, d_delta, d_init = _loss_grad_arrays(model, batch.X, batch.Y)
    grads = {"delta": d_delta}
    if d_init is not None:
        grads["init_state"] = d_init
    return loss, grads


def _metric_mse_or_inf(model: TmpnnModel, data: Dataset) -> float:
    """Full-pass MSE; inf when some row's forward pass diverges.

    Training survives divergent batches, so the bookkeeping passes must
    not be the thing that crashes a run.
    """
    try:
        return metric_mse(data.Y, predict(model, data.X))
    except DivergenceError:
        return float("inf")


def fit(model: TmpnnModel, train: Dataset, valid: Dataset | None = None,
        config: TrainConfig | None = None) -> TrainReport:
    """Train the model in place with Adamax; returns a TrainReport.

    Features are standardized first when model.standardize is set (the
    scaler is fitted on the training split).  A diverging batch is skipped
    and the learning rate halved for the remainder of that epoch; if every
    batch of an epoch diverges, TrainingDivergedError is raised.  A
    validation or final metric pass that diverges records inf instead of
    failing the run.  With early_stop configured and a validation set
    given, the weights from the best validation epoch are restored at the
    end.
    """
    if config is None:
        config = TrainConfig()
    if train.n_features != model.n_features or train.n_targets != model.n_targets:
        raise ValueError("training data width does not match the model")
    if valid is not None and (valid.n_features != model.n_features
                              or valid.n_targets != model.n_targets):
        raise ValueError("validation data width does not match the model")

    if model.standardize:
        model.scaler = Scaler.fit(train.X)

    n_rows = train.n_samples
    batch = n_rows if config.batch_size == "full" else min(int(config.batch_size), n_rows)
    rng = np.random.default_rng(config.shuffle_seed)
    opt = AdamaxState.init(
        [model.map.delta] + ([model.init_state] if model.init_trainable else []),
        alpha=config.learning_rate, beta1=config.beta1, beta2=config.beta2,
        epsilon=config.epsilon)

    report = TrainReport(valid_losses=[] if valid is not None else None)
    best_valid = np.inf
    best_snapshot = None
    since_improve = 0

    for epoch in range(config.epochs):
        lr = config.learning_rate
        perm = rng.permutation(n_rows)
        losses = []
        for start in range(0, n_rows, batch):
            idx = perm[start:start + batch]
            try:
                loss, d_delta, d_init = _loss_grad_arrays(
                    model, train.X[idx], train.Y[idx])
            except DivergenceError:
                report.diverged_steps += 1
                lr *= 0.5
                continue
            # an overflowing backward pass is the same exploding-step event
            if (not np.isfinite(loss)
                    or not np.all(np.isfinite(d_delta))
                    or (d_init is not None and not np.all(np.isfinite(d_init)))):
                report.diverged_steps += 1
                lr *= 0.5
                continue
            params = [model.map.delta]
            grads = [d_delta]
            if model.init_trainable:
                params.append(model.init_state)
                grads.append(d_init)
            if config.grad_clip is not None:
                grads = clip_gradient(grads, config.grad_clip)
            params = adamax_step(opt, params, grads, lr=lr)
            model.map.delta = params[0]
            if model.init_trainable:
                model.init_state = params[1]
            losses.append(loss)

        if not losses:
            raise TrainingDivergedError(
                f"every batch diverged in epoch {epoch}; standardize the "
                f"features or lower the learning rate")
        report.train_losses.append(float(np.mean(losses)))
        report.epochs_run = epoch + 1

        if valid is not None:
            v = _metric_mse_or_inf(model, valid)
            report.valid_losses.append(v)
            if v < best_valid - (config.early_stop[1] if config.early_stop else 0.0):
                best_valid = v
                report.best_epoch = epoch
                since_improve = 0
                if config.early_stop is not None:
                    best_snapshot = (model.map.delta.copy(),
                                     model.init_state.copy())
            else:
                since_improve += 1
            if config.early_stop is not None and since_improve >= config.early_stop[0]:
                break
        else:
            if report.train_losses[-1] < best_valid:
                best_valid = report.train_losses[-1]
                report.best_epoch = epoch

    if best_snapshot is not None:
        model.map.delta, model.init_state = best_snapshot

    report.final_train_mse = _metric_mse_or_inf(model, train)
    if valid is not None:
        report.final_valid_mse = _metric_mse_or_inf(model, valid)
    return report
