# Copyright 2025 Google LLC
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Minibatch training and evaluation of ratio networks.

A run fits one network r(x) whose numerator is sample k and whose denominator
is a weighted mixture of all samples:

  mode        numerator  denominator weights       head
  dr          P          (0, 1)                     softplus_floor
  rdr         P          (alpha, 1 - alpha)         bounded_softplus
  ksample     P_k        (1/K, ..., 1/K)            bounded_softplus
  classifier  P          logistic loss, r = 2 sigma(z)   linear

Each step draws `batch_size` rows from every training split, scores them in
one stacked forward pass and updates the weights with Adam. The returned
network is the one with the lowest holdout loss over all epochs.
"""

import dataclasses
import enum
import hashlib
import logging
import math
from typing import Any

from rdr_eval import divergence
from rdr_eval import network
from rdr_eval import numerics
from rdr_eval.divergence import Objective
from rdr_eval.errors import ConfigError
from rdr_eval.errors import DataError
from rdr_eval.errors import NumericError
from rdr_eval.errors import ShapeError
from rdr_eval.network import Head
from rdr_eval.numerics import SampleMatrix

import numpy as np

logger = logging.getLogger(__name__)

MIN_ROWS = 10


class Mode(enum.Enum):
  DR = "dr"
  RDR = "rdr"
  KSAMPLE = "ksample"
  CLASSIFIER = "classifier"


class Scaling(enum.Enum):
  """Per-column input scaling fitted on the pooled training rows."""

  NONE = "none"
  ZSCORE = "zscore"
  RANGE = "range"


class SourceLabel(enum.Enum):
  REAL = "real"
  GENERATED = "generated"
  OTHER = "other"


@dataclasses.dataclass(frozen=True)
class TrainConfig:
  """Training protocol; see the module docstring for the modes."""

  mode: Mode = Mode.RDR
  alpha: float = 0.5
  epochs: int = 200
  batch_size: int = 128
  seed: int = 0
  hidden_widths: tuple[int, ...] = network.DEFAULT_HIDDEN_WIDTHS
  learning_rate: float = 1e-3
  beta1: float = 0.9
  beta2: float = 0.999
  eps: float = 1e-8
  holdout_fraction: float = 0.2
  scaling: Scaling = Scaling.RANGE
  objective: Objective = Objective.HELLINGER_SQ
  log_every: int = 20

  def __post_init__(self):
    object.__setattr__(self, "mode", Mode(self.mode))
    object.__setattr__(self, "objective", Objective(self.objective))
    object.__setattr__(self, "scaling", Scaling(self.scaling))
    object.__setattr__(self, "hidden_widths",
                       tuple(int(w) for w in self.hidden_widths))
    if self.epochs < 1:
      raise ConfigError(f"epochs must be at least 1, got {self.epochs}")
    if self.batch_size < 1:
      raise ConfigError(f"batch_size must be at least 1, got {self.batch_size}")
    if not 0.0 <= self.holdout_fraction <= 0.5:
      raise ConfigError(
          f"holdout_fraction must lie in [0, 0.5], got {self.holdout_fraction}"
      )
    if self.mode is Mode.RDR and not 0.0 < self.alpha < 1.0:
      raise ConfigError(f"rdr mode needs alpha in (0, 1), got {self.alpha}")
    if (self.objective is not Objective.HELLINGER_SQ
        and self.mode is not Mode.DR):
      raise ConfigError(
          f"objective {self.objective.value} is only available in dr mode"
      )

  @property
  def effective_alpha(self) -> float:
    """Weight of the numerator sample in the reported mixture."""
    if self.mode is Mode.DR:
      return 0.0
    if self.mode is Mode.RDR:
      return self.alpha
    return 0.5

  def head(self) -> Head:
    if self.mode is Mode.CLASSIFIER or self.objective is not (
        Objective.HELLINGER_SQ):
      return Head.LINEAR
    if self.mode is Mode.DR:
      return Head.SOFTPLUS_FLOOR
    return Head.BOUNDED_SOFTPLUS

  def network_spec(self, input_dim: int) -> network.NetworkSpec:
    return network.NetworkSpec(input_dim, self.hidden_widths, self.head())


@dataclasses.dataclass(frozen=True)
class Scaler:
  """Affine column map (x - center) / scale applied before the network.

  RANGE sends the training rows onto [-1, 1]; ZSCORE gives them zero mean
  and unit variance. Constant columns keep a scale of 1.
  """

  center: np.ndarray
  scale: np.ndarray
  kind: Scaling = Scaling.RANGE

  @classmethod
  def fit(cls, values: np.ndarray, kind: Scaling) -> "Scaler":
    if kind is Scaling.ZSCORE:
      center, scale = values.mean(axis=0), values.std(axis=0)
    elif kind is Scaling.RANGE:
      lo, hi = values.min(axis=0), values.max(axis=0)
      center, scale = 0.5 * (lo + hi), 0.5 * (hi - lo)
    else:
      raise ConfigError(f"scaling {kind.value} has nothing to fit")
    return cls(center, np.where(scale > 0.0, scale, 1.0), kind)

  @classmethod
  def from_dict(cls, data: dict[str, Any]) -> "Scaler":
    # Files written before range scaling carry {"mean", "scale"}.
    center = data["center"] if "center" in data else data["mean"]
    return cls(np.asarray(center, dtype=np.float64),
               np.asarray(data["scale"], dtype=np.float64),
               Scaling(data.get("kind", "zscore")))

  def apply(self, values: np.ndarray) -> np.ndarray:
    return (values - self.center) / self.scale

  def to_dict(self) -> dict[str, Any]:
    return {
        "kind": self.kind.value,
        "center": self.center.tolist(),
        "scale": self.scale.tolist(),
    }


@dataclasses.dataclass(frozen=True)
class TrainedRatio:
  """A fitted ratio network together with how it was trained."""

  params: network.NetworkParams
  spec: network.NetworkSpec
  mode: Mode
  alpha: float
  seed: int
  objective: Objective = Objective.HELLINGER_SQ
  holdout: divergence.LossReport | None = None
  scaler: Scaler | None = None
  mixture_weights: tuple[float, ...] = ()
  numerator: int = 0

  @property
  def clamps(self) -> dict[str, float]:
    return {
        "g_min": divergence.G_MIN,
        "g_max": divergence.G_MAX,
        "r_floor": divergence.R_FLOOR,
        "softplus_floor": network.SOFTPLUS_FLOOR,
    }

  @property
  def model_id(self) -> str:
    """Content hash of the architecture and weights."""
    body = network.serialize(self.params, self.spec)
    return hashlib.sha256(body.encode("utf-8")).hexdigest()[:16]

  def raw_outputs(self, x) -> np.ndarray:
    values = x.values if isinstance(x, SampleMatrix) else np.asarray(
        x, dtype=np.float64)
    if values.ndim != 2 or values.shape[1] != self.spec.input_dim:
      raise ShapeError(
          f"data of shape {values.shape} for a model expecting"
          f" {self.spec.input_dim} columns"
      )
    if self.scaler is not None:
      values = self.scaler.apply(values)
    outputs, _ = network.forward(self.params, self.spec, values)
    return outputs

  def scores(self, x) -> np.ndarray:
    """Ratio values in the model's reporting space.

    rdr, ksample and classifier models report the relative ratio in (0, 2);
    dr models report the density ratio.
    """
    outputs = self.raw_outputs(x)
    if self.mode is Mode.CLASSIFIER:
      return _classifier_rdr(outputs)
    if self.objective is Objective.KL:
      return divergence.kl_ratio(outputs)
    if self.objective is Objective.CHI_SQ:
      return divergence.chisq_ratio(outputs)
    return outputs

  def meta(self) -> dict[str, Any]:
    return {
        "mode": self.mode.value,
        "alpha": self.alpha,
        "seed": self.seed,
        "clamps": self.clamps,
        "objective": self.objective.value,
        "mixture_weights": list(self.mixture_weights),
        "numerator": self.numerator,
        "scaling": self.scaler.to_dict() if self.scaler is not None else None,
        "holdout": self.holdout.to_dict() if self.holdout else None,
    }

  def to_json(self, extra_meta: dict[str, Any] | None = None) -> str:
    return network.serialize(self.params, self.spec,
                             {**self.meta(), **(extra_meta or {})})

  @classmethod
  def from_json(cls, text: str) -> "TrainedRatio":
    return cls.from_document(network.deserialize_document(text))

  @classmethod
  def from_document(cls, document: network.ModelDocument) -> "TrainedRatio":
    meta = document.meta
    scaling = meta.get("scaling") or meta.get("standardize")
    holdout = meta.get("holdout")
    try:
      return cls(
          params=document.params,
          spec=document.spec,
          mode=Mode(meta.get("mode", "rdr")),
          alpha=float(meta.get("alpha", 0.5)),
          seed=int(meta.get("seed", 0)),
          objective=Objective(meta.get("objective", "hellinger_sq")),
          holdout=divergence.LossReport(**holdout) if holdout else None,
          scaler=Scaler.from_dict(scaling) if scaling else None,
          mixture_weights=tuple(meta.get("mixture_weights", ())),
          numerator=int(meta.get("numerator", 0)),
      )
    except (KeyError, TypeError, ValueError) as e:
      raise DataError(f"model meta block is invalid: {e}") from e


@dataclasses.dataclass(frozen=True)
class ScoreSet:
  """Ratio evaluations of one sample under one model."""

  scores: np.ndarray
  source_label: SourceLabel
  model_id: str
  sample_ids: tuple[str, ...] | None = None

  def __post_init__(self):
    object.__setattr__(self, "scores",
                       np.asarray(self.scores, dtype=np.float64).reshape(-1))
    object.__setattr__(self, "source_label", SourceLabel(self.source_label))
    if self.sample_ids is not None:
      object.__setattr__(self, "sample_ids",
                         tuple(str(i) for i in self.sample_ids))
      if len(self.sample_ids) != self.scores.size:
        raise ShapeError(
            f"{len(self.sample_ids)} ids for {self.scores.size} scores"
        )

  def __len__(self) -> int:
    return self.scores.size

  def ids(self) -> tuple[str, ...]:
    if self.sample_ids is not None:
      return self.sample_ids
    return tuple(str(i) for i in range(self.scores.size))


@dataclasses.dataclass
class TrainTrace:
  """Per-epoch mean training loss and holdout loss."""

  train_loss: list[float] = dataclasses.field(default_factory=list)
  holdout_loss: list[float] = dataclasses.field(default_factory=list)
  best_epoch: int = -1


def _classifier_rdr(z: np.ndarray) -> np.ndarray:
  # With equal per-sample weighting the posterior odds are p/q, so r = 2 sigma.
  return np.clip(2.0 * numerics.logistic(z), np.finfo(np.float64).tiny,
                 np.nextafter(2.0, 0.0))


class _Objective:
  """Loss and score-gradient of one training problem.

  Relative-ratio networks train on the balancing loss of the density ratio
  g they imply against the other mixture components; its minimizer is the
  same r. Holdout reports use the mixture loss of r itself.
  """

  def __init__(self, config: TrainConfig, weights: list[float],
               numerator: int):
    self.config = config
    self.numerator = numerator
    self.alpha = weights[numerator]
    # Weights of the non-numerator components renormalized to sum to 1.
    self.rest_weights = [
        0.0 if k == numerator else w / (1.0 - self.alpha)
        for k, w in enumerate(weights)
    ]

  def loss(self, outputs: list[np.ndarray]) -> float:
    return self.loss_and_grad(outputs, with_grad=False)[0]

  def loss_and_grad(
      self, outputs: list[np.ndarray], with_grad: bool = True
  ) -> tuple[float, list[np.ndarray] | None]:
    mode, objective = self.config.mode, self.config.objective
    if mode is Mode.CLASSIFIER:
      z_p, z_q = outputs
      loss = 0.5 * float(np.mean(numerics.stable_softplus(-z_p))) + 0.5 * float(
          np.mean(numerics.stable_softplus(z_q)))
      if not with_grad:
        return loss, None
      return loss, [
          -0.5 * numerics.logistic(-z_p) / z_p.size,
          0.5 * numerics.logistic(z_q) / z_q.size,
      ]
    if objective is not Objective.HELLINGER_SQ:
      f_p, f_q = outputs
      fn = (divergence.kl_variational_loss if objective is Objective.KL
            else divergence.chisq_variational_loss)
      loss = float(fn(f_p, f_q))
      if not with_grad:
        return loss, None
      return loss, list(divergence.variational_loss_grad(objective, f_p, f_q))
    if mode is Mode.DR:
      slopes = [1.0] * len(outputs)
      ratios = outputs
    else:
      implied = [divergence.implied_dr(values, self.alpha)
                 for values in outputs]
      slopes = [slope for _, slope in implied]
      ratios = [g for g, _ in implied]
    guarded = [divergence.clamp_dr(values) for values in ratios]
    components = [values for values, _ in guarded]
    loss = divergence.mixture_balancing_loss(components, self.rest_weights,
                                             self.numerator)
    if not with_grad:
      return loss, None
    grads = divergence.mixture_balancing_loss_grad(
        components, self.rest_weights, self.numerator)
    return loss, [
        g * mask * slope
        for g, (_, mask), slope in zip(grads, guarded, slopes)
    ]


def _check_samples(samples: list[SampleMatrix]) -> None:
  if len(samples) < 2:
    raise ShapeError(f"at least two samples are required, got {len(samples)}")
  n_cols = samples[0].n_cols
  for k, sample in enumerate(samples):
    if sample.n_cols != n_cols:
      raise ShapeError(
          f"sample {k} has {sample.n_cols} columns, sample 0 has {n_cols}"
      )
    if sample.n_rows < MIN_ROWS:
      raise DataError(
          f"sample {k} has {sample.n_rows} rows; at least {MIN_ROWS} are"
          " required"
      )


def _split(sample: SampleMatrix, fraction: float,
           rng: numerics.RngState) -> tuple[np.ndarray, np.ndarray]:
  order = numerics.rng_permutation(rng, sample.n_rows)
  n_hold = int(round(sample.n_rows * fraction))
  return order[n_hold:], order[:n_hold]


def _epoch_order(rng: numerics.RngState, n: int, length: int) -> np.ndarray:
  parts = []
  while sum(p.size for p in parts) < length:
    parts.append(numerics.rng_permutation(rng, n))
  return np.concatenate(parts)[:length]


def _stacked_forward(params, spec, batches: list[np.ndarray]):
  scores, cache = network.forward(params, spec, np.concatenate(batches))
  bounds = np.cumsum([0] + [b.shape[0] for b in batches])
  parts = [scores[bounds[k]:bounds[k + 1]] for k in range(len(batches))]
  return parts, cache


def _fit(
    samples: list[SampleMatrix],
    numerator: int,
    weights: list[float],
    config: TrainConfig,
) -> tuple[TrainedRatio, TrainTrace]:
  _check_samples(samples)
  rng = numerics.RngState(config.seed)
  splits = [_split(s, config.holdout_fraction, rng) for s in samples]
  train_sets = [s.values[idx] for s, (idx, _) in zip(samples, splits)]
  hold_sets = [s.values[idx] for s, (_, idx) in zip(samples, splits)]
  if min(h.shape[0] for h in hold_sets) == 0:
    logger.warning("holdout split is empty; selecting on training loss")
    hold_sets = train_sets

  scaler = None
  if config.scaling is not Scaling.NONE:
    scaler = Scaler.fit(np.concatenate(train_sets), config.scaling)
    train_sets = [scaler.apply(t) for t in train_sets]
    hold_sets = [scaler.apply(h) for h in hold_sets]

  smallest = min(t.shape[0] for t in train_sets)
  batch_size = config.batch_size
  if batch_size > smallest:
    logger.info("batch_size %d exceeds the smallest training split; using %d",
                batch_size, smallest)
    batch_size = smallest
  steps = math.ceil(max(t.shape[0] for t in train_sets) / batch_size)

  spec = config.network_spec(samples[0].n_cols)
  params = network.init_params(spec, rng)
  adam = network.init_adam(params, config.learning_rate, config.beta1,
                           config.beta2, config.eps)
  objective = _Objective(config, weights, numerator)
  trace = TrainTrace()
  best_params, best_loss = params, math.inf

  for epoch in range(config.epochs):
    orders = [_epoch_order(rng, t.shape[0], steps * batch_size)
              for t in train_sets]
    step_losses = []
    for step in range(steps):
      window = slice(step * batch_size, (step + 1) * batch_size)
      batches = [t[o[window]] for t, o in zip(train_sets, orders)]
      outputs, cache = _stacked_forward(params, spec, batches)
      loss, grads = objective.loss_and_grad(outputs)
      if not math.isfinite(loss):
        raise NumericError(
            f"non-finite training loss at epoch {epoch}, step {step}",
            last_finite_epoch=epoch - 1,
        )
      step_losses.append(loss)
      param_grads = network.backward(params, spec, cache, np.concatenate(grads))
      params, adam = network.adam_step(params, param_grads, adam)
      logger.debug("epoch %d step %d loss %.6f", epoch, step, loss)

    holdout_outputs, _ = _stacked_forward(params, spec, hold_sets)
    holdout_loss = objective.loss(holdout_outputs)
    if not math.isfinite(holdout_loss):
      raise NumericError(f"non-finite holdout loss at epoch {epoch}",
                         last_finite_epoch=epoch - 1)
    trace.train_loss.append(float(np.mean(step_losses)))
    trace.holdout_loss.append(holdout_loss)
    if holdout_loss < best_loss:
      best_params, best_loss, trace.best_epoch = params, holdout_loss, epoch
    if config.log_every and (epoch + 1) % config.log_every == 0:
      logger.info("epoch %d/%d: train %.6f holdout %.6f", epoch + 1,
                  config.epochs, trace.train_loss[-1], holdout_loss)

  logger.info("selected epoch %d with holdout loss %.6f", trace.best_epoch,
              best_loss)
  model = TrainedRatio(
      params=best_params,
      spec=spec,
      mode=config.mode,
      alpha=config.effective_alpha,
      seed=config.seed,
      objective=config.objective,
      scaler=scaler,
      mixture_weights=tuple(weights),
      numerator=numerator,
  )
  # Holdout sets are already scaled; score the raw network directly.
  raw = dataclasses.replace(model, scaler=None)
  holdout = _mixture_report(raw, hold_sets, weights, numerator)
  return dataclasses.replace(model, holdout=holdout), trace


def _mixture_report(model: TrainedRatio, sets: list[np.ndarray],
                    weights: list[float],
                    numerator: int) -> divergence.LossReport:
  """Balancing-loss report of a model on one array per mixture component."""
  scores = [model.scores(s) for s in sets]
  if model.mode is Mode.DR:
    components = [divergence.clamp_dr(s)[0] for s in scores]
    weights = [0.0, 1.0]
  else:
    components = [divergence.floor_rdr(s)[0] for s in scores]
    if model.mode is Mode.CLASSIFIER:
      weights = [0.5, 0.5]
  loss = divergence.mixture_balancing_loss(components, weights, numerator)
  n_q = sum(s.shape[0] for k, s in enumerate(sets) if k != numerator)
  alpha = weights[numerator] if model.mode is not Mode.DR else 0.0
  return divergence.make_report(loss, sets[numerator].shape[0], n_q, alpha)


def train(xp: SampleMatrix, xq: SampleMatrix,
          config: TrainConfig) -> tuple[TrainedRatio, TrainTrace]:
  """Fits a ratio network of P against Q.

  Args:
      xp: The real sample.
      xq: The generated sample.
      config: Training protocol; mode ksample is served by `ksample_train`.

  Returns:
      The holdout-selected model and the per-epoch trace.

  Raises:
      ShapeError: If the column counts differ.
      DataError: If a sample has fewer than 10 rows.
      NumericError: If a loss becomes non-finite.
  """
  if config.mode is Mode.KSAMPLE:
    raise ConfigError("ksample mode takes a list of samples; use ksample_train")
  alpha = config.effective_alpha
  return _fit([xp, xq], 0, [alpha, 1.0 - alpha], config)


def ksample_fit(samples: list[SampleMatrix],
                config: TrainConfig) -> list[tuple[TrainedRatio, TrainTrace]]:
  """Fits r_k = p_k / mean_j p_j for every k; returns models and traces."""
  config = dataclasses.replace(config, mode=Mode.KSAMPLE)
  k_total = len(samples)
  if k_total < 2:
    raise ShapeError(f"ksample needs at least two samples, got {k_total}")
  weights = [1.0 / k_total] * k_total
  fits = []
  for k in range(k_total):
    logger.info("fitting ratio %d of %d", k + 1, k_total)
    fits.append(_fit(samples, k, weights, config))
  return fits


def ksample_train(samples: list[SampleMatrix],
                  config: TrainConfig) -> list[TrainedRatio]:
  """Fits one relative ratio per sample against the uniform pooled mixture."""
  return [model for model, _ in ksample_fit(samples, config)]


def evaluate(model: TrainedRatio, x: SampleMatrix,
             label: SourceLabel | str = SourceLabel.OTHER,
             sample_ids=None) -> ScoreSet:
  """Scores a sample with a forward pass."""
  return ScoreSet(scores=model.scores(x), source_label=SourceLabel(label),
                  model_id=model.model_id, sample_ids=sample_ids)


def evaluate_grid(model: TrainedRatio, lo: float, hi: float,
                  points: int) -> tuple[np.ndarray, np.ndarray]:
  """Scores an evenly spaced 1-D grid lo + k (hi - lo) / (points - 1)."""
  if model.spec.input_dim != 1:
    raise ShapeError(
        f"grid evaluation needs a 1-D model, got input_dim"
        f" {model.spec.input_dim}"
    )
  if points < 2 or not lo < hi:
    raise ConfigError(f"need points >= 2 and lo < hi, got {points}, {lo}, {hi}")
  grid = lo + np.arange(points) * ((hi - lo) / (points - 1))
  return grid, model.scores(grid[:, None])


def estimate_h2(model: TrainedRatio, xp_test: SampleMatrix,
                xq_test: SampleMatrix) -> divergence.LossReport:
  """Ĥ² of a fitted model on fresh samples of P and Q."""
  if model.mode is Mode.KSAMPLE:
    weights = [0.5, 0.5]
  else:
    alpha = model.alpha
    weights = [alpha, 1.0 - alpha]
  return _mixture_report(model, [xp_test.values, xq_test.values], weights, 0)
