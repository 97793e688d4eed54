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

"""Dense ReLU network with analytic backpropagation and Adam updates."""

import dataclasses
import enum
import json
import math
from typing import Any, NamedTuple

from rdr_eval import numerics
from rdr_eval.errors import ModelFormatError
from rdr_eval.errors import ShapeError

import numpy as np

DEFAULT_HIDDEN_WIDTHS = (64, 64, 64, 64)
SOFTPLUS_FLOOR = 1e-6
# Open-interval guards for the bounded head once softplus saturates.
_BOUNDED_LOW = np.finfo(np.float64).tiny
_BOUNDED_HIGH = np.nextafter(2.0, 0.0)


class Head(enum.Enum):
  """Output heads.

  BOUNDED_SOFTPLUS maps z to 2s / (s + 1) in (0, 2) with s = softplus(z);
  SOFTPLUS_FLOOR maps z to max(softplus(z), 1e-6); LINEAR passes z through.
  """

  BOUNDED_SOFTPLUS = "bounded_softplus"
  SOFTPLUS_FLOOR = "softplus_floor"
  LINEAR = "linear"


@dataclasses.dataclass(frozen=True)
class NetworkSpec:
  """Architecture of a ratio network."""

  input_dim: int
  hidden_widths: tuple[int, ...] = DEFAULT_HIDDEN_WIDTHS
  head: Head = Head.BOUNDED_SOFTPLUS

  def __post_init__(self):
    object.__setattr__(self, "hidden_widths",
                       tuple(int(w) for w in self.hidden_widths))
    object.__setattr__(self, "head", Head(self.head))
    if self.input_dim < 1:
      raise ShapeError(f"input_dim must be at least 1, got {self.input_dim}")
    if not self.hidden_widths or min(self.hidden_widths) < 1:
      raise ShapeError(
          "at least one hidden layer of width >= 1 is required, got"
          f" {list(self.hidden_widths)}"
      )

  @property
  def layer_shapes(self) -> list[tuple[int, int]]:
    """(out, in) shape of every weight matrix, input layer first."""
    dims = [self.input_dim, *self.hidden_widths, 1]
    return [(dims[i + 1], dims[i]) for i in range(len(dims) - 1)]

  def to_dict(self) -> dict[str, Any]:
    return {
        "input_dim": self.input_dim,
        "hidden_widths": list(self.hidden_widths),
        "head": self.head.value,
    }


class Layer(NamedTuple):
  w: np.ndarray
  b: np.ndarray


@dataclasses.dataclass(frozen=True)
class NetworkParams:
  """Weights and biases of every layer, input layer first."""

  layers: tuple[Layer, ...]

  def arrays(self) -> list[np.ndarray]:
    """Flattens to [w0, b0, w1, b1, ...]."""
    return [a for layer in self.layers for a in layer]

  @classmethod
  def from_arrays(cls, arrays: list[np.ndarray]) -> "NetworkParams":
    return cls(tuple(Layer(arrays[i], arrays[i + 1])
                     for i in range(0, len(arrays), 2)))

  def copy(self) -> "NetworkParams":
    return NetworkParams.from_arrays([a.copy() for a in self.arrays()])

  def check(self, spec: NetworkSpec) -> None:
    """Raises ShapeError unless the layer shapes chain as `spec` requires."""
    shapes = spec.layer_shapes
    if len(self.layers) != len(shapes):
      raise ShapeError(
          f"{len(self.layers)} layers for a spec with {len(shapes)}"
      )
    for l, ((out_dim, in_dim), layer) in enumerate(zip(shapes, self.layers)):
      if layer.w.shape != (out_dim, in_dim) or layer.b.shape != (out_dim,):
        raise ShapeError(
            f"layer {l}: weights {layer.w.shape} and bias {layer.b.shape},"
            f" expected ({out_dim}, {in_dim}) and ({out_dim},)"
        )


@dataclasses.dataclass
class ForwardCache:
  """Intermediate values of one forward pass, consumed by `backward`."""

  inputs: list[np.ndarray]
  pre_activations: list[np.ndarray]
  z: np.ndarray
  consumed: bool = False

  @property
  def batch_size(self) -> int:
    return self.z.shape[0]


def init_params(spec: NetworkSpec,
                rng: numerics.RngState) -> NetworkParams:
  """He initialization: weights ~ N(0, 2 / fan_in), zero biases."""
  layers = []
  for out_dim, in_dim in spec.layer_shapes:
    w = numerics.rng_normal(rng, out_dim * in_dim).reshape(out_dim, in_dim)
    layers.append(Layer(w * math.sqrt(2.0 / in_dim), np.zeros(out_dim)))
  return NetworkParams(tuple(layers))


def zero_params(spec: NetworkSpec) -> NetworkParams:
  return NetworkParams(tuple(
      Layer(np.zeros(shape), np.zeros(shape[0])) for shape in spec.layer_shapes
  ))


def apply_head(head: Head, z: np.ndarray) -> np.ndarray:
  if head is Head.LINEAR:
    return z.copy()
  s = numerics.stable_softplus(z)
  if head is Head.SOFTPLUS_FLOOR:
    return np.maximum(s, SOFTPLUS_FLOOR)
  return np.clip(2.0 * s / (s + 1.0), _BOUNDED_LOW, _BOUNDED_HIGH)


def head_derivative(head: Head, z: np.ndarray) -> np.ndarray:
  """d(head)/dz; the floor passes no gradient where it is active."""
  if head is Head.LINEAR:
    return np.ones_like(z)
  s = numerics.stable_softplus(z)
  sigma = numerics.logistic(z)
  if head is Head.SOFTPLUS_FLOOR:
    return np.where(s > SOFTPLUS_FLOOR, sigma, 0.0)
  return 2.0 * sigma / (s + 1.0) ** 2


def forward(params: NetworkParams, spec: NetworkSpec,
            x) -> tuple[np.ndarray, ForwardCache]:
  """Scores a batch.

  Args:
      params: Network weights.
      spec: Architecture matching `params`.
      x: SampleMatrix or array with spec.input_dim columns.

  Returns:
      The n scores and the cache needed by `backward`.

  Raises:
      ShapeError: If x has the wrong number of columns.
  """
  h = x.values if isinstance(x, numerics.SampleMatrix) else np.asarray(
      x, dtype=np.float64)
  if h.ndim != 2 or h.shape[1] != spec.input_dim:
    raise ShapeError(
        f"input of shape {h.shape} for a network expecting"
        f" {spec.input_dim} columns"
    )
  inputs, pre_activations = [], []
  for layer in params.layers[:-1]:
    inputs.append(h)
    a = numerics.affine(h, layer.w, layer.b)
    pre_activations.append(a)
    h = np.maximum(a, 0.0)
  inputs.append(h)
  last = params.layers[-1]
  z = numerics.affine(h, last.w, last.b)[:, 0]
  cache = ForwardCache(inputs=inputs, pre_activations=pre_activations, z=z)
  return apply_head(spec.head, z), cache


def backward(params: NetworkParams, spec: NetworkSpec, cache: ForwardCache,
             dloss_dscore) -> NetworkParams:
  """Reverse-mode gradients of a loss with respect to every parameter.

  Args:
      params: The weights used by the matching `forward` call.
      spec: Architecture matching `params`.
      cache: Cache returned by that `forward` call; consumed here.
      dloss_dscore: Gradient of the loss with respect to each score.

  Returns:
      Gradients shaped like `params`.

  Raises:
      ShapeError: If the cache was already used or sizes disagree.
  """
  if cache.consumed:
    raise ShapeError("forward cache has already been consumed by backward")
  dscore = np.asarray(dloss_dscore, dtype=np.float64).reshape(-1)
  if dscore.shape[0] != cache.batch_size:
    raise ShapeError(
        f"{dscore.shape[0]} score gradients for a batch of {cache.batch_size}"
    )
  if len(cache.inputs) != len(params.layers):
    raise ShapeError("forward cache does not match the network depth")
  cache.consumed = True
  delta = (dscore * head_derivative(spec.head, cache.z))[:, None]
  grads = []
  for l in range(len(params.layers) - 1, -1, -1):
    layer = params.layers[l]
    grads.append(Layer(delta.T @ cache.inputs[l], delta.sum(axis=0)))
    if l > 0:
      # ReLU subgradient at exactly 0 is 0.
      delta = (delta @ layer.w) * (cache.pre_activations[l - 1] > 0.0)
  return NetworkParams(tuple(reversed(grads)))


@dataclasses.dataclass
class AdamState:
  """Moment estimates and hyperparameters of the Adam optimizer."""

  m: list[np.ndarray]
  v: list[np.ndarray]
  step: int = 0
  lr: float = 1e-3
  beta1: float = 0.9
  beta2: float = 0.999
  eps: float = 1e-8


def init_adam(params: NetworkParams, lr: float = 1e-3, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8) -> AdamState:
  zeros = [np.zeros_like(a) for a in params.arrays()]
  return AdamState(m=zeros, v=[z.copy() for z in zeros], lr=lr, beta1=beta1,
                   beta2=beta2, eps=eps)


def adam_step(params: NetworkParams, grads: NetworkParams,
              state: AdamState) -> tuple[NetworkParams, AdamState]:
  """One bias-corrected Adam update; inputs are left unmodified."""
  step = state.step + 1
  bc1 = 1.0 - state.beta1**step
  bc2 = 1.0 - state.beta2**step
  new_params, new_m, new_v = [], [], []
  for p, g, m, v in zip(params.arrays(), grads.arrays(), state.m, state.v):
    if p.shape != g.shape:
      raise ShapeError(f"gradient of shape {g.shape} for parameter {p.shape}")
    m = state.beta1 * m + (1.0 - state.beta1) * g
    v = state.beta2 * v + (1.0 - state.beta2) * (g * g)
    new_params.append(p - state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps))
    new_m.append(m)
    new_v.append(v)
  new_state = dataclasses.replace(state, m=new_m, v=new_v, step=step)
  return NetworkParams.from_arrays(new_params), new_state


def serialize(params: NetworkParams, spec: NetworkSpec,
              meta: dict[str, Any] | None = None) -> str:
  """Encodes a model as JSON with shortest round-trip float literals."""
  params.check(spec)
  document = {
      "spec": spec.to_dict(),
      "layers": [{"w": layer.w.tolist(), "b": layer.b.tolist()}
                 for layer in params.layers],
      "meta": meta or {},
  }
  return json.dumps(document, indent=1, allow_nan=False) + "\n"


class ModelDocument(NamedTuple):
  params: NetworkParams
  spec: NetworkSpec
  meta: dict[str, Any]


def _float_array(value: Any, where: str, ndim: int) -> np.ndarray:
  try:
    array = np.array(value, dtype=np.float64)
  except (TypeError, ValueError) as e:
    raise ModelFormatError(f"{where} is not a numeric array: {e}") from e
  if array.ndim != ndim or not np.all(np.isfinite(array)):
    raise ModelFormatError(f"{where} must be a finite {ndim}-D array")
  return array


def deserialize_document(text: str) -> ModelDocument:
  """Decodes a model document, keeping its meta block.

  Raises:
      ModelFormatError: On malformed JSON (with byte offset), missing fields,
          unknown head names or inconsistent shapes.
  """
  try:
    document = json.loads(text)
  except json.JSONDecodeError as e:
    offset = len(text[: e.pos].encode("utf-8"))
    raise ModelFormatError(
        f"model document is not valid JSON at byte {offset}: {e.msg}",
        offset=offset,
    ) from e
  if not isinstance(document, dict):
    raise ModelFormatError("model document must be a JSON object")
  try:
    raw_spec = document["spec"]
    head_name = raw_spec["head"]
    raw_layers = document["layers"]
    input_dim = int(raw_spec["input_dim"])
    widths = tuple(int(w) for w in raw_spec["hidden_widths"])
  except (KeyError, TypeError, ValueError) as e:
    raise ModelFormatError(f"model document lacks a valid field: {e}") from e
  if head_name not in {h.value for h in Head}:
    raise ModelFormatError(f"unknown head {head_name!r}")
  try:
    spec = NetworkSpec(input_dim, widths, Head(head_name))
  except ShapeError as e:
    raise ModelFormatError(f"invalid network spec: {e}") from e
  if not isinstance(raw_layers, list):
    raise ModelFormatError("layers must be a list")
  layers = []
  for l, raw in enumerate(raw_layers):
    if not isinstance(raw, dict) or "w" not in raw or "b" not in raw:
      raise ModelFormatError(f"layer {l} needs 'w' and 'b'")
    layers.append(Layer(_float_array(raw["w"], f"layers[{l}].w", 2),
                        _float_array(raw["b"], f"layers[{l}].b", 1)))
  params = NetworkParams(tuple(layers))
  try:
    params.check(spec)
  except ShapeError as e:
    raise ModelFormatError(f"inconsistent shapes: {e}") from e
  meta = document.get("meta") or {}
  if not isinstance(meta, dict):
    raise ModelFormatError("meta must be a JSON object")
  return ModelDocument(params, spec, meta)


def deserialize(text: str) -> tuple[NetworkParams, NetworkSpec]:
  """Decodes a model document produced by `serialize`."""
  document = deserialize_document(text)
  return document.params, document.spec
