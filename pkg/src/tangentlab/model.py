"""Small dense scalar-output networks with layer-addressable parameters.

Models are multilayer perceptrons with tanh / relu / identity hidden
activations and a linear scalar head. Trainable parameters live in a flat
vector described by a ``LayerMap`` of named segments, so downstream code can
address any layer or low-rank adapter factor by name. Optionally, low-rank
adapter pairs (A, B) are attached to selected layers; the base weights are
then frozen and the trainable vector holds only the adapter factors. Adapter
B factors start at zero, so a freshly built adapter model computes exactly
the frozen base network.

Jacobians of the scalar output with respect to any parameter subset are
exact, computed by reverse-mode accumulation vectorized over samples.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, DomainError, ShapeError

KIND_WEIGHT = "dense-weight"
KIND_BIAS = "dense-bias"
KIND_LORA_A = "lora-A"
KIND_LORA_B = "lora-B"

_ACTIVATIONS = {
    "tanh": (np.tanh, lambda z: 1.0 - np.tanh(z) ** 2),
    "relu": (lambda z: np.maximum(z, 0.0), lambda z: (z > 0.0).astype(float)),
    "identity": (lambda z: z, lambda z: np.ones_like(z)),
}


@dataclass(frozen=True)
class Segment:
    """One contiguous block of the flat parameter vector."""

    name: str
    layer: int
    kind: str
    offset: int
    length: int

    @property
    def sl(self) -> slice:
        return slice(self.offset, self.offset + self.length)


@dataclass(frozen=True)
class LayerMap:
    segments: tuple[Segment, ...]

    def __post_init__(self):
        names = [s.name for s in self.segments]
        if len(set(names)) != len(names):
            raise ConfigError("segment names must be unique")
        cursor = 0
        for seg in self.segments:
            if seg.offset != cursor or seg.length <= 0:
                raise ConfigError(f"segments must tile the vector; bad segment {seg.name}")
            cursor += seg.length

    @property
    def dim(self) -> int:
        return sum(s.length for s in self.segments)

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.segments)

    def segment(self, name: str) -> Segment:
        for seg in self.segments:
            if seg.name == name:
                return seg
        raise DomainError(f"unknown segment id {name!r}")

    def segments_of_layer(self, layer: int) -> tuple[str, ...]:
        return tuple(s.name for s in self.segments if s.layer == layer)

    @property
    def layers(self) -> tuple[int, ...]:
        return tuple(sorted({s.layer for s in self.segments}))


@dataclass(frozen=True)
class ParamVector:
    """Flat parameter vector plus the segment map that names its pieces."""

    values: np.ndarray
    layer_map: LayerMap

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.shape[0] != self.layer_map.dim:
            raise ShapeError(
                f"parameter vector length {v.shape} does not match layer map "
                f"dimension {self.layer_map.dim}"
            )
        if not np.all(np.isfinite(v)):
            raise ShapeError("parameter vector entries must be finite")
        object.__setattr__(self, "values", v)

    @property
    def dim(self) -> int:
        return self.values.shape[0]

    def segment_values(self, name: str) -> np.ndarray:
        return self.values[self.layer_map.segment(name).sl].copy()

    def with_values(self, values) -> "ParamVector":
        return replace(self, values=np.asarray(values, dtype=float))


@dataclass(frozen=True)
class LoraConfig:
    target_layers: tuple[int, ...]
    rank: int

    def __post_init__(self):
        object.__setattr__(self, "target_layers", tuple(self.target_layers))
        if not self.target_layers:
            raise ConfigError("adapter config needs at least one target layer")
        if self.rank < 1:
            raise ConfigError(f"adapter rank must be >= 1, got {self.rank}")
        if len(set(self.target_layers)) != len(self.target_layers):
            raise ConfigError("adapter target layers must be unique")


@dataclass(frozen=True)
class ModelConfig:
    input_dim: int
    hidden_widths: tuple[int, ...] = ()
    activation: str = "tanh"
    use_bias: bool = True
    lora: LoraConfig | None = None
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "hidden_widths", tuple(self.hidden_widths))
        if self.input_dim < 1:
            raise ConfigError(f"input_dim must be >= 1, got {self.input_dim}")
        if any(w < 1 for w in self.hidden_widths):
            raise ConfigError("hidden widths must be >= 1")
        if self.activation not in _ACTIVATIONS:
            raise ConfigError(f"unknown activation {self.activation!r}")

    def to_dict(self) -> dict:
        out = {
            "input_dim": self.input_dim,
            "hidden_widths": list(self.hidden_widths),
            "activation": self.activation,
            "use_bias": self.use_bias,
            "lora": None,
            "seed": self.seed,
        }
        if self.lora is not None:
            out["lora"] = {
                "target_layers": list(self.lora.target_layers),
                "rank": self.lora.rank,
            }
        return out

    @classmethod
    def from_dict(cls, raw: dict) -> "ModelConfig":
        lora = raw.get("lora")
        if lora is not None:
            lora = LoraConfig(tuple(lora["target_layers"]), int(lora["rank"]))
        return cls(
            input_dim=int(raw["input_dim"]),
            hidden_widths=tuple(int(w) for w in raw.get("hidden_widths", ())),
            activation=raw.get("activation", "tanh"),
            use_bias=bool(raw.get("use_bias", True)),
            lora=lora,
            seed=int(raw.get("seed", 0)),
        )


@dataclass(frozen=True)
class MLP:
    """Immutable model handle: configuration, frozen base weights, layer map."""

    config: ModelConfig
    base_weights: tuple[np.ndarray, ...] = field(repr=False)
    base_biases: tuple[np.ndarray, ...] = field(repr=False)
    layer_map: LayerMap = field(repr=False)

    @property
    def sizes(self) -> tuple[int, ...]:
        return (self.config.input_dim, *self.config.hidden_widths, 1)

    @property
    def n_layers(self) -> int:
        return len(self.sizes) - 1

    @property
    def segment_ids(self) -> tuple[str, ...]:
        return self.layer_map.ids

    def segments_of_layer(self, layer: int) -> tuple[str, ...]:
        return self.layer_map.segments_of_layer(layer)

    # -- parameter plumbing --------------------------------------------------

    def _check_theta(self, theta: ParamVector) -> None:
        if theta.layer_map != self.layer_map:
            raise ShapeError("parameter vector does not belong to this model")

    def _check_inputs(self, X) -> np.ndarray:
        x = np.asarray(X, dtype=float)
        if x.ndim == 1:
            if x.shape[0] != self.config.input_dim:
                raise ShapeError(
                    f"input dimension {x.shape[0]} != model input_dim {self.config.input_dim}"
                )
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != self.config.input_dim:
            raise ShapeError(
                f"inputs must be (n, {self.config.input_dim}), got {x.shape}"
            )
        return x

    def _unpack(self, theta: ParamVector):
        """Effective (W, b, A, B) per layer, composing adapters where present."""
        v = theta.values
        lora = self.config.lora
        layers = []
        for l in range(self.n_layers):
            w = self.base_weights[l]
            b = self.base_biases[l]
            a_fac = b_fac = None
            if lora is None:
                fan_out, fan_in = w.shape
                w = v[self.layer_map.segment(f"layer{l}.weight").sl].reshape(fan_out, fan_in)
                if self.config.use_bias:
                    b = v[self.layer_map.segment(f"layer{l}.bias").sl]
            elif l in lora.target_layers:
                fan_out, fan_in = w.shape
                r = lora.rank
                a_fac = v[self.layer_map.segment(f"layer{l}.lora_a").sl].reshape(r, fan_in)
                b_fac = v[self.layer_map.segment(f"layer{l}.lora_b").sl].reshape(fan_out, r)
                w = w + b_fac @ a_fac
            layers.append((w, b, a_fac, b_fac))
        return layers

    # -- evaluation ----------------------------------------------------------

    def forward(self, theta: ParamVector, X) -> np.ndarray:
        """Scalar outputs for each input row, shape (n,)."""
        self._check_theta(theta)
        x = self._check_inputs(X)
        act, _ = _ACTIVATIONS[self.config.activation]
        h = x
        for l, (w, b, _, _) in enumerate(self._unpack(theta)):
            z = h @ w.T + b
            h = act(z) if l < self.n_layers - 1 else z
        return h[:, 0]

    def jacobian(self, theta: ParamVector, X, subset=None) -> np.ndarray:
        """Rows are d f(x_i) / d theta_subset; columns follow layer-map order.

        ``subset`` is an iterable of segment ids; None means every trainable
        segment. Matches central finite differences to ~1e-10 relative error
        on smooth activations.
        """
        self._check_theta(theta)
        x = self._check_inputs(X)
        if subset is None:
            wanted = list(self.layer_map.ids)
        else:
            wanted = list(subset)
            if not wanted:
                raise DomainError("subset must name at least one segment")
            for name in wanted:
                self.layer_map.segment(name)  # validates
            order = {name: i for i, name in enumerate(self.layer_map.ids)}
            wanted.sort(key=order.__getitem__)
        act, dact = _ACTIVATIONS[self.config.activation]
        layers = self._unpack(theta)

        inputs, zs = [], []
        h = x
        for l, (w, b, _, _) in enumerate(layers):
            inputs.append(h)
            z = h @ w.T + b
            zs.append(z)
            if l < self.n_layers - 1:
                h = act(z)

        n = x.shape[0]
        deltas = [None] * self.n_layers
        deltas[-1] = np.ones((n, 1))
        for l in range(self.n_layers - 2, -1, -1):
            w_next = layers[l + 1][0]
            deltas[l] = (deltas[l + 1] @ w_next) * dact(zs[l])

        blocks = []
        for name in wanted:
            seg = self.layer_map.segment(name)
            delta = deltas[seg.layer]
            a_in = inputs[seg.layer]
            _, _, a_fac, b_fac = layers[seg.layer]
            if seg.kind == KIND_WEIGHT:
                block = np.einsum("no,ni->noi", delta, a_in).reshape(n, -1)
            elif seg.kind == KIND_BIAS:
                block = delta.copy()
            elif seg.kind == KIND_LORA_A:
                block = np.einsum("nr,ni->nri", delta @ b_fac, a_in).reshape(n, -1)
            elif seg.kind == KIND_LORA_B:
                block = np.einsum("no,nr->nor", delta, a_in @ a_fac.T).reshape(n, -1)
            else:  # pragma: no cover - kinds are fixed at build time
                raise ConfigError(f"unknown segment kind {seg.kind!r}")
            blocks.append(block)
        return np.hstack(blocks)


def build_model(config: ModelConfig) -> tuple[MLP, ParamVector]:
    """Build a model and its deterministic initial trainable parameters.

    Base weights are scaled Gaussians (std 1/sqrt(fan_in)), biases start at
    zero. Adapter A factors are Gaussian scaled by 1/sqrt(rank) and B factors
    are zero, so adapters begin as an identity perturbation of the base model.
    """
    sizes = (config.input_dim, *config.hidden_widths, 1)
    n_layers = len(sizes) - 1
    if config.lora is not None:
        for t in config.lora.target_layers:
            if not 0 <= t < n_layers:
                raise ConfigError(f"adapter target layer {t} out of range")
            fan_in, fan_out = sizes[t], sizes[t + 1]
            if config.lora.rank > min(fan_in, fan_out):
                raise ConfigError(
                    f"adapter rank {config.lora.rank} exceeds layer {t} dims "
                    f"({fan_out}x{fan_in})"
                )
    rng = np.random.default_rng(config.seed)
    weights, biases = [], []
    for l in range(n_layers):
        fan_in, fan_out = sizes[l], sizes[l + 1]
        weights.append(rng.standard_normal((fan_out, fan_in)) / np.sqrt(fan_in))
        biases.append(np.zeros(fan_out))

    segments: list[Segment] = []
    values: list[np.ndarray] = []
    offset = 0

    def add(name, layer, kind, block):
        nonlocal offset
        flat = np.asarray(block, dtype=float).ravel()
        segments.append(Segment(name, layer, kind, offset, flat.size))
        values.append(flat)
        offset += flat.size

    if config.lora is None:
        for l in range(n_layers):
            add(f"layer{l}.weight", l, KIND_WEIGHT, weights[l])
            if config.use_bias:
                add(f"layer{l}.bias", l, KIND_BIAS, biases[l])
    else:
        r = config.lora.rank
        for l in sorted(config.lora.target_layers):
            fan_in, fan_out = sizes[l], sizes[l + 1]
            a_fac = rng.standard_normal((r, fan_in)) / np.sqrt(r)
            add(f"layer{l}.lora_a", l, KIND_LORA_A, a_fac)
            add(f"layer{l}.lora_b", l, KIND_LORA_B, np.zeros((fan_out, r)))

    layer_map = LayerMap(tuple(segments))
    model = MLP(
        config=config,
        base_weights=tuple(weights),
        base_biases=tuple(biases),
        layer_map=layer_map,
    )
    theta0 = ParamVector(np.concatenate(values) if values else np.zeros(0), layer_map)
    return model, theta0


def forward(model, theta: ParamVector, X) -> np.ndarray:
    return model.forward(theta, X)


def jacobian(model, theta: ParamVector, X, subset=None) -> np.ndarray:
    return model.jacobian(theta, X, subset)
