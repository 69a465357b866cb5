"""Full surrogate network: embedding, L physics-attention layers, and the
three task heads (drag, surface pressure, volume velocity), plus
checkpoint serialization.

Surface and volume points share one attention sequence, distinguished by a
role-flag input channel (surface=1, volume=0). A single forward pass
produces all three predictions.
"""

from dataclasses import dataclass, field
from pathlib import Path
import json
import math

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .physatt import LayerParams, init_layer_params, attention_block_t
from .pointcloud import NormalizationStats, PointCloud
from .rng import SplitMix64

CHECKPOINT_MAGIC = b"PASURF01"
CHECKPOINT_VERSION = 1
_ALIGN = 64


class CheckpointError(ValueError):
    """Corrupt or incompatible checkpoint file."""


@dataclass(frozen=True)
class ModelConfig:
    layers: int = 6
    channels: int = 256
    slices: int = 64
    heads: int = 8
    ffn_width: int = 0          # 0 means 2*channels
    geom_width: int = 6         # 3 coordinates, optionally +3 normals
    extra_width: int = 0        # observed-quantity channels
    head_hidden: int = 0        # 0 means channels
    seed: int = 0
    precision: str = "f32"      # f32 | f64

    def __post_init__(self):
        if min(self.layers, self.channels, self.slices, self.heads) < 1:
            raise ValueError("layers/channels/slices/heads must be positive")
        if self.channels % self.heads != 0:
            raise ValueError(
                f"channels {self.channels} must be divisible by heads {self.heads}")
        if self.geom_width not in (3, 6):
            raise ValueError("geom_width must be 3 (coords) or 6 (coords+normals)")
        if self.extra_width < 0:
            raise ValueError("extra_width must be >= 0")
        if self.precision not in ("f32", "f64"):
            raise ValueError("precision must be f32 or f64")

    @property
    def ffn(self) -> int:
        return self.ffn_width or 2 * self.channels

    @property
    def hidden(self) -> int:
        return self.head_hidden or self.channels

    @property
    def input_width(self) -> int:
        # +1 is the surface/volume role flag
        return self.geom_width + self.extra_width + 1

    @property
    def dtype(self):
        return np.float64 if self.precision == "f64" else np.float32

    def to_dict(self) -> dict:
        return {
            "layers": self.layers, "channels": self.channels,
            "slices": self.slices, "heads": self.heads,
            "ffn_width": self.ffn_width, "geom_width": self.geom_width,
            "extra_width": self.extra_width, "head_hidden": self.head_hidden,
            "seed": self.seed, "precision": self.precision,
        }

    @staticmethod
    def from_dict(d: dict) -> "ModelConfig":
        return ModelConfig(**d)


@dataclass
class ModelState:
    """All trainable parameters plus normalization stats and config.

    params maps dotted names to ndarrays; insertion order is the canonical
    checkpoint order.
    """

    config: ModelConfig
    stats: NormalizationStats
    params: dict[str, np.ndarray]
    layer_templates: list[LayerParams] = field(default_factory=list)

    def layer_params(self, i: int) -> LayerParams:
        return self.layer_templates[i]


@dataclass(frozen=True)
class Prediction:
    drag: float
    pressure: np.ndarray     # (N_s,)
    velocity: np.ndarray     # (N_v, 3)


def _mlp_names(prefix: str) -> list[str]:
    return [f"{prefix}.w1", f"{prefix}.b1", f"{prefix}.w2", f"{prefix}.b2"]


def init_model(config: ModelConfig,
               stats: NormalizationStats | None = None) -> ModelState:
    """Deterministic seeded initialization of every parameter tensor."""
    rng = SplitMix64(config.seed)
    dtype = config.dtype
    params: dict[str, np.ndarray] = {}

    def uniform(shape, fan_in):
        bound = 1.0 / math.sqrt(fan_in)
        n = int(np.prod(shape))
        return ((rng.uniform_array(n) * 2.0 - 1.0) * bound).reshape(shape).astype(dtype)

    c = config.channels
    params["embedding.w"] = uniform((config.input_width, c), config.input_width)
    params["embedding.b"] = np.zeros(c, dtype=dtype)

    layers = []
    for li in range(config.layers):
        lp = init_layer_params(c, config.slices, config.heads, config.ffn,
                               rng, dtype=dtype)
        layers.append(lp)
        for name, arr in lp.named_arrays():
            params[f"layers.{li}.{name}"] = arr

    h = config.hidden
    for prefix, out_w in (("head.drag", 1), ("head.pressure", 1), ("head.velocity", 3)):
        params[f"{prefix}.w1"] = uniform((c, h), c)
        params[f"{prefix}.b1"] = np.zeros(h, dtype=dtype)
        params[f"{prefix}.w2"] = uniform((h, out_w), h)
        params[f"{prefix}.b2"] = np.zeros(out_w, dtype=dtype)

    return ModelState(config=config,
                      stats=stats or NormalizationStats.identity(),
                      params=params, layer_templates=layers)


def _rebind_layers(state: ModelState) -> None:
    """Point each LayerParams field at the (possibly replaced) arrays in
    state.params so both views stay consistent."""
    for li, lp in enumerate(state.layer_templates):
        for name, _ in lp.named_arrays():
            setattr(lp, name, state.params[f"layers.{li}.{name}"])


def _input_features(config: ModelConfig, cloud: PointCloud, role_flag: float,
                    dtype) -> np.ndarray:
    n = cloud.n_points
    cols = [cloud.positions]
    if config.geom_width == 6:
        normals = cloud.normals if cloud.normals is not None else np.zeros((n, 3))
        cols.append(normals)
    if config.extra_width:
        if cloud.n_extra != config.extra_width:
            raise ValueError(
                f"cloud has {cloud.n_extra} extra features, model expects "
                f"{config.extra_width}")
        cols.append(cloud.extra_features)
    cols.append(np.full((n, 1), role_flag))
    return np.concatenate(cols, axis=1).astype(dtype)


def _mlp_t(x: Tensor, t: dict, prefix: str) -> Tensor:
    hidden = ad.gelu(ad.add(ad.matmul(x, t[f"{prefix}.w1"]), t[f"{prefix}.b1"]))
    return ad.add(ad.matmul(hidden, t[f"{prefix}.w2"]), t[f"{prefix}.b2"])


def forward_graph(state: ModelState, surface: PointCloud,
                  volume: PointCloud | None,
                  params_t: dict[str, Tensor] | None = None
                  ) -> tuple[Tensor, Tensor, Tensor | None]:
    """Differentiable forward pass.

    Returns (drag, pressure, velocity) Tensors; velocity is None when no
    volume points are supplied. Inputs are assumed already normalized with
    the model's stats.
    """
    config = state.config
    dtype = config.dtype
    t = params_t or {name: Tensor(arr) for name, arr in state.params.items()}

    n_s = surface.n_points
    feats = [_input_features(config, surface, 1.0, dtype)]
    n_v = 0
    if volume is not None and volume.n_points > 0:
        n_v = volume.n_points
        feats.append(_input_features(config, volume, 0.0, dtype))
    x = Tensor(np.concatenate(feats, axis=0))

    x = ad.add(ad.matmul(x, t["embedding.w"]), t["embedding.b"])
    for li in range(config.layers):
        layer_t = {name: t[f"layers.{li}.{name}"]
                   for name, _ in state.layer_templates[li].named_arrays()}
        x = attention_block_t(x, state.layer_templates[li], layer_t)

    surf_feats = ad.getitem(x, slice(0, n_s))
    pooled = ad.mean(surf_feats, axis=0, keepdims=True)
    drag = ad.reshape(_mlp_t(pooled, t, "head.drag"), ())
    pressure = ad.reshape(_mlp_t(surf_feats, t, "head.pressure"), (n_s,))
    velocity = None
    if n_v:
        vol_feats = ad.getitem(x, slice(n_s, n_s + n_v))
        velocity = _mlp_t(vol_feats, t, "head.velocity")
    return drag, pressure, velocity


def forward(state: ModelState, surface: PointCloud,
            volume: PointCloud | None) -> Prediction:
    """Plain forward pass on normalized clouds; outputs in normalized
    target units."""
    drag, pressure, velocity = forward_graph(state, surface, volume)
    vel = velocity.value if velocity is not None else np.zeros((0, 3))
    return Prediction(drag=float(drag.value),
                      pressure=np.asarray(pressure.value, dtype=np.float64),
                      velocity=np.asarray(vel, dtype=np.float64))


def predict_denormalized(state: ModelState, surface: PointCloud,
                         volume: PointCloud | None) -> Prediction:
    """Normalize raw clouds with the stored stats, run forward, and map
    predictions back to physical units."""
    s = state.stats
    scale = s.position_scale
    surf = PointCloud((surface.positions - s.position_center) / scale,
                      surface.normals, surface.extra_features, "surface")
    vol = None
    if volume is not None and volume.n_points > 0:
        vol = PointCloud((volume.positions - s.position_center) / scale,
                         volume.normals, volume.extra_features, "volume")
    pred = forward(state, surf, vol)
    return Prediction(
        drag=pred.drag * s.drag_std + s.drag_mean,
        pressure=pred.pressure * s.pressure_std + s.pressure_mean,
        velocity=pred.velocity * s.velocity_std + s.velocity_mean,
    )


# ---------------------------------------------------------------------------
# checkpoints


def save_checkpoint(state: ModelState, path) -> None:
    """Binary checkpoint: magic, JSON header line, zero padding to 64-byte
    alignment, then raw little-endian tensor blobs in table order."""
    tensors = []
    blobs = []
    offset = 0
    for name, arr in state.params.items():
        a = np.asarray(arr)
        # ascontiguousarray promotes 0-d to 1-d, so record the shape first
        blob = np.ascontiguousarray(a).astype(a.dtype.newbyteorder("<")).tobytes()
        tensors.append({"name": name, "offset": offset,
                        "shape": list(a.shape), "dtype": str(a.dtype)})
        blobs.append(blob)
        offset += len(blob)
    header = {
        "version": CHECKPOINT_VERSION,
        "config": state.config.to_dict(),
        "stats": state.stats.to_dict(),
        "tensors": tensors,
    }
    head_bytes = json.dumps(header, sort_keys=True).encode("ascii") + b"\n"
    pre = len(CHECKPOINT_MAGIC) + len(head_bytes)
    pad = (-pre) % _ALIGN
    data = CHECKPOINT_MAGIC + head_bytes + b"\x00" * pad + b"".join(blobs)
    Path(path).write_bytes(data)


def load_checkpoint(path) -> ModelState:
    data = Path(path).read_bytes()
    if data[:8] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path}: bad magic {data[:8]!r}")
    try:
        end = data.index(b"\n", 8)
    except ValueError:
        raise CheckpointError(f"{path}: truncated header") from None
    header = json.loads(data[8:end].decode("ascii"))
    if header.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: unsupported version {header.get('version')}")
    config = ModelConfig.from_dict(header["config"])
    stats = NormalizationStats.from_dict(header["stats"])
    blob_start = end + 1 + ((-(end + 1)) % _ALIGN)

    state = init_model(config, stats)
    expected = {name: arr.shape for name, arr in state.params.items()}
    loaded: dict[str, np.ndarray] = {}
    for entry in header["tensors"]:
        name = entry["name"]
        shape = tuple(entry["shape"])
        dt = np.dtype(entry["dtype"])
        count = int(np.prod(shape)) if shape else 1
        lo = blob_start + entry["offset"]
        hi = lo + count * dt.itemsize
        if hi > len(data):
            raise CheckpointError(f"{path}: truncated blob for tensor {name}")
        if name not in expected:
            raise CheckpointError(f"{path}: unknown tensor {name}")
        if shape != expected[name]:
            raise CheckpointError(
                f"{path}: tensor {name} shape {shape} != config shape "
                f"{expected[name]}")
        loaded[name] = np.frombuffer(data[lo:hi], dtype=dt).reshape(shape).copy()
    missing = set(expected) - set(loaded)
    if missing:
        raise CheckpointError(f"{path}: missing tensors {sorted(missing)}")
    state.params = loaded
    _rebind_layers(state)
    return state
