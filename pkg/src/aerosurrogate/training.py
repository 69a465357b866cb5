"""Composite loss, Adam optimization, the training loop, and the
finite-difference gradient checker.

Loss: lambda_v * RelL2(velocity) + lambda_p * RelL2(pressure)
      + lambda_cd * (drag - drag_hat)^2, all on normalized targets.
"""

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .model import ModelConfig, ModelState, init_model, forward_graph, \
    save_checkpoint, _rebind_layers
from .pointcloud import SampleRecord, NormalizationStats, compute_stats, normalize
from .rng import SplitMix64, derive_seed

_NORM_FLOOR = 1e-30


class DegenerateTargetError(ValueError):
    """Relative L2 undefined: target norm is (numerically) zero."""


@dataclass(frozen=True)
class LossWeights:
    velocity: float = 1.0
    pressure: float = 1.0
    drag: float = 0.1

    def __post_init__(self):
        if min(self.velocity, self.pressure, self.drag) < 0:
            raise ValueError("loss weights must be non-negative")
        if self.velocity == self.pressure == self.drag == 0:
            raise ValueError("at least one loss weight must be positive")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    weights: LossWeights = field(default_factory=LossWeights)
    checkpoint_every: int = 0      # epochs between periodic checkpoints; 0 = off

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("betas must lie in [0, 1)")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")


def relative_l2(y: np.ndarray, y_hat: np.ndarray) -> float:
    """||y - y_hat||_2 / ||y||_2 (Frobenius for matrices)."""
    y = np.asarray(y, dtype=np.float64)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    if y.shape != y_hat.shape:
        raise ValueError(f"shape mismatch {y.shape} vs {y_hat.shape}")
    denom = float(np.linalg.norm(y))
    if denom < _NORM_FLOOR:
        raise DegenerateTargetError("target norm is zero; relative L2 undefined")
    return float(np.linalg.norm(y - y_hat)) / denom


def _relative_l2_t(y_hat: Tensor, y: np.ndarray) -> Tensor:
    denom = float(np.linalg.norm(np.asarray(y, dtype=np.float64)))
    if denom < _NORM_FLOOR:
        raise DegenerateTargetError("target norm is zero; relative L2 undefined")
    return ad.mul(ad.frobenius_norm(ad.sub(y_hat, Tensor(y))), 1.0 / denom)


def total_loss(pred_drag: float, pred_pressure: np.ndarray,
               pred_velocity: np.ndarray, truth: SampleRecord,
               weights: LossWeights) -> tuple[float, dict]:
    """Composite loss value plus exact analytic gradients with respect to
    each prediction."""
    grads = {}
    loss = 0.0
    diff_p = np.asarray(pred_pressure, dtype=np.float64) - truth.pressure
    norm_p = np.linalg.norm(truth.pressure)
    err_p = np.linalg.norm(diff_p)
    if norm_p < _NORM_FLOOR:
        raise DegenerateTargetError("pressure target norm is zero")
    loss += weights.pressure * err_p / norm_p
    grads["pressure"] = (weights.pressure / norm_p) * (
        diff_p / err_p if err_p > 0 else np.zeros_like(diff_p))

    diff_v = np.asarray(pred_velocity, dtype=np.float64) - truth.velocity
    norm_v = np.linalg.norm(truth.velocity)
    err_v = np.linalg.norm(diff_v)
    if norm_v < _NORM_FLOOR:
        raise DegenerateTargetError("velocity target norm is zero")
    loss += weights.velocity * err_v / norm_v
    grads["velocity"] = (weights.velocity / norm_v) * (
        diff_v / err_v if err_v > 0 else np.zeros_like(diff_v))

    d = float(pred_drag) - truth.drag
    loss += weights.drag * d * d
    grads["drag"] = weights.drag * 2.0 * d
    return loss, grads


def _loss_graph(state: ModelState, record: SampleRecord,
                weights: LossWeights, params_t: dict) -> tuple[Tensor, dict]:
    """Differentiable composite loss for one (normalized) sample. Returns
    the loss Tensor and its components as floats."""
    drag, pressure, velocity = forward_graph(state, record.surface,
                                             record.volume, params_t)
    loss_p = _relative_l2_t(pressure, record.pressure)
    loss_v = _relative_l2_t(velocity, record.velocity)
    d = ad.sub(drag, float(record.drag))
    loss_cd = ad.mul(d, d)
    total = ad.add(ad.add(ad.mul(loss_v, weights.velocity),
                          ad.mul(loss_p, weights.pressure)),
                   ad.mul(loss_cd, weights.drag))
    components = {"loss_v": float(loss_v.value), "loss_p": float(loss_p.value),
                  "loss_cd": float(loss_cd.value)}
    return total, components


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0

    @staticmethod
    def fresh(params: dict[str, np.ndarray]) -> "AdamState":
        return AdamState(m={k: np.zeros_like(a) for k, a in params.items()},
                         v={k: np.zeros_like(a) for k, a in params.items()})


def adam_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
              moments: AdamState, config: TrainConfig) -> None:
    """One bias-corrected Adam update, in place."""
    moments.t += 1
    t = moments.t
    b1, b2 = config.beta1, config.beta2
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            continue
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient for tensor {name!r}")
        g = g.astype(p.dtype)
        m = moments.m[name] = b1 * moments.m[name] + (1 - b1) * g
        v = moments.v[name] = b2 * moments.v[name] + (1 - b2) * g * g
        m_hat = m / (1 - b1 ** t)
        v_hat = v / (1 - b2 ** t)
        p -= (config.learning_rate * m_hat /
              (np.sqrt(v_hat) + config.eps)).astype(p.dtype)


@dataclass
class TrainResult:
    state: ModelState
    log_rows: list[dict]          # per-step rows
    epoch_losses: list[float]     # mean total loss per epoch
    best_epoch: int = -1


def _wrap_params(state: ModelState) -> dict[str, Tensor]:
    return {name: Tensor(arr, requires_grad=True)
            for name, arr in state.params.items()}


def train_step(state: ModelState, record: SampleRecord, weights: LossWeights,
               moments: AdamState, config: TrainConfig) -> dict:
    """Single forward/backward/Adam step on one normalized sample."""
    params_t = _wrap_params(state)
    loss, components = _loss_graph(state, record, weights, params_t)
    if not np.isfinite(loss.value):
        raise FloatingPointError(f"non-finite loss on sample {record.id!r}")
    loss.backward()
    grads = {name: (t.grad if t.grad is not None else np.zeros_like(t.value))
             for name, t in params_t.items()}
    adam_step(state.params, grads, moments, config)
    _rebind_layers(state)
    components["loss_total"] = float(loss.value)
    return components


def train(records: list[SampleRecord], model_config: ModelConfig,
          train_config: TrainConfig,
          val_records: list[SampleRecord] | None = None,
          out_dir=None, max_steps: int | None = None,
          stats: NormalizationStats | None = None) -> TrainResult:
    """Train on raw (unnormalized) records; one Adam step per sample, epoch
    order shuffled by the seeded generator."""
    if not records:
        raise ValueError("need at least one training sample")
    stats = stats or compute_stats(records)
    normed = [normalize(r, stats) for r in records]
    state = init_model(model_config, stats)
    moments = AdamState.fresh(state.params)
    rng = SplitMix64(derive_seed(train_config.seed, 0x5A17))
    out_dir = Path(out_dir) if out_dir is not None else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)

    rows: list[dict] = []
    epoch_losses: list[float] = []
    best = np.inf
    best_epoch = -1
    step = 0
    stop = False
    for epoch in range(train_config.epochs):
        order = list(range(len(normed)))
        rng.shuffle(order)
        epoch_total = 0.0
        for idx in order:
            step += 1
            comp = train_step(state, normed[idx], train_config.weights,
                              moments, train_config)
            epoch_total += comp["loss_total"]
            rows.append({"epoch": epoch, "step": step, **comp})
            if max_steps is not None and step >= max_steps:
                stop = True
                break
        epoch_losses.append(epoch_total / max(1, len(order)))
        if out_dir is not None and train_config.checkpoint_every and \
                (epoch + 1) % train_config.checkpoint_every == 0:
            save_checkpoint(state, out_dir / f"checkpoint_epoch{epoch + 1}.bin")
        if epoch_losses[-1] < best:
            best = epoch_losses[-1]
            best_epoch = epoch
            if out_dir is not None:
                save_checkpoint(state, out_dir / "checkpoint_best.bin")
        if stop:
            break
    if out_dir is not None:
        save_checkpoint(state, out_dir / "checkpoint_final.bin")
        write_loss_csv(rows, out_dir / "loss_log.csv")
    return TrainResult(state=state, log_rows=rows, epoch_losses=epoch_losses,
                       best_epoch=best_epoch)


def write_loss_csv(rows: list[dict], path) -> None:
    """CSV loss log with 17-significant-digit decimals."""
    lines = ["epoch,step,loss_total,loss_v,loss_p,loss_cd"]
    for r in rows:
        lines.append(",".join([
            str(r["epoch"]), str(r["step"]),
            format(r["loss_total"], ".17g"), format(r["loss_v"], ".17g"),
            format(r["loss_p"], ".17g"), format(r["loss_cd"], ".17g")]))
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# gradient verification


def _synthetic_record(config: ModelConfig, seed: int, n_s: int = 5,
                      n_v: int = 3) -> SampleRecord:
    from .pointcloud import PointCloud
    rng = SplitMix64(seed)

    def uniforms(n):
        return rng.uniform_array(n) * 2.0 - 1.0

    pos_s = uniforms(n_s * 3).reshape(n_s, 3)
    normals = uniforms(n_s * 3).reshape(n_s, 3)
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    pos_v = uniforms(n_v * 3).reshape(n_v, 3)
    surface = PointCloud(pos_s, normals if config.geom_width == 6 else None,
                         np.zeros((n_s, 0)), "surface")
    volume = PointCloud(pos_v, None, np.zeros((n_v, 0)), "volume")
    return SampleRecord(surface=surface, volume=volume,
                        pressure=uniforms(n_s), velocity=uniforms(n_v * 3).reshape(n_v, 3),
                        drag=float(uniforms(1)[0]), id="gradcheck")


@dataclass
class GradCheckReport:
    max_rel_error: float
    per_tensor: dict[str, float]
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tolerance


def grad_check(model_config: ModelConfig | None = None, tolerance: float = 1e-5,
               h: float = 1e-5, seed: int = 1234,
               corrupt_tensor: str | None = None) -> GradCheckReport:
    """Compare analytic gradients of the composite loss against central
    finite differences for every parameter tensor of a tiny model.

    corrupt_tensor is a test hook: perturbs one analytic gradient so the
    harness itself can be checked to fail.
    """
    config = model_config or ModelConfig(layers=1, channels=4, slices=2,
                                         heads=2, seed=seed, precision="f64",
                                         geom_width=6)
    if config.precision != "f64":
        raise ValueError("grad_check requires f64 precision")
    state = init_model(config)
    record = _synthetic_record(config, seed=derive_seed(seed, 1))
    weights = LossWeights()

    params_t = _wrap_params(state)
    loss, _ = _loss_graph(state, record, weights, params_t)
    loss.backward()
    analytic = {name: (t.grad.copy() if t.grad is not None
                       else np.zeros_like(t.value))
                for name, t in params_t.items()}
    if corrupt_tensor is not None:
        analytic[corrupt_tensor] = analytic[corrupt_tensor] + 1.0

    def loss_value() -> float:
        t, _ = _loss_graph(state, record, weights, _wrap_params(state))
        return float(t.value)

    per_tensor = {}
    for name, arr in state.params.items():
        fd = np.zeros_like(arr)
        flat = arr.reshape(-1)
        fd_flat = fd.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = loss_value()
            flat[i] = orig - h
            down = loss_value()
            flat[i] = orig
            fd_flat[i] = (up - down) / (2 * h)
        a = analytic[name]
        denom = max(float(np.abs(a).max(initial=0.0)),
                    float(np.abs(fd).max(initial=0.0)), 1e-8)
        per_tensor[name] = float(np.abs(a - fd).max(initial=0.0)) / denom
    max_rel = max(per_tensor.values())
    return GradCheckReport(max_rel_error=max_rel, per_tensor=per_tensor,
                           tolerance=tolerance)
