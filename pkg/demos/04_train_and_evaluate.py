"""Train a small surrogate end to end and print the metric report.

Uses a reduced model profile and a small synthetic dataset so the whole
script runs in about a minute on a laptop.
"""

import tempfile
from pathlib import Path

from aerosurrogate.datagen import DatasetSpec, generate_records
from aerosurrogate.metrics import evaluate
from aerosurrogate.model import ModelConfig, load_checkpoint
from aerosurrogate.training import LossWeights, TrainConfig, train

common = dict(n_surface=128, n_volume=64, a_range=(1.0, 2.0),
              r_min=2.0, r_max=4.0)
train_recs = generate_records(DatasetSpec(n_samples=8, seed=11, **common))
test_recs = generate_records(DatasetSpec(n_samples=4, seed=900, **common))

model_cfg = ModelConfig(layers=2, channels=32, slices=8, heads=4, seed=7,
                        precision="f32", geom_width=6)
train_cfg = TrainConfig(epochs=100, seed=5, learning_rate=5e-4,
                        weights=LossWeights(velocity=1.0, pressure=1.0,
                                            drag=0.5))

out = Path(tempfile.mkdtemp()) / "run"
result = train(train_recs, model_cfg, train_cfg, out_dir=out)
first = result.log_rows[0]["loss_total"]
last = result.log_rows[-1]["loss_total"]
print(f"loss {first:.4f} -> {last:.4f} "
      f"({100 * last / first:.1f}% of initial) over {len(result.log_rows)} steps")
print(f"artifacts in {out}: checkpoint_final.bin, checkpoint_best.bin, "
      "loss_log.csv")

# the checkpoint round-trips and carries the normalization statistics
state = load_checkpoint(out / "checkpoint_final.bin")

print("\nheld-out metric report:")
print(evaluate(state, test_recs).to_table())
