"""Running-minimum max-entry approximation error versus rank, for q = 1 and 2.

    python3 scripts/holder_decay.py [--config configs/decay.toml] [--out-dir runs/decay]
"""
import argparse
import dataclasses
from pathlib import Path

from factorate import config as cfgio
from factorate import harness
from factorate.cli import decay_ranks_from_document

ROOT = Path(__file__).resolve().parents[1]

p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
p.add_argument("--config", default=ROOT / "configs" / "decay.toml")
p.add_argument("--out-dir", default=ROOT / "runs" / "decay")
args = p.parse_args()

doc = cfgio.load_document(args.config)
base = cfgio.dgp_config_from_dict(doc["dgp"])
ranks = decay_ranks_from_document(doc)
out = Path(args.out_dir)
out.mkdir(parents=True, exist_ok=True)
for q in (1, 2):
    curve = harness.run_holder_decay(dataclasses.replace(base, latent_dim=q), ranks)
    harness.write_curve_csv(curve, out / f"curve_q{q}.csv")
    print(f"q={q}: " + "  ".join(f"r={r}:{v:.2e}" for r, v in curve))
