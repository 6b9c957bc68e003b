"""Consistency sweep: |ATE_hat - oracle| across growing panel sizes.

    python3 scripts/consistency_sweep.py [--config configs/consistency.toml] [--out-dir runs/consistency] [--workers 4]
"""
import argparse
import json
from pathlib import Path

from factorate import config as cfgio
from factorate import harness
from factorate.cli import sweep_config_from_document

ROOT = Path(__file__).resolve().parents[1]

p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
p.add_argument("--config", default=ROOT / "configs" / "consistency.toml")
p.add_argument("--out-dir", default=ROOT / "runs" / "consistency")
p.add_argument("--workers", type=int)
args = p.parse_args()

cfg = sweep_config_from_document(cfgio.load_document(args.config))
records = harness.run_consistency_sweep(cfg, workers=args.workers)
summary = harness.write_sweep_outputs(cfg, records, args.out_dir)
for s in summary["sizes"]:
    print(f"N={s['n_units']:4d} T={s['n_measurements']:4d}  median |err| {s['median_abs_error']:.4f}  IQR {s['iqr_abs_error']:.4f}")
print(json.dumps({k: summary[k] for k in ("medians_nonincreasing", "median_ratio_last_first", "disperse_exponent")}, indent=2))
