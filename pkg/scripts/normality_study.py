"""Standardized-error study plus the 1/sqrt(M) noise-scale check.

    python3 scripts/normality_study.py [--config configs/normality.toml] [--out-dir runs/normality] [--workers 4]
"""
import argparse
import json
from pathlib import Path

from factorate import config as cfgio
from factorate import harness
from factorate.cli import normality_config_from_document
from factorate.dgp import DgpConfig, InteractiveFE, NoiseSpec

ROOT = Path(__file__).resolve().parents[1]

p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
p.add_argument("--config", default=ROOT / "configs" / "normality.toml")
p.add_argument("--out-dir", default=ROOT / "runs" / "normality")
p.add_argument("--workers", type=int)
args = p.parse_args()

cfg = normality_config_from_document(cfgio.load_document(args.config))
rows, summary = harness.run_normality_study(cfg, workers=args.workers)
out = Path(args.out_dir)
out.mkdir(parents=True, exist_ok=True)
harness.write_table_csv(rows, harness.NORMALITY_FIELDS, out / "records.csv")

scale_cfg = harness.NoiseScaleConfig(DgpConfig(100, 10, 3, InteractiveFE(), NoiseSpec(sigma_max=1.0)))
summary["noise_scale"] = harness.run_noise_scale_study(scale_cfg)
summary["config"] = cfgio.to_plain(cfg)
harness.write_json(summary, out / "summary.json")
print(json.dumps({k: v for k, v in summary.items() if k != "config"}, indent=2))
