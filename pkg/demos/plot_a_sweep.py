"""
Sweeping the importance factor
==============================

Run the baseline and the improved loss at a = 0.5, 0.7 and 0.9 on the
default 14-month synthetic dataset, as the ``extremeloss sweep`` command
does.  As ``a`` grows, the mean bias in both extreme bands should move
toward zero.  This takes a few minutes on one core.
"""
from extremeloss import cli, pipeline, synth
from extremeloss.config import RunConfig

cfg = RunConfig()
raw, _ = synth.generate(cfg.synth_config())
cleaned, _ = pipeline.clean(raw)
windows = pipeline.build_windows(pipeline.aggregate(cleaned))
split = pipeline.split_by_month(windows, cfg.test_months, cfg.loss_config())

rows = cli.run_sweep(cfg, split.train, split.test)
print(f"{'a':>9s} {'recall':>7s} {'mae_high':>9s} {'bias_high':>10s} {'bias_low':>9s}")
for r in rows:
    print(f"{r['a']!s:>9s} {r['recall_combined']:7.3f} {r['mae_high']:9.3f} "
          f"{r['bias_high']:+10.3f} {r['bias_low']:+9.3f}")
