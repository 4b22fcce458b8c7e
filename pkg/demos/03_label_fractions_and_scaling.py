"""How far do a handful of labels go? Label-fraction study + scaling fit.

Fine-tunes the classifier with and without self-supervised pretraining at
several label fractions, then fits a power law to pretraining loss vs
data size. Toy scale: a few minutes on a laptop CPU.
"""

from courier_har.datasets import build_arrays, load_corpus_windows
from courier_har.finetune import FinetuneConfig
from courier_har.masking import MaskSpec
from courier_har.metrics import fit_power_law, label_fraction_study
from courier_har.pretrain import (PretrainConfig, eval_masked_mse,
                                  run_pretraining)
from courier_har.model import EncoderConfig
from courier_har.synth import generate_corpus

corpus = "demo_corpus_lf"
generate_corpus(8, seed=21, out_dir=corpus)
x, y, stats = build_arrays(load_corpus_windows(corpus), task="activity3")

pre, _ = run_pretraining(x, PretrainConfig(epochs=15, seed=0),
                         MaskSpec(rng_seed=0))

rows = label_fraction_study(pre, x, y,
                            FinetuneConfig(epochs=8, eval_every=0, seed=0),
                            fractions=(0.01, 0.1, 0.9))
print(f"{'fraction':>8} {'arm':>20} {'accuracy':>9} {'macro_f1':>9}")
for r in rows:
    print(f"{r['fraction']:>8} {r['arm']:>20} "
          f"{r['accuracy']:>9.3f} {r['macro_f1']:>9.3f}")

# scaling: pretraining loss vs number of unlabeled windows
spec = MaskSpec(rng_seed=1)
probe, pool = x[:200], x[200:]
sizes = [n for n in (100, 400, len(pool)) if n <= len(pool)]
losses = []
for n in sizes:
    ck, _ = run_pretraining(pool[:n], PretrainConfig(epochs=5, seed=1), spec)
    losses.append(eval_masked_mse(ck.params, probe, spec, EncoderConfig()))
print("probe masked-MSE by data size:",
      {n: round(v, 3) for n, v in zip(sizes, losses)})
fit = fit_power_law(sizes, losses)
if fit:
    print(f"power-law fit: loss ~ {fit['a']:.3g} * N^(-{fit['b']:.3f}) "
          f"+ {fit['c']:.3f}")
