//! Matplotlib scripts that render the sweep CSVs. Only the standard `csv`
//! module and matplotlib are needed to run them.

/// Mean PSNR, SSIM and relative error per solver versus sampling ratio.
pub fn sweep_sr_plot_script(csv_name: &str, png_name: &str) -> String {
    format!(
        r#"#!/usr/bin/env python3
import csv
from collections import defaultdict

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

acc = defaultdict(lambda: defaultdict(list))
with open({csv:?}) as f:
    for row in csv.DictReader(f):
        key = (row["solver"], float(row["sr"]))
        for col in ("psnr_db", "ssim", "relerr"):
            acc[key][col].append(float(row[col]))

solvers = sorted({{s for s, _ in acc}})
fig, axes = plt.subplots(1, 3, figsize=(13, 4))
for ax, col, label in zip(axes, ("psnr_db", "ssim", "relerr"), ("PSNR (dB)", "SSIM", "relative error")):
    for s in solvers:
        srs = sorted(sr for name, sr in acc if name == s)
        means = [sum(acc[(s, sr)][col]) / len(acc[(s, sr)][col]) for sr in srs]
        ax.plot(srs, means, marker="o", label=s)
    ax.set_xlabel("sampling ratio")
    ax.set_ylabel(label)
    ax.grid(True, alpha=0.3)
axes[2].set_yscale("log")
axes[0].legend()
fig.tight_layout()
fig.savefig({png:?}, dpi=150)
"#,
        csv = csv_name,
        png = png_name
    )
}

/// Mean relative error per solver versus iteration, one panel per SR.
pub fn sweep_iters_plot_script(csv_name: &str, png_name: &str) -> String {
    format!(
        r#"#!/usr/bin/env python3
import csv
from collections import defaultdict

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

acc = defaultdict(list)
with open({csv:?}) as f:
    for row in csv.DictReader(f):
        acc[(float(row["sr"]), row["solver"], int(row["iter"]))].append(float(row["relerr"]))

srs = sorted({{sr for sr, _, _ in acc}})
solvers = sorted({{s for _, s, _ in acc}})
fig, axes = plt.subplots(1, len(srs), figsize=(4.5 * len(srs), 4), squeeze=False)
for ax, sr in zip(axes[0], srs):
    for s in solvers:
        iters = sorted(i for r, name, i in acc if r == sr and name == s)
        means = [sum(acc[(sr, s, i)]) / len(acc[(sr, s, i)]) for i in iters]
        ax.semilogy(iters, means, label=s)
    ax.set_title(f"SR = {{sr}}")
    ax.set_xlabel("iteration")
    ax.set_ylabel("relative error")
    ax.grid(True, alpha=0.3)
axes[0][0].legend()
fig.tight_layout()
fig.savefig({png:?}, dpi=150)
"#,
        csv = csv_name,
        png = png_name
    )
}
