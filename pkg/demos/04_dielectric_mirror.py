"""
Designing a 20-layer dielectric mirror
======================================

Each layer picks TiO2 (n = 2.4) or MgF2 (n = 1.38) and a thickness in
50-150 nm; the stack sits on glass in air.  We maximize the mean reflectance
over 300-500 nm, then repeat with a penalty on the spectral range.
One seed per objective here; ``pbomix run configs/mirror-max.cfg`` runs
five and writes the CSV artifacts.
"""
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from pbomix.pbo import PboConfig, run
from pbomix.tmm import MirrorProblem, format_stack

fig, axes = plt.subplots(1, 2, figsize=(10, 3.5))
for alpha, label in ((0.0, "max"), (0.1, "flat")):
    problem = MirrorProblem(alpha=alpha)
    result = run(problem, problem.space, PboConfig(seed=0), progress=None)
    stack = problem.decode(result.best_action)
    rho = problem.spectrum(stack)
    print(f"[{label}] best cost {result.best_cost:.4f}, mean R {rho.mean():.4f}, "
          f"range {rho.max() - rho.min():.4f}")
    sys.stdout.write(format_stack(stack, comment=f"best {label} stack"))
    axes[0].plot(result.generation_evaluations, result.generation_best_cost, label=f"{label} best")
    axes[0].plot(result.generation_evaluations, result.generation_mean_cost, alpha=0.5,
                 label=f"{label} population mean")
    axes[1].plot(problem.grid.wavelengths(), rho, label=label)

axes[0].set_xlabel("evaluations")
axes[0].set_ylabel("cost")
axes[0].legend()
axes[1].set_xlabel("wavelength (nm)")
axes[1].set_ylabel("reflectance")
axes[1].legend()
fig.tight_layout()
fig.savefig("mirror_designs.png", dpi=120)
