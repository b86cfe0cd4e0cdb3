from pathlib import Path
from typing import Dict, List, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def plot_purity_curves(curves: Dict[str, List[dict]], path: Union[str, Path]) -> Path:
    """Minimum purity against heralding efficiency, one line per labelled curve"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    fig, ax = plt.subplots(figsize=(6, 4.5))
    for label, rows in curves.items():
        ax.plot([row["eta"] for row in rows], [row["mu_min"] for row in rows], label=label, linewidth=2)
    ax.axhline(1.0, color="grey", linestyle=":", linewidth=1)
    ax.set_xlabel("Heralding efficiency η")
    ax.set_ylabel("Minimum purity μ")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1.05)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
