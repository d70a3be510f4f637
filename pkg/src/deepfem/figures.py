"""Optional figure rendering for report runs.

Kept out of the bench module on purpose: reports stay plain delimited
text, and figures are produced only when the CLI asks for them.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

__all__ = ["render_figures"]


def render_figures(rows, out_stem) -> list[str]:
    """Render convergence figures next to the report file.

    ``out_stem`` is the report path without extension; returns the list of
    files written.  Draws a log-log error-vs-h plot for whichever error
    columns are populated.
    """
    out_stem = Path(out_stem)
    written: list[str] = []
    series = []
    for key, label in (("e_h", "mesh-phase error"),
                       ("err_lambda", "eigenvalue error"),
                       ("e_dl", "network error")):
        pts = [(r.h, getattr(r, key)) for r in rows
               if getattr(r, key) is not None and getattr(r, key) > 0]
        if len(pts) >= 2:
            series.append((label, pts))
    if series:
        fig, ax = plt.subplots(figsize=(5, 4))
        for label, pts in series:
            hs, errs = zip(*sorted(pts))
            ax.loglog(hs, errs, "o-", label=label)
        hs_all = sorted({h for _, pts in series for h, _ in pts})
        ref = [series[0][1][0][1] * (h / series[0][1][0][0]) ** 2 for h in hs_all]
        ax.loglog(hs_all, ref, "k--", alpha=0.5, label="h^2 reference")
        ax.set_xlabel("h")
        ax.set_ylabel("error")
        ax.legend()
        ax.grid(True, which="both", alpha=0.3)
        fig.tight_layout()
        path = out_stem.with_suffix(".convergence.png")
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(str(path))
    # iteration counts, when the mesh phase ran
    ks = [(r.h, r.k) for r in rows if r.k is not None and r.k >= 0]
    if len(ks) >= 2:
        fig, ax = plt.subplots(figsize=(5, 4))
        hs, iters = zip(*sorted(ks))
        ax.semilogx(hs, iters, "s-")
        ax.set_xlabel("h")
        ax.set_ylabel("iterations")
        ax.grid(True, which="both", alpha=0.3)
        fig.tight_layout()
        path = out_stem.with_suffix(".iterations.png")
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(str(path))
    return written
