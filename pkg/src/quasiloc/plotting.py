"""Report figures, rendered off-screen to PNG."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_META = {"Software": None}


def _save(fig, path: Path) -> None:
    fig.tight_layout()
    fig.savefig(path, dpi=110, metadata=_META)
    plt.close(fig)


def plot_groundstate(gs, radial, path) -> None:
    fig, (a, b) = plt.subplots(1, 2, figsize=(9, 3.5))
    a.plot(gs.grid, gs.values, label="φ")
    for j, psi in enumerate(radial.eigenfunctions if radial.eigenfunctions is not None else ()):
        a.plot(radial.grid, psi, lw=0.9, label=f"ψ{j}  (μ = {radial.eigenvalues[j]:.4g})")
    a.set_xlim(0, gs.rmax / 2)
    a.set_xlabel("r")
    a.legend(fontsize=7)
    tail = gs.values > 0
    b.semilogy(gs.grid[tail], gs.values[tail])
    b.set_xlabel("r")
    b.set_ylabel("φ (log scale)")
    _save(fig, path)


def plot_frequencies(fd, candidates, path) -> None:
    fig, ax = plt.subplots(figsize=(4.5, 4))
    ax.plot(fd.omega[:, 0], fd.omega[:, 1], "k.-", lw=0.8, label="ω(s)")
    acc = np.array([c.omega_bar for c in candidates if c.accepted])
    rej = np.array([c.omega_bar for c in candidates if not c.accepted])
    if acc.size:
        ax.plot(acc[:, 0], acc[:, 1], "o", mfc="none", ms=5, label="accepted ω̄")
    if rej.size:
        ax.plot(rej[:, 0], rej[:, 1], "x", ms=5, label="rejected")
    ax.set_xlabel("ω₁")
    ax.set_ylabel("ω₂")
    ax.legend(fontsize=7)
    _save(fig, path)


def plot_torus(candidate, path, n: int = 4000) -> None:
    t = np.linspace(0.0, 400.0, n)
    z = candidate.torus_point(t)
    fig, axes = plt.subplots(1, 2, figsize=(8, 3.8))
    for j, ax in enumerate(axes):
        ax.plot(z[:, j], z[:, 2 + j], lw=0.3)
        ax.set_aspect("equal")
        ax.set_xlabel(f"ξ̃{j + 1}")
        ax.set_ylabel(f"η̃{j + 1}")
    _save(fig, path)


def plot_reconstruction(rec, path) -> None:
    fig, (a, b) = plt.subplots(1, 2, figsize=(9, 3.5))
    im = a.pcolormesh(rec.x_N, rec.x_prime, rec.u[:, :, 0], shading="auto")
    fig.colorbar(im, ax=a)
    a.set_xlabel("x_N")
    a.set_ylabel("x'")
    a.set_title("u at y = 0", fontsize=9)
    mid = len(rec.x_prime) // 2
    im = b.pcolormesh(rec.y, rec.x_N, rec.u[mid], shading="auto")
    fig.colorbar(im, ax=b)
    b.set_xlabel("y")
    b.set_ylabel("x_N")
    b.set_title("u at x' = 0", fontsize=9)
    _save(fig, path)


def render_figures(report, out: Path) -> dict:
    art = report.artifacts
    files = {}
    if "gs" in art and "radial" in art:
        plot_groundstate(art["gs"], art["radial"], out / "groundstate.png")
        files["fig_groundstate"] = "groundstate.png"
    if "fd" in art and "candidates" in art:
        plot_frequencies(art["fd"], art["candidates"], out / "frequencies.png")
        files["fig_frequencies"] = "frequencies.png"
    if art.get("W"):
        plot_torus(art["W"][0], out / "torus.png")
        files["fig_torus"] = "torus.png"
    if "reconstruction" in art:
        plot_reconstruction(art["reconstruction"], out / "reconstruction.png")
        files["fig_reconstruction"] = "reconstruction.png"
    return files
