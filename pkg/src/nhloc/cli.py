"""Command-line front end: nhloc <command> --config run.toml [overrides]."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
import time

import numpy as np

from .errors import ConfigError, LocalizerError, NumericalError
from .invariants import chiral_winding, flatten_path, riesz_projection
from .io import ChainSpec, load_config, resolve_output_dir, write_csv, write_json, write_triplets
from .localizer import assemble_even_localizer, certify_hypotheses
from .maps import gap_map, index_map, ldos
from .model import build_chiral_chain, estimate_line_gap, heterostructure
from .signature import Method, schur_eigenvalues, spectral_flow

log = logging.getLogger("nhloc")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3
CLOSED = "closed"


def _config(args):
    cfg = load_config(args.config)
    changes = {}
    if args.kappa is not None:
        changes["kappa"] = args.kappa
    if args.rho is not None:
        changes["rho"] = None if args.rho == "full" else float(args.rho)
    if args.method is not None:
        changes["method"] = Method(args.method)
    if args.plots:
        changes["emit_plots"] = True
    try:
        cfg = dataclasses.replace(cfg, **changes)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    out = resolve_output_dir(cfg, args.out)
    write_json(out / "config_echo.json", cfg.echo())
    return cfg, out


def _flake(cfg):
    if isinstance(cfg.model, ChainSpec):
        raise ConfigError("this command needs a heterostructure model")
    return heterostructure(cfg.model)


def _plot_map(path, res, values, label):
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        log.warning("matplotlib not available; skipping %s", path.name)
        return
    fig, ax = plt.subplots(figsize=(4.5, 4))
    extent = (res.xs[0], res.xs[-1], res.ys[0], res.ys[-1])
    im = ax.imshow(values, origin="lower", extent=extent, aspect="equal")
    fig.colorbar(im, ax=ax, label=label)
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def cmd_index_map(cfg, out, threads):
    geom, H = _flake(cfg)
    xs, ys = cfg.grid.axes()
    start = time.perf_counter()
    res = index_map(H, geom, cfg.kappa, xs, ys, cfg.rho, cfg.method, threads)
    wall = time.perf_counter() - start
    rows = ((x, y, CLOSED if np.isnan(s) else int(s), g, ms) for x, y, s, g, ms in res.rows())
    write_csv(out / "index_map.csv", ["x", "y", "half_sig", "gap", "ms"], rows)
    sig = res.half_signature
    summary = {
        "parameters": cfg.echo(),
        "sites": geom.n_sites,
        "points": int(sig.size),
        "gap_closed": res.closed_count,
        "counts": {str(int(v)): int((sig == v).sum()) for v in np.unique(sig[~np.isnan(sig)])},
        "min_gap": float(np.nanmin(res.line_gap)),
        "wall_seconds": wall,
    }
    write_json(out / "index_map.json", summary)
    if cfg.emit_plots:
        _plot_map(out / "index_map.png", res, sig, "half-signature")
        _plot_map(out / "gap_map.png", res, res.line_gap, "localizer gap")
    print(f"index map: {sig.size} points, {res.closed_count} closed, {wall:.1f} s -> {out}")


def cmd_gap_map(cfg, out, threads):
    geom, H = _flake(cfg)
    xs, ys = cfg.grid.axes()
    res = gap_map(H, geom, cfg.kappa, xs, ys, cfg.rho, threads)
    write_csv(out / "gap_map.csv", ["x", "y", "gap", "ms"], ((x, y, g, ms) for x, y, _, g, ms in res.rows()))
    write_json(out / "gap_map.json", {"parameters": cfg.echo(), "min_gap": float(res.line_gap.min()), "max_gap": float(res.line_gap.max())})
    if cfg.emit_plots:
        _plot_map(out / "gap_map.png", res, res.line_gap, "localizer gap")
    print(f"gap map: min {res.line_gap.min():.4g} -> {out}")


def cmd_spectrum(cfg, out, args):
    geom, H = _flake(cfg)
    if args.target == "hamiltonian":
        ev = schur_eigenvalues(H.toarray())
        write_triplets(H, out / "hamiltonian.txt")
        name = "spectrum_hamiltonian.csv"
    else:
        L = assemble_even_localizer(H, geom, cfg.kappa, tuple(args.probe), cfg.rho)
        ev = schur_eigenvalues(L.matrix)
        name = "spectrum_localizer.csv"
    ev = ev[np.lexsort((ev.imag, ev.real))]
    write_csv(out / name, ["re", "im"], ((z.real, z.imag) for z in ev))
    print(f"{len(ev)} eigenvalues, min |Re| = {np.abs(ev.real).min():.4g} -> {out / name}")


def cmd_ldos(cfg, out):
    geom, H = _flake(cfg)
    settings = cfg.ldos
    if settings is None:
        raise ConfigError("ldos needs an [ldos] section")
    t = cfg.model.core.t
    eta = 0.05 * t if settings.eta is None else settings.eta
    values = ldos(H, settings.energy, eta)
    rows = ((n, x, y, v) for n, ((x, y), v) in enumerate(zip(geom.positions, values)))
    write_csv(out / "ldos.csv", ["site", "x", "y", "ldos"], rows)
    if cfg.emit_plots:
        try:
            import matplotlib

            matplotlib.use("Agg")
            import matplotlib.pyplot as plt

            fig, ax = plt.subplots(figsize=(4.5, 4))
            sc = ax.scatter(*geom.positions.T, c=values, s=12)
            fig.colorbar(sc, ax=ax, label="LDOS")
            ax.set_aspect("equal")
            fig.savefig(out / "ldos.png", dpi=120)
            plt.close(fig)
        except ImportError:
            log.warning("matplotlib not available; skipping ldos.png")
    print(f"ldos at E = {settings.energy}, eta = {eta}: max {values.max():.4g} -> {out}")


def cmd_flow(cfg, out):
    geom, H = _flake(cfg)
    p = cfg.flow

    def path(t):
        x = p.x_start + t * (p.x_end - p.x_start)
        return assemble_even_localizer(H, geom, cfg.kappa, (x, p.y), cfg.rho, window_center=(p.x_start, p.y)).matrix

    diagram = spectral_flow(path, steps=p.steps)
    diagram.write_csv(out / "flow_tracks.csv")
    xs = p.x_start + diagram.samples * (p.x_end - p.x_start)
    # Re-eigenvalue diagram: one row per sample, sorted real parts
    re = np.sort(diagram.tracks.real, axis=1)
    write_csv(out / "flow_re.csv", ["x"] + [f"re{k}" for k in range(re.shape[1])], ([x, *r] for x, r in zip(xs, re)))
    summary = {
        "net_flow": diagram.net_flow,
        "crossings": [{"x": p.x_start + tc * (p.x_end - p.x_start), "direction": d} for tc, d in diagram.crossings],
        "start_half_signature": None if diagram.start_signature is None else diagram.start_signature / 2,
        "end_half_signature": None if diagram.end_signature is None else diagram.end_signature / 2,
        "consistent": diagram.consistent,
        "highlighted_tracks": diagram.crossing_tracks(),
    }
    write_json(out / "flow.json", summary)
    print(f"net flow {diagram.net_flow} over {len(diagram.samples)} samples (consistent: {diagram.consistent})")


def cmd_certify(cfg, out, args):
    geom, H = _flake(cfg)
    g = estimate_line_gap(H)
    cert = certify_hypotheses(H, geom, cfg.kappa, cfg.rho, g, tuple(args.probe))
    payload = dataclasses.asdict(cert) | {"ok": cert.ok}
    write_json(out / "certificate.json", payload)
    print(json.dumps(payload, indent=2, default=str))


def cmd_chiral(cfg, out):
    spec = cfg.model
    if not isinstance(spec, ChainSpec):
        raise ConfigError("chiral needs a [model] with kind = 'chain'")
    chain = build_chiral_chain(spec.n_cells, spec.intra, spec.inter, spec.disorder_amplitude, spec.seed)
    g = estimate_line_gap(chain.H)
    result = chiral_winding(chain.H, chain.J, chain.geometry, cfg.kappa, rho=cfg.rho)
    P = riesz_projection(chain.H)
    Jd = chain.J.toarray()
    path_rows = []
    for t in np.linspace(0, 1, 11):
        Ht = flatten_path(chain.H, t, P)
        path_rows.append((t, float(np.abs(Jd @ Ht @ Jd + Ht).max()), estimate_line_gap(Ht)))
    write_csv(out / "chiral_path.csv", ["t", "symmetry_defect", "line_gap"], path_rows)
    payload = {"line_gap": g, "ind_A": result.A, "ind_B": result.B, "ind_V": result.V, "rho": result.rho, "consistent": result.consistent}
    write_json(out / "chiral.json", payload)
    print(json.dumps(payload, indent=2))


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="TOML run configuration")
    common.add_argument("--kappa", type=float)
    common.add_argument("--rho", help="truncation radius or 'full'")
    common.add_argument("--method", choices=[m.value for m in Method])
    common.add_argument("--out", help="output directory (overrides $NHLOC_OUTPUT_DIR and the config)")
    common.add_argument("--threads", type=int, default=os.cpu_count())
    common.add_argument("--plots", action="store_true")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="nhloc", description="Non-hermitian spectral localizer toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("index-map", parents=[common], help="half-signature and gap over the probe grid")
    sub.add_parser("gap-map", parents=[common], help="localizer gap over the probe grid")
    sp_ = sub.add_parser("spectrum", parents=[common], help="eigenvalues of H or of the localizer")
    sp_.add_argument("--target", choices=["hamiltonian", "localizer"], default="hamiltonian")
    sp_.add_argument("--probe", type=float, nargs=2, default=(0.0, 0.0))
    sub.add_parser("ldos", parents=[common], help="local density of states")
    sub.add_parser("flow", parents=[common], help="spectral flow along a horizontal probe path")
    ce = sub.add_parser("certify", parents=[common], help="check the kappa and rho bounds")
    ce.add_argument("--probe", type=float, nargs=2, default=(0.0, 0.0))
    sub.add_parser("chiral", parents=[common], help="odd index pairings of a chiral chain")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg, out = _config(args)
        cmd = args.command
        if cmd == "index-map":
            cmd_index_map(cfg, out, args.threads)
        elif cmd == "gap-map":
            cmd_gap_map(cfg, out, args.threads)
        elif cmd == "spectrum":
            cmd_spectrum(cfg, out, args)
        elif cmd == "ldos":
            cmd_ldos(cfg, out)
        elif cmd == "flow":
            cmd_flow(cfg, out)
        elif cmd == "certify":
            cmd_certify(cfg, out, args)
        elif cmd == "chiral":
            cmd_chiral(cfg, out)
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ConfigError, LocalizerError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
