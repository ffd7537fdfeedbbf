"""Command-line experiment runner.

Each subcommand reads one section of a YAML config (defaults apply to
everything left out) and writes CSV files into the output directory.  Every
CSV starts with ``# key: value`` lines that include the config fingerprint.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, ExperimentConfig, default_rx_offset, load_config
from .constellation import (
    constellation_csv,
    joint_constellation,
    joint_gray_mapping,
    make_constellation,
    strategy1_remap,
)
from .errors import MbsatError
from .exitchart import (
    ChartFactory,
    DetectorSetup,
    ExitCurve,
    decoder_transfer,
    exit_csv,
    optimize_degrees,
    predict_threshold,
)
from .infotheory import (
    PLACEHOLDER_MODCODS,
    ModCodAtom,
    rates_csv,
    strategy1_rate_curve,
    strategy2_rate_curve,
    strategy3_rate_curve,
)
from .ldpc.code import dumps, girth, load
from .ldpc.distributions import named_distribution
from .ldpc.peg import four_cycle_pairs, peg_construct
from .report import csv_text
from .sim import FrameConfig, ber_crossing, ber_csv, sweep_ber

log = logging.getLogger("mbsat")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


def _meta(cfg: ExperimentConfig, command: str, **extra) -> dict:
    meta = {"tool": f"mbsat {__version__}", "command": command, "seed": cfg.seed, "fingerprint": cfg.fingerprint()}
    meta.update(extra)
    return meta


def _write(out_dir: Path, name: str, text: str) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    p = out_dir / name
    p.write_text(text)
    log.info("wrote %s", p)
    return p


def _joint_alphabet(mapping: str, c1, c2, gamma2: complex):
    if mapping == "joint":
        if c1.M != c2.M or c1.name != c2.name:
            raise ConfigError("joint mapping needs two equal PSK constellations")
        return joint_gray_mapping(c1.M).with_gain(gamma2, c1, c2)
    if mapping == "remap":
        return strategy1_remap(c1, c2, gamma2)
    return joint_constellation(c1, c2, gamma2)


def _code_for(spec, seed: int, salt: int):
    if spec.file is not None:
        return load(spec.file)
    return peg_construct(spec.n, named_distribution(spec.distribution), seed=[seed, salt])


# ---------------------------------------------------------------------------


def cmd_ir(cfg: ExperimentConfig, out_dir: Path, jobs: int = 1) -> list[Path]:
    sec = cfg.ir
    prof = cfg.scenario.profile()
    c1 = make_constellation(sec.modulation1)
    c2 = make_constellation(sec.modulation2)
    grid = sec.snr_db.points()
    atoms = (
        tuple(ModCodAtom(a.rate, a.probability, a.modulation) for a in sec.modcods)
        if sec.modcods is not None
        else PLACEHOLDER_MODCODS
    )
    meta = _meta(cfg, "ir", profile=prof.name or "inline")
    out = []
    for strat in sec.strategies:
        if strat in ("sud", "mud2"):
            res = strategy1_rate_curve(prof, c1, atoms, grid, strat, sec.n_samples, cfg.seed, sec.rx_offset_db)
            text = rates_csv(res, dict(meta, strategy=strat))
        elif strat == "s2":
            rows = strategy2_rate_curve(prof, c1, c2, grid, sec.alpha, sec.n_samples, cfg.seed, sec.rx_offset_db)
            text = csv_text(("snr_db", "rate", "std_error"), rows, dict(meta, strategy=strat, alpha=sec.alpha))
        else:
            rows = strategy3_rate_curve(prof, c1, grid, sec.n_samples, cfg.seed, sec.rx_offset_db)
            text = csv_text(("snr_db", "rate", "std_error"), rows, dict(meta, strategy=strat))
        out.append(_write(out_dir, f"ir-{strat}.csv", text))
    return out


def _exit_setup(strategy: int, mapping: str, modulation: str, prof, snr_db: float):
    c = make_constellation(modulation)
    alphabet = _joint_alphabet(mapping, c, c, prof.gamma2)
    return DetectorSetup(alphabet, c.bits_per_symbol, prof, snr_db, name=mapping)


def cmd_exit(cfg: ExperimentConfig, out_dir: Path, jobs: int = 1) -> list[Path]:
    sec = cfg.exit
    prof = cfg.scenario.profile()
    grid = np.linspace(0.0, 1.0, sec.grid_points)
    curves = {}
    thresholds = []
    for mapping in sec.mappings:
        setup = _exit_setup(sec.strategy, mapping, sec.modulation, prof, sec.snr_db)
        dists = [named_distribution(n) for n in sec.codes]
        factory = ChartFactory(setup, dists[0] if dists else None, dists[0] if dists else None, grid, sec.n_symbols, cfg.seed)
        surf = factory.surface(sec.snr_db)
        # detector curve toward user 1 with user 2 at the same a-priori level
        curves[f"detector-{mapping}"] = ExitCurve(grid, np.clip(surf.user1(grid, grid), 0, 1), {"mapping": mapping})
        for name, dist in zip(sec.codes, dists):
            dec = decoder_transfer(dist)
            chart = factory.chart(sec.snr_db, dec)
            curves[f"combined-{mapping}-{name}"] = ExitCurve(chart.grid, np.clip(chart.detector, 0, 1), {})
            if sec.thresholds:
                f2 = ChartFactory(setup, dist, dist, grid, sec.n_symbols, cfg.seed)
                thr = predict_threshold(f2, sec.threshold_lo_db, sec.threshold_hi_db, sec.threshold_tol_db)
                thresholds.append((mapping, name, thr))
    for name in sec.codes:
        dec = decoder_transfer(named_distribution(name))
        xs = np.linspace(0.0, 0.999, 200)
        # decoder curve drawn with swapped axes: input is the detector's output
        curves[f"decoder-{name}"] = ExitCurve(xs, np.clip(dec(xs), 0, 1), {})
    meta = _meta(cfg, "exit", snr_db=sec.snr_db, strategy=sec.strategy)
    out = [_write(out_dir, "exit.csv", exit_csv(curves, meta))]
    if thresholds:
        out.append(_write(out_dir, "exit-thresholds.csv", csv_text(("mapping", "code", "threshold_db"), thresholds, meta)))
    return out


def cmd_design(cfg: ExperimentConfig, out_dir: Path, jobs: int = 1) -> list[Path]:
    sec = cfg.design
    prof = cfg.scenario.profile()
    setup = _exit_setup(sec.strategy, sec.mapping, sec.modulation, prof, sec.snr_db)
    factory = ChartFactory(setup, None, None, np.linspace(0.0, 1.0, sec.grid_points), sec.n_symbols, cfg.seed,
                           two_user=sec.strategy == 2)
    probes = np.round(np.arange(sec.snr_db - sec.probe_span_db, sec.snr_db + 1e-9, sec.probe_step_db), 6)
    f_low = np.round(np.arange(0.30, sec.max_deg2_fraction + 1e-9, sec.f_low_step), 6)
    best, feasible = optimize_degrees(
        factory, sec.rate, sec.degrees, sec.check_degrees, f_low, sec.snr_db, probes, sec.max_deg2_fraction
    )
    refs = []
    for name in sec.reference:
        d = named_distribution(name)
        try:
            _, ok = optimize_degrees(factory, sec.rate, context_snr_db=sec.snr_db, snr_probe_db=probes,
                                     max_deg2_fraction=1.0, candidates=[d])
            refs.append((name, ok[0].threshold_db, True))
        except MbsatError:
            refs.append((name, float("nan"), False))

    def vnd_text(d):
        return " ".join(f"{deg}:{frac:.4f}" for deg, frac in d.vnd)

    ranked = sorted(feasible, key=lambda c: (c.threshold_db, -c.area))
    rows = [("best" if c is best else "candidate", vnd_text(c.dist), c.dist.cnd[0][0], c.threshold_db, c.area,
             c.stability) for c in ranked]
    rows += [("reference:" + n, vnd_text(named_distribution(n)), named_distribution(n).cnd[0][0], thr, float("nan"),
              float("nan")) for n, thr, _ok in refs]
    meta = _meta(cfg, "design", snr_db=sec.snr_db, rate=sec.rate,
                 references_feasible=",".join(f"{n}={ok}" for n, _t, ok in refs))
    cols = ("role", "vnd", "check_degree", "threshold_db", "tunnel_area", "stability")
    return [_write(out_dir, "design.csv", csv_text(cols, rows, meta))]


def cmd_build_code(cfg: ExperimentConfig, out_dir: Path, jobs: int = 1) -> list[Path]:
    sec = cfg.build_code
    dist = named_distribution(sec.distribution)
    code = peg_construct(sec.n, dist, seed=cfg.seed)
    stem = f"code-{sec.distribution.replace('/', '_')}-{sec.n}"
    p1 = _write(out_dir, stem + ".txt", dumps(code))
    checks = [code.check_list(c) for c in range(code.m)]
    vd = np.bincount(code.var_degrees)
    cd = np.bincount(code.check_degrees)
    rows = [("variable", d, int(c)) for d, c in enumerate(vd) if c] + [("check", d, int(c)) for d, c in enumerate(cd) if c]
    g = girth(code)
    meta = _meta(cfg, "build-code", n=code.n, m=code.m, k=code.k, girth=g,
                 four_cycles=len(four_cycle_pairs(code.n, checks)), code_file=p1.name)
    p2 = _write(out_dir, stem + ".csv", csv_text(("node", "degree", "count"), rows, meta))
    return [p1, p2]


def cmd_ber(cfg: ExperimentConfig, out_dir: Path, jobs: int = 1) -> list[Path]:
    sec = cfg.ber
    prof = cfg.scenario.profile()
    code1 = _code_for(sec.code1, cfg.seed, 1)
    needs2 = sec.strategy == 2 or (sec.strategy == 1 and sec.detector == "mud2")
    if needs2 and sec.code2 is None:
        raise ConfigError("this strategy needs code2")
    code2 = _code_for(sec.code2, cfg.seed, 2) if needs2 else None
    offset = sec.rx_offset_db if sec.rx_offset_db is not None else default_rx_offset(sec.strategy, code1.design_rate)
    fc = FrameConfig(
        strategy=sec.strategy,
        profile=prof,
        code1=code1,
        code2=code2,
        modulation1=sec.modulation1,
        modulation2=sec.modulation2,
        mapping=sec.mapping if sec.strategy != 3 else "classical",
        detector=sec.detector,
        rx_offset_db=offset,
        max_global_iterations=sec.max_global_iterations,
        bp_iterations=sec.bp_iterations,
        max_log=sec.max_log,
        seed=cfg.seed,
        residual_modulations=cfg.scenario.residual_modulations,
    )
    pts = sweep_ber(fc, sec.snr_db.points(), sec.min_errors, sec.max_bits, sec.target_ber, jobs=jobs)
    meta = _meta(cfg, "ber", rx_offset_db=offset, crossing_db=ber_crossing(pts, sec.target_ber),
                 schedule=f"{sec.max_global_iterations} global x {sec.bp_iterations} bp")
    return [_write(out_dir, "ber.csv", ber_csv(pts, meta))]


def cmd_export_mapping(cfg: ExperimentConfig, out_dir: Path, jobs: int = 1) -> list[Path]:
    sec = cfg.export_mapping
    c1 = make_constellation(sec.modulation1)
    c2 = make_constellation(sec.modulation2)
    if sec.kind == "single":
        alpha = c1
    else:
        alpha = _joint_alphabet(sec.kind, c1, c2, cfg.scenario.profile().gamma2)
    body = constellation_csv(alpha)
    head = "".join(f"# {k}: {v}\n" for k, v in _meta(cfg, "export-mapping", kind=sec.kind).items())
    return [_write(out_dir, f"mapping-{sec.kind}.csv", head + body)]


COMMANDS = {
    "ir": cmd_ir,
    "exit": cmd_exit,
    "design": cmd_design,
    "build-code": cmd_build_code,
    "ber": cmd_ber,
    "export-mapping": cmd_export_mapping,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mbsat", description="Multibeam forward-link rate and coding experiments.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", "-c", type=Path, default=None, help="YAML config file")
        sp.add_argument("--seed", type=int, default=None, help="override the config seed")
        sp.add_argument("--out-dir", "-o", type=Path, default=Path("out"))
        sp.add_argument("--jobs", "-j", type=int, default=1, help="worker processes")
        sp.add_argument("--verbose", "-v", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.jobs < 1:
            raise ConfigError("--jobs must be at least 1")
        cfg = load_config(args.config, args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        COMMANDS[args.command](cfg, args.out_dir, args.jobs)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (MbsatError, ValueError, ArithmeticError) as exc:
        print(f"error in {args.command}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
