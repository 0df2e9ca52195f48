"""Command-line front end.

Every subcommand writes ``report.json`` (with the config hash and version)
to ``--out`` and prints it; table-like results also go to CSV files.
Exit codes: 0 ok, 2 configuration error, 3 non-finite values, 4 a check
failed under ``--assert`` / ``--assert-bounded``.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .decompositions import build_lp_basis, max_band
from .experiments import (config_hash, dispersive_estimate_report, estimate_band_norms,
                          propagate, sharpness_probe)
from .function_spaces import parse_space, space_norm
from .oio import (OioSpec, composition_remainder_rate, export_kernel_csv, kernel_slice,
                  lowfreq_kernel_decay)
from .spectral import (Grid, GridFunction, NonFiniteError, export_profile_csv,
                       load_grid_function, lp_norm, save_grid_function)
from .symbols import (check_amplitude_class, critical_order, default_samples,
                      make_amplitude, make_phase, phase_from_config, amplitude_from_config,
                      verify_phase)

EXIT_OK, EXIT_CONFIG, EXIT_NONFINITE, EXIT_ASSERT = 0, 2, 3, 4


class ConfigError(ValueError):
    pass


def _floats(text):
    if isinstance(text, (list, tuple)):
        return [float(t) for t in text]
    return [float(t) for t in str(text).split(",") if t.strip()]


def _add_grid(p, N=4096, L=4 * math.pi):
    p.add_argument("--n", type=int, default=1, help="dimension (1 or 2)")
    p.add_argument("--L", type=float, default=L, help="box length per axis")
    p.add_argument("--N", type=int, default=N, help="samples per axis")


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="oscillab", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"oscillab {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with option values")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--threads", type=int, default=None,
                        help="worker threads (default: OSCILLAB_THREADS or 1)")
    common.add_argument("--assert", dest="check", action="store_true",
                        help="exit 4 when the verdict is negative")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify-phase", parents=[common], help="check phase class conditions")
    p.add_argument("--preset", "--phase", dest="phase", required=False)
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--snd", action="store_true")
    p.add_argument("--fk", type=float)
    p.add_argument("--l2", action="store_true")
    p.add_argument("--lf", type=float)
    p.add_argument("--schrodinger", action="store_true")

    p = sub.add_parser("verify-amplitude", parents=[common], help="check S^m_{rho,delta}")
    p.add_argument("--amp", "--preset", dest="amp")
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--m", type=float, default=0.0)
    p.add_argument("--rho", type=float, default=1.0)
    p.add_argument("--delta", type=float, default=0.0)

    p = sub.add_parser("bands", parents=[common], help="per-band operator norm ratios")
    p.add_argument("--phase")
    p.add_argument("--amp", default="one")
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--jmin", type=int, default=0)
    p.add_argument("--jmax", type=int, default=8)
    p.add_argument("--samples", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--family", default="chirp")
    p.add_argument("--fixed-grid", action="store_true",
                   help="use --L/--N for every band instead of band-adapted grids")
    _add_grid(p)

    p = sub.add_parser("sharpness", parents=[common], help="f_lambda growth probe")
    p.add_argument("--k", type=float, default=2.0)
    p.add_argument("--p", type=float, default=1.0)
    p.add_argument("--m", type=float)
    p.add_argument("--lambda", dest="lam", type=float, default=0.1)
    p.add_argument("--jmin", type=int, default=4)
    p.add_argument("--jmax", type=int, default=8)
    p.add_argument("--assert-bounded", action="store_true",
                   help="exit 4 when the ratio grows with the cutoff")

    p = sub.add_parser("propagate", parents=[common], help="evolve initial data")
    p.add_argument("--preset", default="schrodinger")
    p.add_argument("--times", default="0.5")
    p.add_argument("--f0", default="gaussian",
                   help="gaussian, packet:XI0 or a saved grid function path")
    _add_grid(p, N=1024, L=40.0)

    p = sub.add_parser("dispersive", parents=[common], help="dispersive estimate report")
    p.add_argument("--preset", default="schrodinger")
    p.add_argument("--s", type=float, default=0.0)
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--q", type=float, default=2.0)
    p.add_argument("--times", default="0.25,0.5,1")
    p.add_argument("--samples", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jmin", type=int, default=0)
    p.add_argument("--jmax", type=int, default=8)

    p = sub.add_parser("compose", parents=[common], help="composition remainder rate")
    p.add_argument("--phase", default="power:2")
    p.add_argument("--amp", default="cosx:0.5")
    p.add_argument("--jmin", type=int, default=3)
    p.add_argument("--jmax", type=int, default=7)
    _add_grid(p, N=1024, L=2 * math.pi)

    p = sub.add_parser("kernel", parents=[common], help="band kernels and low-frequency decay")
    p.add_argument("--phase", default="linear")
    p.add_argument("--amp", default="one")
    p.add_argument("--j", type=int, default=3)
    p.add_argument("--beta", type=int, default=0)
    p.add_argument("--lowfreq", action="store_true", help="fit the low-frequency decay")
    p.add_argument("--mu", type=float)
    _add_grid(p, N=1024, L=2 * math.pi)

    p = sub.add_parser("norm", parents=[common], help="function space (quasi-)norms")
    p.add_argument("--space", action="append", required=False,
                   help='e.g. "B:s=0.5,p=1,q=2" (repeatable)')
    p.add_argument("--f0", default="gaussian")
    _add_grid(p, N=1024, L=40.0)
    return ap


_ALIASES = {"lambda": "lam", "fixed-grid": "fixed_grid"}
_SPACE_KEYS = {"config", "out", "threads", "check", "command"}


def _parse(argv):
    ap = _build_parser()
    args = ap.parse_args(argv)
    if args.config:
        try:
            cfg = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        if not isinstance(cfg, dict):
            raise ConfigError("config must be a JSON object")
        cfg.pop("command", None)
        cfg = {_ALIASES.get(k, k.replace("-", "_")): v for k, v in cfg.items()}
        known = set(vars(args)) - _SPACE_KEYS
        unknown = set(cfg) - known - {"out", "threads"}
        if unknown:
            raise ConfigError(f"unknown config keys for {args.command}: {sorted(unknown)}")
        # command line wins over the file: re-parse with file values as defaults
        sub = ap._subparsers._group_actions[0].choices[args.command]
        sub.set_defaults(**cfg)
        args = ap.parse_args(argv)
    return args


def _config_of(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items())
            if k not in ("config", "out", "threads", "check")}


def _grid(args) -> Grid:
    return Grid(args.n, float(args.L), int(args.N))


def _initial(text: str, grid: Grid) -> GridFunction:
    if text == "gaussian":
        return GridFunction.from_callable(grid, lambda *x: np.exp(-sum(c**2 for c in x) / 2))
    if text.startswith("packet:"):
        k0 = float(text.split(":", 1)[1])
        return GridFunction.from_callable(
            grid, lambda *x: np.exp(-sum(c**2 for c in x) / 2 + 1j * k0 * x[0]))
    f = load_grid_function(text)
    if f.spectral:
        raise ConfigError("initial data must be a spatial grid function")
    return f


def _write(out: Path, name: str, text: str, header: str | None = None):
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_text((header + "\n" if header else "") + text)


def _emit(args, payload: dict, csvs: dict | None = None) -> dict:
    cfg = _config_of(args)
    h = config_hash(cfg)
    report = {"version": __version__, "config_hash": h, "config": cfg}
    report.update(payload)
    out = Path(args.out)
    for name, text in (csvs or {}).items():
        _write(out, name, text, f"# oscillab {__version__} config {h}")
    _write(out, "report.json", json.dumps(report, indent=2, sort_keys=True, default=str) + "\n")
    print(json.dumps(report, indent=2, sort_keys=True, default=str))
    return report


def _strip(summary: dict) -> dict:
    return {k: v for k, v in summary.items() if k not in ("version", "config_hash")}


def _require(value, flag):
    if value is None:
        raise ConfigError(f"{flag} is required")
    return value


# -- commands -----------------------------------------------------------------

def _cmd_verify_phase(args):
    phi = phase_from_config(_require(args.phase, "--preset"), args.n)
    rep = verify_phase(phi, default_samples(args.n), snd=args.snd, fk=args.fk, l2=args.l2,
                       lf=args.lf, schrodinger=args.schrodinger)
    _emit(args, {"report": rep.to_dict()})
    return rep.verdict


def _cmd_verify_amplitude(args):
    a = amplitude_from_config(_require(args.amp, "--amp"), args.n)
    res = check_amplitude_class(a, args.m, args.rho, args.delta, default_samples(args.n))
    _emit(args, {"amplitude": a.metadata(), "report": res.to_dict()})
    return res.verdict


def _cmd_bands(args):
    phi = make_phase(_require(args.phase, "--phase"), args.n)
    a = make_amplitude(args.amp, args.n)
    spec = OioSpec(phi, a, _grid(args))
    rep = estimate_band_norms(spec, args.p, range(args.jmin, args.jmax + 1), args.samples,
                              args.seed, args.family,
                              adaptive=False if args.fixed_grid else None,
                              workers=args.threads)
    payload = {"bands": _strip(rep.summary())}
    verdict = True
    if phi.k is not None and a.m is not None:
        expected = a.m - critical_order(phi.k, args.n, args.p)
        verdict = bool(rep.slope <= expected + 0.15)
        payload.update(expected_slope=expected, upper_consistent=verdict)
    _emit(args, payload, {"bands.csv": rep.to_csv()})
    return verdict


def _cmd_sharpness(args):
    m = args.m if args.m is not None else critical_order(args.k, 1, args.p) + 0.5
    probe = sharpness_probe(args.k, m, args.p, args.lam, range(args.jmin, args.jmax + 1),
                            workers=args.threads)
    payload = {"mode": probe.mode, "m": m, "critical_order": critical_order(args.k, 1, args.p),
               "ratios": probe.ratios, "growth_per_doubling": probe.growth_per_doubling,
               "grows": probe.grows, "variation": probe.variation}
    _emit(args, payload, {"sharpness.csv": probe.to_csv()})
    return not (args.assert_bounded and probe.grows)


def _cmd_propagate(args):
    g = _grid(args)
    f0 = _initial(args.f0, g)
    times = _floats(args.times)
    us = propagate(args.preset, f0, times, workers=args.threads)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    norms = []
    for t, u in zip(times, us):
        stem = f"u_t{t:+.6g}"
        save_grid_function(u, out / f"{stem}.bin")
        export_profile_csv(u, out / f"{stem}.csv")
        norms.append(lp_norm(u, 2))
    _emit(args, {"times": times, "l2_norms": norms, "initial_l2": lp_norm(f0, 2)})
    return True


def _cmd_dispersive(args):
    rep = dispersive_estimate_report(args.preset, args.s, args.p, args.q, _floats(args.times),
                                     args.samples, args.seed,
                                     range(args.jmin, args.jmax + 1), workers=args.threads)
    bound = -rep.critical + 0.15
    verdict = bool(rep.slope <= bound)
    _emit(args, {"dispersive": _strip(rep.summary()), "slope_bound": bound, "verdict": verdict},
          {"dispersive.csv": rep.to_csv()})
    return verdict


def _cmd_compose(args):
    a = make_amplitude(args.amp, args.n)
    spec = OioSpec(make_phase(args.phase, args.n), a, _grid(args))
    fit = composition_remainder_rate(spec, js=range(args.jmin, args.jmax + 1),
                                     workers=args.threads)
    gain = (a.rho if a.rho is not None else 1.0) - (a.delta or 0.0)
    verdict = bool(fit.slope <= -gain + 0.15)
    _emit(args, {"composition": fit.to_dict(), "verdict": verdict})
    return verdict


def _cmd_kernel(args):
    phi = make_phase(args.phase, args.n)
    a = make_amplitude(args.amp, args.n)
    if args.lowfreq:
        d = lowfreq_kernel_decay(phi, a, mu=args.mu)
        payload = {"exponent": d.exponent, "fit_range": d.fit_range, "shrunk": d.shrunk}
        verdict = True
        if args.mu is not None:
            payload["target"] = args.n + 0.8 * args.mu - 0.2
            verdict = bool(d.exponent >= payload["target"])
        _emit(args, payload)
        return verdict
    spec = OioSpec(phi, a, _grid(args))
    ks = kernel_slice(spec, args.j, (args.beta,) + (0,) * (args.n - 1),
                      store_rows=[int(np.ravel_multi_index((args.N // 2,) * args.n,
                                                           (args.N,) * args.n))],
                      workers=args.threads)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    export_kernel_csv(ks, out / "kernel.csv")
    _emit(args, {"j": ks.j, "beta": list(ks.beta), "sup": ks.sup,
                 "normalized": ks.normalized})
    return True


def _cmd_norm(args):
    g = _grid(args)
    f = _initial(args.f0, g)
    basis = build_lp_basis(max_band(g), g)
    specs = args.space or ["Lp:p=2"]
    vals = {}
    for text in specs:
        vals[text] = space_norm(f, parse_space(text), basis)
    _emit(args, {"norms": vals})
    return True


_COMMANDS = {
    "verify-phase": _cmd_verify_phase,
    "verify-amplitude": _cmd_verify_amplitude,
    "bands": _cmd_bands,
    "sharpness": _cmd_sharpness,
    "propagate": _cmd_propagate,
    "dispersive": _cmd_dispersive,
    "compose": _cmd_compose,
    "kernel": _cmd_kernel,
    "norm": _cmd_norm,
}


def run(argv=None) -> int:
    try:
        args = _parse(argv)
    except SystemExit as exc:  # argparse usage errors
        return EXIT_OK if exc.code in (0, None) else EXIT_CONFIG
    except ConfigError as exc:
        print(f"oscillab: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        ok = _COMMANDS[args.command](args)
    except NonFiniteError as exc:
        print(f"oscillab: numerical guard: {exc}", file=sys.stderr)
        return EXIT_NONFINITE
    except (ConfigError, ValueError, KeyError) as exc:
        print(f"oscillab: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if not ok and (args.check or getattr(args, "assert_bounded", False)):
        return EXIT_ASSERT
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
