"""Command-line front end: ``fracwave <command> [options]``.

Options may also come from a ``key = value`` file given with ``--config``;
flags on the command line win.  Exit status: 0 success, 1 usage, 2
validation, 3 numerical failure, 4 I/O.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import analysis, fbi, lpbesov, mlf, spectral
from ._io import atomic_write, canonical_json, fingerprint
from .errors import FracwaveError, NotTempered, NumericalError

EXIT_USAGE, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_IO = 1, 2, 3, 4


class UsageError(Exception):
    pass


class ValidationError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# {{{ parsing


def _float(s):
    try:
        return float(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {s!r}") from None


def _add_spec(p, gamma=True):
    p.add_argument("--alpha", type=_float)
    p.add_argument("--beta", type=_float)
    if gamma:
        p.add_argument("--gamma", type=_float)
    p.add_argument("--allow-nontempered", action="store_true", default=None)


def _add_grid(p):
    p.add_argument("--dim", type=int)
    p.add_argument("--n", type=int, help="points per axis (power of two)")
    p.add_argument("--L", type=_float, help="box length per axis")
    p.add_argument("--datum", help="gaussian, bump, annulus_wave or an FWF1 file")


def _add_times(p):
    p.add_argument("--t", type=_float, help="single time")
    p.add_argument("--t-geom", help="log-spaced times lo:hi:count")
    p.add_argument("--t-list", help="comma-separated times")


def _add_out(p):
    p.add_argument("--output", help="output path prefix")
    p.add_argument("--no-plot", action="store_true", default=None)


DEFAULTS = {
    "beta_ml": 1.0,
    "dim": 1,
    "n": 1024,
    "L": 64.0,
    "datum": "gaussian",
    "observable": "linf_u",
    "band": 1.0,
    "bands": "0.25,0.5,1,2,4,8,16",
    "window": "10:inf",
    "x0": 0.0,
    "xi": 2.0,
    "lambdas": "1:6:0.5",
    "quad_order": 128,
    "s": 0.0,
    "p": 2.0,
    "q": 2.0,
    "homogeneous": "true",
    "w": "ml",
    "allow_nontempered": False,
    "no_plot": False,
}


def build_parser():
    p = _Parser(prog="fracwave", description=__doc__.splitlines()[0])
    p.add_argument("--config", help="key = value file; flags override it")
    p.add_argument("--threads", type=int, help="worker cap (overrides FRACWAVE_THREADS)")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    c = sub.add_parser("ml-eval", help="evaluate E_{alpha,beta}(z)")
    c.add_argument("--alpha", type=_float)
    c.add_argument("--beta-ml", type=_float)
    c.add_argument("--z", help="complex argument, e.g. -1 or 2-3j")
    c.add_argument("--r", type=_float, help="modulus (with --angle)")
    c.add_argument("--angle", type=_float, help="argument in units of pi")
    c.add_argument("--output")

    c = sub.add_parser("propagate", help="propagate a datum and write an FWF1 dump")
    _add_spec(c)
    _add_grid(c)
    _add_times(c)
    _add_out(c)

    c = sub.add_parser("decay-scan", help="observable against time")
    _add_spec(c)
    _add_grid(c)
    _add_times(c)
    c.add_argument("--observable", choices=analysis.OBSERVABLES[:5])
    c.add_argument("--band", type=_float)
    c.add_argument("--radius", type=_float)
    c.add_argument("--window", help="fit window lo:hi")
    _add_out(c)

    c = sub.add_parser("envelope-sweep", help="band sup over its dispersive envelope")
    _add_spec(c)
    c.add_argument("--dim", type=int)
    c.add_argument("--bands", help="comma-separated dyadic N")
    _add_times(c)
    _add_out(c)

    c = sub.add_parser("residual-norm", help="sup of the residual multiplier")
    c.add_argument("--alpha", type=_float)
    _add_times(c)
    c.add_argument("--output")

    c = sub.add_parser("strong-convergence", help="L2 norm of the residual flow")
    c.add_argument("--alpha", type=_float)
    _add_grid(c)
    _add_times(c)
    _add_out(c)

    c = sub.add_parser("tail-mass", help="L2 mass outside a ball after propagation")
    _add_spec(c)
    _add_grid(c)
    _add_times(c)
    c.add_argument("--w", help="ml (default), abs, square, power:a, indicator:r, linear:c, poly:c0,c1,...")
    c.add_argument("--radius", type=_float)
    c.add_argument("--center", type=_float)
    c.add_argument("--output")

    c = sub.add_parser("fbi-scan", help="FBI integral and Gaussian decay fit")
    c.add_argument("--w")
    c.add_argument("--x0", type=_float)
    _add_times(c)
    c.add_argument("--xi", type=_float)
    c.add_argument("--lambdas", help="lo:hi:step or comma list")
    c.add_argument("--quad-order", type=int)
    _add_out(c)

    c = sub.add_parser("besov-norm", help="dyadic Besov norm of a datum")
    _add_grid(c)
    c.add_argument("--s", type=_float)
    c.add_argument("--p", type=_float)
    c.add_argument("--q", type=_float)
    c.add_argument("--homogeneous", choices=["true", "false"])
    c.add_argument("--output")
    return p


def read_config_file(path):
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise OSError(f"cannot read config file {path}: {e.strerror}") from e
    for i, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{i}: expected 'key = value'")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k.replace("-", "_")] = v
    return out


def parse_config(argv):
    """Merge defaults, config file and flags into a flat dict."""
    parser = build_parser()
    ns = parser.parse_args(argv)
    if ns.command is None:
        raise UsageError("a command is required")
    flags = {k: v for k, v in vars(ns).items() if v is not None}
    cfg = {}
    if ns.config:
        known = set(vars(ns))
        for k, v in read_config_file(ns.config).items():
            if k not in known or k in ("config", "command"):
                raise UsageError(f"unknown key {k!r} in config file for {ns.command}")
            cfg[k] = _coerce(parser, ns.command, k, v)
    cfg.update(flags)
    for k, v in DEFAULTS.items():
        cfg.setdefault(k, v)
    cfg.pop("config", None)
    return cfg


def _coerce(parser, command, key, value):
    sub = parser._subparsers._group_actions[0].choices[command]
    for act in sub._actions + parser._actions:
        if act.dest == key:
            if isinstance(act, argparse._StoreTrueAction):
                return value.lower() in ("1", "true", "yes", "on")
            if act.type is not None:
                try:
                    return act.type(value)
                except (ValueError, argparse.ArgumentTypeError):
                    raise UsageError(f"bad value for {key}: {value!r}") from None
            if act.choices is not None and value not in act.choices:
                raise UsageError(f"bad value for {key}: {value!r}")
            return value
    raise UsageError(f"unknown key {key!r}")


def _require(cfg, *keys):
    for k in keys:
        if cfg.get(k) is None:
            raise UsageError(f"missing required parameter --{k.replace('_', '-')}")


def _times(cfg, required=True):
    given = [k for k in ("t", "t_geom", "t_list") if cfg.get(k) is not None]
    if len(given) > 1:
        raise UsageError("give only one of --t, --t-geom, --t-list")
    if not given:
        if required:
            raise UsageError("missing required parameter --t (or --t-geom / --t-list)")
        return None
    k = given[0]
    if k == "t":
        ts = [float(cfg["t"])]
    elif k == "t_list":
        try:
            ts = [float(x) for x in str(cfg["t_list"]).split(",") if x.strip()]
        except ValueError:
            raise UsageError(f"bad --t-list {cfg['t_list']!r}") from None
    else:
        parts = str(cfg["t_geom"]).split(":")
        try:
            lo, hi, cnt = float(parts[0]), float(parts[1]), int(parts[2])
        except (ValueError, IndexError):
            raise UsageError(f"--t-geom expects lo:hi:count, got {cfg['t_geom']!r}") from None
        if not (0 < lo < hi) or cnt < 2:
            raise ValidationError("--t-geom needs 0 < lo < hi and count >= 2")
        ts = list(np.geomspace(lo, hi, cnt))
    if any(t < 0 or not math.isfinite(t) for t in ts):
        raise ValidationError("times must be finite and non-negative")
    if any(b <= a for a, b in zip(ts, ts[1:])):
        raise ValidationError("times must be strictly increasing")
    return ts


def _spec(cfg):
    _require(cfg, "alpha", "beta", "gamma")
    try:
        spec = spectral.SymbolSpec(cfg["alpha"], cfg["beta"], cfg["gamma"])
    except ValueError as e:
        raise ValidationError(str(e)) from None
    if not spec.tempered and not cfg["allow_nontempered"]:
        raise ValidationError(
            f"gamma={spec.gamma:g} < alpha={spec.alpha:g}: the propagator is not tempered "
            "(its symbol grows exponentially); pass --allow-nontempered to force"
        )
    return spec


def _datum(cfg):
    name = cfg["datum"]
    if name in spectral.PRESETS:
        try:
            grid = spectral.Grid(cfg["dim"], cfg["L"], cfg["n"])
        except ValueError as e:
            raise ValidationError(str(e)) from None
        return spectral.preset(name, grid)
    path = Path(name)
    if not path.exists():
        raise ValidationError(f"datum {name!r} is neither a preset {spectral.PRESETS} nor an existing file")
    f = spectral.load_field(path)
    if f.domain != "space":
        raise ValidationError("datum file must hold a space-domain field")
    return f


def _window(cfg):
    lo, hi = str(cfg["window"]).split(":")
    return float(lo), float(hi)


def _prefix(cfg):
    return Path(cfg.get("output") or f"fracwave_out/{cfg['command']}")


def _fingerprint_cfg(cfg):
    return {k: v for k, v in sorted(cfg.items()) if k not in ("output", "no_plot", "threads")}


# }}}

# {{{ commands


def _emit(payload, cfg, path=None):
    fp_cfg = _fingerprint_cfg(cfg)
    text = analysis.json_text(payload, fp_cfg)
    if path is not None:
        atomic_write(path, text)
    return text


def cmd_ml_eval(cfg):
    _require(cfg, "alpha")
    if cfg.get("z") is None and cfg.get("r") is None:
        raise UsageError("missing required parameter --z (or --r with --angle)")
    try:
        params = mlf.MLParams(cfg["alpha"], cfg["beta_ml"])
    except ValueError as e:
        raise ValidationError(str(e)) from None
    if cfg.get("r") is not None:
        val = mlf.ml_ray(cfg["r"], cfg.get("angle") or 0.0, params.alpha, params.beta_ml)
    else:
        try:
            z = complex(str(cfg["z"]).replace(" ", ""))
        except ValueError:
            raise UsageError(f"bad complex number {cfg['z']!r}") from None
        val = mlf.mittag_leffler(z, params.alpha, params.beta_ml)
    val = complex(val)
    print(f"{val.real!r} {val.imag!r}")
    if cfg.get("output"):
        _emit({"re": val.real, "im": val.imag}, cfg, cfg["output"])
    return 0


def cmd_propagate(cfg):
    spec = _spec(cfg)
    ts = _times(cfg)
    if len(ts) != 1:
        raise UsageError("propagate takes a single --t")
    phi = _datum(cfg)
    u = spectral.propagate_ml(phi, spec, ts[0], allow_nontempered=cfg["allow_nontempered"])
    path = _prefix(cfg).with_suffix(".fwf")
    spectral.save_field(u, path)
    print(f"wrote {path}  sup|u|={u.norm(np.inf)!r}  L2={u.norm(2)!r}")
    return 0


def _series_with(series, cfg):
    merged = dict(series.config)
    merged["cli"] = _fingerprint_cfg(cfg)
    return analysis.DecaySeries(series.times, series.values, series.observable, merged)


def cmd_decay_scan(cfg):
    spec = _spec(cfg)
    ts = _times(cfg)
    phi = _datum(cfg)
    obs = cfg["observable"]
    s = analysis.decay_scan(phi, spec, ts, obs, band=cfg["band"], radius=cfg.get("radius"),
                            allow_nontempered=cfg["allow_nontempered"], workers=cfg.get("threads"))
    s = _series_with(s, cfg)
    pre = _prefix(cfg)
    analysis.write_series_csv(s, pre.with_suffix(".csv"))
    payload = {"observable": obs, "count": len(s)}
    fits = {}
    try:
        fit = analysis.fit_slope(s, _window(cfg))
        fits[obs] = fit.as_dict()
        print(f"{obs}: slope {fit.slope:.4f} over [{fit.window[0]:g}, {fit.window[1]:g}] "
              f"(rms {fit.rms_residual:.3g}, {fit.count} samples)")
    except FracwaveError as e:
        fit = None
        print(f"{obs}: no fit ({e})")
    series_for_plot = [s]
    if obs == "linf_u":
        sq = analysis.DecaySeries(s.times, s.values**2, "linf_u_squared", s.config)
        analysis.write_series_csv(s, Path(f"{pre}_squared.csv"), squared=True)
        series_for_plot.append(sq)
        try:
            f2 = analysis.fit_slope(sq, _window(cfg))
            fits["linf_u_squared"] = f2.as_dict()
            print(f"linf_u_squared: slope {f2.slope:.4f}")
        except FracwaveError:
            pass
    payload["fits"] = fits
    _emit(payload, cfg, pre.with_suffix(".json"))
    if not cfg["no_plot"]:
        from . import plotting

        plotting.plot_decay(series_for_plot, pre.with_suffix(".png"), fit=fit)
    print(f"wrote {pre.with_suffix('.csv')} ({len(s)} rows)")
    return 0


def _float_list(text, key):
    try:
        return [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"bad list for {key}: {text!r}") from None


def cmd_envelope_sweep(cfg):
    spec = _spec(cfg)
    ts = _times(cfg)
    bands = _float_list(cfg["bands"], "bands")
    try:
        table = analysis.envelope_sweep(spec, bands, ts, dim=cfg["dim"], workers=cfg.get("threads"))
    except ValueError as e:
        raise ValidationError(str(e)) from None
    table = analysis.EnvelopeTable(table.rows, {**table.config, "cli": _fingerprint_cfg(cfg)})
    pre = _prefix(cfg)
    analysis.write_envelope_csv(table, pre.with_suffix(".csv"))
    summ = table.summary()
    _emit({"summary": summ}, cfg, pre.with_suffix(".json"))
    if not cfg["no_plot"]:
        from . import plotting

        plotting.plot_envelope(table, pre.with_suffix(".png"))
    print(f"ratio min {summ['min']:.4g} max {summ['max']:.4g} spread {summ['spread']:.4g}")
    return 0


def cmd_residual_norm(cfg):
    _require(cfg, "alpha")
    a = cfg["alpha"]
    if not 0 < a < 1:
        raise ValidationError("alpha must lie in (0, 1)")
    ts = _times(cfg, required=False) or [1.0]
    norms = [analysis.residual_operator_norm(a, t) for t in ts]
    for t, v in zip(ts, norms):
        print(f"t={t!r} norm={v!r}")
    if cfg.get("output"):
        _emit({"times": ts, "norms": norms, "expected": (1 - a) / a}, cfg, cfg["output"])
    return 0


def cmd_strong_convergence(cfg):
    _require(cfg, "alpha")
    a = cfg["alpha"]
    if not 0 < a < 1:
        raise ValidationError("alpha must lie in (0, 1)")
    ts = _times(cfg)
    phi = _datum(cfg)
    s = _series_with(analysis.strong_convergence_scan(phi, a, ts, workers=cfg.get("threads")), cfg)
    pre = _prefix(cfg)
    analysis.write_series_csv(s, pre.with_suffix(".csv"))
    ratio = (s.values / phi.norm(2)).tolist()
    _emit({"relative": ratio, "operator_norm": (1 - a) / a}, cfg, pre.with_suffix(".json"))
    if not cfg["no_plot"]:
        from . import plotting

        plotting.plot_decay([s], pre.with_suffix(".png"), references=(-0.5,))
    for t, r in zip(ts, ratio):
        print(f"t={t!r} ||E(t)phi||/||phi||={r!r}")
    return 0


def parse_dispersion(text):
    kind, _, arg = str(text).partition(":")
    D = spectral.DispersionTable
    try:
        if kind == "abs":
            return D.absolute()
        if kind == "square":
            return D.square()
        if kind == "power":
            return D.power(float(arg))
        if kind == "indicator":
            return D.indicator(float(arg) if arg else 1.0)
        if kind == "linear":
            return D.linear(*_float_list(arg, "w"))
        if kind == "poly":
            return D.polynomial(*_float_list(arg, "w"))
    except ValueError:
        raise UsageError(f"bad dispersion {text!r}") from None
    raise UsageError(f"unknown dispersion {text!r}")


def cmd_tail_mass(cfg):
    _require(cfg, "radius")
    ts = _times(cfg)
    if len(ts) != 1:
        raise UsageError("tail-mass takes a single --t")
    phi = _datum(cfg)
    if cfg["w"] == "ml":
        spec = _spec(cfg)
        u = spectral.propagate_ml(phi, spec, ts[0], allow_nontempered=cfg["allow_nontempered"])
    else:
        u = spectral.propagate_unitary(phi, parse_dispersion(cfg["w"]), ts[0])
    try:
        m = analysis.tail_mass(u, cfg["radius"], cfg.get("center"))
    except ValueError as e:
        raise ValidationError(str(e)) from None
    print(f"tail mass {m!r}")
    if cfg.get("output"):
        _emit({"tail_mass": m}, cfg, cfg["output"])
    return 0


def _lambdas(text):
    text = str(text)
    if ":" in text:
        lo, hi, step = (float(x) for x in text.split(":"))
        return tuple(np.round(np.arange(lo, hi + step / 2, step), 12))
    return tuple(_float_list(text, "lambdas"))


def cmd_fbi_scan(cfg):
    _require(cfg, "w")
    if cfg["w"] == "ml":
        raise UsageError("fbi-scan needs --w (abs, square, power:a, indicator:r, linear:c, poly:...)")
    ts = _times(cfg)
    if len(ts) != 1:
        raise UsageError("fbi-scan takes a single --t")
    try:
        conf = fbi.FBIConfig(parse_dispersion(cfg["w"]), cfg["x0"], ts[0], cfg["xi"],
                             _lambdas(cfg["lambdas"]), cfg["quad_order"])
    except ValueError as e:
        raise ValidationError(str(e)) from None
    values = fbi.fbi_curve(conf)
    pre = _prefix(cfg)
    try:
        res = fbi.fbi_decay_exponent(conf)
    except FracwaveError as e:
        res = None
        print(f"no fit: {e}")
    fbi.write_fbi(conf, res, pre.with_suffix(".csv"), pre.with_suffix(".json"), values)
    if not cfg["no_plot"]:
        from . import plotting

        plotting.plot_fbi(conf.lambdas, np.abs(values), pre.with_suffix(".png"),
                          sigma=None if res is None else res.sigma)
    if res is not None:
        print(f"sigma {res.sigma:.6g} verdict {res.verdict} (rms {res.fit.rms_residual:.3g})")
    return 0


def cmd_besov_norm(cfg):
    phi = _datum(cfg)
    try:
        spec = lpbesov.BesovSpec(cfg["s"], cfg["p"], cfg["q"], cfg["homogeneous"] == "true")
    except ValueError as e:
        raise ValidationError(str(e)) from None
    res = lpbesov.besov_norm(phi, spec)
    print(f"norm {res.value!r} (truncation estimate {res.tail!r})")
    if cfg.get("output"):
        _emit({"norm": res.value, "tail": res.tail}, cfg, cfg["output"])
    return 0


COMMANDS = {
    "ml-eval": cmd_ml_eval,
    "propagate": cmd_propagate,
    "decay-scan": cmd_decay_scan,
    "envelope-sweep": cmd_envelope_sweep,
    "residual-norm": cmd_residual_norm,
    "strong-convergence": cmd_strong_convergence,
    "tail-mass": cmd_tail_mass,
    "fbi-scan": cmd_fbi_scan,
    "besov-norm": cmd_besov_norm,
}


# }}}


def _fail(kind, code, msg):
    sys.stderr.write(json.dumps({"error": kind, "exit_code": code, "message": str(msg)}) + "\n")
    return code


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        cfg = parse_config(argv)
        if cfg.get("threads") is not None and cfg["threads"] < 1:
            raise ValidationError("--threads must be >= 1")
        return COMMANDS[cfg["command"]](cfg)
    except UsageError as e:
        return _fail("usage", EXIT_USAGE, e)
    except NumericalError as e:
        return _fail("numerical", EXIT_NUMERICAL, e)
    except (ValidationError, NotTempered, ValueError) as e:
        return _fail("validation", EXIT_VALIDATION, e)
    except OSError as e:
        return _fail("io", EXIT_IO, e)
    except FracwaveError as e:
        return _fail("validation", EXIT_VALIDATION, e)


if __name__ == "__main__":
    sys.exit(main())
