"""Command-line driver: ``robvol {simulate,forecast,evaluate,compare}``.

Exit codes: 0 success, 2 configuration error, 3 data or I/O error,
4 numeric/domain error.
"""

from __future__ import annotations

import argparse
import datetime as dt
import hashlib
import json
import logging
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, load_config_file, merge, parse_predictor, parse_proxy
from .errors import ConfigError, DataError, DomainError, NumericError
from .io_csv import load_returns_csv, write_table
from .losses import evaluate, get_loss, rolling_loss_difference, rolling_optimal_scale
from .pipeline import build_predictor, build_proxy
from .series import ReturnSeries, VolSeries
from .sim import mc_variance_study, simulate_returns

log = logging.getLogger("robvol")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


# configuration ---------------------------------------------------------------

def _overrides(args) -> dict:
    o: dict = {}
    if getattr(args, "input", None) is not None:
        o["input"] = args.input
    if getattr(args, "predictor", None):
        o["predictors"] = [parse_predictor(s) for s in args.predictor]
    if getattr(args, "proxy", None):
        o["proxies"] = [parse_proxy(s) for s in args.proxy]
    if getattr(args, "loss", None):
        o["losses"] = list(dict.fromkeys(args.loss))
    if getattr(args, "window", None) is not None:
        o["window"] = args.window
    if getattr(args, "T_policy", None) is not None:
        o["T_policy"] = args.T_policy
    if getattr(args, "ql_floor", None) is not None:
        o["ql_floor"] = args.ql_floor
    if getattr(args, "no_scale", False):
        o["scale"] = False
    if args.out_dir is not None:
        o["out_dir"] = args.out_dir
    if args.seed is not None:
        o["seed"] = args.seed
    mc = {}
    for key in ("dist", "reps", "n"):
        val = getattr(args, key, None)
        if val is not None:
            mc["dists" if key == "dist" else key] = val
    if mc:
        o["mc"] = mc
    return o


def build_config(args) -> RunConfig:
    doc = load_config_file(args.config) if args.config else {"version": 1}
    doc = merge(doc, _overrides(args))
    if doc.get("input") is not None:
        doc.pop("simulation", None)
    return RunConfig.from_doc(doc)


# shared pipeline -------------------------------------------------------------

@dataclass
class Prepared:
    returns: ReturnSeries
    sigma2: np.ndarray | None
    predictors: dict[str, VolSeries]
    proxies: dict[str, VolSeries]
    span: np.ndarray
    mb: int
    mf: int
    T_eff: int
    T_used: int


def prepare(cfg: RunConfig) -> Prepared:
    if cfg.input is not None:
        returns = load_returns_csv(cfg.input)
        sigma2 = None
    else:
        sim = cfg.doc["simulation"]
        returns, sigma2 = simulate_returns(cfg.model, int(sim["T"]), cfg.seed)
    n = len(returns)
    mb = max(p.window for p in cfg.predictors)
    mf = max(p.window for p in cfg.proxies)
    T_eff = n - mb - mf
    if T_eff < 1:
        raise DataError(f"series of length {n} leaves no points after priming ({mb} backward, {mf} forward)")
    T_used = cfg.fixed_T if cfg.fixed_T is not None else T_eff
    preds = {}
    for pc in cfg.predictors:
        s = build_predictor(returns, pc)
        preds[s.name] = s
    proxs = {}
    for xc in cfg.proxies:
        s = build_proxy(returns, xc, T_default=T_used)
        if s.name in proxs:
            raise ConfigError(f"$.proxies: duplicate proxy name {s.name!r}")
        proxs[s.name] = s
    span = np.zeros(n, dtype=bool)
    span[mb:n - mf] = True
    return Prepared(returns, sigma2, preds, proxs, span, mb, mf, T_eff, T_used)


def _restrict(s: VolSeries, span: np.ndarray) -> VolSeries:
    return VolSeries(s.values, s.valid & span, s.meta, s.tau)


def _floor_for_ql(proxy: VolSeries, floor: float | None) -> tuple[VolSeries, float, int]:
    v = proxy.values[proxy.valid]
    if floor is None:
        med = float(np.median(v)) if v.size else 0.0
        floor = 1e-12 * med if med > 0 else float(np.finfo(float).tiny)
    hit = int(np.sum(v < floor))
    vals = np.where(proxy.valid, np.maximum(proxy.values, floor), np.nan)
    return VolSeries(vals, proxy.valid, proxy.meta, proxy.tau), float(floor), hit


def _scoring_proxies(prep: Prepared, cfg: RunConfig, loss: str):
    """Proxies restricted to the common span, floored for QL."""
    out, floors = {}, {}
    for name, p in prep.proxies.items():
        r = _restrict(p, prep.span)
        if loss == "ql":
            r, f, hit = _floor_for_ql(r, cfg.ql_floor)
            floors[name] = {"floor": f, "points_floored": hit}
        out[name] = r
    return out, floors


# commands ----------------------------------------------------------------------

def cmd_simulate(cfg: RunConfig, out: Path) -> dict:
    mc = cfg.doc["mc"]
    files, timing = {}, {}
    for dist in mc["dists"]:
        t0 = time.perf_counter()
        res = mc_variance_study(dist, n=mc["n"], reps=mc["reps"], alpha_grid=mc["alpha_grid"],
                                z_grid=mc["z_grid"], seed=cfg.seed, trim_mode=mc["trim_mode"], df=mc["df"])
        timing[f"runtime_s_{dist}"] = time.perf_counter() - t0
        fname = f"mc_{res.dist}.csv"
        (out / fname).write_text(res.to_csv(), encoding="utf-8")
        files[fname] = None
    return {"outputs": files, "timing": timing,
            "study": {"n": mc["n"], "reps": mc["reps"], "alpha_grid": mc["alpha_grid"],
                      "z_grid": mc["z_grid"], "trim_mode": mc["trim_mode"]}}


def cmd_forecast(cfg: RunConfig, out: Path, prep: Prepared | None = None) -> dict:
    prep = prep or prepare(cfg)
    n = len(prep.returns)
    dates = prep.returns.dates or tuple(range(n))
    header = ["date", "return"]
    cols = []
    if prep.sigma2 is not None:
        header.append("sigma2_true")
        cols.append(prep.sigma2)
    for kind, group in (("pred", prep.predictors), ("proxy", prep.proxies)):
        for name, s in group.items():
            header += [f"{kind}.{name}", f"{kind}.{name}.valid"]
            cols += [s.values, s.valid.astype(int)]
    header.append("in_eval_span")
    cols.append(prep.span.astype(int))
    rows = []
    for t in range(n):
        row = [dates[t], prep.returns.values[t]]
        for c in cols:
            v = c[t]
            row.append(int(v) if c.dtype.kind in "iub" else float(v))
        rows.append(row)
    write_table(out / "forecast.csv", header, rows)
    return {"outputs": {"forecast.csv": None}, **_span_info(prep)}


def cmd_evaluate(cfg: RunConfig, out: Path, prep: Prepared | None = None) -> dict:
    prep = prep or prepare(cfg)
    names = list(prep.predictors)
    header = ["predictor"]
    table = {nm: [nm] for nm in names}
    reports, floors = {}, {}
    for loss in cfg.losses:
        proxies, fl = _scoring_proxies(prep, cfg, loss)
        if fl:
            floors[loss] = fl
        for pname, proxy in proxies.items():
            try:
                rep = evaluate(loss, proxy, prep.predictors, scale=cfg.scale)
            except DomainError as exc:
                raise NumericError(f"{loss} against proxy {pname}: {exc}") from None
            reports[f"{loss}.{pname}"] = json.loads(rep.to_json())
            header += [f"{loss}.{pname}.raw", f"{loss}.{pname}.scaled", f"{loss}.{pname}.beta"]
            for sc in rep.scores:
                table[sc.name] += [sc.raw, sc.scaled, sc.beta]
    write_table(out / "evaluate.csv", header, [table[nm] for nm in names])
    _write_json(out / "evaluate.json", reports)
    return {"outputs": {"evaluate.csv": None, "evaluate.json": None}, "ql_floor": floors, **_span_info(prep)}


def cmd_compare(cfg: RunConfig, out: Path, prep: Prepared | None = None) -> dict:
    prep = prep or prepare(cfg)
    names = list(prep.predictors)
    if len(names) < 2:
        raise ConfigError("$.predictors: compare needs at least two predictors")
    window = cfg.window if cfg.window is not None else min(180, prep.T_eff)
    if window > prep.T_eff:
        raise ConfigError(f"$.window: {window} exceeds the {prep.T_eff} points available after priming")
    ref = names[0]
    preds = {nm: _restrict(s, prep.span) for nm, s in prep.predictors.items()}
    idx = np.nonzero(prep.span)[0][window - 1:]
    dates = prep.returns.dates or tuple(range(len(prep.returns)))
    header = ["date"]
    cols = []
    floors = {}
    for loss in cfg.losses:
        proxies, fl = _scoring_proxies(prep, cfg, loss)
        if fl:
            floors[loss] = fl
        for pname, proxy in proxies.items():
            try:
                for nm in names[1:]:
                    header.append(f"{loss}.{pname}.diff.{nm}-{ref}")
                    cols.append(rolling_loss_difference(get_loss(loss), proxy, preds[nm], preds[ref], window))
                for nm in names:
                    header.append(f"{loss}.{pname}.beta.{nm}")
                    cols.append(rolling_optimal_scale(loss, proxy, preds[nm], window))
            except DomainError as exc:
                raise NumericError(f"{loss} against proxy {pname}: {exc}") from None
    rows = [[dates[t]] + [float(c[i]) for c in cols] for i, t in enumerate(idx)]
    write_table(out / "compare.csv", header, rows)
    return {"outputs": {"compare.csv": None}, "window": window, "reference_predictor": ref,
            "ql_floor": floors, **_span_info(prep)}


def _span_info(prep: Prepared) -> dict:
    return {"n": len(prep.returns), "priming": {"backward": prep.mb, "forward": prep.mf},
            "T_effective": prep.T_eff, "T_used": prep.T_used}


COMMANDS = {
    "simulate": cmd_simulate,
    "forecast": cmd_forecast,
    "evaluate": cmd_evaluate,
    "compare": cmd_compare,
}


# manifest --------------------------------------------------------------------

def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, allow_nan=True) + "\n", encoding="utf-8")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def run(command: str, cfg: RunConfig) -> Path:
    out = Path(cfg.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DataError(f"cannot create output directory {out}: {exc}") from None
    started = dt.datetime.now(dt.timezone.utc)
    t0 = time.perf_counter()
    info = COMMANDS[command](cfg, out)
    timing = {"started_utc": started.isoformat(), "elapsed_s": time.perf_counter() - t0,
              **info.pop("timing", {})}
    info["outputs"] = {f: _sha256(out / f) for f in info["outputs"]}
    manifest = {"tool": "robvol", "version": __version__, "command": command,
                "seed": cfg.seed, "config": cfg.echo(), **info, "timing": timing}
    _write_json(out / f"manifest_{command}.json", manifest)
    return out


# argument parsing ------------------------------------------------------------

def _T_policy(text: str) -> str:
    if text == "full":
        return text
    kind, _, num = text.partition(":")
    if kind != "fixed" or not num.isdigit() or int(num) < 1:
        raise argparse.ArgumentTypeError(f"expected 'full' or 'fixed:<N>', got {text!r}")
    return f"fixed:{int(num)}"


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="robvol", description="Robust volatility proxies and forecast evaluation")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration (version 1)")
    common.add_argument("--out-dir", help="output directory (default: out)")
    common.add_argument("--seed", type=int, help="base RNG seed")
    common.add_argument("-v", "--verbose", action="store_true")

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--input", help="CSV with header 'date,return'; omit to simulate")
    data.add_argument("--predictor", action="append", metavar="SPEC",
                      help="repeatable, e.g. huber:hl=14 or clipewma:hl=7,M=0.01")
    data.add_argument("--proxy", action="append", metavar="SPEC",
                      help="repeatable, e.g. ewma, huber:hl=7,T=180, clip1, clipewma")
    data.add_argument("--loss", action="append", choices=["mse", "ql"])
    data.add_argument("--window", type=int, help="rolling window for compare (default min(180, T))")
    data.add_argument("--T-policy", dest="T_policy", type=_T_policy,
                      help="proxy inflation horizon: full (T = evaluation length) or fixed:<N>")
    data.add_argument("--ql-floor", type=float, help="floor applied to proxies before QL (default 1e-12 x median)")
    data.add_argument("--no-scale", action="store_true", help="skip optimal rescaling")

    s = sub.add_parser("simulate", parents=[common], help="variance-estimation Monte Carlo study")
    s.add_argument("--dist", action="append", choices=["lognormal", "t"])
    s.add_argument("--reps", type=int)
    s.add_argument("--n", type=int)
    helps = {
        "forecast": "per-date predictor and proxy series",
        "evaluate": "raw and optimally scaled losses per predictor, loss and proxy",
        "compare": "rolling loss differences and rolling optimal scales",
    }
    for name, text in helps.items():
        sub.add_parser(name, parents=[common, data], help=text)
    return p


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = build_config(args)
        out = run(args.command, cfg)
    except ConfigError as exc:
        print(f"robvol: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, OSError) as exc:
        print(f"robvol: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (DomainError, NumericError, ArithmeticError) as exc:
        print(f"robvol: numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    log.info("wrote %s", out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
