"""Command line entry point: ``esx run | fourier | simulate | list``."""

from __future__ import annotations

import argparse
import logging
import sys
from importlib import resources
from pathlib import Path

from esx import dynamics as dyn
from esx.config import STUDY_KINDS, ExperimentSpec, cost_registry, load_spec, number
from esx.errors import ConfigError, EsxError
from esx.fourier import DEFAULT_NQUAD, fourier_coeff
from esx.runner import fmt, run_spec, simulate_one

log = logging.getLogger("esx")


def bundled_specs() -> list:
    root = resources.files("esx") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".toml"))


def resolve_spec(arg: str) -> Path:
    """A path, or the name of a bundled scenario (``fig4`` or ``fig4.toml``)."""
    p = Path(arg)
    if p.exists():
        return p
    stem = p.name[:-5] if p.name.endswith(".toml") else p.name
    if stem in bundled_specs():
        return Path(str(resources.files("esx") / "scenarios" / f"{stem}.toml"))
    raise ConfigError(f"no such spec file or bundled scenario: {arg}", field="spec")


def _params(pairs) -> dict:
    out = {}
    for item in pairs or []:
        if "=" not in item:
            raise ConfigError(f"expected key=value, got {item!r}", field="--param")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _cost_table(label: str, pairs) -> dict:
    table = {"label": label}
    table.update(_params(pairs))
    return table


def cmd_run(args) -> int:
    spec = load_spec(resolve_spec(args.spec))
    checks, out = run_spec(spec, args.out)
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.study} {c.check} value={fmt(c.value)} ({c.threshold})")
    failed = sum(not c.passed for c in checks)
    print(f"{len(checks) - failed}/{len(checks)} checks passed; artifacts in {out}")
    return 1 if failed else 0


def cmd_fourier(args) -> int:
    from esx.config import build_cost

    cost = build_cost(_cost_table(args.cost, args.param))
    x, delta = number(args.x, "--x"), number(args.delta, "--delta")
    c = fourier_coeff(cost, x, delta, args.k, args.n_quad)
    print("x,delta,k,a_k,b_k,n_quad")
    print(",".join(fmt(v) for v in (c.x, c.delta, c.k, c.a_k, c.b_k, c.n_quad)))
    return 0


def cmd_simulate(args) -> int:
    raw = {
        "name": "simulate",
        "seed": args.seed,
        "cost": _cost_table(args.cost, args.param),
        "es": {"gamma": args.gamma, "delta": args.delta},
        "sim": {"x0": args.x0, "step": args.step, "avg_step": args.avg_step, "schemes": [args.scheme]},
    }
    if args.horizon is not None:
        raw["sim"]["horizon"] = args.horizon
    if args.ybar0 is not None:
        raw["sim"]["ybar0"] = args.ybar0
    from esx.config import parse_spec

    spec: ExperimentSpec = parse_spec(raw)
    params = dyn.EsParams(spec.gamma, spec.delta)
    cost = None if args.scheme.startswith("pv_") else spec.build_cost()
    traj = simulate_one(spec, args.scheme, cost, params)
    every = max(1, args.record_every)
    idx = list(range(0, traj.t.size, every))
    if idx[-1] != traj.t.size - 1:
        idx.append(traj.t.size - 1)
    lines = ["t," + ",".join(traj.labels)]
    lines += [",".join(fmt(v) for v in (traj.t[i], *traj.states[i])) for i in idx]
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    if traj.diverged:
        log.warning("trajectory diverged at t=%s", fmt(traj.t[-1]))
        return 1
    return 0


def list_builtins() -> str:
    lines = ["costs:"]
    lines += [f"  {k}" for k in sorted(cost_registry())]
    lines.append("schemes:")
    lines += [f"  {k}" for k in sorted(dyn.SCHEMES)]
    lines.append("studies:")
    lines += [f"  {k}" for k in sorted(STUDY_KINDS)]
    lines.append("scenarios:")
    lines += [f"  {k}" for k in bundled_specs()]
    return "\n".join(lines) + "\n"


def cmd_list(args) -> int:
    sys.stdout.write(list_builtins())
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="esx", description="Extremum seeking simulation and averaging checks.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run every study in a spec file")
    r.add_argument("spec", help="TOML spec path or bundled scenario name (fig4..fig8)")
    r.add_argument("--out", help="output directory (overrides ESX_OUT and the spec)")
    r.set_defaults(func=cmd_run)

    f = sub.add_parser("fourier", help="k-th Fourier coefficients of the dithered cost")
    f.add_argument("--cost", default="paper_cost")
    f.add_argument("--param", action="append", metavar="KEY=VALUE", help="cost parameter, repeatable")
    f.add_argument("--x", required=True)
    f.add_argument("--delta", required=True)
    f.add_argument("--k", type=int, default=1)
    f.add_argument("--n-quad", type=int, default=DEFAULT_NQUAD)
    f.set_defaults(func=cmd_fourier)

    s = sub.add_parser("simulate", help="single run; writes a trajectory CSV")
    s.add_argument("--cost", default="paper_cost")
    s.add_argument("--param", action="append", metavar="KEY=VALUE", help="cost parameter, repeatable")
    s.add_argument("--scheme", default="classic", choices=sorted(dyn.SCHEMES))
    s.add_argument("--gamma", default="0.1")
    s.add_argument("--delta", default="0.1")
    s.add_argument("--x0", default="0")
    s.add_argument("--ybar0", default=None)
    s.add_argument("--horizon", default=None, help="default 60/gamma")
    s.add_argument("--step", default="0.005")
    s.add_argument("--avg-step", default="0.05")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--record-every", type=int, default=20)
    s.add_argument("--out", help="CSV path (default stdout)")
    s.set_defaults(func=cmd_simulate)

    ls = sub.add_parser("list", help="list cost labels, schemes, study kinds and bundled scenarios")
    ls.set_defaults(func=cmd_list)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except EsxError as exc:
        print(f"esx: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
