"""Command line driver: ``gaussarea verify | sweep | diagnose``.

Exit codes::

    0  success (for ``verify``: every slack is above its tolerance)
    1  the surface could not be built, or every sweep row failed
    2  an inequality of the chain is violated
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import re
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .angles import DEFAULT_DT, minimizer_estimates
from .diagnostics import bubbling_report
from .errors import GaussAreaError, InequalityViolation
from .functionals import FunctionalReport, inequality_chain
from .gallery import from_spec
from .surface import BASE_RESOLUTION

EXIT_OK, EXIT_BUILD, EXIT_VIOLATION = 0, 1, 2
SCHEMA = 1

log = logging.getLogger("gaussarea")


@dataclass
class RunConfig:
    spec: str = ""
    resolution: int = BASE_RESOLUTION
    theta_nodes: int = 512
    dt: float = DEFAULT_DT
    slack: float | None = None
    theta_samples: int = 1000
    out: str = "."
    format: str = "json"

    def validate(self):
        if not 8 <= self.resolution <= 1024:
            raise ValueError("resolution must lie in [8, 1024]")
        if not 64 <= self.theta_nodes <= 1 << 16:
            raise ValueError("theta-nodes must lie in [64, 65536]")
        if not 0 < self.dt < 0.1:
            raise ValueError("dt must lie in (0, 0.1)")
        if self.slack is not None and not 0 <= self.slack < 0.1:
            raise ValueError("slack must lie in [0, 0.1)")
        if self.theta_samples < 1:
            raise ValueError("theta-samples must be positive")
        if self.format not in ("csv", "json"):
            raise ValueError("format must be csv or json")
        return self


def read_config(path):
    """``key = value`` lines; ``#`` starts a comment.  Keys match the flags."""
    types = {f.name: f.type for f in fields(RunConfig)}
    out = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep or key not in types:
            raise ValueError(f"{path}:{n}: unknown setting {line!r}")
        val = val.strip()
        if key in ("resolution", "theta_nodes", "theta_samples"):
            out[key] = int(val)
        elif key in ("dt", "slack"):
            out[key] = None if val.lower() == "none" else float(val)
        else:
            out[key] = val
    return out


def _slug(label):
    return re.sub(r"[^A-Za-z0-9.+-]+", "_", label).strip("_")


def _outdir(cfg):
    d = Path(cfg.out)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _write_report(cfg, rep):
    d = _outdir(cfg)
    if cfg.format == "csv":
        path = d / "functionals.csv"
        rep.append_csv(path)
    else:
        path = d / f"{_slug(rep.label)}.json"
        path.write_text(rep.to_json() + "\n")
    return path


def cmd_verify(cfg):
    try:
        s = from_spec(cfg.spec, cfg.resolution)
    except (GaussAreaError, ValueError) as exc:
        log.error("cannot build %s: %s", cfg.spec, exc)
        return EXIT_BUILD
    try:
        rep = inequality_chain(s, theta_nodes=cfg.theta_nodes)
    except InequalityViolation as exc:
        if exc.report is not None:
            _write_report(cfg, exc.report)
        log.error("%s", exc)
        return EXIT_VIOLATION
    path = _write_report(cfg, rep)
    print(f"{rep.label}: ag={rep.ag:.10g} tac={rep.tac:.10g} slack_ag={rep.slack_ag:.3e} "
          f"slack_tac={rep.slack_tac:.3e} slack_chain={rep.slack_chain:.3e} -> {path}")
    return EXIT_OK if rep.ok else EXIT_VIOLATION


SWEEP_EXTRA = ("delta", "mu_sigma_pi", "int_pi_minus_theta_hat", "int_interval_gap", "best_point")


def _fill(template, parameter, value):
    if "{" + parameter + "}" in template:
        return template.replace("{" + parameter + "}", value)
    if template.count("{}") == 1:
        return template.replace("{}", value)
    raise ValueError(f"template needs exactly one placeholder {{{parameter}}} or {{}}")


def cmd_sweep(cfg, template, parameter, values):
    columns = ("value",) + FunctionalReport.CSV_COLUMNS + SWEEP_EXTRA + ("error",)
    rows = []
    for value in values:
        row = dict.fromkeys(columns, "")
        row["value"] = value
        try:
            spec = _fill(template, parameter, value)
            s = from_spec(spec, cfg.resolution)
            rep = inequality_chain(s, theta_nodes=cfg.theta_nodes, raise_on_violation=False)
            row.update(rep.csv_row())
            est = minimizer_estimates(s, n_samples=cfg.theta_samples, dt=cfg.dt, slack=cfg.slack)
            row.update({k: v for k, v in est.to_dict().items() if k in SWEEP_EXTRA})
        except (GaussAreaError, ValueError) as exc:
            row["error"] = f"{type(exc).__name__}: {exc}"
            log.error("%s=%s: %s", parameter, value, exc)
        rows.append(row)
    d = _outdir(cfg)
    if cfg.format == "csv":
        path = d / f"sweep_{parameter}.csv"
        with path.open("w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=columns)
            w.writeheader()
            w.writerows(rows)
    else:
        path = d / f"sweep_{parameter}.json"
        path.write_text(json.dumps({"schema": SCHEMA, "template": template, "parameter": parameter,
                                    "rows": rows}, indent=2) + "\n")
    print(f"{len(rows)} rows -> {path}")
    return EXIT_BUILD if all(r["error"] for r in rows) else EXIT_OK


def read_points(path):
    """One point per line, four floats separated by spaces or commas."""
    pts = []
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            p = np.array([float(x) for x in re.split(r"[,\s]+", line)])
            if p.shape != (4,):
                raise ValueError(f"candidate {line!r} is not a point of R^4")
            pts.append(p / np.linalg.norm(p))
    return pts


def cmd_diagnose(cfg, candidates=None):
    try:
        s = from_spec(cfg.spec, cfg.resolution)
        pts = read_points(candidates) if candidates else list(s.meta.get("points", []))
    except (GaussAreaError, ValueError, OSError) as exc:
        log.error("cannot build %s: %s", cfg.spec, exc)
        return EXIT_BUILD
    rep = bubbling_report(s, pts)
    d = _outdir(cfg)
    slug = _slug(s.label)
    (d / f"{slug}_diagnose.json").write_text(json.dumps({"label": s.label, **rep.to_dict()}, indent=2) + "\n")
    rep.write_ball_csv(d / f"{slug}_balls.csv")
    n_atoms = sum(a.detected for a in rep.atoms)
    print(f"{s.label}: R={rep.fit.R:.6g} hausdorff={rep.fit.hausdorff:.3e} atoms={n_atoms} "
          f"residual={rep.residual:.3e} -> {d / (slug + '_diagnose.json')}")
    return EXIT_OK


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--resolution", type=int, help="quadrature nodes per chart direction")
    common.add_argument("--theta-nodes", type=int, help="angular nodes for the total absolute curvature")
    common.add_argument("--dt", type=float, help="step of the theta-plus/minus search")
    common.add_argument("--slack", type=float, help="slack of the distance test")
    common.add_argument("--theta-samples", type=int, help="samples for the sweep's theta estimates")
    common.add_argument("--out", help="output directory")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--config", help="key=value file; its settings override flags")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="gaussarea", description=__doc__.splitlines()[0],
                                epilog="exit codes: 0 ok, 1 build failure, 2 inequality violated")
    sub = p.add_subparsers(dest="command", required=True)
    v = sub.add_parser("verify", parents=[common], help="evaluate the functionals and the inequality chain")
    v.add_argument("spec")
    sw = sub.add_parser("sweep", parents=[common], help="repeat verify over parameter values")
    sw.add_argument("template", help="surface spec with one placeholder, e.g. handles:g=1:h={h}")
    sw.add_argument("--param", required=True)
    sw.add_argument("--values", required=True, help="comma separated values")
    dg = sub.add_parser("diagnose", parents=[common], help="sphere fit, factor degrees and atoms")
    dg.add_argument("spec")
    dg.add_argument("--candidates", help="file with one candidate point per line")
    return p


def make_config(args):
    cfg = RunConfig(spec=getattr(args, "spec", ""))
    for f in fields(RunConfig):
        val = getattr(args, f.name, None)
        if val is not None and f.name != "spec":
            setattr(cfg, f.name, val)
    if args.config:
        for k, val in read_config(args.config).items():
            setattr(cfg, k, val)
    return cfg.validate()


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = make_config(args)
    except (ValueError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_BUILD
    if args.command == "verify":
        return cmd_verify(cfg)
    if args.command == "sweep":
        return cmd_sweep(cfg, args.template, args.param, [x.strip() for x in args.values.split(",") if x.strip()])
    return cmd_diagnose(cfg, args.candidates)


if __name__ == "__main__":
    sys.exit(main())
