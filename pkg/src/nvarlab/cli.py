"""Command-line entry point, config parsing, and result persistence.

Configuration is a flat, diff-friendly ``key = value`` format (newlines or
commas separate entries).  Results are JSON, fields are NVF1 binaries, and
curve data is CSV.  Runs are deterministic: a fixed config and seed produce
bit-identical result files (fixed pairwise reduction order in all sums).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, NumericsError
from .grid import (
    Field,
    ProblemParams,
    apply_Ds_squared,
    dilate,
    hardy_constant,
    mass,
    meshgrid,
    multiplier,
    read_field,
    symmetry_residual,
    write_field,
)
from .nonlinearity import (
    CUSTOM,
    DIFFERENCE_FAMILY,
    F_ABOVE,
    F_BELOW,
    MASS_CRITICAL,
    MIN_FAMILY,
    MIXED,
    PURE_POWER,
    Nonlinearity,
)
from .energy import evaluate, gradient, identities, inner, quotient_R
from .optimizer import MinimizeResult, SolverConfig, dilation_probe, multistart
from .gn import GNConfig, GNResult, compute_gn, verify_gn_inequality
from .thresholds import bisect_rho_star, estimate_m, estimate_rho_F
from .curl import (
    curl_energy,
    divergence_norm,
    gradient_norm,
    lift,
    scalar_quadratic_sum,
    vector_energy,
    write_vector_field,
)

COMMANDS = ("gn", "minimize", "threshold", "identities", "curlcurl", "verify")

_DEFAULTS = {
    "command": "minimize",
    "N": 2,
    "K": 0,
    "s": 1.0,
    "mu": 0.0,
    "L": 16.0,
    "grid": 64,
    "family": PURE_POWER,
    "p": 3.0,
    "table": "",
    "rho": 1.0,
    "constraint": "ball",
    "gamma_star": 0.0,
    "step0": 0.0,
    "max_iters": 4000,
    "grad_tol": 1e-7,
    "restarts": 4,
    "seed": 0,
    "p_gn": 0.0,
    "bracket_lo": 0.0,
    "bracket_hi": 0.0,
    "bisect_iters": 8,
    "sigma_grid": "0.01,0.1,1.0",
    "field": "",
    "out": "out",
}

_INT_KEYS = {"N", "K", "grid", "max_iters", "restarts", "seed", "bisect_iters"}
_FLOAT_KEYS = {"s", "mu", "L", "p", "rho", "gamma_star", "step0", "grad_tol",
               "p_gn", "bracket_lo", "bracket_hi"}


@dataclass(frozen=True)
class RunConfig:
    """Everything that determines a run, in flat key/value form."""

    values: dict

    @property
    def command(self) -> str:
        return self.values["command"]

    def problem(self) -> ProblemParams:
        v = self.values
        return ProblemParams(N=v["N"], K=v["K"], s=v["s"], mu=v["mu"],
                             box_length=v["L"], grid_points=v["grid"])

    def nonlinearity(self) -> Nonlinearity:
        v = self.values
        fam = v["family"]
        if fam == CUSTOM:
            if not v["table"]:
                raise ConfigError("custom family requires table=<csv path>")
            return Nonlinearity.from_csv(v["table"], v["N"], v["s"])
        if fam == MASS_CRITICAL:
            return Nonlinearity.mass_critical(v["N"], v["s"])
        if fam == PURE_POWER:
            return Nonlinearity.pure_power(v["p"], v["N"], v["s"])
        if fam == MIN_FAMILY:
            return Nonlinearity.min_family(v["p"], v["N"], v["s"])
        if fam == DIFFERENCE_FAMILY:
            return Nonlinearity.difference_family(v["p"], v["N"], v["s"])
        raise ConfigError(f"unknown family {fam!r}")

    def solver(self) -> SolverConfig:
        v = self.values
        return SolverConfig(
            rho=v["rho"],
            constraint=v["constraint"],
            gamma_star=v["gamma_star"] if v["gamma_star"] > 0 else None,
            step0=v["step0"] if v["step0"] > 0 else None,
            max_iters=v["max_iters"],
            grad_tol=v["grad_tol"],
            restarts=v["restarts"],
            seed=v["seed"],
        )

    def sigma_grid(self) -> list:
        text = str(self.values["sigma_grid"]).replace(";", ",")
        return [float(x) for x in text.split(",") if x.strip()]


def parse_config(text: str, command: str | None = None) -> RunConfig:
    """Parse the line-based ``key = value`` format (commas also separate)."""
    values = dict(_DEFAULTS)
    for raw_line in text.splitlines():
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        for item in line.split(","):
            item = item.strip()
            if not item:
                continue
            if "=" not in item:
                raise ConfigError(f"malformed config entry {item!r}")
            key, _, val = item.partition("=")
            key, val = key.strip(), val.strip()
            if key not in values:
                raise ConfigError(f"unknown config key {key!r}")
            if key in _INT_KEYS:
                values[key] = int(val)
            elif key in _FLOAT_KEYS:
                values[key] = float(val)
            else:
                values[key] = val
    if command is not None:
        values["command"] = command
    if values["command"] not in COMMANDS:
        raise ConfigError(f"unknown command {values['command']!r}")
    cfg = RunConfig(values)
    cfg.problem()  # enforce all parameter invariants now
    if values["family"] != CUSTOM:
        cfg.nonlinearity()
    return cfg


def serialize_config(cfg: RunConfig) -> str:
    lines = [f"{k} = {cfg.values[k]}" for k in sorted(cfg.values)]
    return "\n".join(lines) + "\n"


@dataclass
class RunManifest:
    config_text: str
    artifacts: list
    wall_clock_s: float
    version: str

    def to_dict(self) -> dict:
        return {
            "config": self.config_text,
            "artifacts": self.artifacts,
            "wall_clock_s": self.wall_clock_s,
            "version": self.version,
        }


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    h.update(path.read_bytes())
    return h.hexdigest()


def _write_json(path: Path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _result_payload(res: MinimizeResult) -> dict:
    return {
        "breakdown": res.breakdown.to_dict(),
        "identity": res.identity.to_dict() if res.identity else None,
        "converged": res.converged,
        "iterations": res.iterations,
        "unbounded_flag": res.unbounded_flag,
    }


def run(cfg: RunConfig, out_dir=None) -> RunManifest:
    """Dispatch one command and persist all artifacts plus the manifest."""
    t0 = time.monotonic()
    out = Path(out_dir if out_dir is not None else cfg.values["out"])
    out.mkdir(parents=True, exist_ok=True)
    artifacts = []

    def save_json(name, obj):
        path = out / name
        _write_json(path, obj)
        artifacts.append(path)

    def save_field(name, u):
        path = out / name
        write_field(path, u)
        artifacts.append(path)

    command = cfg.command
    params = cfg.problem()
    nl = cfg.nonlinearity()

    if command == "minimize":
        progress_path = out / "progress.jsonl"
        with open(progress_path, "w") as fh:
            def progress(it, J, m, gnorm):
                fh.write(json.dumps(
                    {"iter": it, "J": J, "mass": m, "grad_norm": gnorm},
                    sort_keys=True) + "\n")
            res = multistart(params, nl, cfg.solver(), progress=progress)
        artifacts.append(progress_path)
        save_json("minimize.json", _result_payload(res))
        save_field("minimizer.nvf1", res.field)

    elif command == "gn":
        p_gn = cfg.values["p_gn"] or params.two_sharp
        gn = compute_gn(params, p_gn, GNConfig(seed=cfg.values["seed"]))
        save_json("gn.json", gn.to_dict())
        save_field("gn_minimizer.nvf1", gn.w)

    elif command == "threshold":
        v = cfg.values
        lo, hi = v["bracket_lo"], v["bracket_hi"]
        if not (lo > 0 and hi > lo):
            raise ConfigError("threshold requires bracket_lo < bracket_hi, both > 0")
        result = bisect_rho_star(params, nl, (lo, hi), v["bisect_iters"],
                                 cfg.solver())
        save_json("threshold.json", result.to_dict())
        csv_path = out / "m_samples.csv"
        with open(csv_path, "w") as fh:
            fh.write("rho,m,status\n")
            for rho, m, status in result.m_samples:
                fh.write(f"{rho!r},{m!r},{status}\n")
        artifacts.append(csv_path)

    elif command == "identities":
        if cfg.values["field"]:
            u = read_field(cfg.values["field"])
        else:
            u = multistart(params, nl, cfg.solver()).field
        rep = identities(u, nl)
        save_json("identities.json", rep.to_dict())

    elif command == "curlcurl":
        if params.N < 3 or params.K != 2 or params.s != 1.0 or params.mu != 1.0:
            raise ConfigError(
                "curlcurl requires N >= 3, K = 2, s = 1, mu = 1"
            )
        res = multistart(params, nl, cfg.solver())
        U = lift(res.field) if res.breakdown.mass > 1e-12 else None
        payload = _result_payload(res)
        if U is not None:
            sq = scalar_quadratic_sum(res.field)
            ce = curl_energy(U)
            payload["curl"] = {
                "vector_energy": vector_energy(U, nl),
                "curl_energy": ce,
                "scalar_quadratic_sum": sq,
                "identity_defect_rel": abs(ce - sq) / sq if sq else 0.0,
                "divergence_over_gradient":
                    divergence_norm(U) / max(gradient_norm(U), 1e-300),
            }
            vec_path = out / "lifted.nvfv"
            write_vector_field(vec_path, U)
            artifacts.append(vec_path)
        save_json("curlcurl.json", payload)
        save_field("scalar_minimizer.nvf1", res.field)

    elif command == "verify":
        report = run_verify_battery(cfg.values["seed"])
        save_json("verify.json", report)
        if not all(item["passed"] for item in report["checks"]):
            raise NumericsError("verify battery found invariant violations")

    manifest = RunManifest(
        config_text=serialize_config(cfg),
        artifacts=[{"path": p.name, "sha256": _sha256(p)} for p in artifacts],
        wall_clock_s=time.monotonic() - t0,
        version=__version__,
    )
    _write_json(out / "run_manifest.json", manifest.to_dict())
    return manifest


def run_verify_battery(seed: int = 0) -> dict:
    """Fast battery of the package's cross-module invariants."""
    checks = []

    def check(name, fn):
        try:
            ok, detail = fn()
        except Exception as exc:  # a crashed check is a failed check
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        checks.append({"name": name, "passed": bool(ok), "detail": detail})

    rng = np.random.default_rng(seed)

    p2 = ProblemParams(N=2, K=2, s=1.0, mu=0.5, box_length=16.0, grid_points=32)
    xy = meshgrid(p2)
    smooth = np.exp(-(xy[0] ** 2 + xy[1] ** 2) / 3)

    def parseval():
        u = Field(p2, smooth * rng.standard_normal(p2.shape))
        phys = mass(u)
        uh = np.fft.fftn(u.samples)
        spec = p2.cell_volume * float(np.sum(np.abs(uh) ** 2)) / p2.grid_points ** p2.N
        rel = abs(phys - spec) / phys
        return rel < 1e-12, f"rel={rel:.2e}"

    check("parseval", parseval)

    def homogeneity():
        u = Field(p2, smooth * (1 + 0.2 * np.cos(xy[0])))
        a, b = apply_Ds_squared(u.scaled(2.0)), 4.0 * apply_Ds_squared(u)
        return a == b, f"diff={a - b!r}"

    check("ds_homogeneity_power_of_two", homogeneity)

    def multiplier_zero():
        vals = multiplier(p2).values
        ok = vals[(0,) * p2.N] == 0.0
        for a in range(p2.N):
            ok = ok and np.allclose(vals, np.roll(np.flip(vals, axis=a), 1, axis=a))
        return ok, "zero mode and evenness"

    check("multiplier_lattice", multiplier_zero)

    def dilation_roundtrip():
        pf = ProblemParams(N=2, K=2, s=1.0, mu=0.5, box_length=16.0,
                           grid_points=64)
        cf = meshgrid(pf)
        u = Field(pf, np.exp(-(cf[0] ** 2 + cf[1] ** 2) / 3))
        r = dilate(dilate(u, 2.0), 0.5)
        err = math.sqrt(mass(Field(pf, r.samples - u.samples))) / math.sqrt(mass(u))
        return err < 1e-8, f"err={err:.2e}"

    check("dilate_roundtrip", dilation_roundtrip)

    def gradient_fd():
        nl = Nonlinearity.pure_power(3.0, 2, 1.0)
        u = Field(p2, smooth * (1 + 0.3 * np.sin(xy[0] + 0.7 * xy[1])))
        v = Field(p2, smooth * rng.standard_normal(p2.shape) * 0.1)
        g = gradient(u, nl)
        eps = 1e-5
        jp = evaluate(Field(p2, u.samples + eps * v.samples), nl).J
        jm = evaluate(Field(p2, u.samples - eps * v.samples), nl).J
        fd = (jp - jm) / (2 * eps)
        an = inner(g, v)
        rel = abs(fd - an) / max(abs(an), 1e-30)
        return rel < 1e-5, f"rel={rel:.2e}"

    check("gradient_fd", gradient_fd)

    def hardy_bound():
        p3 = ProblemParams(N=3, K=3, s=1.0, mu=0.0, box_length=16.0,
                           grid_points=32)
        coords = meshgrid(p3)
        rr = np.sqrt(sum(c ** 2 for c in coords))
        worst = 0.0
        from .grid import hardy_weight_integral
        for _ in range(10):
            a = math.exp(rng.uniform(math.log(0.3), math.log(1.0)))
            r0 = rng.uniform(0.0, 1.5)
            u = Field(p3, np.exp(-a * (rr - r0) ** 2))
            worst = max(worst, hardy_weight_integral(u) / apply_Ds_squared(u))
        return worst <= 4.0 * 1.02, f"worst ratio={worst:.4f}"

    check("hardy_inequality", hardy_bound)

    def nonlinearity_families():
        fams = [Nonlinearity.pure_power(3.0, 2, 1.0),
                Nonlinearity.mass_critical(2, 1.0),
                Nonlinearity.min_family(6.0, 2, 1.0),
                Nonlinearity.difference_family(6.0, 2, 1.0)]
        ts = np.linspace(-3, 3, 2001)
        for nl in fams:
            if not np.allclose(nl.f(-ts), -nl.f(ts), atol=1e-14):
                return False, f"{nl.family} not odd"
            mid = 0.5 * (ts[1:] + ts[:-1])
            quad = np.concatenate(
                [[0.0], np.cumsum(nl.f(mid) * np.diff(ts))])
            quad -= np.interp(0.0, ts, quad)
            rel = np.max(np.abs(quad - nl.F(ts)) / (1.0 + np.abs(nl.F(ts))))
            if rel > 1e-3:
                return False, f"{nl.family} antiderivative mismatch {rel:.1e}"
        classes = [fams[0].classify_dichotomy(), fams[1].classify_dichotomy(),
                   fams[2].classify_dichotomy(), fams[3].classify_dichotomy()]
        want = [F_ABOVE, MIXED, F_BELOW, F_ABOVE]
        return classes == want, f"classes={classes}"

    check("nonlinearity_families", nonlinearity_families)

    def curl_identity():
        p4 = ProblemParams(N=3, K=2, s=1.0, mu=1.0, box_length=12.0,
                           grid_points=48)
        coords = meshgrid(p4)
        rr = np.sqrt(coords[0] ** 2 + coords[1] ** 2)
        u = Field(p4, np.exp(-((rr - 3.0) / 0.7) ** 2 - (coords[2] / 1.2) ** 2))
        U = lift(u)
        sq = scalar_quadratic_sum(u)
        defect = abs(curl_energy(U) - sq) / sq
        div = divergence_norm(U) / gradient_norm(U)
        return defect < 1e-6 and div < 1e-6, f"defect={defect:.2e} div={div:.2e}"

    check("curl_identity", curl_identity)

    def nvf1_roundtrip():
        import tempfile

        u = Field(p2, smooth * rng.standard_normal(p2.shape))
        with tempfile.NamedTemporaryFile(suffix=".nvf1") as tmp:
            write_field(tmp.name, u)
            v = read_field(tmp.name)
        ok = np.array_equal(u.samples, v.samples) and v.params == p2
        return ok, "bit-exact roundtrip"

    check("nvf1_roundtrip", nvf1_roundtrip)

    return {"checks": checks, "seed": seed}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="nvarlab",
        description="Numerical variational laboratory for fractional NLS "
                    "ground states with cylindrical Hardy potentials",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", type=Path, default=None,
                        help="key = value config file")
        sp.add_argument("--out", type=Path, default=None,
                        help="output directory")
        sp.add_argument("--seed", type=int, default=None)
    args = parser.parse_args(argv)

    try:
        text = args.config.read_text() if args.config else ""
        cfg = parse_config(text, command=args.command)
        if args.seed is not None:
            values = dict(cfg.values)
            values["seed"] = args.seed
            cfg = RunConfig(values)
        run(cfg, out_dir=args.out)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericsError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3 if args.command == "verify" else 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
