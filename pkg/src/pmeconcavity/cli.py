"""Command-line pipeline for the concavity-loss toolkit.

Subcommands run the stages construct -> verify -> assemble -> evolve ->
report over a shared output directory.  Every stage writes one flat
key = value report file; timestamps live in a ``.meta`` sidecar so that
identical configurations produce byte-identical reports.  Exit codes form
the public contract: 0 all checks pass, 1 at least one check failed,
2 usage error (bad flags, excluded alpha, missing stage inputs).
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .assembly import (
    TransferSearchError,
    assemble_with_transfer,
    read_bundle_manifest,
    validate_bundle,
    write_bundle_manifest,
)
from .construction import (
    ConstructionParams,
    Family,
    SteepnessSearchError,
    build_family,
    family_for_alpha,
    solve_steepness,
)
from .poly import poly_from_text, poly_to_text
from .solver import (
    InvariantError,
    ResolutionError,
    evolve_and_probe,
    write_probe_csv,
)
from .verifier import verify_construction

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2

# measured initial curvature rate must sit within this relative gap of the
# exact shifted closed form for the evolve stage to count as reproducing it
RATE_REL_TOL = 0.25

DEFAULT_RESOLUTIONS = (49, 65)
DEFAULT_HORIZON = 1.0
DEFAULT_OUT = "runs"

CONSTRUCTION_FILE = "construction.txt"
VERIFY_FILE = "verify.txt"
BUNDLE_FILE = "bundle.txt"
ASSEMBLE_FILE = "assemble.txt"
EVOLVE_FILE = "evolve.txt"
REPORT_FILE = "report.txt"

STAGE_FILES = (
    ("construction", CONSTRUCTION_FILE),
    ("verify", VERIFY_FILE),
    ("assemble", ASSEMBLE_FILE),
    ("evolve", EVOLVE_FILE),
)

# keys that carry a stage verdict; report aggregation folds them into one
VERDICT_KEYS = ("constructed", "verified", "assembled", "evolved")


class UsageError(ValueError):
    """Invalid flags, config values, or missing stage inputs (exit 2)."""


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


def parse_fraction(text: str) -> Fraction:
    """Exact rational from '3/4', '0.75', or '1' (decimals stay exact)."""
    try:
        return Fraction(str(text).strip())
    except (ValueError, ZeroDivisionError) as err:
        raise UsageError("not a rational number: %r" % text) from err


def parse_resolutions(text: str) -> Tuple[int, ...]:
    try:
        values = tuple(int(tok) for tok in str(text).split(",") if tok.strip())
    except ValueError as err:
        raise UsageError("bad resolution list: %r" % text) from err
    if not values:
        raise UsageError("resolution list is empty")
    return values


@dataclass(frozen=True)
class RunConfig:
    """One reproducible pipeline configuration."""

    alpha: Fraction
    m: Fraction
    n: int
    steepness: Optional[Fraction]
    rho: Optional[Fraction]
    resolutions: Tuple[int, ...]
    horizon: float
    seed: int
    out: Path
    threads: int

    def __post_init__(self):
        if not (0 <= self.alpha <= 1):
            raise UsageError("alpha must lie in [0, 1], got %s" % self.alpha)
        if self.alpha == Fraction(1, 2):
            raise UsageError(
                "alpha = 1/2 is excluded: root concavity is preserved by the "
                "flow, so no loss can be produced there")
        if not self.m > 1:
            raise UsageError("m must exceed 1, got %s" % self.m)
        if self.n < 2:
            raise UsageError("n must be at least 2, got %s" % self.n)
        for res in self.resolutions:
            if res % 2 == 0:
                raise UsageError("resolutions must be odd, got %d" % res)
        if not self.horizon > 0:
            raise UsageError("horizon must be positive, got %s" % self.horizon)
        if self.steepness is not None and not self.steepness > 0:
            raise UsageError("steepness override must be positive")
        if self.rho is not None and not self.rho > 0:
            raise UsageError("rho override must be positive")
        if self.threads < 1:
            raise UsageError("threads must be at least 1")


def load_config_file(path) -> Dict[str, str]:
    """Flat key = value lines; '#' starts a comment, blanks are skipped."""
    out: Dict[str, str] = {}
    p = Path(path)
    if not p.is_file():
        raise UsageError("config file not found: %s" % p)
    for raw in p.read_text(encoding="utf-8").splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError("bad config line (expected key = value): %r" % raw)
        out[key.strip()] = value.strip()
    return out


_CONFIG_KEYS = ("alpha", "m", "n", "steepness", "rho", "resolutions",
                "horizon", "seed", "out", "threads")


def build_config(args: argparse.Namespace) -> RunConfig:
    """Merge config file and flags into a RunConfig; flags win."""
    file_values: Dict[str, str] = {}
    if getattr(args, "config", None):
        file_values = load_config_file(args.config)
        unknown = set(file_values) - set(_CONFIG_KEYS)
        if unknown:
            raise UsageError("unknown config keys: %s" % ", ".join(sorted(unknown)))

    def pick(key: str) -> Optional[str]:
        flag = getattr(args, key, None)
        if flag is not None:
            return str(flag)
        return file_values.get(key)

    alpha = pick("alpha")
    m = pick("m")
    n = pick("n")
    if alpha is None or m is None or n is None:
        raise UsageError("alpha, m, and n are required (flags or config file)")
    steep = pick("steepness")
    rho = pick("rho")
    res = pick("resolutions")
    return RunConfig(
        alpha=parse_fraction(alpha),
        m=parse_fraction(m),
        n=int(n),
        steepness=None if steep is None else parse_fraction(steep),
        rho=None if rho is None else parse_fraction(rho),
        resolutions=parse_resolutions(res) if res is not None else DEFAULT_RESOLUTIONS,
        horizon=float(pick("horizon") or DEFAULT_HORIZON),
        seed=int(pick("seed") or 0),
        out=Path(pick("out") or DEFAULT_OUT),
        threads=int(pick("threads") or 1),
    )


# ---------------------------------------------------------------------------
# key = value report files with timestamp sidecars
# ---------------------------------------------------------------------------


def write_kv(path, pairs: Iterable[Tuple[str, str]]) -> None:
    """Write key = value lines plus a .meta sidecar holding the timestamp.

    The main file depends only on the pairs, so identical configurations
    reproduce it byte for byte; anything time-dependent goes to the sidecar.
    """
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    text = "".join("%s = %s\n" % (key, value) for key, value in pairs)
    p.write_text(text, encoding="utf-8")
    stamp = datetime.now(timezone.utc).isoformat()
    Path(str(p) + ".meta").write_text(
        "written_utc = %s\n" % stamp, encoding="utf-8")


def read_kv(path) -> Dict[str, str]:
    """Read a key = value report preserving line order."""
    out: Dict[str, str] = {}
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        if not raw.strip():
            continue
        key, sep, value = raw.partition(" = ")
        if not sep:
            raise ValueError("bad report line: %r" % raw)
        out[key] = value
    return out


def _require(path: Path, hint: str) -> Path:
    if not path.is_file():
        raise UsageError("missing %s (%s); run the earlier stages first"
                         % (path, hint))
    return path


def _config_echo(cfg: RunConfig) -> List[Tuple[str, str]]:
    return [
        ("alpha", str(cfg.alpha)),
        ("m", str(cfg.m)),
        ("n", str(cfg.n)),
        ("seed", str(cfg.seed)),
        ("threads", str(cfg.threads)),
    ]


# ---------------------------------------------------------------------------
# stages
# ---------------------------------------------------------------------------


def construction_params(cfg: RunConfig) -> Tuple[ConstructionParams, str]:
    """Family choice plus steepness: overridden or solved at unit base."""
    family = family_for_alpha(cfg.alpha)
    if cfg.steepness is not None:
        steep = cfg.steepness
        source = "override"
    else:
        steep = solve_steepness(cfg.alpha, cfg.m, cfg.n)
        source = "solved"
    kwargs = {}
    if cfg.rho is not None:
        kwargs["rho"] = cfg.rho
    params = ConstructionParams(
        alpha=cfg.alpha, m=cfg.m, n=cfg.n, family=family,
        steepness=steep, **kwargs)
    return params, source


def cmd_construct(cfg: RunConfig) -> int:
    try:
        params, source = construction_params(cfg)
    except SteepnessSearchError as err:
        write_kv(cfg.out / CONSTRUCTION_FILE,
                 _config_echo(cfg) + [("constructed", "fail"),
                                      ("error", str(err))])
        print("construct: steepness search failed: %s" % err, file=sys.stderr)
        return EXIT_FAIL
    w = build_family(params)
    poly_lines = poly_to_text(w).splitlines()
    pairs = _config_echo(cfg) + [
        ("family", params.family.value),
        ("steepness", str(params.steepness)),
        ("steepness_source", source),
        ("rho", str(params.rho)),
        ("constructed", "pass"),
        ("poly.lines", str(len(poly_lines))),
    ]
    pairs += [("poly.%d" % i, line) for i, line in enumerate(poly_lines)]
    write_kv(cfg.out / CONSTRUCTION_FILE, pairs)
    print("construct: %s family, steepness %s -> %s"
          % (params.family.value, params.steepness, cfg.out / CONSTRUCTION_FILE))
    return EXIT_OK


def _read_construction(cfg: RunConfig):
    path = _require(cfg.out / CONSTRUCTION_FILE, "construct output")
    kv = read_kv(path)
    if kv.get("constructed") != "pass":
        raise UsageError("stored construction is marked failed; rerun construct")
    params = ConstructionParams(
        alpha=Fraction(kv["alpha"]),
        m=Fraction(kv["m"]),
        n=int(kv["n"]),
        family=Family(kv["family"]),
        steepness=Fraction(kv["steepness"]),
        rho=Fraction(kv["rho"]),
    )
    count = int(kv["poly.lines"])
    text = "\n".join(kv["poly.%d" % i] for i in range(count))
    return params, poly_from_text(text)


def cmd_verify(cfg: RunConfig) -> int:
    params, w = _read_construction(cfg)
    summary = verify_construction(params, seed=cfg.seed, w=w)
    pairs = [(key, value) for key, value in summary.items()]
    pairs.append(("threads", str(cfg.threads)))
    write_kv(cfg.out / VERIFY_FILE, pairs)
    ok = summary.get("verified") == "pass"
    print("verify: conditions 1-3 %s -> %s"
          % ("pass" if ok else "FAIL", cfg.out / VERIFY_FILE))
    return EXIT_OK if ok else EXIT_FAIL


def cmd_assemble(cfg: RunConfig) -> int:
    _read_construction(cfg)
    _require(cfg.out / VERIFY_FILE, "verify output")
    try:
        bundle = assemble_with_transfer(cfg.alpha, cfg.m, cfg.n, seed=cfg.seed)
    except TransferSearchError as err:
        pairs = _config_echo(cfg) + [
            ("assembled", "fail"),
            ("transfer", "fail"),
            ("transfer_rounds", str(len(err.history))),
            ("transfer_bases", " ".join(str(b) for b, _ in err.history)),
            ("error", str(err)),
        ]
        write_kv(cfg.out / ASSEMBLE_FILE, pairs)
        print("assemble: transfer search FAILED -> %s"
              % (cfg.out / ASSEMBLE_FILE), file=sys.stderr)
        return EXIT_FAIL
    write_bundle_manifest(bundle, cfg.out / BUNDLE_FILE)
    checks = validate_bundle(bundle, seed=cfg.seed)
    ok = bool(checks["shell_ok"] and checks["origin_ok"]
              and checks["boundary_ok"] and checks["rate_transfer_positive"])
    pairs = _config_echo(cfg) + [
        ("steepness", str(bundle.params.steepness)),
        ("rho", str(bundle.params.rho)),
        ("amplitude", str(bundle.amplitude)),
        ("shifted_base", repr(float(bundle.shifted_base))),
        ("origin_rate_shifted", repr(float(bundle.origin_rate_shifted))),
        ("transfer", "pass"),
    ]
    for key in sorted(checks):
        value = checks[key]
        if isinstance(value, bool):
            pairs.append((key, "pass" if value else "fail"))
        else:
            pairs.append((key, repr(value) if isinstance(value, float) else str(value)))
    pairs.append(("assembled", "pass" if ok else "fail"))
    write_kv(cfg.out / ASSEMBLE_FILE, pairs)
    print("assemble: bundle %s -> %s"
          % ("pass" if ok else "FAIL", cfg.out / ASSEMBLE_FILE))
    return EXIT_OK if ok else EXIT_FAIL


def cmd_evolve(cfg: RunConfig) -> int:
    verify_path = _require(cfg.out / VERIFY_FILE, "verify output")
    if read_kv(verify_path).get("verified") != "pass":
        print("evolve: refusing to run, verification report is failing",
              file=sys.stderr)
        return EXIT_FAIL
    bundle_path = _require(cfg.out / BUNDLE_FILE, "assemble output")
    bundle = read_bundle_manifest(bundle_path)
    reference = float(bundle.origin_rate_shifted)
    pairs = _config_echo(cfg) + [
        ("horizon", repr(cfg.horizon)),
        ("resolutions", ",".join(str(r) for r in cfg.resolutions)),
        ("rate_reference", repr(reference)),
        ("rate_rel_tol", repr(RATE_REL_TOL)),
    ]
    ok = True
    stars: List[Optional[float]] = []
    for res in sorted(cfg.resolutions):
        tag = "res%d" % res
        try:
            series = evolve_and_probe(bundle, res, T=cfg.horizon)
        except ResolutionError as err:
            raise UsageError("resolution %d rejected: %s" % (res, err)) from err
        except InvariantError as err:
            pairs.append(("invariants_%s" % tag, "fail"))
            pairs.append(("error_%s" % tag, str(err)))
            ok = False
            stars.append(None)
            continue
        csv_path = cfg.out / ("probe_%s.csv" % tag)
        write_probe_csv(series, csv_path)
        crossed = series.t_star is not None
        gap = abs(series.measured_initial_rate - reference) / abs(reference)
        pairs.append(("steps_%s" % tag, str(len(series.times) - 1)))
        pairs.append(("dt_%s" % tag, repr(series.dt)))
        pairs.append(("theta_%s" % tag, repr(series.theta)))
        pairs.append(("aborted_%s" % tag, "1" if series.aborted else "0"))
        pairs.append(("t_star_%s" % tag,
                      "none" if not crossed else repr(series.t_star)))
        pairs.append(("lambda1_final_%s" % tag, repr(series.lambda1[-1])))
        pairs.append(("measured_rate_%s" % tag,
                      repr(series.measured_initial_rate)))
        pairs.append(("rate_rel_gap_%s" % tag, repr(gap)))
        pairs.append(("invariants_%s" % tag, "pass"))
        pairs.append(("crossing_%s" % tag, "pass" if crossed else "fail"))
        pairs.append(("rate_%s" % tag, "pass" if gap <= RATE_REL_TOL else "fail"))
        ok = ok and crossed and gap <= RATE_REL_TOL
        stars.append(series.t_star)
    crossed_stars = [t for t in stars if t is not None]
    monotone = all(b <= a for a, b in zip(crossed_stars, crossed_stars[1:]))
    pairs.append(("t_star_monotone", "pass" if monotone else "fail"))
    ok = ok and monotone
    pairs.append(("evolved", "pass" if ok else "fail"))
    write_kv(cfg.out / EVOLVE_FILE, pairs)
    print("evolve: threshold crossing %s -> %s"
          % ("pass" if ok else "FAIL", cfg.out / EVOLVE_FILE))
    return EXIT_OK if ok else EXIT_FAIL


def cmd_report(cfg: RunConfig) -> int:
    present = [(stage, cfg.out / name) for stage, name in STAGE_FILES
               if (cfg.out / name).is_file()]
    if not present:
        print("report: no stage outputs under %s; nothing to aggregate"
              % cfg.out, file=sys.stderr)
        return EXIT_USAGE
    pairs: List[Tuple[str, str]] = []
    verdicts: List[str] = []
    for stage, path in present:
        kv = read_kv(path)
        for key, value in kv.items():
            if key.startswith("poly."):
                continue
            pairs.append(("%s.%s" % (stage, key), value))
            if key in VERDICT_KEYS:
                verdicts.append(value)
    ok = bool(verdicts) and all(v == "pass" for v in verdicts)
    pairs.append(("stages", " ".join(stage for stage, _ in present)))
    pairs.append(("overall", "pass" if ok else "fail"))
    write_kv(cfg.out / REPORT_FILE, pairs)
    print("report: %d stages, overall %s -> %s"
          % (len(present), "pass" if ok else "FAIL", cfg.out / REPORT_FILE))
    return EXIT_OK if ok else EXIT_FAIL


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value config file")
    common.add_argument("--out", help="output directory (default %s)" % DEFAULT_OUT)
    common.add_argument("--seed", type=int, help="sampling seed (default 0)")
    common.add_argument("--threads", type=int,
                        help="advisory worker count; stages run sequentially")
    common.add_argument("--alpha", help="concavity exponent in [0,1], not 1/2")
    common.add_argument("--m", help="diffusion exponent, > 1")
    common.add_argument("--n", type=int, help="space dimension, >= 2")
    common.add_argument("--steepness", help="override the solved steepness")
    common.add_argument("--rho", help="override the construction radius")
    common.add_argument("--resolutions",
                        help="comma-separated odd grid resolutions")
    common.add_argument("--horizon", type=float,
                        help="evolution horizon T (default %s)" % DEFAULT_HORIZON)

    parser = argparse.ArgumentParser(
        prog="pme-concavity",
        description="Pipeline for building, checking, and evolving "
                    "concavity-loss initial data for the porous medium "
                    "pressure equation.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("construct", parents=[common],
                   help="choose the family and steepness, store the polynomial")
    sub.add_parser("verify", parents=[common],
                   help="check the stored polynomial's three conditions")
    sub.add_parser("assemble", parents=[common],
                   help="glue the polynomial into global concave initial data")
    sub.add_parser("evolve", parents=[common],
                   help="run the explicit scheme and probe origin curvature")
    sub.add_parser("report", parents=[common],
                   help="aggregate stage reports into one file")
    return parser


_COMMANDS = {
    "construct": cmd_construct,
    "verify": cmd_verify,
    "assemble": cmd_assemble,
    "evolve": cmd_evolve,
    "report": cmd_report,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        # argparse already printed the usage message
        return EXIT_USAGE if err.code not in (0, None) else EXIT_OK
    try:
        cfg = build_config(args)
        return _COMMANDS[args.command](cfg)
    except UsageError as err:
        print("error: %s" % err, file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
