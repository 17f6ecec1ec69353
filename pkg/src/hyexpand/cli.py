"""Command-line interface.

Exit codes: 0 success, 2 configuration error, 3 numerical-consistency failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .asymptotics import asymptotic_constants, lemma_mc, lemma_oracles, poisson_limit_measures
from .cumulants import cumulant_report, interval_data, mu2_intervals, mu3_intervals, normalized_cumulants
from .edgeworth import VARIANTS, make_density
from .estimator import hy_estimate
from .model import ModelSpec, theta
from .montecarlo import ExperimentConfig, SamplingConfig, run_experiment
from .sampling import Partition, SamplingScheme, generate_poisson, generate_uniform
from .simulate import simulate_exact, simulate_with_drift

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
ENGINE_RTOL = 1e-9


class ScenarioError(ValueError):
    pass


class NumericalError(RuntimeError):
    pass


_SECTIONS = {"model", "sampling", "experiment", "output", "seed"}
_SAMPLING_KEYS = {
    "poisson": {"kind", "n", "p1", "p2"},
    "uniform": {"kind", "N1", "N2", "n"},
    "fixed": {"kind", "pi1", "pi2", "n"},
}
_EXPERIMENT_KEYS = {"replicates", "densities", "drift", "substeps", "chunk_size",
                    "cumulant_replicates", "event_a", "nu_replicates"}
_OUTPUT_KEYS = {"path", "ecdf_path"}


@dataclass
class Scenario:
    model: ModelSpec
    sampling: dict
    experiment: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)
    seed: int = 0

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        if not isinstance(d, dict):
            raise ScenarioError("scenario must be a JSON object")
        extra = set(d) - _SECTIONS
        if extra:
            raise ScenarioError(f"unknown scenario keys: {sorted(extra)}")
        if "model" not in d or "sampling" not in d:
            raise ScenarioError("scenario needs 'model' and 'sampling' sections")
        try:
            model = ModelSpec.from_config(d["model"])
        except (ValueError, TypeError, KeyError) as exc:
            raise ScenarioError(f"model: {exc}") from None
        samp = d["sampling"]
        if not isinstance(samp, dict) or samp.get("kind") not in _SAMPLING_KEYS:
            raise ScenarioError("sampling.kind must be one of poisson, uniform, fixed")
        extra = set(samp) - _SAMPLING_KEYS[samp["kind"]]
        if extra:
            raise ScenarioError(f"unknown sampling keys: {sorted(extra)}")
        exp = d.get("experiment", {})
        extra = set(exp) - _EXPERIMENT_KEYS
        if extra:
            raise ScenarioError(f"unknown experiment keys: {sorted(extra)}")
        out = d.get("output", {})
        extra = set(out) - _OUTPUT_KEYS
        if extra:
            raise ScenarioError(f"unknown output keys: {sorted(extra)}")
        seed = d.get("seed", 0)
        if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
            raise ScenarioError("seed must be a nonnegative integer")
        sc = cls(model, dict(samp), dict(exp), dict(out), seed)
        sc._validate_sampling()
        sc.experiment_config()  # checks the experiment section
        return sc

    @classmethod
    def load(cls, path) -> "Scenario":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ScenarioError(f"cannot read scenario: {exc}") from None
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"invalid JSON: {exc}") from None

    def _validate_sampling(self) -> None:
        s = self.sampling
        try:
            if s["kind"] == "poisson":
                if int(s.get("n", 0)) < 1 or float(s.get("p1", 1)) <= 0 or float(s.get("p2", 1)) <= 0:
                    raise ScenarioError("poisson sampling needs n >= 1 and positive p1, p2")
            else:
                self.fixed_scheme()
        except (TypeError, ValueError) as exc:
            raise ScenarioError(f"sampling: {exc}") from None

    def fixed_scheme(self) -> SamplingScheme:
        s, T = self.sampling, self.model.T
        if s["kind"] == "uniform":
            return SamplingScheme(generate_uniform(int(s["N1"]), T), generate_uniform(int(s["N2"]), T))
        sch = SamplingScheme(Partition(s["pi1"]), Partition(s["pi2"]))
        if sch.T != T:
            raise ScenarioError("fixed partitions must end at the model horizon T")
        return sch

    @property
    def n(self) -> int:
        s = self.sampling
        if s["kind"] == "poisson":
            return int(s["n"])
        if "n" in s:
            return int(s["n"])
        sch = self.fixed_scheme()
        return max(sch.N1, sch.N2)

    def scheme(self, seed) -> SamplingScheme:
        s = self.sampling
        if s["kind"] == "poisson":
            return generate_poisson(int(s["n"]), float(s.get("p1", 1.0)), float(s.get("p2", 1.0)),
                                    self.model.T, seed=seed)
        return self.fixed_scheme()

    def experiment_config(self) -> ExperimentConfig:
        e, s = self.experiment, self.sampling
        if s["kind"] == "poisson":
            samp = SamplingConfig("poisson", int(s["n"]), float(s.get("p1", 1.0)), float(s.get("p2", 1.0)))
        else:
            samp = SamplingConfig("fixed", self.n, scheme=self.fixed_scheme())
        drift = bool(e.get("drift", self.model.drift is not None))
        default_dens = ["gaussian", "edgeworth_plus"] if s["kind"] == "poisson" else ["gaussian", "conditional_p3n"]
        if drift and s["kind"] == "poisson":
            default_dens.append("drift_circ")
        try:
            return ExperimentConfig(
                model=self.model,
                sampling=samp,
                replicates=int(e.get("replicates", 1000)),
                seed=self.seed,
                densities=tuple(e.get("densities", default_dens)),
                drift=drift,
                substeps=int(e.get("substeps", 4)),
                chunk_size=int(e.get("chunk_size", 1024)),
                cumulant_replicates=int(e.get("cumulant_replicates", 0)),
                event_a=float(e.get("event_a", 0.9)),
            )
        except (TypeError, ValueError) as exc:
            raise ScenarioError(f"experiment: {exc}") from None


def _seeds(seed: int):
    """Independent seeds for the scheme and the path."""
    return np.random.SeedSequence(seed).spawn(2)


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def cmd_simulate(sc: Scenario, seed: int, out: str | None) -> None:
    s_seed, p_seed = _seeds(seed)
    scheme = sc.scheme(s_seed)
    if sc.model.drift is not None:
        path = simulate_with_drift(sc.model, scheme, int(sc.experiment.get("substeps", 4)), p_seed)
    else:
        path = simulate_exact(sc.model, scheme, p_seed)
    _emit(path.to_csv(), out)


def cmd_estimate(sc: Scenario, seed: int, out: str | None) -> None:
    s_seed, p_seed = _seeds(seed)
    scheme = sc.scheme(s_seed)
    if sc.model.drift is not None:
        path = simulate_with_drift(sc.model, scheme, int(sc.experiment.get("substeps", 4)), p_seed)
    else:
        path = simulate_exact(sc.model, scheme, p_seed)
    res = hy_estimate(path, scheme)
    _emit(_json({"theta": theta(sc.model), "theta_hat": res.theta_hat, "n_terms": res.n_terms,
                 "N1": scheme.N1, "N2": scheme.N2, "seed": seed}), out)


def cmd_cumulants(sc: Scenario, seed: int, out: str | None) -> None:
    scheme = sc.scheme(_seeds(seed)[0])
    rep = cumulant_report(sc.model, scheme, b_n=1.0 / sc.n)
    _emit(rep.to_json() + "\n", out)
    problems = []
    if rep.max_rel_disagreement > ENGINE_RTOL:
        problems.append(f"engines disagree (relative {rep.max_rel_disagreement:.3e})")
    if rep.eigen_bound_slack < 0:
        problems.append("eigenvalue bound violated")
    if any(v < 0 for v in rep.cumulant_bound_slack.values()):
        problems.append("cumulant bound violated")
    if abs(rep.trace_theta - rep.theta) > 1e-10 * max(1.0, abs(rep.theta)):
        problems.append("tr[Sigma A] differs from theta")
    if problems:
        raise NumericalError("; ".join(problems))


def _parse_grid(text: str) -> np.ndarray:
    try:
        lo, hi, steps = text.split(":")
        lo, hi, steps = float(lo), float(hi), int(steps)
    except ValueError:
        raise ScenarioError("--grid must look like lo:hi:steps") from None
    if steps < 0 or not (math.isfinite(lo) and math.isfinite(hi)):
        raise ScenarioError("--grid needs finite bounds and steps >= 0")
    return np.linspace(lo, hi, steps)


def density_params(sc: Scenario, variant: str, seed: int) -> dict:
    b = 1.0 / sc.n
    params: dict = {"b_n": b}
    if sc.sampling["kind"] == "poisson":
        s = sc.sampling
        k = asymptotic_constants(sc.model, float(s.get("p1", 1.0)), float(s.get("p2", 1.0)))
        params.update(c=k.c, lambda_bar3=12.0 * k.kappa, A=k.A)
    if variant in ("conditional_p3n", "conditional_tilde"):
        scheme = sc.scheme(_seeds(seed)[0])
        d = interval_data(sc.model, scheme)
        lb2, lb3 = normalized_cumulants(mu2_intervals(sc.model, scheme, d),
                                        mu3_intervals(sc.model, scheme, d), b)
        params.update(lambda_bar2=lb2, lambda_bar3=lb3)
    elif "c" not in params:
        raise ScenarioError(f"variant {variant!r} needs Poisson sampling for its constants")
    return params


def cmd_density(sc: Scenario, seed: int, variant: str, grid: str, out: str | None) -> None:
    if variant not in VARIANTS and variant != "gaussian":
        raise ScenarioError(f"unknown variant {variant!r}; choose from {', '.join(VARIANTS)}")
    z = _parse_grid(grid)
    dens = make_density(variant, density_params(sc, variant, seed))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["z", "density"])
    for zi, pi in zip(z, np.atleast_1d(dens.pdf(z))):
        w.writerow([repr(float(zi)), repr(float(pi))])
    _emit(buf.getvalue(), out)


def cmd_constants(sc: Scenario, seed: int, out: str | None) -> None:
    s = sc.sampling
    if s["kind"] != "poisson":
        raise ScenarioError("constants need Poisson sampling")
    p1, p2 = float(s.get("p1", 1.0)), float(s.get("p2", 1.0))
    k = asymptotic_constants(sc.model, p1, p2)
    lm = poisson_limit_measures(p1, p2, int(sc.experiment.get("nu_replicates", 0)), seed=seed)
    _emit(_json({"constants": k.to_dict(), "limit_measures": lm.to_dict()}), out)


def cmd_experiment(sc: Scenario, seed: int, out: str | None, threads: int) -> None:
    cfg = replace(sc.experiment_config(), seed=seed)
    ecdf = sc.output.get("ecdf_path")
    if ecdf:
        cfg = replace(cfg, keep_samples=True)
    res = run_experiment(cfg, threads=threads)
    _emit(res.to_json(), out)
    if ecdf:
        Path(ecdf).write_text(res.ecdf_csv())


LEMMA_DEFAULTS = {
    "A1": {"lam": 1.5},
    "A1.5": {"lam": 2.0},
    "A2": {"lam": 1.0, "length": 1.0},
    "A3": {"lam1": 1.0, "lam2": 1.0},
    "A4a": {"lam": 5.0, "a": 0.2, "b": 0.5, "T": 1.0},
    "A4b": {"lam": 5.0, "a": 0.2, "b": 0.5, "T": 1.0},
    "A5": {"p": 1.0, "t": 1.0, "n": 100},
    "A7": {"p1": 1.0, "p2": 2.0, "T": 1.0, "n": 100},
}


def validate_lemmas(replicates: int = 100_000, seed: int = 0) -> list[dict]:
    rows = []
    for k, (name, params) in enumerate(LEMMA_DEFAULTS.items()):
        oracle = lemma_oracles(name, params)
        mean, se = lemma_mc(name, params, replicates, seed=[seed, k])
        z = (mean - oracle) / se
        rows.append({"lemma": name, "params": params, "oracle": oracle, "mc_mean": mean,
                     "mc_se": se, "z": z, "pass": bool(abs(z) <= 3.0)})
    return rows


def cmd_validate_lemmas(seed: int, out: str | None, replicates: int) -> None:
    rows = validate_lemmas(replicates, seed)
    _emit(_json({"replicates": replicates, "seed": seed, "lemmas": rows}), out)
    failed = [r["lemma"] for r in rows if not r["pass"]]
    if failed:
        raise NumericalError(f"lemma oracles outside 3 SE: {failed}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hyexpand", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, scenario=True):
        sp.add_argument("--scenario", required=scenario, help="scenario JSON file")
        sp.add_argument("--seed", type=int, default=None, help="override the scenario seed")
        sp.add_argument("--out", default=None, help="output path (default: scenario output.path or stdout)")
        return sp

    common(sub.add_parser("simulate", help="simulate one observation set (CSV)"))
    common(sub.add_parser("estimate", help="simulate and compute the HY estimate (JSON)"))
    common(sub.add_parser("cumulants", help="cumulant report from all three engines (JSON)"))
    d = common(sub.add_parser("density", help="evaluate an expansion density on a grid (CSV)"))
    d.add_argument("--variant", required=True, help=", ".join(("gaussian",) + VARIANTS))
    d.add_argument("--grid", default="-10:10:201", help="lo:hi:steps")
    common(sub.add_parser("constants", help="Poisson constants and limit measures (JSON)"))
    e = common(sub.add_parser("experiment", help="Monte Carlo experiment report (JSON)"))
    e.add_argument("--threads", type=int, default=1, help="maximum worker processes")
    v = common(sub.add_parser("validate-lemmas", help="Poisson lemma oracles against Monte Carlo"),
               scenario=False)
    v.add_argument("--replicates", type=int, default=100_000)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "validate-lemmas":
            cmd_validate_lemmas(args.seed or 0, args.out, args.replicates)
            return EXIT_OK
        sc = Scenario.load(args.scenario)
        seed = sc.seed if args.seed is None else args.seed
        if seed < 0:
            raise ScenarioError("seed must be nonnegative")
        out = args.out or sc.output.get("path")
        if args.command == "simulate":
            cmd_simulate(sc, seed, out)
        elif args.command == "estimate":
            cmd_estimate(sc, seed, out)
        elif args.command == "cumulants":
            cmd_cumulants(sc, seed, out)
        elif args.command == "density":
            cmd_density(sc, seed, args.variant, args.grid, out)
        elif args.command == "constants":
            cmd_constants(sc, seed, out)
        elif args.command == "experiment":
            if args.threads < 1:
                raise ScenarioError("--threads must be at least 1")
            cmd_experiment(sc, seed, out, args.threads)
    except ScenarioError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, FloatingPointError) as exc:
        print(f"numerical check failed: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
