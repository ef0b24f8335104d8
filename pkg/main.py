"""
Main entry point for the weak-supervision spectral lab.
Command-line driver for world generation, spectra, graph mixing, training,
evaluation, bounds and sweeps.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from dotenv import load_dotenv
from pydantic import ValidationError

# Load environment variables
load_dotenv()

from src.analysis.bounds import BoundInputs, FiniteSampleInputs, finite_sample_bound, joint_bound
from src.analysis.evaluation import evaluate_embedding
from src.core.config import configure_logging, get_settings
from src.core.errors import ConfigInvalid, SpectralLabError
from src.core.graph import SymmetricGraph, eigh, normalize
from src.core.orchestrator import load_sweep_config, run_sweep
from src.demo.world_generator import bayes_labeler, gen_block_world, load_scenario_config
from src.models.joint_model import MixedGraphSpec, build_mixed_graph
from src.models.label_model import make_noise_model, noise_rate_from_alpha
from src.models.spectral_engine import TrainConfig, gd_train, top_k_factor
from src.tools.serialization import (
    load_factor,
    load_graph,
    load_world,
    save_factor,
    save_graph,
    save_report,
    save_world,
    write_matrix_csv,
    write_rows_csv,
)

logger = logging.getLogger("speclab")


def _read_json(path: Optional[str]) -> dict:
    if path is None:
        return {}
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigInvalid(f"cannot read config {path}: {e}") from e


def _out_dir(args) -> Path:
    out = Path(args.out or get_settings().output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _mixed(args):
    world = load_world(args.world)
    try:
        spec = MixedGraphSpec(theta=args.theta, gamma=args.gamma, n_L=world.layout.n_L, n_U=world.layout.n_U, r=world.r)
    except ValidationError as e:
        raise ConfigInvalid(f"invalid mixing parameters: {e}") from e
    mixed, _ = build_mixed_graph(world, spec)
    return world, mixed


def cmd_generate(args) -> int:
    data = _read_json(args.config)
    if args.seed is not None:
        data["seed"] = args.seed
    world = gen_block_world(load_scenario_config(data))
    out = save_world(world, _out_dir(args))
    print(f"world with {world.n} points written to {out}")
    return 0


def cmd_eigen(args) -> int:
    g = load_graph(args.graph)
    matrix = normalize(g).matrix if args.normalize else g.weights
    spectrum = eigh(matrix, method=args.method)
    out = _out_dir(args)
    if args.format == "json":
        (out / "spectrum.json").write_text(json.dumps({
            "values": spectrum.values.tolist(),
            "vectors": spectrum.vectors.tolist(),
        }))
    else:
        write_rows_csv(out / "eigenvalues.csv", ({"value": v} for v in spectrum.values), ["value"])
        write_matrix_csv(out / "eigenvectors.csv", spectrum.vectors)
    print(f"top eigenvalues: {', '.join(f'{v:.6g}' for v in spectrum.values[:5])}")
    return 0


def cmd_mix(args) -> int:
    _, mixed = _mixed(args)
    out = _out_dir(args)
    path = save_graph(SymmetricGraph(weights=mixed.matrix), out / f"mixed.{args.format}", fmt=args.format)
    print(f"mixed graph (theta={args.theta}) written to {path}")
    return 0


def cmd_train(args) -> int:
    _, mixed = _mixed(args)
    if args.method == "gd":
        data = _read_json(args.config)
        if args.seed is not None:
            data["seed"] = args.seed
        try:
            cfg = TrainConfig.model_validate(data)
        except ValidationError as e:
            raise ConfigInvalid(f"invalid training config: {e}") from e
        fm = gd_train(mixed, args.k, cfg)
    else:
        fm = top_k_factor(mixed, args.k)
    stem = save_factor(fm, _out_dir(args) / "factor")
    print(f"factor (n={fm.n}, k={fm.k}) written to {stem}.csv")
    return 0


def cmd_evaluate(args) -> int:
    world = load_world(args.world)
    fm = load_factor(args.factor)
    report = evaluate_embedding(fm, world, bayes_labeler(world))
    out = _out_dir(args)
    if args.format == "json":
        save_report(report, out / "evaluation.json")
    else:
        row = report.model_dump() | {"gate": report.gate}
        write_rows_csv(out / "evaluation.csv", [row], list(row))
    print(f"E={report.per_aug_error:.6g} vote_error={report.natural_vote_error:.6g} gate={report.gate}")
    return 0


BOUND_COLUMNS = ["theta", "gamma", "k", "bound", "active_term", "regime", "k_prime"]


def _bound_inputs(data: dict) -> tuple:
    """BoundInputs plus the noise rate; gamma sets alpha when alpha is absent, else it is read off alpha."""
    inputs = dict(data.get("inputs", data))
    gamma = inputs.pop("gamma", None)
    if gamma is not None and "alpha" not in inputs:
        inputs["alpha"] = make_noise_model(int(inputs.get("r", 2)), float(gamma)).alpha
    bi = BoundInputs.model_validate(inputs)
    if gamma is None:
        gamma = noise_rate_from_alpha(bi.r, bi.alpha)
    return bi, float(gamma)


def cmd_bound(args) -> int:
    data = _read_json(args.config)
    try:
        bi, gamma = _bound_inputs(data)
        fsi = FiniteSampleInputs.model_validate(data["finite_sample"]) if "finite_sample" in data else None
    except ValueError as e:
        raise ConfigInvalid(f"invalid bound inputs: {e}") from e

    report = finite_sample_bound(bi, fsi) if fsi is not None else joint_bound(bi)
    out = _out_dir(args)
    if args.format == "json":
        save_report(report, out / "bound.json")
    else:
        write_rows_csv(out / "bound.csv", [{
            "theta": bi.theta, "gamma": gamma, "k": bi.k, "bound": report.value,
            "active_term": report.active_term, "regime": report.regime, "k_prime": report.k_prime,
        }], BOUND_COLUMNS)
    print(f"bound={report.value:.6g} ({report.regime}, term {report.active_term})")
    return 0


def cmd_sweep(args) -> int:
    data = _read_json(args.config)
    if args.out:
        data["output_dir"] = args.out
    if args.seed is not None:
        data["master_seed"] = args.seed
    if args.workers is not None:
        data["workers"] = args.workers
    if args.plot:
        data["plot"] = True
    result = run_sweep(load_sweep_config(data))
    print(f"sweep finished: {len(result.results)} rows, {len(result.summary)} summary rows in {result.output_dir}")
    return 0 if result.state.current_step == "completed" else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="speclab", description="Weak-supervision spectral lab")
    parser.add_argument("--log-level", default=None)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int)
    common.add_argument("--format", choices=["csv", "json"], default="csv")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[common], help="generate a block world")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("eigen", parents=[common], help="spectrum of a graph file")
    p.add_argument("graph")
    p.add_argument("--normalize", action="store_true")
    p.add_argument("--method", choices=["auto", "jacobi", "lapack"])
    p.set_defaults(func=cmd_eigen)

    for name, func, help_text in (("mix", cmd_mix, "mixed graph of a world"),
                                  ("train", cmd_train, "embedding of a world's mixed graph")):
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.add_argument("world")
        p.add_argument("--theta", type=float, default=0.0)
        p.add_argument("--gamma", type=float, default=0.0)
        if name == "train":
            p.add_argument("--k", type=int, required=True)
            p.add_argument("--method", choices=["eigen", "gd"], default="eigen")
        p.set_defaults(func=func)

    p = sub.add_parser("evaluate", parents=[common], help="probe an embedding on its world")
    p.add_argument("world")
    p.add_argument("factor", help="factor checkpoint stem")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("bound", parents=[common], help="evaluate error bounds")
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("sweep", parents=[common], help="run a (gamma, theta, k) sweep")
    p.add_argument("--workers", type=int)
    p.add_argument("--plot", action="store_true", help="also render PNG figures")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    try:
        return args.func(args)
    except SpectralLabError as e:
        logger.error("%s: %s", type(e).__name__, e)
        return 2


if __name__ == "__main__":
    sys.exit(main())
