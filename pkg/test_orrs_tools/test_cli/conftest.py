import pytest

from orrs_tools.cli.main import argument_parser


SMALL_RUN = [
    "synth.n_vehicles=100",
    "seed=3",
    "cv.k=3",
    "learners.mlp.hidden_layers=[4]",
    "learners.mlp.batch_size=64",
    "learners.forest.n_trees=100",
    "learners.forest.max_depth=3",
    "learners.gbt.n_rounds=10",
    "learners.gbt.max_depth=4",
    "learners.meta.n_rounds=10",
    "screening.n_bins=5",
    "monte_carlo.t=3",
    "monte_carlo.n=30",
    "sweep.sizes=[10, 20, 30]",
    "sweep.t=2",
    "explain.n_samples=3",
    "explain.n_permutations=2",
    "explain.background_size=10",
    "explain.pollutants=[co]",
]


def command_args(command, output_dir, *overrides):
    args = [command, "-s", "paths.output_dir={0}".format(output_dir)]
    for override in SMALL_RUN + list(overrides):
        args.extend(["-s", override])
    return argument_parser.parse_args(args)


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "pipeline.yaml"
    path.write_text("paths:\n  output_dir: from_file\nseed: 4\nlearners:\n  gbt:\n    max_depth: 5\n")
    return str(path)
