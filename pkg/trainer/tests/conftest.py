import subprocess

import pytest
import torch

torch.set_num_threads(1)

DATASET_ARGS = [
    "--count", "200", "--size", "64",
    "--porosity-min", "0.85", "--porosity-max", "0.95",
    "--kind", "trig", "--seed", "42",
    "--tol", "1e-5", "--check-interval", "10",
]


@pytest.fixture(scope="session")
def dataset_dir(tmp_path_factory):
    """Toy 200-sample dataset produced through the porelab CLI."""
    out = tmp_path_factory.mktemp("toyds")
    result = subprocess.run(
        ["porelab", "dataset", "gen", *DATASET_ARGS, "--out", str(out)],
        capture_output=True, text=True,
    )
    assert result.returncode == 0, result.stderr
    assert "records=200" in result.stdout
    return out
