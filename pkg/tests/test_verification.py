import json
import math

import numpy as np
import pytest

from bergerbeam.cli import main
from bergerbeam.verification import (
    check_eigenvalue_convergence, clamped_beam_root, observed_orders, smallest_d4_eigenvalue,
)


def test_first_clamped_root_frozen():
    beta = clamped_beam_root(1)
    assert beta == pytest.approx(4.730040744862704, abs=1e-13)
    assert math.cos(beta) * math.cosh(beta) == pytest.approx(1.0, abs=1e-10)
    assert beta**4 == pytest.approx(500.5639017404332, rel=1e-13)


def test_second_root():
    assert clamped_beam_root(2) == pytest.approx(7.853204624095838, abs=1e-12)


def test_mesh_eigenvalue_approaches_continuum():
    exact = clamped_beam_root(1) ** 4
    assert abs(smallest_d4_eigenvalue(200) - exact) < abs(smallest_d4_eigenvalue(100) - exact) < 1.0


def test_orders_helper():
    n = np.array([10, 20, 40])
    assert np.allclose(observed_orders(n, 3.0 / n**2), 2.0)


def test_eigenvalue_oracle_passes():
    assert check_eigenvalue_convergence().passed


def test_verify_subcommand(tmp_path, capsys):
    assert main(["verify", "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "verify.json").read_text())
    assert report["status"] == "ok"
    assert [c["name"] for c in report["checks"]] == ["conservation", "eigenvalue order", "energy identity"]
    assert capsys.readouterr().out.count("PASS") == 3

