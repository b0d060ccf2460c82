"""Smoke test for the contactnet Python extension.

Build first with `cargo build --release -p contactnet-python`, then run
`python3 python/smoke_test.py`.
"""

import importlib.util
import math
import pathlib
import shutil
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent


def load_extension():
    for profile in ("release", "debug"):
        lib = ROOT / "target" / profile / "libcontactnet_py.so"
        if lib.exists():
            tmp = pathlib.Path(tempfile.mkdtemp())
            target = tmp / "contactnet.so"
            shutil.copy(lib, target)
            spec = importlib.util.spec_from_file_location("contactnet", target)
            module = importlib.util.module_from_spec(spec)
            spec.loader.exec_module(module)
            return module
    sys.exit("extension not built: run `cargo build --release -p contactnet-python`")


def main():
    cn = load_extension()

    assert round(cn.prob_rescale(0.01, 7.0), 3) == 0.068
    assert round(cn.rate_to_prob(0.73, 52.0), 3) == 0.014
    assert cn.prob_to_inverse_odds(0.5) == 1.0
    f = cn.steady_state_fraction_paired(0.001, 0.04, 0.02)
    assert 0.0 < f < 1.0

    params = cn.ModelParams.stockholm(300.0)
    assert math.isclose(params.xi, 0.23)
    edges = cn.simulate(params, steps=200, seed=1)
    assert all(u < v and t <= 200 for u, v, t in edges)

    design = cn.SurveyDesign(m=50, waves=2, lag=4)
    summaries = cn.run_survey(params, design, seed=2, burn_in=200)
    assert 0.0 <= summaries["frac_paired"] <= 1.0
    assert "frac_retained_nodes" in summaries
    formation = cn.SurveyDesign(m=50, duration_origin="formation")
    assert cn.run_survey(params, formation, seed=2, burn_in=200)["mean_steady_duration"] >= 0.0
    try:
        cn.SurveyDesign(m=50, duration_origin="start")
    except ValueError:
        pass
    else:
        raise AssertionError("unknown duration origin accepted")

    prior = cn.PriorConfig(n_fixed=200.0)
    assert prior.shape("xi") == (2.0, 2.0)
    draw = prior.sample(3)
    assert prior.density(draw) > 0.0

    table = cn.ReferenceTable.build(prior, cn.SurveyDesign(m=40), rows=60, seed=4, burn_in=100)
    assert len(table) == 60
    _, theta, observed = table.row(0)
    posterior = table.fit(observed, accept=0.5, adjust=True)
    assert len(posterior) == 30
    q = cn.posterior_quantiles(posterior, [0.5])
    assert set(q) == {"mu", "rho", "xi", "sigma", "omega0", "omega1"}

    try:
        cn.ModelParams(100.0, 1.5, 0.1, 0.1, 0.1, 0.1, 0.1)
    except ValueError:
        pass
    else:
        raise AssertionError("invalid probability accepted")

    print("python smoke test passed")


if __name__ == "__main__":
    main()
