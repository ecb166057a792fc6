"""Smoke test for the pyhdrsample extension module.

Build and install with `maturin develop -m crates/python/Cargo.toml`, then run
`python python/smoke_test.py`.
"""

import json
import math
import tempfile

import pyhdrsample as hs


def main():
    rv = hs.RandomVector.from_json(
        json.dumps(
            {
                "marginals": [
                    {"family": "normal", "mu": 0.0, "sigma": 1.0},
                    {"family": "normal", "mu": 2.0, "sigma": 0.5},
                ],
                "correlation": [[1.0, 0.3], [0.3, 1.0]],
            }
        )
    )
    assert rv.dim == 2

    region = hs.HdrRegion.estimate(rv, alpha=0.01, cov=0.02, seed=1)
    assert region.level > 0.0
    x = region.sample(200, seed=2)
    assert len(x) == 200 and all(region.contains(p) for p in x)
    stat, p = region.ks_uniformity(x)
    print(f"HDR level {region.level:.4e}, KS p = {p:.3f}")

    again = hs.HdrRegion.from_json(region.to_json())
    assert again.sample(10, seed=5) == region.sample(10, seed=5)

    franke = hs.Problem("franke")
    ed = franke.rv.sample(120, seed=3)
    y = franke.evaluate(ed)
    model = hs.Surrogate.train("pce", ed, y, franke.rv)
    loo = model.loo(ed, y)
    print(f"PCE on franke: LOO {loo:.3e}")
    assert 0.0 <= loo < 1.0
    restored = hs.Surrogate.from_json(model.to_json())
    assert restored.predict(ed[:5]) == model.predict(ed[:5])

    ddim = hs.Problem("ddim:3:1e-2")
    est = ddim.failure_probability(method="mc", cov=0.05, seed=4)
    print(est)
    assert abs(est.pf - 1e-2) < 4 * 0.05 * 1e-2
    assert math.isclose(ddim.reference[1], 1e-2)

    with tempfile.TemporaryDirectory() as out:
        cfg = {
            "problems": ["ddim:2:1e-2"],
            "sizes": [40],
            "replications": 2,
            "validation_size": 1000,
            "cov_target": 0.05,
            "surrogates": ["pce"],
        }
        assert hs.run_campaign(json.dumps(cfg), out) == 0
        ranking = json.loads(hs.rank_heats(out, "rmse"))
        assert len(ranking["heats"]) == 1

    print("ok")


if __name__ == "__main__":
    main()
