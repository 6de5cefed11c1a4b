"""Smoke test for the aris_mec extension module.

Run after `pip install --no-build-isolation ./crates/python`.
"""

import cmath
import csv
import io
import json
import math

import aris_mec


def main() -> None:
    cfg = json.loads(aris_mec.default_config())
    assert cfg["num_elements"] == 16 and cfg["num_antennas"] == 4

    derived = aris_mec.validate_config()
    assert math.isclose(derived["ris_budget_w"], 2.672e-3, rel_tol=1e-3), derived
    assert derived["passive_element_cap"] == 99

    bad = dict(cfg, num_elements=40)
    try:
        aris_mec.validate_config(json.dumps(bad))
    except ValueError:
        pass
    else:
        raise AssertionError("a non-positive amplification budget must be rejected")

    assert math.isclose(aris_mec.path_loss_db(10.0, 2.2), -30.0 - 22.0, abs_tol=1e-9)
    assert aris_mec.mmse_rate(2.0, 0.5, 1e6) > 0.0

    relaxed, bits = aris_mec.optimal_offload_volume(250_000, 4e8, 700.0, 2e6, 1e10)
    assert 0 <= bits <= 250_000 and abs(relaxed - bits) <= 1.0

    q = aris_mec.quantize_phases([cmath.rect(2.0, 0.3), cmath.rect(1.0, 2.0)])
    assert [round(cmath.phase(z) / (math.pi / 2)) % 4 for z in q] == [0, 1]
    assert math.isclose(abs(q[0]), 2.0)

    small = dict(cfg, num_elements=4)
    result = aris_mec.solve(json.dumps(small), seed=1, variant="active")
    assert result["mcl_s"] > 0.0
    assert result["mcl_s"] == max(result["user_latency_s"])
    objective = result["objective"]
    assert all(b <= a * (1 + 1e-9) for a, b in zip(objective, objective[1:]))
    assert len(result["theta"]) == 4

    text = aris_mec.sweep_m(json.dumps(small), elements=[4], total_power_w=[10e-3], seeds=[0], variants=["active", "passive"])
    lines = text.splitlines()
    assert lines[0] == f"# aris-mec sweep-m v{aris_mec.CSV_SCHEMA_VERSION}"
    rows = list(csv.DictReader(io.StringIO("\n".join(lines[1:]))))
    assert [r["variant"] for r in rows] == ["active", "passive"]

    print(f"smoke test passed: MCL {result['mcl_s']:.4f} s after {result['iterations']} iterations")


if __name__ == "__main__":
    main()
