"""Quick check of the pokerlab extension module."""

import math

import pokerlab


def main():
    csv, value, expl = pokerlab.solve("kuhn", alpha=0.1)
    assert csv.startswith("infoset"), csv[:40]
    assert math.isclose(value, -1.0 / 18.0, abs_tol=1e-9), value
    assert abs(expl) < 1e-9, expl

    assert "f" in pokerlab.toy_ids("kuhn", "id")
    assert math.isclose(pokerlab.br_ceiling("kuhn", "f"), 1.0, abs_tol=1e-9)

    probs = pokerlab.toy_distribution("kuhn", "f", "K:(start)")
    assert math.isclose(sum(probs), 1.0), probs

    rows = pokerlab.ne_vs_toys("kuhn", alpha=0.1)
    assert rows and len(rows[0]) == 5

    err = pokerlab.grad_check("kuhn", seed=0, samples=20)
    assert err < 1e-4, err

    mean, half = pokerlab.ci95([1.0, 1.0, 1.0])
    assert mean == 1.0 and half == 0.0

    a, b = pokerlab.elo_update(1200.0, 1200.0, 1.0)
    assert math.isclose(a, 1216.0) and math.isclose(b, 1184.0), (a, b)

    try:
        pokerlab.solve("kuhn", alpha=0.5)
    except ValueError:
        pass
    else:
        raise AssertionError("alpha above 1/3 accepted")

    print("smoke test ok")


if __name__ == "__main__":
    main()
