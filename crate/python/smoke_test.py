"""Quick end-to-end check of the pynetrepair extension.

Build first:  pip install --no-build-isolation -e crates/python
"""

import os
import tempfile

import pynetrepair as nr


def main():
    train = nr.Dataset.synthetic(4, 60, [1, 16, 16], seed=1, split="train")
    test = nr.Dataset.synthetic(4, 30, [1, 16, 16], seed=2, split="test")
    assert len(train) == 240 and test.split == "test"

    model = nr.Model.train("cnn-small", 2, train, epochs=3, seed=0)
    acc = model.accuracy(test)
    print(f"baseline {model!r}: accuracy {acc:.3f}")
    assert acc > 0.9

    report = model.evaluate(test)
    assert abs(report["accuracy"] - acc) < 1e-12

    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "model.air")
        model.save(path)
        again = nr.Model.load(path)
        assert again.to_bytes() == model.to_bytes()

    bad = model.inject_defect("weight-zero", "fc2", 0.3, seed=0)
    print(f"defective accuracy {bad.accuracy(test):.3f}")

    extended = model.attach_correction_unit(len(model.layer_names) - 1, width=8)
    assert extended.logits(test) == model.logits(test)

    fixed, summary = nr.repair_model(bad, train, test, "extend-correct", seed=0, overrides=["epoch=2"])
    print(f"extend-correct: {summary['before']['accuracy']:.3f} -> {summary['after']['accuracy']:.3f}")
    assert fixed.accuracy(test) == summary["after"]["accuracy"]

    best, fit, trace = nr.pso_optimize(lambda w: -(w[0] - 3.0) ** 2, [(-10.0, 10.0)], swarm=16, iters=100)
    print(f"pso argmax {best[0]:.4f}")
    assert abs(best[0] - 3.0) < 1e-2 and trace == sorted(trace)

    try:
        nr.Model.build("ffnn", 99, [1, 8, 8], 4)
    except ValueError as e:
        print(f"rejected unsupported depth: {e}")
    else:
        raise AssertionError("unsupported depth accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()
