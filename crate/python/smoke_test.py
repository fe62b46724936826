"""Builds the extension module and exercises it on a tiny synthetic video.

Usage: python3 python/smoke_test.py
"""
import json
import os
import shutil
import subprocess
import sys
import tempfile

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def build():
    subprocess.run(
        ["cargo", "build", "--release", "-p", "actinr-py", "--features", "extension-module"],
        cwd=ROOT,
        check=True,
    )
    return os.path.join(ROOT, "target", "release", "libactinr_py.so")


def main():
    lib = build()
    with tempfile.TemporaryDirectory() as tmp:
        shutil.copy(lib, os.path.join(tmp, "actinr.so"))
        sys.path.insert(0, tmp)
        import actinr

        actinr.write_toy("blob", os.path.join(tmp, "toy"))
        data, shape = actinr.load_frames(os.path.join(tmp, "toy"))
        assert shape == (16, 64, 64, 1), shape

        cfg = json.dumps({"train.iterations": 30, "model.hidden": 12, "hyper.width": 16})
        model, train_psnr = actinr.fit(data, shape, config=cfg)
        assert model.shape == shape
        out = model.render()
        assert len(out) == len(data)
        assert abs(actinr.psnr(out, data) - train_psnr) < 1e-9

        # Pixel centres reproduce the render exactly.
        pts = [(x + 0.5, 10.5, 3.0) for x in range(64)]
        row = model.sample(pts)
        assert row == out[3 * 4096 + 10 * 64 : 3 * 4096 + 11 * 64]

        path = os.path.join(tmp, "model.actinr")
        model.save(path)
        again = actinr.Model.load(path)
        assert again.render() == out
        assert json.loads(again.config_json())["train.iterations"] == 30

        try:
            actinr.fit(data, shape, config='{"no.such.key": 1}')
        except ValueError as e:
            assert "no.such.key" in str(e)
        else:
            raise AssertionError("unknown config key accepted")

        print(f"ok: {model!r}, train PSNR {train_psnr:.2f} dB")


if __name__ == "__main__":
    main()
