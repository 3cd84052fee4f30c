#!/usr/bin/env python3
# Copyright (c) 2026 The TimeCMA-cpp Authors. All Rights Reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Interface check for an out-of-process embedding extractor.

Drives the CLI to produce prompts and stub stores, then reads both with
nothing but the Python stdlib, the way an extractor would. Also writes a
store from Python and has the CLI read it back.

usage: check_interfaces.py TIMECMA_BINARY WORK_DIR
"""

import json
import math
import os
import re
import shutil
import struct
import subprocess
import sys

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
MASK = (1 << 64) - 1
SPLITS = ("train", "val", "test")


def fnv1a64(data):
    h = FNV_OFFSET
    for b in data:
        h = ((h ^ b) * FNV_PRIME) & MASK
    return h


def read_store(path):
    with open(path, "rb") as f:
        raw = f.read()
    magic, version, dtype, e, n, w = struct.unpack_from("<4sHHIIQ", raw, 0)
    assert magic == b"TCMA", magic
    assert version == 1 and dtype == 1, (version, dtype)
    payload = raw[24:-8]
    assert len(payload) == 4 * w * n * e, (len(payload), w, n, e)
    (checksum,) = struct.unpack("<Q", raw[-8:])
    assert checksum == fnv1a64(payload), "checksum mismatch"
    return w, n, e, payload


def vector(payload, n, e, window, variable):
    off = 4 * e * (window * n + variable)
    return struct.unpack_from("<%df" % e, payload, off)


def write_store(path, w, n, e, values):
    payload = struct.pack("<%df" % len(values), *values)
    with open(path, "wb") as f:
        f.write(struct.pack("<4sHHIIQ", b"TCMA", 1, 1, e, n, w))
        f.write(payload)
        f.write(struct.pack("<Q", fnv1a64(payload)))


def run(binary, *args, cwd=None):
    out = subprocess.run([binary, *args], capture_output=True, text=True, cwd=cwd)
    if out.returncode != 0:
        sys.exit("command failed: %s\n%s%s" % (" ".join(args), out.stdout, out.stderr))
    return out.stdout


def f32(x):
    return struct.unpack("<f", struct.pack("<f", x))[0]


def main():
    binary, work = sys.argv[1], sys.argv[2]
    shutil.rmtree(work, ignore_errors=True)
    os.makedirs(work)
    csv = os.path.join(work, "ili.csv")
    run(binary, "synth", "ili", "-o", csv)
    cfg = os.path.join(work, "exp.cfg")
    with open(cfg, "w") as f:
        f.write("dataset.path = ili.csv\ndataset.name = ili\ndataset.frequency = 1w\n"
                "lookback = 36\nhorizon = 24\nmodel.prompt_dim = 32\nout_dir = out\n")
    # out_dir is relative to the working directory.
    run(binary, "gen-prompts", "-c", cfg, cwd=work)
    run(binary, "embed-stub", "-c", cfg, cwd=work)

    prompts = os.path.join(work, "out", "prompts")
    with open(os.path.join(prompts, "manifest.json")) as f:
        manifest = json.load(f)
    n = manifest["num_variables"]
    assert n == 7 and manifest["design"] == "P5", manifest
    assert re.fullmatch(r"[0-9a-f]{16}", manifest["template_hash"])
    numeral = re.compile(r"^[+-]?\d+(?:[.:\-/]\d+)*$")
    checked = 0
    for split in SPLITS:
        entry = manifest["splits"][split]
        with open(os.path.join(prompts, entry["file"])) as f:
            records = [json.loads(line) for line in f if line.strip()]
        assert len(records) == entry["records"] == entry["windows"] * n
        for i, r in enumerate(records):
            assert (r["window_id"], r["variable_id"]) == (i // n, i % n), "order"
            assert r["design"] == "P5" and r["value_count"] == 36
            last = r["text"].split()[-1]
            assert numeral.match(last), r["text"]
            assert abs(float(last) - r["trend_value"]) <= 0.005 + 1e-9

        store = os.path.join(work, "out", "stores", "ili_%s_T36_P5.tcma" % split)
        w, sn, e, payload = read_store(store)
        assert (w, sn, e) == (entry["windows"], n, 32)
        for r in records[:: max(1, len(records) // 50)]:
            v = vector(payload, n, e, r["window_id"], r["variable_id"])
            clip = lambda x: f32(max(-10.0, min(10.0, x)))
            assert v[0] == clip(r["trend_value"]) and v[1] == clip(r["mean"]), (v[:4], r)
            assert v[2] == clip(r["stdev"]) and v[3] == clip(r["last_value"])
            assert all(abs(x) <= math.sqrt(3.0) + 1e-6 for x in v[4:])
            checked += 1

    # A store written here must read back through the CLI.
    ext = os.path.join(work, "py.tcma")
    values = [0.25 * (i % 17) - 2.0 for i in range(3 * 2 * 8)]
    write_store(ext, 3, 2, 8, values)
    out = run(binary, "inspect-store", ext, "--window", "2", "--variable", "1")
    assert "windows: 3" in out and "embed_dim: 8" in out and "(ok)" in out, out
    got = [float(x) for x in out.split("vector(2, 1):")[1].split()]
    assert got == values[(2 * 2 + 1) * 8:(2 * 2 + 2) * 8], got

    # And a corrupted one must be refused.
    with open(ext, "r+b") as f:
        f.seek(40)
        b = f.read(1)
        f.seek(40)
        f.write(bytes([b[0] ^ 0x10]))
    bad = subprocess.run([binary, "inspect-store", ext], capture_output=True, text=True)
    assert bad.returncode != 0 and "checksum" in bad.stderr + bad.stdout

    print("interfaces ok: %d store vectors cross-checked against prompt records" % checked)


if __name__ == "__main__":
    main()
