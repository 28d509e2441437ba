import numpy as np
import pytest

from prunefuse.config import RunConfig, config_from_mapping, load_config
from prunefuse.data import (
    BlobConfig,
    Dataset,
    benchmark_blobs,
    dataset_bytes,
    gen_blobs,
    load_dataset,
    parse_dataset,
    save_dataset,
)
from prunefuse.errors import FormatError, ValidationError
from prunefuse.io import checkpoint_bytes, load_checkpoint, parse_checkpoint, save_checkpoint
from prunefuse.net import NetworkSpec, init_network

from conftest import random_params


def test_blobs_deterministic_and_split():
    cfg = BlobConfig(classes=3, dim=4, samples_per_class=50, seed=2)
    a, b = gen_blobs(cfg), gen_blobs(cfg)
    assert np.array_equal(a[0].features, b[0].features) and np.array_equal(a[1].labels, b[1].labels)
    assert len(a[0]) == 120 and len(a[1]) == 30


def test_blobs_std_zero_collapse():
    tr, _ = gen_blobs(BlobConfig(classes=3, dim=4, samples_per_class=10, std=0.0))
    for c in range(3):
        rows = tr.features[tr.labels == c]
        assert np.all(rows == rows[0])


def test_benchmark_shape():
    tr, te = benchmark_blobs(0)
    assert (len(tr), len(te), tr.dim, tr.num_classes) == (5000, 1250, 32, 8)


def test_blob_config_validation():
    with pytest.raises(ValidationError):
        BlobConfig(classes=1)


def test_dataset_validation():
    with pytest.raises(ValidationError):
        Dataset(np.zeros((2, 2)), [0, 3], 3)
    with pytest.raises(ValidationError):
        Dataset(np.array([[np.nan, 0]]), [0], 2)


@pytest.mark.parametrize("ext", ["bin", "csv"])
def test_dataset_roundtrip(tmp_path, ext):
    tr, _ = gen_blobs(BlobConfig(classes=3, dim=5, samples_per_class=20))
    path = tmp_path / f"d.{ext}"
    save_dataset(path, tr)
    back = load_dataset(path, num_classes=3)
    assert np.array_equal(back.features, tr.features) and np.array_equal(back.labels, tr.labels)


def test_binary_rejections():
    tr, _ = gen_blobs(BlobConfig(classes=3, dim=2, samples_per_class=5))
    raw = dataset_bytes(tr)
    with pytest.raises(FormatError, match="magic"):
        parse_dataset(b"XXXX" + raw[4:])
    with pytest.raises(FormatError, match="version"):
        parse_dataset(raw[:4] + b"\x02\x00\x00\x00" + raw[8:])
    with pytest.raises(FormatError):
        parse_dataset(raw[:-3])
    bad = bytearray(raw)
    bad[-4:] = (7).to_bytes(4, "little")
    with pytest.raises(FormatError, match="byte"):
        parse_dataset(bytes(bad))


def test_csv_label_out_of_range(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("x0,x1,label\n0.1,0.2,0\n0.3,0.4,3\n")
    with pytest.raises(FormatError, match="line 3"):
        load_dataset(p, num_classes=3)
    p.write_text("x0,x1,label\n0.1,nan,0\n")
    with pytest.raises(FormatError, match="line 2"):
        load_dataset(p)


def test_checkpoint_roundtrip(tmp_path):
    p = init_network(NetworkSpec((5, 7, 3)), 1)
    save_checkpoint(tmp_path / "c.pfck", p)
    assert load_checkpoint(tmp_path / "c.pfck").equals(p)
    assert [f.name for f in tmp_path.iterdir()] == ["c.pfck"]


def test_checkpoint_rejections():
    raw = checkpoint_bytes(random_params((3, 2), dtype=np.float32))
    for bad in (b"NOPE" + raw[4:], raw[:4] + b"\x09\x00\x00\x00" + raw[8:], raw[:-1], raw + b"\x00"):
        with pytest.raises(FormatError):
            parse_checkpoint(bad)


def test_config_roundtrip(tmp_path):
    c = RunConfig(method="baseline", p=0.25, seeds=[1, 2], hidden=[8, 8], tsync=2)
    (tmp_path / "c.toml").write_text(c.to_toml())
    back = load_config(tmp_path / "c.toml")
    assert back == c
    over = load_config(tmp_path / "c.toml", {"p": 0.75, "acq": None})
    assert over.p == 0.75 and over.acq == c.acq


def test_config_rejections(tmp_path):
    with pytest.raises(ValidationError, match="unknown"):
        config_from_mapping({"bogus": 1})
    with pytest.raises(ValidationError):
        config_from_mapping({"p": 1.5})
    (tmp_path / "bad.toml").write_text("p = = 1")
    with pytest.raises(ValidationError):
        load_config(tmp_path / "bad.toml")
