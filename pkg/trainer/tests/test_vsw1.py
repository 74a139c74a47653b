import numpy as np
import pytest

from score_trainer import vsw1
from score_trainer.models import Cutnet, SmallUNet, export_tensors, load_unet


def test_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    tensors = {"a.b": rng.normal(size=(3, 2)).astype(np.float32),
               "c": rng.normal(size=(5,)).astype(np.float32)}
    path = tmp_path / "t.vsw1"
    vsw1.save(tensors, path)
    back = vsw1.load(path)
    assert list(back) == ["a.b", "c"]
    for k in tensors:
        assert back[k].dtype == np.float32
        assert np.array_equal(back[k], tensors[k])


def test_rejects_nonfinite(tmp_path):
    with pytest.raises(ValueError):
        vsw1.save({"x": np.array([np.inf], dtype=np.float32)}, tmp_path / "x")


def test_rejects_wrong_magic(tmp_path):
    p = tmp_path / "bad"
    p.write_bytes(b"JUNKxxxx")
    with pytest.raises(ValueError):
        vsw1.load(p)


def test_export_matches_published_tensor_table(netspec_doc):
    exported = export_tensors(unet=SmallUNet(),
                              cutnet=Cutnet(netspec_doc["input_height"]))
    want = {name: tuple(shape) for name, shape in netspec_doc["tensors"].items()}
    got = {name: arr.shape for name, arr in exported.items()}
    assert got == want


def test_unet_roundtrips_through_file(tmp_path):
    model = SmallUNet()
    path = tmp_path / "u.vsw1"
    vsw1.save(export_tensors(unet=model), path)
    again = load_unet(vsw1.load(path))
    for (ka, va), (kb, vb) in zip(model.state_dict().items(),
                                  again.state_dict().items()):
        assert ka == kb
        assert np.array_equal(va.to("cpu").to(dtype=va.dtype).numpy(),
                              vb.numpy())


def test_reexport_bit_stable(tmp_path):
    model = SmallUNet()
    a, b = tmp_path / "a.vsw1", tmp_path / "b.vsw1"
    vsw1.save(export_tensors(unet=model), a)
    vsw1.save(export_tensors(unet=model), b)
    assert a.read_bytes() == b.read_bytes()
