import numpy as np
import pytest
import torch

from srfeat.archive import load_archive, save_archive
from srfeat.errors import ConfigurationError, InputError
from srfeat.features import (NUM_CONV_LAYERS, IdentityFeatures, VggFeatures,
                             build_extractor)


def test_archive_roundtrip(tmp_path):
    arrays = {
        "a/weight": np.random.default_rng(0).random((3, 4)),
        "b/nested/bias": np.arange(5, dtype=np.float32),
    }
    manifest = {"kind": "test", "note": 7}
    path = tmp_path / "arrays.srz"
    save_archive(path, arrays, manifest)
    loaded, loaded_manifest = load_archive(path)
    assert loaded_manifest == manifest
    assert set(loaded) == set(arrays)
    for key in arrays:
        assert np.array_equal(loaded[key], arrays[key])
        assert loaded[key].dtype == arrays[key].dtype


def test_archive_corrupt_rejected(tmp_path):
    path = tmp_path / "bad.srz"
    path.write_bytes(b"\x00" * 32)
    with pytest.raises(InputError):
        load_archive(path)
    with pytest.raises(InputError):
        load_archive(tmp_path / "missing.srz")


def test_vgg_has_19_layer_conv_plan():
    assert NUM_CONV_LAYERS == 16
    model = VggFeatures(layer_index=16, width_mult=0.125)
    convs = [m for m in model.stack if isinstance(m, torch.nn.Conv2d)]
    assert len(convs) == 16
    assert convs[-1].out_channels == 64  # 512 * 0.125


def test_deepest_tap_spatial_size():
    # four pools before the deepest conv group: 96 -> 6
    model = VggFeatures.random_init(0, layer_index=16, width_mult=0.0625)
    out = model(torch.rand(1, 3, 96, 96))
    assert out.shape[-2:] == (6, 6)


def test_random_init_deterministic():
    a = VggFeatures.random_init(3, layer_index=2, width_mult=0.25)
    b = VggFeatures.random_init(3, layer_index=2, width_mult=0.25)
    x = torch.rand(1, 3, 16, 16)
    assert torch.equal(a(x), b(x))


def test_weights_file_roundtrip(tmp_path):
    model = VggFeatures.random_init(5, layer_index=3, width_mult=0.25)
    path = tmp_path / "vgg.srz"
    model.save_weights(path)
    again = VggFeatures.from_file(path, layer_index=3)
    x = torch.rand(2, 3, 12, 12)
    assert torch.allclose(model(x), again(x))


def test_missing_weights_is_configuration_error(tmp_path):
    with pytest.raises(ConfigurationError):
        VggFeatures.from_file(tmp_path / "nothing.srz")


def test_bad_layer_index():
    with pytest.raises(ConfigurationError):
        VggFeatures(layer_index=0)
    with pytest.raises(ConfigurationError):
        VggFeatures(layer_index=17)


def test_build_extractor_specs(tmp_path):
    assert isinstance(build_extractor("identity"), IdentityFeatures)
    model = build_extractor("random", seed=1, layer_index=2, width_mult=0.25)
    assert isinstance(model, VggFeatures)
    with pytest.raises(ConfigurationError):
        build_extractor(str(tmp_path / "absent.srz"))
