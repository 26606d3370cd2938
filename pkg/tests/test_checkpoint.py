import numpy as np
import pytest

from seizsim.errors import FormatError
from seizsim.nn import ModelSpec, init_params, load_checkpoint, save_checkpoint
from seizsim.nn.checkpoint import decode_checkpoint, encode_checkpoint, spec_from_dict, spec_to_dict
from seizsim.nn.model import ConvBlock


def test_round_trip(tmp_path):
    params = init_params(ModelSpec(), 3, np.float32)
    path = tmp_path / "m.sznm"
    save_checkpoint(params, path)
    back = load_checkpoint(path)
    assert back.equals(params)
    assert back.spec == params.spec


def test_spec_dict_round_trip():
    spec = ModelSpec(2, 64, (ConvBlock(4, 3), ConvBlock(6, 5)), (7, 1))
    assert spec_from_dict(spec_to_dict(spec)) == spec


def test_corruption_detected():
    data = bytearray(encode_checkpoint(init_params(ModelSpec.miniature(), 0, np.float32)))
    data[-10] ^= 0xFF
    with pytest.raises(FormatError):
        decode_checkpoint(bytes(data))
    with pytest.raises(FormatError) as err:
        decode_checkpoint(b"NOPE" + bytes(data[4:]))
    assert err.value.offset == 0
