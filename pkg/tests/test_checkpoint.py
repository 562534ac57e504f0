import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from smg.checkpoint import (
    MAGIC,
    ParamStore,
    format_metadata,
    load_checkpoint,
    parse_metadata,
    save_checkpoint,
)
from smg.errors import FormatError


def test_empty_store_roundtrip(tmp_path):
    store = ParamStore()
    save_checkpoint(store, {"net": "none"}, tmp_path / "e.smg1")
    data = (tmp_path / "e.smg1").read_bytes()
    assert data.startswith(MAGIC)
    meta_len = struct.unpack("<I", data[4:8])[0]
    assert len(data) == 8 + meta_len
    back, meta = load_checkpoint(tmp_path / "e.smg1")
    assert len(back) == 0
    assert meta == {"net": "none"}


def test_small_tensor_bitexact(tmp_path):
    store = ParamStore()
    store.add("m", np.array([[1.0, 2.0], [3.0, 4.0]], dtype=np.float32))
    save_checkpoint(store, {}, tmp_path / "t.smg1")
    back, _ = load_checkpoint(tmp_path / "t.smg1")
    assert back == store
    assert back["m"].tobytes() == store["m"].tobytes()


def test_corrupted_magic(tmp_path):
    store = ParamStore()
    store.add("a", np.zeros(3, dtype=np.float32))
    path = tmp_path / "c.smg1"
    save_checkpoint(store, {}, path)
    data = bytearray(path.read_bytes())
    data[0] ^= 0xFF
    path.write_bytes(bytes(data))
    with pytest.raises(FormatError, match="magic"):
        load_checkpoint(path)


def test_truncation_reports_offset(tmp_path):
    store = ParamStore()
    store.add("a", np.arange(6, dtype=np.float32).reshape(2, 3))
    path = tmp_path / "t.smg1"
    save_checkpoint(store, {"k": "v"}, path)
    data = path.read_bytes()
    path.write_bytes(data[:-5])
    with pytest.raises(FormatError, match="offset"):
        load_checkpoint(path)


def test_duplicate_name_rejected():
    store = ParamStore()
    store.add("w", np.zeros(2, dtype=np.float32))
    with pytest.raises(ValueError):
        store.add("w", np.zeros(2, dtype=np.float32))


def test_metadata_roundtrip():
    meta = {"net": "glyph", "style": "fire=hot", "K": "3"}
    assert parse_metadata(format_metadata(meta)) == meta


def test_metadata_rejects_newlines():
    with pytest.raises(ValueError):
        format_metadata({"a": "b\nc"})


_names = st.lists(
    st.text(alphabet=st.characters(min_codepoint=33, max_codepoint=126,
                                   exclude_characters="="), min_size=1, max_size=24),
    min_size=0, max_size=6, unique=True,
)

_shapes = st.lists(st.integers(min_value=1, max_value=5), min_size=0, max_size=3)


@given(names=_names, data=st.data())
def test_random_store_roundtrip_bitexact(tmp_path_factory, names, data):
    rng = np.random.default_rng(data.draw(st.integers(0, 2**31)))
    store = ParamStore()
    for name in names:
        shape = tuple(data.draw(_shapes))
        arr = rng.normal(size=shape).astype(np.float32)
        # Exercise special values too; round-trips must preserve raw bits.
        if arr.size and data.draw(st.booleans()):
            arr.flat[0] = np.float32(np.nan)
        store.add(name, arr)
    meta = {n: str(i) for i, n in enumerate(names)}
    path = tmp_path_factory.mktemp("ckpt") / "r.smg1"
    save_checkpoint(store, meta, path)
    back, back_meta = load_checkpoint(path)
    assert back_meta == meta
    assert back.names() == store.names()
    for name, arr in store.items():
        assert back[name].shape == arr.shape
        assert back[name].tobytes() == arr.tobytes()


def test_module_store_roundtrip(tiny_gen, tmp_path):
    from smg.backbone import load_module_from_store, store_from_module

    store = store_from_module(tiny_gen)
    save_checkpoint(store, {"net": "test"}, tmp_path / "g.smg1")
    back, _ = load_checkpoint(tmp_path / "g.smg1")
    assert back == store
    load_module_from_store(tiny_gen, back)
    assert store_from_module(tiny_gen) == store
