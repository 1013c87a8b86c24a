import json

import pytest

from geolmk.errors import ValidationError
from geolmk.netspec import lstm_ledger, tiramisu_ledger, unet_ledger

# Reference feature column for the growth-rate-16 segmentation network,
# conv stem through the final 1x1 conv.
SEG_FEATURES = (48, 112, 192, 304, 464, 656, 896, 1088, 816, 576, 384, 256, 2)


def test_tiramisu_feature_column():
    led = tiramisu_ledger()
    got = tuple(e.out_features for e in led.entries[1:-1])
    assert got == SEG_FEATURES
    assert led.entries[0].out_features == 1
    assert led.entries[-1].name == "softmax"


def test_tiramisu_total():
    assert tiramisu_ledger().total_params == 9_318_914


def test_tiramisu_flags_known_reference_mismatch():
    led = tiramisu_ledger()
    assert len(led.discrepancies) == 1
    d = led.discrepancies[0]
    assert d["computed"] == 576
    assert d["reference"] == 578
    assert "(7)" in d["entry"]
    assert led.meta["reference_checked"]


def test_tiramisu_totals_are_entry_sums():
    led = tiramisu_ledger()
    assert led.total_params == sum(e.params for e in led.entries)


@pytest.mark.parametrize("k", [8, 16, 24])
def test_tiramisu_dense_growth_bookkeeping(k):
    # down path: each dense block adds n*k features on top of its input
    led = tiramisu_ledger(growth_rate=k)
    blocks = (4, 5, 7, 10, 12)
    feats = 48
    for n, entry in zip(blocks, led.entries[2 : 2 + len(blocks)]):
        feats += n * k
        assert entry.out_features == feats
    assert led.entries[2 + len(blocks)].out_features == feats + 15 * k


def test_tiramisu_params_increase_with_growth_rate():
    totals = [tiramisu_ledger(growth_rate=k).total_params for k in (12, 16, 24, 32)]
    assert totals == sorted(totals)
    assert len(set(totals)) == len(totals)


def test_tiramisu_reference_only_checked_for_canonical_config():
    led = tiramisu_ledger(growth_rate=24)
    assert not led.meta["reference_checked"]
    assert led.discrepancies == ()


def test_tiramisu_rejects_bad_growth_rate():
    with pytest.raises(ValidationError):
        tiramisu_ledger(growth_rate=0)


def test_unet_total():
    led = unet_ledger()
    assert led.total_params == 940_895
    assert led.total_params == sum(e.params for e in led.entries)


def test_unet_decoder_widths():
    led = unet_ledger()
    assert led.entries[-1].out_features == 21
    spatials = [e.spatial for e in led.entries]
    assert spatials[0] == "256x256"
    assert "64x64" in spatials  # bottleneck resolution after two pools
    # resolution halves down and doubles back up, no other sizes appear
    transitions = [s for i, s in enumerate(spatials) if i == 0 or s != spatials[i - 1]]
    assert transitions == ["256x256", "128x128", "64x64", "128x128", "256x256"]


def test_unet_rejects_indivisible_input():
    with pytest.raises(ValidationError):
        unet_ledger(input_size=(250, 256))
    with pytest.raises(ValidationError):
        unet_ledger(input_size=(2, 2))


def test_lstm_parameter_counts():
    led = lstm_ledger()
    by_name = {e.name: e.params for e in led.entries}
    assert by_name["lstm"] == 1_181_696
    assert by_name["output head"] == 1_026
    assert led.total_params == 1_181_696 + 1_026


def test_lstm_cell_formula():
    # four gates, each (input + hidden) x hidden weights plus hidden biases
    led = lstm_ledger(steps=10, input_features=8, hidden=32, num_classes=3)
    by_name = {e.name: e.params for e in led.entries}
    assert by_name["lstm"] == 4 * ((8 + 32) * 32 + 32)
    assert by_name["output head"] == 32 * 3 + 3


def test_lstm_rejects_nonpositive_sizes():
    with pytest.raises(ValidationError):
        lstm_ledger(hidden=0)


def test_ledger_text_rendering():
    text = tiramisu_ledger().to_text()
    assert "9,318,914" in text
    assert "578" in text
    assert any(line.strip().startswith("!") for line in text.splitlines())
    clean = unet_ledger().to_text()
    assert not any(line.strip().startswith("!") for line in clean.splitlines())


def test_ledger_as_dict_is_json_serializable():
    for led in (tiramisu_ledger(), unet_ledger(), lstm_ledger()):
        blob = json.dumps(led.as_dict())
        back = json.loads(blob)
        assert back["total_params"] == led.total_params
        assert len(back["entries"]) == len(led.entries)
