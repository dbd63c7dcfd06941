import pytest

from flowbench.flow_model import (
    ALL_FEATURES,
    MANDATORY_FIELDS,
    DatasetHandle,
    DatasetKind,
    FeatureId,
    FeatureVector,
    FlowRecord,
    Label,
    validate,
)


def _flow(**kw):
    base = dict(first_switched=5, last_switched=10, in_bytes=100, out_bytes=0, in_pkts=1, out_pkts=0,
                src_ip="10.0.0.1", dst_ip="10.0.0.2", src_port=1, dst_port=2, l4_proto=17)
    base.update(kw)
    return FlowRecord(**base)


def test_feature_catalogue():
    assert len(ALL_FEATURES) == 9
    assert [f.is_grouped for f in ALL_FEATURES] == [False] * 4 + [True] * 5
    assert FeatureId.parse(" Flow_Duration ") is FeatureId.FLOW_DURATION
    assert FeatureId.L7_PROTOS_PER_DST_PORT.index == 8
    with pytest.raises(ValueError, match="unknown feature"):
        FeatureId.parse("bogus")


def test_defaults_and_derived():
    r = _flow()
    assert r.l7_proto is None and r.label is Label.UNLABELED
    assert r.packets == 1 and r.octets == 100
    assert MANDATORY_FIELDS[-1] == "l4_proto"
    with pytest.raises(AttributeError):
        r.in_bytes = 3


@pytest.mark.parametrize(
    "kw,message",
    [
        ({"last_switched": 4}, "last_switched < first_switched"),
        ({"in_bytes": -1}, "negative counter in_bytes"),
        ({"in_pkts": 0}, "zero packets with nonzero bytes"),
        ({"dst_port": 70000}, "port out of range"),
        ({"l4_proto": 300}, "l4_proto out of range"),
        ({"l7_proto": -2}, "negative l7_proto"),
    ],
)
def test_validate(kw, message):
    assert validate(_flow(**kw)) == message


def test_validate_ok():
    assert validate(_flow()) is None
    assert validate(_flow(in_bytes=0, in_pkts=0)) is None  # empty flow is degenerate, not invalid


def test_handle_and_vector():
    h = DatasetHandle("x", DatasetKind.REAL_WORLD, "x.csv").as_benign(10)
    assert h.benign_only and h.flow_count == 10
    v = FeatureVector(tuple(range(9)), "x")
    assert v[FeatureId.AVG_PACKET_SIZE] == 3
    with pytest.raises(ValueError):
        FeatureVector((1.0,), "x")
