import json
import os

import pytest

from discwm.cli import main


def _write(path, data):
    with open(path, "w") as fh:
        json.dump(data, fh)
    return str(path)


@pytest.mark.parametrize("scheme, extra", [
    ("zerobit-noinit", []), ("zerobit-init", []), ("disc", ["--payload-bits", "3", "--message", "5"]),
])
def test_embed_detect(tmp_path, scheme, extra):
    spec = _write(tmp_path / "embed.json", {"key_seed": 4, "length_bits": 300, "h_bits": 20, "model_seed": 2})
    out = tmp_path / "out"
    assert main(["embed", "--spec", spec, "--scheme", scheme, "--out", str(out)] + extra) == 0
    text = json.load(open(out / "text.json"))
    assert text["scheme"] == scheme and text["length_bits"] == 300
    assert main(["detect", "--spec", spec, "--text", str(out / "text.json"), "--out", str(out)]) == 0
    report = json.load(open(out / "report.json"))
    assert report["is_watermarked"] is True
    if scheme == "disc":
        assert report["m_star"] == 5
    assert "key" not in json.dumps(report).lower().replace("key_", "")


def test_key_file(tmp_path):
    from discwm.prf import SecretKey
    key = SecretKey.from_seed(9)
    key_file = tmp_path / "k.hex"
    key_file.write_text(key.hex())
    out = tmp_path / "o"
    assert main(["embed", "--key-file", str(key_file), "--length-bits", "200", "--h-bits", "16",
                 "--out", str(out)]) == 0
    assert main(["detect", "--key-file", str(key_file), "--h-bits", "16", "--text", str(out / "text.json"),
                 "--out", str(out)]) == 0
    report = (out / "report.json").read_text()
    assert key.hex() not in report
    assert json.loads(report)["is_watermarked"]


def test_config_errors(tmp_path, capsys):
    assert main(["embed", "--out", str(tmp_path)]) == 1
    assert main(["ber-sweep", "--spec", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == 1
    bad = _write(tmp_path / "bad.json", {"trials": 0})
    assert main(["fpr-calibrate", "--spec", bad, "--out", str(tmp_path)]) == 1
    unknown = _write(tmp_path / "unknown.json", {"colour": "red"})
    assert main(["lmin-curve", "--spec", unknown, "--out", str(tmp_path)]) == 1
    assert "config error" in capsys.readouterr().err


def test_experiment_success_and_check_failure(tmp_path):
    out = tmp_path / "lmin"
    assert main(["lmin-curve", "--zetas", "1,2,4", "--out", str(out)]) == 0
    assert os.path.exists(out / "lmin_curve.csv") and os.path.exists(out / "lmin_curve.json")
    # two trials at one and two tokens cannot show a tenfold BER drop for m=4
    spec = _write(tmp_path / "ber.json", {"payload_bits_list": [4], "token_lengths": [1, 2], "trials": 2,
                                          "fixed_chunk": 0, "h_bits": 4, "seed": 0})
    assert main(["ber-sweep", "--spec", spec, "--out", str(tmp_path / "ber")]) == 2


def test_flags_override_spec(tmp_path):
    spec = _write(tmp_path / "s.json", {"trials": 50, "seed": 1})
    out = tmp_path / "f"
    main(["fpr-calibrate", "--spec", spec, "--trials", "3", "--length-bits", "40", "--h-bits", "8",
          "--payload-bits", "1", "--out", str(out)])
    side = json.load(open(out / "fpr_calibration.json"))
    assert side["spec"]["trials"] == 3 and side["spec"]["seed"] == 1
