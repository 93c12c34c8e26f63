import pytest

from xtstrojan.cli import (
    EXIT_DEVICE,
    EXIT_IO,
    EXIT_OK,
    EXIT_PARSE,
    EXIT_RECOVERY,
    EXIT_SCAN,
    EXIT_SELFTEST,
    main,
)
from xtstrojan.flash import parse_image


@pytest.fixture
def files(tmp_path):
    paths = {name: tmp_path / name for name in ("honest.bin", "trojan.bin", "sd.bin", "truth.bin", "out.bin", "run.txt")}
    paths["hsm"] = tmp_path / "keys.hsm"
    assert main(["provision", "--seed", "3", "--image", str(paths["honest.bin"]), "--sd", str(paths["sd.bin"]),
                 "--hsm", str(paths["hsm"])]) == EXIT_OK
    return paths


def victim(files, image, script, seed=0):
    files["run.txt"].write_text(script)
    return main(["victim-run", "--image", str(image), "--sd", str(files["sd.bin"]), "--hsm", str(files["hsm"]),
                 "--script", str(files["run.txt"]), "--seed", str(seed), "--out", str(files["truth.bin"])])


SESSION = "AUTH correct horse\nWRITE 0 random:8192\nREAD 2 3\nLOCK\n"


def test_full_pipeline(files, capsys):
    honest, trojan = files["honest.bin"], files["trojan.bin"]
    assert main(["interdict", "--image", str(honest), "--out", str(trojan)]) == EXIT_OK
    assert "instances_patched=40" in capsys.readouterr().out
    assert victim(files, trojan, SESSION) == EXIT_OK
    assert "pair_log sector=2" in capsys.readouterr().out
    assert main(["recover", "--image", str(trojan), "--sd", str(files["sd.bin"]), "--out", str(files["out.bin"])]) == EXIT_OK
    assert "sectors_recovered=16" in capsys.readouterr().out
    assert files["out.bin"].read_bytes() == files["truth.bin"].read_bytes()


def test_deterministic_provision(tmp_path):
    a, b = tmp_path / "a.bin", tmp_path / "b.bin"
    main(["provision", "--seed", "9", "--image", str(a)])
    main(["provision", "--seed", "9", "--image", str(b)])
    assert a.read_bytes() == b.read_bytes()
    assert (tmp_path / "a.bin.hsm").read_bytes() == (tmp_path / "b.bin.hsm").read_bytes()


def test_honest_victim_leaves_no_log(files, capsys):
    assert victim(files, files["honest.bin"], SESSION) == EXIT_OK
    assert parse_image(files["honest.bin"].read_bytes()).pair_log is None
    assert main(["recover", "--image", str(files["honest.bin"]), "--sd", str(files["sd.bin"]),
                 "--out", str(files["out.bin"])]) == EXIT_RECOVERY


def test_interdict_twice_refused(files):
    honest, trojan = files["honest.bin"], files["trojan.bin"]
    main(["interdict", "--image", str(honest), "--out", str(trojan)])
    assert main(["interdict", "--image", str(trojan), "--out", str(files["out.bin"])]) == EXIT_SCAN


def test_selftest(files, capsys):
    assert main(["selftest", "--image", str(files["honest.bin"])]) == EXIT_OK
    assert "AES-256-CBC PASS" in capsys.readouterr().out
    main(["interdict", "--image", str(files["honest.bin"]), "--out", str(files["trojan.bin"])])
    assert main(["selftest", "--image", str(files["trojan.bin"])]) == EXIT_SELFTEST
    out = capsys.readouterr().out
    assert "AES-256-CBC FAIL" in out and "AES-256-XTS FAIL" in out and "SHA-256 PASS" in out


def test_scan(files, capsys):
    assert main(["scan", "--image", str(files["honest.bin"])]) == EXIT_OK
    out = capsys.readouterr().out
    assert "count T_TILDE=16" in out and "count S_INV=4" in out and "total=40" in out
    main(["scan", "--image", str(files["honest.bin"]), "--malicious"])
    # MC_INV holds no S-box entries, so it looks the same either way
    assert "count MC_INV=16\ncount S_FWD=0\ncount S_INV=0\ntotal=16" in capsys.readouterr().out


def test_verify(files, capsys):
    assert main(["verify", "--image", str(files["honest.bin"])]) == EXIT_OK
    main(["interdict", "--image", str(files["honest.bin"]), "--out", str(files["trojan.bin"])])
    assert main(["verify", "--image", str(files["trojan.bin"])]) == EXIT_SELFTEST
    assert "firmware_hash" in capsys.readouterr().out


def test_error_codes(files, tmp_path):
    missing = tmp_path / "nope.bin"
    assert main(["verify", "--image", str(missing)]) == EXIT_IO
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"\xff" * 1000)
    assert main(["verify", "--image", str(bad)]) == EXIT_PARSE
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2


def test_malformed_dump(files):
    main(["interdict", "--image", str(files["honest.bin"]), "--out", str(files["trojan.bin"])])
    victim(files, files["trojan.bin"], SESSION)
    files["sd.bin"].write_bytes(files["sd.bin"].read_bytes()[:-3])
    assert main(["recover", "--image", str(files["trojan.bin"]), "--sd", str(files["sd.bin"]),
                 "--out", str(files["out.bin"])]) == EXIT_RECOVERY


def test_tables_only_victim_errors(files, capsys):
    # read-only check: a Trojaned FPGA without the firmware changes never boots
    from xtstrojan.trojan import patch_tables, scan_tables, seal_container
    image = parse_image(files["honest.bin"].read_bytes())
    bits = image.bitstream
    bad = image.with_bitstream(seal_container(patch_tables(bits, scan_tables(bits))))
    files["trojan.bin"].write_bytes(bad.serialize())
    assert victim(files, files["trojan.bin"], SESSION) == EXIT_SELFTEST
    assert "AES-256-CBC FAIL" in capsys.readouterr().out


def test_wrong_password_and_locked_write(files, capsys):
    assert victim(files, files["honest.bin"], "AUTH wrong\nWRITE 0 random:512\n") == EXIT_DEVICE
    assert "AUTH FAIL attempts=1" in capsys.readouterr().out
