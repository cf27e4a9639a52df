import json

import pytest

from goursatkit.cli import (EXIT_ASSERTION, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK,
                            ConfigError, builtin_checks, main, parse_config_text,
                            run, selftest)

PRODUCT_CFG = """
[web]
n = 4
source = expr
expr = (x1+x2)*(x3+x4)

[sampling]
box = 0.5:1.5
count = 8
seed = 11

[suites]
run = classify, frobenius
frobenius_systems = THETA_RHO, S10_11
"""

FAMILY_CFG = """
[web]
n = 5
source = family

[family]
kind = second
phi = a*(x1 + 1.1*x2) + s^2/2 + s*(0.2*x1 - 0.2*x2)
psi = a*(1 + 0.05*x3 - 0.04*x4 + 0.03*x5) + x3 + x4 + x5
slot = s
a0 = -4.0

[sampling]
box = 0.8:1.2
count = 6
seed = 3

[suites]
run = classify
"""


class TestConfigParsing:
    def test_product_config(self):
        cfg = parse_config_text(PRODUCT_CFG)
        assert cfg.n == 4 and cfg.source == "expr"
        assert cfg.suites == ("classify", "frobenius")
        assert cfg.frobenius_systems == ("THETA_RHO", "S10_11")

    def test_missing_n(self):
        with pytest.raises(ConfigError):
            parse_config_text("[web]\nsource = expr\nexpr = x1*x3\n")

    def test_bad_box(self):
        with pytest.raises(ConfigError):
            parse_config_text(PRODUCT_CFG.replace("0.5:1.5", "2.0:1.0"))

    def test_key_outside_section(self):
        with pytest.raises(ConfigError):
            parse_config_text("n = 4\n")

    def test_bad_suite_name(self):
        with pytest.raises(ConfigError):
            parse_config_text(PRODUCT_CFG.replace("run = classify, frobenius",
                                                  "run = classify, nonsense"))

    def test_delta_suite_needs_five(self):
        with pytest.raises(ConfigError):
            parse_config_text(PRODUCT_CFG.replace("THETA_RHO, S10_11", "DELTA2"))

    def test_comments_and_defaults(self):
        cfg = parse_config_text("# top comment\n[web]\nn = 5\nexpr = x1*x3 + x2*x4 + x5^2  # tail\n")
        assert cfg.count == 32 and cfg.order == 3
        assert cfg.suites == ("classify", "frobenius", "identities")

    def test_all_suites_adapt_to_n4(self):
        cfg = parse_config_text("[web]\nn = 4\nexpr = (x1+x2)*(x3+x4)\n")
        assert cfg.suites == ("classify", "frobenius")


class TestRun:
    def test_product_run(self):
        report = run(parse_config_text(PRODUCT_CFG))
        assert report.classification["first_kind"] is True
        systems = {e["system"]: e for e in report.frobenius}
        assert systems["THETA_RHO"]["verdict_counts"] == {"integrable": 8}
        assert report.all_assertions_passed()

    def test_family_run_second_kind(self):
        report = run(parse_config_text(FAMILY_CFG))
        assert report.classification["second_kind"] is True

    def test_singular_box_numerical_failure(self):
        from goursatkit.classify import TooFewRegularPoints
        cfg = parse_config_text(
            "[web]\nn = 4\nexpr = x1^2/2 + x2^2/2 + x3^2/2 + x4^2/2\n"
            "[sampling]\nbox = -0.000000001:0.000000001\ncount = 4\n")
        with pytest.raises(TooFewRegularPoints):
            run(cfg)

    def test_json_deterministic_modulo_timing(self):
        r1 = run(parse_config_text(PRODUCT_CFG)).to_dict()
        r2 = run(parse_config_text(PRODUCT_CFG)).to_dict()
        r1["meta"].pop("timing_seconds")
        r2["meta"].pop("timing_seconds")
        assert json.dumps(r1, sort_keys=True) == json.dumps(r2, sort_keys=True)

    def test_json_schema_and_finiteness(self):
        report = run(parse_config_text(FAMILY_CFG))
        text = report.to_json()  # allow_nan=False raises on NaN/Inf
        data = json.loads(text)
        assert sorted(data) == ["classification", "frobenius", "identities", "meta"]
        assert data["meta"]["schema"] == "goursat-kit/1"

    def test_identities_suite_runs(self):
        cfg = parse_config_text(FAMILY_CFG.replace("run = classify",
                                                   "run = identities\nidentity_trials = 60"))
        report = run(cfg)
        assert report.identities is not None
        impl = report.identities["algebra"]["implications"]
        assert all(v["max_relative"] <= 1e-8 for v in impl.values())

    def test_identities_on_six_web_with_gauge(self):
        cfg_text = """
[web]
n = 6
expr = x1*x3 + x2*x4 + x1*x4 + x1^2*x3^2/4 + x5^2/2 + x6^2/2

[sampling]
box = 0.5:1.5
count = 5
seed = 2

[gauge]
w = 0.1, -0.2, 0, 0.3, 0, 0

[suites]
run = identities
identity_trials = 40
"""
        report = run(parse_config_text(cfg_text))
        sample = report.identities["samples"][0]
        assert len(sample["conditions"]["m"]) == 6
        json_text = report.to_json()
        assert "non-finite" not in json_text

    def test_low_order_degrades_to_failure_records(self):
        cfg = parse_config_text(PRODUCT_CFG + "\n[tolerances]\norder = 2\n")
        report = run(cfg)
        assert report.classification is not None
        assert any(f.get("suite") == "frobenius" for f in report.failures)
        assert report.frobenius == []


class TestMain:
    def test_run_exit_zero(self, tmp_path, capsys):
        cfg = tmp_path / "web.cfg"
        cfg.write_text(PRODUCT_CFG)
        out = tmp_path / "report.json"
        assert main(["run", "--config", str(cfg), "--json", str(out)]) == EXIT_OK
        data = json.loads(out.read_text())
        assert data["classification"]["first_kind"] is True
        assert "classification" in capsys.readouterr().out

    def test_flag_overrides(self, tmp_path):
        cfg = tmp_path / "web.cfg"
        cfg.write_text(PRODUCT_CFG)
        out = tmp_path / "report.json"
        assert main(["run", "--config", str(cfg), "--points", "5", "--seed", "99",
                     "--suite", "classify", "--json", str(out)]) == EXIT_OK
        data = json.loads(out.read_text())
        assert data["meta"]["config"]["count"] == 5
        assert data["meta"]["config"]["seed"] == 99
        assert data["frobenius"] == []

    def test_config_error_exit_two(self, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("[web]\nsource = expr\n")
        assert main(["run", "--config", str(cfg)]) == EXIT_CONFIG
        assert "config error" in capsys.readouterr().err

    def test_missing_file_exit_two(self, capsys):
        assert main(["run", "--config", "/no/such/file.cfg"]) == EXIT_CONFIG
        capsys.readouterr()

    def test_numerical_failure_exit_three(self, tmp_path, capsys):
        cfg = tmp_path / "sing.cfg"
        cfg.write_text("[web]\nn = 4\nexpr = x1^2/2 + x2^2/2 + x3^2/2 + x4^2/2\n"
                       "[sampling]\nbox = -0.000000001:0.000000001\ncount = 4\n")
        assert main(["run", "--config", str(cfg)]) == EXIT_NUMERICAL
        assert "numerical failure" in capsys.readouterr().err

    def test_gauge_flag(self, tmp_path):
        cfg = tmp_path / "web.cfg"
        cfg.write_text(FAMILY_CFG)
        assert main(["run", "--config", str(cfg), "--gauge", "0.1,0,0,0,0"]) == EXIT_OK


class TestSelftest:
    def test_all_pass(self, capsys):
        assert selftest() == EXIT_OK
        out = capsys.readouterr().out
        assert "FAIL" not in out and "checks passed" in out

    def test_list_only(self, capsys):
        assert selftest(list_only=True) == EXIT_OK
        out = capsys.readouterr().out.splitlines()
        assert "web.torsion.product" in out
        assert len(out) >= 30

    def test_corrupted_corpus_fails(self, capsys):
        checks = list(builtin_checks())
        checks.append(("corrupted.expectation", lambda: (False, "forced mismatch")))
        assert selftest(checks=checks) == EXIT_ASSERTION
        assert "corrupted.expectation" in capsys.readouterr().out

    def test_main_selftest_subset(self, capsys):
        assert main(["selftest", "web.torsion.product"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "1/1 checks passed" in out

    def test_unknown_check_name(self, capsys):
        assert main(["selftest", "no.such.check"]) == EXIT_CONFIG
        assert "unknown check" in capsys.readouterr().out

    def test_unwritable_json_path(self, tmp_path, capsys):
        cfg = tmp_path / "web.cfg"
        cfg.write_text(PRODUCT_CFG)
        bad = tmp_path / "missing_dir" / "out.json"
        assert main(["run", "--config", str(cfg), "--json", str(bad)]) == EXIT_CONFIG
        assert "cannot write" in capsys.readouterr().err
