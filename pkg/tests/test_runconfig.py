import pytest

from convect_uq.errors import ConfigError
from convect_uq.runconfig import (
    SCHEMA,
    boundary_spec,
    case_a_spec,
    case_b_spec,
    default_config,
    help_text,
    load_config,
    override,
    parse_config,
    serialize_config,
    solver_config,
    train_config,
)

MINIMAL = "\n".join(f"[{name}]" for name in SCHEMA)

FULL = """\
# nightly sweep settings
[grid]
n = 32
sizes = 8, 16, 32

[solver]
ra = 1e6          # stiffer case
pr = 7.5
dt = auto
steady_tol = 1e-5
workers = 2

[boundary]
cold_value = 0.9
hot_value = 1.1

[case_a]
mu_ra = 1e6
seed = 7

[case_b]
strips = 8
n_train = 12

[pce]
level = 5
order = 4

[dnn]
batch_size = full
scale = paper

[output]
directory = runs/sweep
case = b
figures = false
"""


class TestParsing:
    def test_empty_sections_give_defaults(self):
        rc = parse_config(MINIMAL)
        assert rc == default_config()
        assert rc["grid"]["n"] == 16
        assert rc["grid"]["sizes"] == (16, 24, 32)
        assert rc["solver"]["ra"] == 1.0e5
        assert rc["solver"]["dt"] is None
        assert rc["solver"]["workers"] == 1
        assert rc["case_a"]["sigma_fraction"] == 0.02
        assert rc["dnn"]["batch_size"] == 32
        assert rc["output"]["case"] == "a"

    def test_overrides_and_comments(self):
        rc = parse_config(FULL)
        assert rc["grid"]["n"] == 32
        assert rc["solver"]["ra"] == 1.0e6  # inline comment stripped
        assert rc["solver"]["workers"] == 2
        assert rc["case_b"]["strips"] == 8
        assert rc["dnn"]["batch_size"] is None
        assert rc["dnn"]["scale"] == "paper"
        assert rc["output"]["figures"] is False

    def test_parse_serialize_parse_is_identity(self):
        rc = parse_config(FULL)
        again = parse_config(serialize_config(rc))
        assert again == rc
        # and the canonical text is a fixed point
        assert serialize_config(again) == serialize_config(rc)

    def test_defaults_round_trip(self):
        rc = default_config()
        assert parse_config(serialize_config(rc)) == rc

    def test_load_config_reads_file(self, tmp_path):
        p = tmp_path / "run.ini"
        p.write_text(FULL)
        assert load_config(p) == parse_config(FULL)
        with pytest.raises(ConfigError, match="cannot read"):
            load_config(tmp_path / "absent.ini")


class TestRejection:
    def test_missing_section_named(self):
        text = "\n".join(f"[{n}]" for n in SCHEMA if n != "solver")
        with pytest.raises(ConfigError, match=r"missing \[solver\] section"):
            parse_config(text)

    def test_unknown_section_with_line(self):
        with pytest.raises(ConfigError, match=r":9: unknown section \[extra\]"):
            parse_config(MINIMAL + "\n[extra]\nx = 1")

    def test_unknown_key_with_line(self):
        text = MINIMAL.replace("[solver]", "[solver]\nrayleigh = 1e5")
        with pytest.raises(ConfigError, match=r":3: unknown key 'rayleigh'"):
            parse_config(text)

    def test_bad_value_reports_line_and_key(self):
        text = MINIMAL.replace("[grid]", "[grid]\nn = twelve")
        with pytest.raises(ConfigError, match=r":2: \[grid\] n = 'twelve'"):
            parse_config(text)

    def test_duplicate_key_rejected(self):
        text = MINIMAL.replace("[pce]", "[pce]\nlevel = 4\nlevel = 5")
        with pytest.raises(ConfigError):
            parse_config(text)

    def test_default_section_rejected(self):
        with pytest.raises(ConfigError, match="DEFAULT"):
            parse_config("[DEFAULT]\nra = 1\n" + MINIMAL)

    def test_value_ranges(self):
        bad = (
            ("[solver]", "ra = -5"),
            ("[solver]", "max_steps = 0"),
            ("[grid]", "n = 3"),
            ("[grid]", "sizes = 16, 16, 24"),
            ("[case_b]", "n_train = 1"),
            ("[dnn]", "scale = huge"),
            ("[output]", "case = c"),
        )
        for section, line in bad:
            with pytest.raises(ConfigError):
                parse_config(MINIMAL.replace(section, f"{section}\n{line}"))

    def test_module_preconditions_run_at_load(self):
        # valid numbers, invalid combinations: caught by the domain types
        with pytest.raises(ConfigError, match="mu_ra"):
            parse_config(MINIMAL.replace("[case_a]", "[case_a]\nmu_ra = 2e5"))
        with pytest.raises(ConfigError):
            parse_config(MINIMAL.replace("[case_b]", "[case_b]\nstrips = 5"))
        with pytest.raises(ConfigError):  # level < order + 1
            parse_config(MINIMAL.replace("[pce]", "[pce]\nlevel = 3\norder = 3"))


class TestBuilders:
    def test_solver_and_boundary(self):
        rc = parse_config(FULL)
        cfg = solver_config(rc)
        assert cfg.ra == 1.0e6 and cfg.dt is None and cfg.steady_tol == 1e-5
        bc = boundary_spec(rc)
        assert bc.cold_value == 0.9 and bc.hot_value == 1.1

    def test_case_specs_pull_from_their_sections(self):
        rc = parse_config(FULL)
        a = case_a_spec(rc)
        assert a.mu_ra == 1.0e6 and a.seed == 7
        assert (a.level, a.order) == (5, 4)  # from [pce]
        b = case_b_spec(rc)
        assert b.strips == 8 and b.n_train == 12 and b.n_val == 10

    def test_train_config(self):
        rc = parse_config(FULL)
        tc = train_config(rc)
        assert tc.batch_size is None and tc.epochs == 500
        assert tc.l2_penalty == 0.0  # presets supply it later

    def test_override_returns_new_config(self):
        rc = default_config()
        rc2 = override(rc, "solver", "workers", 4)
        assert rc2["solver"]["workers"] == 4
        assert rc["solver"]["workers"] == 1
        with pytest.raises(ConfigError):
            override(rc, "solver", "nope", 1)

    def test_help_text_lists_every_key(self):
        text = help_text()
        for section, keys in SCHEMA.items():
            assert f"[{section}]" in text
            for key in keys:
                assert key in text
