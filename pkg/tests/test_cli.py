"""Tests for the unified CLI module."""

import json
import sys
from unittest.mock import patch

import pytest

from zgkn.cli import _COMMANDS, build_parser, main
from zgkn.config import RunConfig
from zgkn.geometry import HEADLINE_RING_RADIUS, REDUCED_COMPTON_WAVELENGTH_M, ModelParams
from zgkn.results import ResultEnvelope


def _run(argv: list[str]) -> None:
    with patch.object(sys, "argv", ["zgkn", *argv]):
        main()


def _exit_code(argv: list[str]) -> int:
    with patch.object(sys, "argv", ["zgkn", *argv]):
        with pytest.raises(SystemExit) as exc_info:
            main()
    return exc_info.value.code


class TestCLIHelp:
    """Tests for CLI help and version output."""

    def test_main_help(self):
        """Test that main help displays available commands."""
        assert _exit_code(["--help"]) == 0

    def test_main_version(self, capsys):
        """Test that version is displayed correctly."""
        assert _exit_code(["--version"]) == 0
        assert capsys.readouterr().out.startswith("zgkn ")

    @pytest.mark.parametrize("command", sorted(_COMMANDS))
    def test_subcommand_help(self, command):
        """Every subcommand has its own help."""
        assert _exit_code([command, "--help"]) == 0

    def test_interaction_help_shows_tolerance(self, capsys):
        assert _exit_code(["interaction", "--help"]) == 0
        assert "1%" in capsys.readouterr().out

    def test_no_command_prints_help(self, capsys):
        assert _exit_code([]) == 0
        assert "<command>" in capsys.readouterr().out

    def test_every_subcommand_is_dispatched(self):
        parser = build_parser()
        for command in _COMMANDS:
            assert parser.parse_args([command]).command == command


class TestConvertCommand:
    """Tests for the unit conversion subcommand."""

    def test_default_is_headline_radius(self, capsys):
        _run(["convert"])
        out = capsys.readouterr().out
        assert out.startswith(f"{HEADLINE_RING_RADIUS:.10g} hbar/mc = ")
        assert out.rstrip().endswith(" m")

    def test_json_from_si(self, capsys):
        _run(["convert", "--from", "si", "--length", str(REDUCED_COMPTON_WAVELENGTH_M), "--json"])
        envelope = json.loads(capsys.readouterr().out)
        assert envelope["command"] == "convert"
        assert envelope["payload"]["compton"] == pytest.approx(1.0)
        assert len(envelope["config_hash"]) == 64

    def test_csv_output(self, tmp_path, capsys):
        path = tmp_path / "convert.csv"
        _run(["convert", "--length", "1", "-o", str(path)])
        header, row = path.read_text().splitlines()
        assert header == "compton,meters"
        assert float(row.split(",")[1]) == pytest.approx(REDUCED_COMPTON_WAVELENGTH_M)

    def test_config_rejected(self, tmp_path, capsys):
        path = tmp_path / "run.json"
        RunConfig(params=ModelParams(a=0.05)).save(path)
        assert _exit_code(["convert", "--config", str(path)]) == 2
        assert "no configuration file" in capsys.readouterr().err


class TestErrorExits:
    """Configuration problems exit 2, with a JSON error under --json."""

    def test_missing_radius(self, capsys):
        assert _exit_code(["angular"]) == 2
        assert "ring radius is required" in capsys.readouterr().err

    def test_error_as_json(self, capsys):
        assert _exit_code(["angular", "--json", "--no-color"]) == 2
        error = json.loads(capsys.readouterr().out)
        assert error["error"] == "ConfigError"

    def test_interaction_needs_point(self):
        assert _exit_code(["interaction", "--a", "1", "--charge", "1"]) == 2

    def test_invalid_quantum_numbers(self):
        assert _exit_code(["angular", "--a", "0.1", "--kappa", "0.3"]) == 2

    def test_unknown_check(self, capsys):
        assert _exit_code(["verify", "--checks", "no_such_check"]) == 2
        assert "Unknown checks" in capsys.readouterr().err

    def test_argparse_errors_exit_2(self):
        assert _exit_code(["fields", "--a", "one"]) == 2


class TestCommands:
    """End-to-end runs of the fast subcommands."""

    def test_fields_csv(self, tmp_path, capsys):
        path = tmp_path / "slice.csv"
        _run(
            ["fields", "--a", "1", "--charge", "1", "--xi", "2,-2", "--eta", "0.5", "-o", str(path)]
        )
        lines = path.read_text().splitlines()
        assert lines[0].startswith("xi,eta,phi_kn,psi_kn")
        assert len(lines) == 3
        assert capsys.readouterr().out.startswith("xi,eta")

    def test_fields_json_file(self, tmp_path):
        path = tmp_path / "slice.json"
        argv = ["fields", "--a", "1", "--charge", "1", "--xi", "2", "--flux-radius", "1000"]
        _run([*argv, "-o", str(path)])
        envelope = ResultEnvelope.load(path)
        assert envelope.diagnostics["separable"] is True
        flux = envelope.diagnostics["gauss_flux"]
        assert flux["plus"] == pytest.approx(flux["expected"], rel=1e-3)

    def test_angular(self, capsys):
        argv = ["angular", "--a", "0.1", "--energy", "0.5", "--kappa", "0.5", "--branch", "1"]
        _run([*argv, "--json"])
        payload = json.loads(capsys.readouterr().out)["payload"]
        assert payload["lambda"] > 0

    def test_config_file_drives_run(self, tmp_path, capsys):
        path = tmp_path / "run.json"
        RunConfig(
            params=ModelParams(a=1.0, charge=1.0), sections={"fields": {"xi": "3", "eta": "0"}}
        ).save(path)
        _run(["fields", "--config", str(path), "--json", "--compact"])
        envelope = json.loads(capsys.readouterr().out)
        assert [row["xi"] for row in envelope["payload"]] == [3.0]

    def test_verify_quick_subset(self, capsys):
        _run(["verify", "--checks", "toggle_antisymmetry,conical_angle", "--no-color"])
        out = capsys.readouterr().out
        assert "2/2 checks passed" in out
