"""play, certify, fit-noise and report commands."""
from pathlib import Path

import click

from diqrng.commands.base import reports_errors
from diqrng.errors import EXIT_NOT_VIOLATED, EXIT_OK, FormatError
from diqrng.models import INPUT_MODES, PARTIES, ExperimentConfig, LoopholeConfig, Verdict
from diqrng.serialization import canonical_json, read_json, write_bitstream, write_json
from diqrng.services.certify_service import CertifyService


def _verdict_code(certificate):
    return EXIT_OK if certificate.verdict is Verdict.CERTIFIED else EXIT_NOT_VIOLATED


def _experiment_config(config_path, flags, input_mode, replay):
    data = read_json(config_path) if config_path else {}
    if not isinstance(data, dict):
        raise FormatError(f"{config_path} must hold a JSON object")
    data = dict(data)
    # a flag replaces whatever noise source the file named
    if flags["lambda"] is not None:
        data.pop("profile", None)
    if flags["profile"] is not None:
        data.pop("lambda", None)
    data.update({key: value for key, value in flags.items() if value is not None})

    inputs = data.get("inputs") or {}
    if not isinstance(inputs, dict):
        raise FormatError(f"{config_path}: 'inputs' must be a JSON object")
    inputs = dict(inputs)
    if replay:
        inputs["files"] = list(replay)
        inputs.setdefault("mode", "replay")
    if input_mode:
        inputs["mode"] = input_mode
    data["inputs"] = inputs
    return ExperimentConfig.from_dict(data)


@click.command()
@click.option("--rounds", type=click.IntRange(min=1), default=None, help="Rounds to play [default: 100].")
@click.option("--shots", type=click.IntRange(min=1), default=None, help="Shots per round [default: 1000].")
@click.option("--lambda", "lam", type=click.FloatRange(0.0, 1.0), default=None, help="Depolarizing strength.")
@click.option("--profile", default=None, help="Device profile whose fitted lambda to use.")
@click.option("--seed", type=click.IntRange(min=0), default=None, help="Master seed [default: 0].")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None,
              help="Output directory [default: DIQRNG_OUT_DIR].")
@click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None,
              help="Experiment JSON; flags override its values.")
@click.option("--input-mode", type=click.Choice(INPUT_MODES), default=None, help="Referee input source.")
@click.option("--replay", multiple=True, type=click.Path(dir_okay=False),
              help="Counts record to replay as referee input (repeatable).")
@click.option("--efficiency", type=click.FloatRange(0.0, 1.0, min_open=True), default=1.0, show_default=True,
              help="Per-party detection efficiency.")
@click.option("--all-events/--post-selected", default=True, show_default=True,
              help="Certify on all emitted pairs or only on coincidences.")
@click.option("--shared-inputs", is_flag=True, help="Draw x and y from one source (freedom-of-choice open).")
@click.option("--no-fresh-state", is_flag=True, help="Let rounds share one generator stream (memory open).")
@click.option("--workers", type=click.IntRange(min=1), default=None, help="Threads playing rounds.")
@click.option("--party", type=click.Choice(PARTIES), default=None, help="Whose outcomes form the certified stream.")
@click.pass_obj
@reports_errors
def play(app, rounds, shots, lam, profile, seed, out_dir, config_path, input_mode, replay,
         efficiency, all_events, shared_inputs, no_fresh_state, workers, party):
    """Play the CHSH game, certify the violation and write the reports."""
    if lam is not None and profile is not None:
        raise click.UsageError("give either --lambda or --profile, not both")

    flags = {
        "rounds": rounds,
        "shots": shots,
        "lambda": lam,
        "profile": profile,
        "master_seed": seed,
        "workers": workers,
        "party": party,
    }
    config = _experiment_config(config_path, flags, input_mode, replay)
    loopholes = LoopholeConfig(
        independent_inputs=not shared_inputs,
        fresh_state_per_round=not no_fresh_state,
        detection_efficiency=efficiency,
        report_all_events=all_events,
    )

    run = app.harness.run_certified_experiment(config, loopholes)

    out_dir = Path(out_dir or app.config["DIQRNG_OUT_DIR"])
    extra = app.harness.summary(run, config.profile)
    extra["config"] = config.to_dict()
    app.reports.write_rounds_csv(run.experiment, out_dir / "rounds.csv")
    app.reports.emit_reports(run.experiment, out_dir, device=config.profile, extra=extra)
    write_json(out_dir / "certificate.json", run.certificate.to_dict())
    write_bitstream(out_dir / "certified", run.stream)

    certificate = run.certificate
    click.echo(
        f"rounds={len(run.experiment.rounds)} p_avg={run.experiment.p_avg:.5f} "
        f"S={certificate.s_value:.5f} z={certificate.z_score:.2f} "
        f"rate={certificate.min_entropy_rate:.5f} verdict={certificate.verdict.value}"
    )
    click.echo(f"wrote {len(run.stream)} certified bits to {out_dir}")
    return _verdict_code(certificate)


@click.command()
@click.option("--in", "in_path", required=True, type=click.Path(dir_okay=False), help="Round CSV written by play.")
@click.option("--threshold", type=click.FloatRange(min=0.0), default=None,
              help="z threshold [default: DIQRNG_Z_THRESHOLD].")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None, help="Certificate JSON to write.")
@click.pass_obj
@reports_errors
def certify(app, in_path, threshold, out_path):
    """Certify a recorded experiment from its round CSV."""
    experiment = app.reports.read_rounds_csv(in_path)
    certifier = app.certifier if threshold is None else CertifyService(threshold)
    certificate = certifier.certify(experiment)
    if out_path:
        write_json(out_path, certificate.to_dict())
    click.echo(canonical_json(certificate.to_dict(), report=True), nl=False)
    return _verdict_code(certificate)


@click.command("fit-noise")
@click.option("--target", type=float, default=None, help="Average win probability to reproduce.")
@click.option("--profile", default=None, help="Device profile to take the target from.")
@click.pass_obj
@reports_errors
def fit_noise(app, target, profile):
    """Print the depolarizing strength that yields a target win probability."""
    if (target is None) == (profile is None):
        raise click.UsageError("give exactly one of --target or --profile")
    if profile is not None:
        target = app.harness.profile(profile).avg_win_target
    click.echo(f"{app.harness.fit_lambda(target):.5f}")
    return EXIT_OK


@click.command()
@click.option("--in", "in_path", required=True, type=click.Path(dir_okay=False), help="Round CSV written by play.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None,
              help="Output directory [default: DIQRNG_OUT_DIR].")
@click.option("--device", default=None, help="Device label recorded in summary.json.")
@click.pass_obj
@reports_errors
def report(app, in_path, out_dir, device):
    """Running average, histogram, density and summary for a round CSV."""
    experiment = app.reports.read_rounds_csv(in_path)
    paths = app.reports.emit_reports(experiment, out_dir or app.config["DIQRNG_OUT_DIR"], device=device)
    for name, path in paths.items():
        click.echo(f"{name}: {path}")
    return EXIT_OK
