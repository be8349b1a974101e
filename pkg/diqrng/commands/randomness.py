"""qrng, extract and test commands."""
from pathlib import Path

import click

from diqrng.commands.base import reports_errors
from diqrng.errors import EXIT_OK, EXIT_TEST_FAILED
from diqrng.models import FORMAT_VERSION, BitStream, Certificate
from diqrng.rng import make_rng
from diqrng.serialization import read_bitstream, read_json, write_bitstream, write_json
from diqrng.services.nist_service import DEFAULT_BLOCK_LEN, TEST_NAMES


@click.command()
@click.option("--mode", type=click.Choice(["hadamard", "parity"]), default="hadamard", show_default=True)
@click.option("--qubits", type=click.IntRange(min=1), default=5, show_default=True)
@click.option("--shots", type=click.IntRange(min=1), default=20000, show_default=True)
@click.option("--seed", type=click.IntRange(min=0), default=0, show_default=True)
@click.option("--out", "out_prefix", type=click.Path(dir_okay=False), default=None,
              help="Writes PREFIX.bin, PREFIX.txt (one line per shot) and PREFIX.json.")
@click.pass_obj
@reports_errors
def qrng(app, mode, qubits, shots, seed, out_prefix):
    """Sample a Hadamard or parity-state QRNG."""
    if mode == "parity":
        record = app.randomness.parity_counts(qubits, shots, seed)
    else:
        record = app.randomness.hadamard_counts(qubits, shots, seed)

    prefix = Path(out_prefix) if out_prefix else Path(app.config["DIQRNG_OUT_DIR"]) / f"qrng_{mode}"
    stream = BitStream.from_text("".join(record.memory), mode)
    write_bitstream(prefix, stream, line_width=qubits)
    write_json(prefix.with_suffix(".json"), record.to_dict())
    click.echo(f"wrote {len(stream)} bits ({shots} shots x {qubits} qubits) to {prefix}.bin")
    return EXIT_OK


def _seed_stream(seed_path, seed, size):
    if (seed_path is None) == (seed is None):
        raise click.UsageError("toeplitz needs exactly one of --seed-bits or --seed")
    if seed_path is not None:
        return read_bitstream(seed_path, size if Path(seed_path).suffix != ".txt" else None)
    return BitStream(make_rng(seed).integers(0, 2, size=size, dtype="uint8"))


@click.command()
@click.option("--in", "in_path", required=True, type=click.Path(dir_okay=False),
              help="Raw stream, packed .bin or text .txt.")
@click.option("--length", type=click.IntRange(min=0), default=None, help="Bits to read from the input.")
@click.option("--method", type=click.Choice(["von-neumann", "toeplitz"]), default="von-neumann", show_default=True)
@click.option("--seed-bits", "seed_path", type=click.Path(dir_okay=False), default=None,
              help="Toeplitz seed file holding n + m - 1 bits.")
@click.option("--seed", type=click.IntRange(min=0), default=None, help="Draw the Toeplitz seed from this seed.")
@click.option("--out-len", type=click.IntRange(min=0), default=None, help="Toeplitz output length m.")
@click.option("--rate", type=click.FloatRange(0.0, 1.0), default=None, help="Certified min-entropy per input bit.")
@click.option("--certificate", "certificate_path", type=click.Path(dir_okay=False), default=None,
              help="Take the min-entropy rate from a certificate JSON.")
@click.option("--margin", type=click.IntRange(min=0), default=None,
              help="Security margin in bits [default: DIQRNG_SECURITY_MARGIN].")
@click.option("--out", "out_prefix", required=True, type=click.Path(dir_okay=False),
              help="Writes PREFIX.bin and PREFIX.txt.")
@click.pass_obj
@reports_errors
def extract(app, in_path, length, method, seed_path, seed, out_len, rate, certificate_path, margin, out_prefix):
    """Post-process a raw stream with von Neumann or Toeplitz extraction."""
    if rate is not None and certificate_path is not None:
        raise click.UsageError("give either --rate or --certificate, not both")
    stream = read_bitstream(in_path, length)

    if method == "von-neumann":
        result = app.randomness.von_neumann(stream)
    else:
        if out_len is None:
            raise click.UsageError("toeplitz needs --out-len")
        if certificate_path is not None:
            rate = Certificate.from_dict(read_json(certificate_path)).min_entropy_rate
        seed_bits = _seed_stream(seed_path, seed, len(stream) + out_len - 1)
        result = app.randomness.toeplitz_extract(stream, seed_bits, out_len, rate, margin)

    write_bitstream(out_prefix, result)
    click.echo(f"extracted {len(result)} bits from {len(stream)} ({method})")
    return EXIT_OK


@click.command("test")
@click.option("--in", "in_path", required=True, type=click.Path(dir_okay=False),
              help="Stream to test, packed .bin or text .txt.")
@click.option("--tests", default=",".join(TEST_NAMES), show_default=True, help="Comma-separated test names.")
@click.option("--block-len", type=click.IntRange(min=1), default=DEFAULT_BLOCK_LEN, show_default=True)
@click.option("--length", type=click.IntRange(min=0), default=None, help="Bits to read from the input.")
@click.option("--json-out", type=click.Path(dir_okay=False), default=None, help="Write the reports as JSON.")
@click.pass_obj
@reports_errors
def run_tests(app, in_path, tests, block_len, length, json_out):
    """Run the statistical test battery; exit 0 only if every test passes."""
    names = [name.strip() for name in tests.split(",") if name.strip()]
    stream = read_bitstream(in_path, length)
    reports = app.battery.run_battery(stream, names, block_len)

    for r in reports:
        click.echo(f"{r.test_name:<16} statistic={r.statistic:<12.6g} p={r.p_value:<10.6g} "
                   f"{'PASS' if r.passed else 'FAIL'}")
    if json_out:
        payload = {
            "format_version": FORMAT_VERSION,
            "length": len(stream),
            "tests": [r.to_dict() for r in reports],
        }
        write_json(json_out, payload, report=True)
    return EXIT_OK if all(r.passed for r in reports) else EXIT_TEST_FAILED
