from diqrng.commands import cli

if __name__ == '__main__':
    # Configuration comes from .env / DIQRNG_* environment variables
    cli(prog_name="diqrng")
