"""Services behind the diqrng commands: simulator, game, certification, randomness, statistical tests, harness and reports."""
