class ConfigError(ValueError):
    """Invalid configuration; carries every problem found, not just the first."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class ConvergenceError(RuntimeError):
    def __init__(self, message, last_delta):
        super().__init__(f"{message} (last delta {last_delta:.3e})")
        self.last_delta = last_delta
