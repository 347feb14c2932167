"""Exception types shared across the package."""


class OrrlabError(Exception):
    """Base class for all orrlab failures."""


class ProfileError(OrrlabError):
    """Invalid shear profile: unknown name, bad parameters, or broken bilipschitz bounds."""


class NumericsError(OrrlabError):
    """A numerical invariant failed: non-convergent quadrature, indefinite quadratic form, NaN state."""


class ConfigError(OrrlabError):
    """Run-configuration rejection. Collects every schema problem, one per line."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("\n".join(self.problems))
