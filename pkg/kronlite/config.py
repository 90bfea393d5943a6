"""
Numerical tolerances and run configuration.

Defaults may be overridden process-wide through KRONLITE_* environment
variables, e.g. ``KRONLITE_TOL_GAMMA=1e-7``.
"""

import os


__all__ = ['Tolerances', 'get_tolerances', 'reset_tolerances', 'RunConfig']


_DEFAULTS = (
    ('tau_sym', 1e-10),
    ('tau_solve', 1e-9),
    ('sigma_min', 1e-12),
    ('kappa_max', 1e12),
    ('tau_zero', 1e-9),
    ('tol_gamma', 1e-6),
    ('round_trip_tol', 1e-8),
)

_ENV_PREFIX = 'KRONLITE_'


class Tolerances(object):
    """
    Immutable set of numerical thresholds shared by all algorithms.

    * tau_sym: relative symmetry tolerance
    * tau_solve: relative residual tolerance of linear solves
    * sigma_min: relative smallest singular value below which a block is
      treated as singular
    * kappa_max: largest acceptable condition number
    * tau_zero: relative magnitude below which a block counts as zero
    * tol_gamma: relative tolerance of the sibling test
    * round_trip_tol: relative error accepted by round-trip checks
    """

    __slots__ = tuple(name for name, _ in _DEFAULTS)

    def __init__(self, **kwargs):
        unknown = set(kwargs) - set(self.__slots__)
        if unknown:
            raise TypeError("unknown tolerance(s): %s"
                            % ", ".join(sorted(unknown)))
        for name, default in _DEFAULTS:
            value = float(kwargs.get(name, default))
            if not value > 0:
                raise ValueError("tolerance %s must be > 0, got %r"
                                 % (name, value))
            object.__setattr__(self, name, value)

    def __setattr__(self, name, value):
        raise AttributeError("Tolerances are immutable; use replace()")

    def replace(self, **kwargs):
        values = self.as_dict()
        values.update((k, v) for k, v in kwargs.items() if v is not None)
        return type(self)(**values)

    def as_dict(self):
        return dict((name, getattr(self, name)) for name in self.__slots__)

    @classmethod
    def from_env(cls, environ=None):
        if environ is None:
            environ = os.environ
        values = {}
        for name, _ in _DEFAULTS:
            key = _ENV_PREFIX + name.upper()
            if key in environ:
                try:
                    values[name] = float(environ[key])
                except ValueError:
                    raise ValueError("invalid value for %s: %r"
                                     % (key, environ[key]))
        return cls(**values)

    def __eq__(self, other):
        if not isinstance(other, Tolerances):
            return NotImplemented
        return self.as_dict() == other.as_dict()

    def __ne__(self, other):
        return not self == other

    def __hash__(self):
        return hash(tuple(sorted(self.as_dict().items())))

    def __repr__(self):
        return "Tolerances(%s)" % ", ".join(
            "%s=%g" % (name, getattr(self, name)) for name in self.__slots__)


_default_tolerances = None


def get_tolerances(tol=None):
    """
    Return *tol*, or the process-wide defaults (read from the environment
    on first use) if *tol* is None.
    """
    global _default_tolerances
    if tol is not None:
        if not isinstance(tol, Tolerances):
            raise TypeError("expected a Tolerances instance, got %r"
                            % type(tol).__name__)
        return tol
    if _default_tolerances is None:
        _default_tolerances = Tolerances.from_env()
    return _default_tolerances


def reset_tolerances():
    """Forget the cached defaults so the environment is read again."""
    global _default_tolerances
    _default_tolerances = None


class RunConfig(object):
    """
    Settings of one command-line run.
    """

    def __init__(self, tolerances=None, seeds=(0,), input=None, output=None,
                 emit_trace=None, emit_dot=None, jobs=1):
        self.tolerances = get_tolerances(tolerances)
        self.seeds = tuple(seeds)
        self.input = input
        self.output = output
        self.emit_trace = emit_trace
        self.emit_dot = emit_dot
        if jobs < 1:
            raise ValueError("jobs must be >= 1, got %d" % jobs)
        self.jobs = jobs

    @property
    def seed(self):
        return self.seeds[0]

    def __repr__(self):
        return ("RunConfig(tolerances=%r, seeds=%r, input=%r, output=%r, "
                "emit_trace=%r, emit_dot=%r, jobs=%d)"
                % (self.tolerances, self.seeds, self.input, self.output,
                   self.emit_trace, self.emit_dot, self.jobs))
