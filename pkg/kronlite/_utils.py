from collections import namedtuple


class KronError(Exception):
    """
    Base class for the errors raised by kronlite.  Concrete errors also
    derive from a builtin exception type (ValueError, ArithmeticError...)
    so callers can catch them by category.

    Pipeline layers call locate() while an error propagates, which records
    the step (and iteration, for iterative algorithms) where it surfaced.
    """

    def __init__(self, *args):
        super(KronError, self).__init__(*args)
        self.provenance = []

    def locate(self, step, iteration=None):
        if iteration is None:
            self.provenance.insert(0, str(step))
        else:
            self.provenance.insert(0, "%s iteration %d" % (step, iteration))
        return self

    @property
    def step(self):
        if self.provenance:
            return self.provenance[-1]
        return None

    def __str__(self):
        msg = super(KronError, self).__str__()
        if self.provenance:
            return "%s: %s" % (" > ".join(self.provenance), msg)
        return msg


class Violation(namedtuple('Violation', ['kind', 'subject', 'message'])):
    """
    A single failed structural check.  *kind* is a short stable tag,
    *subject* the offending node, edge or block position.
    """
    __slots__ = ()

    def __str__(self):
        return "%s(%s): %s" % (self.kind, self.subject, self.message)