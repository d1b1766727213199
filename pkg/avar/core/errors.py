class AvarError(Exception):
    pass

class AvarInputError(AvarError, ValueError):
    """bad dimensions, empty sets, zero measures, malformed specs"""
    pass

class PreconditionError(AvarError):
    """the operator/certificate does not satisfy the hypothesis of the call"""
    pass

class DegenerateConstraintError(AvarInputError):
    """the projection on E or Gamma does not separate the nullspace"""
    pass

class VerificationError(AvarError):
    pass
