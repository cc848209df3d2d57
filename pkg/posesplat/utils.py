# Licensed under GPL version 3 - see LICENSE.rst
'''Exceptions and warnings shared by all parts of posesplat.'''
import warnings

__all__ = ['PoseSplatError', 'BodyModelError', 'GeometryError', 'DatasetError',
           'CheckpointError', 'NonFiniteError',
           'RenderDiagnosticsWarning', 'OptimizerWarning']


class PoseSplatError(Exception):
    '''Base class for all errors raised by posesplat.'''
    pass


class BodyModelError(PoseSplatError):
    pass


class GeometryError(PoseSplatError):
    pass


class DatasetError(PoseSplatError):
    pass


class CheckpointError(PoseSplatError):
    pass


class NonFiniteError(PoseSplatError):
    '''A loss or activation became NaN or infinite.

    Parameters
    ----------
    message : str
    diagnostics : dict
        Whatever the caller knows about the state when the problem
        was detected, e.g. the training step and the loss parts.
    '''
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = {} if diagnostics is None else dict(diagnostics)


class RenderDiagnosticsWarning(Warning):
    pass


class OptimizerWarning(Warning):
    pass


warnings.filterwarnings("always", ".*", RenderDiagnosticsWarning)
warnings.filterwarnings("always", ".*", OptimizerWarning)
