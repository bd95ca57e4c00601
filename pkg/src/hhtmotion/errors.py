"""Exception types shared across the toolkit."""


class HhtMotionError(Exception):
    """Base class for all hhtmotion errors."""


# --- signal / decomposition ---

class SignalTooShort(HhtMotionError):
    pass


class NonFiniteSample(HhtMotionError):
    pass


class DegenerateSignal(HhtMotionError):
    pass


class TooFewExtrema(HhtMotionError):
    """Not enough extrema to fit an envelope.

    ``direction`` is set when raised for a projected multivariate signal.
    """

    def __init__(self, message, direction=None):
        super().__init__(message)
        self.direction = direction


class NoConvergence(HhtMotionError):
    pass


class BadDimension(HhtMotionError):
    pass


# --- motion-capture I/O ---

class BvhSyntaxError(HhtMotionError):
    def __init__(self, line, expected):
        super().__init__(f"line {line}: expected {expected}")
        self.line = line
        self.expected = expected


class FrameCountMismatch(HhtMotionError):
    pass


class UnknownChannelName(HhtMotionError):
    pass


class UnknownChannel(HhtMotionError):
    def __init__(self, name):
        super().__init__(f"unknown channel: {name}")
        self.name = name


class LengthMismatch(HhtMotionError):
    pass


# --- beats / audio ---

class BadTempo(HhtMotionError):
    pass


class AudioTooShort(HhtMotionError):
    pass


class NoPeriodicity(HhtMotionError):
    pass


class NoBeats(HhtMotionError):
    pass


class GridOutsideClip(HhtMotionError):
    pass


class WavFormatError(HhtMotionError):
    pass


# --- analysis ---

class BadBinning(HhtMotionError):
    pass


class TooFewFrequencies(HhtMotionError):
    pass


class TooFewIMFs(HhtMotionError):
    pass


# --- editing ---

class BadRange(HhtMotionError):
    pass


class SpecOutOfBounds(HhtMotionError):
    pass


class ChannelMismatch(HhtMotionError):
    def __init__(self, message, labels=None):
        super().__init__(message)
        self.labels = labels


class BlendSpecError(HhtMotionError):
    pass
