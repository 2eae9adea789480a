"""Exception hierarchy shared by every podforge module."""


class PodforgeError(Exception):
    """Base class for all podforge-specific failures."""


# --- audio I/O and framing ---

class MalformedContainer(PodforgeError):
    """File is not a parseable RIFF/WAVE container."""


class UnsupportedEncoding(PodforgeError):
    """WAV container is valid but not 16-bit integer PCM."""


class IoFailure(PodforgeError):
    """Underlying filesystem read/write failed."""


class TooShort(PodforgeError):
    """Input audio is shorter than one analysis window."""


# --- data pipeline ---

class StageFailure(PodforgeError):
    """A cleaning/scorer stage raised; carries the failing stage's name."""

    def __init__(self, stage_name, message=""):
        self.stage_name = stage_name
        super().__init__(f"stage '{stage_name}' failed" + (f": {message}" if message else ""))


class EmptyAudio(PodforgeError):
    """Operation requires non-empty audio."""


class MissingScore(PodforgeError):
    """Record lacks the MOS value required by a quality filter."""


class TranscriberFailure(PodforgeError):
    """Transcriber could not produce text for the given audio."""


class MixedSpeakers(PodforgeError):
    """SFT corpus records must all share a single speaker id."""


class CodecMismatch(PodforgeError):
    """Audio token id outside the codec's [0, 1024) range."""


# --- codec ---

class InsufficientData(PodforgeError):
    """Too few training frames (or qualifying records) for codebook training."""


class InvalidToken(PodforgeError):
    """Decoder received a token id outside the codebook."""

    def __init__(self, token_id):
        self.token_id = token_id
        super().__init__(f"invalid audio token id {token_id}")


# --- token protocol ---

class EmptyCorpus(PodforgeError):
    """Vocabulary or model training requires a non-empty corpus."""


class NonAudioToken(PodforgeError):
    """A non-audio id appeared where only audio tokens are legal."""

    def __init__(self, position):
        self.position = position
        super().__init__(f"non-audio token at position {position}")


# --- sequence model backends ---

class BackendUnreachable(PodforgeError):
    """External generation backend could not be contacted."""


class BackendTimeout(PodforgeError):
    """External generation backend did not answer within the deadline."""


class InvalidBackendOutput(PodforgeError):
    """Backend replied with a non-200 status, malformed JSON, or out-of-vocab ids."""


# --- synthesis engine ---

class EmptyText(PodforgeError):
    """Text input was empty or all whitespace."""


class AllSentencesFailed(PodforgeError):
    """Every sentence of a synthesis request failed to generate."""


class RateMismatch(PodforgeError):
    """Waveforms being combined carry different sample rates."""


# --- evaluation ---

class ZeroDuration(PodforgeError):
    """Speed ratio is undefined for zero synthesized duration."""
