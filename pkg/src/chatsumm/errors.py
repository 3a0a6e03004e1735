"""Exception hierarchy shared by every chatsumm module."""

from __future__ import annotations


class ChatSummError(Exception):
    """Base class for all library errors."""


# transcripts / ingest
class EmptyInput(ChatSummError):
    pass


class MalformedRecord(ChatSummError):
    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


class UnknownSpeaker(ChatSummError):
    def __init__(self, speaker_id: str):
        super().__init__(f"speaker {speaker_id!r} missing from role map")
        self.speaker_id = speaker_id


# topic models
class EmptyCorpus(ChatSummError):
    pass


class InvalidHyperparam(ChatSummError):
    pass


class RankDeficient(ChatSummError):
    """Requested more LSI topics than the matrix rank supports.

    ``model`` holds the truncated fit with ``achieved_k`` topics.
    """

    def __init__(self, requested_k: int, achieved_k: int, model=None):
        super().__init__(f"requested {requested_k} topics but matrix rank is {achieved_k}")
        self.requested_k = requested_k
        self.achieved_k = achieved_k
        self.model = model


# punctuation
class SegmentSizeInvalid(ChatSummError):
    pass


class PredictorFailure(ChatSummError):
    pass


# remote services
class RemoteTimeout(ChatSummError, TimeoutError):
    pass


class ProtocolError(ChatSummError):
    def __init__(self, status: int | None, body: str):
        excerpt = body[:200]
        super().__init__(f"protocol error (status={status}): {excerpt}")
        self.status = status
        self.body = excerpt


# embeddings
class FileUnreadable(ChatSummError):
    pass


class NoValidRows(ChatSummError):
    pass


class DimensionMismatch(ChatSummError, ValueError):
    pass


class RemoteEncoderFailure(ChatSummError):
    pass


# metrics
class LengthMismatch(ChatSummError, ValueError):
    pass


# bandit / arms
class RewardOutOfRange(ChatSummError, ValueError):
    pass


class Uninitialized(ChatSummError):
    pass


class ArmFailure(ChatSummError):
    def __init__(self, arm_id: int, transcript_id: str, cause: BaseException | None = None):
        super().__init__(f"arm {arm_id} failed on transcript {transcript_id!r}: {cause}")
        self.arm_id = arm_id
        self.transcript_id = transcript_id
        self.cause = cause


# pipeline / cli
class PipelineStepError(ChatSummError):
    """Wraps a module error with the index of the summarization step that raised it."""

    def __init__(self, step: int, name: str, cause: BaseException):
        super().__init__(f"step {step} ({name}) failed: {cause}")
        self.step = step
        self.name = name
        self.cause = cause


class ConfigError(ChatSummError):
    pass


class IoError(ChatSummError):
    """An output file could not be written or re-read."""
