"""Domain error hierarchy.

Every rule violation raises a subclass of DomainError carrying a stable
machine-readable code and the HTTP status the service layer maps it to.
"""


class DomainError(Exception):
    code = "DomainError"
    http_status = 400

    def __init__(self, detail: str = ""):
        super().__init__(detail or self.code)
        self.detail = detail or self.code


class StaleHeartbeat(DomainError):
    code = "StaleHeartbeat"
    http_status = 409


class MalformedContext(DomainError):
    code = "MalformedContext"
    http_status = 422


class TeacherBusy(DomainError):
    code = "TeacherBusy"
    http_status = 409


class NudgeExpired(DomainError):
    code = "NudgeExpired"
    http_status = 410


class NudgeNotPending(DomainError):
    code = "NudgeNotPending"
    http_status = 409


class TicketTerminal(DomainError):
    code = "TicketTerminal"
    http_status = 409


class TicketNotFound(DomainError):
    code = "TicketNotFound"
    http_status = 404


class NudgeNotFound(DomainError):
    code = "NudgeNotFound"
    http_status = 404


class DuplicateSession(DomainError):
    code = "DuplicateSession"
    http_status = 409


class SessionNotFound(DomainError):
    code = "SessionNotFound"
    http_status = 404


class SessionClosed(DomainError):
    code = "SessionClosed"
    http_status = 409


class SessionLive(DomainError):
    code = "SessionLive"
    http_status = 409


class NotParticipant(DomainError):
    code = "NotParticipant"
    http_status = 403


class EditForbidden(DomainError):
    code = "EditForbidden"
    http_status = 403


class AlreadyRecorded(DomainError):
    code = "AlreadyRecorded"
    http_status = 409


class ScoreOutOfRange(DomainError):
    code = "ScoreOutOfRange"
    http_status = 422


class NoAssignmentsConfigured(DomainError):
    code = "NoAssignmentsConfigured"
    http_status = 409


class NoSessionsWithControls(DomainError):
    code = "NoSessionsWithControls"
    http_status = 409


class InvalidConfig(DomainError):
    code = "InvalidConfig"
    http_status = 422


class CorruptLog(DomainError):
    code = "CorruptLog"
    http_status = 500


class Unauthorized(DomainError):
    code = "Unauthorized"
    http_status = 401
