"""Exception types shared across the pipeline."""

from __future__ import annotations


class DocLensError(Exception):
    """Base class for all errors raised by this package."""


# --- document bundle loading ---

class MissingManifest(DocLensError):
    pass


class ManifestParse(DocLensError):
    def __init__(self, detail: str):
        super().__init__(f"manifest invalid: {detail}")
        self.detail = detail


class PageGap(DocLensError):
    def __init__(self, index: int):
        super().__init__(f"page index {index} missing from contiguous range")
        self.index = index


class BBoxOutOfBounds(DocLensError):
    def __init__(self, page: int, detail: str = ""):
        msg = f"bbox out of bounds on page {page}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)
        self.page = page


class IndexOutOfRange(DocLensError):
    def __init__(self, index: int, page_count: int):
        super().__init__(f"page index {index} outside 1..{page_count}")
        self.index = index
        self.page_count = page_count


# --- parsing tools ---

class ToolUnavailable(DocLensError):
    pass


class ToolProtocolError(DocLensError):
    pass


class ImageDecode(DocLensError):
    pass


class CropFailure(DocLensError):
    def __init__(self, page: int, element: int, cause: str):
        super().__init__(f"crop failed on page {page} element {element}: {cause}")
        self.page = page
        self.element = element
        self.cause = cause


# --- model gateway ---

class GatewayError(DocLensError):
    pass


class BackendUnavailable(GatewayError):
    pass


class ContextLimitExceeded(GatewayError):
    pass


class MalformedBackendReply(GatewayError):
    pass


class ImageTooLarge(GatewayError):
    """Backend rejected an image for its pixel size; triggers resolution fallback."""


# --- response parsing / stages ---

class UnparseableResponse(DocLensError):
    pass


class MissingField(DocLensError):
    def __init__(self, name: str):
        super().__init__(f"required field missing: {name}")
        self.name = name


class NavigationFailed(DocLensError):
    pass


class AllCandidatesUnparseable(DocLensError):
    pass


class JudgeUnparseable(DocLensError):
    pass


class TraceIncomplete(DocLensError):
    pass


class StageError(DocLensError):
    """Wraps an error raised inside one pipeline stage, tagged with the stage name."""

    def __init__(self, stage: str, cause: Exception, trace=None):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
        self.trace = trace  # partial RunTrace up to the failure
