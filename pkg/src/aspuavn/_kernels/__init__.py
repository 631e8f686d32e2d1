"""Kernel backend selection.

Imports the compiled extension when present, otherwise the numpy fallback.
Set ASPUAVN_PURE=1 to force the fallback (used by the backend-equivalence
tests and the benchmark).
"""

import os

if os.environ.get("ASPUAVN_PURE") == "1":
    from aspuavn._kernels._numpy import (  # noqa: F401
        BACKEND, any_match, in_range_mask, match_mask, nonself_mask)
else:
    try:
        from aspuavn._kernels._core import (  # type: ignore # noqa: F401
            BACKEND, any_match, in_range_mask, match_mask, nonself_mask)
    except ImportError:
        from aspuavn._kernels._numpy import (  # noqa: F401
            BACKEND, any_match, in_range_mask, match_mask, nonself_mask)
