from ._trialkit import *  # noqa: F401,F403
from ._trialkit import __doc__  # noqa: F401
