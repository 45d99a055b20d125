from .logfile import *
from .tasks import *
from .trajectory import *
from .agents import *
from .cleaning import *
from .endpoints import *
from .stats import *
from .pipeline import *
