from .log import *
from .instance import *
from .instanceIo import *
from .pathGenerator import *
from .surrogate import *
from .lpCore import *
from .protection import *
from .nkcpSolver import *
from .benchCell import *
from .bench import *
from . import testUtils
from .version import __version__
