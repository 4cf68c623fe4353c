"""!Benchmark cells and the matrix run that links them

A BenchCell is one (instance, q, n, protected fraction, seed, method) combination of an experiment
matrix. It moves through the states ready -> running -> done or failed and calls its callbacks
on every state change. A MatrixRun is done when all of its cells are done.
"""
from collections import namedtuple

from .log import log

__all__ = ["CellKey", "BenchCell", "MatrixRun"]


class CellKey(namedtuple("CellKey", "instance q n fraction seed method")):
    """!Coordinates of a cell in the experiment matrix
    """
    __slots__ = ()

    def __str__(self):
        return "%s q=%s n=%s fraction=%s seed=%s %s" % self


class _StateMixin(object):
    """!States and callbacks shared by BenchCell and MatrixRun
    """
    Ready = "ready"
    Running = "running"
    Done = "done"
    Failed = "failed"
    DoneStates = frozenset((Done, Failed))
    AllStates = frozenset((Ready, Running)) | DoneStates

    def _initState(self, callFunc):
        self._state = self.Ready
        self._textMsg = ""
        self._callbacks = []
        if callFunc is not None:
            self.addCallback(callFunc)

    @property
    def state(self):
        return self._state

    @property
    def textMsg(self):
        return self._textMsg

    @property
    def isDone(self):
        return self._state in self.DoneStates

    @property
    def isActive(self):
        return self._state == self.Running

    @property
    def didFail(self):
        return self._state == self.Failed

    def addCallback(self, callFunc, callNow=False):
        """!Add a callback function

        @param[in] callFunc  callback function; it receives one argument: this object.
            It is called whenever the state changes, and immediately if already done or callNow is True.
        @param[in] callNow  if True, call callFunc immediately
        """
        if self.isDone:
            self._safeCall(callFunc)
            return
        self._callbacks.append(callFunc)
        if callNow:
            self._safeCall(callFunc)

    def removeCallback(self, callFunc):
        """!Remove a callback function; return True if it was present
        """
        try:
            self._callbacks.remove(callFunc)
        except ValueError:
            return False
        return True

    def setState(self, newState, textMsg=None):
        """!Set the state and call the callbacks; when done, drop all callbacks after calling them

        @throw RuntimeError if already done or newState is unknown
        """
        if self.isDone:
            raise RuntimeError("%s is done; cannot change state" % (self,))
        if newState not in self.AllStates:
            raise RuntimeError("Unknown state %s" % (newState,))
        self._state = newState
        if textMsg is not None:
            self._textMsg = str(textMsg)
        log.info(str(self))
        for callFunc in list(self._callbacks):
            self._safeCall(callFunc)
        if self.isDone:
            self._callbacks = []

    def _safeCall(self, callFunc):
        try:
            callFunc(self)
        except Exception as e:
            log.error("%s callback %s failed: %s" % (self, callFunc, e))


class BenchCell(_StateMixin):
    """!One cell of an experiment matrix

    The cell's result is "row", a dict of output columns, set when the cell is done.
    """
    def __init__(self, key, callFunc=None):
        """!Construct a BenchCell

        @param[in] key  a CellKey
        @param[in] callFunc  function to call when the state changes, or None
        """
        self.key = key
        self.row = None
        self._initState(callFunc)

    def start(self):
        self.setState(self.Running)

    def finish(self, row):
        """!Record the result row and mark the cell done
        """
        self.row = row
        self.setState(self.Done)

    def fail(self, reason):
        """!Mark the cell failed

        @param[in] reason  an exception, a twisted Failure or a string
        """
        if hasattr(reason, "getErrorMessage"):
            reason = reason.getErrorMessage()
        self.setState(self.Failed, textMsg=reason)

    def run(self, func):
        """!Run func(key) in this thread; its return value is the row. Exceptions fail the cell.
        """
        self.start()
        try:
            row = func(self.key)
        except Exception as e:
            self.fail("%s: %s" % (type(e).__name__, e))
        else:
            self.finish(row)

    def __str__(self):
        descr = "%s(%s, state=%s" % (type(self).__name__, self.key, self._state)
        if self._textMsg:
            descr += ", textMsg=%r" % (self._textMsg,)
        return descr + ")"

    __repr__ = __str__


class MatrixRun(_StateMixin):
    """!Link benchmark cells so that the run is done when all cells are done

    The run starts running when any cell does. It finishes as Done if every cell succeeded,
    else as Failed with a summary of the failed cells; either way every cell has a row or a message.
    """
    def __init__(self, cells, callFunc=None):
        """!Link a collection of cells

        @param[in] cells  a collection of BenchCell
        @param[in] callFunc  function to call when the run's state changes, or None
        """
        self.cells = list(cells)
        self._initState(callFunc)
        for cell in self.cells:
            if not cell.isDone:
                cell.addCallback(self.cellCallback)
        # in case all cells are already done
        self.cellCallback()

    @property
    def failedCells(self):
        return [cell for cell in self.cells if cell.didFail]

    def cellCallback(self, dumCell=None):
        """!Callback added to each cell

        @param[in] dumCell  cell issuing the callback (ignored)
        """
        if self.isDone:
            return
        if self._state == self.Ready and any(cell.isActive or cell.isDone for cell in self.cells):
            self.setState(self.Running)
        if not all(cell.isDone for cell in self.cells):
            return
        failedSummary = "; ".join("%s: %s" % (cell.key, cell.textMsg) for cell in self.failedCells)
        if failedSummary:
            self.setState(self.Failed, textMsg="Cell(s) failed: %s" % (failedSummary,))
        else:
            self.setState(self.Done, textMsg="")

    def __str__(self):
        numDone = sum(1 for cell in self.cells if cell.isDone)
        return "%s(cells=%d, done=%d, state=%s)" % (type(self).__name__, len(self.cells), numDone, self._state)

    __repr__ = __str__
