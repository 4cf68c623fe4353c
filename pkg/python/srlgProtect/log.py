"""!Process-wide logging for srlgProtect

Library code writes to the global "log" object; what happens to the messages
depends on which logger is installed:
- by default only warnings and worse are written to stderr
- startFileLogging sends everything to a time-stamped file (and warnings to stdout)
"""
import datetime
import logging
import os
import sys
import time

import pyparsing as pp

logging.Formatter.converter = time.gmtime

__all__ = ["log", "LogLineParser", "startFileLogging", "stopLogging"]

LogFormat = "%(asctime)s.%(msecs)03d %(levelname)s:  %(message)s"
LogDateFormat = "%Y-%m-%d %H:%M:%S"


def startFileLogging(basePath, consoleLevel=logging.WARNING):
    """!Start logging to a file

    @param[in] basePath  path prefix of the log file; the date and ".log" are appended,
        hence "runs/solve" writes to "runs/solve_<yy>-<mm>-<dd>T<hh>:<mm>:<ss>.log"
    @param[in] consoleLevel  messages at this level and above are echoed to stdout
    @return the full path of the log file

    @throw RuntimeError if a file logger is already active or the directory does not exist
    """
    if log:
        raise RuntimeError("%s logger already active" % (log,))
    logger = FileLogger(basePath, consoleLevel=consoleLevel)
    log.replaceLogger(logger)
    return logger.filePath


def stopLogging():
    """!Stop the current logger and fall back to the stderr logger
    """
    log.stopLogging()


class BaseLogger(object):
    """!Base class for loggers

    Subclasses must override "log" and "stopLogging".
    """
    DEBUG = logging.DEBUG
    INFO = logging.INFO
    WARNING = logging.WARNING
    ERROR = logging.ERROR
    CRITICAL = logging.CRITICAL

    def log(self, logMsg, logLevel):
        """!Log a message

        @param[in] logMsg  message to log (a str)
        @param[in] logLevel  one of DEBUG, INFO, WARNING, ERROR, CRITICAL
        """
        raise NotImplementedError()

    def stopLogging(self):
        raise NotImplementedError()

    def __repr__(self):
        return "%s" % (type(self).__name__,)


class DefaultLogger(BaseLogger):
    """!Logger that writes warnings and worse to stderr

    Debug and info messages are dropped: solver loops are chatty.
    """
    _LevelNameDict = {
        logging.WARNING: "Warning",
        logging.ERROR: "Error",
        logging.CRITICAL: "Critical",
    }

    def log(self, logMsg, logLevel):
        if logLevel < self.WARNING:
            return
        sys.stderr.write("%s [%s] %s\n" % (self, self._LevelNameDict.get(logLevel, logLevel), logMsg))

    def stopLogging(self):
        pass


class FileLogger(BaseLogger):
    """!Logger that writes every message to a file using the logging module
    """
    LoggerName = "srlgProtect"

    def __init__(self, basePath, consoleLevel=logging.WARNING):
        """!Construct a FileLogger

        @param[in] basePath  path prefix of the log file (see startFileLogging)
        @param[in] consoleLevel  minimum level echoed to stdout
        """
        dirPath = os.path.dirname(os.path.abspath(basePath))
        if not os.path.isdir(dirPath):
            raise RuntimeError("Directory %r does not exist" % (dirPath,))
        self.filePath = "%s_%s.log" % (basePath, datetime.datetime.now().strftime("%y-%m-%dT%H:%M:%S"))

        logger = logging.getLogger(self.LoggerName)
        logger.setLevel(logging.DEBUG)
        logger.propagate = False

        fh = logging.FileHandler(self.filePath)
        fh.setLevel(logging.DEBUG)
        fh.setFormatter(logging.Formatter(fmt=LogFormat, datefmt=LogDateFormat))

        console = logging.StreamHandler(sys.stdout)
        console.setLevel(consoleLevel)
        console.setFormatter(logging.Formatter("%(levelname)s: %(message)s"))

        logger.addHandler(fh)
        logger.addHandler(console)

        self.logger = logger
        self.fh = fh
        self.console = console

    def log(self, logMsg, logLevel):
        self.logger.log(logLevel, logMsg)

    def stopLogging(self):
        """!Stop logging and close the log file
        """
        self.logger.removeHandler(self.fh)
        self.logger.removeHandler(self.console)
        self.fh.close()
        self.logger = None
        self.fh = None
        self.console = None

    def __repr__(self):
        return "%s(%s)" % (type(self).__name__, self.filePath)


class LogManager(object):
    """!Holds the current logger, so the logger can be swapped without touching callers
    """
    def __init__(self):
        self.logger = DefaultLogger()

    def log(self, logMsg, logLevel):
        self.logger.log(logMsg, logLevel)

    def replaceLogger(self, logger):
        """!Stop the current logger and switch to a new one

        @param[in] logger  an instance of BaseLogger
        """
        self.logger.stopLogging()
        self.logger = logger

    def stopLogging(self):
        self.logger.stopLogging()
        self.logger = DefaultLogger()

    def debug(self, logMsg):
        self.logger.log(logMsg, self.logger.DEBUG)

    def info(self, logMsg):
        self.logger.log(logMsg, self.logger.INFO)

    def warn(self, logMsg):
        self.logger.log(logMsg, self.logger.WARNING)

    def error(self, logMsg):
        self.logger.log(logMsg, self.logger.ERROR)

    def critical(self, logMsg):
        self.logger.log(logMsg, self.logger.CRITICAL)

    def __repr__(self):
        return "%s" % (self.logger,)

    def __bool__(self):
        """!True if a logger other than the default stderr logger is installed
        """
        return not isinstance(self.logger, DefaultLogger)


class LogLineParser(object):
    """!Parse lines written by FileLogger back into (datetime, level, message)
    """
    def __init__(self):
        def twoDigit(name):
            return pp.Word(pp.nums, exact=2).setResultsName(name).setParseAction(lambda t: int(t[0]))
        year = pp.Word(pp.nums, exact=4).setResultsName("year").setParseAction(lambda t: int(t[0]))
        ms = pp.Word(pp.nums, exact=3).setResultsName("ms").setParseAction(lambda t: int(t[0]))
        dash = pp.Suppress("-")
        colon = pp.Suppress(":")
        period = pp.Suppress(".")
        level = pp.oneOf("DEBUG INFO WARNING ERROR CRITICAL").setResultsName("level")
        msg = pp.restOfLine.setResultsName("msg").setParseAction(lambda t: t[0].strip())
        self.grammar = year + dash + twoDigit("month") + dash + twoDigit("day") \
            + twoDigit("hour") + colon + twoDigit("minute") + colon + twoDigit("second") + period + ms \
            + level + colon + msg

    def parseLine(self, line):
        """!Parse one log line

        @return three items: datetime stamp, level name, message
        """
        ppOut = self.grammar.parseString(line, parseAll=True)
        stamp = datetime.datetime(
            ppOut.year, ppOut.month, ppOut.day,
            ppOut.hour, ppOut.minute, ppOut.second,
            ppOut.ms * 1000,
        )
        return stamp, ppOut.level, ppOut.msg

    def parseLogFile(self, logFile):
        """!Parse a log file; blank lines are skipped

        @return a list of (datetime, level, message)
        """
        outList = []
        with open(logFile, "r") as f:
            for loggedLine in f:
                loggedLine = loggedLine.strip()
                if loggedLine:
                    outList.append(self.parseLine(loggedLine))
        return outList


log = LogManager()
