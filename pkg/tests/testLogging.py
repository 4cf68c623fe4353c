#!/usr/bin/env python
import os

from twisted.trial.unittest import TestCase
from srlgProtect import log, stopLogging, startFileLogging, LogLineParser

TestLogPath = os.path.join(os.path.abspath(os.path.dirname(__file__)), ".tests", "testLogging")
if not os.path.exists(os.path.dirname(TestLogPath)):
    os.makedirs(os.path.dirname(TestLogPath))

class LogTest(TestCase):
    logNum = 0 # number the log files so each test has its own log file

    def setUp(self):
        stopLogging()
        self.logFilePath = startFileLogging("%s_%i" % (TestLogPath, LogTest.logNum))
        LogTest.logNum += 1

    def tearDown(self):
        stopLogging()
        os.remove(self.logFilePath)

    def getLogInfo(self, filename):
        return LogLineParser().parseLogFile(filename)

    def testSimplestCase(self):
        logMsg = "I was just logged"
        log.info(logMsg)
        loggedInfo = self.getLogInfo(self.logFilePath)
        self.assertEqual(len(loggedInfo), 1) # only one line in log
        self.assertEqual(loggedInfo[0][1], "INFO")
        self.assertEqual(loggedInfo[0][2], logMsg)

    def testLevels(self):
        log.debug("round 1: lp objective 450")
        log.warn("tunnel T0 keeps only 2 of 3 paths")
        log.error("bad")
        levels = [info[1] for info in self.getLogInfo(self.logFilePath)]
        self.assertEqual(levels, ["DEBUG", "WARNING", "ERROR"])

    def testDoubleStart(self):
        self.assertTrue(log)
        self.assertRaises(RuntimeError, startFileLogging, TestLogPath + "_again")

    def testStop(self):
        stopLogging()
        os.remove(self.logFilePath)
        self.assertFalse(log)
        log.info("dropped") # default logger drops info
        self.logFilePath = startFileLogging("%s_%i" % (TestLogPath, LogTest.logNum))
        LogTest.logNum += 1
        self.assertEqual(self.getLogInfo(self.logFilePath), [])

    def testParseLine(self):
        stamp, level, msg = LogLineParser().parseLine("2024-03-05 07:08:09.123 WARNING:  merged links L1, L2")
        self.assertEqual((stamp.year, stamp.month, stamp.day), (2024, 3, 5))
        self.assertEqual((stamp.hour, stamp.minute, stamp.second), (7, 8, 9))
        self.assertEqual(stamp.microsecond, 123000)
        self.assertEqual(level, "WARNING")
        self.assertEqual(msg, "merged links L1, L2")

if __name__ == '__main__':
    from unittest import main
    main()
