#!/usr/bin/env python
"""Tests of the experiment matrix: spec parsing, threaded runs, result CSV and plot data
"""
import json
import os
import shutil
import tempfile

from twisted.trial.unittest import TestCase

from srlgProtect import Columns, ExperimentSpec, InstanceIoError, InvalidParameterError, addGapColumn, \
    emitPlots, loadNetwork, makeCells, readExperimentSpec, readResultsCsv, runMatrix, runMatrixDeferred, \
    testUtils, workerCount, writeResultsCsv
from srlgProtect.bench import _BenchContext, _isMonotone

testUtils.init(__file__)


class BenchTest(TestCase):
    def setUp(self):
        self.tempDir = tempfile.mkdtemp(prefix="srlgProtectBench")
        self.ringPath = os.path.join(self.tempDir, "ring.graphml")
        with open(self.ringPath, "w") as f:
            f.write(testUtils.ringChordGraphml())
        self.surrogate = testUtils.trainedSurrogate(epochs=50)

    def tearDown(self):
        shutil.rmtree(self.tempDir)

    def makeSpec(self, instancePaths=None, **kwargs):
        specDict = dict(qList=(1,), nList=(2,), protectedFractions=(0.5,), tunnelCount=4, expansion=5,
            tolerance=1e-4, timeLimit=60.0)
        specDict.update(kwargs)
        return ExperimentSpec(instancePaths or [self.ringPath], **specDict)

    def checkRows(self, rows, spec):
        self.assertEqual(len(rows), spec.numCells)
        for row in rows:
            self.assertEqual(set(row), set(Columns))
            self.assertEqual(row["status"], "ok")
            self.assertEqual(row["termination"], "converged")
            self.assertTrue(row["feasible"])
            self.assertIs(row["lp_monotone"], True)
        neural = [row for row in rows if row["method"] == "NKCP"]
        self.assertTrue(all(isinstance(row["gap"], float) for row in neural))
        self.assertTrue(all(row["gap"] == "" for row in rows if row["method"] == "NKCP-R"))

    def testRunMatrix(self):
        spec = self.makeSpec()
        states = []
        rows = runMatrix(spec, surrogate=self.surrogate, callFunc=lambda run: states.append(run.state))
        self.checkRows(rows, spec)
        self.assertEqual([row["method"] for row in rows], ["NKCP", "NKCP-R"])
        self.assertEqual(states, ["running", "done"])

    def testDeferred(self):
        spec = self.makeSpec(seeds=(0, 1))
        syncRows = runMatrix(spec, surrogate=self.surrogate)

        def checkResult(rows):
            self.checkRows(rows, spec)
            for rowA, rowB in zip(rows, syncRows):
                self.assertEqual(rowA["seed"], rowB["seed"])
                self.assertEqual(rowA["method"], rowB["method"])
                self.assertAlmostEqual(rowA["exact_objective"], rowB["exact_objective"])
                self.assertEqual(rowA["iterations"], rowB["iterations"])

        d = runMatrixDeferred(spec, workers=2, surrogate=self.surrogate)
        d.addCallback(checkResult)
        return d

    def testFailedCell(self):
        missingPath = os.path.join(self.tempDir, "missing.graphml")
        spec = self.makeSpec(instancePaths=[missingPath, self.ringPath], methods=("NKCP-R",))

        def checkResult(rows):
            self.assertEqual([row["status"] for row in rows], ["failed", "ok"])
            self.assertIn("missing.graphml", rows[0]["message"])
            self.assertFalse(rows[0]["feasible"])

        states = []
        d = runMatrixDeferred(spec, workers=1, callFunc=lambda run: states.append(run.state))
        d.addCallback(checkResult)
        d.addCallback(lambda dum: self.assertEqual(states[-1], "failed"))
        return d

    def testCsvAndPlots(self):
        spec = self.makeSpec()
        rows = runMatrix(spec, surrogate=self.surrogate)
        text = writeResultsCsv(rows)
        self.assertEqual(text.splitlines()[0], ",".join(Columns))
        readRows = readResultsCsv(text)
        self.assertEqual(len(readRows), 2)
        self.assertEqual(readRows[0]["feasible"], "true")
        self.assertEqual(readRows[0]["lp_monotone"], "true")
        self.assertAlmostEqual(float(readRows[0]["gap"]), rows[0]["gap"])

        plotDir = os.path.join(self.tempDir, "plots")
        outDict = emitPlots(readRows, plotDir)
        self.assertEqual(sorted(outDict), ["cpu_ranked.tsv", "gap_scatter.tsv", "solved_counts.tsv"])
        with open(outDict["solved_counts.tsv"]) as f:
            lines = f.read().splitlines()
        self.assertEqual(lines[0], "method\tn\tq\tsolved\ttotal")
        self.assertEqual(lines[1:], ["NKCP\t2\t1\t1\t1", "NKCP-R\t2\t1\t1\t1"])
        with open(outDict["gap_scatter.tsv"]) as f:
            lines = f.read().splitlines()
        self.assertEqual(len(lines), 2)
        self.assertTrue(lines[1].endswith("\t0"))
        with open(outDict["cpu_ranked.tsv"]) as f:
            self.assertEqual(len(f.read().splitlines()), 3)
        self.assertRaises(InvalidParameterError, emitPlots, [], plotDir)

    def testMonotone(self):
        self.assertTrue(_isMonotone([]))
        self.assertTrue(_isMonotone([1.0, 1.0, 2.5]))
        self.assertTrue(_isMonotone([100.0, 100.0 - 1e-6]))
        self.assertFalse(_isMonotone([1.0, 2.0, 1.5]))

    def testRegressionWhileTraining(self):
        spec = self.makeSpec(methods=("NKCP-R",))
        context = _BenchContext(spec)
        # NKCP-R cells never wait for the surrogate
        with context._surrogateLock:
            row = context.solveCell(makeCells(spec)[0].key)
        self.assertEqual(row["termination"], "converged")
        self.assertIsNone(context.surrogate)

    def testGapColumn(self):
        base = dict((name, "") for name in Columns)
        base.update(instance="ring", q=1, n=3, fraction=0.4, seed=0)
        neural = dict(base, method="NKCP", exact_objective=110.0)
        plane = dict(base, method="NKCP-R", exact_objective=100.0)
        orphan = dict(base, method="NKCP", exact_objective=90.0, seed=1)
        addGapColumn([neural, plane, orphan])
        self.assertAlmostEqual(neural["gap"], 0.1)
        self.assertEqual(plane["gap"], "")
        self.assertEqual(orphan["gap"], "")

        rows = readResultsCsv(writeResultsCsv([neural, plane, orphan]))
        with open(emitPlots(rows, self.tempDir)["gap_scatter.tsv"]) as f:
            lines = f.read().splitlines()
        # the orphan scenario has no NKCP-R row; the other was never solved
        self.assertEqual(len(lines), 2)
        self.assertTrue(lines[1].endswith("\t1"))


class SpecTest(TestCase):
    def testRead(self):
        text = json.dumps(dict(instances=["a.graphml", "/abs/b.txt"], q=[1], n=[3, 6], time_limit=10,
            methods=["NKCP"], surrogate="approx.json"))
        spec = readExperimentSpec(text, baseDir="/data")
        self.assertEqual(spec.instancePaths, ("/data/a.graphml", "/abs/b.txt"))
        self.assertEqual(spec.surrogatePath, "/data/approx.json")
        self.assertEqual(spec.nList, (3, 6))
        self.assertEqual(spec.timeLimit, 10.0)
        self.assertEqual(spec.protectedFractions, (0.4, 0.8))
        self.assertEqual(spec.numCells, 2 * 1 * 2 * 2 * 1 * 1)
        self.assertEqual(len(makeCells(spec)), spec.numCells)
        self.assertEqual(makeCells(spec)[0].key.instance, "/data/a.graphml")

    def testBadSpec(self):
        self.assertRaises(InstanceIoError, readExperimentSpec, "[]")
        self.assertRaises(InstanceIoError, readExperimentSpec, "{")
        self.assertRaises(InstanceIoError, readExperimentSpec, json.dumps(dict(instances=["a"], colour="red")))
        self.assertRaises(InvalidParameterError, readExperimentSpec, json.dumps(dict(instances=[])))
        self.assertRaises(InvalidParameterError, ExperimentSpec, ["a"], methods=("SCIP",))
        self.assertRaises(InvalidParameterError, ExperimentSpec, ["a"], protectedFractions=(1.5,))
        self.assertRaises(InvalidParameterError, ExperimentSpec, ["a"], timeLimit=0)

    def testWorkerCount(self):
        self.assertEqual(workerCount(3), 3)
        self.patch(os, "environ", dict(SRLGPROTECT_WORKERS="4"))
        self.assertEqual(workerCount(), 4)
        self.patch(os, "environ", dict())
        self.assertEqual(workerCount(), 1)
        self.assertRaises(InvalidParameterError, workerCount, 0)
        self.assertRaises(InvalidParameterError, workerCount, "many")

    def testLoadNetwork(self):
        tempDir = tempfile.mkdtemp(prefix="srlgProtectSpec")
        self.addCleanup(shutil.rmtree, tempDir)
        filePath = os.path.join(tempDir, "ring.xml")
        with open(filePath, "w") as f:
            f.write(testUtils.ringChordGraphml())
        self.assertEqual(len(loadNetwork(filePath).links), 12)
        self.assertEqual(loadNetwork(filePath, epsilon=0.05).epsilon, 0.05)


if __name__ == '__main__':
    from unittest import main
    main()
