#!/usr/bin/env python
"""Tests of SNDLIB / GraphML parsing, demand generation and JSON exchange
"""
import json
import math
import os
import tempfile
import unittest

from srlgProtect import DemandGenSpec, GraphmlDefaults, GraphmlParseError, InstanceIoError, \
    InvalidParameterError, SndlibParseError, assignProtection, generateDemands, loadText, parseGraphml, \
    parseSndlib, readInstance, readPathSets, readSolution, readSplits, readSurrogate, testUtils, validate, \
    writeInstance, writePathSets, writeSplits, writeSurrogate
from srlgProtect.instanceIo import SndlibParser

SndlibText = """?SNDlib native format; type: network; version: 1.0
# small network

META (
  granularity = 1.0
)

NODES (
  A ( 0.0 0.0 )
  B ( 1.0 0.0 )
  C ( 1.0 1.0 )
)

LINKS (
  L1 ( A B ) 40.00 0.00 2.00 0.00 ( 10.00 5.00 )
  L2 ( B C ) 0.00 0.00 0.00 0.00 ( 10.00 20.00 40.00 50.00 )
  L3 ( C A ) 0.00 0.00 0.00 0.00 ( )
  L4 ( B A ) 10.00 0.00 0.00 0.00 ( ) # parallels L1
)

DEMANDS (
  D1 ( A C ) 1 12.5 UNLIMITED
  D2 ( B A ) 1 3.0 UNLIMITED
)
"""


class TestSndlib(unittest.TestCase):
    def testParse(self):
        instance = parseSndlib(SndlibText)
        self.assertEqual(instance.nodes, ("A", "B", "C"))
        self.assertEqual(instance.linkIds, ("L1", "L2", "L3"))
        l1, l2, l3 = instance.links
        self.assertEqual((l1.capacity, l1.cost), (50.0, 2.0))
        self.assertEqual((l2.capacity, l2.cost), (40.0, 2.0))
        self.assertTrue(math.isinf(l3.capacity))
        self.assertEqual(l3.cost, 1.0)
        self.assertEqual([(t.id, t.source, t.dest, t.demand, t.protected) for t in instance.tunnels],
            [("D1", "A", "C", 12.5, False), ("D2", "B", "A", 3.0, False)])
        self.assertEqual(instance.srlgs, ())
        self.assertEqual(validate(instance), [])

    def testEpsilon(self):
        self.assertEqual(parseSndlib(SndlibText, epsilon=0.1).epsilon, 0.1)

    def testMissingSection(self):
        text = SndlibText[:SndlibText.index("DEMANDS")]
        self.assertRaises(SndlibParseError, parseSndlib, text)

    def testUnclosedSection(self):
        text = SndlibText.rstrip().rstrip(")")
        self.assertRaises(SndlibParseError, parseSndlib, text)

    def testAdmissiblePaths(self):
        text = SndlibText + """
ADMISSIBLE_PATHS (
  D1 (
    P_0 ( L3 )
    P_1 ( L1 L2 )
  )
  D2 (
    P_0 ( L1 )
  )
)
"""
        instance = parseSndlib(text)
        self.assertEqual(instance.linkIds, ("L1", "L2", "L3"))
        self.assertEqual(len(instance.tunnels), 2)
        sectionDict = SndlibParser().splitSections(text)
        self.assertEqual(len(sectionDict["ADMISSIBLE_PATHS"]), 7)
        self.assertEqual(len(sectionDict["DEMANDS"]), 2)

    def testUnbalancedSection(self):
        text = SndlibText + "ADMISSIBLE_PATHS (\n  D1 (\n    P_0 ( L3 ) )\n  )\n)\n"
        self.assertRaises(SndlibParseError, parseSndlib, text)

    def testUnknownNode(self):
        text = SndlibText.replace("L3 ( C A )", "L3 ( C Z )")
        try:
            parseSndlib(text)
        except SndlibParseError as e:
            self.assertEqual(e.lineNum, 17)
            self.assertIn("Z", str(e))
        else:
            self.fail("unknown node accepted")

    def testBadEntry(self):
        text = SndlibText.replace("1 12.5 UNLIMITED", "1 lots UNLIMITED")
        self.assertRaises(SndlibParseError, parseSndlib, text)

    def testLinkMapping(self):
        self.assertEqual(SndlibParser.linkCapacity(0.0, [(10.0, 1.0), (40.0, 3.0)]), 40.0)
        self.assertEqual(SndlibParser.linkCost(0.0, [(0.0, 5.0), (10.0, 30.0)]), 3.0)
        self.assertEqual(SndlibParser.linkCost(7.0, [(10.0, 30.0)]), 7.0)


class TestGraphml(unittest.TestCase):
    def testRingChord(self):
        instance = parseGraphml(testUtils.ringChordGraphml())
        self.assertEqual(len(instance.nodes), 8)
        self.assertEqual(len(instance.links), 12)
        self.assertEqual(instance.links[0].id, "e00")
        for link in instance.links:
            self.assertEqual(link.capacity, 10000.0)
            self.assertEqual(link.cost, 1.0)
        self.assertEqual(validate(instance), [])

    def testDefaults(self):
        text = testUtils._graphmlText(["a", "b"], [("a", "b", 0, 1)], withCapacity=False)
        instance = parseGraphml(text, defaults=GraphmlDefaults(capacity=123.0))
        self.assertEqual(instance.links[0].capacity, 123.0)

    def testSelfLoopAndParallel(self):
        text = testUtils._graphmlText(["a", "b"],
            [("a", "b", 1.0e9, 1), ("a", "a", 1.0e9, 1), ("b", "a", 2.0e9, 3)])
        instance = parseGraphml(text)
        self.assertEqual(len(instance.links), 1)
        self.assertEqual(instance.links[0].capacity, 3000.0)
        self.assertEqual(instance.links[0].cost, 1.0)

    def testDanglingEdge(self):
        text = testUtils._graphmlText(["a", "b"], [("a", "c", 1.0e9, 1)])
        try:
            parseGraphml(text)
        except GraphmlParseError as e:
            self.assertIsNotNone(e.lineNum)
        else:
            self.fail("dangling edge accepted")

    def testMalformed(self):
        self.assertRaises(GraphmlParseError, parseGraphml, "<graphml><graph>")
        self.assertRaises(GraphmlParseError, parseGraphml, "<graphml/>")


class TestDemands(unittest.TestCase):
    def setUp(self):
        self.topology = parseGraphml(testUtils.ringChordGraphml())

    def testGenerate(self):
        spec = DemandGenSpec(10, demandRange=(5.0, 50.0), protectedFraction=0.4, seed=3)
        instance = generateDemands(self.topology, spec)
        self.assertEqual(len(instance.tunnels), 10)
        self.assertEqual(len(instance.protectedTunnels), 4)
        self.assertEqual(len(set((t.source, t.dest) for t in instance.tunnels)), 10)
        for tunnel in instance.tunnels:
            self.assertNotEqual(tunnel.source, tunnel.dest)
            self.assertTrue(5.0 <= tunnel.demand <= 50.0)
        self.assertEqual(instance.tunnels[0].id, "T0")
        self.assertEqual(generateDemands(self.topology, spec), instance)
        self.assertNotEqual(generateDemands(self.topology, DemandGenSpec(10, seed=4)).tunnels, instance.tunnels)

    def testTooMany(self):
        self.assertRaises(InvalidParameterError, generateDemands, self.topology, DemandGenSpec(57))

    def testBadSpec(self):
        self.assertRaises(InvalidParameterError, DemandGenSpec, 0)
        self.assertRaises(InvalidParameterError, DemandGenSpec, 5, demandRange=(0.0, 1.0))
        self.assertRaises(InvalidParameterError, DemandGenSpec, 5, protectedFraction=1.5)

    def testAssignProtection(self):
        instance = parseSndlib(SndlibText)
        self.assertEqual(len(assignProtection(instance, 0.8, seed=1).protectedTunnels), 2)
        self.assertEqual(len(assignProtection(instance, 0.4, seed=1).protectedTunnels), 1)
        self.assertEqual(len(assignProtection(instance, 0.0).protectedTunnels), 0)
        self.assertRaises(InvalidParameterError, assignProtection, instance, -0.1)


class TestJson(unittest.TestCase):
    def testInstance(self):
        instance = testUtils.threePathInstance(q=2)
        text = writeInstance(instance)
        data = json.loads(text)
        self.assertIsNone(data["links"][0]["capacity"])
        self.assertEqual(readInstance(text), instance)
        self.assertRaises(InstanceIoError, readInstance, '{"nodes": []}')
        self.assertRaises(InstanceIoError, readInstance, "not json")

    def testPathsAndSplits(self):
        pathSet = testUtils.threePathSet()
        self.assertEqual(readPathSets(writePathSets(pathSet), pathSet.instance), pathSet)
        splits = {"T0": {"p1": 0.2, "p2": 0.4, "p3": 0.4}}
        self.assertEqual(readSplits(writeSplits(splits)), splits)
        self.assertRaises(InstanceIoError, readPathSets, '{"paths": {}}', pathSet.instance)
        self.assertRaises(InstanceIoError, readSplits, '[1, 2]')

    def testSurrogate(self):
        surrogate = testUtils.squareNeuronSurrogate()
        self.assertEqual(readSurrogate(writeSurrogate(surrogate)), surrogate)
        self.assertRaises(InstanceIoError, readSurrogate, '{"neurons": []}')

    def testSolution(self):
        data = dict(splits={}, reservations={}, objective=dict(reservation_cost=0, routing_cost=0),
            stats=dict(iterations=1, cuts=0, wall_ms=1.0), feasible=True)
        self.assertEqual(readSolution(json.dumps(data)), data)
        del data["stats"]
        self.assertRaises(InstanceIoError, readSolution, json.dumps(data))

    def testLoadText(self):
        missingPath = os.path.join(tempfile.gettempdir(), "srlgProtect-no-such-file.json")
        try:
            loadText(missingPath)
        except InstanceIoError as e:
            self.assertIn(missingPath, str(e))
        else:
            self.fail("missing file read")


if __name__ == "__main__":
    unittest.main()
