#!/usr/bin/env python
"""Tests of Yen's k shortest paths and SRLG-disjoint path selection
"""
import unittest

from srlgProtect import InstanceError, InsufficientPathsError, InvalidParameterError, Link, NetworkInstance, \
    Path, PathGenConfig, Tunnel, buildPathsets, disjointnessOf, enumerateSrlgs, numberSrlgs, parseGraphml, \
    selectDisjoint, testUtils, yenKsp
from srlgProtect import pathGenerator


def _gridInstance():
    """3x3 grid a..i with unit hops; link a-b has cost 5
    """
    rows = ["abc", "def", "ghi"]
    links = []
    for r in range(3):
        for c in range(3):
            node = rows[r][c]
            if c < 2:
                links.append(Link("%s%s" % (node, rows[r][c + 1]), node, rows[r][c + 1], 100.0,
                    5.0 if node == "a" else 1.0))
            if r < 2:
                links.append(Link("%s%s" % (node, rows[r + 1][c]), node, rows[r + 1][c], 100.0, 1.0))
    return NetworkInstance("abcdefghi", links, [Tunnel("T0", "a", "i", 10.0, True)])


class TestYen(unittest.TestCase):
    def setUp(self):
        self.instance = _gridInstance()

    def testHopOrder(self):
        paths = yenKsp(self.instance, "a", "i", 10, tunnelId="T0")
        # a 3x3 grid has exactly 6 monotone 4-hop paths from corner to corner
        self.assertEqual([path.hopCount for path in paths[:6]], [4] * 6)
        self.assertEqual(len(paths), 10)
        self.assertTrue(all(paths[i].cost <= paths[i + 1].cost for i in range(len(paths) - 1)))
        self.assertEqual(paths[0].id, "T0-p000")
        self.assertEqual(len(set(path.links for path in paths)), 10)
        for path in paths:
            nodes = ["a"]
            for linkId in path.links:
                nodes.append(self.instance.getLink(linkId).otherEnd(nodes[-1]))
            self.assertEqual(nodes[-1], "i")
            self.assertEqual(len(set(nodes)), len(nodes))

    def testCostMetric(self):
        paths = yenKsp(self.instance, "a", "i", 3, metric="cost")
        self.assertEqual(paths[0].cost, 4.0)
        self.assertEqual(paths[0].links[0], "ad")
        self.assertEqual(paths[0].id, "a-i-p000")

    def testDeterministic(self):
        self.assertEqual(yenKsp(self.instance, "a", "i", 8), yenKsp(self.instance, "a", "i", 8))

    def testTieAtK(self):
        # all 6 shortest paths tie; the first 2 must be the 2 smallest link-id sequences
        paths = yenKsp(self.instance, "a", "i", 2)
        allPaths = yenKsp(self.instance, "a", "i", 6)
        self.assertEqual(paths, allPaths[:2])
        self.assertEqual([path.links for path in paths], sorted(path.links for path in allPaths)[:2])

    def testDisconnected(self):
        instance = NetworkInstance(["a", "b", "c"], [Link("ab", "a", "b", 1.0, 1.0)])
        self.assertEqual(yenKsp(instance, "a", "c", 3), [])

    def testErrors(self):
        self.assertRaises(InvalidParameterError, yenKsp, self.instance, "a", "i", 0)
        self.assertRaises(InvalidParameterError, yenKsp, self.instance, "a", "a", 2)
        self.assertRaises(InstanceError, yenKsp, self.instance, "a", "zz", 2)


class TestSelectDisjoint(unittest.TestCase):
    def testPrefersDisjoint(self):
        instance = testUtils.threePathInstance()
        others = list(testUtils.threePathSet(instance).paths("T0"))
        candidates = [Path("p0", "T0", ("a0", "a1", "a2"), 3.0)] + others[1:] \
            + [Path("p9", "T0", ("a0", "a1", "a2"), 3.0)]
        # p0 and p9 are identical routes; a disjoint choice needs p0 (or p9), p2 and p3
        selected = selectDisjoint(candidates, instance.srlgs, 3)
        self.assertEqual(disjointnessOf(selected, instance.srlgs), 1)
        self.assertEqual([path.id for path in selected], ["p0", "p2", "p3"])

    def testNoSrlgs(self):
        paths = list(testUtils.threePathSet().paths("T0"))
        self.assertEqual(selectDisjoint(paths, (), 2), paths[:2])
        self.assertEqual(disjointnessOf(paths, ()), 0)

    def testTooFew(self):
        paths = list(testUtils.threePathSet().paths("T0"))
        try:
            selectDisjoint(paths, (), 4, tunnelId="T0")
        except InsufficientPathsError as e:
            self.assertEqual((e.tunnelId, e.numFound, e.numWanted), ("T0", 3, 4))
        else:
            self.fail("selected 4 of 3 paths")

    def testGreedyMatchesExhaustive(self):
        instance = parseGraphml(testUtils.ringChordGraphml())
        instance = instance.withSrlgs(enumerateSrlgs(instance, 1))
        candidates = yenKsp(instance, "n0", "n3", 18)
        exhaustive = selectDisjoint(candidates, instance.srlgs, 3)
        limit = pathGenerator.ExhaustiveLimit
        pathGenerator.ExhaustiveLimit = 0
        try:
            heuristic = selectDisjoint(candidates, instance.srlgs, 3)
        finally:
            pathGenerator.ExhaustiveLimit = limit
        self.assertEqual(disjointnessOf(heuristic, instance.srlgs), disjointnessOf(exhaustive, instance.srlgs))


class TestBuildPathsets(unittest.TestCase):
    def testRingChord(self):
        instance = parseGraphml(testUtils.ringChordGraphml())
        instance = instance.withTunnels([Tunnel("T0", "n0", "n4", 10.0, True), Tunnel("T1", "n1", "n2", 5.0, False)])
        instance = instance.withSrlgs(enumerateSrlgs(instance, 1))
        pathSet = buildPathsets(instance, PathGenConfig(n=3, expansion=5))
        self.assertEqual(pathSet.tunnelIds, ("T0", "T1"))
        for tunnelId in pathSet.tunnelIds:
            self.assertEqual(len(pathSet.paths(tunnelId)), 3)
            self.assertEqual(pathSet.disjointnessObjective(tunnelId), 1)

    def testAllowFewer(self):
        instance = NetworkInstance(["a", "b", "c"], [Link("ab", "a", "b", 1.0, 1.0), Link("bc", "b", "c", 1.0, 1.0)],
            [Tunnel("T0", "a", "c", 1.0, False)])
        self.assertRaises(InsufficientPathsError, buildPathsets, instance, PathGenConfig(n=2))
        pathSet = buildPathsets(instance, PathGenConfig(n=2, allowFewer=True))
        self.assertEqual(len(pathSet.paths("T0")), 1)

    def testConfig(self):
        self.assertEqual(PathGenConfig(n=6, expansion=30).numCandidates, 180)
        self.assertRaises(InvalidParameterError, PathGenConfig, n=0)
        self.assertRaises(InvalidParameterError, PathGenConfig, expansion=0)
        self.assertRaises(InvalidParameterError, PathGenConfig, metric="latency")

    def testSrlgsSteerSelection(self):
        # one SRLG holds n0-n1 and n0-n7, so a disjoint pair must use the chord n0-n4
        instance = parseGraphml(testUtils.ringChordGraphml())
        instance = instance.withTunnels([Tunnel("T0", "n0", "n4", 10.0, True)])
        linkIds = [instance.linkBetween("n0", "n1").id, instance.linkBetween("n0", "n7").id]
        instance = instance.withSrlgs(numberSrlgs([linkIds]))
        pathSet = buildPathsets(instance, PathGenConfig(n=2, expansion=10))
        self.assertEqual(pathSet.disjointnessObjective("T0"), 1)


if __name__ == "__main__":
    unittest.main()
