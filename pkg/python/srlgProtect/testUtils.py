"""!Utilities and fixtures to aid unit tests
"""
import os

import numpy as np

from .instance import Link, NetworkInstance, Path, Tunnel, TunnelPathSet, enumerateSrlgs
from .log import startFileLogging, stopLogging
from .surrogate import ConvexSurrogate, Neuron, TrainConfig, buildTrainingGrid, train

__all__ = ["init", "threePathInstance", "threePathSet", "ringChordGraphml", "zooLikeGraphml",
    "squareNeuronSurrogate", "trainedSurrogate"]


def startLogging(filePath):
    """!Log to a file in tests/.tests named after the test module

    @param[in] filePath  path of file being tested (e.g. __file__); must be in subdir tests of your package
        (NOT deeper in the hierarchy) in order to determine where the log file should go.
    @return the path of the log file, or None if filePath is None
    """
    if filePath is None:
        return None
    testDir, testFile = os.path.split(filePath)
    logDir = os.path.join(testDir, ".tests")
    if not os.path.exists(logDir):
        os.makedirs(logDir)
    logFileName = "%s" % (os.path.splitext(testFile)[0],)
    return startFileLogging(os.path.join(logDir, logFileName))


def init(filePath=None):
    """!Prepare for a unit test

    @param[in] filePath  path of file being tested (e.g. __file__), or None:
        - If supplied must be in subdir tests of your package (NOT deeper in the hierarchy)
            in order to determine where the log file should go.
        - If None, no log file is created.
    @return the path of the log file, or None
    """
    stopLogging() # stop in case logging is already on.
    return startLogging(filePath)


def threePathInstance(demand=100.0, capacity=float("inf"), protected=True, q=1, epsilon=0.01):
    """!One tunnel s -> t with three link-disjoint 3-link paths, unit costs, all q-link SRLGs

    Paths: s-a1-a2-t (links a0 a1 a2), s-b1-b2-t (b0 b1 b2), s-c1-c2-t (c0 c1 c2).
    """
    links = []
    for branch in "abc":
        hops = ["s", "%s1" % (branch,), "%s2" % (branch,), "t"]
        for ind in range(3):
            links.append(Link("%s%d" % (branch, ind), hops[ind], hops[ind + 1], capacity, 1.0))
    nodes = ["s", "t"] + ["%s%d" % (branch, ind) for branch in "abc" for ind in (1, 2)]
    instance = NetworkInstance(nodes, links, [Tunnel("T0", "s", "t", demand, protected)], epsilon=epsilon)
    return instance.withSrlgs(enumerateSrlgs(instance, q))


def threePathSet(instance=None, pathCost=3.0, **kwargs):
    """!The three paths p1, p2, p3 of threePathInstance

    @param[in] instance  instance from threePathInstance; if None one is made with kwargs
    @param[in] pathCost  routing cost c_p of every path (default: hop count)
    """
    if instance is None:
        instance = threePathInstance(**kwargs)
    paths = [Path("p%d" % (ind + 1,), "T0", tuple("%s%d" % (branch, hop) for hop in range(3)), pathCost)
        for ind, branch in enumerate("abc")]
    return TunnelPathSet(instance, {"T0": paths})


def _graphmlText(nodes, edges, withCapacity=True):
    lines = [
        '<?xml version="1.0" encoding="utf-8"?>',
        '<graphml xmlns="http://graphml.graphdrawing.org/xmlns">',
        '  <key attr.name="LinkSpeedRaw" attr.type="double" for="edge" id="d0"/>',
        '  <key attr.name="weight" attr.type="double" for="edge" id="d1"/>',
        '  <graph edgedefault="undirected">',
    ]
    for node in nodes:
        lines.append('    <node id="%s"/>' % (node,))
    for ind, (a, b, speed, weight) in enumerate(edges):
        lines.append('    <edge id="e%02d" source="%s" target="%s">' % (ind, a, b))
        if withCapacity:
            lines.append('      <data key="d0">%s</data>' % (speed,))
        lines.append('      <data key="d1">%s</data>' % (weight,))
        lines.append('    </edge>')
    lines += ['  </graph>', '</graphml>', '']
    return "\n".join(lines)


def ringChordGraphml():
    """!GraphML of an 8-node ring with 4 chords (12 edges, 10 Gbit/s, unit weight)
    """
    nodes = ["n%d" % (ind,) for ind in range(8)]
    edges = [(nodes[ind], nodes[(ind + 1) % 8], 1.0e10, 1) for ind in range(8)]
    edges += [(nodes[a], nodes[b], 1.0e10, 1) for a, b in ((0, 4), (1, 5), (2, 6), (3, 7))]
    return _graphmlText(nodes, edges)


def zooLikeGraphml(numNodes=20, numChords=8, seed=0):
    """!GraphML of a ring of numNodes with numChords random chords, random weights 1..5

    Resembles a small Internet Topology Zoo network; 2-connected so any tunnel has several paths.
    """
    rng = np.random.default_rng(seed)
    nodes = ["z%02d" % (ind,) for ind in range(numNodes)]
    pairs = set(frozenset((ind, (ind + 1) % numNodes)) for ind in range(numNodes))
    edges = [(nodes[ind], nodes[(ind + 1) % numNodes]) for ind in range(numNodes)]
    while len(edges) < numNodes + numChords:
        a, b = (int(val) for val in rng.choice(numNodes, size=2, replace=False))
        if frozenset((a, b)) in pairs:
            continue
        pairs.add(frozenset((a, b)))
        edges.append((nodes[a], nodes[b]))
    weights = rng.integers(1, 6, size=len(edges))
    return _graphmlText(nodes, [(a, b, 1.0e10, int(weight)) for (a, b), weight in zip(edges, weights)])


def squareNeuronSurrogate(ax=1.0, ay=0.5, bi=0.0, ai=2.0, bias=0.1):
    """!Single pow2 neuron surrogate: ai * (ax x + ay y + bi)^2 + bias
    """
    return ConvexSurrogate([Neuron("pow2", ax, ay, bi, ai)], bias)


_trainedDict = dict()


def trainedSurrogate(epochs=300, seed=0):
    """!A surrogate trained on the default grid; memoized per (epochs, seed)
    """
    key = (epochs, seed)
    if key not in _trainedDict:
        _trainedDict[key] = train(buildTrainingGrid(), TrainConfig(epochs=epochs, seed=seed))
    return _trainedDict[key]
