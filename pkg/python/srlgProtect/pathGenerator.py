"""!Candidate path generation

For each tunnel, expansion * n loop-free shortest paths are generated with Yen's algorithm
and an n-subset is kept that minimizes the largest number of selected paths sharing one SRLG.
"""
import itertools
from math import comb

import networkx as nx
import numpy as np

from .instance import InstanceError, InvalidParameterError, Path, TunnelPathSet
from .log import log

__all__ = ["InsufficientPathsError", "PathGenConfig", "yenKsp", "selectDisjoint", "buildPathsets",
    "disjointnessOf"]

# largest number of subsets searched exhaustively by selectDisjoint
ExhaustiveLimit = 100000
_MetricTol = 1e-9


class InsufficientPathsError(Exception):
    """!A tunnel has fewer candidate paths than requested
    """
    def __init__(self, tunnelId, numFound, numWanted):
        self.tunnelId = tunnelId
        self.numFound = numFound
        self.numWanted = numWanted
        Exception.__init__(self, "tunnel %s has %d candidate paths; %d wanted" % (tunnelId, numFound, numWanted))


class PathGenConfig(object):
    """!How many paths to generate per tunnel and how to measure them
    """
    Metrics = ("hop", "cost")

    def __init__(self, n=3, expansion=30, metric="hop", allowFewer=False):
        """!Construct a PathGenConfig

        @param[in] n  paths kept per tunnel (3 and 6 in the experiments)
        @param[in] expansion  Yen generates expansion * n candidates
        @param[in] metric  "hop": minimize hop count; "cost": minimize the sum of link unit costs.
            The routing cost of a path is its length in this metric.
        @param[in] allowFewer  if True a tunnel with fewer than n (but at least one) candidates
            keeps all of them; if False that is an InsufficientPathsError

        @throw InvalidParameterError if a parameter is out of range
        """
        if n < 1:
            raise InvalidParameterError("n=%r must be >= 1" % (n,))
        if expansion < 1:
            raise InvalidParameterError("expansion=%r must be >= 1" % (expansion,))
        if metric not in self.Metrics:
            raise InvalidParameterError("metric=%r must be one of %s" % (metric, self.Metrics))
        self.n = int(n)
        self.expansion = int(expansion)
        self.metric = metric
        self.allowFewer = bool(allowFewer)

    @property
    def numCandidates(self):
        return self.n * self.expansion

    def __repr__(self):
        return "%s(n=%s, expansion=%s, metric=%r, allowFewer=%s)" % \
            (type(self).__name__, self.n, self.expansion, self.metric, self.allowFewer)


def _makeGraph(instance):
    graph = nx.Graph()
    graph.add_nodes_from(instance.nodes)
    for link in instance.links:
        graph.add_edge(link.a, link.b, linkId=link.id, cost=link.cost)
    return graph


def yenKsp(instance, source, dest, k, metric="hop", tunnelId=None, graph=None):
    """!Return up to k loop-free paths from source to dest, shortest first

    Paths are ordered by (length in the metric, hop count, link-id sequence);
    the tie order at the k-th length is resolved by generating every path of that length.

    @param[in] instance  a NetworkInstance
    @param[in] source  source node
    @param[in] dest  destination node
    @param[in] k  maximum number of paths
    @param[in] metric  "hop" or "cost"
    @param[in] tunnelId  tunnel the paths belong to; used for path ids ("<tunnelId>-p<nnn>").
        Defaults to "<source>-<dest>".
    @param[in] graph  networkx graph of the instance, if already built
    @return a list of Path; empty if source and dest are disconnected

    @throw InvalidParameterError if k < 1 or source == dest
    @throw InstanceError if source or dest is not a node
    """
    if k < 1:
        raise InvalidParameterError("k=%r must be >= 1" % (k,))
    if source == dest:
        raise InvalidParameterError("source and destination are both %r" % (source,))
    if metric not in PathGenConfig.Metrics:
        raise InvalidParameterError("metric=%r must be one of %s" % (metric, PathGenConfig.Metrics))
    if graph is None:
        graph = _makeGraph(instance)
    for node in (source, dest):
        if node not in graph:
            raise InstanceError("unknown node %r" % (node,))
    if tunnelId is None:
        tunnelId = "%s-%s" % (source, dest)

    weight = None if metric == "hop" else "cost"
    found = []
    try:
        for nodeList in nx.shortest_simple_paths(graph, source, dest, weight=weight):
            linkIds = tuple(graph.edges[a, b]["linkId"] for a, b in zip(nodeList[:-1], nodeList[1:]))
            if metric == "hop":
                length = float(len(linkIds))
            else:
                length = float(sum(graph.edges[a, b]["cost"] for a, b in zip(nodeList[:-1], nodeList[1:])))
            if len(found) >= k and length > found[k - 1][0] + _MetricTol:
                break
            found.append((length, len(linkIds), tuple(str(linkId) for linkId in linkIds), linkIds))
    except nx.NetworkXNoPath:
        return []

    found.sort(key=lambda item: item[:3])
    return [Path("%s-p%03d" % (tunnelId, ind), tunnelId, linkIds, length)
        for ind, (length, _, _, linkIds) in enumerate(found[:k])]


def _incidence(candidates, srlgs):
    """!Boolean matrix [path, srlg]: True if the path contains a link of the SRLG
    """
    matrix = np.zeros((len(candidates), len(srlgs)), dtype=bool)
    for j, srlg in enumerate(srlgs):
        linkSet = srlg.linkSet
        for i, path in enumerate(candidates):
            matrix[i, j] = not linkSet.isdisjoint(path.links)
    return matrix


def disjointnessOf(paths, srlgs):
    """!The largest number of paths intersecting one SRLG (0 if there are no SRLGs)
    """
    if not paths or not srlgs:
        return 0
    return int(_incidence(paths, srlgs).sum(axis=0).max())


class _SubsetScorer(object):
    """!Ranks subsets of candidate indices by (objective, total hops, sorted path ids)
    """
    def __init__(self, candidates, srlgs):
        self.candidates = candidates
        self.matrix = _incidence(candidates, srlgs).astype(np.int32)
        self.hops = np.array([path.hopCount for path in candidates], dtype=np.int64)
        self.ids = [str(path.id) for path in candidates]

    def objective(self, inds):
        if self.matrix.shape[1] == 0:
            return 0
        return int(self.matrix[list(inds)].sum(axis=0).max())

    def key(self, inds):
        return (self.objective(inds), int(self.hops[list(inds)].sum()), tuple(sorted(self.ids[i] for i in inds)))

    def exhaustive(self, n, chunkSize=2000):
        numCand, numSrlg = self.matrix.shape
        bestKey = None
        bestInds = None
        combos = itertools.combinations(range(numCand), n)
        while True:
            chunk = np.array(list(itertools.islice(combos, chunkSize)), dtype=np.int64)
            if len(chunk) == 0:
                break
            if numSrlg:
                objs = self.matrix[chunk].sum(axis=1).max(axis=1)
            else:
                objs = np.zeros(len(chunk), dtype=np.int64)
            hops = self.hops[chunk].sum(axis=1)
            minObj = objs.min()
            mask = objs == minObj
            minHops = hops[mask].min()
            for row in chunk[mask & (hops == minHops)]:
                inds = tuple(int(i) for i in row)
                currKey = self.key(inds)
                if bestKey is None or currKey < bestKey:
                    bestKey = currKey
                    bestInds = inds
        return bestInds

    def greedy(self, n):
        selected = []
        counts = np.zeros(self.matrix.shape[1], dtype=np.int64)
        for _ in range(n):
            bestKey = None
            bestInd = None
            for i in range(len(self.candidates)):
                if i in selected:
                    continue
                newCounts = counts + self.matrix[i]
                currKey = (int(newCounts.max()) if len(newCounts) else 0, int(self.hops[i]), self.ids[i])
                if bestKey is None or currKey < bestKey:
                    bestKey = currKey
                    bestInd = i
            selected.append(bestInd)
            counts += self.matrix[bestInd]
        return tuple(selected)

    def localSearch(self, inds):
        """!Improve a subset by single swaps until no swap improves its key
        """
        inds = list(inds)
        currKey = self.key(inds)
        improved = True
        while improved:
            improved = False
            bestSwap = None
            for pos in range(len(inds)):
                for cand in range(len(self.candidates)):
                    if cand in inds:
                        continue
                    trial = inds[:pos] + [cand] + inds[pos + 1:]
                    trialKey = self.key(trial)
                    if trialKey < currKey and (bestSwap is None or trialKey < bestSwap[0]):
                        bestSwap = (trialKey, trial)
            if bestSwap is not None:
                currKey, inds = bestSwap
                improved = True
        return tuple(inds)


def selectDisjoint(candidates, srlgs, n, tunnelId=None):
    """!Choose n of the candidate paths, minimizing how many of them share an SRLG

    The objective is the maximum over SRLGs of the number of selected paths intersecting it;
    ties are broken by the smallest total hop count, then by the sorted path ids.
    The search is exhaustive when there are at most ExhaustiveLimit subsets; otherwise it is a greedy
    construction followed by a 2-swap local search, started from whichever of the greedy subset
    and the first n candidates ranks better.

    @param[in] candidates  list of Path
    @param[in] srlgs  list of Srlg
    @param[in] n  number of paths to select
    @param[in] tunnelId  tunnel the candidates belong to (for error messages)
    @return a list of n Path, in candidate order

    @throw InsufficientPathsError if there are fewer than n candidates
    """
    candidates = list(candidates)
    if tunnelId is None and candidates:
        tunnelId = candidates[0].tunnelId
    if len(candidates) < n:
        raise InsufficientPathsError(tunnelId, len(candidates), n)
    scorer = _SubsetScorer(candidates, srlgs)
    if comb(len(candidates), n) <= ExhaustiveLimit:
        inds = scorer.exhaustive(n)
    else:
        greedyInds = scorer.greedy(n)
        firstInds = tuple(range(n))
        startInds = min((greedyInds, firstInds), key=scorer.key)
        inds = scorer.localSearch(startInds)
    return [candidates[i] for i in sorted(inds)]


def buildPathsets(instance, config):
    """!Generate the candidate paths of every tunnel

    @param[in] instance  a NetworkInstance; its SRLGs drive the disjoint selection
    @param[in] config  a PathGenConfig
    @return a TunnelPathSet

    @throw InsufficientPathsError if a tunnel has too few paths (see PathGenConfig.allowFewer)
    """
    graph = _makeGraph(instance)
    pathDict = dict()
    for tunnel in instance.tunnels:
        candidates = yenKsp(instance, tunnel.source, tunnel.dest, config.numCandidates,
            metric=config.metric, tunnelId=tunnel.id, graph=graph)
        if len(candidates) < config.n:
            if not (config.allowFewer and candidates):
                raise InsufficientPathsError(tunnel.id, len(candidates), config.n)
            log.warn("tunnel %s keeps only %d of %d paths" % (tunnel.id, len(candidates), config.n))
            selected = candidates
        else:
            selected = selectDisjoint(candidates, instance.srlgs, config.n, tunnelId=tunnel.id)
        log.debug("tunnel %s: %d candidates, selected %s (objective %d)" %
            (tunnel.id, len(candidates), [path.id for path in selected], disjointnessOf(selected, instance.srlgs)))
        pathDict[tunnel.id] = selected
    pathSet = TunnelPathSet(instance, pathDict)
    log.info("built paths for %d tunnels (%s)" % (len(pathDict), config))
    return pathSet
